"""Leading eigendata and Riesz projections of (twisted) transfer operators.

For a simple isolated eigenvalue near 1 the Riesz projection

    P_t = (1 / 2 pi i) * integral over |s - 1| = r of (s I - L_t)^{-1} ds

is evaluated with the K-node trapezoidal rule, which converges
geometrically on circles. The perturbed eigenfunction is ``chi_t = P_t chi``
(no renormalization, so that ``t -> chi_t`` stays holomorphic) and its
eigenvalue ``lambda(t)`` is the Rayleigh quotient of ``L_t`` at ``chi_t``.

Dense operators get the full projection matrix. Sparse (Ulam) operators
are too large for that: the projection is applied to a thin block of
probe vectors in one pass over the contour, with adjoint solves on the
same factorizations, and the projection diagnostics are read off a
randomized sketch.
"""
from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Sequence

import numpy as np
import scipy.linalg as la
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .basis import Basis, FunctionRep
from .errors import (
    ContourCrossesSpectrum,
    DegenerateLeadingEigenvalue,
    ProjectionKilledChi,
    WrongEnclosedCount,
)
from .maps import MapModel
from .transfer import OperatorMatrix, assemble, assemble_twisted

__all__ = [
    "EigenData",
    "PerturbedEigenData",
    "EigenDerivatives",
    "ContourSpec",
    "RieszProjection",
    "TwistedFamily",
    "leading_eigen",
    "default_contour",
    "riesz_projection",
    "perturbed_eigendata",
    "eigen_derivatives_at_zero",
    "lambda_curve_csv",
]

log = logging.getLogger(__name__)

DEGENERACY_TOL = 1e-8
CONDITION_LIMIT = 1e12
TRACE_TOL = 1e-6
KILLED_TOL = 1e-8
SKETCH_WIDTH = 4


@dataclass(frozen=True)
class EigenData:
    """Leading eigenpair of a plain transfer operator.

    ``density`` is normalized to integral 1. ``gap`` is
    ``1 - |second eigenvalue|`` (estimated for sparse operators).
    """

    eigenvalue: complex
    density: FunctionRep
    residual: float
    gap: float
    second_modulus: float


@dataclass(frozen=True)
class ContourSpec:
    """Circle ``|s - center| = radius`` sampled at ``nodes`` points."""

    radius: float
    nodes: int = 32
    center: complex = 1.0

    def __post_init__(self):
        if not self.radius > 0:
            raise ValueError("contour radius must be positive")
        if self.nodes < 16:
            raise ValueError("contour needs at least 16 nodes")

    def quadrature(self):
        """Nodes ``s_k`` and weights ``w_k`` with ``P = sum_k w_k (s_k - L)^{-1}``."""
        theta = 2.0 * np.pi * np.arange(self.nodes) / self.nodes
        z = self.radius * np.exp(1j * theta)
        return self.center + z, z / self.nodes


def default_contour(eig: EigenData, nodes: int = 32) -> ContourSpec:
    """Radius ``min(0.25, gap / 2)``."""
    return ContourSpec(min(0.25, 0.5 * eig.gap), nodes)


def _normalize_density(basis: Basis, v: np.ndarray) -> FunctionRep:
    v = v / basis.integral(v)
    rep = basis.wrap(v)
    if basis.family == "fourier":
        if rep.symmetry_defect() <= 1e-10:
            rep = rep.as_real()
    elif np.abs(v.imag).max() <= 1e-10 * np.abs(v).max():
        rep = rep.as_real()
    return rep


def leading_eigen(op: OperatorMatrix) -> EigenData:
    """Eigenvalue of largest modulus with its eigenvector as a density.

    Dense matrices are fully diagonalized. Sparse Ulam matrices use power
    iteration for the density and the decay rate on the zero-integral
    subspace (which the plain operator preserves) for the gap.
    """
    if op.t != 0:
        raise ValueError("leading_eigen expects a plain (t = 0) operator")
    basis = op.basis
    if op.is_sparse:
        lam, v, second = _sparse_leading(op)
    else:
        w, V = np.linalg.eig(op.dense())
        order = np.argsort(-np.abs(w))
        lam = w[order[0]]
        second = float(np.abs(w[order[1]])) if w.size > 1 else 0.0
    if abs(lam) - second < DEGENERACY_TOL:
        raise DegenerateLeadingEigenvalue(
            f"leading moduli {abs(lam):.12f} and {second:.12f} are not separated"
        )
    if not op.is_sparse:
        v = _refine(op.dense(), lam, V[:, order[0]], basis)
    chi = _normalize_density(basis, v)
    Lchi = op.apply(chi.vector)
    resid = basis.norm(Lchi - lam * chi.vector) / basis.norm(chi.vector)
    return EigenData(complex(lam), chi, float(resid), float(1.0 - second), float(second))


def _refine(A: np.ndarray, lam: complex, v: np.ndarray, basis: Basis, max_iter: int = 100):
    """Polish an eigenvector by power steps.

    LAPACK eigenvectors of strongly non-normal matrices (the doubling map's
    nilpotent part) can be off by ~1e-10; the remaining spectrum is small,
    so a few normalized steps of ``v -> A v / lam`` fix this.
    """
    v = v / basis.integral(v)
    best = np.linalg.norm(A @ v - lam * v)
    for _ in range(max_iter):
        w = A @ v / lam
        w = w / basis.integral(w)
        r = np.linalg.norm(A @ w - lam * w)
        if r >= best:
            break
        v, best = w, r
    return v


def _sparse_leading(op: OperatorMatrix, tol: float = 1e-14, max_iter: int = 5000):
    A = op.matrix
    basis = op.basis
    v = np.ones(op.dim, dtype=complex)
    lam = 1.0
    for _ in range(max_iter):
        w = A @ v
        lam = basis.inner(w, v) / basis.inner(v, v)
        w = w / basis.integral(w)
        if np.linalg.norm(w - v) <= tol * np.linalg.norm(v):
            v = w
            break
        v = w
    else:
        log.warning("power iteration did not reach tolerance %.1e", tol)
    # decay rate on the invariant zero-integral subspace
    rng = np.random.default_rng(12345)
    z = rng.standard_normal(op.dim)
    z -= z.mean()
    z /= np.linalg.norm(z)
    logs = []
    for _ in range(400):
        z = A @ z
        z -= z.mean()
        nz = np.linalg.norm(z)
        if nz == 0:
            return lam, v, 0.0
        logs.append(np.log(nz))
        z /= nz
    second = float(np.exp(np.mean(logs[200:])))
    return lam, v, second


@dataclass
class RieszProjection:
    """Result of contour quadrature for one operator.

    ``matrix`` is the full projection for dense operators and ``None`` for
    sparse ones. ``images`` holds the projected probe vectors (columns).
    ``defect`` estimates ``||P^2 - P||``, ``rank_witness`` the second
    singular value, ``trace`` the trace of ``P``.
    """

    t: complex
    contour: ContourSpec
    matrix: np.ndarray | None
    images: np.ndarray | None
    trace: complex
    defect: float
    rank_witness: float
    max_condition: float
    op: OperatorMatrix | None = None

    def apply(self, v: np.ndarray) -> np.ndarray:
        if self.matrix is not None:
            return self.matrix @ v
        return riesz_projection(self.op, self.contour, probes=np.asarray(v)[:, None]).images[:, 0]


def riesz_projection(
    op_t: OperatorMatrix,
    contour: ContourSpec,
    probes: np.ndarray | None = None,
    seed: int = 0,
) -> RieszProjection:
    """Riesz projection of ``op_t`` for the eigenvalue inside ``contour``.

    Raises :class:`ContourCrossesSpectrum` when a resolvent is numerically
    singular and :class:`WrongEnclosedCount` when ``|trace - 1| > 1e-6``.
    """
    if op_t.is_sparse:
        proj = _riesz_sparse(op_t, contour, probes, seed)
    else:
        proj = _riesz_dense(op_t, contour, probes)
    if abs(proj.trace - 1.0) > TRACE_TOL:
        raise WrongEnclosedCount(
            f"contour r={contour.radius} encloses trace {proj.trace:.6g} at t={op_t.t}"
        )
    return proj


def _riesz_dense(op_t, contour, probes) -> RieszProjection:
    A = op_t.dense()
    n = A.shape[0]
    nodes, weights = contour.quadrature()
    eye = np.eye(n)
    P = np.zeros((n, n), dtype=complex)
    worst = 0.0
    for s, w in zip(nodes, weights):
        R = s * eye - A
        lu, piv = la.lu_factor(R)
        anorm = np.linalg.norm(R, 1)
        rcond, _ = la.lapack.zgecon(lu, anorm, norm="1")
        cond = np.inf if rcond == 0 else 1.0 / rcond
        worst = max(worst, cond)
        if cond > CONDITION_LIMIT:
            raise ContourCrossesSpectrum(
                f"resolvent at s={s:.4f} has condition {cond:.2e} (t={op_t.t})"
            )
        P += w * la.lu_solve((lu, piv), eye)
    sv = np.linalg.svd(P, compute_uv=False)
    defect = float(np.linalg.norm(P @ P - P, 2))
    images = None if probes is None else P @ probes
    return RieszProjection(
        op_t.t, contour, P, images, complex(np.trace(P)), defect,
        float(sv[1]) if sv.size > 1 else 0.0, float(worst), op_t,
    )


def _riesz_sparse(op_t, contour, probes, seed) -> RieszProjection:
    A = sp.csc_matrix(op_t.matrix, dtype=complex)
    n = A.shape[0]
    rng = np.random.default_rng(seed)
    omega, _ = np.linalg.qr(rng.standard_normal((n, SKETCH_WIDTH)))
    block = omega if probes is None else np.hstack([omega, probes])
    fwd = np.zeros(block.shape, dtype=complex)
    adj = np.zeros(omega.shape, dtype=complex)
    nodes, weights = contour.quadrature()
    eye = sp.identity(n, dtype=complex, format="csc")
    worst = 0.0
    for s, w in zip(nodes, weights):
        R = (s * eye - A).tocsc()
        lu = spla.splu(R)
        inv = spla.LinearOperator(
            (n, n), matvec=lu.solve, rmatvec=lambda b: lu.solve(b, trans="H"), dtype=complex
        )
        cond = spla.onenormest(R) * spla.onenormest(inv)
        worst = max(worst, cond)
        if cond > CONDITION_LIMIT:
            raise ContourCrossesSpectrum(
                f"resolvent at s={s:.4f} has condition {cond:.2e} (t={op_t.t})"
            )
        fwd += w * lu.solve(block)
        adj += np.conj(w) * lu.solve(omega, trans="H")
    Y = fwd[:, :SKETCH_WIDTH]
    M1 = omega.conj().T @ Y  # compressed P
    M2 = adj.conj().T @ Y  # compressed P^2
    sv = np.linalg.svd(Y, compute_uv=False)
    trace = np.trace(np.linalg.pinv(M1, rcond=1e-10) @ M2)
    defect = float(np.linalg.norm(M2 - M1, 2))
    images = None if probes is None else fwd[:, SKETCH_WIDTH:]
    return RieszProjection(
        op_t.t, contour, None, images, complex(trace), defect, float(sv[1]), float(worst), op_t
    )


@dataclass(frozen=True)
class PerturbedEigenData:
    """``(t, lambda(t), chi_t)`` with the health of the projection that produced them."""

    t: complex
    eigenvalue: complex
    chi_t: FunctionRep
    residual: float
    projection_defect: float
    rank_witness: float
    trace: complex


@dataclass(frozen=True)
class EigenDerivatives:
    """Derivatives of ``lambda`` and ``chi_t`` at ``t = 0``.

    ``dchi_fd`` is the central difference ``(chi_rho - chi_-rho) / (2 rho)``
    and ``fd_deviation`` its L2 distance from the Cauchy value ``dchi``.
    """

    dlambda: complex
    d2lambda: complex
    dchi: FunctionRep
    dchi_fd: FunctionRep
    fd_deviation: float
    rho: float
    nodes: int


class TwistedFamily:
    """The family ``t -> L_t`` for a map, basis and real observable.

    Caches the plain operator, its leading eigendata and the default
    contour, so repeated evaluations at different ``t`` share that work.
    """

    def __init__(self, tmap: MapModel, basis: Basis, f: FunctionRep, contour: ContourSpec | None = None):
        f.check_real()
        self.tmap = tmap
        self.basis = basis
        self.f = f
        self.plain = assemble(tmap, basis)
        self.eig = leading_eigen(self.plain)
        self.contour = contour if contour is not None else default_contour(self.eig)

    @property
    def chi(self) -> FunctionRep:
        return self.eig.density

    def operator(self, t) -> OperatorMatrix:
        return assemble_twisted(self.tmap, self.basis, self.f, t)

    def eigendata(self, t, contour: ContourSpec | None = None) -> PerturbedEigenData:
        contour = self.contour if contour is None else contour
        op_t = self.operator(t)
        chi = self.chi.vector
        proj = riesz_projection(op_t, contour, probes=chi[:, None])
        chi_t = proj.images[:, 0]
        norm = self.basis.norm(chi_t)
        if norm < KILLED_TOL:
            raise ProjectionKilledChi(f"||P_t chi|| = {norm:.2e} at t={t}")
        applied = op_t.apply(chi_t)
        lam = self.basis.inner(applied, chi_t) / self.basis.inner(chi_t, chi_t)
        resid = self.basis.norm(applied - lam * chi_t) / norm
        return PerturbedEigenData(
            complex(t), complex(lam), self.basis.wrap(chi_t), float(resid),
            proj.defect, proj.rank_witness, proj.trace,
        )

    def lambda_curve(self, ts: Sequence, workers: int = 1) -> list:
        if workers <= 1:
            return [self.eigendata(t) for t in ts]
        with ThreadPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(self.eigendata, ts))

    def derivatives_at_zero(self, rho: float = 1e-2, nodes: int = 16, workers: int = 1) -> EigenDerivatives:
        """Cauchy-integral derivatives over the circle ``|t| = rho``.

        ``g'(0) = mean(g(t_k) / t_k)`` and ``g''(0) = 2 mean(g(t_k) / t_k^2)``.
        """
        if nodes % 2:
            raise ValueError("node count must be even (the +-rho nodes feed the cross-check)")
        ts = rho * np.exp(2j * np.pi * np.arange(nodes) / nodes)
        data = self.lambda_curve(ts, workers)
        lam = np.array([d.eigenvalue for d in data])
        chis = np.array([d.chi_t.vector for d in data])
        dlam = np.mean(lam / ts)
        d2lam = 2.0 * np.mean(lam / ts**2)
        dchi = np.mean(chis / ts[:, None], axis=0)
        fd = (chis[0] - chis[nodes // 2]) / (2.0 * rho)
        dev = self.basis.norm(fd - dchi)
        return EigenDerivatives(
            complex(dlam), complex(d2lam), self.basis.wrap(dchi), self.basis.wrap(fd),
            float(dev), rho, nodes,
        )

    def working_range(self, t_max: float = 2.0, shrink: float = 0.8, min_t: float = 1e-3) -> float:
        """Largest ``t <= t_max`` (shrinking geometrically) where ``+-t`` pass the contour checks."""
        t = t_max
        while t >= min_t:
            try:
                self.eigendata(t)
                self.eigendata(-t)
                return t
            except (WrongEnclosedCount, ContourCrossesSpectrum, ProjectionKilledChi):
                t *= shrink
        return 0.0


def perturbed_eigendata(tmap, f, t, contour=None, basis=None) -> PerturbedEigenData:
    """``lambda(t)`` and ``chi_t = P_t chi`` for one twist parameter."""
    basis = f.basis if basis is None else basis
    return TwistedFamily(tmap, basis, f, contour).eigendata(t)


def eigen_derivatives_at_zero(tmap, f, basis=None, rho: float = 1e-2, K: int = 16) -> EigenDerivatives:
    basis = f.basis if basis is None else basis
    return TwistedFamily(tmap, basis, f).derivatives_at_zero(rho, K)


def lambda_curve_csv(data: Sequence[PerturbedEigenData]) -> str:
    """Rows ``t,re_lambda,im_lambda,abs_lambda,eigen_residual,proj_defect``."""
    lines = ["t,re_lambda,im_lambda,abs_lambda,eigen_residual,proj_defect"]
    for d in data:
        lines.append(
            ",".join(
                repr(float(v))
                for v in (
                    d.t.real, d.eigenvalue.real, d.eigenvalue.imag, abs(d.eigenvalue),
                    d.residual, d.projection_defect,
                )
            )
        )
    return "\n".join(lines) + "\n"
