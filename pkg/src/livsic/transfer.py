"""Transfer operators and their twisted versions as matrices.

The transfer operator of a map ``T`` sums branch contributions,

    (L phi)(x) = sum_{T y = x} phi(y) / |T'(y)|,

and the twisted operator is ``L_t phi = L(exp(i t f) phi)``. Fourier
matrices are built by collocation at ``2(2N+1)`` nodes; Ulam matrices for
the beta transformation are exact cell-to-cell transfer fractions and are
stored sparse.
"""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Union

import numpy as np
import scipy.sparse as sp

from .basis import Basis, FourierBasis, FourierRep, FunctionRep, UlamBasis, UlamRep
from .errors import BasisMismatch, IncompatiblePair
from .maps import AnalyticCircleMap, BetaTransformation, MapModel

__all__ = [
    "OperatorMatrix",
    "assemble",
    "assemble_twisted",
    "apply_transfer",
    "duality_residual",
    "weighted_row_decay",
    "QUADRATURE_POINTS",
]

TWO_PI = 2.0 * np.pi
QUADRATURE_POINTS = 2**14
# column chunk for Fourier assembly; bounds the phase buffer to ~64 MB
_CHUNK_ENTRIES = 4_000_000


@dataclass(frozen=True)
class OperatorMatrix:
    """A finite-rank discretization of ``L`` or ``L_t``.

    ``matrix`` acts on coefficient vectors of ``basis`` (Fourier modes
    ``-N..N`` or Ulam cell values). Ulam matrices are ``scipy.sparse``.
    """

    basis: Basis
    matrix: Union[np.ndarray, sp.spmatrix]
    t: complex = 0.0
    map_id: str = ""
    f_id: str = ""
    extra: dict = field(default_factory=dict, compare=False, repr=False)

    @property
    def is_sparse(self) -> bool:
        return sp.issparse(self.matrix)

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    def dense(self) -> np.ndarray:
        return self.matrix.toarray() if self.is_sparse else np.asarray(self.matrix)

    def apply(self, vec):
        return self.matrix @ vec

    def __call__(self, rep: FunctionRep) -> FunctionRep:
        return self.basis.wrap(self.matrix @ rep.vector)

    @property
    def ulam_transition(self):
        """Row-stochastic cell transition ``M_ij = Leb(A_i & T^-1 A_j) / Leb(A_i)``."""
        if not isinstance(self.basis, UlamBasis):
            raise TypeError("only Ulam operators have a cell transition matrix")
        return self.matrix.T

    def integral_defect(self) -> float:
        """How far the matrix is from preserving integrals (``psi = 1`` duality)."""
        if isinstance(self.basis, FourierBasis):
            row = np.asarray(self.dense()[self.basis.N])
            target = np.zeros_like(row)
            target[self.basis.N] = 1.0
            return float(np.abs(row - target).max())
        colsum = np.asarray(self.matrix.sum(axis=0)).ravel()
        return float(np.abs(colsum - 1.0).max())

    def to_csv(self) -> str:
        """Row-major dump with header ``row,col,re,im``.

        Dense matrices list every entry; sparse ones list stored nonzeros only.
        """
        if self.is_sparse:
            C = sp.coo_matrix(self.matrix)
            order = np.lexsort((C.col, C.row))
            rows, cols, vals = C.row[order], C.col[order], C.data[order]
        else:
            A = np.asarray(self.matrix)
            rows, cols = np.divmod(np.arange(A.size), A.shape[1])
            vals = A.ravel()
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["row", "col", "re", "im"])
        for i, j, v in zip(rows, cols, vals):
            w.writerow([int(i), int(j), repr(float(v.real)), repr(float(v.imag))])
        return buf.getvalue()


def _check_pair(tmap: MapModel, basis: Basis) -> None:
    ok = (isinstance(tmap, AnalyticCircleMap) and isinstance(basis, FourierBasis)) or (
        isinstance(tmap, BetaTransformation) and isinstance(basis, UlamBasis)
    )
    if not ok:
        raise IncompatiblePair(
            f"{type(tmap).__name__} cannot be discretized in a {type(basis).__name__}"
        )


@lru_cache(maxsize=32)
def _branch_grid(tmap: AnalyticCircleMap, n_nodes: int):
    x = np.arange(n_nodes) / n_nodes
    ys, dT = tmap.preimages(x)
    ys.setflags(write=False)
    w = 1.0 / dT
    w.setflags(write=False)
    return ys, w


def fourier_kernel(
    tmap: AnalyticCircleMap,
    N: int,
    weight: Callable | None = None,
    n_cols: int | None = None,
) -> np.ndarray:
    """Collocated matrix of ``phi -> L(weight * phi)``.

    Rows are modes ``-N..N``; columns are modes ``-n_cols..n_cols``
    (default ``N``). ``weight`` maps branch points to multipliers.
    """
    n_cols = N if n_cols is None else n_cols
    n_nodes = 2 * (2 * max(N, n_cols) + 1)
    ys, w = _branch_grid(tmap, n_nodes)
    w = w.astype(complex) if weight is None else w * weight(ys)
    col_modes = np.arange(-n_cols, n_cols + 1)
    rows = np.arange(-N, N + 1) % n_nodes
    out = np.empty((2 * N + 1, col_modes.size), dtype=complex)
    step = max(1, _CHUNK_ENTRIES // (ys.size))
    for start in range(0, col_modes.size, step):
        modes = col_modes[start : start + step]
        phase = np.exp(TWO_PI * 1j * ys[..., None] * modes)
        vals = np.einsum("jb,jbm->jm", w, phase)
        coeffs = np.fft.fft(vals, axis=0) / n_nodes
        out[:, start : start + step] = coeffs[rows]
    return out


@lru_cache(maxsize=16)
def _ulam_matrix(beta: float, N: int) -> sp.csr_matrix:
    """Exact Ulam matrix (action on cell values) for ``x -> beta x mod 1``."""
    a = np.arange(N) / N
    b = np.arange(1, N + 1) / N
    n_branch = int(np.ceil(beta))
    width = int(np.ceil(beta)) + 2
    rows, cols, vals = [], [], []
    cells = np.arange(N)
    for j in range(n_branch):
        lo = np.maximum(a, j / beta)
        hi = np.minimum(b, (j + 1) / beta)
        live = hi > lo
        u = np.clip(beta * lo - j, 0.0, 1.0)
        v = np.clip(beta * hi - j, 0.0, 1.0)
        k0 = np.floor(u * N).astype(int)
        for d in range(width):
            k = k0 + d
            ov = np.minimum(v, (k + 1) / N) - np.maximum(u, k / N)
            keep = live & (ov > 0) & (k < N)
            rows.append(k[keep])
            cols.append(cells[keep])
            vals.append(ov[keep] * N / beta)
    L = sp.coo_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(N, N)
    ).tocsr()
    L.sum_duplicates()
    return L


def assemble(tmap: MapModel, basis: Basis) -> OperatorMatrix:
    """Matrix of the plain transfer operator.

    Circle maps pair with :class:`FourierBasis`, beta transformations with
    :class:`UlamBasis`; anything else raises :class:`IncompatiblePair`.
    """
    _check_pair(tmap, basis)
    if isinstance(basis, FourierBasis):
        A = fourier_kernel(tmap, basis.N)
    else:
        A = _ulam_matrix(float(tmap.beta), basis.N).astype(complex)
    return OperatorMatrix(basis, A, 0.0, tmap.name, "")


def assemble_twisted(
    tmap: MapModel, basis: Basis, f: FunctionRep, t, f_id: str = "f"
) -> OperatorMatrix:
    """Matrix of ``phi -> L(exp(i t f) phi)`` for complex ``t``.

    ``f`` must be a real-flagged representation in ``basis``. At ``t == 0``
    this is exactly :func:`assemble`.
    """
    _check_pair(tmap, basis)
    f.check_real()
    if f.basis != basis:
        raise BasisMismatch("observable and operator use different bases")
    if t == 0:
        op = assemble(tmap, basis)
        return OperatorMatrix(basis, op.matrix, 0.0, tmap.name, f_id)
    if isinstance(basis, FourierBasis):
        A = fourier_kernel(tmap, basis.N, weight=lambda y: np.exp(1j * t * f(y)))
    else:
        twist = np.exp(1j * t * f.values.real)
        A = _ulam_matrix(float(tmap.beta), basis.N) @ sp.diags(twist)
        A = sp.csr_matrix(A)
    return OperatorMatrix(basis, A, complex(t), tmap.name, f_id)


def apply_transfer(tmap: MapModel, phi: Callable, x) -> np.ndarray:
    """Evaluate ``(L phi)(x)`` directly from the branch sum (no discretization)."""
    x = np.asarray(x, dtype=float)
    if isinstance(tmap, BetaTransformation):
        ys, dT, valid = tmap.preimages(x)
        vals = np.where(valid, phi(np.minimum(ys, 1.0)) / dT, 0.0)
        return vals.sum(axis=-1)
    ys, dT = tmap.preimages(x)
    return (phi(ys) / dT).sum(axis=-1)


def _random_trig(rng: np.random.Generator, degree: int = 3) -> Callable:
    ks = np.arange(-degree, degree + 1)
    a = (rng.standard_normal(ks.size) + 1j * rng.standard_normal(ks.size)) / (1.0 + np.abs(ks)) ** 2
    a /= np.abs(a).sum()

    def psi(x):
        x = np.asarray(x, dtype=float)
        return np.exp(TWO_PI * 1j * x[..., None] * ks) @ a

    return psi


def duality_residual(
    tmap: MapModel,
    op: OperatorMatrix,
    trials: int = 8,
    seed: int = 0,
    test_functions: str = "smooth",
) -> float:
    """Largest violation of ``int (psi o T) phi = int psi (L phi)`` over random pairs.

    ``phi`` runs over basis elements (Fourier modes, or Ulam cells scaled to
    unit mass) and ``psi`` over random bounded test functions: smooth
    trigonometric polynomials (``test_functions="smooth"``) or indicators of
    random unions of Ulam cells (``"indicator"``). Both integrals use the
    ``2**14``-point midpoint rule.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    rng = np.random.default_rng(seed)
    xq = (np.arange(QUADRATURE_POINTS) + 0.5) / QUADRATURE_POINTS
    Txq = tmap(xq)
    basis = op.basis
    worst = 0.0
    for _ in range(trials):
        if test_functions == "indicator":
            if not isinstance(basis, UlamBasis):
                raise ValueError("indicator test functions need an Ulam basis")
            mask = rng.random(basis.N) < 0.5
            psi = lambda x, mask=mask: mask[
                np.clip(np.floor(np.asarray(x) * basis.N).astype(int), 0, basis.N - 1)
            ].astype(float)
        else:
            psi = _random_trig(rng)
        idx = int(rng.integers(basis.dim))
        e = np.zeros(basis.dim, dtype=complex)
        e[idx] = 1.0 if isinstance(basis, FourierBasis) else basis.N
        phi = basis.wrap(e)
        image = basis.wrap(np.asarray(op.apply(e)).ravel())
        lhs = np.mean(psi(Txq) * phi(xq))
        rhs = np.mean(psi(xq) * image(xq))
        worst = max(worst, abs(lhs - rhs))
    return float(worst)


def weighted_row_decay(op: OperatorMatrix, radius: float = np.e**0.5) -> float:
    """Geometric decay rate of the annulus-weighted row envelope.

    Entries are rescaled as ``|M_nm| R^{|n| - |m|}`` (the matrix in the basis
    normalized on the circle of radius ``R``); the row maxima are fitted by
    ``C rho^{|n|}`` and ``rho`` is returned. ``rho < 1`` witnesses the
    compactness of the operator on analytic functions.
    """
    if not isinstance(op.basis, FourierBasis):
        raise TypeError("row decay is defined for Fourier matrices")
    A = np.abs(op.dense())
    n = np.abs(op.basis.modes)
    W = A * radius ** (n[:, None] - n[None, :])
    env = W.max(axis=1)
    keep = env > 1e-300
    slope = np.polyfit(n[keep], np.log(env[keep]), 1)[0]
    return float(np.exp(slope))
