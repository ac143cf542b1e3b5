"""Finite representations of observables and densities.

Two bases on one-dimensional phase spaces are provided:

``FourierBasis(N)``
    trigonometric polynomials ``sum_{|n| <= N} c_n exp(2 pi i n x)`` on the
    circle. Coefficient vectors are stored in the order ``n = -N, ..., N``.
``UlamBasis(N)``
    piecewise constants on the cells ``[i/N, (i+1)/N)`` of ``[0, 1]``.

A third, :class:`Rep2D`, carries double Fourier series on the torus.

Representations are immutable values; their numpy buffers are flagged
read-only. Products and exponentials of Fourier data are formed by
collocation on a grid of ``2 (2N + 1)`` points, which is free of aliasing
for the retained modes.
"""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from typing import Callable, Union

import numpy as np

from .errors import BasisMismatch, NonRealObservable

__all__ = [
    "FourierBasis",
    "UlamBasis",
    "FourierRep",
    "UlamRep",
    "Rep2D",
    "FunctionRep",
    "project",
    "multiply",
    "integrate",
    "evaluate",
    "exp_scale",
    "pointwise",
    "basis_from_spec",
    "rep_to_csv",
    "rep_from_csv",
]

TWO_PI = 2.0 * np.pi
#: relative tolerance of the real-valued (conjugate symmetry) check
REAL_TOL = 1e-14


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=complex)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class FourierBasis:
    """Fourier modes ``-N..N`` on the circle."""

    N: int

    family = "fourier"

    def __post_init__(self):
        if self.N < 0:
            raise ValueError("truncation order must be >= 0")

    @property
    def dim(self) -> int:
        return 2 * self.N + 1

    @property
    def modes(self) -> np.ndarray:
        return np.arange(-self.N, self.N + 1)

    @property
    def sample_count(self) -> int:
        """Sample count used by :func:`project` (4N, at least 4)."""
        return max(4 * self.N, 4)

    @property
    def grid_size(self) -> int:
        """Collocation grid for products and exponentials."""
        return 2 * self.dim

    def grid(self, size: int | None = None) -> np.ndarray:
        size = self.grid_size if size is None else size
        return np.arange(size) / size

    def from_samples(self, samples: np.ndarray, real: bool | None = None) -> "FourierRep":
        """Coefficients ``-N..N`` from equispaced samples ``f(j / M)``."""
        samples = np.asarray(samples)
        M = samples.shape[0]
        if real is None:
            real = not np.iscomplexobj(samples) or not np.any(samples.imag)
        if real:
            half = np.fft.rfft(np.real(samples)) / M
            pos = half[: self.N + 1]
            if pos.size < self.N + 1:
                pos = np.concatenate([pos, np.zeros(self.N + 1 - pos.size)])
            coeffs = np.concatenate([np.conj(pos[:0:-1]), pos])
        else:
            full = np.fft.fft(samples) / M
            coeffs = full[self.modes % M]
        return FourierRep(self, coeffs, bool(real))

    def to_samples(self, coeffs: np.ndarray, size: int) -> np.ndarray:
        """Values on the grid ``j / size``; requires ``size > 2N``."""
        buf = np.zeros(size, dtype=complex)
        buf[self.modes % size] = coeffs
        return np.fft.ifft(buf) * size

    def project(self, f: Callable) -> "FourierRep":
        x = self.grid(self.sample_count)
        return self.from_samples(np.asarray(f(x)))

    def zeros(self) -> "FourierRep":
        return FourierRep(self, np.zeros(self.dim), True)

    def constant(self, c) -> "FourierRep":
        coeffs = np.zeros(self.dim, dtype=complex)
        coeffs[self.N] = c
        return FourierRep(self, coeffs, bool(np.imag(c) == 0))

    def basis_vector(self, n: int) -> "FourierRep":
        coeffs = np.zeros(self.dim, dtype=complex)
        coeffs[n + self.N] = 1.0
        return FourierRep(self, coeffs, n == 0)

    def integral(self, vec: np.ndarray):
        """Lebesgue integral of the coefficient vector(s) along axis 0."""
        return np.asarray(vec)[self.N]

    def integral_functional(self) -> np.ndarray:
        e = np.zeros(self.dim)
        e[self.N] = 1.0
        return e

    def inner(self, a: np.ndarray, b: np.ndarray) -> complex:
        """L2 pairing ``int a conj(b) dx`` (Parseval)."""
        return complex(np.vdot(b, a))

    def norm(self, a: np.ndarray) -> float:
        return float(np.linalg.norm(a))

    def wrap(self, vec: np.ndarray, real: bool = False) -> "FourierRep":
        return FourierRep(self, vec, real)

    def spec(self) -> dict:
        return {"family": "fourier", "N": self.N}


@dataclass(frozen=True)
class UlamBasis:
    """Piecewise constants on ``N`` equal cells of ``[0, 1]``."""

    N: int

    family = "ulam"

    def __post_init__(self):
        if self.N < 1:
            raise ValueError("cell count must be >= 1")

    @property
    def dim(self) -> int:
        return self.N

    @property
    def midpoints(self) -> np.ndarray:
        return (np.arange(self.N) + 0.5) / self.N

    def project(self, f: Callable) -> "UlamRep":
        vals = np.asarray(f(self.midpoints))
        real = not np.iscomplexobj(vals) or not np.any(vals.imag)
        return UlamRep(self, vals, bool(real))

    def zeros(self) -> "UlamRep":
        return UlamRep(self, np.zeros(self.N), True)

    def constant(self, c) -> "UlamRep":
        return UlamRep(self, np.full(self.N, c, dtype=complex), bool(np.imag(c) == 0))

    def basis_vector(self, i: int) -> "UlamRep":
        v = np.zeros(self.N)
        v[i] = 1.0
        return UlamRep(self, v, True)

    def integral(self, vec: np.ndarray):
        return np.asarray(vec).sum(axis=0) / self.N

    def integral_functional(self) -> np.ndarray:
        return np.full(self.N, 1.0 / self.N)

    def inner(self, a: np.ndarray, b: np.ndarray) -> complex:
        return complex(np.vdot(b, a)) / self.N

    def norm(self, a: np.ndarray) -> float:
        return float(np.linalg.norm(a)) / np.sqrt(self.N)

    def wrap(self, vec: np.ndarray, real: bool = False) -> "UlamRep":
        return UlamRep(self, vec, real)

    def spec(self) -> dict:
        return {"family": "ulam", "N": self.N}


Basis = Union[FourierBasis, UlamBasis]


class FourierRep:
    """A trigonometric polynomial ``sum c_n exp(2 pi i n x)``.

    Parameters
    ----------
    basis : FourierBasis
    coeffs : array_like, shape (2N+1,)
        Coefficients for ``n = -N, ..., N``.
    real : bool
        Declares the function real-valued, i.e. ``c_{-n} = conj(c_n)``.
        The claim is verified lazily by :meth:`check_real`.
    """

    __slots__ = ("basis", "coeffs", "real")

    def __init__(self, basis: FourierBasis, coeffs, real: bool = False):
        coeffs = np.asarray(coeffs)
        if coeffs.shape != (basis.dim,):
            raise ValueError(f"expected {basis.dim} coefficients, got shape {coeffs.shape}")
        object.__setattr__(self, "basis", basis)
        object.__setattr__(self, "coeffs", _frozen(coeffs))
        object.__setattr__(self, "real", bool(real))

    def __setattr__(self, name, value):
        raise AttributeError("FourierRep is immutable")

    def __repr__(self):
        return f"FourierRep(N={self.basis.N}, real={self.real})"

    @property
    def vector(self) -> np.ndarray:
        return self.coeffs

    @property
    def N(self) -> int:
        return self.basis.N

    def coefficient(self, n: int) -> complex:
        return complex(self.coeffs[n + self.N])

    def symmetry_defect(self) -> float:
        c = self.coeffs
        scale = max(1.0, float(np.abs(c).max(initial=0.0)))
        return float(np.abs(c - np.conj(c[::-1])).max(initial=0.0)) / scale

    def check_real(self) -> None:
        """Raise :class:`NonRealObservable` unless flagged and symmetric."""
        if not self.real:
            raise NonRealObservable("observable is not flagged real-valued")
        defect = self.symmetry_defect()
        if defect > REAL_TOL:
            raise NonRealObservable(f"conjugate symmetry violated by {defect:.2e}")

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        phases = np.exp(TWO_PI * 1j * x[..., None] * self.basis.modes)
        vals = phases @ self.coeffs
        return vals.real if self.real else vals

    def samples(self, size: int | None = None) -> np.ndarray:
        size = self.basis.grid_size if size is None else size
        vals = self.basis.to_samples(self.coeffs, size)
        return vals.real if self.real else vals

    def integrate(self) -> complex:
        return complex(self.coeffs[self.N])

    def l2_norm(self) -> float:
        return float(np.linalg.norm(self.coeffs))

    def __add__(self, other):
        _check_same(self, other)
        return FourierRep(self.basis, self.coeffs + other.coeffs, self.real and other.real)

    def __sub__(self, other):
        _check_same(self, other)
        return FourierRep(self.basis, self.coeffs - other.coeffs, self.real and other.real)

    def __neg__(self):
        return FourierRep(self.basis, -self.coeffs, self.real)

    def scale(self, c) -> "FourierRep":
        return FourierRep(self.basis, c * self.coeffs, self.real and np.imag(c) == 0)

    def shift(self, c) -> "FourierRep":
        coeffs = self.coeffs.copy()
        coeffs[self.N] += c
        return FourierRep(self.basis, coeffs, self.real and np.imag(c) == 0)

    def as_real(self) -> "FourierRep":
        """Closest real-valued representation (symmetrized coefficients)."""
        c = 0.5 * (self.coeffs + np.conj(self.coeffs[::-1]))
        return FourierRep(self.basis, c, True)

    def resample(self, basis: FourierBasis) -> "FourierRep":
        """Zero-pad or truncate to another order."""
        out = np.zeros(basis.dim, dtype=complex)
        n = min(basis.N, self.N)
        out[basis.N - n : basis.N + n + 1] = self.coeffs[self.N - n : self.N + n + 1]
        return FourierRep(basis, out, self.real)


class UlamRep:
    """Cell values ``v_i`` on ``[i/N, (i+1)/N)``."""

    __slots__ = ("basis", "values", "real")

    def __init__(self, basis: UlamBasis, values, real: bool = False):
        values = np.asarray(values)
        if values.shape != (basis.N,):
            raise ValueError(f"expected {basis.N} cell values, got shape {values.shape}")
        object.__setattr__(self, "basis", basis)
        object.__setattr__(self, "values", _frozen(values))
        object.__setattr__(self, "real", bool(real))

    def __setattr__(self, name, value):
        raise AttributeError("UlamRep is immutable")

    def __repr__(self):
        return f"UlamRep(N={self.basis.N}, real={self.real})"

    @property
    def vector(self) -> np.ndarray:
        return self.values

    @property
    def N(self) -> int:
        return self.basis.N

    def check_real(self) -> None:
        if not self.real:
            raise NonRealObservable("observable is not flagged real-valued")
        scale = max(1.0, float(np.abs(self.values).max(initial=0.0)))
        if np.abs(self.values.imag).max(initial=0.0) > REAL_TOL * scale:
            raise NonRealObservable("cell values have nonzero imaginary parts")

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        idx = np.clip(np.floor(x * self.N).astype(int), 0, self.N - 1)
        vals = self.values[idx]
        return vals.real if self.real else vals

    def samples(self, size: int | None = None) -> np.ndarray:
        return self.values.real if self.real else self.values

    def integrate(self) -> complex:
        return complex(self.values.mean())

    def l1_norm(self) -> float:
        return float(np.abs(self.values).mean())

    def variation(self) -> float:
        """Discrete variation ``sum |v_{i+1} - v_i|``."""
        return float(np.abs(np.diff(self.values)).sum())

    def __add__(self, other):
        _check_same(self, other)
        return UlamRep(self.basis, self.values + other.values, self.real and other.real)

    def __sub__(self, other):
        _check_same(self, other)
        return UlamRep(self.basis, self.values - other.values, self.real and other.real)

    def __neg__(self):
        return UlamRep(self.basis, -self.values, self.real)

    def scale(self, c) -> "UlamRep":
        return UlamRep(self.basis, c * self.values, self.real and np.imag(c) == 0)

    def shift(self, c) -> "UlamRep":
        return UlamRep(self.basis, self.values + c, self.real and np.imag(c) == 0)

    def as_real(self) -> "UlamRep":
        return UlamRep(self.basis, self.values.real, True)


FunctionRep = Union[FourierRep, UlamRep]


def _check_same(a, b) -> None:
    if type(a) is not type(b) or a.basis != b.basis:
        raise BasisMismatch(f"cannot combine {a!r} with {b!r}")


def project(f: Callable, basis: Basis) -> FunctionRep:
    """Represent the pointwise function ``f`` in ``basis``.

    Fourier coefficients come from ``4N`` equispaced samples; Ulam cells take
    the midpoint value. The result is flagged real when the samples are.
    """
    return basis.project(f)


def pointwise(func: Callable, *reps: FunctionRep, real: bool | None = None) -> FunctionRep:
    """Apply ``func`` to sample values of ``reps`` and re-project.

    Fourier data is sampled on the ``2(2N+1)`` collocation grid, transformed
    back and truncated to order ``N``; Ulam data is processed cellwise.
    """
    first = reps[0]
    for r in reps[1:]:
        _check_same(first, r)
    basis = first.basis
    if isinstance(first, FourierRep):
        vals = func(*[r.samples(basis.grid_size) for r in reps])
        return basis.from_samples(np.asarray(vals), real=real)
    vals = np.asarray(func(*[r.samples() for r in reps]))
    if real is None:
        real = not np.iscomplexobj(vals) or not np.any(vals.imag)
    return UlamRep(basis, vals, real)


def multiply(a: FunctionRep, b: FunctionRep) -> FunctionRep:
    """Pointwise product; real-flagged when both factors are."""
    _check_same(a, b)
    both_real = a.real and b.real
    return pointwise(lambda u, v: u * v, a, b, real=both_real)


def integrate(a: FunctionRep) -> complex:
    """Integral against Lebesgue measure."""
    return a.integrate()


def evaluate(a: FunctionRep, x):
    return a(x)


def exp_scale(f: FunctionRep, t) -> FunctionRep:
    """``exp(i t f)`` by pointwise exponentiation on the collocation grid.

    ``f`` must be flagged real-valued. For real ``t`` the result is
    real only when ``t == 0``.
    """
    f.check_real()
    if t == 0:
        return f.basis.constant(1.0)
    return pointwise(lambda u: np.exp(1j * t * u), f, real=False)


def basis_from_spec(spec: dict) -> Basis:
    family = spec.get("family")
    if family == "fourier":
        return FourierBasis(int(spec["N"]))
    if family == "ulam":
        return UlamBasis(int(spec["N"]))
    raise ValueError(f"unknown basis family {family!r}")


def rep_to_csv(rep: FunctionRep) -> str:
    """Serialize as CSV with header ``index,re,im``."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["index", "re", "im"])
    if isinstance(rep, FourierRep):
        index = rep.basis.modes
    else:
        index = np.arange(rep.N)
    for i, v in zip(index, rep.vector):
        w.writerow([int(i), repr(float(v.real)), repr(float(v.imag))])
    return buf.getvalue()


def rep_from_csv(text: str, family: str) -> FunctionRep:
    rows = list(csv.DictReader(io.StringIO(text)))
    index = np.array([int(r["index"]) for r in rows])
    vals = np.array([float(r["re"]) + 1j * float(r["im"]) for r in rows])
    if family == "fourier":
        N = int(index.max())
        basis = FourierBasis(N)
        coeffs = np.zeros(basis.dim, dtype=complex)
        coeffs[index + N] = vals
        rep = FourierRep(basis, coeffs, False)
        return FourierRep(basis, coeffs, rep.symmetry_defect() <= REAL_TOL)
    basis = UlamBasis(index.size)
    out = np.zeros(basis.N, dtype=complex)
    out[index] = vals
    return UlamRep(basis, out, not np.any(out.imag))


class Rep2D:
    """Double Fourier series on the torus, modes ``|n_x| <= Nx, |n_y| <= Ny``."""

    __slots__ = ("Nx", "Ny", "coeffs", "real")

    def __init__(self, Nx: int, Ny: int, coeffs, real: bool = False):
        coeffs = np.asarray(coeffs)
        if coeffs.shape != (2 * Nx + 1, 2 * Ny + 1):
            raise ValueError("coefficient array has the wrong shape")
        object.__setattr__(self, "Nx", int(Nx))
        object.__setattr__(self, "Ny", int(Ny))
        object.__setattr__(self, "coeffs", _frozen(coeffs))
        object.__setattr__(self, "real", bool(real))

    def __setattr__(self, name, value):
        raise AttributeError("Rep2D is immutable")

    @classmethod
    def project(cls, f: Callable, Nx: int, Ny: int) -> "Rep2D":
        Mx, My = max(4 * Nx, 4), max(4 * Ny, 4)
        x = np.arange(Mx) / Mx
        y = np.arange(My) / My
        vals = np.asarray(f(x[:, None], y[None, :]))
        real = not np.iscomplexobj(vals) or not np.any(vals.imag)
        full = np.fft.fft2(vals) / (Mx * My)
        nx = np.arange(-Nx, Nx + 1) % Mx
        ny = np.arange(-Ny, Ny + 1) % My
        return cls(Nx, Ny, full[np.ix_(nx, ny)], real)

    def __call__(self, x, y):
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        ex = np.exp(TWO_PI * 1j * x[..., None] * np.arange(-self.Nx, self.Nx + 1))
        ey = np.exp(TWO_PI * 1j * y[..., None] * np.arange(-self.Ny, self.Ny + 1))
        vals = np.einsum("...i,ij,...j->...", ex, self.coeffs, ey)
        return vals.real if self.real else vals

    def integrate(self) -> complex:
        return complex(self.coeffs[self.Nx, self.Ny])
