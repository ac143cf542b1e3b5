"""Expanding maps and their branch calculus.

Three families are supported:

* :class:`AnalyticCircleMap` -- ``x -> k x + eps sin(2 pi x) mod 1`` on the circle,
* :class:`BetaTransformation` -- ``x -> beta x mod 1`` on ``[0, 1]``,
* :class:`TsujiiSkewProduct` -- ``(x, y) -> (m x, y + m cos(2 pi x)) mod 1`` on the torus.

All maps are immutable. Every method accepts scalars or arrays and is pure.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Union

import numpy as np

from .errors import EnumerationOverflow, NewtonDivergence

__all__ = [
    "AnalyticCircleMap",
    "BetaTransformation",
    "TsujiiSkewProduct",
    "PeriodicOrbit",
    "MapModel",
    "evaluate",
    "derivative",
    "inverse_branches",
    "periodic_points",
    "circle_distance",
    "map_from_spec",
    "map_to_spec",
]

TWO_PI = 2.0 * np.pi

#: Newton iteration cap for branch and periodic-point solves.
NEWTON_MAX_ITER = 50
#: Residual target ``|T(y) - x|`` for inverse branches.
BRANCH_TOL = 1e-13
#: Largest number of points a periodic-point enumeration may produce.
ENUMERATION_LIMIT = 10**6
#: Two periodic points closer than this are the same point.
ORBIT_MERGE_TOL = 1e-9


def circle_distance(a, b):
    """Distance between points of ``R/Z``."""
    d = np.mod(np.asarray(a, dtype=float) - b + 0.5, 1.0) - 0.5
    return np.abs(d)


@dataclass(frozen=True)
class AnalyticCircleMap:
    """The circle map ``x -> k x + eps sin(2 pi x) mod 1``.

    Expansion requires ``2 pi |eps| < k - 1`` so that
    ``inf |T'| = k - 2 pi |eps| > 1``.
    """

    k: int
    eps: float = 0.0

    def __post_init__(self):
        if int(self.k) != self.k or self.k < 2:
            raise ValueError(f"degree must be an integer >= 2, got {self.k}")
        if TWO_PI * abs(self.eps) >= self.k - 1:
            raise ValueError(
                f"eps={self.eps} breaks expansion: need 2*pi*|eps| < k - 1 = {self.k - 1}"
            )

    dim = 1

    @property
    def name(self) -> str:
        return f"circle(k={self.k},eps={self.eps:g})"

    @property
    def n_branches(self) -> int:
        return self.k

    @property
    def min_expansion(self) -> float:
        return self.k - TWO_PI * abs(self.eps)

    def lift(self, x):
        """Lift of the map to the real line (no reduction mod 1)."""
        x = np.asarray(x, dtype=float)
        return self.k * x + self.eps * np.sin(TWO_PI * x)

    def __call__(self, x):
        return np.mod(self.lift(x), 1.0)

    def derivative(self, x):
        x = np.asarray(x, dtype=float)
        return self.k + TWO_PI * self.eps * np.cos(TWO_PI * x)

    def preimages(self, x):
        """All inverse branches at ``x``.

        Returns ``(ys, dT)`` of shape ``x.shape + (k,)``, sorted along the last
        axis, where ``dT`` holds ``|T'(y)|``.
        """
        x = np.mod(np.asarray(x, dtype=float), 1.0)
        targets = x[..., None] + np.arange(self.k)
        ys = targets / self.k
        if self.eps != 0.0:
            ys = _newton_lift(self, ys, targets)
        return ys, np.abs(self.derivative(ys))


def _newton_lift(tmap: AnalyticCircleMap, ys, targets):
    """Solve ``lift(y) = target`` elementwise, seeded at ``ys``."""
    ys = np.array(ys, dtype=float)
    for _ in range(NEWTON_MAX_ITER):
        g = tmap.lift(ys) - targets
        if np.all(np.abs(g) <= BRANCH_TOL * 0.25):
            break
        dg = tmap.derivative(ys)
        step = g / dg
        step = np.where(np.abs(dg) < 1.1, 0.5 * step, step)
        ys = ys - step
    resid = circle_distance(tmap(ys), np.mod(targets, 1.0))
    if np.any(resid > BRANCH_TOL):
        raise NewtonDivergence(
            f"inverse branch solve for {tmap.name} stalled at residual {resid.max():.3e}"
        )
    return ys


@dataclass(frozen=True)
class BetaTransformation:
    """The beta transformation ``x -> beta x mod 1`` on ``[0, 1]``.

    At ``x = 1`` the value is ``beta - floor(beta)`` (right-continuous
    convention; for integer beta this is 0). The choice is measure zero.
    """

    beta: float

    def __post_init__(self):
        if not self.beta > 1:
            raise ValueError(f"beta must exceed 1, got {self.beta}")

    dim = 1

    @property
    def name(self) -> str:
        return f"beta({self.beta:.12g})"

    @property
    def n_branches(self) -> int:
        return int(math.ceil(self.beta))

    @property
    def min_expansion(self) -> float:
        return float(self.beta)

    def __call__(self, x):
        return np.mod(self.beta * np.asarray(x, dtype=float), 1.0)

    def derivative(self, x):
        return np.full_like(np.asarray(x, dtype=float), self.beta)

    def preimages(self, x):
        """Candidate branches ``(x + j) / beta`` with a validity mask.

        Returns ``(ys, dT, valid)``; entries with ``valid == False`` fall
        outside ``[0, 1]`` and must be ignored.
        """
        x = np.asarray(x, dtype=float)
        ys = (x[..., None] + np.arange(self.n_branches)) / self.beta
        valid = ys <= 1.0
        return ys, np.full_like(ys, self.beta), valid


@dataclass(frozen=True)
class TsujiiSkewProduct:
    """Skew product ``(x, y) -> (m x, y + m cos(2 pi x))`` on the 2-torus."""

    m: int

    def __post_init__(self):
        if int(self.m) != self.m or self.m < 2:
            raise ValueError(f"m must be an integer >= 2, got {self.m}")

    dim = 2

    @property
    def name(self) -> str:
        return f"tsujii(m={self.m})"

    @property
    def n_branches(self) -> int:
        return self.m

    def __call__(self, p):
        p = np.asarray(p, dtype=float)
        x, y = p[..., 0], p[..., 1]
        return np.stack(
            [np.mod(self.m * x, 1.0), np.mod(y + self.m * np.cos(TWO_PI * x), 1.0)], axis=-1
        )

    def derivative(self, p):
        """Derivative matrix ``[[m, 0], [-2 pi m sin(2 pi x), 1]]``, shape ``(..., 2, 2)``."""
        p = np.asarray(p, dtype=float)
        x = p[..., 0]
        out = np.zeros(x.shape + (2, 2))
        out[..., 0, 0] = self.m
        out[..., 1, 0] = -TWO_PI * self.m * np.sin(TWO_PI * x)
        out[..., 1, 1] = 1.0
        return out

    def jacobian(self, p):
        return np.full(np.asarray(p, dtype=float).shape[:-1], float(self.m))

    def preimages(self, p):
        """Returns ``(ys, D)`` with shapes ``(..., m, 2)`` and ``(..., m, 2, 2)``."""
        p = np.asarray(p, dtype=float)
        x, y = p[..., 0], p[..., 1]
        xs = (x[..., None] + np.arange(self.m)) / self.m
        ys = np.mod(y[..., None] - self.m * np.cos(TWO_PI * xs), 1.0)
        pts = np.stack([xs, ys], axis=-1)
        return pts, self.derivative(pts)


MapModel = Union[AnalyticCircleMap, BetaTransformation, TsujiiSkewProduct]


def evaluate(tmap: MapModel, x):
    """``T(x)`` reduced into ``[0, 1)`` (componentwise on the torus)."""
    return tmap(x)


def derivative(tmap: MapModel, x):
    return tmap.derivative(x)


def inverse_branches(tmap: MapModel, x) -> list:
    """All preimages of a single point, sorted.

    For 1D maps each entry is ``(y, |T'(y)|)``; for the skew product it is
    ``(y, D_y T)`` with ``y`` a length-2 array, sorted lexicographically.
    """
    if isinstance(tmap, BetaTransformation):
        ys, dT, valid = tmap.preimages(float(x))
        return [(float(y), float(d)) for y, d, v in zip(ys, dT, valid) if v]
    if isinstance(tmap, AnalyticCircleMap):
        ys, dT = tmap.preimages(float(x))
        return [(float(y), float(d)) for y, d in zip(ys, dT)]
    pts, D = tmap.preimages(np.asarray(x, dtype=float))
    order = np.lexsort((pts[:, 1], pts[:, 0]))
    return [(pts[i], D[i]) for i in order]


@dataclass(frozen=True)
class PeriodicOrbit:
    """A periodic orbit of minimal period ``period``, starting at its smallest point."""

    period: int
    points: tuple
    closure_residual: float

    @property
    def start(self) -> float:
        return self.points[0]


def periodic_points(tmap: MapModel, n: int) -> list:
    """All orbits whose minimal period divides ``n``.

    Orbits are sorted by (period, smallest point). For circle maps with
    ``eps == 0`` the closed form ``j / (k**n - 1)`` is used; otherwise each
    of those seeds is continued in ``eps`` by Newton's method. Beta
    transformations are handled exactly through their affine cylinders.
    """
    if tmap.dim != 1:
        raise ValueError("periodic points are only available for 1D maps")
    if n < 1:
        raise ValueError("period must be >= 1")
    if isinstance(tmap, AnalyticCircleMap):
        pts = _circle_periodic_points(tmap, n)
    else:
        pts = _beta_periodic_points(tmap, n)
    return _group_orbits(tmap, np.sort(pts), n)


def _circle_periodic_points(tmap: AnalyticCircleMap, n: int) -> np.ndarray:
    count = tmap.k**n - 1
    if count > ENUMERATION_LIMIT:
        raise EnumerationOverflow(f"{count} period-{n} points exceed {ENUMERATION_LIMIT}")
    j = np.arange(count, dtype=float)
    xs = j / count
    if tmap.eps == 0.0:
        return xs
    # homotopy in eps from the linear map
    n_steps = max(1, int(math.ceil(abs(tmap.eps) / 0.01)))
    for s in range(1, n_steps + 1):
        stage = AnalyticCircleMap(tmap.k, tmap.eps * s / n_steps)
        xs = _newton_periodic(stage, xs, j, n)
    return xs


def _orbit_lift(tmap: AnalyticCircleMap, x, n: int):
    """Integer part, fractional part and derivative of the lifted ``T^n`` at ``x``."""
    frac = np.array(x, dtype=float)
    whole = np.zeros_like(frac)
    dT = np.ones_like(frac)
    for _ in range(n):
        dT = dT * tmap.derivative(frac)
        lifted = tmap.lift(frac)
        fl = np.floor(lifted)
        whole = tmap.k * whole + fl
        frac = lifted - fl
    return whole, frac, dT


def _newton_periodic(tmap: AnalyticCircleMap, xs, j, n: int):
    xs = np.array(xs, dtype=float)
    for _ in range(NEWTON_MAX_ITER):
        whole, frac, dT = _orbit_lift(tmap, xs, n)
        g = (whole - j) + (frac - xs)
        if np.all(np.abs(g) <= 1e-15):
            break
        dg = dT - 1.0
        step = g / dg
        step = np.where(np.abs(dT) < 1.1, 0.5 * step, step)
        xs = xs - step
    whole, frac, _ = _orbit_lift(tmap, xs, n)
    resid = np.abs((whole - j) + (frac - xs))
    if np.any(resid > 1e-12):
        raise NewtonDivergence(
            f"period-{n} Newton continuation for {tmap.name} stalled at {resid.max():.3e}"
        )
    return xs


def _beta_periodic_points(tmap: BetaTransformation, n: int) -> np.ndarray:
    beta = tmap.beta
    if tmap.n_branches**n > ENUMERATION_LIMIT:
        raise EnumerationOverflow(
            f"{tmap.n_branches}**{n} cylinders exceed {ENUMERATION_LIMIT}"
        )
    # each cylinder is [a, b) with T^i(x) = s*x - c on it
    a = np.array([0.0])
    b = np.array([1.0])
    c = np.array([0.0])
    s = 1.0
    for _ in range(n):
        na, nb, nc = [], [], []
        for j in range(tmap.n_branches):
            lo = np.maximum(a, (j / beta + c) / s)
            hi = np.minimum(b, ((j + 1) / beta + c) / s)
            keep = hi > lo
            na.append(lo[keep])
            nb.append(hi[keep])
            nc.append(beta * c[keep] + j)
        a, b, c = np.concatenate(na), np.concatenate(nb), np.concatenate(nc)
        s *= beta
    x = c / (s - 1.0)
    inside = (x >= a) & (x < b)
    return np.unique(x[inside])


def _group_orbits(tmap, pts: np.ndarray, n: int) -> list:
    """Split the solution set of ``T^n x = x`` into minimal-period orbits."""
    if pts.size == 0:
        return []
    # merge numerically coincident points
    keep = np.ones(pts.size, dtype=bool)
    keep[1:] = np.diff(pts) > ORBIT_MERGE_TOL
    pts = pts[keep]
    if pts.size > 1 and circle_distance(pts[0], pts[-1]) <= ORBIT_MERGE_TOL:
        pts = pts[:-1]

    def snap(q):
        i = np.searchsorted(pts, q)
        cand = [i % pts.size, (i - 1) % pts.size]
        d = [circle_distance(pts[c], q) for c in cand]
        best = cand[int(np.argmin(d))]
        return best, min(d)

    seen = np.zeros(pts.size, dtype=bool)
    orbits = []
    for i0 in range(pts.size):
        if seen[i0]:
            continue
        members = [i0]
        cur = i0
        for _ in range(n):
            nxt, dist = snap(float(tmap(pts[cur])))
            if dist > 1e-7:
                raise NewtonDivergence(
                    f"orbit of {pts[i0]!r} left the periodic set (gap {dist:.2e})"
                )
            if nxt == i0:
                break
            members.append(nxt)
            cur = nxt
        seen[members] = True
        period = len(members)
        y = pts[i0]
        for _ in range(period):
            y = tmap(y)
        orbit_pts = tuple(float(pts[m]) for m in members)
        k0 = int(np.argmin(orbit_pts))
        orbit_pts = orbit_pts[k0:] + orbit_pts[:k0]
        orbits.append(PeriodicOrbit(period, orbit_pts, float(circle_distance(y, pts[i0]))))
    orbits.sort(key=lambda o: (o.period, o.points[0]))
    return orbits


def map_from_spec(spec: dict) -> MapModel:
    """Build a map from its JSON description.

    >>> map_from_spec({"type": "circle", "k": 2, "eps": 0.0})
    AnalyticCircleMap(k=2, eps=0.0)
    """
    kind = spec.get("type")
    if kind == "circle":
        return AnalyticCircleMap(int(spec["k"]), float(spec.get("eps", 0.0)))
    if kind == "beta":
        beta = spec["beta"]
        if isinstance(beta, str) and beta == "golden":
            beta = (1.0 + math.sqrt(5.0)) / 2.0
        return BetaTransformation(float(beta))
    if kind == "tsujii":
        return TsujiiSkewProduct(int(spec["m"]))
    raise ValueError(f"unknown map type {kind!r}")


def map_to_spec(tmap: MapModel) -> dict:
    if isinstance(tmap, AnalyticCircleMap):
        return {"type": "circle", "k": tmap.k, "eps": tmap.eps}
    if isinstance(tmap, BetaTransformation):
        return {"type": "beta", "beta": tmap.beta}
    return {"type": "tsujii", "m": tmap.m}
