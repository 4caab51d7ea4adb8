"""Radial grids, quadrature, 3D-radial norms, and the Newtonian potential.

Every function in this module treats a sampled radial function f(r) on
(0, r_max] as the restriction of a radial function on R^3, so volume
integrals carry the explicit 4*pi*r^2 weight:

    ||u||_{L^2}^2 = 4 pi Int r^2 u(r)^2 dr.

The inverse Laplacian of a radial density reduces to one-dimensional
cumulative integrals,

    I(f)(r) = (1/r) Int_0^r s^2 f(s) ds + Int_r^inf s f(s) ds,

which is what `riesz_radial` evaluates (tail beyond r_max dropped).

Quadrature is composite trapezoid on the stored nodes, with the segment
[0, r_1] included by treating integrands r^2 f and r f as zero at r = 0.
The contract is second-order convergence, not the particular rule.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import GridError, TailTruncationWarning

MIN_NODES = 64

#: |f(r_max)| * r_max^2 above this triggers a truncation warning.
TAIL_GUARD_TOL = 1e-8


@dataclass(frozen=True)
class RadialGrid:
    """Strictly increasing radii r_i > 0 with r_max = nodes[-1].

    kind is "uniform" (r_i = i*h) or "geometric" (constant ratio,
    clustering nodes near the origin).
    """

    nodes: np.ndarray
    kind: str

    def __post_init__(self):
        nodes = np.asarray(self.nodes, dtype=float)
        object.__setattr__(self, "nodes", nodes)
        if nodes.ndim != 1 or nodes.size < MIN_NODES:
            raise GridError(
                f"invalid-count: need at least {MIN_NODES} nodes, got {nodes.size}")
        if not np.all(np.isfinite(nodes)):
            raise GridError("invalid-radius: non-finite node")
        if nodes[0] <= 0 or np.any(np.diff(nodes) <= 0):
            raise GridError("invalid-radius: nodes must be strictly increasing and positive")
        if self.kind not in ("uniform", "geometric"):
            raise GridError(f"unsupported grid kind {self.kind!r}")

    @property
    def n(self) -> int:
        return self.nodes.size

    @property
    def r_max(self) -> float:
        return float(self.nodes[-1])

    @property
    def spacing(self) -> float:
        """Node spacing; only meaningful for uniform grids."""
        return float(self.nodes[1] - self.nodes[0])

    def is_uniform(self, rel_tol: float = 1e-9) -> bool:
        d = np.diff(self.nodes)
        return bool(np.all(np.abs(d - d[0]) <= rel_tol * d[0]))


def make_grid(kind: str, n_nodes: int, r_max: float) -> RadialGrid:
    """Build a radial grid of the requested kind.

    Uniform: r_i = i * r_max/n, i = 1..n.  Geometric: constant ratio with
    first node r_max / n^2, so fine resolution near the origin.
    """
    if n_nodes < MIN_NODES:
        raise GridError(f"invalid-count: need at least {MIN_NODES} nodes, got {n_nodes}")
    if not np.isfinite(r_max) or r_max <= 0:
        raise GridError(f"invalid-radius: r_max must be positive, got {r_max}")
    if kind == "uniform":
        h = r_max / n_nodes
        nodes = h * np.arange(1, n_nodes + 1)
    elif kind == "geometric":
        r_first = r_max / n_nodes**2
        nodes = np.geomspace(r_first, r_max, n_nodes)
    else:
        raise GridError(f"unsupported grid kind {kind!r}")
    # pin the endpoint exactly
    nodes[-1] = r_max
    return RadialGrid(nodes=nodes, kind=kind)


@dataclass(frozen=True)
class RadialProfile:
    """Real samples f(r_i) on a radial grid."""

    grid: RadialGrid
    values: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        object.__setattr__(self, "values", values)
        if values.shape != self.grid.nodes.shape:
            raise GridError("profile length does not match grid")
        if not np.all(np.isfinite(values)):
            raise GridError("profile contains non-finite values")

    @classmethod
    def from_function(cls, grid: RadialGrid, fn: Callable[[np.ndarray], np.ndarray]) -> "RadialProfile":
        return cls(grid, np.asarray(fn(grid.nodes), dtype=float))

    def with_values(self, values: np.ndarray) -> "RadialProfile":
        return RadialProfile(self.grid, values)


@dataclass(frozen=True)
class NormReport:
    """Squared L2 norm, squared gradient norm, and optionally ||u||_p^p."""

    l2_sq: float
    grad_sq: float
    lp_p: float | None = None


def quadrature_weights(grid: RadialGrid) -> np.ndarray:
    """Trapezoid weights for Int_0^{r_max} g(s) ds with g(0) = 0 assumed.

    The origin is treated as a virtual node carrying a zero sample, which
    is exact for the r^2 f and r f integrands used throughout.
    """
    r = grid.nodes
    w = np.empty_like(r)
    w[0] = 0.5 * r[1]              # covers [0, r_1] and half of [r_1, r_2]
    w[1:-1] = 0.5 * (r[2:] - r[:-2])
    w[-1] = 0.5 * (r[-1] - r[-2])
    return w


def volume_weights(grid: RadialGrid) -> np.ndarray:
    """Weights for 4 pi Int r^2 (.) dr; inner products in L^2(R^3)."""
    return 4.0 * np.pi * grid.nodes**2 * quadrature_weights(grid)


def radial_integral(grid: RadialGrid, samples: np.ndarray) -> float:
    """Int_0^{r_max} g(s) ds for g sampled on the nodes (g(0) = 0 assumed)."""
    return float(quadrature_weights(grid) @ samples)


def inner_product(u: RadialProfile, v: RadialProfile) -> float:
    """<u, v> in L^2(R^3) for radial u, v on a shared grid."""
    if not np.array_equal(u.grid.nodes, v.grid.nodes):
        raise GridError("profiles live on different grids")
    return float(volume_weights(u.grid) @ (u.values * v.values))


def derivative(u: RadialProfile) -> np.ndarray:
    """u'(r_i): second-order central differences, one-sided at the ends."""
    return np.gradient(u.values, u.grid.nodes, edge_order=2)


def norms(u: RadialProfile, p: float | None = None) -> NormReport:
    """Radial norms with the explicit 4 pi angular factor.

    lp_p = ||u||_p^p is included only when the exponent p is supplied.
    """
    w = volume_weights(u.grid)
    l2 = float(w @ u.values**2)
    du = derivative(u)
    grad = float(w @ du**2)
    lp = float(w @ np.abs(u.values) ** p) if p is not None else None
    return NormReport(l2_sq=l2, grad_sq=grad, lp_p=lp)


def _cumulative_from_origin(grid: RadialGrid, samples: np.ndarray) -> np.ndarray:
    """Cumulative trapezoid of g from 0 to each node, with g(0) = 0."""
    r = grid.nodes
    dr = np.diff(np.concatenate(([0.0], r)))
    avg = 0.5 * (np.concatenate(([0.0], samples[:-1])) + samples)
    return np.cumsum(dr * avg)


def riesz_radial(f: RadialProfile, tail_tol: float = TAIL_GUARD_TOL) -> RadialProfile:
    """Newtonian potential I(f) = (-Lap)^{-1} f of a radial density.

    Evaluates (1/r) Int_0^r s^2 f ds + Int_r^{r_max} s f ds by cumulative
    quadrature; the tail beyond r_max is treated as zero.  Emits
    TailTruncationWarning when |f(r_max)| r_max^2 exceeds tail_tol, with
    the offending magnitude as the estimate of what was dropped.
    """
    r = f.grid.nodes
    tail = abs(f.values[-1]) * r[-1] ** 2
    if tail > tail_tol:
        warnings.warn(
            f"density tail |f(r_max)| r_max^2 = {tail:.3e} exceeds {tail_tol:.1e}; "
            "potential is truncated", TailTruncationWarning, stacklevel=2)
    inner = _cumulative_from_origin(f.grid, r**2 * f.values)
    outer = _cumulative_from_origin(f.grid, r * f.values)
    values = inner / r + (outer[-1] - outer)
    return RadialProfile(f.grid, values)


def _nonuniform_d1_d2(r: np.ndarray, g: np.ndarray):
    """Interior first and second derivatives on an arbitrary grid (3-point)."""
    hm = r[1:-1] - r[:-2]
    hp = r[2:] - r[1:-1]
    gm, g0, gp = g[:-2], g[1:-1], g[2:]
    denom = hm * hp * (hm + hp)
    d1 = (gp * hm**2 - gm * hp**2 + g0 * (hp**2 - hm**2)) / denom
    d2 = 2.0 * (gm * hp - g0 * (hm + hp) + gp * hm) / denom
    return d1, d2


def laplacian_residual(f: RadialProfile, g: RadialProfile,
                       r_window: tuple[float, float] | None = None) -> float:
    """Harmonicity defect max |g'' + (2/r) g' + f| over interior nodes.

    For g = riesz_radial(f) this measures how well -Lap g = f holds under
    finite differences; it decays at second order for smooth f.  An
    optional r_window restricts the max (useful to exclude a density jump).
    """
    if not np.array_equal(f.grid.nodes, g.grid.nodes):
        raise GridError("profiles live on different grids")
    r = f.grid.nodes
    d1, d2 = _nonuniform_d1_d2(r, g.values)
    resid = np.abs(d2 + 2.0 * d1 / r[1:-1] + f.values[1:-1])
    if r_window is not None:
        lo, hi = r_window
        mask = (r[1:-1] >= lo) & (r[1:-1] <= hi)
        if not np.any(mask):
            raise GridError("empty residual window")
        resid = resid[mask]
    return float(resid.max())


def radial_laplacian(u: RadialProfile) -> np.ndarray:
    """Lap u = u'' + (2/r) u' via the substitution v = r u, Lap u = v''/r.

    Regularity at the origin supplies the exact ghost value v(0) = 0; the
    value beyond r_max is taken as 0, so the last node assumes a decaying
    profile.  On a uniform grid the stencil is the standard 3-point second
    difference of v, which keeps the operator symmetric under the discrete
    L^2(R^3) pairing for profiles vanishing at the boundary.
    """
    r = u.grid.nodes
    v = r * u.values
    out = np.empty_like(v)
    if u.grid.is_uniform():
        h = u.grid.spacing
        vm = np.concatenate(([0.0], v[:-1]))
        vp = np.concatenate((v[1:], [0.0]))
        out = (vm - 2.0 * v + vp) / (h * h)
    else:
        re = np.concatenate(([0.0], r, [2.0 * r[-1] - r[-2]]))
        ve = np.concatenate(([0.0], v, [0.0]))
        _, d2 = _nonuniform_d1_d2(re, ve)
        out = d2
    return out / r
