"""Power-series launches at r = 0 for the radial systems.

The coordinate singularity (2/r) u' makes r = 0 a regular singular point,
but even analytic solutions exist for the ground-state system

    Q'' + (2/r) Q' = omega Q - A Q^{p-1},     A'' + (2/r) A' = -Q^p,

with Q(0) = Q0 > 0, A(0) = A0, zero first derivatives, and for its
linearization

    w'' + (2/r) w' = omega w - p B Q^{p-1} - (p-1) A Q^{p-2} w,
    B'' + (2/r) B' = -Q^{p-1} w,

with free data (w0, B0).  Matching powers of r^2 determines every higher
coefficient: for u = sum u_{2k} r^{2k}, the radial Laplacian contributes
(2k+2)(2k+3) u_{2k+2} at order r^{2k}, so

    u_{2k+2} = (rhs coefficient at r^{2k}) / ((2k+2)(2k+3)).

Non-integer powers Q^s are expanded by composing the binomial series of
(1+x)^s with x = Q/Q0 - 1, which keeps the recurrence purely algebraic.
Integrators are then launched at a small positive radius instead of at the
singular origin.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .errors import LaunchRadiusError, OutOfRangeError, SeriesDivergenceWarning
from .functionals import P_LOWER, P_UPPER

DEFAULT_ORDER = 4
DEFAULT_TOL = 1e-12

#: hard cap on the launch radius regardless of the residual estimate
MAX_LAUNCH_RADIUS = 1.0


@dataclass(frozen=True)
class SeriesLaunch:
    """Even-power coefficients of a two-component series at r = 0.

    q_coeffs[k] multiplies r^{2k} in the first component (Q or w),
    a_coeffs[k] in the second (A or B).  launch_radius is the largest
    radius at which the order-2K truncation error estimate stays below
    the requested tolerance.
    """

    q_coeffs: np.ndarray
    a_coeffs: np.ndarray
    order: int
    launch_radius: float


def _truncated_product(a: np.ndarray, b: np.ndarray, K: int) -> np.ndarray:
    return np.convolve(a, b)[: K + 1]


def _binomial_power(c: np.ndarray, s: float, K: int) -> np.ndarray:
    """Coefficients of C(t)^s for C(t) = sum c_k t^k with c_0 > 0."""
    c0 = c[0]
    if c0 <= 0:
        raise OutOfRangeError("series power requires a positive leading coefficient")
    x = c / c0
    x[0] = 0.0
    out = np.zeros(K + 1)
    out[0] = 1.0
    term = np.zeros(K + 1)
    term[0] = 1.0
    binom = 1.0
    for j in range(1, K + 1):
        binom *= (s - (j - 1)) / j
        term = _truncated_product(term, x, K)
        out += binom * term
    return c0**s * out


def _launch_radius(coeff_sets: list[np.ndarray], K: int, tol: float) -> float:
    """Radius where the magnitude of the last retained term is below tol.

    A coefficient-ratio test estimates the convergence radius; when the
    chosen launch radius presses against it a warning is emitted.
    """
    top = max(max(abs(c[K]) for c in coeff_sets), 1e-300)
    radius = (tol / top) ** (1.0 / (2 * K))
    radius = min(radius, MAX_LAUNCH_RADIUS)
    ratios = []
    for c in coeff_sets:
        if abs(c[K]) > 0 and abs(c[K - 1]) > 0:
            ratios.append(abs(c[K - 1]) / abs(c[K]))
    if ratios:
        conv_radius_sq = min(ratios)
        if radius**2 > 0.5 * conv_radius_sq:
            warnings.warn(
                f"launch radius {radius:.3g} presses against the estimated "
                f"convergence radius {np.sqrt(conv_radius_sq):.3g}",
                SeriesDivergenceWarning, stacklevel=3)
    return radius


def ground_series(Q0: float, A0: float, p: float, omega: float,
                  K: int = DEFAULT_ORDER, tol: float = DEFAULT_TOL) -> SeriesLaunch:
    """Series coefficients of the ground-state system near r = 0.

    The first nontrivial ones are Q2 = (omega Q0 - A0 Q0^{p-1})/6 and
    A2 = -Q0^p / 6; higher coefficients follow from the same matching.
    """
    if Q0 < 0:
        raise OutOfRangeError(f"Q0 must be nonnegative, got {Q0}")
    if K < 1:
        raise OutOfRangeError(f"series order must be >= 1, got {K}")
    if not (P_LOWER < p < P_UPPER):
        raise OutOfRangeError(f"p must lie in (5/3, 3), got {p}")
    q = np.zeros(K + 1)
    a = np.zeros(K + 1)
    if Q0 == 0.0:
        return SeriesLaunch(q, a, K, MAX_LAUNCH_RADIUS)
    q[0], a[0] = Q0, A0
    for k in range(K):
        qp1 = _binomial_power(q, p - 1.0, k)
        qp = _binomial_power(q, p, k)
        rhs1 = omega * q[k] - _truncated_product(a[: k + 1], qp1, k)[k]
        rhs2 = -qp[k]
        fac = (2 * k + 2) * (2 * k + 3)
        q[k + 1] = rhs1 / fac
        a[k + 1] = rhs2 / fac
    return SeriesLaunch(q, a, K, _launch_radius([q, a], K, tol))


def kernel_series(w0: float, B0: float, Q_series: SeriesLaunch, p: float,
                  omega: float, K: int | None = None,
                  tol: float = DEFAULT_TOL) -> SeriesLaunch:
    """Series coefficients of the linearized system, linear in (w0, B0)."""
    if K is None:
        K = Q_series.order
    if Q_series.order < K:
        raise OutOfRangeError("ground-state series order too low for the requested K")
    w = np.zeros(K + 1)
    b = np.zeros(K + 1)
    if w0 == 0.0 and B0 == 0.0:
        return SeriesLaunch(w, b, K, MAX_LAUNCH_RADIUS)
    w[0], b[0] = w0, B0
    q = Q_series.q_coeffs[: K + 1]
    a = Q_series.a_coeffs[: K + 1]
    qp1 = _binomial_power(q, p - 1.0, K)
    qp2 = _binomial_power(q, p - 2.0, K)
    aqp2 = _truncated_product(a, qp2, K)
    for k in range(K):
        rhs1 = (omega * w[k]
                - p * _truncated_product(b[: k + 1], qp1, k)[k]
                - (p - 1.0) * _truncated_product(aqp2, w[: k + 1], k)[k])
        rhs2 = -_truncated_product(qp1, w[: k + 1], k)[k]
        fac = (2 * k + 2) * (2 * k + 3)
        w[k + 1] = rhs1 / fac
        b[k + 1] = rhs2 / fac
    ref = max(abs(w0), abs(B0))
    return SeriesLaunch(w, b, K, _launch_radius([w / ref, b / ref], K, tol))


def evaluate_series(s: SeriesLaunch, r: float):
    """Value and derivative of both components at radius r <= launch_radius.

    Returns ((q, q'), (a, a')) by Horner evaluation in t = r^2.
    """
    if r > s.launch_radius * (1.0 + 1e-12):
        raise LaunchRadiusError(
            f"r = {r} beyond launch radius {s.launch_radius}")
    t = r * r

    def horner(c):
        val = 0.0
        for ck in c[::-1]:
            val = val * t + ck
        dval = 0.0
        for k in range(len(c) - 1, 0, -1):
            dval = dval * t + k * c[k]
        return val, 2.0 * r * dval

    return horner(s.q_coeffs), horner(s.a_coeffs)
