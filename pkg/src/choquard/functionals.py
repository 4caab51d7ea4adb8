"""Energy and sharp-inequality functionals plus the identities linking them.

For the constrained minimization of

    E_p(u) = 1/2 ||grad u||^2 - 1/(2p) D(|u|^p, |u|^p),
    D(f, f) = <I(f), f>,

on the sphere ||u||^2 = sigma, every minimizer satisfies the normalization

    omega ||u||^2 / beta = ||grad u||^2 / gamma = D / p = k_E,

with beta = (5-p)/2, gamma = (3p-5)/2.  Solving those relations gives the
multiplier formula omega = 2 beta E_sigma / ((gamma-1) sigma) and the
closed form for the best interaction constant

    C_* = p / gamma^gamma * (2/(1-gamma))^(1-gamma) * |E_sigma|^(1-gamma) / sigma^(p-gamma),

both of which `pohozaev_report` evaluates against the direct quotient.
(The closed form was re-derived from the normalization identities before
coding: D = C_* sigma^beta ||grad u||^(2 gamma) with sigma omega / beta =
2|E_sigma|/(1-gamma) collapses to exactly this expression, using
beta = p - gamma.)
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy.interpolate import CubicSpline

from .errors import CompressionWarning, OutOfRangeError, ZeroInteractionError
from .radial import (
    NormReport,
    RadialProfile,
    norms,
    radial_laplacian,
    riesz_radial,
    volume_weights,
)

P_LOWER = 5.0 / 3.0
P_UPPER = 3.0
P_CRITICAL = 7.0 / 3.0

#: relative tolerance for grid-limited identity checks (lfm1 flags)
IDENTITY_TOL = 1e-3


@dataclass(frozen=True)
class ModelParams:
    """Nonlinearity exponent p, frequency omega, mass constraint sigma."""

    p: float
    omega: float
    sigma: float

    def __post_init__(self):
        if not (P_LOWER < self.p < P_UPPER):
            raise OutOfRangeError(f"p must lie in (5/3, 3), got {self.p}")
        if self.omega <= 0:
            raise OutOfRangeError(f"omega must be positive, got {self.omega}")
        if self.sigma <= 0:
            raise OutOfRangeError(f"sigma must be positive, got {self.sigma}")

    @property
    def admissible_range(self) -> bool:
        """True iff p lies in (5/3, 7/3), the mass-subcritical window."""
        return P_LOWER < self.p < P_CRITICAL


@dataclass(frozen=True)
class Exponents:
    """beta = (5-p)/2 and gamma = (3p-5)/2; beta + gamma = p."""

    beta: float
    gamma: float


def exponents(p: float) -> Exponents:
    if not (P_LOWER < p < P_UPPER):
        raise OutOfRangeError(f"p must lie in (5/3, 3), got {p}")
    return Exponents(beta=(5.0 - p) / 2.0, gamma=(3.0 * p - 5.0) / 2.0)


def d_pair(u: RadialProfile, p: float) -> float:
    """Interaction energy D(|u|^p, |u|^p) = <I(|u|^p), |u|^p>."""
    f = u.with_values(np.abs(u.values) ** p)
    pot = riesz_radial(f)
    return float(volume_weights(u.grid) @ (pot.values * f.values))


def energy(u: RadialProfile, p: float) -> float:
    """E_p(u) = 1/2 ||grad u||^2 - 1/(2p) D(|u|^p, |u|^p)."""
    rep = norms(u)
    return 0.5 * rep.grad_sq - d_pair(u, p) / (2.0 * p)


def gn_functional(u: RadialProfile, p: float, c_star: float) -> float:
    """F_p(u) = ||u||^{5-p} ||grad u||^{3p-5} - D/c_star.

    Nonnegative for every u when c_star is the sharp interaction constant,
    and zero exactly at minimizers.
    """
    if c_star <= 0:
        raise OutOfRangeError(f"c_star must be positive, got {c_star}")
    rep = norms(u)
    prod = rep.l2_sq ** ((5.0 - p) / 2.0) * rep.grad_sq ** ((3.0 * p - 5.0) / 2.0)
    return prod - d_pair(u, p) / c_star


def weinstein_quotient(u: RadialProfile, p: float) -> float:
    """||u||^{5-p} ||grad u||^{3p-5} / D; infimum over u equals 1/C_*."""
    D = d_pair(u, p)
    if D <= 0:
        raise ZeroInteractionError("interaction energy D vanishes")
    rep = norms(u)
    return rep.l2_sq ** ((5.0 - p) / 2.0) * rep.grad_sq ** ((3.0 * p - 5.0) / 2.0) / D


def euler_lagrange_residual(u: RadialProfile, p: float, omega: float) -> float:
    """Relative grid-L2 residual of -Lap u + omega u - I(|u|^p)|u|^{p-2}u.

    The last node is excluded: the discrete Laplacian there assumes decay.
    """
    f = u.with_values(np.abs(u.values) ** p)
    pot = riesz_radial(f).values
    nonlocal_term = pot * np.abs(u.values) ** (p - 2.0) * u.values
    res = -radial_laplacian(u) + omega * u.values - nonlocal_term
    w = volume_weights(u.grid)
    num = float(np.sqrt(w[:-1] @ res[:-1] ** 2))
    den = float(np.sqrt(w @ (omega * u.values) ** 2) + np.sqrt(w @ nonlocal_term**2))
    return num / den if den > 0 else num


@dataclass(frozen=True)
class IdentityReport:
    """All identity checks evaluated on one profile.

    pohozaev_residuals holds the signed relative deviations
    (T1-T2, T2-T3, T1-T3)/|k_E| among T1 = omega ||u||^2 / beta,
    T2 = ||grad u||^2 / gamma, T3 = D/p, and k_E is their mean.
    lfm1_flags are the three equivalent minimizer conditions: (i) T2 = T3,
    (ii) omega sigma / beta = T3, (iii) the Euler-Lagrange equation holds.
    """

    pohozaev_residuals: tuple[float, float, float]
    k_E: float
    omega_predicted: float
    c_star_direct: float
    c_star_formula: float
    lfm1_flags: tuple[bool, bool, bool]

    def max_pohozaev_deviation(self) -> float:
        return max(abs(x) for x in self.pohozaev_residuals)

    def to_json_dict(self) -> dict:
        return {
            "pohozaev_residuals": [float(x) for x in self.pohozaev_residuals],
            "k_E": float(self.k_E),
            "omega_predicted": float(self.omega_predicted),
            "c_star_direct": float(self.c_star_direct),
            "c_star_formula": float(self.c_star_formula),
            "lfm1_flags": [bool(b) for b in self.lfm1_flags],
        }


def pohozaev_report(u: RadialProfile, params: ModelParams,
                    identity_tol: float = IDENTITY_TOL) -> IdentityReport:
    """Evaluate the normalization identities and both C_* routes on u.

    Residuals are reported, never raised; sigma is taken as the measured
    mass of the profile (for a converged state it equals params.sigma).
    """
    p, omega = params.p, params.omega
    ex = exponents(p)
    rep = norms(u)
    D = d_pair(u, p)
    sigma = rep.l2_sq

    T1 = omega * rep.l2_sq / ex.beta
    T2 = rep.grad_sq / ex.gamma
    T3 = D / p
    k_E = (T1 + T2 + T3) / 3.0
    scale = abs(k_E) if k_E != 0 else 1.0
    residuals = ((T1 - T2) / scale, (T2 - T3) / scale, (T1 - T3) / scale)

    E = 0.5 * rep.grad_sq - D / (2.0 * p)
    omega_predicted = 2.0 * ex.beta * E / ((ex.gamma - 1.0) * sigma) if sigma > 0 else np.nan

    if D > 0 and rep.l2_sq > 0 and rep.grad_sq > 0:
        c_star_direct = D / (rep.l2_sq ** ((5.0 - p) / 2.0)
                             * rep.grad_sq ** ((3.0 * p - 5.0) / 2.0))
    else:
        c_star_direct = np.nan
    if ex.gamma < 1.0 and sigma > 0:
        c_star_formula = (p / ex.gamma**ex.gamma
                          * (2.0 / (1.0 - ex.gamma)) ** (1.0 - ex.gamma)
                          * abs(E) ** (1.0 - ex.gamma) / sigma ** (p - ex.gamma))
    else:
        c_star_formula = np.nan

    flag_i = abs(T2 - T3) <= identity_tol * scale
    flag_ii = abs(omega * params.sigma / ex.beta - T3) <= identity_tol * scale
    flag_iii = euler_lagrange_residual(u, p, omega) <= identity_tol

    return IdentityReport(
        pohozaev_residuals=residuals,
        k_E=k_E,
        omega_predicted=omega_predicted,
        c_star_direct=c_star_direct,
        c_star_formula=c_star_formula,
        lfm1_flags=(bool(flag_i), bool(flag_ii), bool(flag_iii)),
    )


def admissible_omega(sigma: float, p: float, c_star: float) -> float:
    """Frequency paired with sigma by omega^{1-gamma} = (C_*/p) gamma^gamma
    beta^{1-gamma} sigma^{p-1}."""
    ex = exponents(p)
    if abs(ex.gamma - 1.0) < 1e-12:
        raise OutOfRangeError("gamma-equals-one: p = 7/3 has no admissible omega")
    if sigma <= 0 or c_star <= 0:
        raise OutOfRangeError("sigma and c_star must be positive")
    rhs = (c_star / p) * ex.gamma**ex.gamma / ex.beta ** (ex.gamma - 1.0) * sigma ** (p - 1.0)
    return rhs ** (1.0 / (1.0 - ex.gamma))


def phi_sigma(s: float | np.ndarray, sigma: float, p: float, c_star: float):
    """phi(s) = s/2 - (C_* sigma^beta / 2p) s^gamma, the lower envelope of
    E_p along the gradient-norm coordinate s = ||grad u||^2."""
    ex = exponents(p)
    s = np.asarray(s, dtype=float)
    out = s / 2.0 - (c_star * sigma**ex.beta / (2.0 * p)) * s**ex.gamma
    return float(out) if out.ndim == 0 else out


def s_star(sigma: float, p: float, c_star: float) -> float:
    """Unique positive minimizer of phi_sigma: s_* = ((gamma/p) C_* sigma^beta)^{1/(1-gamma)}."""
    ex = exponents(p)
    if ex.gamma >= 1.0:
        raise OutOfRangeError("gamma-equals-one: s_star requires p < 7/3")
    return ((ex.gamma / p) * c_star * sigma**ex.beta) ** (1.0 / (1.0 - ex.gamma))


def rescale_mu(u: RadialProfile, mu: float, tail_tol: float = 1e-8) -> RadialProfile:
    """Mass-preserving dilation v_mu(r) = mu^{3/2} u(mu r) on the same grid.

    Values needed beyond the original support are set to zero; a warning is
    emitted when the dropped tail is non-negligible.
    """
    if mu <= 0:
        raise OutOfRangeError(f"mu must be positive, got {mu}")
    if mu == 1.0:
        return u
    r = u.grid.nodes
    if mu > 1.0 and abs(u.values[-1]) * r[-1] ** 2 > tail_tol:
        warnings.warn(
            "compression drops support beyond r_max with a non-negligible tail",
            CompressionWarning, stacklevel=2)
    spline = CubicSpline(np.concatenate(([0.0], r)),
                         np.concatenate(([_even_origin_value(u)], u.values)))
    target = mu * r
    vals = np.where(target <= r[-1], spline(np.clip(target, 0.0, r[-1])), 0.0)
    return RadialProfile(u.grid, mu**1.5 * vals)


def _even_origin_value(u: RadialProfile) -> float:
    """u(0) by even quadratic extrapolation through the first two nodes."""
    r1, r2 = u.grid.nodes[:2]
    u1, u2 = u.values[:2]
    return float((u1 * r2**2 - u2 * r1**2) / (r2**2 - r1**2))
