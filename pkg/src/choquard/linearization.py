"""Linearized operator, kernel-dimension scan, tail constants, energy curve.

The linearization of the ground-state equation around Q acts on real radial
perturbations h as

    L+ h = -Lap h + omega h - p I(Q^{p-1} h) Q^{p-1} - (p-1) I(Q^p) Q^{p-2} h.

Writing B = I(Q^{p-1} w) turns L+ w = 0 into the second-order system

    w'' + (2/r) w' = omega w - p B Q^{p-1} - (p-1) I(Q^p) Q^{p-2} w,
    B'' + (2/r) B' = -Q^{p-1} w,

whose regular solutions form a two-parameter family in (w0, B0) = (w(0),
B(0)).  By linearity the envelope-normalized terminal amplitude

    T(theta) = w(r_end) r_end e^{sqrt(omega) r_end},  (w0, B0) = (cos t, sin t),

is a sinusoid in theta, so each root of T over a half circle is one
direction whose w component decays; the scan counts those roots.  A root
is a genuine kernel element only if additionally B itself tends to zero:
its leveling constant B_inf = B0 - Int s Q^{p-1} w ds must vanish,
otherwise the trajectory solves L+ w = p B_inf Q^{p-1} != 0.  The scan
reports that defect per candidate so degenerate and non-degenerate ground
states can be told apart.

The dimension is deliberately estimated from this shooting family rather
than from a discretized eigenproblem: a grid eigensolver would inject
discretization artifacts into exactly the borderline question under study.

Precision note: along the decaying root, double-precision roundoff
re-excites the e^{+sqrt(omega) r} mode, so the trajectory is trustworthy
only up to a noise radius inside r_scan.  Classification of generic
(growing) angles uses the outer third of the range; the root itself, and
all tail-constant fits, use an interior window that stays ahead of the
noise.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy.interpolate import CubicSpline

from .errors import (
    GridError,
    IndeterminateClassificationWarning,
    OutOfRangeError,
    PositivityError,
)
from .functionals import d_pair, energy
from .radial import (
    RadialGrid,
    RadialProfile,
    inner_product,
    norms,
    radial_laplacian,
    riesz_radial,
    volume_weights,
)
from .series import evaluate_series, ground_series, kernel_series
from .shooting import GroundStateSolution, _integrate_radial

#: log-slope thresholds (units of sqrt(omega)) separating decaying from growing
DECAY_SLOPE = 0.6
GROWTH_SLOPE = 1.4

#: window (as fractions of the scanned range) used for tail fits and for
#: classifying the near-kernel root, chosen ahead of the roundoff noise radius
ROOT_WINDOW = (0.40, 0.78)


@dataclass(frozen=True)
class KernelCandidate:
    """One trajectory of the linearized system and its classification."""

    w: RadialProfile
    B: RadialProfile
    w0: float
    b0: float
    growth_score: float        # log of terminal amplitude over the e^{-r}/r envelope
    classification: str        # decaying | growing | indeterminate
    b_defect: float            # B0 - Int s Q^{p-1} w ds; zero for a true kernel element
    c1: float                  # fitted tail constant of w (nan unless decaying)
    d1: float                  # fitted leveling constant of r B


@dataclass(frozen=True)
class KernelScanResult:
    """Angle sweep records plus the dimension estimate."""

    candidates: list[KernelCandidate]
    dimension_estimate: int
    theta_roots: list[float]
    root_candidates: list[KernelCandidate]


@dataclass(frozen=True)
class TailConstants:
    """Two routes to the far-field constants of a kernel-system trajectory.

    The volume integrals are the plain source integrals
    c1_volume = 4 pi Int r^2 [p B Q^{p-1} + (p-1) A Q^{p-2} w] dr and
    d1_volume = 4 pi Int r^2 Q^{p-1} w dr.  What actually equals
    lim r w e^{sqrt(omega) r} is the resolvent-weighted integral
    c1_matched = (1/sqrt(omega)) Int s sinh(sqrt(omega) s) S(s) ds; the
    plain volume integral is the Laplace-kernel analogue and matches only
    the B component (lim r B = d1_volume / 4 pi for a leveled B).  Both are
    reported; comparing c1_matched with c1_fit is the meaningful two-route
    check.
    """

    c1_volume: float
    d1_volume: float
    c1_matched: float
    c1_fit: float
    d1_fit: float
    envelope_constant: float   # sup of |w| r e^{sqrt(omega) r} over the fit window


@dataclass(frozen=True)
class EnergyCurve:
    """K(eps) = E_p(sqrt(sigma)(Q + eps h)/||Q + eps h||) on a log eps grid.

    K_values holds direct energy evaluations, K_closed the rational closed
    form; max_discrepancy is their largest relative gap (an algebra check,
    both routes share one quadrature).  derivatives = (K'(0), K''(0)) by
    central differences; fitted_order rounds the log-log slope of
    K(eps) - K(0).
    """

    eps_values: np.ndarray
    K_values: np.ndarray
    K_closed: np.ndarray
    derivatives: tuple[float, float]
    fitted_order: int
    fit_slope: float
    max_discrepancy: float


def apply_lplus(h: RadialProfile, gs: GroundStateSolution, p: float) -> RadialProfile:
    """Apply the linearized operator to h on the ground-state grid."""
    if not np.array_equal(h.grid.nodes, gs.Q.grid.nodes):
        raise GridError("perturbation must live on the ground-state grid")
    Q = gs.Q.values
    qp1 = np.abs(Q) ** (p - 1.0)
    pot_cross = riesz_radial(h.with_values(qp1 * h.values)).values
    pot_self = riesz_radial(gs.Q.with_values(np.abs(Q) ** p)).values
    vals = (-radial_laplacian(h) + gs.omega * h.values
            - p * pot_cross * qp1
            - (p - 1.0) * pot_self * np.abs(Q) ** (p - 2.0) * h.values)
    return RadialProfile(h.grid, vals)


def _background_splines(gs: GroundStateSolution):
    r_ext = np.concatenate(([0.0], gs.Q.grid.nodes))
    Qs = CubicSpline(r_ext, np.concatenate(([gs.q0], gs.Q.values)),
                     bc_type=((1, 0.0), "not-a-knot"))
    As = CubicSpline(r_ext, np.concatenate(([gs.a0], gs.A.values)),
                     bc_type=((1, 0.0), "not-a-knot"))
    return Qs, As


def _kernel_rhs_factory(gs: GroundStateSolution, p: float):
    Qs, As = _background_splines(gs)
    omega = gs.omega

    def rhs(rr, y):
        w, wp, B, Bp = y
        Qr = Qs(rr)
        qp1 = Qr ** (p - 1.0)
        f1 = omega * w - p * B * qp1 - (p - 1.0) * As(rr) * Qr ** (p - 2.0) * w
        return (wp, f1 - 2.0 * wp / rr, Bp, -qp1 * w - 2.0 * Bp / rr)

    return rhs


def _run_kernel_trajectory(gs, p, w0, b0, r_scan, tol, g_series):
    launch = kernel_series(w0, b0, g_series, p, gs.omega)
    (w, wp), (b, bp) = evaluate_series(launch, launch.launch_radius)
    rhs = _kernel_rhs_factory(gs, p)
    nodes = gs.Q.grid.nodes
    t_eval = nodes[(nodes > launch.launch_radius) & (nodes <= r_scan)]
    sol = _integrate_radial(rhs, (launch.launch_radius, r_scan),
                            (w, wp, b, bp), tol, t_eval=t_eval)
    return sol


def _window_mask(r: np.ndarray, frac: tuple[float, float]) -> np.ndarray:
    span = r[-1] - r[0]
    return (r >= r[0] + frac[0] * span) & (r <= r[0] + frac[1] * span)


def _classify(r: np.ndarray, w: np.ndarray, sqw: float,
              window: tuple[float, float]) -> tuple[str, float]:
    """Envelope log-slope over the window: decaying vs growing."""
    env = np.maximum(np.abs(w) * r * np.exp(sqw * r), 1e-300)
    mask = _window_mask(r, window)
    slope = np.polyfit(r[mask], np.log(env[mask]), 1)[0]
    score = float(np.log(env[-1]))
    if slope <= DECAY_SLOPE * sqw:
        return "decaying", score
    if slope >= GROWTH_SLOPE * sqw:
        return "growing", score
    warnings.warn("growth score inside the noise band",
                  IndeterminateClassificationWarning, stacklevel=3)
    return "indeterminate", score


def _fit_tail_constants(r, w, B, sqw):
    """c1 from the w envelope, d1 as the intercept of r B = B_inf r + d1."""
    mask = _window_mask(r, ROOT_WINDOW)
    rw = r[mask]
    c1 = float(np.median(w[mask] * rw * np.exp(sqw * rw)))
    b_inf, d1 = np.polyfit(rw, rw * B[mask], 1)
    return c1, float(d1), float(b_inf)


def _make_candidate(gs, p, w0, b0, r_scan, tol, g_series,
                    window=(0.66, 1.0)) -> KernelCandidate:
    sol = _run_kernel_trajectory(gs, p, w0, b0, r_scan, tol, g_series)
    r = sol.t
    w, B = sol.y[0], sol.y[2]
    sqw = float(np.sqrt(gs.omega))
    classification, score = _classify(r, w, sqw, window)
    Qs, _ = _background_splines(gs)
    rr = np.linspace(r[0], r[-1], 4000)
    ww = sol.sol(rr)[0]
    b_defect = float(b0 - np.trapezoid(rr * Qs(rr) ** (p - 1.0) * ww, rr))
    if classification == "decaying":
        c1, d1, _ = _fit_tail_constants(r, w, B, sqw)
    else:
        c1, d1 = float("nan"), float("nan")
    sub = RadialGrid(nodes=r, kind=gs.Q.grid.kind)
    return KernelCandidate(
        w=RadialProfile(sub, w), B=RadialProfile(sub, B), w0=w0, b0=b0,
        growth_score=score, classification=classification,
        b_defect=b_defect, c1=c1, d1=d1)


def kernel_scan(gs: GroundStateSolution, p: float, n_angles: int = 16,
                r_scan: float | None = None, tol: float = 1e-11) -> KernelScanResult:
    """Sweep (w0, B0) = (cos t, sin t) over a half circle and count the
    decaying directions of the linearized system.

    The terminal-amplitude map is linear in the data, hence a sinusoid in
    the angle; its root is located from two basis runs and verified by
    re-integration at a tighter tolerance.  The dimension estimate counts
    verified decaying roots; a terminal map that never leaves the envelope
    scale would mean the whole family decays and reports 2.  p >= 2 is
    required: below that the Q^{p-2} coefficient grows in the tail and the
    scan loses meaning.
    """
    if p < 2.0:
        raise OutOfRangeError(f"kernel scan requires p >= 2, got {p}")
    if n_angles < 4:
        raise OutOfRangeError("need at least 4 angles")
    sqw = float(np.sqrt(gs.omega))
    if r_scan is None:
        r_scan = min(0.45 * gs.Q.grid.r_max, 15.0 / sqw)
    g_series = ground_series(gs.q0, gs.a0, p, gs.omega)

    thetas = (np.arange(n_angles) + 0.5) * np.pi / n_angles
    candidates = [
        _make_candidate(gs, p, float(np.cos(t)), float(np.sin(t)),
                        r_scan, tol, g_series)
        for t in thetas
    ]

    def terminal(w0, b0):
        sol = _run_kernel_trajectory(gs, p, w0, b0, r_scan, tol, g_series)
        return float(sol.y[0][-1] * sol.t[-1] * np.exp(sqw * sol.t[-1]))

    T10 = terminal(1.0, 0.0)
    T01 = terminal(0.0, 1.0)
    amp = float(np.hypot(T10, T01))

    theta_roots: list[float] = []
    root_candidates: list[KernelCandidate] = []
    if amp < 1e3:
        dimension = 2   # degenerate terminal map: every direction decays
    else:
        theta_star = float(np.arctan2(-T10, T01) % np.pi)
        root = _make_candidate(gs, p, float(np.cos(theta_star)),
                               float(np.sin(theta_star)), r_scan,
                               min(tol, 1e-12), g_series,
                               window=ROOT_WINDOW)
        theta_roots.append(theta_star)
        root_candidates.append(root)
        dimension = 1 if root.classification == "decaying" else 0
    return KernelScanResult(candidates=candidates,
                            dimension_estimate=dimension,
                            theta_roots=theta_roots,
                            root_candidates=root_candidates)


def tail_constants(candidate: KernelCandidate, gs: GroundStateSolution,
                   p: float) -> TailConstants:
    """Both routes to (c1, d1) for one kernel-system trajectory.

    Sources are integrated over the trajectory's own range; beyond it the
    slowly converging B Q^{p-1} part of the matched integral is extended
    using the fitted leveling form of B and the full-grid Q.
    """
    sqw = float(np.sqrt(gs.omega))
    r = candidate.w.grid.nodes
    w = candidate.w.values
    B = candidate.B.values
    Qs, As = _background_splines(gs)

    qvals = Qs(r)
    qp1 = qvals ** (p - 1.0)
    source = p * B * qp1 + (p - 1.0) * As(r) * qvals ** (p - 2.0) * w
    d1_src = qp1 * w

    def with_head(g):
        # [0, r_0] closing triangle; integrands vanish at the origin
        return np.trapezoid(g, r) + 0.5 * r[0] * g[0]

    c1_volume = 4.0 * np.pi * with_head(r**2 * source)
    d1_volume = 4.0 * np.pi * with_head(r**2 * d1_src)

    c1_matched = float(with_head(r * np.sinh(sqw * r) / sqw * source))
    c1_fit, d1_fit, b_inf = _fit_tail_constants(r, w, B, sqw)
    ext = gs.Q.grid.nodes[gs.Q.grid.nodes > r[-1]]
    if ext.size:
        src_ext = p * (b_inf + d1_fit / ext) * Qs(ext) ** (p - 1.0)
        c1_matched += float(np.trapezoid(ext * np.sinh(sqw * ext) / sqw * src_ext, ext))

    mask = _window_mask(r, ROOT_WINDOW)
    envelope_constant = float(np.max(np.abs(w[mask]) * r[mask]
                                     * np.exp(sqw * r[mask])))
    return TailConstants(c1_volume=float(c1_volume), d1_volume=float(d1_volume),
                         c1_matched=c1_matched, c1_fit=c1_fit, d1_fit=d1_fit,
                         envelope_constant=envelope_constant)


def project_orthogonal(h: RadialProfile, gs: GroundStateSolution) -> RadialProfile:
    """Normalize h to unit mass after removing its component along Q."""
    coeff = inner_product(h, gs.Q) / gs.sigma
    vals = h.values - coeff * gs.Q.values
    nrm_sq = inner_product(RadialProfile(h.grid, vals), RadialProfile(h.grid, vals))
    if nrm_sq <= 0:
        raise OutOfRangeError("perturbation is parallel to the ground state")
    return RadialProfile(h.grid, vals / np.sqrt(nrm_sq))


def _positive_eps_bound(Q: np.ndarray, h: np.ndarray) -> float:
    """sup { eps >= 0 : Q - eps h > 0 } for the given direction h."""
    pos = h > 0
    if not np.any(pos):
        return np.inf
    return float(np.min(Q[pos] / h[pos]))


def energy_curve(gs: GroundStateSolution, h: RadialProfile, eps_max: float = 0.3,
                 n_eps: int = 25, p: float | None = None) -> EnergyCurve:
    """Directional energy K(eps) along h, evaluated two independent ways.

    h is projected orthogonal to Q and normalized to unit mass, so
    ||Q + eps h||^2 = sigma + eps^2 exactly and

        K(eps) = sigma (||grad Q||^2 + 2 eps <grad Q, grad h> + eps^2 ||grad h||^2)
                 / (2 (sigma + eps^2))
                 - sigma^p D(|Q + eps h|^p) / (2 p (sigma + eps^2)^p).

    For h in the kernel of the linearized operator the gradient cross term
    vanishes identically (pair L+ h = 0 with Q); it is kept so the identity
    holds for arbitrary directions.  The eps grid is logarithmic, which is
    what the fitted order (a log-log slope) wants.
    """
    p = gs.p if p is None else p
    if eps_max <= 1e-4:
        raise OutOfRangeError("eps_max must exceed the 1e-4 grid floor")
    h = project_orthogonal(h, gs)
    sigma = gs.sigma
    Q = gs.Q.values
    grid = gs.Q.grid

    if eps_max >= _positive_eps_bound(Q, -h.values):
        raise PositivityError(
            "positivity-violation: eps_max too large for Q + eps h > 0",
            diagnostics={"eps_max": eps_max,
                         "eps_bound": _positive_eps_bound(Q, -h.values)})

    rep_q = norms(gs.Q)
    rep_h = norms(h)
    w = volume_weights(grid)
    dq = np.gradient(Q, grid.nodes, edge_order=2)
    dh = np.gradient(h.values, grid.nodes, edge_order=2)
    cross = float(w @ (dq * dh))

    def closed(eps: float) -> float:
        grad_part = (sigma * (rep_q.grad_sq + 2.0 * eps * cross
                              + eps**2 * rep_h.grad_sq)
                     / (2.0 * (sigma + eps**2)))
        D = d_pair(RadialProfile(grid, Q + eps * h.values), p)
        return grad_part - sigma**p * D / (2.0 * p * (sigma + eps**2) ** p)

    def direct(eps: float) -> float:
        pert = Q + eps * h.values
        nrm = np.sqrt(float(w @ pert**2))
        return energy(RadialProfile(grid, np.sqrt(sigma) * pert / nrm), p)

    eps = np.geomspace(1e-4, eps_max, n_eps)
    K_closed = np.array([closed(e) for e in eps])
    K_direct = np.array([direct(e) for e in eps])
    scale = np.maximum(np.abs(K_direct), 1e-300)
    max_disc = float(np.max(np.abs(K_closed - K_direct) / scale))

    K0 = direct(0.0)
    d_eps = min(1e-3 * np.sqrt(sigma),
                0.5 * _positive_eps_bound(Q, h.values),
                0.5 * _positive_eps_bound(Q, -h.values))
    K_plus, K_minus = direct(d_eps), direct(-d_eps)
    K1 = (K_plus - K_minus) / (2.0 * d_eps)
    K2 = (K_plus - 2.0 * K0 + K_minus) / d_eps**2

    gap = K_direct - K0
    usable = gap > max(1e-11 * abs(K0), 1e-14)
    if usable.sum() >= 4:
        slope = float(np.polyfit(np.log(eps[usable]), np.log(gap[usable]), 1)[0])
    else:
        slope = float("nan")
    fitted_order = int(round(slope)) if np.isfinite(slope) else 0
    return EnergyCurve(eps_values=eps, K_values=K_direct, K_closed=K_closed,
                       derivatives=(float(K1), float(K2)),
                       fitted_order=fitted_order, fit_slope=slope,
                       max_discrepancy=max_disc)
