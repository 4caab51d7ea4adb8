"""Projected gradient flow: the independent ground-state oracle.

Realizes the constrained minimization inf { E_p(u) : ||u||^2 = sigma }
directly, sharing only the radial quadrature and the potential evaluation
with the shooting path.  Each pseudo-time step moves along the negative
energy gradient projected onto the tangent space of the mass sphere,

    u <- normalize_sigma( u + tau (Lap u + I(|u|^p)|u|^{p-2}u - mu u) ),
    mu = <Lap u + I(|u|^p)|u|^{p-2}u, u> / sigma,

with the stiff Laplacian half of the update treated implicitly: the step
solves (1 - tau Lap) u_new = u + tau (N(u) - mu u), which is a tridiagonal
system in v = r u and leaves the fixed points of the explicit iteration
unchanged (at a constrained critical point N(u) - mu u = -Lap u exactly).
This removes the tau < h^2/2 stability ceiling while keeping descent.

Boundary conditions: regularity v(0) = 0 at the origin, decay u = 0 beyond
r_max.  On convergence the Lagrange multiplier is recovered as
omega = (D - ||grad u||^2)/sigma.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np
from scipy.linalg import solve_banded

from .errors import (
    ChoquardError,
    FlowDivergenceError,
    MaxIterationsError,
    OutOfRangeError,
)
from .functionals import ModelParams, P_CRITICAL, P_LOWER, pohozaev_report
from .radial import (
    RadialGrid,
    RadialProfile,
    make_grid,
    radial_laplacian,
    riesz_radial,
    volume_weights,
)
from .shooting import GroundStateSolution, TailFit, tail_fit


def _default_grid() -> RadialGrid:
    return make_grid("uniform", 1600, 32.0)


@dataclass
class FlowConfig:
    """Step size, stopping rule, grid, and initial profile descriptor."""

    step: float = 0.05
    max_steps: int = 60000
    energy_tol: float = 1e-13
    grid: RadialGrid = field(default_factory=_default_grid)
    init: str | RadialProfile = "gaussian"
    identity_tol: float = 1e-3

    def __post_init__(self):
        if self.step <= 0:
            raise OutOfRangeError(f"step must be positive, got {self.step}")
        if self.energy_tol <= 0:
            raise OutOfRangeError(f"energy_tol must be positive, got {self.energy_tol}")
        if self.max_steps < 1:
            raise OutOfRangeError("max_steps must be at least 1")
        if not self.grid.is_uniform():
            raise OutOfRangeError("the flow discretization requires a uniform grid")


@dataclass
class FlowRun:
    """A completed flow with its per-step descent log."""

    solution: GroundStateSolution
    log: list[tuple[int, float, float]]   # (step, energy, gradient residual)
    steps: int
    converged: bool
    outside_uniqueness_hypothesis: bool   # p < 2: minimizer exists, but the
                                          # local-uniqueness theorem assumes p >= 2


def _initial_profile(cfg: FlowConfig, sigma: float) -> np.ndarray:
    if isinstance(cfg.init, RadialProfile):
        if not np.array_equal(cfg.init.grid.nodes, cfg.grid.nodes):
            raise OutOfRangeError("init profile lives on a different grid")
        u = cfg.init.values.copy()
    elif cfg.init == "gaussian":
        u = np.exp(-cfg.grid.nodes**2 / 2.0)
    elif cfg.init == "exponential":
        u = np.exp(-cfg.grid.nodes)
    else:
        raise OutOfRangeError(f"unknown init descriptor {cfg.init!r}")
    w = volume_weights(cfg.grid)
    mass = float(w @ u**2)
    if mass <= 0:
        raise ChoquardError("zero initial profile: mass normalization undefined")
    return u * np.sqrt(sigma / mass)


def run_flow(sigma: float, p: float, cfg: FlowConfig | None = None) -> FlowRun:
    """Drive the projected flow to its fixed point and package the result."""
    if sigma <= 0:
        raise OutOfRangeError(f"sigma must be positive, got {sigma}")
    if not (P_LOWER < p < P_CRITICAL):
        raise OutOfRangeError(f"the flow oracle requires p in (5/3, 7/3), got {p}")
    cfg = cfg or FlowConfig()
    grid = cfg.grid
    r = grid.nodes
    h = grid.spacing
    n = grid.n
    w = volume_weights(grid)
    tau = cfg.step

    u = _initial_profile(cfg, sigma)

    # tridiagonal (1 - tau Lap) acting on v = r u, ghosts v(0) = 0, v(r>r_max) = 0
    band = np.zeros((3, n))
    band[0, 1:] = -tau / h**2
    band[1, :] = 1.0 + 2.0 * tau / h**2
    band[2, :-1] = -tau / h**2

    log: list[tuple[int, float, float]] = []
    E_prev = np.inf
    rises = 0
    converged = False
    steps = 0
    for k in range(cfg.max_steps):
        prof = RadialProfile(grid, u)
        f = np.abs(u) ** p
        pot = riesz_radial(prof.with_values(f)).values
        N = pot * np.abs(u) ** (p - 2.0) * u
        L = radial_laplacian(prof)
        D = float(w @ (pot * f))
        du = np.gradient(u, r, edge_order=2)
        grad_sq = float(w @ du**2)
        E = 0.5 * grad_sq - D / (2.0 * p)
        mu = float(w @ ((L + N) * u)) / sigma
        res = L + N - mu * u
        res_norm = float(np.sqrt(w @ res**2))
        log.append((k, E, res_norm))

        if E > E_prev + 1e-12 * max(1.0, abs(E_prev)):
            rises += 1
            if rises > 100:
                raise FlowDivergenceError(
                    "divergence: energy increased persistently",
                    diagnostics={"step": k, "energy": E})
        else:
            rises = 0
        if abs(E - E_prev) < cfg.energy_tol * max(1.0, abs(E)):
            converged = True
            steps = k
            break
        E_prev = E

        rhs = r * (u + tau * (N - mu * u))
        v = solve_banded((1, 1), band, rhs)
        u = v / r
        u *= np.sqrt(sigma / float(w @ u**2))
        steps = k + 1
    if not converged:
        raise MaxIterationsError(
            "max-steps: flow did not meet the energy tolerance",
            diagnostics={"steps": steps, "last_energy": E,
                         "residual": res_norm})

    omega = (D - grad_sq) / sigma
    if omega <= 0:
        raise FlowDivergenceError(
            "extracted multiplier is not positive; flow landed off the branch",
            diagnostics={"omega": omega})
    A = riesz_radial(RadialProfile(grid, f))
    q0 = _origin_value(r, u)
    a0 = _origin_value(r, A.values)
    report = pohozaev_report(RadialProfile(grid, u),
                             ModelParams(p=p, omega=omega, sigma=sigma),
                             identity_tol=cfg.identity_tol)
    gs = GroundStateSolution(
        p=p, omega=omega, sigma=sigma, q0=q0, a0=a0,
        energy=E, Q=RadialProfile(grid, u), A=A, report=report,
        tail=TailFit(np.nan, np.nan, np.nan))
    gs = replace(gs, tail=tail_fit(gs))
    return FlowRun(solution=gs, log=log, steps=steps, converged=converged,
                   outside_uniqueness_hypothesis=p < 2.0)


def _origin_value(r: np.ndarray, u: np.ndarray) -> float:
    """Even quadratic extrapolation u(0) from the first two nodes."""
    r1, r2 = r[0], r[1]
    return float((u[0] * r2**2 - u[1] * r1**2) / (r2**2 - r1**2))


def flow_minimize(sigma: float, p: float, cfg: FlowConfig | None = None) -> GroundStateSolution:
    """Converged constrained minimizer (see `run_flow` for the machinery)."""
    return run_flow(sigma, p, cfg).solution


def energy_descent_log(run: FlowRun) -> list[tuple[int, float, float]]:
    """Per-step (step, energy, Euler-Lagrange residual) records."""
    return run.log
