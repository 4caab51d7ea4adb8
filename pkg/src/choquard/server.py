"""FastAPI service wrapping the solver package.

Handlers are plain functions over the pydantic models in `schemas`; the
HTTP layer and the CLI both dispatch to them, so artifacts are identical
whichever entry point produced them.  Solved ground states are cached
in-process keyed by the solve-relevant request fields: a lab session
typically solves once and then issues many diagnostic queries (kernel
scans, energy curves, constant tables) against the same state.
"""
from __future__ import annotations

import math
import threading
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from .errors import ChoquardError, NoBracketError
from .flow import FlowConfig, run_flow
from .functionals import (
    IdentityReport,
    ModelParams,
    admissible_omega,
    energy as energy_of,
    exponents,
    phi_sigma,
    pohozaev_report,
    s_star,
)
from .io import detect_kind
from .linearization import (
    energy_curve,
    kernel_scan,
    project_orthogonal,
    tail_constants,
)
from .radial import (
    RadialGrid,
    RadialProfile,
    inner_product,
    laplacian_residual,
    make_grid,
    norms,
    riesz_radial,
)
from .schemas import (
    CurveRequest,
    CurveResponse,
    ErrorPayload,
    GnRequest,
    GnResponse,
    GridSpec,
    IdentityReportModel,
    KernelAngleRecord,
    KernelRequest,
    KernelResponse,
    OracleRequest,
    OracleResponse,
    PhiPoint,
    PotentialCheck,
    PotentialTestRequest,
    PotentialTestResponse,
    SolutionProfiles,
    SolveRequest,
    SolveResponse,
    SweepRequest,
    SweepResponse,
    TailConstantsModel,
    TailFitModel,
    VerifyRequest,
    VerifyResponse,
)
from .shooting import (
    GroundStateSolution,
    ShootingConfig,
    rescale_to_sigma,
    shoot,
)

_cache_lock = threading.Lock()
_solution_cache: dict[tuple, GroundStateSolution] = {}


def _clean(x: float) -> float | None:
    x = float(x)
    return x if math.isfinite(x) else None


def _report_model(report: IdentityReport) -> IdentityReportModel:
    return IdentityReportModel(
        pohozaev_residuals=[float(v) for v in report.pohozaev_residuals],
        k_E=float(report.k_E),
        omega_predicted=float(report.omega_predicted),
        c_star_direct=float(report.c_star_direct),
        c_star_formula=_clean(report.c_star_formula),
        lfm1_flags=list(report.lfm1_flags),
    )


def _solution_response(gs: GroundStateSolution, with_profile: bool = True) -> SolveResponse:
    profile = None
    if with_profile:
        profile = SolutionProfiles(r=gs.Q.grid.nodes.tolist(),
                                   Q=gs.Q.values.tolist(),
                                   A=gs.A.values.tolist())
    return SolveResponse(
        p=gs.p, omega=gs.omega, sigma=gs.sigma, q0=gs.q0, a0=gs.a0,
        energy=gs.energy, report=_report_model(gs.report),
        tail=TailFitModel(c0=gs.tail.c0, d0=gs.tail.d0,
                          decay_rate=gs.tail.decay_rate),
        profile=profile)


def _shooting_config(req: SolveRequest) -> ShootingConfig:
    if req.grid.kind != "uniform":
        raise ChoquardError("the shooting grid must be uniform")
    return ShootingConfig(
        q0_bracket=tuple(req.q0_bracket), a0_bracket=tuple(req.a0_bracket),
        r_max=req.grid.r_max, n_nodes=req.grid.n_nodes,
        integrator_tol=req.tol, identity_tol=req.identity_tol)


def get_solution(req: SolveRequest) -> GroundStateSolution:
    """Solve (or fetch from the in-process cache) for this request."""
    key = req.cache_key()
    with _cache_lock:
        if key in _solution_cache:
            return _solution_cache[key]
    gs = shoot(req.p, req.omega, _shooting_config(req))
    if req.sigma is not None:
        gs = rescale_to_sigma(gs, req.sigma)
    with _cache_lock:
        _solution_cache[key] = gs
    return gs


def handle_solve(req: SolveRequest, with_profile: bool = True) -> SolveResponse:
    return _solution_response(get_solution(req), with_profile)


def handle_oracle(req: OracleRequest, with_profile: bool = True) -> OracleResponse:
    cfg = FlowConfig(step=req.step, max_steps=req.max_steps,
                     energy_tol=req.energy_tol,
                     grid=make_grid(req.grid.kind, req.grid.n_nodes, req.grid.r_max),
                     init=req.init)
    run = run_flow(req.sigma, req.p, cfg)
    base = _solution_response(run.solution, with_profile)
    return OracleResponse(
        **base.model_dump(by_alias=False, exclude={"schema_version"}),
        steps=run.steps, converged=run.converged,
        final_residual=run.log[-1][2],
        outside_uniqueness_hypothesis=run.outside_uniqueness_hypothesis)


def profile_from_data(r: list[float], values: list[float]) -> RadialProfile:
    nodes = np.asarray(r, dtype=float)
    grid = RadialGrid(nodes=nodes, kind=detect_kind(nodes))
    return RadialProfile(grid, np.asarray(values, dtype=float))


def handle_verify(req: VerifyRequest) -> VerifyResponse:
    prof = profile_from_data(req.profile.r, req.profile.values)
    rep = norms(prof)
    params = ModelParams(p=req.p, omega=req.omega, sigma=rep.l2_sq)
    report = pohozaev_report(prof, params)
    return VerifyResponse(p=req.p, omega=req.omega, sigma=rep.l2_sq,
                          energy=energy_of(prof, req.p),
                          report=_report_model(report))


def handle_gn(req: GnRequest) -> GnResponse:
    gs = get_solution(SolveRequest(p=req.p, omega=req.omega,
                                   grid=req.grid, tol=req.tol))
    c_star = gs.report.c_star_direct
    sstar = s_star(gs.sigma, req.p, c_star)
    grad_sq = norms(gs.Q).grad_sq
    ss = np.linspace(0.2 * sstar, 2.0 * sstar, req.s_count)
    table = [PhiPoint(s=float(s), phi=float(phi_sigma(s, gs.sigma, req.p, c_star)))
             for s in ss]
    return GnResponse(
        p=req.p, sigma=gs.sigma, omega=gs.omega, energy=gs.energy,
        c_star_direct=c_star, c_star_formula=_clean(gs.report.c_star_formula),
        s_star=sstar, phi_at_s_star=float(phi_sigma(sstar, gs.sigma, req.p, c_star)),
        grad_sq=grad_sq,
        omega_admissible=admissible_omega(gs.sigma, req.p, c_star),
        phi_table=table)


def _angle_record(cand) -> KernelAngleRecord:
    return KernelAngleRecord(
        theta=float(np.arctan2(cand.b0, cand.w0) % np.pi),
        w0=cand.w0, b0=cand.b0, growth_score=cand.growth_score,
        classification=cand.classification, b_defect=cand.b_defect,
        c1=_clean(cand.c1), d1=_clean(cand.d1))


def handle_kernel(req: KernelRequest) -> KernelResponse:
    gs = get_solution(SolveRequest(p=req.p, omega=req.omega,
                                   grid=req.grid, tol=req.tol))
    scan = kernel_scan(gs, req.p, n_angles=req.n_angles, r_scan=req.r_scan)
    tails = [tail_constants(c, gs, req.p) for c in scan.root_candidates]
    return KernelResponse(
        p=req.p, omega=req.omega,
        dimension_estimate=scan.dimension_estimate,
        theta_roots=scan.theta_roots,
        records=[_angle_record(c) for c in scan.candidates],
        root_records=[_angle_record(c) for c in scan.root_candidates],
        root_tail_constants=[TailConstantsModel(
            c1_volume=t.c1_volume, d1_volume=t.d1_volume,
            c1_matched=t.c1_matched, c1_fit=t.c1_fit, d1_fit=t.d1_fit,
            envelope_constant=t.envelope_constant) for t in tails])


def random_direction(grid: RadialGrid, seed: int) -> RadialProfile:
    """Smooth decaying perturbation from the documented seed."""
    rng = np.random.default_rng(seed)
    r = grid.nodes
    vals = np.zeros_like(r)
    for _ in range(4):
        width = rng.uniform(0.6, 4.0)
        power = int(rng.integers(0, 3))
        vals += rng.normal() * r**power * np.exp(-(r / width) ** 2 / 2.0)
    return RadialProfile(grid, vals)


def kernel_direction(gs: GroundStateSolution, p: float) -> RadialProfile:
    """The scan's best decaying direction, zero-extended to the full grid."""
    scan = kernel_scan(gs, p)
    if not scan.root_candidates:
        raise ChoquardError("kernel scan produced no candidate direction")
    root = scan.root_candidates[0]
    vals = np.zeros_like(gs.Q.grid.nodes)
    sub = root.w.grid.nodes
    idx = np.searchsorted(gs.Q.grid.nodes, sub)
    vals[idx] = root.w.values
    return RadialProfile(gs.Q.grid, vals)


def handle_curve(req: CurveRequest) -> CurveResponse:
    gs = get_solution(SolveRequest(p=req.p, omega=req.omega,
                                   grid=req.grid, tol=req.tol))
    if req.direction == "kernel":
        h = kernel_direction(gs, req.p)
    else:
        h = random_direction(gs.Q.grid, req.seed)
    h = project_orthogonal(h, gs)
    curve = energy_curve(gs, h, eps_max=req.eps_max, n_eps=req.n_eps, p=req.p)
    return CurveResponse(
        p=req.p, omega=req.omega, direction=req.direction,
        eps=curve.eps_values.tolist(),
        K_closed=curve.K_closed.tolist(), K_direct=curve.K_values.tolist(),
        derivatives=curve.derivatives, fitted_order=curve.fitted_order,
        fit_slope=curve.fit_slope, max_discrepancy=curve.max_discrepancy)


def _sweep_cell(payload: dict) -> dict:
    req = SolveRequest(**payload)
    return handle_solve(req, with_profile=False).model_dump(by_alias=True)


def handle_sweep(req: SweepRequest) -> SweepResponse:
    ps = np.linspace(req.p_min, req.p_max, req.steps)
    base = SolveRequest(p=2.0, omega=req.omega, sigma=req.sigma,
                        grid=req.grid, tol=req.tol)
    cells: list[SolveResponse] = []
    if req.jobs > 1:
        payloads = [base.model_copy(update={"p": float(p)}).model_dump()
                    for p in ps]
        with ProcessPoolExecutor(max_workers=req.jobs) as pool:
            results = list(pool.map(_sweep_cell, payloads))
        cells = [SolveResponse(**{**d, "schema_version": d.pop("schema")}) for d in results]
    else:
        # sequential sweep: warm-start each cell's brackets from the last root
        q_brk, a_brk = base.q0_bracket, base.a0_bracket
        for p in ps:
            cell_req = base.model_copy(update={
                "p": float(p), "q0_bracket": q_brk, "a0_bracket": a_brk})
            try:
                gs = get_solution(cell_req)
            except NoBracketError:
                cell_req = base.model_copy(update={"p": float(p)})
                gs = get_solution(cell_req)
            cells.append(_solution_response(gs, with_profile=False))
            lam_a = 2.0 / (p - 1.0)
            q1 = gs.q0 / gs.omega ** (lam_a / 2.0)   # back to omega = 1 units
            a1 = gs.a0 / gs.omega ** (lam_a / 2.0)
            q_brk = (0.8 * q1, 1.25 * q1)
            a_brk = (0.85 * a1, 1.2 * a1)
    return SweepResponse(cells=cells)


def ball_indicator_grid(n_nodes: int) -> RadialGrid:
    """Uniform grid whose cells straddle r = 1 at a cell midpoint.

    A sampled jump density integrates at second order only when the jump
    bisects a trapezoid cell, so h = 2/(2m+1) with the jump between nodes
    m and m+1.
    """
    m = n_nodes // 4
    h = 2.0 / (2 * m + 1)
    return make_grid("uniform", n_nodes, n_nodes * h)


def _ball_error(n_nodes: int) -> float:
    grid = ball_indicator_grid(n_nodes)
    f = RadialProfile.from_function(grid, lambda r: (r < 1.0).astype(float))
    pot = riesz_radial(f)
    r = grid.nodes
    exact = np.where(r <= 1.0, 0.5 - r**2 / 6.0, 1.0 / (3.0 * r))
    return float(np.max(np.abs(pot.values - exact)))


def handle_potential_test(req: PotentialTestRequest) -> PotentialTestResponse:
    checks: list[PotentialCheck] = []

    def add(name, value, threshold, comparison):
        passed = value < threshold if comparison == "<" else value >= threshold
        checks.append(PotentialCheck(name=name, value=float(value),
                                     threshold=threshold,
                                     comparison=comparison, passed=bool(passed)))

    n = req.n_nodes
    err_n = _ball_error(n)
    err_2n = _ball_error(2 * n)
    add("ball_potential_max_error", err_n, 1e-4, "<")
    add("ball_potential_order", np.log2(err_n / err_2n), 1.9, ">=")

    # harmonicity defect of the exponential density under refinement
    defects = []
    for nn in (n // 2, n):
        grid = make_grid("geometric", nn, 40.0)
        f = RadialProfile.from_function(grid, lambda r: np.exp(-r))
        pot = riesz_radial(f)
        defects.append(laplacian_residual(f, pot, r_window=(0.05, 35.0)))
    add("harmonicity_defect", defects[-1], 1e-4, "<")
    add("harmonicity_order", np.log2(defects[0] / defects[-1]), 1.7, ">=")

    grid = make_grid("uniform", max(n, 2048), 12.0)
    u = RadialProfile.from_function(grid, lambda r: np.exp(-(r**2) / 2.0))
    rep = norms(u)
    add("gaussian_l2_rel_error",
        abs(rep.l2_sq - np.pi**1.5) / np.pi**1.5, 1e-8, "<")
    add("gaussian_grad_rel_error",
        abs(rep.grad_sq - 1.5 * np.pi**1.5) / (1.5 * np.pi**1.5), 1e-4, "<")

    # monotone tail limit: r I(f)(r_max) -> integral of r^2 f
    f = RadialProfile.from_function(grid, lambda r: np.exp(-r))
    pot = riesz_radial(f)
    tail_val = grid.r_max * pot.values[-1]
    target = rep.l2_sq * 0.0 + 2.0   # Int_0^inf r^2 e^{-r} dr = 2
    add("riesz_tail_limit_rel_error", abs(tail_val - target) / target, 1e-4, "<")

    g = RadialProfile.from_function(grid, lambda r: np.exp(-(r - 2.0) ** 2))
    lin = riesz_radial(RadialProfile(grid, 2.0 * f.values - 3.0 * g.values))
    ref = 2.0 * pot.values - 3.0 * riesz_radial(g).values
    add("riesz_linearity", float(np.max(np.abs(lin.values - ref))), 1e-12, "<")

    return PotentialTestResponse(checks=checks,
                                 passed=all(c.passed for c in checks))


def create_app():
    """Build the FastAPI application exposing all laboratory operations."""
    from fastapi import FastAPI, HTTPException

    app = FastAPI(title="choquard-lab",
                  description="radial Choquard ground states and their identities")

    def guarded(fn, req):
        try:
            return fn(req)
        except ChoquardError as exc:
            payload = ErrorPayload(error=type(exc).__name__, message=str(exc),
                                   diagnostics=_jsonable(exc.diagnostics))
            raise HTTPException(status_code=400, detail=payload.model_dump())

    @app.get("/health")
    def health():
        return {"status": "ok"}

    @app.post("/solve", response_model=SolveResponse)
    def solve_endpoint(req: SolveRequest):
        return guarded(handle_solve, req)

    @app.post("/oracle", response_model=OracleResponse)
    def oracle_endpoint(req: OracleRequest):
        return guarded(handle_oracle, req)

    @app.post("/verify", response_model=VerifyResponse)
    def verify_endpoint(req: VerifyRequest):
        return guarded(handle_verify, req)

    @app.post("/gn", response_model=GnResponse)
    def gn_endpoint(req: GnRequest):
        return guarded(handle_gn, req)

    @app.post("/kernel", response_model=KernelResponse)
    def kernel_endpoint(req: KernelRequest):
        return guarded(handle_kernel, req)

    @app.post("/curve", response_model=CurveResponse)
    def curve_endpoint(req: CurveRequest):
        return guarded(handle_curve, req)

    @app.post("/sweep", response_model=SweepResponse)
    def sweep_endpoint(req: SweepRequest):
        return guarded(handle_sweep, req)

    @app.post("/potential-test", response_model=PotentialTestResponse)
    def potential_endpoint(req: PotentialTestRequest):
        return guarded(handle_potential_test, req)

    return app


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, float) and not math.isfinite(obj):
        return None
    return obj
