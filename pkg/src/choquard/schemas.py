"""Pydantic request/response models shared by the service and the CLI.

Every response carries a ``schema`` version key (field name
``schema_version`` internally since pydantic reserves the attribute).
Scalars are plain doubles; non-finite diagnostics are serialized as null.
"""
from __future__ import annotations

from typing import Literal

from pydantic import BaseModel, ConfigDict, Field

#: fixed seed constant for every sampled direction; documented so that
#: identical configurations reproduce bit-identical artifacts
SEED_DEFAULT = 20260810


class GridSpec(BaseModel):
    kind: Literal["uniform", "geometric"] = "uniform"
    n_nodes: int = Field(2000, ge=64)
    r_max: float = Field(40.0, gt=0)


class SolveRequest(BaseModel):
    p: float = 2.0
    omega: float = Field(1.0, gt=0)
    sigma: float | None = Field(
        None, description="rescale the solution along the dilation orbit "
                          "to this mass (omega changes accordingly)")
    grid: GridSpec = GridSpec()
    tol: float = 1e-10
    identity_tol: float = 1e-3
    q0_bracket: tuple[float, float] = (0.05, 12.0)
    a0_bracket: tuple[float, float] = (1.05, 9.0)

    def cache_key(self) -> tuple:
        return ("solve", self.p, self.omega, self.sigma, self.grid.kind,
                self.grid.n_nodes, self.grid.r_max, self.tol,
                self.q0_bracket, self.a0_bracket)


class ProfileData(BaseModel):
    r: list[float]
    values: list[float]


class SolutionProfiles(BaseModel):
    r: list[float]
    Q: list[float]
    A: list[float]


class IdentityReportModel(BaseModel):
    pohozaev_residuals: list[float]
    k_E: float
    omega_predicted: float
    c_star_direct: float
    c_star_formula: float
    lfm1_flags: list[bool]


class TailFitModel(BaseModel):
    c0: float
    d0: float
    decay_rate: float


class SolveResponse(BaseModel):
    model_config = ConfigDict(populate_by_name=True)

    schema_version: int = Field(1, alias="schema")
    p: float
    omega: float
    sigma: float
    q0: float
    a0: float
    energy: float
    report: IdentityReportModel
    tail: TailFitModel
    profile: SolutionProfiles | None = None


class OracleRequest(BaseModel):
    p: float = 2.0
    sigma: float = Field(..., gt=0)
    grid: GridSpec = GridSpec(n_nodes=1600, r_max=32.0)
    step: float = 0.05
    max_steps: int = 60000
    energy_tol: float = 1e-13
    init: Literal["gaussian", "exponential"] = "gaussian"

    def cache_key(self) -> tuple:
        return ("oracle", self.p, self.sigma, self.grid.kind,
                self.grid.n_nodes, self.grid.r_max, self.step,
                self.max_steps, self.energy_tol, self.init)


class OracleResponse(SolveResponse):
    steps: int = 0
    converged: bool = True
    final_residual: float = 0.0
    outside_uniqueness_hypothesis: bool = False


class VerifyRequest(BaseModel):
    p: float = 2.0
    omega: float = Field(1.0, gt=0)
    profile: ProfileData


class VerifyResponse(BaseModel):
    model_config = ConfigDict(populate_by_name=True)

    schema_version: int = Field(1, alias="schema")
    p: float
    omega: float
    sigma: float
    energy: float
    report: IdentityReportModel


class PhiPoint(BaseModel):
    s: float
    phi: float


class GnRequest(BaseModel):
    p: float = 2.0
    omega: float = Field(1.0, gt=0)
    grid: GridSpec = GridSpec()
    tol: float = 1e-10
    s_count: int = Field(9, ge=3)


class GnResponse(BaseModel):
    model_config = ConfigDict(populate_by_name=True)

    schema_version: int = Field(1, alias="schema")
    p: float
    sigma: float
    omega: float
    energy: float
    c_star_direct: float
    c_star_formula: float
    s_star: float
    phi_at_s_star: float
    grad_sq: float
    omega_admissible: float
    phi_table: list[PhiPoint]


class KernelAngleRecord(BaseModel):
    theta: float
    w0: float
    b0: float
    growth_score: float
    classification: str
    b_defect: float
    c1: float | None = None
    d1: float | None = None


class TailConstantsModel(BaseModel):
    c1_volume: float
    d1_volume: float
    c1_matched: float
    c1_fit: float
    d1_fit: float
    envelope_constant: float


class KernelRequest(BaseModel):
    p: float = 2.0
    omega: float = Field(1.0, gt=0)
    n_angles: int = Field(16, ge=4)
    r_scan: float | None = None
    grid: GridSpec = GridSpec()
    tol: float = 1e-10


class KernelResponse(BaseModel):
    model_config = ConfigDict(populate_by_name=True)

    schema_version: int = Field(1, alias="schema")
    p: float
    omega: float
    dimension_estimate: int
    theta_roots: list[float]
    records: list[KernelAngleRecord]
    root_records: list[KernelAngleRecord]
    root_tail_constants: list[TailConstantsModel]


class CurveRequest(BaseModel):
    p: float = 2.0
    omega: float = Field(1.0, gt=0)
    direction: Literal["kernel", "random"] = "kernel"
    seed: int = SEED_DEFAULT
    eps_max: float = 0.3
    n_eps: int = Field(25, ge=5)
    grid: GridSpec = GridSpec()
    tol: float = 1e-10


class CurveResponse(BaseModel):
    model_config = ConfigDict(populate_by_name=True)

    schema_version: int = Field(1, alias="schema")
    p: float
    omega: float
    direction: str
    eps: list[float]
    K_closed: list[float]
    K_direct: list[float]
    derivatives: tuple[float, float]
    fitted_order: int
    fit_slope: float
    max_discrepancy: float


class SweepRequest(BaseModel):
    p_min: float = 2.0
    p_max: float = 2.3
    steps: int = Field(7, ge=1)
    omega: float = Field(1.0, gt=0)
    sigma: float | None = None
    grid: GridSpec = GridSpec()
    tol: float = 1e-10
    jobs: int = Field(1, ge=1)


class SweepResponse(BaseModel):
    model_config = ConfigDict(populate_by_name=True)

    schema_version: int = Field(1, alias="schema")
    cells: list[SolveResponse]


class PotentialCheck(BaseModel):
    name: str
    value: float
    threshold: float
    comparison: Literal["<", ">="]
    passed: bool


class PotentialTestRequest(BaseModel):
    n_nodes: int = Field(2048, ge=256)


class PotentialTestResponse(BaseModel):
    model_config = ConfigDict(populate_by_name=True)

    schema_version: int = Field(1, alias="schema")
    checks: list[PotentialCheck]
    passed: bool


class ErrorPayload(BaseModel):
    error: str
    message: str
    diagnostics: dict = {}
