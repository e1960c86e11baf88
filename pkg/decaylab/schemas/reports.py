from typing import Dict, List, Optional

from pydantic import BaseModel

E_NORMALIZATION = "C_T is normalized against E(0) = 1/2 |phi(0)|_M^2"


class SectorReport(BaseModel):
    name: str
    sign_ok: bool
    sector_ok: bool
    worst_margin: float
    worst_sign_margin: float
    worst_sector_margin: float
    lipschitz_ok: bool = True
    worst_lipschitz_ratio: float = 0.0
    samples: int


class StructureReport(BaseModel):
    kind: str
    n: int
    dx: float
    skew_margin: float
    skew_ok: bool
    m_min_eig: Optional[float] = None
    m_spd_ok: bool = True
    mb_min_eig: Optional[float] = None
    mb_psd_ok: bool = True
    mv_min_eig: Optional[float] = None
    mv_psd_ok: bool = True
    viscosity_enabled: bool
    dissipativity_min: float
    dissipativity_ok: bool
    viscosity_bound: Optional[float] = None
    messages: List[str] = []

    @property
    def ok(self) -> bool:
        return self.skew_ok and self.m_spd_ok and self.mb_psd_ok and self.mv_psd_ok and self.dissipativity_ok


class GramianReport(BaseModel):
    T_obs: float
    C_T: float
    include_viscosity: bool
    n: int
    dx: float
    steps: int
    method: str
    min_eig_raw: float
    asymmetry: float
    normalization: str = E_NORMALIZATION


class HalfTimeResult(BaseModel):
    reached: bool
    time: Optional[float] = None
    q: float
    final_ratio: float


class FitResult(BaseModel):
    model: str
    slope: float
    intercept: float
    r_squared: float
    n_points: int
    window: List[float]


class EnvelopeCheck(BaseModel):
    calibrated_prefactor: float
    max_ratio: float
    prefactor_used: float
    onset: float
    onset_adjusted: bool
    samples: int


class InequalityAudit(BaseModel):
    name: str
    lhs: float
    rhs: float
    constant: float
    proof_constant: Optional[float] = None
    slack: float
    holds: bool
    quadrature: str


class AuditReport(BaseModel):
    T_obs: float
    dt: float
    dx: float
    steps: int
    normB: float
    rows: List[InequalityAudit]

    @property
    def all_hold(self) -> bool:
        return all(row.holds for row in self.rows)


class IterationRow(BaseModel):
    window: int
    energy: float
    measured_M: float
    bound_M: Optional[float] = None
    energy_bound: Optional[float] = None


class IterationReport(BaseModel):
    beta: float
    rho_T: float
    r: float
    rows: List[IterationRow]


class CellResult(BaseModel):
    n: int
    dx: float
    dt: float
    viscosity: bool
    column: str
    half_time: Optional[float] = None
    half_time_reached: bool = False
    final_ratio: Optional[float] = None
    fit_slope: Optional[float] = None
    fit_r2: Optional[float] = None
    predicted_exponent: Optional[float] = None
    envelope_raw: Optional[float] = None
    envelope_ratio: Optional[float] = None
    max_residual: Optional[float] = None
    manifest_hash: str
    error: Optional[str] = None


class SweepResult(BaseModel):
    cells: List[CellResult]
    uniformity_ratio: Dict[str, Optional[float]]
    calibrated_prefactor: Dict[str, Optional[float]]
    censored: Dict[str, bool]
