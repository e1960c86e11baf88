import math
from typing import List, Literal, Optional, Tuple, Union

from pydantic import BaseModel, ConfigDict, Field, field_validator


def _split_list(value):
    if isinstance(value, str):
        return [item.strip() for item in value.split(",") if item.strip()]
    return value


def _parse_interval(text: str) -> Tuple[float, float]:
    lo, sep, hi = text.partition(":")
    if not sep:
        raise ValueError(f"interval '{text}' must look like a:b")
    a, b = float(lo), float(hi)
    if not a < b:
        raise ValueError(f"interval '{text}' is empty")
    return a, b


class Section(BaseModel):
    model_config = ConfigDict(extra="forbid")


class DampingSection(Section):
    support: List[Tuple[float, float]] = [(0.2, 0.5)]
    alpha: float = Field(1.0, ge=0.0)

    @field_validator("support", mode="before")
    @classmethod
    def parse_support(cls, value):
        if isinstance(value, str):
            if value.strip().lower() == "all":
                return [(-math.inf, math.inf)]
            if value.strip().lower() == "none":
                return []
            return [_parse_interval(part) for part in _split_list(value)]
        return value


class CustomSection(Section):
    A: Optional[str] = None
    B: Optional[str] = None
    V: Optional[str] = None
    M: Optional[str] = None
    dx: float = Field(1.0, gt=0.0)


class ModelSection(Section):
    kind: Literal["wave1d", "transport1d", "schrodinger1d", "beam1d", "custom"] = "wave1d"
    n: int = Field(64, ge=2)
    length: float = Field(1.0, gt=0.0)
    damping: DampingSection = DampingSection()
    sigma: float = Field(2.0, ge=0.0)
    viscosity: Literal["none", "laplacian_block", "sqrtAA"] = "laplacian_block"
    viscosity_eps: float = Field(0.0, ge=0.0)
    custom: CustomSection = CustomSection()


class FeedbackSection(Section):
    name: str
    p: Optional[float] = None
    q: Optional[float] = None
    slope: Optional[float] = None
    gain: Optional[float] = None
    chi: str = "uniform"


class GrowthSection(Section):
    s0: Optional[float] = Field(None, gt=0.0, le=1.0)


class SolverSection(Section):
    method: Literal["newton", "fixed_point"] = "newton"
    tol: float = Field(1e-12, gt=0.0)
    max_iter: int = Field(50, ge=1)
    relaxation: float = Field(0.5, gt=0.0, le=1.0)
    fd_step: float = Field(1e-7, gt=0.0)


class SchemeSection(Section):
    dt: Optional[float] = Field(None, gt=0.0)
    dt_factor: float = Field(0.5, gt=0.0)
    time_viscosity: Literal["none", "squared", "bounded_squared"] = "squared"
    space_viscosity_in_stage: bool = True
    solver: SolverSection = SolverSection()


class InitialSection(Section):
    rule: Literal["smooth", "highfreq", "random"] = "smooth"
    energy: Optional[float] = Field(None, gt=0.0)
    window: Tuple[float, float] = (0.6, 0.9)

    @field_validator("window", mode="before")
    @classmethod
    def parse_window(cls, value):
        return _parse_interval(value) if isinstance(value, str) else value


class RunSection(Section):
    T_final: float = Field(10.0, gt=0.0)


class RecordSection(Section):
    snapshots: Union[Literal["none", "all"], int] = "none"

    @field_validator("snapshots", mode="before")
    @classmethod
    def parse_snapshots(cls, value):
        if isinstance(value, str) and value.strip().isdigit():
            value = int(value)
        if isinstance(value, int) and value < 1:
            raise ValueError("snapshot stride must be >= 1")
        return value


class GramianSection(Section):
    T_obs: float = Field(2.0, gt=0.0)
    include_viscosity: bool = False
    meshes: List[int] = []

    @field_validator("meshes", mode="before")
    @classmethod
    def parse_meshes(cls, value):
        return _split_list(value)


class EnvelopeSection(Section):
    variant: Literal["continuous", "space", "time"] = "time"
    T_obs: Optional[float] = Field(None, gt=0.0)
    C_T: Optional[float] = Field(None, gt=0.0)
    beta: Optional[float] = Field(None, gt=0.0)
    prefactor: Optional[float] = Field(None, gt=0.0)
    onset: Optional[float] = Field(None, ge=0.0)
    samples: int = Field(200, ge=2)


class AuditSection(Section):
    T_obs: float = Field(4.0, gt=0.0)


class SweepSection(Section):
    meshes: List[int] = [64, 128, 256]
    viscosity: List[bool] = [True]
    dt_factors: List[float] = [0.5]
    q: float = Field(0.5, gt=0.0, lt=1.0)
    fit_model: Literal["exponential", "algebraic"] = "exponential"
    fit_window: Optional[Tuple[float, float]] = None
    onset: Optional[float] = Field(None, ge=0.0)
    # thresholds checked by `sweep --assert`
    max_uniformity: Optional[float] = None
    min_uniformity: Optional[float] = None
    min_r2: Optional[float] = None
    max_rate_spread: Optional[float] = None
    max_envelope_ratio: Optional[float] = None
    exponent_band: Optional[Tuple[float, float]] = None

    @field_validator("meshes", "dt_factors", mode="before")
    @classmethod
    def parse_numbers(cls, value):
        return _split_list(value)

    @field_validator("viscosity", mode="before")
    @classmethod
    def parse_flags(cls, value):
        flags = {"on": True, "off": False}
        items = _split_list(value)
        if isinstance(items, list):
            return [flags.get(str(item).lower(), item) for item in items]
        return items

    @field_validator("fit_window", "exponent_band", mode="before")
    @classmethod
    def parse_pair(cls, value):
        return _parse_interval(value) if isinstance(value, str) else value


class OutputSection(Section):
    dir: Optional[str] = None


class RunConfig(Section):
    model: ModelSection = ModelSection()
    feedback: FeedbackSection
    growth: GrowthSection = GrowthSection()
    scheme: SchemeSection = SchemeSection()
    initial: InitialSection = InitialSection()
    run: RunSection = RunSection()
    record: RecordSection = RecordSection()
    gramian: GramianSection = GramianSection()
    envelope: EnvelopeSection = EnvelopeSection()
    audit: AuditSection = AuditSection()
    sweep: SweepSection = SweepSection()
    output: OutputSection = OutputSection()
    seed: Optional[int] = Field(None, ge=0, lt=2 ** 64)
