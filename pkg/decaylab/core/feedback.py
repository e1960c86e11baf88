import logging
from dataclasses import dataclass, field, replace
from typing import Callable, Dict, Optional

import numpy as np
import scipy.sparse as sp

from decaylab.core.errors import ConfigError, DomainError, ShapeError
from decaylab.core.growth import (
    GrowthFunction,
    arctan_growth,
    linear_growth,
    power_growth,
)
from decaylab.schemas.reports import SectorReport

logger = logging.getLogger(__name__)

LocalRho = Callable[[np.ndarray, np.ndarray], np.ndarray]
Scalar = Callable[[np.ndarray], np.ndarray]


@dataclass(frozen=True)
class FeedbackMap:
    """
    Damping nonlinearity rho acting on grid values.

    local:    rho(x, s) per node
    nonlocal: phi1(f(x)) * phi2(dx * sum(chi * f)), one reduction shared by all nodes
    """
    name: str
    kind: str
    growth: GrowthFunction
    lipschitz_bound: float
    rho_local: Optional[LocalRho] = None
    rho_prime: Optional[LocalRho] = None
    phi1: Optional[Scalar] = None
    phi1_prime: Optional[Scalar] = None
    phi2: Optional[Scalar] = None
    phi2_prime: Optional[Scalar] = None
    kernel_chi: Optional[np.ndarray] = None
    domain_length: float = 1.0
    params: Dict[str, float] = field(default_factory=dict)

    @property
    def is_local(self) -> bool:
        return self.kind == "local"

    @property
    def has_jacobian(self) -> bool:
        if self.is_local:
            return self.rho_prime is not None
        return self.phi1_prime is not None and self.phi2_prime is not None

    def _chi(self, n: int) -> np.ndarray:
        if self.kernel_chi is None:
            return np.full(n, 1.0 / self.domain_length)
        if self.kernel_chi.shape != (n,):
            raise ShapeError(f"kernel chi has {self.kernel_chi.shape[0]} entries, grid has {n}")
        return self.kernel_chi

    def _functional(self, values: np.ndarray, dx: float) -> float:
        return float(dx * np.dot(self._chi(values.shape[0]), values))

    def apply(self, positions: np.ndarray, values: np.ndarray, dx: Optional[float] = None) -> np.ndarray:
        positions = np.asarray(positions, dtype=float)
        values = np.asarray(values, dtype=float)
        if positions.shape != values.shape:
            raise ShapeError(f"positions {positions.shape} and values {values.shape} differ in length")
        if self.is_local:
            return self.rho_local(positions, values)
        dx = _grid_step(positions) if dx is None else dx
        tau = self._functional(values, dx)
        return self.phi1(values) * self.phi2(np.array(tau))

    def jacobian(self, positions: np.ndarray, values: np.ndarray, dx: Optional[float] = None) -> sp.csr_matrix:
        """d apply / d values; diagonal for local maps, diagonal plus rank one otherwise."""
        positions = np.asarray(positions, dtype=float)
        values = np.asarray(values, dtype=float)
        if positions.shape != values.shape:
            raise ShapeError(f"positions {positions.shape} and values {values.shape} differ in length")
        if not self.has_jacobian:
            raise DomainError(f"feedback {self.name} has no analytic derivative")
        if self.is_local:
            return sp.diags(self.rho_prime(positions, values), format="csr")
        dx = _grid_step(positions) if dx is None else dx
        tau = np.array(self._functional(values, dx))
        diag = self.phi1_prime(values) * self.phi2(tau)
        rank_one = np.outer(self.phi1(values), self.phi2_prime(tau) * dx * self._chi(values.shape[0]))
        return sp.csr_matrix(np.diag(diag) + rank_one)


def _grid_step(positions: np.ndarray) -> float:
    if positions.shape[0] < 2:
        return 1.0
    return float(positions[1] - positions[0])


def _power_tail(p: float, slope: float):
    # s^p inside the unit interval, affine with the given slope outside
    def rho(x, s):
        a = np.abs(s)
        return np.sign(s) * np.where(a <= 1.0, a ** p, 1.0 + slope * (a - 1.0))

    def rho_prime(x, s):
        a = np.abs(s)
        return np.where(a <= 1.0, p * a ** (p - 1.0), slope)

    return rho, rho_prime


def power_feedback(p: float) -> FeedbackMap:
    rho, rho_prime = _power_tail(p, 1.0)
    return FeedbackMap(
        name="power",
        kind="local",
        growth=power_growth(p),
        lipschitz_bound=max(p, 1.0),
        rho_local=rho,
        rho_prime=rho_prime,
        params={"p": p},
    )


def power_linear_tail_feedback(p: float, slope: float = 1.0) -> FeedbackMap:
    if slope <= 0:
        raise ConfigError(f"tail slope must be positive (got {slope})", field="feedback.slope")
    rho, rho_prime = _power_tail(p, slope)
    base = power_growth(p)
    growth = replace(base, c1=min(1.0, slope), c2=max(1.0, slope))
    return FeedbackMap(
        name="power_linear_tail",
        kind="local",
        growth=growth,
        lipschitz_bound=max(p, slope, 1.0),
        rho_local=rho,
        rho_prime=rho_prime,
        params={"p": p, "slope": slope},
    )


def linear_feedback(gain: float = 1.0) -> FeedbackMap:
    if gain <= 0:
        raise ConfigError(f"gain must be positive (got {gain})", field="feedback.gain")
    base = linear_growth()
    growth = replace(base, c1=min(1.0, gain), c2=max(1.0, gain))
    return FeedbackMap(
        name="linear",
        kind="local",
        growth=growth,
        lipschitz_bound=gain,
        rho_local=lambda x, s: gain * s,
        rho_prime=lambda x, s: np.full_like(s, gain),
        params={"gain": gain},
    )


def arctan_feedback() -> FeedbackMap:
    # derivative at |s| = 1 is 1/2, so the tail keeps slope 1/2
    def rho(x, s):
        a = np.abs(s)
        return np.sign(s) * np.where(a <= 1.0, np.arctan(a), np.pi / 4.0 + 0.5 * (a - 1.0))

    def rho_prime(x, s):
        a = np.abs(s)
        return np.where(a <= 1.0, 1.0 / (1.0 + a ** 2), 0.5)

    base = arctan_growth()
    growth = replace(base, c1=0.5, c2=1.0)
    return FeedbackMap(
        name="arctan",
        kind="local",
        growth=growth,
        lipschitz_bound=1.0,
        rho_local=rho,
        rho_prime=rho_prime,
    )


def nonlocal_sine_arctan_feedback(chi: Optional[np.ndarray] = None, domain_length: float = 1.0) -> FeedbackMap:
    # s - sin s >= (19/120) s^3 on |s| <= 1, and pi + arctan stays in (pi/2, 3pi/2)
    base = power_growth(3.0)
    growth = replace(base, c1=0.24, c2=6.0)
    return FeedbackMap(
        name="nonlocal_sine_arctan",
        kind="nonlocal",
        growth=growth,
        lipschitz_bound=1.5 * np.pi * (1.0 - np.cos(1.0)) + 1.0,
        phi1=lambda s: s - np.sin(s),
        phi1_prime=lambda s: 1.0 - np.cos(s),
        phi2=lambda tau: np.pi + np.arctan(tau),
        phi2_prime=lambda tau: 1.0 / (1.0 + tau ** 2),
        kernel_chi=None if chi is None else np.asarray(chi, dtype=float),
        domain_length=domain_length,
    )


FEEDBACK_CATALOG = ("power", "power_linear_tail", "linear", "arctan", "nonlocal_sine_arctan")


def catalog_feedback(name: Optional[str], params: Optional[Dict[str, object]] = None) -> FeedbackMap:
    params = dict(params or {})
    if not name:
        raise ConfigError("feedback name is required", field="feedback.name")

    def need(key: str) -> float:
        if params.get(key) is None:
            raise ConfigError(f"feedback '{name}' needs {key}", field=f"feedback.{key}")
        return float(params[key])

    if name == "power":
        fb = power_feedback(need("p"))
    elif name == "power_linear_tail":
        fb = power_linear_tail_feedback(need("p"), float(params.get("slope") or 1.0))
    elif name == "linear":
        fb = linear_feedback(float(params.get("gain") or 1.0))
    elif name == "arctan":
        fb = arctan_feedback()
    elif name == "nonlocal_sine_arctan":
        fb = nonlocal_sine_arctan_feedback(params.get("chi"), float(params.get("domain_length") or 1.0))
    else:
        raise ConfigError(f"unknown feedback '{name}' (known: {', '.join(FEEDBACK_CATALOG)})", field="feedback.name")
    logger.debug("feedback %s kind=%s lipschitz=%.4g", fb.name, fb.kind, fb.lipschitz_bound)
    return fb


def _sector_margins(fb: FeedbackMap, s: np.ndarray, rho: np.ndarray):
    growth = fb.growth
    a = np.abs(s)
    r = np.abs(rho)
    inner = a <= 1.0
    lower = np.where(inner, r - growth.c1 * growth.g(a), r - growth.c1 * a)
    upper = np.where(inner, growth.c2 * growth.inverse(np.minimum(a, 1.0)) - r, growth.c2 * a - r)
    slack = 1e-12 * (1.0 + a)
    return np.minimum(lower, upper) + slack


def _lipschitz_ratio(fb: FeedbackMap, rng: np.random.Generator, pairs: int) -> float:
    """Worst |rho(u) - rho(v)|_inf / (L |u - v|_inf) over random pairs in the unit ball."""
    worst = 0.0
    if fb.is_local:
        u = rng.uniform(-1.0, 1.0, pairs)
        v = rng.uniform(-1.0, 1.0, pairs)
        x = rng.uniform(0.0, fb.domain_length, pairs)
        gap = np.abs(u - v)
        keep = gap > 1e-12
        diff = np.abs(fb.rho_local(x, u) - fb.rho_local(x, v))
        if np.any(keep):
            worst = float(np.max(diff[keep] / gap[keep]))
    else:
        grid = np.linspace(0.0, fb.domain_length, 33)
        dx = float(grid[1] - grid[0])
        for _ in range(max(10, pairs // 50)):
            u = rng.uniform(-1.0, 1.0, grid.shape[0])
            v = rng.uniform(-1.0, 1.0, grid.shape[0])
            gap = float(np.max(np.abs(u - v)))
            if gap > 1e-12:
                diff = float(np.max(np.abs(fb.apply(grid, u, dx) - fb.apply(grid, v, dx))))
                worst = max(worst, diff / gap)
    return worst / fb.lipschitz_bound


def verify_sector(fb: FeedbackMap, samples: int = 1000, seed: int = 7) -> SectorReport:
    """
    Sampled check of s rho(s) >= 0 and the two-sided sector bounds on s in [-10, 10],
    plus the declared Lipschitz bound on random pairs in the unit ball.
    """
    if samples < 100:
        raise ConfigError(f"verify_sector needs at least 100 samples (got {samples})")

    half = samples // 2
    logs = np.logspace(-8, 1, half // 2)
    s = np.unique(np.concatenate([-logs, logs, np.linspace(-10.0, 10.0, samples - 2 * (half // 2))]))
    positions = np.linspace(0.0, fb.domain_length, 5)

    sign_margins = []
    sector_margins = []
    if fb.is_local:
        for x in positions:
            xs = np.full_like(s, x)
            rho = fb.rho_local(xs, s)
            sign_margins.append(np.min(s * rho))
            sector_margins.append(np.min(_sector_margins(fb, s, rho)))
    else:
        # phi1 pointwise sign, then random grid functions through the full map
        sign_margins.append(np.min(s * fb.phi1(s)))
        rng = np.random.default_rng(seed)
        grid = np.linspace(0.0, fb.domain_length, 33)
        dx = float(grid[1] - grid[0])
        for _ in range(max(10, samples // 50)):
            scale = 10.0 ** rng.uniform(-3.0, 1.0)
            f = scale * rng.uniform(-1.0, 1.0, grid.shape[0])
            rho = fb.apply(grid, f, dx)
            sign_margins.append(np.min(f * rho))
            sector_margins.append(np.min(_sector_margins(fb, f, rho)))

    worst_sign = float(min(sign_margins))
    worst_sector = float(min(sector_margins)) if sector_margins else 0.0
    lipschitz_ratio = _lipschitz_ratio(fb, np.random.default_rng(seed + 1), samples)
    report = SectorReport(
        name=fb.name,
        sign_ok=worst_sign >= 0.0,
        sector_ok=worst_sector >= 0.0,
        worst_margin=min(worst_sign, worst_sector),
        worst_sign_margin=worst_sign,
        worst_sector_margin=worst_sector,
        lipschitz_ok=lipschitz_ratio <= 1.0 + 1e-9,
        worst_lipschitz_ratio=lipschitz_ratio,
        samples=int(s.shape[0]),
    )
    logger.debug("sector check %s sign_ok=%s sector_ok=%s lipschitz_ok=%s worst=%.3g",
                 fb.name, report.sign_ok, report.sector_ok, report.lipschitz_ok, report.worst_margin)
    return report
