"""
Growth laws g for the feedback sector condition, with the catalog of
closed-form examples (power, power-log, exponentially flat, log-weak, linear).
"""
import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Dict, List, Optional

import numpy as np
from scipy.optimize import brentq

from decaylab.core.errors import ConfigError, InvalidGrowthError

logger = logging.getLogger(__name__)

ScalarMap = Callable[[np.ndarray], np.ndarray]


class GrowthKind(str, Enum):
    SUPERLINEAR = "superlinear-at-zero"
    LINEAR = "linear-at-zero"


@dataclass(frozen=True)
class GrowthFunction:
    name: str
    g: ScalarMap
    g_prime: ScalarMap
    s0: float
    c1: float = 1.0
    c2: float = 1.0
    kind: GrowthKind = GrowthKind.SUPERLINEAR
    params: Dict[str, float] = field(default_factory=dict)
    # x g'(x) / g(x); lets Lambda_H be evaluated where g itself underflows
    elasticity_fn: Optional[ScalarMap] = None
    g_inverse: Optional[ScalarMap] = None
    lambda_limit: Optional[float] = None
    predicted_rate: Optional[ScalarMap] = None
    predicted_exponent: Optional[float] = None

    def __call__(self, s):
        return self.g(s)

    def elasticity(self, x):
        x = np.asarray(x, dtype=float)
        if self.elasticity_fn is not None:
            return self.elasticity_fn(x)
        gx = self.g(x)
        with np.errstate(divide="ignore", invalid="ignore"):
            return np.where(gx != 0.0, x * self.g_prime(x) / np.where(gx != 0.0, gx, 1.0), 1.0)

    def inverse(self, y):
        """g^{-1} on [0, g(s0)], odd extension."""
        y = np.asarray(y, dtype=float)
        if self.g_inverse is not None:
            return self.g_inverse(y)
        out = np.empty_like(y)
        top = float(self.g(np.array(self.s0)))
        for i, yi in np.ndenumerate(y):
            a = min(abs(yi), top)
            if a == 0.0:
                out[i] = 0.0
                continue
            root = brentq(lambda s: float(self.g(np.array(s))) - a, 0.0, self.s0, xtol=1e-300, rtol=1e-14)
            out[i] = np.sign(yi) * root
        return out

    def probe_grid(self) -> np.ndarray:
        lin = np.linspace(0.0, self.s0, 401)
        geo = self.s0 * np.logspace(-8, 0, 81)
        return np.unique(np.concatenate([lin, geo]))

    def validate(self) -> List[str]:
        """Sampled checks of the growth-law assumptions; returns the list of violations."""
        issues: List[str] = []
        if not (0.0 < self.s0 <= 1.0):
            issues.append(f"s0={self.s0} outside (0, 1]")
            return issues
        if self.c1 <= 0 or self.c2 <= 0:
            issues.append("sector constants must be positive")

        x = self.probe_grid()
        with np.errstate(all="ignore"):
            gx = np.asarray(self.g(x), dtype=float)
            gm = np.asarray(self.g(-x), dtype=float)

        if not np.all(np.isfinite(gx)):
            issues.append("g not finite on [0, s0]")
            return issues
        if abs(gx[0]) > 0.0:
            issues.append("g(0) != 0")
        if np.max(np.abs(gm + gx)) > 1e-14 * max(1.0, np.max(np.abs(gx))):
            issues.append("g is not odd")

        steps = np.diff(gx)
        representable = gx[1:] > np.finfo(float).tiny
        if np.any(steps < 0) or np.any(steps[representable] <= 0):
            issues.append("g not strictly increasing on probe grid")

        if gx[-1] > 1.0 + 1e-12:
            issues.append(f"g(s0)={gx[-1]:.6g} exceeds 1")

        g0 = float(self.g_prime(np.array(0.0)))
        if self.kind == GrowthKind.SUPERLINEAR:
            if g0 != 0.0:
                issues.append("superlinear growth needs g'(0) = 0")
            s = np.array([10.0 ** -k for k in range(1, 9)])
            s = s[s <= self.s0]
            if s.size >= 2:
                with np.errstate(all="ignore"):
                    ratio = self.g(s) * self.elasticity(s) ** 2 / s
                if not np.all(np.isfinite(ratio)) or ratio[-1] > ratio[0]:
                    issues.append("s g'(s)^2 / g(s) does not decay towards 0")
        elif g0 <= 0.0:
            issues.append("linear-at-zero growth needs g'(0) > 0")

        return issues


def _odd(fn):
    def wrapped(s):
        s = np.asarray(s, dtype=float)
        return np.sign(s) * fn(np.abs(s))
    return wrapped


def _log_inv(x):
    # ln(1/x) with x = 0 mapped to +inf
    with np.errstate(divide="ignore"):
        return -np.log(x)


def power_growth(p: float, s0: float = 1.0) -> GrowthFunction:
    if p <= 1.0:
        raise InvalidGrowthError(f"power growth needs p > 1 (got {p}); use 'linear'")
    return GrowthFunction(
        name="power",
        g=_odd(lambda x: x ** p),
        g_prime=lambda s: p * np.abs(np.asarray(s, dtype=float)) ** (p - 1.0),
        s0=s0,
        params={"p": p},
        elasticity_fn=lambda x: np.full_like(np.asarray(x, dtype=float), p),
        g_inverse=_odd(lambda y: y ** (1.0 / p)),
        lambda_limit=2.0 / (p + 1.0),
        predicted_rate=lambda t: t ** (-2.0 / (p - 1.0)),
        predicted_exponent=-2.0 / (p - 1.0),
    )


def power_log_growth(p: float, q: float, s0: Optional[float] = None) -> GrowthFunction:
    if p <= 1.0 or q <= 0.0:
        raise InvalidGrowthError(f"power_log growth needs p > 1 and q > 0 (got p={p}, q={q})")
    # below this s0, g is increasing and H convex
    s0 = s0 if s0 is not None else float(np.exp(-q / (p - 1.0) - 2.0))

    def g_abs(x):
        ell = _log_inv(x)
        with np.errstate(invalid="ignore"):
            return np.where(x > 0, x ** p * ell ** q, 0.0)

    def g_prime(s):
        x = np.abs(np.asarray(s, dtype=float))
        ell = _log_inv(x)
        with np.errstate(invalid="ignore"):
            return np.where(x > 0, x ** (p - 1.0) * ell ** (q - 1.0) * (p * ell - q), 0.0)

    def elasticity(x):
        ell = _log_inv(np.asarray(x, dtype=float))
        with np.errstate(divide="ignore"):
            return p - q / ell

    return GrowthFunction(
        name="power_log",
        g=_odd(g_abs),
        g_prime=g_prime,
        s0=s0,
        params={"p": p, "q": q},
        elasticity_fn=elasticity,
        lambda_limit=2.0 / (p + 1.0),
        predicted_rate=lambda t: t ** (-2.0 / (p - 1.0)) * np.log(t) ** (-2.0 * q / (p - 1.0)),
        predicted_exponent=-2.0 / (p - 1.0),
    )


def exp_inv_sq_growth(s0: float = 0.8) -> GrowthFunction:
    def g_abs(x):
        with np.errstate(divide="ignore", over="ignore"):
            return np.where(x > 0, np.exp(-1.0 / np.where(x > 0, x, 1.0) ** 2), 0.0)

    def g_prime(s):
        x = np.abs(np.asarray(s, dtype=float))
        safe = np.where(x > 0, x, 1.0)
        with np.errstate(over="ignore", under="ignore", divide="ignore"):
            return np.where(x > 0, np.exp(np.log(2.0) - 3.0 * np.log(safe) - 1.0 / safe ** 2), 0.0)

    def inverse(y):
        a = np.abs(y)
        safe = np.where(a > 0, a, 0.5)
        return np.where(a > 0, np.sign(y) / np.sqrt(-np.log(safe)), 0.0)

    return GrowthFunction(
        name="exp_inv_sq",
        g=_odd(g_abs),
        g_prime=g_prime,
        s0=s0,
        elasticity_fn=lambda x: 2.0 / np.asarray(x, dtype=float) ** 2,
        g_inverse=inverse,
        lambda_limit=0.0,
        predicted_rate=lambda t: 1.0 / np.log(t),
    )


def log_weak_growth(p: float, s0: float = float(np.exp(-1.0))) -> GrowthFunction:
    if p <= 0.0:
        raise InvalidGrowthError(f"log_weak growth needs p > 0 (got {p})")

    def g_abs(x):
        ell = _log_inv(x)
        return np.where(x > 0, x / np.where(x > 0, ell, 1.0) ** p, 0.0)

    def g_prime(s):
        x = np.abs(np.asarray(s, dtype=float))
        ell = _log_inv(x)
        with np.errstate(divide="ignore"):
            return np.where(x > 0, ell ** (-p) + p * ell ** (-p - 1.0), 0.0)

    def elasticity(x):
        ell = _log_inv(np.asarray(x, dtype=float))
        return 1.0 + p / ell

    k = 1.0 / (p + 1.0)
    return GrowthFunction(
        name="log_weak",
        g=_odd(g_abs),
        g_prime=g_prime,
        s0=s0,
        params={"p": p},
        elasticity_fn=elasticity,
        lambda_limit=1.0,
        predicted_rate=lambda t: np.exp(-t ** k) / t ** k,
    )


def exp_log_pow_growth(p: float, s0: float = float(np.exp(-1.0))) -> GrowthFunction:
    if p <= 1.0:
        raise InvalidGrowthError(f"exp_log_pow growth needs p > 1 (got {p})")

    def g_abs(x):
        ell = _log_inv(x)
        with np.errstate(over="ignore", under="ignore"):
            return np.where(x > 0, np.exp(-np.where(x > 0, ell, 0.0) ** p), 0.0)

    def g_prime(s):
        x = np.abs(np.asarray(s, dtype=float))
        safe = np.where(x > 0, x, 1.0)
        ell = -np.log(safe)
        with np.errstate(over="ignore", under="ignore", divide="ignore"):
            return np.where(x > 0, np.exp(-ell ** p + np.log(p) + (p - 1.0) * np.log(ell) - np.log(safe)), 0.0)

    def elasticity(x):
        ell = _log_inv(np.asarray(x, dtype=float))
        return p * ell ** (p - 1.0)

    def inverse(y):
        a = np.abs(y)
        safe = np.where(a > 0, a, 0.5)
        return np.where(a > 0, np.sign(y) * np.exp(-(-np.log(safe)) ** (1.0 / p)), 0.0)

    return GrowthFunction(
        name="exp_log_pow",
        g=_odd(g_abs),
        g_prime=g_prime,
        s0=s0,
        params={"p": p},
        elasticity_fn=elasticity,
        g_inverse=inverse,
        lambda_limit=0.0,
        predicted_rate=lambda t: np.exp(-2.0 * np.log(t) ** (1.0 / p)),
    )


def linear_growth(s0: float = 1.0) -> GrowthFunction:
    return GrowthFunction(
        name="linear",
        g=lambda s: np.asarray(s, dtype=float) * 1.0,
        g_prime=lambda s: np.ones_like(np.asarray(s, dtype=float)),
        s0=s0,
        kind=GrowthKind.LINEAR,
        elasticity_fn=lambda x: np.ones_like(np.asarray(x, dtype=float)),
        g_inverse=lambda y: np.asarray(y, dtype=float) * 1.0,
        lambda_limit=1.0,
        predicted_rate=lambda t: np.exp(-np.asarray(t, dtype=float)),
    )


def arctan_growth(s0: float = 1.0) -> GrowthFunction:
    def elasticity(x):
        x = np.asarray(x, dtype=float)
        safe = np.where(x > 0, x, 1.0)
        return np.where(x > 0, safe / ((1.0 + safe ** 2) * np.arctan(safe)), 1.0)

    return GrowthFunction(
        name="arctan",
        g=lambda s: np.arctan(np.asarray(s, dtype=float)),
        g_prime=lambda s: 1.0 / (1.0 + np.asarray(s, dtype=float) ** 2),
        s0=s0,
        kind=GrowthKind.LINEAR,
        elasticity_fn=elasticity,
        g_inverse=lambda y: np.tan(np.asarray(y, dtype=float)),
        lambda_limit=1.0,
        predicted_rate=lambda t: np.exp(-np.asarray(t, dtype=float)),
    )


GROWTH_CATALOG = {
    "power": (power_growth, ("p",)),
    "power_log": (power_log_growth, ("p", "q")),
    "exp_inv_sq": (exp_inv_sq_growth, ()),
    "log_weak": (log_weak_growth, ("p",)),
    "exp_log_pow": (exp_log_pow_growth, ("p",)),
    "linear": (linear_growth, ()),
    "arctan": (arctan_growth, ()),
}


def catalog_growth(name: str, params: Optional[Dict[str, float]] = None) -> GrowthFunction:
    params = dict(params or {})
    if name not in GROWTH_CATALOG:
        raise ConfigError(f"unknown growth '{name}' (known: {', '.join(sorted(GROWTH_CATALOG))})", field="growth.name")
    builder, required = GROWTH_CATALOG[name]
    missing = [k for k in required if params.get(k) is None]
    if missing:
        raise ConfigError(f"growth '{name}' needs {', '.join(missing)}", field=f"growth.{missing[0]}")
    kwargs = {k: float(params[k]) for k in required}
    if params.get("s0") is not None:
        kwargs["s0"] = float(params["s0"])
    growth = builder(**kwargs)
    logger.debug("growth %s params=%s s0=%.6g", name, growth.params, growth.s0)
    return growth
