"""
Optimal-weight convexity machinery.

H(s) = sqrt(s) g(sqrt(s)) on [0, s0^2], its restricted conjugate, the
functions L = H*/r and psi, the weight w = L^{-1}(. / beta), and the decay
envelopes built from them. Everything here is evaluated numerically; closed
forms are only used in tests.
"""
import logging
import math
from dataclasses import dataclass, replace
from enum import Enum
from typing import Optional

import numpy as np
from pydantic import BaseModel, ConfigDict
from scipy.integrate import quad
from scipy.optimize import bisect

from decaylab.core.errors import (
    DomainError,
    InvalidGrowthError,
    RangeError,
    SingularityError,
    UnsupportedEnvelopeError,
)
from decaylab.core.growth import GrowthFunction, GrowthKind

logger = logging.getLogger(__name__)

_TINY = 1e-300
_SLACK = 1e-12


class EnvelopeMode(str, Enum):
    GENERAL = "general"
    SIMPLIFIED = "simplified"
    EXPONENTIAL = "exponential"


class EnvelopeVariant(str, Enum):
    CONTINUOUS = "continuous"
    SPACE = "space"
    TIME = "time"


class Tolerances(BaseModel):
    model_config = ConfigDict(frozen=True)

    bisect_rtol: float = 1e-12
    max_iter: int = 200
    quad_tol: float = 1e-10
    delta_sing: float = 1e-6
    simplified_threshold: float = 0.999


@dataclass(frozen=True)
class ConvexityProfile:
    growth: GrowthFunction
    beta: float
    hp_at_s0sq: float
    lambda_limsup_estimate: float
    mode: EnvelopeMode
    tolerances: Tolerances

    @property
    def s0sq(self) -> float:
        return self.growth.s0 ** 2

    @property
    def psi_min(self) -> float:
        """Left end of psi's domain, 1/H'(s0^2)."""
        return 1.0 / self.hp_at_s0sq

    def with_beta(self, beta: float) -> "ConvexityProfile":
        if not beta > 0:
            raise DomainError(f"beta must be positive (got {beta})")
        return replace(self, beta=float(beta))

    def _check_s(self, s: float, allow_zero: bool = True) -> float:
        lower_ok = s >= 0.0 if allow_zero else s > 0.0
        if not lower_ok or s > self.s0sq * (1.0 + _SLACK) or not math.isfinite(s):
            raise DomainError(f"s={s!r} outside the domain of H, {'[' if allow_zero else '('}0, {self.s0sq}]")
        return min(float(s), self.s0sq)

    def H(self, s: float) -> float:
        s = self._check_s(s)
        x = math.sqrt(s)
        return float(x * self.growth.g(np.array(x)))

    def H_prime(self, s: float) -> float:
        s = self._check_s(s)
        if s < _TINY:
            if self.growth.kind == GrowthKind.SUPERLINEAR:
                return 0.0
            return float(self.growth.g_prime(np.array(0.0)))
        x = math.sqrt(s)
        return float(self.growth.g(np.array(x)) / (2.0 * x) + self.growth.g_prime(np.array(x)) / 2.0)

    def inv_H_prime(self, v: float) -> float:
        """(H')^{-1}, clamped to [0, s0^2]."""
        if v <= self.H_prime(0.0):
            return 0.0
        if v >= self.hp_at_s0sq:
            return self.s0sq
        tol = self.tolerances
        return float(bisect(lambda s: self.H_prime(s) - v, 0.0, self.s0sq,
                            xtol=_TINY, rtol=tol.bisect_rtol, maxiter=tol.max_iter, disp=False))

    def maximizer(self, r: float) -> float:
        if r < 0:
            raise DomainError(f"conjugate needs r >= 0 (got {r})")
        if r == 0:
            return 0.0
        if r >= self.hp_at_s0sq:
            return self.s0sq
        return self.inv_H_prime(r)

    def conjugate(self, r: float) -> float:
        """H*(r) = max over [0, s0^2] of r s - H(s)."""
        s = self.maximizer(r)
        if s == 0.0:
            return 0.0
        return r * s - self.H(s)

    def L(self, r: float) -> float:
        if r < 0:
            raise DomainError(f"L needs r >= 0 (got {r})")
        if r == 0:
            return 0.0
        return self.conjugate(r) / r

    def inv_L(self, y: float) -> float:
        if y < 0:
            raise DomainError(f"inv_L needs y >= 0 (got {y})")
        if y >= self.s0sq:
            raise RangeError(f"L never reaches s0^2={self.s0sq}; got y={y}")
        if y == 0:
            return 0.0

        lo, hi = 0.0, max(1.0, self.hp_at_s0sq)
        expansions = 0
        while self.L(hi) < y:
            lo, hi = hi, hi * 2.0
            expansions += 1
            if expansions > 2000:
                raise RangeError(f"could not bracket inv_L({y})")
        tol = self.tolerances
        return float(bisect(lambda r: self.L(r) - y, lo, hi,
                            xtol=_TINY, rtol=max(tol.bisect_rtol * 1e-2, 1e-15), maxiter=tol.max_iter, disp=False))

    def Lambda_H(self, s: float) -> float:
        """H(s) / (s H'(s)), evaluated as 2 / (1 + x g'(x)/g(x)) at x = sqrt(s)."""
        s = self._check_s(s, allow_zero=False)
        return float(2.0 / (1.0 + self.growth.elasticity(np.array(math.sqrt(s)))))

    def _lambda_at(self, s: float) -> float:
        if s <= 0.0:
            limit = self.growth.lambda_limit
            return limit if limit is not None else self.lambda_limsup_estimate
        return self.Lambda_H(s)

    def _psi_integrand(self, u: float) -> float:
        lam = self._lambda_at(self.inv_H_prime(1.0 / u))
        gap = 1.0 - lam
        if gap <= 0.0 or (self.mode == EnvelopeMode.GENERAL and gap < self.tolerances.delta_sing):
            raise SingularityError(
                f"1 - Lambda_H = {gap:.3g} near u={u:.6g}; this growth law needs the exponential envelope"
            )
        return 1.0 / gap

    def psi(self, s: float) -> float:
        # substituting v = 1/u turns dv / v^2 into du on [1/H'(s0^2), s]
        smin = self.psi_min
        if not s >= smin * (1.0 - _SLACK):
            raise DomainError(f"psi needs s >= 1/H'(s0^2) = {smin} (got {s})")
        if s <= smin:
            return smin
        tol = self.tolerances.quad_tol
        value, _ = quad(self._psi_integrand, smin, s, epsabs=tol, epsrel=tol, limit=500)
        return smin + value

    def inv_psi(self, t: float) -> float:
        smin = self.psi_min
        if not t >= smin * (1.0 - _SLACK):
            raise DomainError(f"inv_psi needs t >= 1/H'(s0^2) = {smin} (got {t})")
        if t <= smin:
            return smin
        # psi(s) >= s, so the root lies in [smin, t]
        return float(bisect(lambda s: self.psi(s) - t, smin, t,
                            xtol=_TINY, rtol=max(self.tolerances.bisect_rtol * 1e-1, 1e-15),
                            maxiter=self.tolerances.max_iter, disp=False))

    def weight(self, s: float) -> float:
        if s < 0:
            raise DomainError(f"weight needs s >= 0 (got {s})")
        if s >= self.beta * self.s0sq:
            raise RangeError(f"s={s} >= beta*s0^2={self.beta * self.s0sq}; beta is too small")
        return self.inv_L(s / self.beta)


def _check_convexity(profile: ConvexityProfile) -> None:
    s0sq = profile.s0sq
    s = np.unique(np.concatenate([np.linspace(0.0, s0sq, 513), s0sq * np.logspace(-8, 0, 97)]))
    h = np.array([profile.H(si) for si in s])
    slopes = np.diff(h) / np.diff(s)
    dslope = np.diff(slopes)
    scale = np.abs(slopes[:-1]) + np.abs(slopes[1:])
    if np.any(dslope < -64.0 * np.finfo(float).eps * scale):
        worst = int(np.argmin(dslope))
        raise InvalidGrowthError(f"H is not convex near s={s[worst + 1]:.6g} for growth {profile.growth.name}")
    if not np.any(dslope > 0):
        raise InvalidGrowthError(f"H is not strictly convex for growth {profile.growth.name}")

    lam = np.array([profile.Lambda_H(si) for si in s[1:]])
    if np.any(lam > 1.0 + _SLACK) or np.any(~np.isfinite(lam)):
        raise InvalidGrowthError(f"Lambda_H leaves (0, 1] for growth {profile.growth.name}")


def build_profile(growth: GrowthFunction, beta: float = 1.0, tolerances: Optional[Tolerances] = None) -> ConvexityProfile:
    if not beta > 0:
        raise DomainError(f"beta must be positive (got {beta})")
    issues = growth.validate()
    if issues:
        raise InvalidGrowthError(f"growth {growth.name}: " + "; ".join(issues))

    tolerances = tolerances or Tolerances()
    # 1. Provisional profile so the evaluators can run
    profile = ConvexityProfile(
        growth=growth,
        beta=float(beta),
        hp_at_s0sq=1.0,
        lambda_limsup_estimate=1.0,
        mode=EnvelopeMode.GENERAL,
        tolerances=tolerances,
    )
    profile = replace(profile, hp_at_s0sq=profile.H_prime(profile.s0sq))
    if not profile.hp_at_s0sq > 0:
        raise InvalidGrowthError(f"H'(s0^2) must be positive for growth {growth.name}")

    # 2. Convexity on the probe grid (the linear-at-zero regime never uses H)
    if growth.kind == GrowthKind.SUPERLINEAR:
        _check_convexity(profile)

    # 3. limsup of Lambda_H from decade samples
    samples = [profile.Lambda_H(profile.s0sq * 10.0 ** -k) for k in range(1, 9)]
    estimate = max(samples[-4:])

    # 4. Mode
    if growth.kind == GrowthKind.LINEAR:
        mode = EnvelopeMode.EXPONENTIAL
    elif growth.lambda_limit is not None and growth.lambda_limit >= tolerances.simplified_threshold:
        mode = EnvelopeMode.GENERAL
    elif estimate < tolerances.simplified_threshold:
        mode = EnvelopeMode.SIMPLIFIED
    else:
        mode = EnvelopeMode.GENERAL

    profile = replace(profile, lambda_limsup_estimate=float(estimate), mode=mode)
    logger.debug("profile growth=%s H'(s0^2)=%.6g limsup~%.4f mode=%s",
                 growth.name, profile.hp_at_s0sq, estimate, mode.value)
    return profile


def comparison_constant(variant: EnvelopeVariant, T_obs: float, normB: float) -> float:
    """k_T of the comparison lemma matching the envelope variant."""
    variant = EnvelopeVariant(variant)
    if variant == EnvelopeVariant.CONTINUOUS:
        return 8.0 * T_obs ** 2 * normB ** 2 + 2.0
    if variant == EnvelopeVariant.SPACE:
        return 1.0 + T_obs ** 2 + T_obs ** 2 * normB + T_obs ** 2 * normB ** 2
    return max(1.0 + (4.0 * T_obs ** 2 + 1.0) ** 2 * normB ** 2, 2.0)


def decay_rate_constant(variant: EnvelopeVariant, T_obs: float, normB: float, C_T: float) -> float:
    """gamma_2 with every proportionality constant set to 1."""
    variant = EnvelopeVariant(variant)
    if variant == EnvelopeVariant.CONTINUOUS:
        return C_T / (T_obs ** 3 * normB ** 2 + T_obs)
    if variant == EnvelopeVariant.SPACE:
        return C_T / (T_obs * (T_obs ** 2 * normB ** 2 + 1.0))
    return C_T / (T_obs * (1.0 + math.exp(2.0 * T_obs * normB) * max(1.0, T_obs * normB)))


def default_beta(profile: ConvexityProfile, E0: float, T_obs: float, normB: float, C_T: float,
                 variant: EnvelopeVariant = EnvelopeVariant.CONTINUOUS) -> float:
    """Smallest beta meeting both 'beta large enough' requirements of the weight construction."""
    k_T = comparison_constant(variant, T_obs, normB)
    second = 2.0 * k_T * T_obs * normB / C_T
    top = profile.L(profile.hp_at_s0sq * (1.0 - 1e-6))
    # L vanishes below H'(0) in the linear-at-zero regime
    first = E0 / top if top > 0 else 2.0 * E0 / profile.s0sq
    return max(first, second)


@dataclass(frozen=True)
class DecayEnvelope:
    profile: ConvexityProfile
    E0: float
    T_obs: float
    gamma1: float
    gamma2: float
    gamma3: float
    prefactor: float
    mode: EnvelopeMode
    variant: EnvelopeVariant = EnvelopeVariant.CONTINUOUS

    @property
    def scale(self) -> float:
        base = max(self.gamma1, self.E0)
        if self.mode == EnvelopeMode.EXPONENTIAL:
            return base
        return self.T_obs * base

    def onset_time(self) -> float:
        if self.mode == EnvelopeMode.GENERAL:
            return self.profile.psi_min / self.gamma2
        return 0.0

    def shape(self, t: float) -> Optional[float]:
        """Envelope with prefactor 1; None where it is not defined yet."""
        if self.mode == EnvelopeMode.EXPONENTIAL:
            if t < 0:
                return None
            return self.scale * math.exp(-self.gamma2 * t)
        if self.mode == EnvelopeMode.SIMPLIFIED:
            if t <= 0:
                return None
            return self.scale * self.profile.inv_H_prime(self.gamma3 / t)
        tau = self.gamma2 * t
        if tau < self.profile.psi_min:
            return None
        return self.scale * self.profile.L(1.0 / self.profile.inv_psi(tau))

    def eval(self, t: float) -> Optional[float]:
        value = self.shape(t)
        return None if value is None else self.prefactor * value

    def with_prefactor(self, prefactor: float) -> "DecayEnvelope":
        return replace(self, prefactor=float(prefactor))


def make_envelope(profile: ConvexityProfile, E0: float, T_obs: float, C_T: float, normB: float,
                  prefactor: float = 1.0, variant: EnvelopeVariant = EnvelopeVariant.CONTINUOUS) -> DecayEnvelope:
    for label, value in (("E0", E0), ("T_obs", T_obs), ("C_T", C_T), ("normB", normB), ("prefactor", prefactor)):
        if not value > 0:
            raise DomainError(f"make_envelope needs {label} > 0 (got {value})")

    growth = profile.growth
    if growth.kind == GrowthKind.SUPERLINEAR and growth.lambda_limit is not None \
            and growth.lambda_limit >= profile.tolerances.simplified_threshold:
        raise UnsupportedEnvelopeError(
            f"growth {growth.name} has Lambda_H -> 1 at zero; no envelope form is implemented for it"
        )

    variant = EnvelopeVariant(variant)
    gamma2 = decay_rate_constant(variant, T_obs, normB, C_T)
    return DecayEnvelope(
        profile=profile,
        E0=float(E0),
        T_obs=float(T_obs),
        gamma1=normB / gamma2,
        gamma2=gamma2,
        gamma3=1.0,
        prefactor=float(prefactor),
        mode=profile.mode,
        variant=variant,
    )
