import logging
from typing import Optional, Sequence, Tuple

import numpy as np
from scipy.integrate import cumulative_trapezoid
from scipy.stats import linregress

from decaylab.core.convexity import ConvexityProfile, DecayEnvelope
from decaylab.core.errors import DomainError, InsufficientDataError, RangeError
from decaylab.core.integrator import TrajectoryRecord
from decaylab.schemas.reports import EnvelopeCheck, FitResult, HalfTimeResult, IterationReport, IterationRow

logger = logging.getLogger(__name__)

MIN_FIT_POINTS = 10
ITERATION_GRID = 160


def half_time(traj: TrajectoryRecord, q: float = 0.5) -> HalfTimeResult:
    """First time with E(t) <= q E(0), linear between steps."""
    if not 0.0 < q < 1.0:
        raise DomainError(f"q must lie in (0, 1) (got {q})")
    E = traj.energies
    E0 = float(E[0])
    if E0 <= 0.0:
        return HalfTimeResult(reached=True, time=0.0, q=q, final_ratio=0.0)

    target = q * E0
    below = np.flatnonzero(E <= target)
    final_ratio = float(E[-1] / E0)
    if below.size == 0:
        return HalfTimeResult(reached=False, time=None, q=q, final_ratio=final_ratio)

    k = int(below[0])
    t0, t1 = traj.times[k - 1], traj.times[k]
    e0, e1 = E[k - 1], E[k]
    t = t0 + (e0 - target) / (e0 - e1) * (t1 - t0) if e0 != e1 else t1
    return HalfTimeResult(reached=True, time=float(t), q=q, final_ratio=final_ratio)


def tail_window(traj: TrajectoryRecord, model: str = "exponential") -> Tuple[float, float]:
    """Second half of the horizon for rates, final decade for exponents."""
    T = float(traj.times[-1])
    return (0.5 * T, T) if model == "exponential" else (0.1 * T, T)


def fit_decay(traj: TrajectoryRecord, window: Optional[Sequence[float]] = None,
              model: str = "exponential") -> FitResult:
    if model not in ("exponential", "algebraic"):
        raise DomainError(f"unknown fit model '{model}'")
    a, b = window if window is not None else tail_window(traj, model)
    t, E = traj.times, traj.energies
    mask = (t >= a) & (t <= b) & (E > 0)
    if model == "algebraic":
        mask &= t > 0
    if mask.sum() < MIN_FIT_POINTS:
        raise InsufficientDataError(
            f"{int(mask.sum())} usable points in [{a:g}, {b:g}]; fit_decay needs {MIN_FIT_POINTS}"
        )
    x = t[mask] if model == "exponential" else np.log(t[mask])
    fit = linregress(x, np.log(E[mask]))
    return FitResult(
        model=model,
        slope=float(fit.slope),
        intercept=float(fit.intercept),
        r_squared=float(fit.rvalue ** 2),
        n_points=int(mask.sum()),
        window=[float(a), float(b)],
    )


def envelope_check(traj: TrajectoryRecord, env: DecayEnvelope, onset: float = 0.0, samples: int = 200,
                   prefactor: Optional[float] = None) -> EnvelopeCheck:
    """Calibrate E(t) <= c * env_1(t) on [onset, horizon]; measure it against `prefactor` if given."""
    start = max(float(onset), env.onset_time())
    adjusted = start > onset

    idx = np.flatnonzero(traj.times >= start)
    if idx.size > samples:
        idx = idx[np.unique(np.linspace(0, idx.size - 1, samples).round().astype(int))]

    ratios = []
    for k in idx:
        shape = env.shape(float(traj.times[k]))
        if shape is None or shape <= 0.0:
            adjusted = True
            continue
        ratios.append(traj.energies[k] / shape)
    if not ratios:
        raise InsufficientDataError(f"envelope is undefined on [{start:g}, {traj.times[-1]:g}]")

    worst = float(max(ratios))
    used = worst if prefactor is None else float(prefactor)
    max_ratio = worst / used if used > 0 else float("inf")
    if adjusted:
        logger.info("envelope onset moved from %.4g to %.4g", onset, start)
    return EnvelopeCheck(
        calibrated_prefactor=worst,
        max_ratio=max_ratio,
        prefactor_used=used,
        onset=start,
        onset_adjusted=adjusted,
        samples=len(ratios),
    )


def window_energies(traj: TrajectoryRecord, T_obs: float) -> np.ndarray:
    """E(k T_obs) for every whole window inside the horizon."""
    count = int(np.floor(traj.times[-1] / T_obs + 1e-9)) + 1
    idx = np.searchsorted(traj.times, T_obs * np.arange(count) - 1e-9 * traj.dt)
    return traj.energies[np.minimum(idx, traj.energies.size - 1)]


def iteration_bound(profile: ConvexityProfile, energies: Sequence[float], beta: Optional[float] = None) -> IterationReport:
    """
    Discrete display of x_{k+1} <= x_k - rho_T M(x_k), M(x) = x L^{-1}(x), x_k = E(kT) / beta.

    rho_T is fixed by the first window. Each row compares the measured M(x_p) with
    (1/rho_T) min_l K_r^{-1}(rho_T (p - l)) / (l + 1), where K_r(tau) = int_tau^r dy / M(y).
    """
    beta = profile.beta if beta is None else float(beta)
    E = np.asarray(energies, dtype=float)
    if E.size < 2:
        raise InsufficientDataError("iteration_bound needs at least two window energies")
    x = E / beta
    r = float(x[0])
    if r >= profile.s0sq:
        raise RangeError(f"E(0)/beta = {r:.4g} >= s0^2 = {profile.s0sq:.4g}; increase beta")
    if r <= 0.0:
        raise DomainError("iteration_bound needs E(0) > 0")

    def M(y: float) -> float:
        return y * profile.inv_L(y) if y > 0 else 0.0

    grid = r * np.logspace(-12, 0, ITERATION_GRID)
    m_grid = np.array([M(y) for y in grid])
    # K_r on the grid, decreasing from K_r(grid[0]) to K_r(r) = 0
    running = cumulative_trapezoid(1.0 / m_grid, grid, initial=0.0)
    K = running[-1] - running

    def K_inv(tau: float) -> float:
        return float(np.interp(tau, K[::-1], grid[::-1]))

    def M_inv(value: float) -> float:
        return float(np.interp(value, m_grid, grid))

    rho = (x[0] - x[1]) / m_grid[-1]
    rho_T = float(np.clip(rho, 1e-12, 1.0))

    rows = []
    for p, (energy, xp) in enumerate(zip(E, x)):
        bound = min(K_inv(rho_T * (p - l)) / (l + 1) for l in range(p + 1)) / rho_T
        rows.append(IterationRow(
            window=p,
            energy=float(energy),
            measured_M=M(float(xp)) if 0 < xp < profile.s0sq else 0.0,
            bound_M=float(bound),
            energy_bound=beta * M_inv(bound) if bound < m_grid[-1] else beta * r,
        ))
    logger.debug("iteration display beta=%.4g rho_T=%.4g windows=%d", beta, rho_T, len(rows))
    return IterationReport(beta=beta, rho_T=rho_T, r=r, rows=rows)
