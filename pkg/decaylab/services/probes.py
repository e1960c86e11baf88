"""
Initial data on a system's grid.

smooth    first Dirichlet mode (one period for periodic grids) in the position-like block
highfreq  grid-alternating +-1 packet on a window away from the damping, L2-normalized
random    64-bit LCG values in [-1, 1] on every component, reproducible across languages
"""
import logging
from typing import Optional, Tuple

import numpy as np

from decaylab.core.errors import ConfigError
from decaylab.models.systems import LIFT_VELOCITY, SemiDiscreteSystem

logger = logging.getLogger(__name__)

LCG_A = 6364136223846793005
LCG_C = 1442695040888963407
_MASK = (1 << 64) - 1


class Lcg64:
    """x <- (a x + c) mod 2^64; a draw is the top 53 bits of the new state scaled to [0, 1)."""

    def __init__(self, seed: int):
        self.state = int(seed) & _MASK

    def next_unit(self) -> float:
        self.state = (LCG_A * self.state + LCG_C) & _MASK
        return (self.state >> 11) / float(1 << 53)

    def symmetric(self, n: int) -> np.ndarray:
        return np.array([2.0 * self.next_unit() - 1.0 for _ in range(n)])


def _blocks(system: SemiDiscreteSystem) -> Tuple[slice, slice]:
    """(position-like block, block the highfreq packet goes into)."""
    N = system.n_nodes
    if system.n == 2 * N:
        first, second = slice(0, N), slice(N, 2 * N)
        # wave/beam: packet in the velocity, schrodinger: packet in the real part
        return first, (second if system.lift == LIFT_VELOCITY else first)
    whole = slice(0, system.n)
    return whole, whole


def smooth_profile(system: SemiDiscreteSystem) -> np.ndarray:
    u = np.zeros(system.n)
    position, _ = _blocks(system)
    x = system.nodes[: position.stop - position.start]
    if system.kind == "transport1d":
        u[position] = np.sin(2.0 * np.pi * x / system.length)
    else:
        u[position] = np.sin(np.pi * x / system.length)
    return u


def highfreq_profile(system: SemiDiscreteSystem, window: Tuple[float, float] = (0.6, 0.9)) -> np.ndarray:
    u = np.zeros(system.n)
    _, target = _blocks(system)
    x = system.nodes[: target.stop - target.start]
    lo, hi = window[0] * system.length, window[1] * system.length
    inside = (x > lo) & (x < hi)
    if not inside.any():
        raise ConfigError(f"no grid node inside ({lo:g}, {hi:g})", field="initial.window")
    packet = np.where(inside, (-1.0) ** np.arange(x.shape[0]), 0.0)
    packet /= np.sqrt(system.dx * np.sum(packet ** 2))
    u[target] = packet
    return u


def random_profile(system: SemiDiscreteSystem, seed: int) -> np.ndarray:
    return Lcg64(seed).symmetric(system.n)


def initial_state(system: SemiDiscreteSystem, rule: str = "smooth", seed: int = 0,
                  energy: Optional[float] = None, window: Tuple[float, float] = (0.6, 0.9)) -> np.ndarray:
    if rule == "smooth":
        u = smooth_profile(system)
    elif rule == "highfreq":
        u = highfreq_profile(system, window)
    elif rule == "random":
        u = random_profile(system, seed)
    else:
        raise ConfigError(f"unknown initial rule '{rule}'", field="initial.rule")

    if energy is not None:
        current = system.energy(u)
        if current <= 0:
            raise ConfigError("cannot rescale a zero-energy probe", field="initial.energy")
        u *= np.sqrt(energy / current)
    logger.debug("initial %s on %s n=%d E0=%.6e", rule, system.kind, system.n, system.energy(u))
    return u
