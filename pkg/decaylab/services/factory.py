"""
Turns a validated RunConfig into the objects a command needs.

Values resolve in three tiers: the run config (and CLI flags folded into it),
then process settings (DECAYLAB_*), then the built-in default.
"""
import logging
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Any, Optional

import numpy as np

from decaylab.core.convexity import ConvexityProfile, build_profile
from decaylab.core.errors import ConfigError
from decaylab.core.feedback import FeedbackMap, catalog_feedback
from decaylab.core.integrator import StageSolver, TimeScheme
from decaylab.core.settings import Settings, get_settings
from decaylab.models.builder import build_model
from decaylab.models.systems import SemiDiscreteSystem
from decaylab.schemas.config import ModelSection, RunConfig
from decaylab.services.probes import initial_state

logger = logging.getLogger(__name__)


def resolve(config_value: Any, setting: str, settings: Optional[Settings] = None, default: Any = None) -> Any:
    """
    Resolution cascade:
    1. Run config / CLI flag
    2. DECAYLAB_* settings
    3. Built-in default
    """
    if config_value is not None:
        return config_value
    settings = settings or get_settings()
    value = getattr(settings, setting, None)
    return value if value is not None else default


def build_feedback(config: RunConfig) -> FeedbackMap:
    section = config.feedback
    params = section.model_dump(exclude={"name", "chi"})
    params["domain_length"] = config.model.length
    if section.chi != "uniform":
        path = Path(section.chi)
        if not path.is_file():
            raise ConfigError(f"kernel file {path} not found (use 'uniform' or a path)", field="feedback.chi")
        params["chi"] = np.loadtxt(path, ndmin=1)
    return catalog_feedback(section.name, params)


def build_convexity(config: RunConfig, feedback: FeedbackMap, beta: float = 1.0) -> ConvexityProfile:
    growth = feedback.growth
    if config.growth.s0 is not None:
        growth = replace(growth, s0=config.growth.s0)
    return build_profile(growth, beta=beta)


def build_system(config: RunConfig, feedback: FeedbackMap, model: Optional[ModelSection] = None) -> SemiDiscreteSystem:
    return build_model(model or config.model, feedback)


def build_scheme(config: RunConfig, system: SemiDiscreteSystem, dt_factor: Optional[float] = None,
                 time_viscosity: Optional[str] = None) -> TimeScheme:
    section = config.scheme
    if section.dt is not None and dt_factor is None:
        dt = section.dt
    else:
        dt = (dt_factor or section.dt_factor) * system.dx
    return TimeScheme(
        dt=dt,
        time_viscosity=time_viscosity or section.time_viscosity,
        space_viscosity_in_stage=section.space_viscosity_in_stage,
        solver=StageSolver(**section.solver.model_dump()),
    )


def build_initial(config: RunConfig, system: SemiDiscreteSystem) -> np.ndarray:
    section = config.initial
    seed = resolve(config.seed, "seed")
    return initial_state(system, section.rule, seed=seed, energy=section.energy, window=section.window)


@dataclass
class Experiment:
    config: RunConfig
    feedback: FeedbackMap
    system: SemiDiscreteSystem
    scheme: TimeScheme
    u0: np.ndarray


def build_experiment(config: RunConfig) -> Experiment:
    feedback = build_feedback(config)
    system = build_system(config, feedback)
    scheme = build_scheme(config, system)
    u0 = build_initial(config, system)
    logger.info("experiment %s n=%d dt=%.5g feedback=%s time_viscosity=%s",
                system.kind, system.n, scheme.dt, feedback.name, scheme.time_viscosity)
    return Experiment(config=config, feedback=feedback, system=system, scheme=scheme, u0=u0)


def output_dir(config: RunConfig) -> Path:
    return Path(resolve(config.output.dir, "output_dir", default="out"))


def with_seed(config: RunConfig) -> RunConfig:
    """Pin the effective seed so manifests and cells agree on it."""
    return config.model_copy(update={"seed": resolve(config.seed, "seed")})
