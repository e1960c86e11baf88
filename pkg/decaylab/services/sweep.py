"""
Mesh-uniformity sweeps.

Cells are (viscosity flag, dt factor, mesh) triples run independently, in
worker processes when jobs > 1. Per column the half-time ratio across meshes is
the uniformity measure, and the envelope prefactor calibrated on the coarsest
mesh is reused for the finer ones.
"""
import logging
from concurrent.futures import ProcessPoolExecutor
from typing import Dict, List, Optional, Tuple

import numpy as np
import pandas as pd
from pydantic import BaseModel

from decaylab.core.convexity import EnvelopeVariant, make_envelope
from decaylab.core.errors import DecayLabError, InsufficientDataError
from decaylab.core.integrator import MidpointIntegrator
from decaylab.schemas.config import RunConfig, SweepSection
from decaylab.schemas.reports import CellResult, SweepResult
from decaylab.services import factory
from decaylab.services.decay import envelope_check, fit_decay, half_time
from decaylab.services.gramian import gramian_constant
from decaylab.services.writers import config_hash

logger = logging.getLogger(__name__)

MIN_MESHES = 3
# default algebraic band when sweep.exponent_band is unset: [1.4, 0.7] times the predicted exponent
PREDICTED_BAND = (1.4, 0.7)


class SweepCell(BaseModel):
    config: RunConfig
    column: str
    viscosity: bool
    dt_factor: float
    C_T: Optional[float] = None
    T_obs: float


def column_key(viscosity: bool, dt_factor: float) -> str:
    return f"visc={'on' if viscosity else 'off'},dt={dt_factor:g}dx"


def cell_config(config: RunConfig, n: int, viscosity: bool, dt_factor: float) -> RunConfig:
    """Effective run config of one cell."""
    model = config.model
    scheme = config.scheme
    if viscosity:
        space = model.viscosity if model.viscosity != "none" else "laplacian_block"
        time = scheme.time_viscosity if scheme.time_viscosity != "none" else "squared"
    else:
        space, time = "none", "none"
    return config.model_copy(update={
        "model": model.model_copy(update={"n": n, "viscosity": space}),
        "scheme": scheme.model_copy(update={"dt": None, "dt_factor": dt_factor, "time_viscosity": time}),
    })


def run_cell(cell: SweepCell) -> CellResult:
    """One sweep cell; failures are reported on the cell, never raised."""
    config = cell.config
    sweep = config.sweep
    base = dict(
        n=config.model.n,
        dx=0.0,
        dt=0.0,
        viscosity=cell.viscosity,
        column=cell.column,
        manifest_hash=config_hash(config),
    )
    try:
        experiment = factory.build_experiment(config)
        system, scheme = experiment.system, experiment.scheme
        base.update(dx=system.dx, dt=scheme.dt, predicted_exponent=experiment.feedback.growth.predicted_exponent)
        traj = MidpointIntegrator(system, scheme).simulate(experiment.u0, config.run.T_final)
        if not traj.completed:
            return CellResult(**base, error=traj.failure)

        ht = half_time(traj, sweep.q)
        result = dict(
            half_time=ht.time if ht.reached else None,
            half_time_reached=ht.reached,
            final_ratio=ht.final_ratio,
            max_residual=traj.max_residual,
        )
        try:
            fit = fit_decay(traj, sweep.fit_window, sweep.fit_model)
            result.update(fit_slope=fit.slope, fit_r2=fit.r_squared)
        except InsufficientDataError as exc:
            logger.info("cell %s n=%d: no fit (%s)", cell.column, config.model.n, exc.detail)

        if cell.C_T is not None and system.norm_B > 0:
            try:
                profile = factory.build_convexity(config, experiment.feedback)
                env = make_envelope(profile, float(traj.energies[0]), cell.T_obs, cell.C_T, system.norm_B,
                                    variant=EnvelopeVariant(config.envelope.variant))
                onset = sweep.onset if sweep.onset is not None else (config.envelope.onset or 0.0)
                check = envelope_check(traj, env, onset=onset, samples=config.envelope.samples)
                result["envelope_raw"] = check.calibrated_prefactor
            except DecayLabError as exc:
                logger.info("cell %s n=%d: no envelope (%s)", cell.column, config.model.n, exc.detail)
        return CellResult(**base, **result)
    except DecayLabError as exc:
        logger.warning("cell %s n=%d failed: %s", cell.column, config.model.n, exc.detail)
        return CellResult(**base, error=exc.detail)


def _calibration_constant(config: RunConfig, meshes: List[int]) -> Tuple[Optional[float], float]:
    """C_T and T_obs for the envelopes: from the config, else a Gramian on the coarsest mesh."""
    T_obs = config.envelope.T_obs or config.gramian.T_obs
    if config.envelope.C_T is not None:
        return config.envelope.C_T, T_obs
    coarse = cell_config(config, min(meshes), True, config.sweep.dt_factors[0])
    try:
        experiment = factory.build_experiment(coarse)
        report = gramian_constant(experiment.system, T_obs, config.gramian.include_viscosity, experiment.scheme)
    except DecayLabError as exc:
        logger.warning("no C_T for the sweep envelopes: %s", exc.detail)
        return None, T_obs
    return (report.C_T if report.C_T > 0 else None), T_obs


def build_cells(config: RunConfig) -> List[SweepCell]:
    sweep = config.sweep
    meshes = sorted(set(sweep.meshes))
    if len(meshes) < MIN_MESHES:
        raise InsufficientDataError(f"a sweep needs at least {MIN_MESHES} distinct meshes (got {meshes})")
    config = factory.with_seed(config)
    C_T, T_obs = _calibration_constant(config, meshes)
    cells = []
    for viscosity in sweep.viscosity:
        for dt_factor in sweep.dt_factors:
            column = column_key(viscosity, dt_factor)
            for n in meshes:
                cells.append(SweepCell(
                    config=cell_config(config, n, viscosity, dt_factor),
                    column=column,
                    viscosity=viscosity,
                    dt_factor=dt_factor,
                    C_T=C_T,
                    T_obs=T_obs,
                ))
    return cells


def _aggregate(cells: List[CellResult], T_final: float) -> SweepResult:
    ordered = sorted(cells, key=lambda c: (c.column, c.n))
    uniformity: Dict[str, Optional[float]] = {}
    prefactor: Dict[str, Optional[float]] = {}
    censored: Dict[str, bool] = {}

    for column in sorted({c.column for c in ordered}):
        group = [c for c in ordered if c.column == column]
        # not reached counts as T_final, so a ratio built on it is a lower bound
        censored[column] = any(c.error is None and not c.half_time_reached for c in group)
        if any(c.error is not None for c in group):
            uniformity[column] = None
        else:
            times = [c.half_time if c.half_time_reached else T_final for c in group]
            uniformity[column] = max(times) / min(times) if min(times) > 0 else None

        calibration = group[0].envelope_raw
        prefactor[column] = calibration
        for cell in group:
            if calibration and cell.envelope_raw is not None:
                cell.envelope_ratio = cell.envelope_raw / calibration

    return SweepResult(cells=ordered, uniformity_ratio=uniformity, calibrated_prefactor=prefactor, censored=censored)


def uniformity_sweep(config: RunConfig, jobs: int = 1) -> SweepResult:
    cells = build_cells(config)
    logger.info("sweep: %d cells, jobs=%d", len(cells), jobs)
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(run_cell, cells))
    else:
        results = [run_cell(cell) for cell in cells]
    result = _aggregate(results, config.run.T_final)
    for column, ratio in result.uniformity_ratio.items():
        logger.info("sweep %s uniformity=%s", column, "n/a" if ratio is None else f"{ratio:.4f}")
    return result


# Acceptance thresholds

def _rate_spread(slopes: List[float]) -> float:
    mean = abs(float(np.mean(slopes)))
    return (max(slopes) - min(slopes)) / mean if mean > 0 else float("inf")


def exponent_band(section: SweepSection, cell: CellResult) -> Optional[Tuple[float, float]]:
    """The configured band, else one around the growth law's algebraic exponent for algebraic fits."""
    if section.exponent_band is not None:
        return section.exponent_band
    if section.fit_model != "algebraic" or cell.predicted_exponent is None:
        return None
    wide, narrow = PREDICTED_BAND
    return wide * cell.predicted_exponent, narrow * cell.predicted_exponent


def check_thresholds(result: SweepResult, section: SweepSection) -> List[str]:
    failures = []
    for column, ratio in result.uniformity_ratio.items():
        if ratio is None:
            if section.max_uniformity is not None or section.min_uniformity is not None:
                failures.append(f"{column}: uniformity ratio unavailable")
            continue
        if section.max_uniformity is not None and ratio > section.max_uniformity:
            failures.append(f"{column}: uniformity {ratio:.4f} > {section.max_uniformity}")
        if section.min_uniformity is not None and ratio < section.min_uniformity:
            failures.append(f"{column}: uniformity {ratio:.4f} < {section.min_uniformity}")

    for cell in result.cells:
        tag = f"{cell.column} n={cell.n}"
        if cell.error is not None:
            failures.append(f"{tag}: {cell.error}")
            continue
        if section.min_r2 is not None and (cell.fit_r2 is None or cell.fit_r2 < section.min_r2):
            failures.append(f"{tag}: fit r2 {cell.fit_r2} < {section.min_r2}")
        band = exponent_band(section, cell)
        if band is not None:
            lo, hi = band
            if cell.fit_slope is None or not lo <= cell.fit_slope <= hi:
                failures.append(f"{tag}: fitted slope {cell.fit_slope} outside [{lo}, {hi}]")
        if section.max_envelope_ratio is not None and (
                cell.envelope_ratio is None or cell.envelope_ratio > section.max_envelope_ratio):
            failures.append(f"{tag}: envelope ratio {cell.envelope_ratio} > {section.max_envelope_ratio}")

    if section.max_rate_spread is not None:
        for column in result.uniformity_ratio:
            slopes = [c.fit_slope for c in result.cells if c.column == column and c.fit_slope is not None]
            if len(slopes) < 2:
                failures.append(f"{column}: not enough fits for a rate spread")
            elif _rate_spread(slopes) > section.max_rate_spread:
                failures.append(f"{column}: rate spread {_rate_spread(slopes):.4f} > {section.max_rate_spread}")
    return failures


def pivot(result: SweepResult, metric: str) -> pd.DataFrame:
    """Rows = meshes, columns = sweep columns."""
    frame = pd.DataFrame([c.model_dump() for c in result.cells])
    table = frame.pivot(index="n", columns="column", values=metric)
    table.columns.name = None
    return table.reset_index()
