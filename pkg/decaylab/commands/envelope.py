import argparse
import logging

import numpy as np
import pandas as pd

from decaylab.core.convexity import EnvelopeVariant, default_beta, make_envelope
from decaylab.core.errors import DecayLabError, DomainError
from decaylab.core.integrator import MidpointIntegrator
from decaylab.schemas.config import RunConfig
from decaylab.services import factory
from decaylab.services.decay import envelope_check, iteration_bound, window_energies
from decaylab.services.gramian import gramian_constant
from decaylab.services.writers import RunWriter

logger = logging.getLogger(__name__)


def register(subparsers, parents) -> argparse.ArgumentParser:
    parser = subparsers.add_parser("envelope", parents=parents, help="compare a run with its decay envelope")
    parser.set_defaults(handler=run)
    return parser


def run(args: argparse.Namespace, config: RunConfig) -> int:
    config = factory.with_seed(config)
    section = config.envelope
    exp = factory.build_experiment(config)
    system, scheme = exp.system, exp.scheme
    if system.norm_B == 0.0:
        raise DomainError("envelope needs a damped model (|B| > 0)")

    T_obs = section.T_obs or config.gramian.T_obs
    C_T = section.C_T
    if C_T is None:
        C_T = gramian_constant(system, T_obs, config.gramian.include_viscosity, scheme).C_T
        logger.info("envelope C_T from the Gramian: %.6g", C_T)

    traj = MidpointIntegrator(system, scheme).simulate(exp.u0, config.run.T_final)
    E0 = float(traj.energies[0])
    variant = EnvelopeVariant(section.variant)

    profile = factory.build_convexity(config, exp.feedback)
    beta = section.beta or default_beta(profile, E0, T_obs, system.norm_B, C_T, variant)
    profile = profile.with_beta(beta)
    env = make_envelope(profile, E0, T_obs, C_T, system.norm_B, variant=variant)
    check = envelope_check(traj, env, onset=section.onset or 0.0, samples=section.samples,
                           prefactor=section.prefactor)
    env = env.with_prefactor(check.prefactor_used)

    writer = RunWriter(factory.output_dir(config), config,
                       extra={"dt": scheme.dt, "dx": system.dx, "C_T": C_T, "beta": beta})
    idx = np.unique(np.linspace(0, traj.times.size - 1, min(section.samples, traj.times.size)).round().astype(int))
    writer.write_frame("envelope.csv", pd.DataFrame({
        "t": traj.times[idx],
        "energy": traj.energies[idx],
        "envelope": [env.eval(float(t)) for t in traj.times[idx]],
    }))

    lines = [
        f"mode = {env.mode.value}",
        f"variant = {env.variant.value}",
        f"C_T = {C_T:.10e}",
        f"T_obs = {T_obs:g}",
        f"beta = {beta:.10e}",
        f"gamma1 = {env.gamma1:.10e}",
        f"gamma2 = {env.gamma2:.10e}",
        f"gamma3 = {env.gamma3:.10e}",
        f"onset = {check.onset:.6g}",
        f"onset_adjusted = {check.onset_adjusted}",
        f"calibrated_prefactor = {check.calibrated_prefactor:.10e}",
        f"prefactor_used = {check.prefactor_used:.10e}",
        f"max_ratio = {check.max_ratio:.10e}",
    ]
    try:
        report = iteration_bound(profile, window_energies(traj, T_obs))
    except DecayLabError as exc:
        logger.warning("no iteration display: %s", exc.detail)
    else:
        writer.write_frame("iteration.csv", pd.DataFrame([row.model_dump() for row in report.rows]))
        lines.append(f"rho_T = {report.rho_T:.10e}")
    writer.write_text("envelope.txt", lines)
    for line in lines:
        print(line)

    if not traj.completed:
        print(f"run stopped at step {traj.failed_at}: {traj.failure}")
        return 3
    return 0
