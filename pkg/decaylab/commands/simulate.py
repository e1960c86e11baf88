import argparse
import logging

import numpy as np

from decaylab.core.integrator import MidpointIntegrator
from decaylab.schemas.config import RunConfig
from decaylab.services import factory
from decaylab.services.decay import half_time
from decaylab.services.writers import RunWriter

logger = logging.getLogger(__name__)


def register(subparsers, parents) -> argparse.ArgumentParser:
    parser = subparsers.add_parser("simulate", parents=parents, help="integrate one configured run")
    parser.set_defaults(handler=run)
    return parser


def run(args: argparse.Namespace, config: RunConfig) -> int:
    config = factory.with_seed(config)
    exp = factory.build_experiment(config)
    system, scheme = exp.system, exp.scheme
    traj = MidpointIntegrator(system, scheme).simulate(exp.u0, config.run.T_final, snapshots=config.record.snapshots)

    writer = RunWriter(factory.output_dir(config), config, extra={"dt": scheme.dt, "dx": system.dx, "dim": system.n})
    writer.write_frame("trajectory.csv", traj.to_frame())
    if traj.states is not None:
        writer.write_matrix("snapshots_u.txt", traj.states, traj.snapshot_steps)
        writer.write_matrix("snapshots_u_tilde.txt", traj.stage_states, traj.snapshot_steps)

    E = traj.energies
    ht = half_time(traj, config.sweep.q)
    print(f"final energy      {E[-1]:.10e}  (E0 = {E[0]:.10e}, steps = {traj.steps})")
    if ht.reached:
        print(f"half-time (q={ht.q:g})  {ht.time:.6f}")
    else:
        print(f"half-time (q={ht.q:g})  not reached, final ratio {ht.final_ratio:.6f}")
    print(f"max balance res.  {traj.max_residual:.3e}")
    if system.norm_B == 0.0 and E[0] > 0:
        drift = float(np.max(np.abs(E - E[0])) / E[0])
        print(f"conservation      max |E_k - E_0| / E_0 = {drift:.3e}")
    print(f"output            {writer.out_dir}")

    if not traj.completed:
        print(f"run stopped at step {traj.failed_at}: {traj.failure}")
        return 3
    return 0
