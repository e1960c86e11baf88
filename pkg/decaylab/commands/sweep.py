import argparse
import logging

import pandas as pd

from decaylab.core.errors import AcceptanceError
from decaylab.schemas.config import RunConfig
from decaylab.services import factory
from decaylab.services.sweep import check_thresholds, pivot, uniformity_sweep
from decaylab.services.writers import RunWriter

logger = logging.getLogger(__name__)

PIVOTS = {
    "sweep_half_time.csv": "half_time",
    "sweep_fit_slope.csv": "fit_slope",
    "sweep_fit_r2.csv": "fit_r2",
    "sweep_envelope_ratio.csv": "envelope_ratio",
}


def register(subparsers, parents) -> argparse.ArgumentParser:
    parser = subparsers.add_parser("sweep", parents=parents, help="mesh-uniformity sweep")
    parser.add_argument("--assert", dest="assert_thresholds", action="store_true",
                        help="exit 4 when a sweep.* threshold fails")
    parser.set_defaults(handler=run)
    return parser


def run(args: argparse.Namespace, config: RunConfig) -> int:
    config = factory.with_seed(config)
    jobs = factory.resolve(getattr(args, "jobs", None), "jobs", default=1)
    result = uniformity_sweep(config, jobs=jobs)

    writer = RunWriter(factory.output_dir(config), config)
    cells = pd.DataFrame([cell.model_dump() for cell in result.cells])
    writer.write_frame("sweep_cells.csv", cells)
    for name, metric in PIVOTS.items():
        writer.write_frame(name, pivot(result, metric))

    lines = []
    for column, ratio in result.uniformity_ratio.items():
        shown = "n/a" if ratio is None else f"{ratio:.6f}"
        note = " (censored at T_final)" if result.censored[column] else ""
        prefactor = result.calibrated_prefactor[column]
        lines.append(f"{column} uniformity_ratio={shown}{note} calibrated_prefactor="
                     f"{'n/a' if prefactor is None else f'{prefactor:.6e}'}")
    writer.write_text("sweep_summary.txt", lines)
    for line in lines:
        print(line)

    if getattr(args, "assert_thresholds", False):
        failures = check_thresholds(result, config.sweep)
        if failures:
            writer.write_text("sweep_failures.txt", failures)
            raise AcceptanceError("; ".join(failures))
        print("all sweep thresholds met")
    return 0
