import argparse

from decaylab.schemas.config import RunConfig
from decaylab.schemas.reports import E_NORMALIZATION
from decaylab.services import factory
from decaylab.services.gramian import gramian_by_mesh
from decaylab.services.writers import RunWriter


def register(subparsers, parents) -> argparse.ArgumentParser:
    parser = subparsers.add_parser("gramian", parents=parents, help="observability constant C_T per mesh")
    parser.set_defaults(handler=run)
    return parser


def run(args: argparse.Namespace, config: RunConfig) -> int:
    section = config.gramian
    feedback = factory.build_feedback(config)
    meshes = section.meshes or [config.model.n]

    systems = [factory.build_system(config, feedback, config.model.model_copy(update={"n": n})) for n in meshes]
    schemes = [factory.build_scheme(config, system) for system in systems]

    lines = [f"# {E_NORMALIZATION}"]
    reports = gramian_by_mesh(systems, section.T_obs, section.include_viscosity, schemes)
    for n, report in zip(meshes, reports):
        lines.append(
            f"n={n} dx={report.dx:.6g} T_obs={report.T_obs:g} steps={report.steps} C_T={report.C_T:.10e} "
            f"min_eig_raw={report.min_eig_raw:.3e} asymmetry={report.asymmetry:.3e} method={report.method}"
        )
    RunWriter(factory.output_dir(config), config).write_text("gramian.txt", lines)
    for line in lines[1:]:
        print(line)
    return 0
