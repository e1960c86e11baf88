import argparse

from decaylab.core.errors import AuditError
from decaylab.schemas.config import RunConfig
from decaylab.schemas.reports import E_NORMALIZATION
from decaylab.services import factory
from decaylab.services.audit import lemma_audit
from decaylab.services.writers import RunWriter


def register(subparsers, parents) -> argparse.ArgumentParser:
    parser = subparsers.add_parser("audit", parents=parents, help="check the four comparison inequalities")
    parser.set_defaults(handler=run)
    return parser


def run(args: argparse.Namespace, config: RunConfig) -> int:
    if config.record.snapshots != "all":
        raise AuditError("record.snapshots: audits need per-step states, set record.snapshots = all")
    config = factory.with_seed(config)
    exp = factory.build_experiment(config)
    report = lemma_audit(exp.system, exp.scheme, exp.u0, config.audit.T_obs)

    lines = [f"T_obs = {report.T_obs:g}", f"dt = {report.dt:.6g}", f"dx = {report.dx:.6g}",
             f"steps = {report.steps}", f"normB = {report.normB:.6g}", f"# {E_NORMALIZATION}"]
    for row in report.rows:
        proof = "n/a" if row.proof_constant is None else f"{row.proof_constant:.6g}"
        lines.append(
            f"{row.name}: lhs={row.lhs:.10e} rhs={row.rhs:.10e} constant={row.constant:.6g} "
            f"proof_constant={proof} slack={row.slack:.6e} holds={row.holds} quadrature=\"{row.quadrature}\""
        )
    RunWriter(factory.output_dir(config), config).write_text("audit.txt", lines)
    for line in lines[6:]:
        print(line)
    return 0 if report.all_hold else 3
