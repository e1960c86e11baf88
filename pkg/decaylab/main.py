import argparse
import logging
import sys
from typing import List, Optional

from decaylab.commands import COMMANDS
from decaylab.core.errors import DecayLabError
from decaylab.core.logging_config import setup_logging
from decaylab.services.config_loader import load_config

logger = logging.getLogger(__name__)


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", required=True, help="key = value run configuration")
    common.add_argument("--out", default=None, help="output directory (overrides output.dir)")
    common.add_argument("--jobs", type=int, default=None, help="worker processes for sweeps")
    common.add_argument("--seed", type=int, default=None, help="seed for random initial data")
    common.add_argument("--verbose", action="store_true", help="debug logging")

    parser = argparse.ArgumentParser(
        prog="decaylab",
        description="Simulation and decay analysis for u' + Au + BF(u) = 0.",
    )
    subparsers = parser.add_subparsers(dest="command", required=True)
    for module in COMMANDS.values():
        module.register(subparsers, [common])
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    setup_logging("DEBUG" if args.verbose else None)

    try:
        config = load_config(args.config, overrides={"output.dir": args.out, "seed": args.seed})
        return args.handler(args, config)
    except DecayLabError as exc:
        logger.debug("%s failed", args.command, exc_info=True)
        print(f"decaylab {args.command}: {exc}", file=sys.stderr)
        return exc.exit_code


if __name__ == "__main__":
    sys.exit(main())
