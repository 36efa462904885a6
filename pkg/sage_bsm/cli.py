import argparse
import json
import logging
from typing import Any, Callable, Dict, List, Optional

from sage_bsm.exceptions import ConfigurationError, StageError
from sage_bsm.services.client import BsmClient

logger = logging.getLogger(__name__)

COMMANDS: Dict[str, Callable[[BsmClient, bool], Any]] = {
    "simulate": lambda client, force: client.simulations.run(force),
    "design": lambda client, force: client.designs.run(force),
    "render": lambda client, force: client.renders.run(force),
    "evaluate": lambda client, force: client.evaluations.run(force),
}


def _u64(text: str) -> int:
    value = int(text)
    if not 0 <= value < 2**64:
        raise argparse.ArgumentTypeError(
            f"seed must fit in 64 unsigned bits, got {text}"
        )
    return value


def build_parser() -> argparse.ArgumentParser:
    """
    Builds the ``sage-bsm`` argument parser.

    Example:
        build_parser().parse_args(["pipeline", "--profile", "desk", "--seed", "3"])
    """
    parser = argparse.ArgumentParser(
        prog="sage-bsm",
        description="Binaural signal matching: simulate, design, render and evaluate.",
    )
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="TOML file overriding the profile")
    common.add_argument(
        "--out", help="output directory (overrides [output] directory)"
    )
    common.add_argument(
        "--seed", type=_u64, help="random seed (overrides [scene] seed)"
    )
    common.add_argument("--profile", choices=("desk", "paper"), default="desk")
    common.add_argument(
        "--dry-run",
        action="store_true",
        help="validate the configuration without writing",
    )
    common.add_argument(
        "--force", action="store_true", help="recompute even when artifacts are current"
    )
    common.add_argument(
        "-v", "--verbose", action="count", default=0, help="-v for info, -vv for debug"
    )
    commands = parser.add_subparsers(dest="command", required=True)
    for name in (*COMMANDS, "pipeline"):
        commands.add_parser(name, parents=[common])
    return parser


def _configure_logging(verbosity: int) -> None:
    level = logging.WARNING
    if verbosity == 1:
        level = logging.INFO
    elif verbosity > 1:
        level = logging.DEBUG
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")


def run(args: argparse.Namespace) -> Any:
    client = BsmClient.from_file(args.config, args.profile, args.out, args.seed)
    if args.dry_run:
        logger.info("Configuration is valid, scene digest %s", client.digest)
        return {
            "digest": client.digest,
            "output_directory": client.config.output_directory,
        }
    if args.command == "pipeline":
        return client.run_pipeline(args.force)
    return COMMANDS[args.command](client, args.force)


def main(argv: Optional[List[str]] = None) -> int:
    """
    Entry point of the ``sage-bsm`` command.

    Returns:
        int: 0 on success, 1 when a stage fails, 2 for an invalid configuration.
    """
    args = build_parser().parse_args(argv)
    _configure_logging(args.verbose)
    try:
        result = run(args)
    except StageError as error:
        logger.error("%s", error)
        return 1
    except ConfigurationError as error:
        logger.error("[config] %s", error)
        return 2
    if args.dry_run or args.command in ("evaluate", "pipeline"):
        print(json.dumps(_summary(result), sort_keys=True))
    return 0


def _summary(result: Any) -> Dict[str, Any]:
    if not isinstance(result, dict):
        return {}
    return {
        key: value
        for key, value in result.items()
        if isinstance(value, (bool, str))
    }
