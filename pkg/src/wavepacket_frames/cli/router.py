"""
Main command router that registers all subcommands.
"""
import argparse
import sys
from typing import List, Optional

from loguru import logger
from pydantic import ValidationError

from wavepacket_frames.cli.commands import analyze, certify, design, reconstruct, starnorm, synth, wavefront
from wavepacket_frames.cli.outcome import EXIT_FAILURE
from wavepacket_frames.cli.run_config import RunConfig, parse_floats
from wavepacket_frames.core.errors import FormatError

COMMANDS = [design, certify, analyze, synth, reconstruct, wavefront, starnorm]


def common_parser() -> argparse.ArgumentParser:
    """Flags shared by every subcommand; unset flags leave config-file values alone."""
    parser = argparse.ArgumentParser(add_help=False)
    parser.add_argument("--config", help="key-value run configuration file")
    parser.add_argument("--window", help="window file")
    parser.add_argument("--lattice", type=parse_floats, help="a,b or p11,p12,p21,p22")
    parser.add_argument("--grid-n", type=int, help="samples per axis (power of two)")
    parser.add_argument("--extent", type=float, help="spatial half-width X of the grid")
    parser.add_argument("--jmax", dest="j_max", type=int, help="finest scale")
    parser.add_argument("--out", help="output path")
    parser.add_argument("--seed", type=int, help="seed of the random test field")
    parser.add_argument("--eps", type=float, help="dual cutoff level")
    parser.add_argument("--gamma-radius", type=float, help="dual-lattice truncation radius")
    parser.add_argument("--band", type=float, help="restrict to |xi|_inf <= band")
    parser.add_argument("--window-scale", type=float, help="frequency dilation applied to the window")
    parser.add_argument("--input", help="input field or design file")
    return parser


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="wavepacket-frames",
        description="Frames of Gaussian parabolic wavepackets: design, certify, transform, probe.",
    )
    subparsers = parser.add_subparsers(dest="command", required=True)
    parents = [common_parser()]
    for command in COMMANDS:
        command.register(subparsers, parents)
    return parser


def _overrides(args: argparse.Namespace) -> dict:
    return {name: getattr(args, name, None) for name in RunConfig.model_fields}


async def dispatch(argv: Optional[List[str]] = None) -> int:
    """Parse ``argv``, merge the run configuration and run the chosen subcommand."""
    args = build_parser().parse_args(argv)
    try:
        config = RunConfig.load(args.config, _overrides(args))
        return await args.handler(args, config)
    except (FileNotFoundError, FormatError, ValidationError, ValueError) as e:
        logger.debug(f"{args.command} rejected its input: {e}")
        print(f"error: {e}", file=sys.stderr)
        return EXIT_FAILURE
