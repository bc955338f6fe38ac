"""
design subcommand - Solve the vanishing-moment system and write a window file.
"""
import argparse

from wavepacket_frames.cli.outcome import EXIT_OK, CommandResponse, report_failure
from wavepacket_frames.cli.run_config import RunConfig
from wavepacket_frames.core.service import service
from wavepacket_frames.help import get_help


class DesignResponse(CommandResponse):
    """Response model for the design command."""


def register(subparsers, parents) -> None:
    parser = subparsers.add_parser(
        "design",
        parents=parents,
        help="solve a window design",
        description=get_help("design"),
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    parser.add_argument("--spec", help="design file (main term, correctors, moment order)")
    parser.set_defaults(handler=handle)


async def handle(args: argparse.Namespace, config: RunConfig) -> int:
    spec = args.spec or config.input
    if not spec:
        raise ValueError("no design file given (use --spec PATH)")
    response = DesignResponse(**await service.design(spec, config.out))
    if not response.success:
        return report_failure(response)

    amplitudes = ", ".join(f"{a:.6g}" for a in response.data["amplitudes"])
    print(f"amplitudes: {amplitudes}")
    for n, moment in enumerate(response.data["residual_moments"]):
        print(f"moment {n}: {moment:.3e}")
    if config.out:
        print(f"window written to {config.out}")
    return EXIT_OK
