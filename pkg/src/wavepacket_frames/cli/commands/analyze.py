"""
analyze subcommand - Field to frame coefficients.
"""
import argparse

from wavepacket_frames.cli.outcome import EXIT_OK, CommandResponse, report_failure
from wavepacket_frames.cli.run_config import RunConfig
from wavepacket_frames.core.service import service
from wavepacket_frames.help import get_help


class AnalyzeResponse(CommandResponse):
    """Response model for the analyze command."""


def register(subparsers, parents) -> None:
    parser = subparsers.add_parser(
        "analyze",
        parents=parents,
        help="analyze a field into frame coefficients",
        description=get_help("analyze"),
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    parser.add_argument("--method", choices=["auto", "fast", "direct"], default="auto")
    parser.set_defaults(handler=handle)


async def handle(args: argparse.Namespace, config: RunConfig) -> int:
    response = AnalyzeResponse(**await service.analyze(
        config.window_path(),
        config.lattice_values(),
        config.j_max,
        config.output_path(),
        input_path=config.input,
        grid_n=config.grid_n,
        extent=config.extent,
        seed=config.seed,
        band=config.band,
        window_scale=config.window_scale,
        method=args.method,
    ))
    if not response.success:
        return report_failure(response)
    print(f"{response.data['count']} coefficients, energy {response.data['energy']:.6g}, written to {config.out}")
    return EXIT_OK
