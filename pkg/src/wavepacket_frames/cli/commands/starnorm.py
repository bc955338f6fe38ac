"""
starnorm subcommand - Star-norm estimate of the window.
"""
import argparse

from wavepacket_frames.cli.outcome import EXIT_OK, CommandResponse, report_failure
from wavepacket_frames.cli.run_config import RunConfig
from wavepacket_frames.config import settings
from wavepacket_frames.core.service import service
from wavepacket_frames.help import get_help


class StarNormResponse(CommandResponse):
    """Response model for the starnorm command."""


def register(subparsers, parents) -> None:
    parser = subparsers.add_parser(
        "starnorm",
        parents=parents,
        help="estimate the star norm of the window",
        description=get_help("starnorm"),
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    parser.add_argument("--box", type=float, default=settings.symbol_extent, help="half-width of the frequency box")
    parser.add_argument("--covering", action="store_true", help="also report A and B on the symbol grid")
    parser.set_defaults(handler=handle)


async def handle(args: argparse.Namespace, config: RunConfig) -> int:
    response = StarNormResponse(**await service.star_norm(
        config.window_path(),
        args.box,
        config.grid_n,
        config.j_max,
        window_scale=config.window_scale,
        covering=args.covering,
    ))
    if not response.success:
        return report_failure(response)
    decay = response.data["decay"]
    print(f"star_norm = {response.data['star_norm']:.6g}  tail = {response.data['tail_bound']}")
    print(f"delta = {decay['delta']:.4g}  varsigma = {decay['varsigma']:.4g}  requirement_met = {str(decay['varsigma_requirement_met']).lower()}")
    covering = response.data["covering"]
    if covering:
        print(f"A = {covering['A']:.6g}  B = {covering['B']:.6g}  on {covering['grid_n']}^2 over +-{covering['grid_extent']:.6g}")
    return EXIT_OK
