"""
reconstruct subcommand - Approximate-dual reconstruction with its error bound.
"""
import argparse

from wavepacket_frames.cli.outcome import EXIT_OK, CommandResponse, report_failure
from wavepacket_frames.cli.run_config import RunConfig
from wavepacket_frames.core.service import service
from wavepacket_frames.help import get_help


class ReconstructResponse(CommandResponse):
    """Response model for the reconstruct command."""


def register(subparsers, parents) -> None:
    parser = subparsers.add_parser(
        "reconstruct",
        parents=parents,
        help="reconstruct a field through the approximate dual",
        description=get_help("reconstruct"),
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    parser.set_defaults(handler=handle)


async def handle(args: argparse.Namespace, config: RunConfig) -> int:
    response = ReconstructResponse(**await service.reconstruct(
        config.window_path(),
        config.lattice_values(),
        config.j_max,
        config.eps,
        input_path=config.input,
        grid_n=config.grid_n,
        extent=config.extent,
        seed=config.seed,
        band=config.band,
        window_scale=config.window_scale,
        out=config.out,
    ))
    if not response.success:
        return report_failure(response)
    report = response.data["report"]
    print(
        f"relative_error = {report['relative_error']:.6e}  bound = {report['bound']:.6e}  "
        f"within_bound = {str(report['within_bound']).lower()}"
    )
    return EXIT_OK
