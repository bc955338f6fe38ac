"""
synth subcommand - Frame coefficients to a frequency-domain field.
"""
import argparse

from wavepacket_frames.cli.outcome import EXIT_OK, CommandResponse, report_failure
from wavepacket_frames.cli.run_config import RunConfig
from wavepacket_frames.core.service import service
from wavepacket_frames.help import get_help


class SynthResponse(CommandResponse):
    """Response model for the synth command."""


def register(subparsers, parents) -> None:
    parser = subparsers.add_parser(
        "synth",
        parents=parents,
        help="synthesize a field from frame coefficients",
        description=get_help("synth"),
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    parser.add_argument("--coefficients", required=True, help="WPC1 coefficient file")
    parser.set_defaults(handler=handle)


async def handle(args: argparse.Namespace, config: RunConfig) -> int:
    response = SynthResponse(**await service.synthesize(
        config.window_path(),
        config.lattice_values(),
        args.coefficients,
        config.grid_n,
        config.extent,
        config.output_path(),
        window_scale=config.window_scale,
    ))
    if not response.success:
        return report_failure(response)
    print(f"synthesized {response.data['count']} coefficients, norm {response.data['norm']:.6g}, written to {config.out}")
    return EXIT_OK
