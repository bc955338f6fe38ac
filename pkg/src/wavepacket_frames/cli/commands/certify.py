"""
certify subcommand - Frame certificate for one lattice, or a defect sweep.
"""
import argparse

from wavepacket_frames.cli.outcome import EXIT_INVALID_CERTIFICATE, EXIT_OK, CommandResponse, report_failure
from wavepacket_frames.cli.run_config import RunConfig, parse_floats
from wavepacket_frames.core.service import service
from wavepacket_frames.help import get_help


class CertifyResponse(CommandResponse):
    """Response model for the certify command."""


def register(subparsers, parents) -> None:
    parser = subparsers.add_parser(
        "certify",
        parents=parents,
        help="certify frame bounds for a lattice",
        description=get_help("certify"),
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    parser.add_argument("--sweep", type=parse_floats, help="comma-separated square lattice spacings")
    parser.add_argument("--refined", action="store_true", help="use the square-root form of the defect")
    parser.add_argument("--refine", type=int, default=0, help="recompute A and B on this many grid doublings")
    parser.set_defaults(handler=handle)


async def handle(args: argparse.Namespace, config: RunConfig) -> int:
    if args.sweep:
        response = CertifyResponse(**await service.sweep(
            config.window_path(),
            args.sweep,
            config.grid_n,
            config.extent,
            config.j_max,
            config.gamma_radius,
            config.window_scale,
            config.out,
        ))
        if not response.success:
            return report_failure(response)
        print(response.data["table"], end="")
        return EXIT_OK

    response = CertifyResponse(**await service.certify(
        config.window_path(),
        config.lattice_values(),
        config.grid_n,
        config.extent,
        config.j_max,
        config.gamma_radius,
        config.band,
        args.refined,
        config.window_scale,
        config.out,
        args.refine,
    ))
    if not response.success:
        return report_failure(response)

    cert = response.data["certificate"]
    print(f"A = {cert['A']:.6g}  B = {cert['B']:.6g}  delta = {cert['delta']:.6g}")
    print(f"lower = {cert['lower']:.6g}  upper = {cert['upper']:.6g}  valid = {str(cert['valid']).lower()}")
    for level in response.data["refinement"]:
        print(f"  n = {level['n']}  A = {level['A']:.8g}  B = {level['B']:.8g}")
    return EXIT_OK if cert["valid"] else EXIT_INVALID_CERTIFICATE
