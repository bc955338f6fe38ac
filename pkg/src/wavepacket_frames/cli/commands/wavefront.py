"""
wavefront subcommand - Coefficient-decay probes and wavefront classification.
"""
import argparse
from typing import List, Tuple

from wavepacket_frames.cli.outcome import EXIT_OK, CommandResponse, report_failure
from wavepacket_frames.cli.run_config import RunConfig, parse_floats, parse_int_range
from wavepacket_frames.core.service import service
from wavepacket_frames.core.wavefront import SignalParams, angle_grid
from wavepacket_frames.help import get_help


class WavefrontResponse(CommandResponse):
    """Response model for the wavefront command."""


def parse_points(text: str) -> List[Tuple[float, float]]:
    """``"x,y;x,y;..."``."""
    points = []
    for part in text.split(";"):
        if not part.strip():
            continue
        values = parse_floats(part)
        if len(values) != 2:
            raise argparse.ArgumentTypeError(f"point needs two coordinates, got {part!r}")
        points.append((values[0], values[1]))
    return points


def register(subparsers, parents) -> None:
    parser = subparsers.add_parser(
        "wavefront",
        parents=parents,
        help="classify directions by coefficient decay",
        description=get_help("wavefront"),
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    parser.add_argument("--signal", choices=["bump", "edge", "corner"], default="edge")
    parser.add_argument("--normal-angle", type=float, default=0.0, help="edge normal of the synthetic signal")
    parser.add_argument("--points", type=parse_points, default=[(0.0, 0.0)], help="probe points 'x,y;x,y;...'")
    parser.add_argument("--angles", type=int, default=16, help="number of equally spaced probe angles")
    parser.add_argument("--jrange", type=parse_int_range, default=(1, 2, 3, 4, 5), help="scales, e.g. '1..5'")
    parser.add_argument("--order", type=float, default=1.0, help="Sobolev order s of the verdict")
    parser.add_argument("--threshold", type=float, help="verdict threshold on the normalized sum")
    parser.add_argument("--probe", type=parse_floats, help="single probe 'x,y,theta'; writes a probe table")
    parser.add_argument("--dual", action="store_true", help="probe approximate coefficients of the dual at cutoff --eps")
    parser.set_defaults(handler=handle)


async def handle(args: argparse.Namespace, config: RunConfig) -> int:
    grid_n = config.grid_n
    signal_params = SignalParams(normal_angle=args.normal_angle)
    dual = {"dual_eps": config.eps, "dual_j_max": config.j_max, "band": config.band} if args.dual else {}
    if args.probe:
        if len(args.probe) != 3:
            raise ValueError(f"--probe needs x,y,theta, got {args.probe}")
        response = WavefrontResponse(**await service.probe(
            config.window_path(),
            config.lattice_values(),
            (args.probe[0], args.probe[1]),
            args.probe[2],
            args.jrange,
            input_path=config.input,
            signal=args.signal,
            signal_params=signal_params,
            grid_n=grid_n,
            extent=config.extent,
            window_scale=config.window_scale,
            out=config.out,
            **dual,
        ))
        if not response.success:
            return report_failure(response)
        print(response.data["report"], end="")
        return EXIT_OK

    response = WavefrontResponse(**await service.wavefront(
        config.window_path(),
        config.lattice_values(),
        args.jrange,
        args.points,
        angle_grid(args.angles),
        args.order,
        config.output_path(),
        input_path=config.input,
        signal=args.signal,
        signal_params=signal_params,
        grid_n=grid_n,
        extent=config.extent,
        threshold=args.threshold,
        window_scale=config.window_scale,
        **dual,
    ))
    if not response.success:
        return report_failure(response)
    flagged = response.data["flagged"]
    print(f"{len(flagged)} of {len(args.points) * args.angles} probes flagged (threshold {response.data['threshold']:.3g})")
    for p, q in flagged:
        x1, x2 = args.points[p]
        print(f"  point ({x1:.4g}, {x2:.4g})  angle index {q}")
    return EXIT_OK
