"""Command-line surface: ``simulate``, ``analyze`` and ``trace``.

Reports go to stdout (or to --output-dir / $TREEBOUND_OUTPUT_DIR), structured
logs go to stderr.
"""

import argparse
from typing import Optional, Sequence

import common.constants as constants
from commands import analyze, simulate, trace
from commands.formatting import FORMATS
from distance_bounding.adversary import ProbeChoice
from distance_bounding.core import AdversaryKind, BcGuessMode, Metric, ProtocolKind
from distance_bounding.treegen import TreeMode


def _choices(enum) -> list[str]:
    return [member.value for member in enum]


def _non_negative(value: str) -> float:
    number = float(value)
    if number < 0:
        raise argparse.ArgumentTypeError(f"must be non-negative, got {value}")
    return number


def _positive_int(value: str) -> int:
    number = int(value)
    if number < 1:
        raise argparse.ArgumentTypeError(f"must be a positive integer, got {value}")
    return number


def _channel_flags() -> argparse.ArgumentParser:
    parent = argparse.ArgumentParser(add_help=False)
    group = parent.add_argument_group("channel")
    group.add_argument("--distance", type=_non_negative, default=constants.DEFAULT_DISTANCE)
    group.add_argument(
        "--extra-distance", type=_non_negative, default=constants.DEFAULT_EXTRA_DISTANCE
    )
    group.add_argument("--epsilon", type=_non_negative, default=constants.DEFAULT_EPSILON)
    group.add_argument(
        "--proc-delay", type=_non_negative, default=constants.DEFAULT_PROCESSING_DELAY
    )
    group.add_argument(
        "--jitter", type=_non_negative, default=0.0, help="uniform extra delay bound"
    )
    group.add_argument("--speed", type=float, default=None, help="propagation speed")
    group.add_argument(
        "--si", action="store_true", help="metres and seconds, c = 299 792 458 m/s"
    )
    return parent


def _session_flags() -> argparse.ArgumentParser:
    parent = argparse.ArgumentParser(add_help=False)
    parent.add_argument("--protocol", choices=_choices(ProtocolKind), default="tree")
    parent.add_argument("--n", type=int, default=constants.DEFAULT_N)
    parent.add_argument("--m", type=int, default=None, help="defaults to n")
    parent.add_argument("--seed", type=int, default=constants.DEFAULT_SEED)
    parent.add_argument(
        "--probe",
        default=ProbeChoice.ZEROS.value,
        help="pre-ask probe: zeros, ones, random or an explicit bit string",
    )
    parent.add_argument("--bc-mode", choices=_choices(BcGuessMode), default="auto")
    parent.add_argument("--output-dir", default=None)
    return parent


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog=constants.SERVICE_NAME,
        description="Tree-based distance-bounding protocol simulator",
    )
    commands = parser.add_subparsers(dest="command", required=True)
    channel, session = _channel_flags(), _session_flags()

    sim = commands.add_parser(
        "simulate", parents=[session, channel], help="Monte Carlo false-acceptance runs"
    )
    sim.add_argument("--adversary", choices=_choices(AdversaryKind), default="preask")
    sim.add_argument("--trials", type=_positive_int, default=constants.DEFAULT_TRIALS)
    sim.add_argument("--executions", type=_positive_int, default=constants.DEFAULT_EXECUTIONS)
    sim.add_argument(
        "--batches", action="store_true", help="batches of N executions instead of trials"
    )
    sim.add_argument("--mode", choices=_choices(TreeMode), default=TreeMode.IDEAL_UNIFORM.value)
    sim.add_argument("--metric", choices=_choices(Metric), default=Metric.ACCEPTANCE.value)
    sim.add_argument("--workers", type=_positive_int, default=1)
    sim.add_argument(
        "--fail-z", type=float, default=None, help="exit 3 when |z| exceeds this value"
    )
    sim.add_argument("--format", choices=FORMATS, default="json")
    sim.set_defaults(handler=simulate.handler)

    table = commands.add_parser("analyze", help="closed-form comparison table")
    table.add_argument("--n", default=str(constants.DEFAULT_N), help="N or FIRST..LAST")
    table.add_argument("--m", default="eq-n", help="eq-n or a fixed integer")
    table.add_argument("--executions", type=_positive_int, default=constants.DEFAULT_EXECUTIONS)
    table.add_argument("--format", choices=FORMATS, default="csv")
    table.add_argument("--output-dir", default=None)
    table.set_defaults(handler=analyze.handler)

    single = commands.add_parser(
        "trace", parents=[session, channel], help="message trace of one execution"
    )
    single.add_argument("--adversary", choices=_choices(AdversaryKind), default="none")
    single.add_argument("--mode", choices=_choices(TreeMode), default=TreeMode.PRF.value)
    single.add_argument("--format", choices=("json", "text"), default="json")
    single.set_defaults(handler=trace.handler)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    return args.handler(args)
