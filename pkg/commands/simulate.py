import argparse

import common.constants as constants
from commands import options
from commands.formatting import EXTENSIONS, render_report
from common.observability import build_logger
from common.run_context import RunContext
from distance_bounding.errors import DistanceBoundingError
from distance_bounding.montecarlo import ExperimentSpec, run_batches, run_trials

logger = build_logger("simulate")


def build_spec(args: argparse.Namespace) -> ExperimentSpec:
    return ExperimentSpec(
        params=options.protocol_params(args),
        protocol=args.protocol,
        adversary=args.adversary,
        trials=args.trials,
        seed=args.seed,
        channel=options.channel_config(args),
        mode=args.mode,
        metric=args.metric,
        probe=options.probe(args.probe),
        bc_mode=args.bc_mode,
        workers=args.workers,
    )


def report_fields(args: argparse.Namespace) -> tuple[str, ...]:
    if args.batches:
        return constants.REPORT_FIELDS + constants.BATCH_FIELDS
    return constants.REPORT_FIELDS


def handler(args: argparse.Namespace) -> int:
    context = RunContext.resolve("simulate", args.output_dir)
    try:
        spec = build_spec(args)
    except ValueError as e:
        logger.error(f"Invalid simulate options: {e}")
        return constants.EXIT_USAGE

    try:
        report = run_batches(spec) if args.batches else run_trials(spec)
        path = context.write_report(
            render_report(report.as_row(), report_fields(args), args.format),
            EXTENSIONS[args.format],
            protocol=spec.protocol.value,
            adversary=spec.adversary.value,
            n=spec.params.n,
            m=spec.params.m,
            seed=spec.seed,
        )
    except DistanceBoundingError as e:
        logger.error(f"Simulation failed: {e}")
        return constants.EXIT_FAILURE
    except Exception:
        logger.exception("Unhandled exception in simulate")
        return constants.EXIT_FAILURE

    if path is not None:
        logger.info("Report written", path=str(path))
    if args.fail_z is not None and not abs(report.z_score) <= args.fail_z:
        logger.warning(
            "Estimate outside tolerance", z=report.z_score, fail_z=args.fail_z
        )
        return constants.EXIT_TOLERANCE
    return constants.EXIT_OK
