import argparse
from typing import Optional

import common.constants as constants
from commands.formatting import EXTENSIONS, render_table
from common.observability import build_logger
from common.run_context import RunContext
from distance_bounding.analysis import comparison_table
from distance_bounding.core import default_params
from distance_bounding.errors import ParamsError

logger = build_logger("analyze")

M_EQUALS_N = "eq-n"


def parse_range(text: str) -> range:
    """Parse "4" or "1..12"; both ends are inclusive."""
    first, separator, last = text.partition("..")
    try:
        start = int(first)
        stop = int(last) if separator else start
    except ValueError as e:
        raise ParamsError(f"not an integer range: {text!r}") from e
    if stop < start:
        raise ParamsError(f"empty range: {text!r}")
    return range(start, stop + 1)


def parse_m(text: str) -> Optional[int]:
    if text == M_EQUALS_N:
        return None
    try:
        return int(text)
    except ValueError as e:
        raise ParamsError(f"--m must be {M_EQUALS_N} or an integer, got {text!r}") from e


def build_rows(n_values: range, m: Optional[int], executions: int) -> list[dict]:
    return [
        comparison_table(default_params(n, m, executions)).as_row() for n in n_values
    ]


def handler(args: argparse.Namespace) -> int:
    context = RunContext.resolve("analyze", args.output_dir)
    try:
        rows = build_rows(parse_range(args.n), parse_m(args.m), args.executions)
    except ValueError as e:
        logger.error(f"Invalid analyze options: {e}")
        return constants.EXIT_USAGE

    try:
        path = context.write_report(
            render_table(rows, constants.ANALYZE_FIELDS, args.format),
            EXTENSIONS[args.format],
        )
    except Exception:
        logger.exception("Unhandled exception in analyze")
        return constants.EXIT_FAILURE

    if path is not None:
        logger.info("Table written", path=str(path), rows=len(rows))
    return constants.EXIT_OK
