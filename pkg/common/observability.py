import os
import sys

from aws_lambda_powertools import Logger

import common.constants as constants


def build_logger(component: str) -> Logger:
    """Structured JSON logger for one component, writing to stderr.

    stdout is reserved for reports, so every diagnostic goes to stderr.
    """
    return Logger(
        service=f"{constants.SERVICE_NAME}-{component}",
        level=os.getenv(constants.LOG_LEVEL_ENV, constants.DEFAULT_LOG_LEVEL).upper(),
        stream=sys.stderr,
    )
