import math

from distance_bounding.core import TrialReport

Z_TOLERANCE = 4.0


def assert_matches_prediction(report: TrialReport, z: float = Z_TOLERANCE) -> None:
    assert abs(report.z_score) <= z, (
        f"{report.protocol}/{report.adversary} n={report.n} m={report.m}: estimate "
        f"{report.estimate:.6f} over {report.trials} trials is {report.z_score:+.2f} sigma "
        f"from the closed form {report.predicted:.6f}"
    )


def assert_rate_near(rate: float, expected: float, trials: int, z: float = Z_TOLERANCE) -> None:
    sigma = math.sqrt(expected * (1.0 - expected) / trials)
    assert abs(rate - expected) <= z * sigma, (
        f"rate {rate:.6f} over {trials} trials is more than {z} sigma "
        f"({sigma:.6f}) from {expected:.6f}"
    )


def assert_rates_agree(
    first: float, second: float, trials: int, z: float = Z_TOLERANCE
) -> None:
    """Two independent estimates of the same probability, each over `trials`."""
    pooled = (first + second) / 2
    sigma = math.sqrt(2 * pooled * (1.0 - pooled) / trials)
    assert abs(first - second) <= z * sigma, (
        f"estimates {first:.6f} and {second:.6f} differ by more than {z} sigma ({sigma:.6f})"
    )
