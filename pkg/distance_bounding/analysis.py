"""Closed-form false-acceptance probabilities and the optimality comparison.

Every formula evaluates either as a float or, with ``exact=True``, as a
``Fraction``. Fractions are what exact enumeration results are compared with.
"""

import math
from fractions import Fraction
from typing import Any, Optional, Union

import numpy as np
from attrs import define, field

import common.constants as constants
from distance_bounding.channel import ChannelConfig, rtt, threshold
from distance_bounding.core import (
    AdversaryKind,
    BcGuessMode,
    Metric,
    ProtocolKind,
    ProtocolParams,
    key_length,
)
from distance_bounding.errors import ExperimentError, ParamsError

Probability = Union[float, Fraction]


def _check_rounds(n: int, name: str = "n", minimum: int = 1) -> None:
    if isinstance(n, bool) or not isinstance(n, int) or n < minimum:
        raise ParamsError(f"{name} must be an integer >= {minimum}, got {n!r}")


def _power_of_half(exponent: int, exact: bool) -> Probability:
    if exact:
        return Fraction(1, 2**exponent)
    return math.ldexp(1.0, -exponent)


# ---------- tree protocol ----------


def preask_success(n: int, exact: bool = False) -> Probability:
    """Pre-ask adversary with relay: 2^-n (n/2 + 1)."""
    _check_rounds(n)
    if exact:
        return Fraction(n + 2, 2 ** (n + 1))
    return math.ldexp(float(n + 2), -(n + 1))


def residual_preask_risk(rounds_done: int, exact: bool = False) -> Probability:
    """Pre-ask success when the verifier decides on its first j timed rounds."""
    _check_rounds(rounds_done, "rounds_done", minimum=0)
    if rounds_done == 0:
        return Fraction(1) if exact else 1.0
    return preask_success(rounds_done, exact)


def no_prover_success(m: int, n: int, exact: bool = False) -> Probability:
    """Adversary alone: m authentication bits and n replies guessed, 2^-(m+n)."""
    _check_rounds(m, "m", minimum=0)
    _check_rounds(n)
    return _power_of_half(m + n, exact)


def replay_success(params: ProtocolParams, exact: bool = False) -> Probability:
    """Replay without relay: the harvested tree is useful only when the verifier
    draws the adversary's own nonce a', otherwise everything is guessed."""
    hit = _power_of_half(params.l_a, exact)
    miss = 1 - hit
    return hit * preask_success(params.n, exact) + miss * no_prover_success(
        params.m, params.n, exact
    )


# ---------- birthday terms ----------


def _check_birthday(count: int, bits: int) -> None:
    _check_rounds(count, "count")
    _check_rounds(bits, "bits")


def birthday_bound(count: int, bits: int, exact: bool = False) -> Probability:
    """count (count - 1) / 2^(bits + 1); not capped, it is a bound."""
    _check_birthday(count, bits)
    if exact:
        return Fraction(count * (count - 1), 2 ** (bits + 1))
    return math.ldexp(float(count * (count - 1)), -(bits + 1))


def birthday_exact(count: int, bits: int, exact: bool = False) -> Probability:
    """1 - prod_{i<count} (1 - i / 2^bits), the probability of a repeated value."""
    _check_birthday(count, bits)
    if count > 2**bits:
        return Fraction(1) if exact else 1.0
    if exact:
        space = 2**bits
        distinct = Fraction(1)
        for i in range(count):
            distinct *= Fraction(space - i, space)
        return 1 - distinct
    return -math.expm1(_log_distinct(count, bits))


def _log_distinct(count: int, bits: int) -> float:
    """log prod_{i<count} (1 - i / 2^bits) without materialising all count terms."""
    first = math.ldexp(float(count * (count - 1)), -(bits + 1))
    if first > 800.0:
        return -math.inf
    if math.ldexp(float(count), -bits) < constants.BIRTHDAY_SERIES_BELOW:
        # -log1p(-x) = x + x^2/2 + x^3/3 + ..., summed through the power sums of i
        second = first * math.ldexp(float(2 * count - 1), -bits) / 3
        third = math.ldexp(first * first, -bits)
        return -(first + second / 2 + third / 3)
    scale = math.ldexp(1.0, -bits)
    total = 0.0
    for start in range(0, count, constants.BIRTHDAY_CHUNK):
        stop = min(count, start + constants.BIRTHDAY_CHUNK)
        total += float(np.log1p(-np.arange(start, stop, dtype=np.float64) * scale).sum())
    return total


# ---------- baselines ----------


def hk_success(n: int, exact: bool = False) -> Probability:
    """Hancke-Kuhn against a pre-ask that learns one register: (3/4)^n."""
    _check_rounds(n)
    if exact:
        return Fraction(3, 4) ** n
    return 0.75**n


def bc_success(m: int, n: int, exact: bool = False) -> Probability:
    """Brands-Chaum: the better of challenge guessing and signature guessing."""
    _check_rounds(m, "m")
    _check_rounds(n)
    return _power_of_half(min(m, n), exact)


def bc_guess_success(
    m: int, n: int, mode: BcGuessMode = BcGuessMode.AUTO, exact: bool = False
) -> Probability:
    resolved = mode.resolve(n, m)
    if resolved is BcGuessMode.CHALLENGE:
        return _power_of_half(n, exact)
    return _power_of_half(m, exact)


def random_guess_success(
    protocol: ProtocolKind, params: ProtocolParams, exact: bool = False
) -> Probability:
    """Blind guessing of every key-dependent bit the protocol checks."""
    if protocol is ProtocolKind.TREE:
        return no_prover_success(params.m, params.n, exact)
    if protocol is ProtocolKind.HK:
        return _power_of_half(params.n, exact)
    return _power_of_half(params.m, exact)


# ---------- timing ----------


def round_pass_probability(channel: ChannelConfig, relayed: bool = False) -> float:
    """Probability that one measured round trip stays within the threshold.

    Without jitter this is 0 or 1. Jitter adds a uniform [0, jitter] delay.
    """
    slack = threshold(channel) - rtt(channel, relayed)
    if channel.jitter == 0.0:
        return 1.0 if slack >= 0.0 else 0.0
    return float(np.clip(slack / channel.jitter, 0.0, 1.0))


def relay_success(channel: ChannelConfig, n: int = 1) -> float:
    """Content-correct relay: 1 if 2 extra / c <= epsilon else 0 (per n rounds)."""
    _check_rounds(n)
    return round_pass_probability(channel, relayed=True) ** n


# ---------- N executions ----------


def at_least_once(p: Probability, executions: int) -> Probability:
    """1 - (1 - p)^N over N independent executions."""
    _check_rounds(executions, "executions")
    if isinstance(p, Fraction):
        return 1 - (1 - p) ** executions
    if p >= 1.0:
        return 1.0
    return float(-np.expm1(executions * np.log1p(-p)))


def union_bound(p: Probability, executions: int) -> Probability:
    _check_rounds(executions, "executions")
    return min(1 if isinstance(p, Fraction) else 1.0, executions * p)


# ---------- predictions for experiments ----------


def predict(
    protocol: ProtocolKind,
    adversary: AdversaryKind,
    params: ProtocolParams,
    channel: Optional[ChannelConfig] = None,
    metric: Metric = Metric.ACCEPTANCE,
    bc_mode: BcGuessMode = BcGuessMode.AUTO,
) -> float:
    """Per-execution probability a Monte Carlo run of this setup should estimate."""
    channel = channel or ChannelConfig()
    if metric is Metric.NONCE_REUSE:
        if adversary is not AdversaryKind.REPLAY:
            raise ExperimentError(
                f"the nonce-reuse metric needs the replay adversary, not {adversary.value}"
            )
        return float(_power_of_half(params.l_a, exact=False))

    if adversary is AdversaryKind.RELAY:
        return relay_success(channel, params.n)

    timing = round_pass_probability(channel) ** params.n
    if adversary is AdversaryKind.NONE:
        return timing
    if adversary is AdversaryKind.RANDOM:
        content = random_guess_success(protocol, params)
    elif protocol is ProtocolKind.TREE and adversary is AdversaryKind.PREASK:
        content = preask_success(params.n)
    elif protocol is ProtocolKind.TREE and adversary is AdversaryKind.REPLAY:
        content = replay_success(params)
    elif protocol is ProtocolKind.HK and adversary is AdversaryKind.HK_PREASK:
        content = hk_success(params.n)
    elif protocol is ProtocolKind.BC and adversary is AdversaryKind.BC_GUESS:
        content = bc_guess_success(params.m, params.n, bc_mode)
    else:
        raise ExperimentError(
            f"no closed form for adversary {adversary.value} against protocol {protocol.value}"
        )
    return float(content) * timing


# ---------- optimality comparison ----------


@define(slots=True, frozen=True, kw_only=True)
class ComparisonRow:
    """Per-trial false acceptance with and without relay, and over N executions."""

    protocol: str
    relay: float
    no_relay: float
    union_relay: float
    union_no_relay: float


@define(slots=True, frozen=True, kw_only=True)
class ComparisonTable:
    params: ProtocolParams
    rows: tuple[ComparisonRow, ...] = field(converter=tuple)

    @property
    def tree_bits(self) -> int:
        return key_length(self.params.n)

    def row(self, protocol: str) -> ComparisonRow:
        for candidate in self.rows:
            if candidate.protocol == protocol:
                return candidate
        raise KeyError(protocol)

    def as_row(self) -> dict[str, Any]:
        """One flat record in the column order of the analyze output."""
        tree, hk, bc, optimal = (self.row(name) for name in ("tree", "hk", "bc", "optimal"))
        values = {
            "n": self.params.n,
            "m": self.params.m,
            "executions": self.params.executions,
            "tree_relay": tree.relay,
            "tree_no_relay": tree.no_relay,
            "tree_union_relay": tree.union_relay,
            "tree_union_no_relay": tree.union_no_relay,
            "hk_relay": hk.relay,
            "hk_no_relay": hk.no_relay,
            "hk_union": hk.union_relay,
            "bc_relay": bc.relay,
            "bc_no_relay": bc.no_relay,
            "bc_union": bc.union_relay,
            "optimal_relay": optimal.relay,
            "optimal_no_relay": optimal.no_relay,
            "tree_bits": self.tree_bits,
        }
        return {name: values[name] for name in constants.ANALYZE_FIELDS}


def _uniform_row(protocol: str, p: float, executions: int) -> ComparisonRow:
    union = float(union_bound(p, executions))
    return ComparisonRow(
        protocol=protocol, relay=p, no_relay=p, union_relay=union, union_no_relay=union
    )


def comparison_table(params: ProtocolParams) -> ComparisonTable:
    """Tree protocol against Hancke-Kuhn, Brands-Chaum and the optimal bounds.

    The tree protocol's N-execution columns add the birthday term of the nonce
    that separates trees: l_b with relay, l_a without.
    """
    n, m, executions = params.n, params.m, params.executions
    tree_relay = float(preask_success(n))
    tree_no_relay = float(no_prover_success(m, n))
    tree = ComparisonRow(
        protocol="tree",
        relay=tree_relay,
        no_relay=tree_no_relay,
        union_relay=min(1.0, executions * tree_relay + birthday_bound(executions, params.l_b)),
        union_no_relay=min(
            1.0, executions * tree_no_relay + birthday_bound(executions, params.l_a)
        ),
    )
    optimal = ComparisonRow(
        protocol="optimal",
        relay=float(_power_of_half(n, exact=False)),
        no_relay=tree_no_relay,
        union_relay=float(union_bound(float(_power_of_half(n, exact=False)), executions)),
        union_no_relay=float(union_bound(tree_no_relay, executions)),
    )
    return ComparisonTable(
        params=params,
        rows=(
            tree,
            _uniform_row("hk", float(hk_success(n)), executions),
            _uniform_row("bc", float(bc_success(m, n)), executions),
            optimal,
        ),
    )
