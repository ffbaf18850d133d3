"""Trial orchestration, exact small-case enumeration and binomial statistics.

Trials are grouped into blocks of ``TRIAL_BLOCK_SIZE``. Every block draws from
its own stream, spawned from (seed, block index), so the result does not depend
on how blocks are spread over worker processes.
"""

import math
from concurrent.futures import ProcessPoolExecutor
from fractions import Fraction
from typing import Optional

import numpy as np
from attrs import define, field
from attrs.validators import ge, gt, instance_of
from scipy import stats

import common.constants as constants
from common.observability import build_logger
from distance_bounding import analysis
from distance_bounding.adversary import (
    Deployment,
    Probe,
    ProbeChoice,
    build_strategy,
    execute,
)
from distance_bounding.channel import ChannelConfig
from distance_bounding.core import (
    AdversaryKind,
    BcGuessMode,
    CollisionStats,
    Metric,
    ProtocolKind,
    ProtocolParams,
    TrialReport,
    key_length,
    leaf_count,
)
from distance_bounding.errors import EnumerationError, ExperimentError
from distance_bounding.treegen import TreeMode, level_offset

logger = build_logger("montecarlo")

ALL_PROTOCOLS = frozenset(ProtocolKind)

# Which adversaries make sense against which protocol.
COMPATIBLE_PROTOCOLS: dict[AdversaryKind, frozenset[ProtocolKind]] = {
    AdversaryKind.NONE: ALL_PROTOCOLS,
    AdversaryKind.RANDOM: ALL_PROTOCOLS,
    AdversaryKind.RELAY: ALL_PROTOCOLS,
    AdversaryKind.PREASK: frozenset({ProtocolKind.TREE}),
    AdversaryKind.REPLAY: frozenset({ProtocolKind.TREE}),
    AdversaryKind.HK_PREASK: frozenset({ProtocolKind.HK}),
    AdversaryKind.BC_GUESS: frozenset({ProtocolKind.BC}),
}


@define(slots=True, frozen=True, kw_only=True)
class ExperimentSpec:
    params: ProtocolParams = field(validator=instance_of(ProtocolParams))
    protocol: ProtocolKind = field(converter=ProtocolKind)
    adversary: AdversaryKind = field(converter=AdversaryKind)
    trials: int = field(default=constants.DEFAULT_TRIALS, validator=gt(0))
    seed: int = field(default=constants.DEFAULT_SEED, validator=ge(0))
    channel: ChannelConfig = field(factory=ChannelConfig)
    mode: TreeMode = field(default=TreeMode.IDEAL_UNIFORM, converter=TreeMode)
    metric: Metric = field(default=Metric.ACCEPTANCE, converter=Metric)
    probe: Probe = ProbeChoice.ZEROS
    bc_mode: BcGuessMode = field(default=BcGuessMode.AUTO, converter=BcGuessMode)
    budget: int = field(default=1, validator=gt(0))
    workers: int = field(default=1, validator=gt(0))

    def __attrs_post_init__(self) -> None:
        if self.protocol not in COMPATIBLE_PROTOCOLS[self.adversary]:
            raise ExperimentError(
                f"adversary {self.adversary.value} does not apply to protocol "
                f"{self.protocol.value}"
            )
        if self.metric is Metric.NONCE_REUSE and self.adversary is not AdversaryKind.REPLAY:
            raise ExperimentError("nonce-reuse is measured for the replay adversary only")
        if not isinstance(self.probe, ProbeChoice) and len(self.probe) != self.params.n:
            raise ExperimentError(
                f"probe of {len(self.probe)} challenges for n={self.params.n} rounds"
            )

    @property
    def batch_size(self) -> int:
        """N, the executions an adversary gets per batch."""
        return self.params.executions

    @property
    def predicted(self) -> float:
        return analysis.predict(
            self.protocol, self.adversary, self.params, self.channel, self.metric, self.bc_mode
        )


# ---------- statistics ----------


@define(slots=True, frozen=True)
class Confidence:
    estimate: float
    std_error: float
    interval: tuple[float, float]


def confidence(
    successes: int, trials: int, level: float = constants.CONFIDENCE_LEVEL
) -> Confidence:
    """Binomial estimate with a normal interval, or Clopper-Pearson for few successes."""
    if trials < 1:
        raise ExperimentError(f"trials must be positive, got {trials}")
    if not 0 <= successes <= trials:
        raise ExperimentError(f"{successes} successes out of {trials} trials")
    estimate = successes / trials
    std_error = math.sqrt(estimate * (1.0 - estimate) / trials)
    alpha = 1.0 - level
    if successes < constants.EXACT_INTERVAL_BELOW:
        lower = (
            0.0
            if successes == 0
            else stats.beta.ppf(alpha / 2, successes, trials - successes + 1)
        )
        upper = (
            1.0
            if successes == trials
            else stats.beta.ppf(1 - alpha / 2, successes + 1, trials - successes)
        )
        return Confidence(estimate, std_error, (float(lower), float(upper)))
    half_width = stats.norm.ppf(1 - alpha / 2) * std_error
    return Confidence(
        estimate, std_error, (max(0.0, estimate - half_width), min(1.0, estimate + half_width))
    )


# ---------- trial blocks ----------


def _block_rng(seed: int, block: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(block,)))


def _blocks(trials: int) -> list[tuple[int, int]]:
    """(block index, trials in block) pairs covering `trials`."""
    size = constants.TRIAL_BLOCK_SIZE
    starts = range(0, trials, size)
    return [(block, min(size, trials - start)) for block, start in enumerate(starts)]


def _trial_succeeded(
    spec: ExperimentSpec, deployment: Deployment, rng: np.random.Generator
) -> tuple[bool, bytes]:
    strategy = build_strategy(
        spec.adversary, deployment, rng, probe=spec.probe, bc_mode=spec.bc_mode
    )
    result = execute(deployment, strategy, rng, spec.channel, spec.budget)
    success = result.nonce_reuse if spec.metric is Metric.NONCE_REUSE else result.verdict.accepted
    return success, result.transcript.nonce_a.bits


def run_block(spec: ExperimentSpec, block: int, count: int) -> int:
    """Successes among `count` independent executions, each with a fresh secret."""
    rng = _block_rng(spec.seed, block)
    successes = 0
    for _ in range(count):
        deployment = Deployment.create(spec.protocol, spec.params, spec.mode, rng)
        success, _ = _trial_succeeded(spec, deployment, rng)
        successes += success
    logger.debug("Trial block finished", block=block, trials=count, successes=successes)
    return successes


def run_batch_block(spec: ExperimentSpec, block: int, count: int) -> tuple[int, int]:
    """(successful batches, batches with a repeated nonce a) among `count` batches."""
    rng = _block_rng(spec.seed, block)
    successes = collisions = 0
    for _ in range(count):
        deployment = Deployment.create(spec.protocol, spec.params, spec.mode, rng)
        accepted = False
        seen: set[bytes] = set()
        repeated = False
        for _ in range(spec.batch_size):
            success, nonce_a = _trial_succeeded(spec, deployment, rng)
            accepted = accepted or success
            repeated = repeated or nonce_a in seen
            seen.add(nonce_a)
        successes += accepted
        collisions += repeated
    logger.debug("Batch block finished", block=block, batches=count, successes=successes)
    return successes, collisions


def _map_blocks(function, spec: ExperimentSpec) -> list:
    blocks = _blocks(spec.trials)
    specs = [spec] * len(blocks)
    indices = [block for block, _ in blocks]
    counts = [count for _, count in blocks]
    try:
        if spec.workers > 1 and len(blocks) > 1:
            with ProcessPoolExecutor(max_workers=spec.workers) as executor:
                return list(executor.map(function, specs, indices, counts))
        return [function(*arguments) for arguments in zip(specs, indices, counts)]
    except ExperimentError:
        raise
    except Exception as error:
        raise ExperimentError(f"trial failed: {error}") from error


def _report(
    spec: ExperimentSpec,
    successes: int,
    predicted: float,
    collisions: Optional[CollisionStats] = None,
) -> TrialReport:
    return TrialReport(
        protocol=spec.protocol.value,
        adversary=spec.adversary.value,
        n=spec.params.n,
        m=spec.params.m,
        trials=spec.trials,
        successes=successes,
        predicted=predicted,
        interval=confidence(successes, spec.trials).interval,
        collisions=collisions,
    )


def run_trials(spec: ExperimentSpec) -> TrialReport:
    """Independent single executions; a success is an accepted adversary."""
    logger.info(
        "Running trials",
        protocol=spec.protocol.value,
        adversary=spec.adversary.value,
        trials=spec.trials,
        seed=spec.seed,
        workers=spec.workers,
    )
    successes = sum(_map_blocks(run_block, spec))
    report = _report(spec, successes, spec.predicted)
    logger.info("Trials finished", successes=successes, estimate=report.estimate, z=report.z_score)
    return report


def run_batches(spec: ExperimentSpec) -> TrialReport:
    """`trials` batches of N executions sharing one secret; a batch succeeds if
    any of its executions does. Also counts batches whose verifier nonces repeat."""
    executions = spec.batch_size
    logger.info(
        "Running batches",
        protocol=spec.protocol.value,
        adversary=spec.adversary.value,
        batches=spec.trials,
        executions=executions,
        seed=spec.seed,
    )
    outcomes = _map_blocks(run_batch_block, spec)
    successes = sum(success for success, _ in outcomes)
    # Brands-Chaum verifiers draw n-bit nonces
    nonce_bits = spec.params.n if spec.protocol is ProtocolKind.BC else spec.params.l_a
    collisions = CollisionStats(
        batches=spec.trials,
        collisions=sum(repeated for _, repeated in outcomes),
        exact=float(analysis.birthday_exact(executions, nonce_bits)),
        bound=float(analysis.birthday_bound(executions, nonce_bits)),
    )
    report = _report(
        spec, successes, float(analysis.at_least_once(spec.predicted, executions)), collisions
    )
    logger.info(
        "Batches finished",
        successes=successes,
        collisions=collisions.collisions,
        birthday_exact=collisions.exact,
    )
    return report


# ---------- exact enumeration ----------


def _check_space(space: int) -> None:
    if space > constants.MAX_ENUMERATION_SPACE:
        raise EnumerationError(
            f"enumeration space of {space} configurations exceeds "
            f"{constants.MAX_ENUMERATION_SPACE}"
        )


def _all_trees(n: int) -> np.ndarray:
    """Every node-bit assignment of a depth n + 1 tree, one row per tree."""
    width = key_length(n)
    values = np.arange(2**width, dtype=np.uint32)
    shifts = np.arange(width - 1, -1, -1, dtype=np.uint32)
    return ((values[:, None] >> shifts) & 1).astype(np.uint8)


def _node_index(challenges: tuple[int, ...]) -> int:
    value = 0
    for challenge in challenges:
        value = (value << 1) | challenge
    return level_offset(len(challenges)) + value


def _sequences(n: int) -> list[tuple[int, ...]]:
    shifts = range(n - 1, -1, -1)
    return [tuple((value >> shift) & 1 for shift in shifts) for value in range(2**n)]


def _enumerate_tree_preask(n: int) -> Fraction:
    """All trees, all verifier challenges, all adversary guesses; probe 0^n."""
    _check_space(2 ** key_length(n) * 4**n)
    trees = _all_trees(n)
    probe = (0,) * n
    probe_replies = [trees[:, _node_index(probe[:i])] for i in range(1, n + 1)]
    wins = 0
    for challenges in _sequences(n):
        truth = [trees[:, _node_index(challenges[:i])] for i in range(1, n + 1)]
        diverged_at = next((i for i in range(n) if challenges[i] != probe[i]), n)
        for guesses in _sequences(n):
            passed = np.ones(len(trees), dtype=bool)
            for i in range(n):
                answer = probe_replies[i] if i < diverged_at else guesses[i]
                passed &= truth[i] == answer
            wins += int(passed.sum())
    return Fraction(wins, len(trees) * 4**n)


def _enumerate_tree_random(n: int, m: int) -> Fraction:
    """All trees, challenges, guessed authentication bits and guessed replies."""
    if not 1 <= m <= leaf_count(n):
        raise EnumerationError(f"m={m} outside 1..{leaf_count(n)}")
    _check_space(2 ** key_length(n) * 2**n * 2 ** (m + n))
    trees = _all_trees(n)
    leaves = trees[:, level_offset(n + 1) : level_offset(n + 1) + m]
    auth_hits = {
        guess: (leaves == np.array(guess, dtype=np.uint8)).all(axis=1) for guess in _sequences(m)
    }
    wins = 0
    for challenges in _sequences(n):
        columns = [_node_index(challenges[:i]) for i in range(1, n + 1)]
        truth = trees[:, columns]
        for replies in _sequences(n):
            reply_hits = (truth == np.array(replies, dtype=np.uint8)).all(axis=1)
            wins += sum(int((reply_hits & hits).sum()) for hits in auth_hits.values())
    return Fraction(wins, len(trees) * 2**n * 2 ** (m + n))


def _enumerate_hk_preask(n: int) -> Fraction:
    """All register pairs and challenges. The adversary knows x and answers x_i,
    which is as good as a coin flip when q_i = 1 since y_i is independent."""
    _check_space(2 ** (3 * n))
    registers = np.arange(2**n, dtype=np.uint32)
    mismatch = registers[:, None] ^ registers[None, :]
    wins = sum(int(((mismatch & challenges) == 0).sum()) for challenges in range(2**n))
    return Fraction(wins, 2 ** (3 * n))


def exact_enumeration(
    protocol: ProtocolKind, adversary: AdversaryKind, n: int, m: Optional[int] = None
) -> Fraction:
    """Exact success probability by exhausting every equiprobable configuration."""
    protocol, adversary = ProtocolKind(protocol), AdversaryKind(adversary)
    if n < 1:
        raise EnumerationError(f"n must be positive, got {n}")
    m = n if m is None else m
    logger.info("Exact enumeration", protocol=protocol.value, adversary=adversary.value, n=n, m=m)
    if protocol is ProtocolKind.TREE and adversary is AdversaryKind.PREASK:
        return _enumerate_tree_preask(n)
    if protocol is ProtocolKind.TREE and adversary is AdversaryKind.RANDOM:
        return _enumerate_tree_random(n, m)
    if protocol is ProtocolKind.HK and adversary is AdversaryKind.HK_PREASK:
        return _enumerate_hk_preask(n)
    raise EnumerationError(
        f"no enumeration for adversary {adversary.value} against protocol {protocol.value}"
    )
