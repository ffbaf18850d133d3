from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import pytest

from distance_bounding.adversary import Deployment, ProbeChoice, build_strategy, execute
from distance_bounding.channel import ChannelConfig
from distance_bounding.core import (
    AdversaryKind,
    ProtocolKind,
    ProtocolParams,
    bits_from_str,
    default_params,
)
from distance_bounding.montecarlo import ExperimentSpec
from distance_bounding.protocol import ExecutionResult
from distance_bounding.treegen import DecisionTree, TreeMode

# The depth-3 example tree: level 1 "11", level 2 "0001", leaves "11011010".
FIG1_LEVELS = ("11", "0001", "11011010")


# ------------------- Test Case Data Classes -------------------
@dataclass(frozen=True)
class ParamsCase:
    id: str
    n: int
    m: int
    l_a: int
    l_b: int
    executions: int = 1


@dataclass(frozen=True)
class ReplyCase:
    id: str
    challenges: str
    expected: str


@dataclass(frozen=True)
class StatisticalCase:
    id: str
    protocol: ProtocolKind
    adversary: AdversaryKind
    n: int
    expected: float
    m: Optional[int] = None
    trials: int = 4000
    extras: dict = field(default_factory=dict)


# ------------------- Helper Functions -------------------


def fig1_tree() -> DecisionTree:
    return DecisionTree(2, bits_from_str("".join(FIG1_LEVELS)))


def build_spec(
    protocol: ProtocolKind,
    adversary: AdversaryKind,
    n: int,
    m: Optional[int] = None,
    trials: int = 4000,
    seed: int = 7,
    executions: int = 1,
    **extras,
) -> ExperimentSpec:
    return ExperimentSpec(
        params=default_params(n, m, executions),
        protocol=protocol,
        adversary=adversary,
        trials=trials,
        seed=seed,
        **extras,
    )


def run_once(
    protocol: ProtocolKind,
    adversary: AdversaryKind,
    params: ProtocolParams,
    rng: np.random.Generator,
    mode: TreeMode = TreeMode.IDEAL_UNIFORM,
    channel: Optional[ChannelConfig] = None,
    **strategy_options,
) -> ExecutionResult:
    deployment = Deployment.create(protocol, params, mode, rng)
    strategy = build_strategy(adversary, deployment, rng, **strategy_options)
    return execute(deployment, strategy, rng, channel)


def acceptance_rate(
    protocol: ProtocolKind,
    adversary: AdversaryKind,
    params: ProtocolParams,
    trials: int,
    seed: int = 11,
    probe=ProbeChoice.ZEROS,
) -> float:
    rng = np.random.default_rng(seed)
    accepted = sum(
        run_once(protocol, adversary, params, rng, probe=probe).verdict.accepted
        for _ in range(trials)
    )
    return accepted / trials


# ------------------- Pytest Fixtures -------------------


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(20240601)


@pytest.fixture
def small_params() -> ProtocolParams:
    return default_params(2, 4)


@pytest.fixture
def params_n4() -> ProtocolParams:
    return default_params(4)


@pytest.fixture
def tree_fig1() -> DecisionTree:
    return fig1_tree()
