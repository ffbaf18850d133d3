from typing import Optional

import numpy as np
import pytest
from sim_test_helpers import acceptance_rate, rng, run_once, small_params
from statistical_checks import assert_rate_near

from distance_bounding import analysis
from distance_bounding.adversary import (
    Deployment,
    PreaskStrategy,
    ProbeChoice,
    ProbePath,
    ProverPort,
    ReplayStrategy,
    bc_guess_strategy,
    build_strategy,
    execute,
    preask_strategy,
    relay_strategy,
    replay_strategy,
)
from distance_bounding.channel import ChannelConfig
from distance_bounding.core import (
    AdversaryKind,
    BcGuessMode,
    Nonce,
    NonceRole,
    ProtocolKind,
    bits_from_str,
    default_params,
)
from distance_bounding.errors import AdversaryError
from distance_bounding.treegen import TreeMode

# ----------------------------- Prover port tests ------------------------------


@pytest.fixture
def tree_deployment(rng: np.random.Generator, small_params) -> Deployment:
    return Deployment.create(ProtocolKind.TREE, small_params, TreeMode.PRF, rng)


def test_port_enforces_the_session_budget(rng: np.random.Generator, tree_deployment):
    port = ProverPort(lambda: tree_deployment.prover(rng), budget=1)
    a = Nonce.generate(tree_deployment.params, NonceRole.VERIFIER_A, rng)
    b, auth_bits = port.init(a)
    assert (a.bits, b.bits) in port.harvested
    assert len(auth_bits) == tree_deployment.params.m
    with pytest.raises(AdversaryError):
        port.init(a)


def test_closed_port_refuses_everything(rng: np.random.Generator, tree_deployment):
    port = ProverPort(lambda: tree_deployment.prover(rng), budget=3)
    port.init(Nonce.generate(tree_deployment.params, NonceRole.VERIFIER_A, rng))
    port.close()
    with pytest.raises(AdversaryError):
        port.ask(0)
    with pytest.raises(AdversaryError):
        port.init(Nonce.generate(tree_deployment.params, NonceRole.VERIFIER_A, rng))


def test_port_needs_an_open_session(rng: np.random.Generator, tree_deployment):
    port = ProverPort(lambda: tree_deployment.prover(rng))
    with pytest.raises(AdversaryError):
        port.ask(1)


def test_probe_answers_follow_the_tree(rng: np.random.Generator, tree_deployment):
    port = ProverPort(lambda: tree_deployment.prover(rng))
    a = Nonce.generate(tree_deployment.params, NonceRole.VERIFIER_A, rng)
    b, _ = port.init(a)
    replies = port.probe(bits_from_str("01"))
    tree = tree_deployment.secret.tree_for(a, b)
    assert replies == bytes([tree.node_bits[0], tree.node_bits[3]])


# ----------------------------- Probe path tests -------------------------------


def test_probe_path_uses_recorded_replies_until_divergence():
    path = ProbePath(probe=bits_from_str("001"), replies=bits_from_str("101"))
    guesses = iter([0, 0])
    assert path.reply(bits_from_str("0"), lambda: next(guesses)) == 1
    assert path.reply(bits_from_str("01"), lambda: next(guesses)) == 0
    assert path.first_divergence == 2
    assert path.reply(bits_from_str("010"), lambda: next(guesses)) == 0
    assert path.notes() == {"probe": "001", "probe_replies": "101", "first_divergence": 2}


@pytest.mark.parametrize(
    "choice,expected", [(ProbeChoice.ZEROS, "0000"), (ProbeChoice.ONES, "1111")]
)
def test_probe_choices(rng: np.random.Generator, choice: ProbeChoice, expected: str):
    assert choice.bits(4, rng) == bits_from_str(expected)
    assert len(ProbeChoice.RANDOM.bits(4, rng)) == 4


def test_explicit_probe_must_cover_every_round(rng: np.random.Generator, small_params):
    with pytest.raises(AdversaryError):
        preask_strategy(small_params, rng, bits_from_str("010"))
    with pytest.raises(AdversaryError):
        bc_guess_strategy(small_params, rng, BcGuessMode.CHALLENGE, bits_from_str("1"))


# ----------------------------- Strategy behaviour tests -----------------------


def test_build_strategy_none_means_honest_prover(rng: np.random.Generator, tree_deployment):
    assert build_strategy(AdversaryKind.NONE, tree_deployment, rng) is None
    result = execute(tree_deployment, None, rng)
    assert result.verdict.accepted
    assert not result.nonce_reuse


def test_preask_without_the_prover_fails(rng: np.random.Generator, small_params):
    strategy = PreaskStrategy(params=small_params, rng=rng)
    with pytest.raises(AdversaryError):
        strategy.respond_init(Nonce.generate(small_params, NonceRole.VERIFIER_A, rng))


def test_preask_records_the_probe_path(rng: np.random.Generator, tree_deployment):
    strategy = preask_strategy(tree_deployment.params, rng, bits_from_str("10"))
    result = execute(tree_deployment, strategy, rng)
    assert result.notes["prover_sessions"] == 1
    assert result.notes["probe"] == "10"
    challenges = result.transcript.challenges
    if challenges == bits_from_str("10"):
        assert result.notes["first_divergence"] is None
        assert result.verdict.accepted
    else:
        assert result.notes["first_divergence"] in (1, 2)


def test_relay_at_zero_extra_distance_always_passes(rng: np.random.Generator):
    params = default_params(5)
    for protocol in ProtocolKind:
        for _ in range(10):
            result = run_once(protocol, AdversaryKind.RELAY, params, rng, mode=TreeMode.PRF)
            assert result.verdict.accepted, protocol


def test_relay_beyond_epsilon_times_out(rng: np.random.Generator, tree_deployment):
    strategy = relay_strategy(tree_deployment.params, rng, extra_distance=0.5)
    result = execute(tree_deployment, strategy, rng, ChannelConfig(epsilon=0.5))
    assert result.verdict.label == "Reject(Timeout(1))"


def test_relay_rejects_negative_detour(rng: np.random.Generator, small_params):
    with pytest.raises(AdversaryError):
        relay_strategy(small_params, rng, extra_distance=-1.0)


def test_replay_on_the_verifier_nonce_reuses_the_tree(rng: np.random.Generator):
    params = default_params(3)
    deployment = Deployment.create(ProtocolKind.TREE, params, TreeMode.PRF, rng)
    result = execute(deployment, replay_strategy(params, rng, match_verifier_nonce=True), rng)
    assert result.nonce_reuse
    assert result.notes["own_nonce_matched"]


def test_replay_cannot_reach_the_prover_after_harvesting(rng: np.random.Generator):
    params = default_params(3)
    deployment = Deployment.create(ProtocolKind.TREE, params, TreeMode.PRF, rng)
    strategy = replay_strategy(params, rng)
    assert isinstance(strategy, ReplayStrategy)
    result = execute(deployment, strategy, rng)
    assert strategy.port is not None and strategy.port.closed
    assert result.notes["prover_sessions"] == 1


def test_hk_preask_learns_register_x(rng: np.random.Generator):
    params = default_params(4)
    result = run_once(ProtocolKind.HK, AdversaryKind.HK_PREASK, params, rng, mode=TreeMode.PRF)
    assert len(result.notes["register_x"]) == 4
    if result.transcript.challenges == bytes(4):
        assert result.verdict.accepted


@pytest.mark.parametrize(
    "mode,expected", [(BcGuessMode.CHALLENGE, "challenge"), (BcGuessMode.AUTO, "signature")]
)
def test_bc_guess_modes(rng: np.random.Generator, mode: BcGuessMode, expected: str):
    params = default_params(5, 3)
    result = run_once(ProtocolKind.BC, AdversaryKind.BC_GUESS, params, rng, bc_mode=mode)
    assert result.notes["mode"] == expected
    assert result.notes["prover_sessions"] == (1 if expected == "challenge" else 0)


def test_bc_challenge_mode_withholds_signature_on_divergence(rng: np.random.Generator):
    params = default_params(6)
    deployment = Deployment.create(ProtocolKind.BC, params, TreeMode.PRF, rng)
    for _ in range(20):
        strategy = bc_guess_strategy(deployment.params, rng, BcGuessMode.CHALLENGE)
        result = execute(deployment, strategy, rng)
        if result.transcript.challenges != strategy.probe:
            assert result.transcript.closing is None
            assert result.verdict.label == "Reject(BadAuth)"


# ----------------------------- Acceptance rate tests --------------------------


@pytest.mark.statistical
def test_random_guess_rate_on_tree(small_params):
    expected = float(analysis.no_prover_success(small_params.m, small_params.n))
    rate = acceptance_rate(ProtocolKind.TREE, AdversaryKind.RANDOM, small_params, 3000)
    assert_rate_near(rate, expected, 3000)


@pytest.mark.statistical
@pytest.mark.parametrize("probe", list(ProbeChoice), ids=lambda probe: probe.value)
def test_preask_rate_does_not_depend_on_probe(probe: ProbeChoice):
    params = default_params(3)
    rate = acceptance_rate(ProtocolKind.TREE, AdversaryKind.PREASK, params, 3000, probe=probe)
    assert_rate_near(rate, float(analysis.preask_success(3)), 3000)


@pytest.mark.statistical
def test_preask_success_given_first_divergence(rng: np.random.Generator):
    params = default_params(3)
    outcomes: dict[Optional[int], list[bool]] = {}
    for _ in range(8000):
        result = run_once(ProtocolKind.TREE, AdversaryKind.PREASK, params, rng)
        divergence = result.notes["first_divergence"]
        outcomes.setdefault(divergence, []).append(result.verdict.accepted)

    assert all(outcomes.pop(None))
    assert sorted(outcomes) == [1, 2, 3]
    for divergence, accepted in outcomes.items():
        expected = 2.0 ** -(params.n - divergence + 1)
        assert_rate_near(sum(accepted) / len(accepted), expected, len(accepted))
