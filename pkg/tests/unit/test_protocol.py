from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import pytest
from sim_test_helpers import rng, small_params
from statistical_checks import assert_rate_near

from distance_bounding.channel import Channel, ChannelConfig
from distance_bounding.core import (
    Bits,
    Nonce,
    NonceRole,
    Outcome,
    ProtocolParams,
    default_params,
)
from distance_bounding.errors import ChannelError, ProtocolStateError
from distance_bounding.protocol import (
    ProverSession,
    ProverState,
    Reason,
    Verdict,
    VerifierSession,
    VerifierState,
    early_decision,
    fast_round,
    final_decision,
    honest_execution,
    run_execution,
    verifier_start,
)
from distance_bounding.treegen import TreeMode, TreeSource


@dataclass
class TamperingClaimant:
    """Legitimate prover whose messages are altered on the way."""

    prover: ProverSession
    flip_reply_at: Optional[int] = None
    flip_auth: bool = False
    silent_at: Optional[int] = None
    relayed: bool = False
    rounds: int = field(default=0, init=False)

    def respond_init(self, a: Nonce) -> tuple[Nonce, Bits]:
        b, auth_bits = self.prover.respond_init(a)
        if self.flip_auth:
            auth_bits = bytes([1 - auth_bits[0]]) + auth_bits[1:]
        return b, auth_bits

    def begin_fast_phase(self) -> None:
        self.prover.begin_fast_phase()

    def respond(self, challenge: int) -> int:
        self.rounds += 1
        if self.rounds == self.silent_at:
            raise ChannelError(f"no reply in round {self.rounds}")
        answer = self.prover.respond(challenge)
        return 1 - answer if self.rounds == self.flip_reply_at else answer

    def finish(self) -> Optional[Bits]:
        return None


def _pair(params: ProtocolParams, rng: np.random.Generator, mode=TreeMode.PRF, channel=None):
    secret = TreeSource.create(params, mode, rng)
    verifier = VerifierSession(
        params=params, secret=secret, rng=rng, channel=Channel(channel or ChannelConfig(), rng)
    )
    return verifier, ProverSession(params=params, secret=secret, rng=rng)


# ----------------------------- Honest execution tests -------------------------


@pytest.mark.parametrize("mode", list(TreeMode))
@pytest.mark.parametrize("n", [1, 4, 8])
def test_honest_prover_is_always_accepted(rng: np.random.Generator, mode: TreeMode, n: int):
    params = default_params(n)
    for _ in range(25):
        secret = TreeSource.create(params, mode, rng)
        result = honest_execution(params, secret, rng)
        assert result.verdict == Verdict.ok()
        assert result.transcript.outcome is Outcome.ACCEPT
        assert result.transcript.rounds_completed == n


def test_honest_prover_with_processing_delay(rng: np.random.Generator, small_params):
    channel = ChannelConfig(distance_vp=5.0, processing_delay=0.3)
    secret = TreeSource.create(small_params, TreeMode.PRF, rng)
    result = honest_execution(small_params, secret, rng, channel)
    assert result.verdict.accepted
    assert all(fast_round.rtt == pytest.approx(10.3) for fast_round in result.transcript.rounds)


def test_prover_states_advance(rng: np.random.Generator, small_params):
    verifier, prover = _pair(small_params, rng)
    a = verifier.start()
    assert prover.state is ProverState.AWAIT_A
    prover.respond_init(a)
    assert prover.state is ProverState.READY
    prover.respond(0)
    assert prover.state is ProverState.FAST_PHASE
    prover.respond(1)
    assert prover.state is ProverState.DONE


# ----------------------------- Rejection tests --------------------------------


def test_wrong_reply_is_rejected_at_its_round(rng: np.random.Generator):
    params = default_params(4)
    verifier, prover = _pair(params, rng)
    result = run_execution(verifier, TamperingClaimant(prover, flip_reply_at=3))
    assert result.verdict == Verdict.reject(Reason.BAD_REPLY, 3)
    assert result.verdict.label == "Reject(BadReply(3))"
    assert result.transcript.rounds_completed == 4


def test_wrong_auth_is_rejected(rng: np.random.Generator, small_params):
    verifier, prover = _pair(small_params, rng)
    result = run_execution(verifier, TamperingClaimant(prover, flip_auth=True))
    assert result.verdict.label == "Reject(BadAuth)"


def test_prover_with_another_key_fails_authentication(rng: np.random.Generator):
    params = default_params(8, 32)
    verifier = VerifierSession(
        params=params, secret=TreeSource.create(params, TreeMode.PRF, rng), rng=rng
    )
    impostor = ProverSession(
        params=params, secret=TreeSource.create(params, TreeMode.PRF, rng), rng=rng
    )
    result = run_execution(verifier, impostor)
    assert result.verdict == Verdict.reject(Reason.BAD_AUTH)


def test_slow_relay_is_rejected_by_timing(rng: np.random.Generator, small_params):
    channel = ChannelConfig(extra_distance=1.0, epsilon=0.5)
    verifier, prover = _pair(small_params, rng, channel=channel)
    prover.relayed = True
    result = run_execution(verifier, prover)
    assert result.verdict.label == "Reject(Timeout(1))"


def test_missing_reply_times_out_at_its_round(rng: np.random.Generator):
    params = default_params(4)
    verifier, prover = _pair(params, rng)
    result = run_execution(verifier, TamperingClaimant(prover, silent_at=2))
    assert result.verdict == Verdict.reject(Reason.TIMEOUT, 2)
    assert result.transcript.rounds[1].reply is None


def test_auth_is_checked_before_timing(rng: np.random.Generator, small_params):
    channel = ChannelConfig(extra_distance=1.0)
    verifier, prover = _pair(small_params, rng, channel=channel)
    claimant = TamperingClaimant(prover, flip_auth=True, relayed=True)
    assert run_execution(verifier, claimant).verdict.reason is Reason.BAD_AUTH


# ----------------------------- Decision rule tests ----------------------------


def test_final_decision_before_all_rounds_is_incomplete(rng: np.random.Generator, small_params):
    verifier, prover = _pair(small_params, rng)
    verifier.accept_init(*prover.respond_init(verifier.start()))
    fast_round(verifier, prover.respond)
    verdict = final_decision(verifier)
    assert verdict.label == "Incomplete"
    assert verdict.outcome is Outcome.INCOMPLETE


def test_early_decision_reports_residual_risk(rng: np.random.Generator):
    params = default_params(4)
    verifier, prover = _pair(params, rng)
    verifier.accept_init(*prover.respond_init(verifier.start()))
    for _ in range(2):
        fast_round(verifier, prover.respond)
    verdict, risk = early_decision(verifier, 2)
    assert verdict.accepted
    assert risk == 0.5
    transcript = verifier.transcript(verdict, early=True)
    assert transcript.outcome is Outcome.ACCEPT and transcript.early
    assert early_decision(verifier, 0)[1] == 1.0


def test_early_decision_cannot_look_past_completed_rounds(
    rng: np.random.Generator, small_params
):
    verifier, prover = _pair(small_params, rng)
    verifier.accept_init(*prover.respond_init(verifier.start()))
    fast_round(verifier, prover.respond)
    with pytest.raises(ProtocolStateError):
        early_decision(verifier, 2)


# ----------------------------- State machine tests ----------------------------


def test_verifier_rejects_out_of_order_messages(rng: np.random.Generator, small_params):
    verifier, prover = _pair(small_params, rng)
    b = Nonce.generate(small_params, NonceRole.PROVER_B, rng)
    with pytest.raises(ProtocolStateError):
        verifier.accept_init(b, b"")
    with pytest.raises(ProtocolStateError):
        fast_round(verifier, prover.respond)
    verifier.start()
    with pytest.raises(ProtocolStateError):
        verifier.start()
    assert verifier.state is VerifierState.SENT_A


def test_verifier_rejects_wrong_nonce_length(rng: np.random.Generator, small_params):
    verifier, _ = _pair(small_params, rng)
    verifier.start()
    with pytest.raises(ProtocolStateError):
        verifier.accept_init(Nonce(b"\x01" * 5, NonceRole.PROVER_B), b"")


def test_no_round_beyond_n(rng: np.random.Generator, small_params):
    verifier, prover = _pair(small_params, rng)
    verifier.accept_init(*prover.respond_init(verifier.start()))
    fast_round(verifier, prover.respond)
    fast_round(verifier, prover.respond)
    with pytest.raises(ProtocolStateError):
        fast_round(verifier, prover.respond)


def test_prover_rejects_second_nonce(rng: np.random.Generator, small_params):
    _, prover = _pair(small_params, rng)
    a = Nonce.generate(small_params, NonceRole.VERIFIER_A, rng)
    prover.respond_init(a)
    with pytest.raises(ProtocolStateError):
        prover.respond_init(a)


def test_prover_cannot_answer_before_the_slow_phase(rng: np.random.Generator, small_params):
    _, prover = _pair(small_params, rng)
    with pytest.raises(ProtocolStateError):
        prover.respond(0)


def test_verifier_start_helper(rng: np.random.Generator, small_params):
    secret = TreeSource.create(small_params, TreeMode.PRF, rng)
    session, a = verifier_start(small_params, secret, rng)
    assert session.nonce_a == a
    assert len(a.bits) == small_params.l_a


def test_verdict_must_agree_with_reason():
    with pytest.raises(ValueError):
        Verdict(True, Reason.TIMEOUT)


@pytest.mark.statistical
def test_challenges_are_fair_coins(rng: np.random.Generator, small_params):
    verifier, _ = _pair(small_params, rng)
    draws = 100_000
    ones = sum(verifier.draw_challenge() for _ in range(draws))
    assert_rate_near(ones / draws, 0.5, draws, z=3.0)
