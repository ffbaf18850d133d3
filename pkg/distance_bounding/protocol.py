"""Verifier and prover state machines and the timed decision rule.

Prover and verifier only ever exchange explicit messages: nonce a, then
(nonce b, authentication bits), then n timed challenge/reply rounds, then an
optional closing message (used by the Brands-Chaum baseline).
"""

from enum import Enum
from typing import Any, Callable, ClassVar, Mapping, Optional, Protocol

import numpy as np
from attrs import define, field

from common.observability import build_logger
from distance_bounding import analysis
from distance_bounding.channel import Channel, ChannelConfig
from distance_bounding.core import (
    Bits,
    FastRound,
    Nonce,
    NonceRole,
    Outcome,
    ProtocolParams,
    SessionDimensions,
    Transcript,
)
from distance_bounding.errors import ProtocolStateError
from distance_bounding.treegen import DecisionTree, TreeSource, auth_string, reply

logger = build_logger("protocol")


class ProverState(str, Enum):
    AWAIT_A = "await_a"
    SENT_B = "sent_b"
    READY = "ready"
    FAST_PHASE = "fast_phase"
    DONE = "done"


class VerifierState(str, Enum):
    START = "start"
    SENT_A = "sent_a"
    AUTH_RECEIVED = "auth_received"
    FAST_PHASE = "fast_phase"
    DONE = "done"


class Reason(str, Enum):
    OK = "Ok"
    BAD_AUTH = "BadAuth"
    BAD_REPLY = "BadReply"
    TIMEOUT = "Timeout"
    INCOMPLETE = "Incomplete"


@define(slots=True, frozen=True)
class Verdict:
    accepted: bool
    reason: Reason
    round: Optional[int] = None

    def __attrs_post_init__(self) -> None:
        if self.accepted != (self.reason is Reason.OK):
            raise ValueError(f"accepted={self.accepted} contradicts reason {self.reason.value}")

    @classmethod
    def ok(cls) -> "Verdict":
        return cls(True, Reason.OK)

    @classmethod
    def reject(cls, reason: Reason, round: Optional[int] = None) -> "Verdict":
        return cls(False, reason, round)

    @property
    def outcome(self) -> Outcome:
        if self.accepted:
            return Outcome.ACCEPT
        if self.reason is Reason.INCOMPLETE:
            return Outcome.INCOMPLETE
        return Outcome.REJECT

    @property
    def label(self) -> str:
        if self.accepted or self.reason is Reason.INCOMPLETE:
            return self.outcome.value
        if self.round is None:
            return f"Reject({self.reason.value})"
        return f"Reject({self.reason.value}({self.round}))"


class Claimant(Protocol):
    """Whoever answers the verifier: the legitimate prover or an adversary."""

    relayed: bool

    def respond_init(self, a: Nonce) -> tuple[Nonce, Bits]: ...

    def begin_fast_phase(self) -> None: ...

    def respond(self, challenge: int) -> int: ...

    def finish(self) -> Optional[Bits]: ...


# ---------- prover ----------


@define(slots=True, kw_only=True)
class ProverSession:
    params: ProtocolParams
    secret: TreeSource
    rng: np.random.Generator
    state: ProverState = ProverState.AWAIT_A
    tree: Optional[DecisionTree] = None
    nonce_b: Optional[Nonce] = None
    relayed: bool = False
    _challenges: bytearray = field(factory=bytearray, init=False)

    def respond_init(self, a: Nonce) -> tuple[Nonce, Bits]:
        return prover_respond_init(self, a, self.rng)

    def begin_fast_phase(self) -> None:
        if self.state is not ProverState.READY:
            raise ProtocolStateError(f"prover cannot start the fast phase from {self.state.value}")
        self.state = ProverState.FAST_PHASE

    def respond(self, challenge: int) -> int:
        if self.state is ProverState.READY:
            self.begin_fast_phase()
        if self.state is not ProverState.FAST_PHASE or self.tree is None:
            raise ProtocolStateError(f"prover cannot answer a challenge in {self.state.value}")
        self._challenges.append(challenge)
        answer = reply(self.tree, bytes(self._challenges))
        if len(self._challenges) == self.params.n:
            self.state = ProverState.DONE
        return answer

    def finish(self) -> Optional[Bits]:
        return None


def prover_respond_init(
    session: ProverSession, a: Nonce, rng: np.random.Generator
) -> tuple[Nonce, Bits]:
    """Answer nonce a with a fresh nonce b and the m leftmost leaves of τ(a, b, k)."""
    if session.state is not ProverState.AWAIT_A:
        raise ProtocolStateError(
            f"prover expects nonce a only in await_a, not {session.state.value}"
        )
    if a.role is not NonceRole.VERIFIER_A or not a.matches(session.params):
        raise ProtocolStateError(f"nonce a must be {session.params.l_a} bits, got {len(a.bits)}")
    b = Nonce.generate(session.params, NonceRole.PROVER_B, rng)
    session.nonce_b = b
    session.state = ProverState.SENT_B
    session.tree = session.secret.tree_for(a, b)
    session.state = ProverState.READY
    return b, auth_string(session.tree, session.params.m)


# ---------- verifier ----------


@define(slots=True, kw_only=True)
class VerifierBase:
    """State machine and bookkeeping common to every verifier.

    Subclasses derive their secret material from (a, b) and say which replies,
    authentication bits and closing messages are correct.
    """

    # set when the closing message carries the only key-dependent check
    closing_authenticates: ClassVar[bool] = False

    params: SessionDimensions
    rng: np.random.Generator
    channel: Channel = field(factory=Channel)
    state: VerifierState = VerifierState.START
    nonce_a: Optional[Nonce] = None
    nonce_b: Optional[Nonce] = None
    auth_bits: Bits = b""
    closing: Optional[Bits] = None
    rounds: list[FastRound] = field(factory=list)

    @property
    def timing_threshold(self) -> float:
        return self.channel.threshold

    @property
    def round_times(self) -> tuple[float, ...]:
        return tuple(fast_round.rtt for fast_round in self.rounds)

    @property
    def challenges(self) -> Bits:
        return bytes(fast_round.challenge for fast_round in self.rounds)

    @property
    def auth_received(self) -> bool:
        return self.state in (
            VerifierState.AUTH_RECEIVED,
            VerifierState.FAST_PHASE,
            VerifierState.DONE,
        )

    def start(self) -> Nonce:
        if self.state is not VerifierState.START:
            raise ProtocolStateError(f"verifier already started ({self.state.value})")
        self.nonce_a = Nonce.generate(self.params, NonceRole.VERIFIER_A, self.rng)
        self.state = VerifierState.SENT_A
        return self.nonce_a

    def accept_init(self, b: Nonce, auth_bits: Bits) -> None:
        if self.state is not VerifierState.SENT_A or self.nonce_a is None:
            raise ProtocolStateError(
                f"verifier expects nonce b only after a, not in {self.state.value}"
            )
        if b.role is not NonceRole.PROVER_B or not b.matches(self.params):
            raise ProtocolStateError(f"nonce b must be {self.params.l_b} bits, got {len(b.bits)}")
        self.nonce_b = b
        self.auth_bits = auth_bits
        self.derive_secret(self.nonce_a, b)
        self.state = VerifierState.AUTH_RECEIVED

    def accept_closing(self, closing: Optional[Bits]) -> None:
        self.closing = closing

    def draw_challenge(self) -> int:
        return int(self.rng.integers(2))

    # ---------- protocol specific ----------
    def derive_secret(self, a: Nonce, b: Nonce) -> None:
        raise NotImplementedError

    def expected_reply(self, challenges: Bits) -> int:
        raise NotImplementedError

    def auth_valid(self) -> bool:
        raise NotImplementedError

    def closing_valid(self) -> bool:
        return True

    def transcript(self, verdict: "Verdict", early: bool = False) -> Transcript:
        if self.nonce_a is None or self.nonce_b is None:
            raise ProtocolStateError("no transcript before the slow phase completed")
        return Transcript(
            n=self.params.n,
            nonce_a=self.nonce_a,
            nonce_b=self.nonce_b,
            auth_bits=self.auth_bits,
            rounds=self.rounds,
            outcome=verdict.outcome,
            closing=self.closing,
            early=early,
        )


@define(slots=True, kw_only=True)
class VerifierSession(VerifierBase):
    secret: TreeSource
    tree: Optional[DecisionTree] = None

    def derive_secret(self, a: Nonce, b: Nonce) -> None:
        self.tree = self.secret.tree_for(a, b)

    def expected_reply(self, challenges: Bits) -> int:
        assert self.tree is not None
        return reply(self.tree, challenges)

    def auth_valid(self) -> bool:
        assert self.tree is not None
        return self.auth_bits == auth_string(self.tree, self.params.m)


def verifier_start(
    params: ProtocolParams,
    secret: TreeSource,
    rng: np.random.Generator,
    channel: Optional[ChannelConfig] = None,
) -> tuple[VerifierSession, Nonce]:
    session = VerifierSession(
        params=params,
        secret=secret,
        rng=rng,
        channel=Channel(channel or ChannelConfig(), rng),
    )
    return session, session.start()


def fast_round(
    verifier: VerifierBase,
    prover_reply_fn: Callable[[int], int],
    channel: Optional[Channel] = None,
    relayed: bool = False,
) -> tuple[int, Optional[int], float]:
    """One timed round: fresh fair-coin challenge, reply, measured round trip."""
    if not verifier.auth_received or verifier.state is VerifierState.DONE:
        raise ProtocolStateError(f"no fast round in state {verifier.state.value}")
    if len(verifier.rounds) >= verifier.params.n:
        raise ProtocolStateError(f"all {verifier.params.n} rounds already ran")
    verifier.state = VerifierState.FAST_PHASE
    challenge = verifier.draw_challenge()
    answer, measured = (channel or verifier.channel).exchange(challenge, prover_reply_fn, relayed)
    verifier.rounds.append(FastRound(challenge, answer, measured))
    return challenge, answer, measured


def _decide(verifier: VerifierBase, horizon: int) -> Verdict:
    if not verifier.auth_valid():
        return Verdict.reject(Reason.BAD_AUTH)
    limit = verifier.timing_threshold
    challenges = verifier.challenges
    for index, fast_round in enumerate(verifier.rounds[:horizon], start=1):
        if fast_round.reply is None or fast_round.rtt > limit:
            return Verdict.reject(Reason.TIMEOUT, index)
        if fast_round.reply != verifier.expected_reply(challenges[:index]):
            return Verdict.reject(Reason.BAD_REPLY, index)
    if horizon == verifier.params.n and not verifier.closing_valid():
        return Verdict.reject(Reason.BAD_AUTH)
    return Verdict.ok()


def final_decision(verifier: VerifierBase) -> Verdict:
    """Accept iff authentication, all n replies and every round-trip time pass.

    Wrong replies do not stop the fast phase; the verdict is taken at the end.
    """
    if not verifier.auth_received or len(verifier.rounds) < verifier.params.n:
        return Verdict.reject(Reason.INCOMPLETE)
    verdict = _decide(verifier, verifier.params.n)
    verifier.state = VerifierState.DONE
    return verdict


def early_decision(verifier: VerifierBase, rounds_done: int) -> tuple[Verdict, float]:
    """Decide on the first `rounds_done` rounds of an interrupted fast phase.

    The residual risk is the pre-ask success probability over that horizon.
    Verifiers whose closing message is the only key-dependent check cannot
    decide before the last round.
    """
    if not verifier.auth_received:
        raise ProtocolStateError("early decision needs the authentication bits")
    if verifier.closing_authenticates and rounds_done < verifier.params.n:
        raise ProtocolStateError(
            f"{type(verifier).__name__} authenticates only in the closing message; "
            f"no decision after {rounds_done} of {verifier.params.n} rounds"
        )
    if not 0 <= rounds_done <= len(verifier.rounds):
        raise ProtocolStateError(
            f"rounds_done={rounds_done} outside 0..{len(verifier.rounds)} completed rounds"
        )
    verdict = _decide(verifier, rounds_done)
    logger.debug("Early decision", rounds_done=rounds_done, verdict=verdict.label)
    return verdict, analysis.residual_preask_risk(rounds_done)


@define(slots=True, frozen=True, kw_only=True)
class ExecutionResult:
    verdict: Verdict
    transcript: Transcript
    nonce_reuse: bool = False
    notes: Mapping[str, Any] = field(factory=dict)


def run_execution(
    verifier: VerifierBase, claimant: Claimant, channel: Optional[Channel] = None
) -> ExecutionResult:
    """Drive one full execution: slow phase, n timed rounds, closing, decision."""
    a = verifier.start()
    b, auth_bits = claimant.respond_init(a)
    verifier.accept_init(b, auth_bits)
    claimant.begin_fast_phase()
    for _ in range(verifier.params.n):
        fast_round(verifier, claimant.respond, channel, relayed=claimant.relayed)
    verifier.accept_closing(claimant.finish())
    verdict = final_decision(verifier)
    return ExecutionResult(verdict=verdict, transcript=verifier.transcript(verdict))


def honest_execution(
    params: ProtocolParams,
    secret: TreeSource,
    rng: np.random.Generator,
    channel: Optional[ChannelConfig] = None,
) -> ExecutionResult:
    """The legitimate prover, at the expected distance, against the verifier."""
    verifier = VerifierSession(
        params=params, secret=secret, rng=rng, channel=Channel(channel or ChannelConfig(), rng)
    )
    prover = ProverSession(params=params, secret=secret, rng=rng)
    return run_execution(verifier, prover)
