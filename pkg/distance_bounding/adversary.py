"""Attack strategies and the harness that runs them against a verifier.

A strategy stands where the prover would stand. It sees only what crosses the
wire: the verifier's messages and whatever it obtains from the legitimate
prover through its ProverPort. The port closes when the verifier's fast phase
begins, unless the strategy relays, in which case every fast round is timed
as relayed.
"""

from abc import ABC, abstractmethod
from enum import Enum
from typing import Any, Callable, ClassVar, Optional, Union

import numpy as np
from attrs import define, evolve, field

from common.observability import build_logger
from distance_bounding.baselines import (
    BcParams,
    BcProverSession,
    BcVerifierSession,
    HkProverSession,
    HkVerifierSession,
    RegisterSource,
    SignatureSource,
    bc_reply,
)
from distance_bounding.channel import Channel, ChannelConfig
from distance_bounding.core import (
    AdversaryKind,
    BcGuessMode,
    Bits,
    Nonce,
    NonceRole,
    ProtocolKind,
    ProtocolParams,
    SessionDimensions,
    bits_to_str,
    random_bits,
)
from distance_bounding.errors import AdversaryError
from distance_bounding.protocol import (
    Claimant,
    ExecutionResult,
    ProverSession,
    VerifierBase,
    VerifierSession,
    run_execution,
)
from distance_bounding.treegen import TreeMode, TreeSource

logger = build_logger("adversary")

Secret = Union[TreeSource, RegisterSource, SignatureSource]


# ---------- deployment ----------


@define(slots=True, frozen=True)
class Deployment:
    """One prover/verifier pair and the secret they share."""

    protocol: ProtocolKind
    params: SessionDimensions
    secret: Secret

    @classmethod
    def create(
        cls,
        protocol: ProtocolKind,
        params: ProtocolParams,
        mode: TreeMode,
        rng: np.random.Generator,
    ) -> "Deployment":
        if protocol is ProtocolKind.TREE:
            return cls(protocol, params, TreeSource.create(params, mode, rng))
        if protocol is ProtocolKind.HK:
            return cls(protocol, params, RegisterSource.create(params, mode, rng))
        bc_params = BcParams.from_protocol(params)
        return cls(protocol, bc_params, SignatureSource.create(bc_params, mode, rng))

    def verifier(self, rng: np.random.Generator, channel: ChannelConfig) -> VerifierBase:
        wire = Channel(channel, rng)
        if self.protocol is ProtocolKind.TREE:
            return VerifierSession(params=self.params, secret=self.secret, rng=rng, channel=wire)
        if self.protocol is ProtocolKind.HK:
            return HkVerifierSession(
                params=self.params, secret=self.secret, rng=rng, channel=wire
            )
        return BcVerifierSession(params=self.params, secret=self.secret, rng=rng, channel=wire)

    def prover(self, rng: np.random.Generator) -> Claimant:
        if self.protocol is ProtocolKind.TREE:
            return ProverSession(params=self.params, secret=self.secret, rng=rng)
        if self.protocol is ProtocolKind.HK:
            return HkProverSession(params=self.params, secret=self.secret, rng=rng)
        return BcProverSession(params=self.params, secret=self.secret, rng=rng)


# ---------- prover access ----------


@define(slots=True)
class ProverPort:
    """The adversary's only way to talk to the legitimate prover."""

    factory: Callable[[], Claimant]
    budget: int = 1
    sessions_used: int = 0
    closed: bool = False
    harvested: set[tuple[Bits, Bits]] = field(factory=set)
    _session: Optional[Claimant] = field(default=None, init=False)

    def _check_open(self) -> None:
        if self.closed:
            raise AdversaryError("the prover is out of reach once the fast phase has started")

    def init(self, a: Nonce) -> tuple[Nonce, Bits]:
        """Open a slow-phase session with nonce a; returns (b, auth bits)."""
        self._check_open()
        if self.sessions_used >= self.budget:
            raise AdversaryError(f"prover query budget of {self.budget} session(s) exhausted")
        self.sessions_used += 1
        self._session = self.factory()
        b, auth_bits = self._session.respond_init(a)
        self.harvested.add((a.bits, b.bits))
        return b, auth_bits

    def ask(self, challenge: int) -> int:
        self._check_open()
        if self._session is None:
            raise AdversaryError("no prover session open")
        return self._session.respond(challenge)

    def probe(self, challenges: Bits) -> Bits:
        return bytes(self.ask(challenge) for challenge in challenges)

    def finish(self) -> Optional[Bits]:
        self._check_open()
        if self._session is None:
            raise AdversaryError("no prover session open")
        return self._session.finish()

    def close(self) -> None:
        self.closed = True


# ---------- strategy interface ----------


@define(slots=True, kw_only=True)
class AdversaryStrategy(ABC):
    """Claimant driven by an attack. One instance per execution."""

    kind: ClassVar[AdversaryKind]

    params: SessionDimensions
    rng: np.random.Generator
    relayed: bool = False
    extra_distance: Optional[float] = None
    port: Optional[ProverPort] = None
    observations: list[dict[str, Any]] = field(factory=list)
    nonce_a: Optional[Nonce] = None
    _challenges: bytearray = field(factory=bytearray, init=False)

    # ---------- Claimant ----------
    def respond_init(self, a: Nonce) -> tuple[Nonce, Bits]:
        self.nonce_a = a
        self.observe({"type": "nonce_a", "bits": bits_to_str(a.bits)})
        return self.produce_auth(a)

    def begin_fast_phase(self) -> None:
        if self.port is not None and not self.relayed:
            self.port.close()

    def respond(self, challenge: int) -> int:
        self._challenges.append(challenge)
        self.observe({"type": "challenge", "bits": str(challenge)})
        return self.produce_reply(challenge)

    def finish(self) -> Optional[Bits]:
        return None

    # ---------- strategy hooks ----------
    def observe(self, event: dict[str, Any]) -> None:
        self.observations.append(event)

    def wants_prover_session(self) -> bool:
        return False

    def prover_queries(self) -> Bits:
        return b""

    def before_session(self) -> None:
        pass

    def notes(self) -> dict[str, Any]:
        return {}

    @abstractmethod
    def produce_auth(self, a: Nonce) -> tuple[Nonce, Bits]: ...

    @abstractmethod
    def produce_reply(self, challenge: int) -> int: ...

    # ---------- helpers ----------
    @property
    def round(self) -> int:
        return len(self._challenges)

    @property
    def challenges(self) -> Bits:
        return bytes(self._challenges)

    def _port(self) -> ProverPort:
        if self.port is None:
            raise AdversaryError(f"{self.kind.value} strategy needs access to the prover")
        return self.port

    def _guess(self) -> int:
        return int(self.rng.integers(2))


# ---------- tree protocol strategies ----------


@define(slots=True, kw_only=True)
class RandomGuessStrategy(AdversaryStrategy):
    """Alone, without the prover: every checked key-dependent bit is guessed."""

    kind: ClassVar[AdversaryKind] = AdversaryKind.RANDOM
    protocol: ProtocolKind = ProtocolKind.TREE
    nonce_b: Optional[Nonce] = None

    def produce_auth(self, a: Nonce) -> tuple[Nonce, Bits]:
        self.nonce_b = Nonce.generate(self.params, NonceRole.PROVER_B, self.rng)
        auth_length = self.params.m if self.protocol is ProtocolKind.TREE else 0
        return self.nonce_b, random_bits(self.rng, auth_length)

    def produce_reply(self, challenge: int) -> int:
        if self.protocol is ProtocolKind.BC:
            assert self.nonce_b is not None
            return bc_reply(self.nonce_b.bits, self.round, challenge)
        return self._guess()

    def finish(self) -> Optional[Bits]:
        if self.protocol is ProtocolKind.BC:
            return random_bits(self.rng, self.params.m)
        return None


@define(slots=True, kw_only=True)
class ProbePath:
    """Replies the prover gave along one probe sequence.

    A verifier challenge prefix equal to the probe prefix reaches the same node,
    so the recorded reply is right; after the first divergence it is a guess.
    """

    probe: Bits
    replies: Bits
    first_divergence: Optional[int] = None

    def reply(self, challenges: Bits, guess: Callable[[], int]) -> int:
        i = len(challenges)
        if self.first_divergence is None and challenges[i - 1] != self.probe[i - 1]:
            self.first_divergence = i
        if self.first_divergence is None:
            return self.replies[i - 1]
        return guess()

    def notes(self) -> dict[str, Any]:
        return {
            "probe": bits_to_str(self.probe),
            "probe_replies": bits_to_str(self.replies),
            "first_divergence": self.first_divergence,
        }


class ProbeChoice(str, Enum):
    ZEROS = "zeros"
    ONES = "ones"
    RANDOM = "random"

    def bits(self, n: int, rng: np.random.Generator) -> Bits:
        if self is ProbeChoice.ZEROS:
            return bytes(n)
        if self is ProbeChoice.ONES:
            return b"\x01" * n
        return random_bits(rng, n)


Probe = Union[Bits, ProbeChoice]


def _resolve_probe(probe: Probe, params: SessionDimensions, rng: np.random.Generator) -> Bits:
    if isinstance(probe, ProbeChoice):
        return probe.bits(params.n, rng)
    if len(probe) != params.n:
        raise AdversaryError(f"probe of {len(probe)} challenges for n={params.n} rounds")
    return probe


@define(slots=True, kw_only=True)
class PreaskStrategy(AdversaryStrategy):
    """Relays the slow phase, probes the prover once, then answers alone."""

    kind: ClassVar[AdversaryKind] = AdversaryKind.PREASK
    probe: Probe = ProbeChoice.ZEROS
    resolved_probe: Optional[Bits] = None
    path: Optional[ProbePath] = None

    def wants_prover_session(self) -> bool:
        return True

    def prover_queries(self) -> Bits:
        if self.resolved_probe is None:
            self.resolved_probe = _resolve_probe(self.probe, self.params, self.rng)
        return self.resolved_probe

    def produce_auth(self, a: Nonce) -> tuple[Nonce, Bits]:
        port = self._port()
        b, auth_bits = port.init(a)
        probe = self.prover_queries()
        self.path = ProbePath(probe=probe, replies=port.probe(probe))
        self.observe({"type": "probe", "bits": bits_to_str(probe)})
        return b, auth_bits

    def produce_reply(self, challenge: int) -> int:
        assert self.path is not None
        return self.path.reply(self.challenges, self._guess)

    def notes(self) -> dict[str, Any]:
        return self.path.notes() if self.path is not None else {}


@define(slots=True, kw_only=True)
class RelayStrategy(AdversaryStrategy):
    """Forwards every message between verifier and prover, unchanged."""

    kind: ClassVar[AdversaryKind] = AdversaryKind.RELAY
    relayed: bool = True

    def wants_prover_session(self) -> bool:
        return True

    def produce_auth(self, a: Nonce) -> tuple[Nonce, Bits]:
        return self._port().init(a)

    def produce_reply(self, challenge: int) -> int:
        return self._port().ask(challenge)

    def finish(self) -> Optional[Bits]:
        return self._port().finish()


@define(slots=True, kw_only=True)
class ReplayStrategy(AdversaryStrategy):
    """No relay: harvests (b, auth) from the prover on its own nonce a' before
    the verifier session, then presents them to the verifier."""

    kind: ClassVar[AdversaryKind] = AdversaryKind.REPLAY
    match_verifier_nonce: bool = False  # test hook: harvest on the verifier's own a
    own_nonce: Optional[Nonce] = None
    harvest: Optional[tuple[Nonce, Bits]] = None
    path: Optional[ProbePath] = None

    def wants_prover_session(self) -> bool:
        return True

    def prover_queries(self) -> Bits:
        return bytes(self.params.n)

    def _harvest(self, a_prime: Nonce) -> None:
        port = self._port()
        self.own_nonce = a_prime
        self.harvest = port.init(a_prime)
        probe = self.prover_queries()
        self.path = ProbePath(probe=probe, replies=port.probe(probe))
        port.close()

    def before_session(self) -> None:
        if not self.match_verifier_nonce:
            self._harvest(Nonce.generate(self.params, NonceRole.VERIFIER_A, self.rng))

    def produce_auth(self, a: Nonce) -> tuple[Nonce, Bits]:
        if self.harvest is None:
            self._harvest(a)
        assert self.harvest is not None
        return self.harvest

    def produce_reply(self, challenge: int) -> int:
        assert self.path is not None
        return self.path.reply(self.challenges, self._guess)

    def notes(self) -> dict[str, Any]:
        notes = self.path.notes() if self.path is not None else {}
        if self.own_nonce is not None and self.nonce_a is not None:
            notes["own_nonce_matched"] = self.own_nonce.bits == self.nonce_a.bits
        return notes


# ---------- baseline strategies ----------


@define(slots=True, kw_only=True)
class HkPreaskStrategy(AdversaryStrategy):
    """Probes a Hancke-Kuhn prover with all-zero challenges to learn register x."""

    kind: ClassVar[AdversaryKind] = AdversaryKind.HK_PREASK
    register_x: Optional[Bits] = None

    def wants_prover_session(self) -> bool:
        return True

    def prover_queries(self) -> Bits:
        return bytes(self.params.n)

    def produce_auth(self, a: Nonce) -> tuple[Nonce, Bits]:
        port = self._port()
        b, auth_bits = port.init(a)
        self.register_x = port.probe(self.prover_queries())
        return b, auth_bits

    def produce_reply(self, challenge: int) -> int:
        assert self.register_x is not None
        if challenge == 0:
            return self.register_x[self.round - 1]
        return self._guess()

    def notes(self) -> dict[str, Any]:
        return {"register_x": bits_to_str(self.register_x or b"")}


@define(slots=True, kw_only=True)
class BcGuessStrategy(AdversaryStrategy):
    """Brands-Chaum: pre-ask one challenge sequence or guess the signature.

    In challenge mode the adversary withholds the closing signature as soon as
    the verifier's challenges leave the pre-asked sequence.
    """

    kind: ClassVar[AdversaryKind] = AdversaryKind.BC_GUESS
    mode: BcGuessMode = BcGuessMode.AUTO
    nonce_b: Optional[Nonce] = None
    probe: Optional[Bits] = None
    signature: Optional[Bits] = None

    def __attrs_post_init__(self) -> None:
        self.mode = self.mode.resolve(self.params.n, self.params.m)

    def wants_prover_session(self) -> bool:
        return self.mode is BcGuessMode.CHALLENGE

    def prover_queries(self) -> Bits:
        if self.probe is None:
            self.probe = random_bits(self.rng, self.params.n)
        return self.probe

    def produce_auth(self, a: Nonce) -> tuple[Nonce, Bits]:
        if self.mode is BcGuessMode.CHALLENGE:
            port = self._port()
            self.nonce_b, auth_bits = port.init(a)
            port.probe(self.prover_queries())
            self.signature = port.finish()
            return self.nonce_b, auth_bits
        self.nonce_b = Nonce.generate(self.params, NonceRole.PROVER_B, self.rng)
        return self.nonce_b, b""

    def produce_reply(self, challenge: int) -> int:
        assert self.nonce_b is not None
        return bc_reply(self.nonce_b.bits, self.round, challenge)

    def finish(self) -> Optional[Bits]:
        if self.mode is BcGuessMode.CHALLENGE:
            return self.signature if self.challenges == self.probe else None
        return random_bits(self.rng, self.params.m)

    def notes(self) -> dict[str, Any]:
        notes: dict[str, Any] = {"mode": self.mode.value}
        if self.probe is not None:
            notes["probe"] = bits_to_str(self.probe)
        return notes


# ---------- factories ----------


def random_guess_strategy(
    params: SessionDimensions,
    rng: np.random.Generator,
    protocol: ProtocolKind = ProtocolKind.TREE,
) -> AdversaryStrategy:
    return RandomGuessStrategy(params=params, rng=rng, protocol=protocol)


def preask_strategy(
    params: SessionDimensions, rng: np.random.Generator, probe: Probe = ProbeChoice.ZEROS
) -> AdversaryStrategy:
    """A random probe choice draws a fresh probe for every execution."""
    if not isinstance(probe, ProbeChoice):
        probe = _resolve_probe(probe, params, rng)
    return PreaskStrategy(params=params, rng=rng, probe=probe)


def relay_strategy(
    params: SessionDimensions,
    rng: np.random.Generator,
    extra_distance: Optional[float] = None,
) -> AdversaryStrategy:
    if extra_distance is not None and extra_distance < 0:
        raise AdversaryError(f"extra_distance must be non-negative, got {extra_distance}")
    return RelayStrategy(params=params, rng=rng, extra_distance=extra_distance)


def replay_strategy(
    params: SessionDimensions, rng: np.random.Generator, match_verifier_nonce: bool = False
) -> AdversaryStrategy:
    return ReplayStrategy(params=params, rng=rng, match_verifier_nonce=match_verifier_nonce)


def hk_preask_strategy(params: SessionDimensions, rng: np.random.Generator) -> AdversaryStrategy:
    return HkPreaskStrategy(params=params, rng=rng)


def bc_guess_strategy(
    params: SessionDimensions,
    rng: np.random.Generator,
    mode: BcGuessMode = BcGuessMode.AUTO,
    probe: Optional[Bits] = None,
) -> AdversaryStrategy:
    if probe is not None:
        probe = _resolve_probe(probe, params, rng)
    return BcGuessStrategy(params=params, rng=rng, mode=mode, probe=probe)


def build_strategy(
    adversary: AdversaryKind,
    deployment: Deployment,
    rng: np.random.Generator,
    probe: Probe = ProbeChoice.ZEROS,
    bc_mode: BcGuessMode = BcGuessMode.AUTO,
    extra_distance: Optional[float] = None,
) -> Optional[AdversaryStrategy]:
    """Strategy for one execution; None stands for the legitimate prover."""
    params = deployment.params
    match adversary:
        case AdversaryKind.NONE:
            return None
        case AdversaryKind.RANDOM:
            return random_guess_strategy(params, rng, deployment.protocol)
        case AdversaryKind.PREASK:
            return preask_strategy(params, rng, probe)
        case AdversaryKind.RELAY:
            return relay_strategy(params, rng, extra_distance)
        case AdversaryKind.REPLAY:
            return replay_strategy(params, rng)
        case AdversaryKind.HK_PREASK:
            return hk_preask_strategy(params, rng)
        case AdversaryKind.BC_GUESS:
            return bc_guess_strategy(params, rng, bc_mode)
    raise AdversaryError(f"unknown adversary {adversary!r}")


# ---------- harness ----------


def execute(
    deployment: Deployment,
    strategy: Optional[AdversaryStrategy],
    rng: np.random.Generator,
    channel: Optional[ChannelConfig] = None,
    budget: int = 1,
) -> ExecutionResult:
    """One verifier session against `strategy` (the legitimate prover if None)."""
    channel = channel or ChannelConfig()
    if strategy is None:
        return run_execution(deployment.verifier(rng, channel), deployment.prover(rng))

    if strategy.extra_distance is not None:
        channel = evolve(channel, extra_distance=strategy.extra_distance)
    port = ProverPort(lambda: deployment.prover(rng), budget=budget)
    if strategy.wants_prover_session():
        strategy.port = port
    strategy.before_session()

    verifier = deployment.verifier(rng, channel)
    result = run_execution(verifier, strategy)
    transcript = result.transcript
    reused = (transcript.nonce_a.bits, transcript.nonce_b.bits) in port.harvested
    notes = {"prover_sessions": port.sessions_used, **strategy.notes()}
    return evolve(result, nonce_reuse=reused, notes=notes)
