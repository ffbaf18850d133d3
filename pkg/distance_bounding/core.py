"""Domain types and parameter validation shared by every other module.

Bit strings are immutable ``bytes`` objects whose elements are 0 or 1, most
significant bit first. They index, slice, compare and hash like any other
``bytes`` value, which keeps every value object below frozen and shareable
across trial workers.
"""

import math
from enum import Enum
from typing import Any, Optional, Protocol

import numpy as np
from attrs import define, field
from attrs.validators import ge, gt, in_, instance_of, optional

import common.constants as constants
from common.observability import build_logger
from distance_bounding.errors import ParamsError

logger = build_logger("core")

Bits = bytes


# ---------- bit strings ----------


def is_bit_string(value: Any) -> bool:
    return isinstance(value, bytes) and not value.translate(None, b"\x00\x01")


def bits_from_str(text: str) -> Bits:
    if text and set(text) - {"0", "1"}:
        raise ValueError(f"not a bit string: {text!r}")
    return bytes(1 if char == "1" else 0 for char in text)


def bits_to_str(bits: Bits) -> str:
    return "".join("1" if bit else "0" for bit in bits)


def bits_to_int(bits: Bits) -> int:
    value = 0
    for bit in bits:
        value = (value << 1) | bit
    return value


def int_to_bits(value: int, width: int) -> Bits:
    if value < 0 or value >> width:
        raise ValueError(f"{value} does not fit in {width} bits")
    return bytes((value >> shift) & 1 for shift in range(width - 1, -1, -1))


def pack_bits(bits: Bits) -> bytes:
    """MSB-first packing, zero padded to the byte boundary."""
    return np.packbits(np.frombuffer(bits, dtype=np.uint8)).tobytes()


def unpack_bits(data: bytes, length: int) -> Bits:
    if length > 8 * len(data):
        raise ValueError(f"{len(data)} bytes cannot hold {length} bits")
    return np.unpackbits(np.frombuffer(data, dtype=np.uint8))[:length].tobytes()


def random_bits(rng: np.random.Generator, length: int) -> Bits:
    return rng.integers(0, 2, size=length, dtype=np.uint8).tobytes()


def _bit_string(instance, attribute, value) -> None:
    if not is_bit_string(value):
        raise ValueError(f"{attribute.name} must be a bytes bit string of 0/1 values")


def key_length(n: int) -> int:
    """Key bits needed for a full binary tree of depth n + 1, root excluded."""
    return 2 ** (n + 2) - 2


def leaf_count(n: int) -> int:
    return 2 ** (n + 1)


# ---------- parameters ----------


class SessionDimensions(Protocol):
    """What a session needs to know about its protocol: rounds, authentication
    bits, nonce lengths and key length."""

    @property
    def n(self) -> int: ...

    @property
    def m(self) -> int: ...

    @property
    def l_a(self) -> int: ...

    @property
    def l_b(self) -> int: ...

    @property
    def l_k(self) -> int: ...


def _positive_int(instance, attribute, value) -> None:
    if isinstance(value, bool) or not isinstance(value, int) or value < 1:
        raise ParamsError(f"{attribute.name} must be a positive integer, got {value!r}")


@define(slots=True, frozen=True, kw_only=True)
class ProtocolParams:
    """Protocol dimensions: n fast rounds, m authentication bits, nonce lengths
    l_a and l_b, and the execution budget N the adversary may use."""

    n: int = field(validator=_positive_int)
    m: int = field(validator=_positive_int)
    l_a: int = field(validator=_positive_int)
    l_b: int = field(validator=_positive_int)
    executions: int = field(default=constants.DEFAULT_EXECUTIONS, validator=_positive_int)

    def __attrs_post_init__(self) -> None:
        if self.m > leaf_count(self.n):
            raise ParamsError(
                f"m={self.m} exceeds the {leaf_count(self.n)} leaves of a depth-{self.n + 1} tree"
            )
        if self.l_a != self.m + self.n:
            raise ParamsError(f"l_a must equal m + n = {self.m + self.n}, got {self.l_a}")
        if self.l_b < self.n:
            raise ParamsError(f"l_b must be at least n = {self.n}, got {self.l_b}")

    @property
    def l_k(self) -> int:
        return key_length(self.n)

    @property
    def key_leakage_warning(self) -> bool:
        return (self.m + self.n) * constants.KEY_LEAKAGE_RATIO > self.l_k


def validate_params(
    n: Any, m: Any, l_a: Any, l_b: Any, executions: Any = constants.DEFAULT_EXECUTIONS
) -> ProtocolParams:
    """Check a raw parameter tuple; every tuple yields params or a ParamsError."""
    params = ProtocolParams(n=n, m=m, l_a=l_a, l_b=l_b, executions=executions)
    if params.key_leakage_warning:
        logger.warning(
            "Key-leakage regime: m + n is not much smaller than l_k",
            n=params.n,
            m=params.m,
            l_k=params.l_k,
        )
    return params


def default_params(
    n: int,
    m: Optional[int] = None,
    executions: int = constants.DEFAULT_EXECUTIONS,
    l_b: Optional[int] = None,
) -> ProtocolParams:
    """Apply the conventions m = n, l_a = m + n and l_b = n."""
    m = n if m is None else m
    try:
        l_a = m + n
    except TypeError as error:
        raise ParamsError(f"n and m must be positive integers, got {n!r} and {m!r}") from error
    return validate_params(n=n, m=m, l_a=l_a, l_b=n if l_b is None else l_b, executions=executions)


# ---------- experiment selectors ----------


class ProtocolKind(str, Enum):
    TREE = "tree"
    HK = "hk"
    BC = "bc"


class AdversaryKind(str, Enum):
    NONE = "none"
    RANDOM = "random"
    PREASK = "preask"
    RELAY = "relay"
    REPLAY = "replay"
    HK_PREASK = "hk-preask"
    BC_GUESS = "bc-guess"


class Metric(str, Enum):
    ACCEPTANCE = "acceptance"
    NONCE_REUSE = "nonce-reuse"


class BcGuessMode(str, Enum):
    CHALLENGE = "challenge"
    SIGNATURE = "signature"
    AUTO = "auto"

    def resolve(self, n: int, m: int) -> "BcGuessMode":
        """Auto picks whichever attack has the larger success probability."""
        if self is not BcGuessMode.AUTO:
            return self
        return BcGuessMode.CHALLENGE if n <= m else BcGuessMode.SIGNATURE


# ---------- key material and messages ----------


@define(slots=True, frozen=True)
class Key:
    bits: Bits = field(validator=_bit_string)

    @classmethod
    def generate(cls, params: SessionDimensions, rng: np.random.Generator) -> "Key":
        return cls(random_bits(rng, params.l_k))

    def __len__(self) -> int:
        return len(self.bits)


class NonceRole(str, Enum):
    VERIFIER_A = "nonce_a"
    PROVER_B = "nonce_b"


def nonce_length(params: SessionDimensions, role: NonceRole) -> int:
    return params.l_a if role is NonceRole.VERIFIER_A else params.l_b


@define(slots=True, frozen=True)
class Nonce:
    bits: Bits = field(validator=_bit_string)
    role: NonceRole = field(validator=instance_of(NonceRole))

    @classmethod
    def generate(
        cls, params: SessionDimensions, role: NonceRole, rng: np.random.Generator
    ) -> "Nonce":
        return cls(random_bits(rng, nonce_length(params, role)), role)

    def matches(self, params: SessionDimensions) -> bool:
        return len(self.bits) == nonce_length(params, self.role)


class Outcome(str, Enum):
    ACCEPT = "Accept"
    REJECT = "Reject"
    INCOMPLETE = "Incomplete"


@define(slots=True, frozen=True)
class FastRound:
    challenge: int = field(validator=in_((0, 1)))
    reply: Optional[int] = field(validator=optional(in_((0, 1))))  # None: nothing arrived
    rtt: float = field(validator=ge(0.0))


@define(slots=True, frozen=True, kw_only=True)
class Transcript:
    """Message record of one execution, as seen by the verifier."""

    n: int = field(validator=gt(0))
    nonce_a: Nonce
    nonce_b: Nonce
    auth_bits: Bits = field(validator=_bit_string)
    rounds: tuple[FastRound, ...] = field(converter=tuple)
    outcome: Outcome = field(validator=instance_of(Outcome))
    closing: Optional[Bits] = None  # Brands-Chaum signature
    early: bool = False

    def __attrs_post_init__(self) -> None:
        if len(self.rounds) > self.n:
            raise ValueError(f"{len(self.rounds)} rounds recorded for n={self.n}")
        if self.outcome is Outcome.ACCEPT and len(self.rounds) < self.n and not self.early:
            raise ValueError("Accept with missing rounds requires an early decision")

    @property
    def rounds_completed(self) -> int:
        return len(self.rounds)

    @property
    def challenges(self) -> Bits:
        return bytes(fast_round.challenge for fast_round in self.rounds)

    def messages(self) -> list[dict[str, Any]]:
        """Trace objects {type, bits, time}; the slow phase is untimed."""
        messages = [
            {"type": "nonce_a", "bits": bits_to_str(self.nonce_a.bits), "time": 0.0},
            {"type": "nonce_b", "bits": bits_to_str(self.nonce_b.bits), "time": 0.0},
            {"type": "auth", "bits": bits_to_str(self.auth_bits), "time": 0.0},
        ]
        clock = 0.0
        for fast_round in self.rounds:
            messages.append(
                {"type": "challenge", "bits": str(fast_round.challenge), "time": clock}
            )
            clock += fast_round.rtt
            reply = "" if fast_round.reply is None else str(fast_round.reply)
            messages.append({"type": "reply", "bits": reply, "time": clock})
        if self.closing is not None:
            messages.append({"type": "signature", "bits": bits_to_str(self.closing), "time": clock})
        return messages


# ---------- reports ----------


@define(slots=True, frozen=True, kw_only=True)
class CollisionStats:
    """Within-batch collisions of the verifier nonce a."""

    batches: int = field(validator=gt(0))
    collisions: int = field(validator=ge(0))
    exact: float = field(validator=[ge(0.0)])
    bound: float = field(validator=[ge(0.0)])

    @property
    def frequency(self) -> float:
        return self.collisions / self.batches

    @property
    def std_error(self) -> float:
        return math.sqrt(self.frequency * (1.0 - self.frequency) / self.batches)


@define(slots=True, frozen=True, kw_only=True)
class TrialReport:
    protocol: str
    adversary: str
    n: int
    m: int
    trials: int = field(validator=gt(0))
    successes: int = field(validator=ge(0))
    predicted: float = field(validator=[ge(0.0)])
    interval: tuple[float, float]
    collisions: Optional[CollisionStats] = None

    def __attrs_post_init__(self) -> None:
        if self.successes > self.trials:
            raise ValueError(f"{self.successes} successes out of {self.trials} trials")

    @property
    def estimate(self) -> float:
        return self.successes / self.trials

    @property
    def std_error(self) -> float:
        estimate = self.estimate
        return math.sqrt(estimate * (1.0 - estimate) / self.trials)

    @property
    def z_score(self) -> float:
        """Distance from the prediction in units of the predicted binomial sigma."""
        deviation = self.estimate - self.predicted
        if 0.0 < self.predicted < 1.0:
            sigma = math.sqrt(self.predicted * (1.0 - self.predicted) / self.trials)
            return deviation / sigma
        if deviation == 0.0:
            return 0.0
        return math.copysign(math.inf, deviation)

    def as_row(self) -> dict[str, Any]:
        row: dict[str, Any] = {
            "protocol": self.protocol,
            "adversary": self.adversary,
            "n": self.n,
            "m": self.m,
            "trials": self.trials,
            "successes": self.successes,
            "estimate": self.estimate,
            "std_error": self.std_error,
            "predicted": self.predicted,
            "z": self.z_score,
        }
        if self.collisions is not None:
            row["collisions"] = self.collisions.collisions
            row["collision_frequency"] = self.collisions.frequency
            row["birthday_exact"] = self.collisions.exact
            row["birthday_bound"] = self.collisions.bound
        return row
