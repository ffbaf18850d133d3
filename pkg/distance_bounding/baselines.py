"""Hancke-Kuhn and Brands-Chaum reference protocols.

Both reuse the verifier state machine, the channel and the keyed expansion of
the tree protocol, so relay rejection and key material behave identically.

Brands-Chaum is reduced to what the false-acceptance comparison needs: the
prover announces n key-independent bits b, replies b_i xor q_i in the fast
phase and closes with an m-bit keyed signature over (a, b, q^n, r^n).
"""

from typing import ClassVar, Optional

import numpy as np
from attrs import define, field

import common.constants as constants
from distance_bounding.channel import Channel, ChannelConfig
from distance_bounding.core import (
    Bits,
    Key,
    Nonce,
    NonceRole,
    ProtocolParams,
    key_length,
    random_bits,
)
from distance_bounding.errors import ParamsError, ProtocolStateError
from distance_bounding.expansion import expand
from distance_bounding.protocol import (
    Claimant,
    ExecutionResult,
    VerifierBase,
    Verdict,
    run_execution,
)
from distance_bounding.treegen import TreeMode

# ---------- Hancke-Kuhn ----------


@define(slots=True, frozen=True)
class HkRegisters:
    x: Bits
    y: Bits

    def __attrs_post_init__(self) -> None:
        if len(self.x) != len(self.y):
            raise ValueError(f"registers differ in length: {len(self.x)} != {len(self.y)}")

    @property
    def n(self) -> int:
        return len(self.x)

    @classmethod
    def derive(cls, params: ProtocolParams, key: Key, a: Nonce, b: Nonce) -> "HkRegisters":
        bits = expand(key.bits, constants.HK_DOMAIN, (a.bits, b.bits), 2 * params.n)
        return cls(bits[: params.n], bits[params.n :])

    @classmethod
    def uniform(cls, n: int, rng: np.random.Generator) -> "HkRegisters":
        bits = random_bits(rng, 2 * n)
        return cls(bits[:n], bits[n:])


def hk_reply(regs: HkRegisters, i: int, q_i: int) -> int:
    """x_i on challenge 0, y_i on challenge 1; earlier challenges play no part."""
    if not 1 <= i <= regs.n:
        raise ProtocolStateError(f"round {i} outside 1..{regs.n}")
    return regs.x[i - 1] if q_i == 0 else regs.y[i - 1]


@define(slots=True)
class RegisterSource:
    params: ProtocolParams
    mode: TreeMode
    key: Optional[Key] = None
    rng: Optional[np.random.Generator] = None
    _registers: dict[tuple[Bits, Bits], HkRegisters] = field(factory=dict, init=False)

    @classmethod
    def create(
        cls, params: ProtocolParams, mode: TreeMode, rng: np.random.Generator
    ) -> "RegisterSource":
        key = Key.generate(params, rng) if mode is TreeMode.PRF else None
        return cls(params=params, mode=mode, key=key, rng=rng)

    def registers_for(self, a: Nonce, b: Nonce) -> HkRegisters:
        pair = (a.bits, b.bits)
        registers = self._registers.get(pair)
        if registers is None:
            if self.mode is TreeMode.PRF:
                assert self.key is not None
                registers = HkRegisters.derive(self.params, self.key, a, b)
            else:
                assert self.rng is not None
                registers = HkRegisters.uniform(self.params.n, self.rng)
            self._registers[pair] = registers
        return registers


@define(slots=True, kw_only=True)
class HkProverSession:
    params: ProtocolParams
    secret: RegisterSource
    rng: np.random.Generator
    relayed: bool = False
    registers: Optional[HkRegisters] = None
    _round: int = field(default=0, init=False)

    def respond_init(self, a: Nonce) -> tuple[Nonce, Bits]:
        if self.registers is not None:
            raise ProtocolStateError("Hancke-Kuhn prover already initialised")
        b = Nonce.generate(self.params, NonceRole.PROVER_B, self.rng)
        self.registers = self.secret.registers_for(a, b)
        return b, b""

    def begin_fast_phase(self) -> None:
        pass

    def respond(self, challenge: int) -> int:
        if self.registers is None:
            raise ProtocolStateError("Hancke-Kuhn prover has no registers yet")
        self._round += 1
        return hk_reply(self.registers, self._round, challenge)

    def finish(self) -> Optional[Bits]:
        return None


@define(slots=True, kw_only=True)
class HkVerifierSession(VerifierBase):
    secret: RegisterSource
    registers: Optional[HkRegisters] = None

    def derive_secret(self, a: Nonce, b: Nonce) -> None:
        self.registers = self.secret.registers_for(a, b)

    def expected_reply(self, challenges: Bits) -> int:
        assert self.registers is not None
        return hk_reply(self.registers, len(challenges), challenges[-1])

    def auth_valid(self) -> bool:
        return self.auth_bits == b""


def hk_run(
    params: ProtocolParams,
    secret: RegisterSource,
    rng: np.random.Generator,
    claimant: Optional[Claimant] = None,
    channel: Optional[ChannelConfig] = None,
) -> ExecutionResult:
    verifier = HkVerifierSession(
        params=params, secret=secret, rng=rng, channel=Channel(channel or ChannelConfig(), rng)
    )
    claimant = claimant or HkProverSession(params=params, secret=secret, rng=rng)
    return run_execution(verifier, claimant)


# ---------- Brands-Chaum ----------


def _at_least_one(instance, attribute, value) -> None:
    if isinstance(value, bool) or not isinstance(value, int) or value < 1:
        raise ParamsError(f"{attribute.name} must be a positive integer, got {value!r}")


@define(slots=True, frozen=True, kw_only=True)
class BcParams:
    """n fast rounds and an m-bit closing signature; m is a free parameter."""

    n: int = field(validator=_at_least_one)
    m: int = field(validator=_at_least_one)
    executions: int = field(default=constants.DEFAULT_EXECUTIONS, validator=_at_least_one)

    @classmethod
    def from_protocol(cls, params: ProtocolParams) -> "BcParams":
        return cls(n=params.n, m=params.m, executions=params.executions)

    @property
    def l_a(self) -> int:
        return self.n

    @property
    def l_b(self) -> int:
        return self.n

    @property
    def l_k(self) -> int:
        return key_length(self.n)


@define(slots=True)
class SignatureSource:
    """Keyed m-bit signature over a whole transcript; a random oracle in ideal mode."""

    params: BcParams
    mode: TreeMode
    key: Optional[Key] = None
    rng: Optional[np.random.Generator] = None
    _signatures: dict[tuple[Bits, ...], Bits] = field(factory=dict, init=False)

    @classmethod
    def create(
        cls, params: BcParams, mode: TreeMode, rng: np.random.Generator
    ) -> "SignatureSource":
        key = Key.generate(params, rng) if mode is TreeMode.PRF else None
        return cls(params=params, mode=mode, key=key, rng=rng)

    def sign(self, a: Bits, b: Bits, challenges: Bits, replies: Bits) -> Bits:
        message = (a, b, challenges, replies)
        if self.mode is TreeMode.PRF:
            assert self.key is not None
            return expand(self.key.bits, constants.BC_DOMAIN, message, self.params.m)
        signature = self._signatures.get(message)
        if signature is None:
            assert self.rng is not None
            signature = random_bits(self.rng, self.params.m)
            self._signatures[message] = signature
        return signature


def bc_reply(b: Bits, i: int, q_i: int) -> int:
    return b[i - 1] ^ q_i


@define(slots=True, kw_only=True)
class BcProverSession:
    params: BcParams
    secret: SignatureSource
    rng: np.random.Generator
    relayed: bool = False
    nonce_a: Optional[Nonce] = None
    nonce_b: Optional[Nonce] = None
    _challenges: bytearray = field(factory=bytearray, init=False)
    _replies: bytearray = field(factory=bytearray, init=False)

    def respond_init(self, a: Nonce) -> tuple[Nonce, Bits]:
        if self.nonce_b is not None:
            raise ProtocolStateError("Brands-Chaum prover already initialised")
        self.nonce_a = a
        self.nonce_b = Nonce.generate(self.params, NonceRole.PROVER_B, self.rng)
        return self.nonce_b, b""

    def begin_fast_phase(self) -> None:
        pass

    def respond(self, challenge: int) -> int:
        if self.nonce_b is None:
            raise ProtocolStateError("Brands-Chaum prover has not committed yet")
        self._challenges.append(challenge)
        answer = bc_reply(self.nonce_b.bits, len(self._challenges), challenge)
        self._replies.append(answer)
        return answer

    def finish(self) -> Optional[Bits]:
        if self.nonce_a is None or self.nonce_b is None:
            raise ProtocolStateError("Brands-Chaum prover cannot sign before the slow phase")
        return self.secret.sign(
            self.nonce_a.bits, self.nonce_b.bits, bytes(self._challenges), bytes(self._replies)
        )


@define(slots=True, kw_only=True)
class BcVerifierSession(VerifierBase):
    secret: SignatureSource
    closing_authenticates: ClassVar[bool] = True

    def derive_secret(self, a: Nonce, b: Nonce) -> None:
        pass

    def expected_reply(self, challenges: Bits) -> int:
        assert self.nonce_b is not None
        return bc_reply(self.nonce_b.bits, len(challenges), challenges[-1])

    def auth_valid(self) -> bool:
        return self.auth_bits == b""

    def closing_valid(self) -> bool:
        if self.closing is None or self.nonce_a is None or self.nonce_b is None:
            return False
        replies = bytes(fast_round.reply or 0 for fast_round in self.rounds)
        expected = self.secret.sign(self.nonce_a.bits, self.nonce_b.bits, self.challenges, replies)
        return self.closing == expected


def bc_run(
    params: BcParams,
    secret: SignatureSource,
    rng: np.random.Generator,
    claimant: Optional[Claimant] = None,
    channel: Optional[ChannelConfig] = None,
) -> Verdict:
    """One Brands-Chaum execution against the legitimate prover or `claimant`."""
    return bc_execution(params, secret, rng, claimant, channel).verdict


def bc_execution(
    params: BcParams,
    secret: SignatureSource,
    rng: np.random.Generator,
    claimant: Optional[Claimant] = None,
    channel: Optional[ChannelConfig] = None,
) -> ExecutionResult:
    verifier = BcVerifierSession(
        params=params, secret=secret, rng=rng, channel=Channel(channel or ChannelConfig(), rng)
    )
    claimant = claimant or BcProverSession(params=params, secret=secret, rng=rng)
    return run_execution(verifier, claimant)
