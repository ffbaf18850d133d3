"""Decision tree construction and lookups.

Node bits are stored breadth-first, left to right, root excluded: level i
(1 <= i <= n + 1) occupies indices [2^i - 2, 2^(i+1) - 2). Levels 1..n hold the
fast-phase replies, level n + 1 holds the authentication leaves.
"""

from enum import Enum
from typing import Optional

import numpy as np
from attrs import define, field
from attrs.validators import gt

import common.constants as constants
from distance_bounding.core import (
    Bits,
    Key,
    Nonce,
    ProtocolParams,
    bits_to_int,
    is_bit_string,
    key_length,
    leaf_count,
    pack_bits,
    random_bits,
    unpack_bits,
)
from distance_bounding.errors import TreeError
from distance_bounding.expansion import expand


class TreeMode(str, Enum):
    PRF = "prf"
    IDEAL_UNIFORM = "ideal"


def level_offset(level: int) -> int:
    return 2**level - 2


@define(slots=True, frozen=True)
class DecisionTree:
    n: int = field(validator=gt(0))
    node_bits: Bits = field()

    def __attrs_post_init__(self) -> None:
        if not is_bit_string(self.node_bits):
            raise TreeError("node_bits must be a bytes bit string of 0/1 values")
        if len(self.node_bits) != key_length(self.n):
            raise TreeError(
                f"a depth-{self.n + 1} tree has {key_length(self.n)} nodes, "
                f"got {len(self.node_bits)}"
            )

    @property
    def depth(self) -> int:
        return self.n + 1

    def level(self, level: int) -> Bits:
        if not 1 <= level <= self.depth:
            raise TreeError(f"level {level} outside 1..{self.depth}")
        start = level_offset(level)
        return self.node_bits[start : start + 2**level]

    @property
    def leaves(self) -> Bits:
        return self.level(self.depth)


def uniform_tree(n: int, rng: np.random.Generator) -> DecisionTree:
    return DecisionTree(n, random_bits(rng, key_length(n)))


def build_tree(
    params: ProtocolParams,
    key: Optional[Key],
    a: Nonce,
    b: Nonce,
    mode: TreeMode = TreeMode.PRF,
    rng: Optional[np.random.Generator] = None,
) -> DecisionTree:
    """Tree τ(a, b, k).

    Prf mode expands (k, a, b) deterministically. IdealUniform mode ignores the
    inputs and draws every node as an independent fair coin from `rng`.
    """
    if not a.matches(params) or not b.matches(params):
        raise TreeError(
            f"nonce lengths ({len(a.bits)}, {len(b.bits)}) do not match "
            f"l_a={params.l_a}, l_b={params.l_b}"
        )
    if mode is TreeMode.IDEAL_UNIFORM:
        if rng is None:
            raise TreeError("IdealUniform mode needs a random source")
        return uniform_tree(params.n, rng)
    if key is None or len(key) != params.l_k:
        raise TreeError(f"Prf mode needs a key of exactly l_k={params.l_k} bits")
    bits = expand(key.bits, constants.TREE_DOMAIN, (a.bits, b.bits), params.l_k)
    return DecisionTree(params.n, bits)


def reply(tree: DecisionTree, challenges: Bits) -> int:
    """r_i(q^i): the node reached from the root along edges q_1..q_i."""
    level = len(challenges)
    if not 1 <= level <= tree.n:
        raise TreeError(f"challenge prefix length {level} outside 1..{tree.n}")
    return tree.node_bits[level_offset(level) + bits_to_int(challenges)]


def reply_path(tree: DecisionTree, challenges: Bits) -> Bits:
    return bytes(reply(tree, challenges[:level]) for level in range(1, len(challenges) + 1))


def auth_string(tree: DecisionTree, m: int) -> Bits:
    """The m leftmost leaves, left to right."""
    if not 1 <= m <= leaf_count(tree.n):
        raise TreeError(f"m={m} outside 1..{leaf_count(tree.n)}")
    return tree.leaves[:m]


def serialized_size(n: int) -> int:
    return -(-key_length(n) // 8)


def serialize_tree(tree: DecisionTree) -> bytes:
    return pack_bits(tree.node_bits)


def deserialize_tree(data: bytes, n: int) -> DecisionTree:
    if len(data) != serialized_size(n):
        raise TreeError(
            f"a depth-{n + 1} tree serializes to {serialized_size(n)} bytes, got {len(data)}"
        )
    padding = 8 * len(data) - key_length(n)
    if padding and data[-1] & ((1 << padding) - 1):
        raise TreeError("non-zero padding bits")
    return DecisionTree(n, unpack_bits(data, key_length(n)))


@define(slots=True)
class TreeSource:
    """Shared secret of a prover/verifier pair, seen as a source of trees.

    In IdealUniform mode the tree is a lazily sampled random function of the
    nonce pair: the same (a, b) always yields the same tree.
    """

    params: ProtocolParams
    mode: TreeMode
    key: Optional[Key] = None
    rng: Optional[np.random.Generator] = None
    _trees: dict[tuple[Bits, Bits], DecisionTree] = field(factory=dict, init=False)

    @classmethod
    def prf(cls, params: ProtocolParams, key: Key) -> "TreeSource":
        return cls(params=params, mode=TreeMode.PRF, key=key)

    @classmethod
    def ideal(cls, params: ProtocolParams, rng: np.random.Generator) -> "TreeSource":
        return cls(params=params, mode=TreeMode.IDEAL_UNIFORM, rng=rng)

    @classmethod
    def create(
        cls, params: ProtocolParams, mode: TreeMode, rng: np.random.Generator
    ) -> "TreeSource":
        if mode is TreeMode.PRF:
            return cls.prf(params, Key.generate(params, rng))
        return cls.ideal(params, rng)

    def tree_for(self, a: Nonce, b: Nonce) -> DecisionTree:
        pair = (a.bits, b.bits)
        tree = self._trees.get(pair)
        if tree is None:
            tree = build_tree(self.params, self.key, a, b, self.mode, self.rng)
            self._trees[pair] = tree
        return tree
