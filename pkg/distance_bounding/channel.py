from typing import Callable, Optional

import numpy as np
from attrs import define, field
from attrs.validators import ge, gt

import common.constants as constants
from distance_bounding.errors import ChannelError


@define(slots=True, frozen=True, kw_only=True)
class ChannelConfig:
    """1-D timing geometry. Distances in length-units, speed in length-units per
    time-unit (c = 1 in natural units)."""

    distance_vp: float = field(
        default=constants.DEFAULT_DISTANCE, converter=float, validator=ge(0.0)
    )
    extra_distance: float = field(
        default=constants.DEFAULT_EXTRA_DISTANCE, converter=float, validator=ge(0.0)
    )
    propagation_speed: float = field(
        default=constants.NATURAL_SPEED, converter=float, validator=gt(0.0)
    )
    processing_delay: float = field(
        default=constants.DEFAULT_PROCESSING_DELAY, converter=float, validator=ge(0.0)
    )
    epsilon: float = field(default=constants.DEFAULT_EPSILON, converter=float, validator=ge(0.0))
    jitter: float = field(default=0.0, converter=float, validator=ge(0.0))


def _base_time(config: ChannelConfig) -> float:
    return 2.0 * config.distance_vp / config.propagation_speed + config.processing_delay


def rtt(config: ChannelConfig, relayed: bool = False) -> float:
    """Round-trip time of one fast-phase round; relays add the detour to the prover."""
    base = _base_time(config)
    if relayed:
        return base + 2.0 * config.extra_distance / config.propagation_speed
    return base


def threshold(config: ChannelConfig) -> float:
    return _base_time(config) + config.epsilon


def relay_passes(config: ChannelConfig) -> bool:
    return rtt(config, relayed=True) <= threshold(config)


@define(slots=True)
class Channel:
    """Carries one challenge and its reply, and measures the round trip.

    Optional jitter, uniform in [0, jitter], exists for sensitivity runs only.
    A responder that raises ChannelError has no reply on the wire; the round
    then records no answer and an infinite round trip.
    """

    config: ChannelConfig = field(factory=ChannelConfig)
    rng: Optional[np.random.Generator] = None

    def exchange(
        self, challenge: int, responder: Callable[[int], int], relayed: bool = False
    ) -> tuple[Optional[int], float]:
        try:
            answer = responder(challenge)
        except ChannelError:
            return None, float("inf")
        measured = rtt(self.config, relayed)
        if self.config.jitter and self.rng is not None:
            measured += float(self.rng.uniform(0.0, self.config.jitter))
        return answer, measured

    @property
    def threshold(self) -> float:
        return threshold(self.config)
