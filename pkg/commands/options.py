"""Flag values turned into domain objects. Every failure is a ValueError."""

import argparse

import common.constants as constants
from distance_bounding.adversary import Probe, ProbeChoice
from distance_bounding.channel import ChannelConfig
from distance_bounding.core import ProtocolParams, bits_from_str, default_params


def channel_config(args: argparse.Namespace) -> ChannelConfig:
    speed = args.speed
    if speed is None:
        speed = constants.SPEED_OF_LIGHT_SI if args.si else constants.NATURAL_SPEED
    return ChannelConfig(
        distance_vp=args.distance,
        extra_distance=args.extra_distance,
        propagation_speed=speed,
        processing_delay=args.proc_delay,
        epsilon=args.epsilon,
        jitter=args.jitter,
    )


def probe(text: str) -> Probe:
    """zeros, ones, random, or an explicit challenge sequence such as 0110."""
    try:
        return ProbeChoice(text)
    except ValueError:
        return bits_from_str(text)


def protocol_params(args: argparse.Namespace) -> ProtocolParams:
    return default_params(args.n, args.m, getattr(args, "executions", 1))
