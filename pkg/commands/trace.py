import argparse
from typing import Any

import numpy as np

import common.constants as constants
from commands import options
from commands.formatting import to_json
from common.observability import build_logger
from common.run_context import RunContext
from distance_bounding.adversary import Deployment, build_strategy, execute
from distance_bounding.baselines import RegisterSource
from distance_bounding.channel import threshold
from distance_bounding.core import AdversaryKind, BcGuessMode, ProtocolKind, bits_to_str
from distance_bounding.errors import ExperimentError
from distance_bounding.montecarlo import COMPATIBLE_PROTOCOLS
from distance_bounding.treegen import TreeMode, TreeSource, serialize_tree

logger = build_logger("trace")


def run_trace(args: argparse.Namespace) -> dict[str, Any]:
    """One execution, seeded, with everything the verifier saw."""
    protocol, adversary = ProtocolKind(args.protocol), AdversaryKind(args.adversary)
    if protocol not in COMPATIBLE_PROTOCOLS[adversary]:
        raise ExperimentError(
            f"adversary {adversary.value} does not apply to protocol {protocol.value}"
        )
    params = options.protocol_params(args)
    channel = options.channel_config(args)
    rng = np.random.default_rng(args.seed)
    deployment = Deployment.create(protocol, params, TreeMode(args.mode), rng)
    strategy = build_strategy(
        adversary,
        deployment,
        rng,
        probe=options.probe(args.probe),
        bc_mode=BcGuessMode(args.bc_mode),
    )
    result = execute(deployment, strategy, rng, channel)
    transcript = result.transcript
    dimensions = deployment.params

    trace: dict[str, Any] = {
        "protocol": protocol.value,
        "adversary": adversary.value,
        "mode": args.mode,
        "seed": args.seed,
        "params": {
            "n": dimensions.n,
            "m": dimensions.m,
            "l_a": dimensions.l_a,
            "l_b": dimensions.l_b,
            "l_k": dimensions.l_k,
        },
        "messages": transcript.messages(),
    }
    secret = deployment.secret
    if isinstance(secret, TreeSource):
        tree = secret.tree_for(transcript.nonce_a, transcript.nonce_b)
        trace["tree"] = serialize_tree(tree).hex()
        trace["tree_bits"] = len(tree.node_bits)
    elif isinstance(secret, RegisterSource):
        registers = secret.registers_for(transcript.nonce_a, transcript.nonce_b)
        trace["registers"] = {"x": bits_to_str(registers.x), "y": bits_to_str(registers.y)}
    if result.notes:
        trace["adversary_notes"] = dict(result.notes)
    trace["round_times"] = [fast_round.rtt for fast_round in transcript.rounds]
    trace["threshold"] = threshold(channel)
    trace["verdict"] = result.verdict.label
    return trace


def render_text(trace: dict[str, Any]) -> str:
    lines = []
    for key, value in trace.items():
        if key == "messages":
            lines.extend(
                f"{message['type']}: {message['bits']} @ {message['time']}" for message in value
            )
        elif isinstance(value, dict):
            lines.append(f"{key}: " + " ".join(f"{k}={v}" for k, v in value.items()))
        elif isinstance(value, list):
            lines.append(f"{key}: " + " ".join(str(item) for item in value))
        else:
            lines.append(f"{key}: {value}")
    return "\n".join(lines) + "\n"


def handler(args: argparse.Namespace) -> int:
    context = RunContext.resolve("trace", args.output_dir)
    try:
        trace = run_trace(args)
    except ValueError as e:
        logger.error(f"Invalid trace options: {e}")
        return constants.EXIT_USAGE
    except Exception:
        logger.exception("Unhandled exception in trace")
        return constants.EXIT_FAILURE

    text = to_json(trace, indent=2) if args.format == "json" else render_text(trace)
    try:
        context.write_report(
            text,
            "json" if args.format == "json" else "txt",
            protocol=args.protocol,
            adversary=args.adversary,
            n=trace["params"]["n"],
            m=trace["params"]["m"],
            seed=args.seed,
        )
    except OSError as e:
        logger.error(f"Unable to write the trace: {e}")
        return constants.EXIT_FAILURE
    logger.info("Trace finished", verdict=trace["verdict"])
    return constants.EXIT_OK
