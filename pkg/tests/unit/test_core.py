import math

import numpy as np
import pytest
from sim_test_helpers import ParamsCase, rng

from distance_bounding.core import (
    BcGuessMode,
    CollisionStats,
    FastRound,
    Key,
    Nonce,
    NonceRole,
    Outcome,
    ProtocolParams,
    Transcript,
    TrialReport,
    bits_from_str,
    bits_to_int,
    bits_to_str,
    default_params,
    int_to_bits,
    key_length,
    leaf_count,
    pack_bits,
    unpack_bits,
    validate_params,
)
from distance_bounding.errors import ParamsError

# ----------------------------- Bit string tests ------------------------------


def test_bits_from_str_and_back():
    bits = bits_from_str("0110")
    assert bits == b"\x00\x01\x01\x00"
    assert bits_to_str(bits) == "0110"
    assert bits_to_int(bits) == 6


def test_bits_from_str_rejects_other_characters():
    with pytest.raises(ValueError):
        bits_from_str("01x")


def test_int_to_bits_is_msb_first():
    assert int_to_bits(5, 4) == bits_from_str("0101")
    with pytest.raises(ValueError):
        int_to_bits(16, 4)


def test_pack_bits_pads_with_zeros():
    packed = pack_bits(bits_from_str("101"))
    assert packed == bytes([0b1010_0000])
    assert unpack_bits(packed, 3) == bits_from_str("101")


@pytest.mark.parametrize("n,expected", [(1, 6), (2, 14), (3, 30), (11, 8190)])
def test_key_length(n: int, expected: int):
    assert key_length(n) == expected


def test_leaf_count():
    assert leaf_count(3) == 16


# ----------------------------- Parameter tests -------------------------------

VALID_PARAMS = [
    ParamsCase(id="defaults_n4", n=4, m=4, l_a=8, l_b=4),
    ParamsCase(id="m_smaller", n=3, m=1, l_a=4, l_b=3),
    ParamsCase(id="longer_b", n=2, m=2, l_a=4, l_b=9, executions=100),
    ParamsCase(id="m_all_leaves", n=2, m=8, l_a=10, l_b=2),
]

INVALID_PARAMS = [
    ParamsCase(id="zero_rounds", n=0, m=1, l_a=1, l_b=1),
    ParamsCase(id="zero_auth", n=2, m=0, l_a=2, l_b=2),
    ParamsCase(id="too_many_leaves", n=2, m=9, l_a=11, l_b=2),
    ParamsCase(id="la_not_m_plus_n", n=2, m=2, l_a=3, l_b=2),
    ParamsCase(id="short_b", n=3, m=3, l_a=6, l_b=2),
    ParamsCase(id="no_executions", n=2, m=2, l_a=4, l_b=2, executions=0),
]


@pytest.mark.parametrize("case", VALID_PARAMS, ids=lambda case: case.id)
def test_valid_params(case: ParamsCase):
    params = validate_params(case.n, case.m, case.l_a, case.l_b, case.executions)
    assert (params.n, params.m, params.l_a, params.l_b) == (case.n, case.m, case.l_a, case.l_b)
    assert params.l_k == key_length(case.n)


@pytest.mark.parametrize("case", INVALID_PARAMS, ids=lambda case: case.id)
def test_invalid_params(case: ParamsCase):
    with pytest.raises(ParamsError):
        validate_params(case.n, case.m, case.l_a, case.l_b, case.executions)


@pytest.mark.parametrize("value", [1.5, "4", True, None])
def test_params_reject_non_integers(value):
    with pytest.raises(ParamsError):
        ProtocolParams(n=value, m=1, l_a=2, l_b=1)


def test_default_params_conventions():
    params = default_params(5)
    assert (params.m, params.l_a, params.l_b, params.executions) == (5, 10, 5, 1)
    assert default_params(5, 2).l_a == 7


def test_default_params_wraps_type_errors():
    with pytest.raises(ParamsError):
        default_params(3, "x")


def test_key_leakage_warning_only_for_tiny_trees():
    assert default_params(1, 4).key_leakage_warning
    assert not default_params(8).key_leakage_warning


@pytest.mark.parametrize(
    "mode,n,m,expected",
    [
        (BcGuessMode.AUTO, 3, 5, BcGuessMode.CHALLENGE),
        (BcGuessMode.AUTO, 5, 3, BcGuessMode.SIGNATURE),
        (BcGuessMode.AUTO, 4, 4, BcGuessMode.CHALLENGE),
        (BcGuessMode.SIGNATURE, 3, 5, BcGuessMode.SIGNATURE),
    ],
)
def test_bc_guess_mode_resolution(mode: BcGuessMode, n: int, m: int, expected: BcGuessMode):
    assert mode.resolve(n, m) is expected


# ------------------------- Keys, nonces and transcripts ------------------------


def test_key_and_nonce_lengths(rng: np.random.Generator):
    params = default_params(3, 2)
    assert len(Key.generate(params, rng)) == 30
    a = Nonce.generate(params, NonceRole.VERIFIER_A, rng)
    b = Nonce.generate(params, NonceRole.PROVER_B, rng)
    assert (len(a.bits), len(b.bits)) == (5, 3)
    assert a.matches(params) and b.matches(params)


def test_nonce_rejects_non_bits():
    with pytest.raises(ValueError):
        Nonce(b"\x02", NonceRole.VERIFIER_A)


def _transcript(rounds, outcome=Outcome.ACCEPT, early=False) -> Transcript:
    return Transcript(
        n=2,
        nonce_a=Nonce(bits_from_str("0101"), NonceRole.VERIFIER_A),
        nonce_b=Nonce(bits_from_str("11"), NonceRole.PROVER_B),
        auth_bits=bits_from_str("10"),
        rounds=rounds,
        outcome=outcome,
        early=early,
    )


def test_transcript_messages_are_timed_in_order():
    transcript = _transcript([FastRound(0, 1, 2.0), FastRound(1, 0, 2.5)])
    messages = transcript.messages()
    assert [message["type"] for message in messages] == [
        "nonce_a",
        "nonce_b",
        "auth",
        "challenge",
        "reply",
        "challenge",
        "reply",
    ]
    assert [message["time"] for message in messages[3:]] == [0.0, 2.0, 2.0, 4.5]
    assert transcript.challenges == bits_from_str("01")


def test_transcript_accept_needs_every_round_unless_early():
    with pytest.raises(ValueError):
        _transcript([FastRound(0, 1, 2.0)])
    assert _transcript([FastRound(0, 1, 2.0)], early=True).rounds_completed == 1


def test_lost_reply_is_recorded_empty():
    transcript = _transcript([FastRound(0, None, math.inf)], outcome=Outcome.REJECT)
    assert transcript.messages()[-1]["bits"] == ""


# ----------------------------- Report tests ----------------------------------


def _report(successes: int, trials: int = 100, predicted: float = 0.5) -> TrialReport:
    return TrialReport(
        protocol="tree",
        adversary="preask",
        n=2,
        m=2,
        trials=trials,
        successes=successes,
        predicted=predicted,
        interval=(0.0, 1.0),
    )


def test_report_z_uses_predicted_sigma():
    report = _report(60)
    assert report.estimate == 0.6
    assert report.z_score == pytest.approx(2.0)


def test_report_z_for_degenerate_predictions():
    assert _report(0, predicted=0.0).z_score == 0.0
    assert _report(1, predicted=0.0).z_score == math.inf
    assert _report(99, predicted=1.0).z_score == -math.inf


def test_report_rejects_more_successes_than_trials():
    with pytest.raises(ValueError):
        _report(101)


def test_report_row_carries_collision_columns():
    collisions = CollisionStats(batches=10, collisions=2, exact=0.25, bound=0.3)
    report = TrialReport(
        protocol="tree",
        adversary="replay",
        n=1,
        m=1,
        trials=10,
        successes=3,
        predicted=0.3,
        interval=(0.0, 1.0),
        collisions=collisions,
    )
    row = report.as_row()
    assert row["collisions"] == 2
    assert row["collision_frequency"] == 0.2
    assert list(row)[:4] == ["protocol", "adversary", "n", "m"]
