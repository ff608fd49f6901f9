from collections import Counter
from random import Random

import pytest

from afeis.confirmer import (
    Confirmer,
    ConfirmerConfig,
    GapFrames,
    GestureFrame,
    read_frames,
)
from afeis.errors import StreamOrderError

PERIOD = 50  # ms per frame, 20 fps


def push_run(confirmer, gestures, start_ts=0, period=PERIOD):
    """Push a gesture-per-frame list; return the acceptances."""
    accepted = []
    ts = start_ts
    for gesture in gestures:
        hit = confirmer.push(GestureFrame(ts, gesture))
        if hit is not None:
            accepted.append(hit)
        ts += period
    return accepted, ts


def recount(confirmer):
    """Independent oracle: recount the retained frames from scratch."""
    return Counter(frame.gesture for frame in confirmer.frames())


# --- score ----------------------------------------------------------------------


def test_score_all_one_gesture():
    confirmer = Confirmer(ConfirmerConfig(threshold=8))
    # 12 frames of gesture 7 inside one window: count 12 > 8, share 12/12.
    for i in range(12):
        confirmer.push(GestureFrame(i * PERIOD, 7))
    assert confirmer.score(7) == 1.0


def test_score_split_window_below_threshold():
    confirmer = Confirmer(ConfirmerConfig(threshold=8))
    for i, gesture in enumerate([7] * 6 + [3] * 6):
        confirmer.push(GestureFrame(i * PERIOD, gesture))
    assert confirmer.score(7) is None  # 6 <= 8
    assert confirmer.score(3) is None


def test_score_empty_window():
    assert Confirmer().score(5) is None


# --- push ------------------------------------------------------------------------


def test_single_hold_accepted_exactly_once():
    confirmer = Confirmer(ConfirmerConfig(threshold=8, min_fraction=0.6))
    accepted, _ = push_run(confirmer, [5] * 20)
    assert [a.gesture for a in accepted] == [5]
    # it fires the moment count > threshold (frame index threshold, 0-based)
    assert accepted[0].timestamp_ms == 8 * PERIOD


def test_alternating_never_accepts():
    confirmer = Confirmer(ConfirmerConfig(threshold=8, min_fraction=0.6))
    accepted, _ = push_run(confirmer, [7, 3] * 20)
    assert accepted == []


def test_two_holds_accepted_in_order():
    confirmer = Confirmer(ConfirmerConfig(threshold=8, min_fraction=0.6))
    accepted, _ = push_run(confirmer, [5] * 15 + [9] * 15)
    assert [a.gesture for a in accepted] == [5, 9]


def test_tie_blocks_acceptance():
    # Alternating a,b keeps b's count tied with (never above) a's, so b is
    # never a unique argmax and never fires even though its count clears the
    # threshold; a fires once on its first lead.
    confirmer = Confirmer(ConfirmerConfig(threshold=3, min_fraction=0.1))
    accepted, _ = push_run(confirmer, [4, 6] * 10)
    assert [a.gesture for a in accepted] == [4]
    assert confirmer.counts[6] > 3


def test_fraction_gate_defers_acceptance():
    # 9 frames of noise dilute the window: gesture 5 reaches count 9 at a
    # share below 0.6 and must wait for the share to recover.
    config = ConfirmerConfig(threshold=8, min_fraction=0.6)
    confirmer = Confirmer(config)
    noise = [10, 11, 12, 13, 14, 15, 16, 17, 18]
    accepted, _ = push_run(confirmer, noise + [5] * 20)
    assert [a.gesture for a in accepted] == [5]
    window = 20
    # at acceptance, count/window must be >= 0.6 with count > 8
    fire_index = accepted[0].timestamp_ms // PERIOD
    count_at_fire = min(fire_index - 9 + 1, window)
    assert count_at_fire > 8
    assert count_at_fire / window >= 0.6


def test_rearm_after_count_decays():
    confirmer = Confirmer(ConfirmerConfig(threshold=8, min_fraction=0.5))
    stream = [5] * 20 + [9] * 25 + [5] * 20
    accepted, _ = push_run(confirmer, stream)
    assert [a.gesture for a in accepted] == [5, 9, 5]


def test_time_gap_empties_window():
    confirmer = Confirmer(ConfirmerConfig(threshold=8))
    accepted, ts = push_run(confirmer, [5] * 12)
    accepted2, _ = push_run(confirmer, [5] * 12, start_ts=ts + 2000)
    assert len(accepted) == 1 and len(accepted2) == 1
    assert confirmer.window_size == 12


def test_gap_frames_policy_allows_repeat_fire():
    config = ConfirmerConfig(threshold=8, min_fraction=0.6, rearm=GapFrames(15))
    confirmer = Confirmer(config)
    accepted, _ = push_run(confirmer, [5] * 60)
    assert len(accepted) >= 2  # deliberate repeat input on one long hold
    gaps = [
        (b.timestamp_ms - a.timestamp_ms) // PERIOD
        for a, b in zip(accepted, accepted[1:])
    ]
    assert all(gap >= 15 for gap in gaps)


def test_decreasing_timestamp_aborts():
    confirmer = Confirmer()
    confirmer.push(GestureFrame(1000, 5))
    with pytest.raises(StreamOrderError):
        confirmer.push(GestureFrame(999, 5))


def test_gesture_range_checked():
    confirmer = Confirmer()
    with pytest.raises(ValueError):
        confirmer.push(GestureFrame(0, 50))


# --- config validation --------------------------------------------------------------


def test_alternative_scorer_plugs_in():
    # A scorer that always vetoes: nothing is ever accepted.
    class Veto:
        def score(self, counts, total, gesture, threshold):
            return None

    confirmer = Confirmer(ConfirmerConfig(scorer=Veto()))
    accepted, _ = push_run(confirmer, [5] * 40)
    assert accepted == []


def test_config_rejects_window_too_small_for_threshold():
    with pytest.raises(ValueError):
        ConfirmerConfig(window_ms=200, threshold=8, frame_rate_hint=20.0)


@pytest.mark.parametrize(
    "kwargs",
    [
        {"threshold": 0},
        {"min_fraction": 0.0},
        {"min_fraction": 1.5},
        {"window_ms": 0},
        {"rearm": GapFrames(0)},
    ],
)
def test_config_rejects_bad_values(kwargs):
    with pytest.raises(ValueError):
        ConfirmerConfig(**kwargs)


# --- oracle equivalence ----------------------------------------------------------------


def test_counts_match_brute_force_recount():
    rng = Random(7)
    config = ConfirmerConfig(threshold=8, min_fraction=0.5)
    confirmer = Confirmer(config)
    ts = 0
    for _ in range(3000):
        ts += rng.choice([PERIOD, PERIOD, PERIOD, 5, 400])
        confirmer.push(GestureFrame(ts, rng.randint(0, 12)))
        assert confirmer.counts == dict(recount(confirmer))
        assert sum(confirmer.counts.values()) == confirmer.window_size


def test_no_accept_when_max_count_stays_at_threshold():
    # Rotating 8-frame holds: no gesture ever reaches 9 in a 20-frame window.
    confirmer = Confirmer(ConfirmerConfig(threshold=8, min_fraction=0.4))
    stream = ([1] * 8 + [2] * 8 + [3] * 8) * 10
    accepted, _ = push_run(confirmer, stream)
    assert accepted == []
    assert max(recount(confirmer).values()) <= 8


# --- stream file parsing -----------------------------------------------------------------


def test_read_frames_lines():
    frames = list(read_frames(["# header", "0,5", "", "50,6"]))
    assert frames == [GestureFrame(0, 5), GestureFrame(50, 6)]


def test_read_frames_bad_record():
    with pytest.raises(StreamOrderError):
        list(read_frames(["0,5", "oops"]))
