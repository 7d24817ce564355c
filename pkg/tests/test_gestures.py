import random

import pytest

from touchtrace.gestures import (
    CONTACT_BEGIN,
    CONTACT_END,
    DOUBLE_TAP,
    PRESS_BEGIN,
    PRESS_END,
    TAP,
    GestureConfig,
    GestureDetector,
    GestureEvent,
    distance_to_squal,
    load_gesture_config,
    read_events_jsonl,
    run_detector,
    squal_to_distance,
    write_events_jsonl,
)
from touchtrace.simulate import TEXTURES, script_gesture_trace
from touchtrace.protocol import SensorFrame

CFG = GestureConfig()


def frame(t, squal, dx=0, dy=0):
    return SensorFrame(t, dx, dy, squal, (0, 0, -16384), (0, 0, 0), (220, 0, -440))


def frames_from(rows):
    return [frame(*row) for row in rows]


def kinds(events):
    return [e.kind for e in events]


def tap_rows(onset_ms, duration_ms=80, squal=45, pre_ms=40, tail_ms=720, dx_during=0):
    rows = []
    t = onset_ms - pre_ms
    while t < onset_ms:
        rows.append((t, 0))
        t += 20
    end = onset_ms + duration_ms
    while t < end:
        rows.append((t, squal, dx_during))
        t += 20
    while t < end + tail_ms:
        rows.append((t, 0))
        t += 20
    return rows


def test_single_tap_fixture():
    events = run_detector(script_gesture_trace("tap"), CFG)
    assert kinds(events) == [CONTACT_BEGIN, CONTACT_END, TAP]
    tap = events[-1]
    begin, end = events[0], events[1]
    assert begin.t_ms <= tap.t_ms <= end.t_ms or tap.t_ms == end.t_ms
    assert end.t_ms - begin.t_ms <= CFG.tap_window_ms


def test_tap_emitted_only_after_pairing_window_lapses():
    det = GestureDetector(CFG)
    events = []
    emitted_at = {}
    for f in script_gesture_trace("tap"):
        for e in det.step(f):
            events.append(e)
            emitted_at[id(e)] = f.timestamp_ms
    events.extend(det.finish())
    tap = [e for e in events if e.kind == TAP][0]
    assert emitted_at[id(tap)] - tap.t_ms >= CFG.doubletap_max_gap_ms - CFG.tap_window_ms


def test_double_tap_fixture():
    events = run_detector(script_gesture_trace("doubletap"), CFG)
    assert kinds(events) == [CONTACT_BEGIN, CONTACT_END, CONTACT_BEGIN, CONTACT_END, DOUBLE_TAP]
    assert TAP not in kinds(events)


def test_press_fixture():
    events = run_detector(script_gesture_trace("press"), CFG)
    assert kinds(events) == [CONTACT_BEGIN, PRESS_BEGIN, PRESS_END, CONTACT_END]
    begin = next(e for e in events if e.kind == PRESS_BEGIN)
    contact = next(e for e in events if e.kind == CONTACT_BEGIN)
    assert begin.t_ms - contact.t_ms == CFG.press_hold_ms


def test_moving_tap_rejected():
    events = run_detector(script_gesture_trace("moving-tap-reject"), CFG)
    assert kinds(events) == [CONTACT_BEGIN, CONTACT_END]


def test_two_taps_within_window_and_offset_pair():
    # drift (10, 4) counts while lifted: inside the +/-15 pairing offset
    rows = tap_rows(40, tail_ms=0) + [(200, 0, 10, 4)]
    rows += [(t, 0) for t in range(220, 400, 20)]
    rows += tap_rows(400, pre_ms=0)
    events = run_detector(frames_from(rows), CFG)
    assert kinds(events).count(DOUBLE_TAP) == 1
    assert TAP not in kinds(events)


def test_two_taps_far_apart_are_two_taps():
    rows = tap_rows(40, tail_ms=560) + tap_rows(740, pre_ms=0)
    events = run_detector(frames_from(rows), CFG)
    assert kinds(events).count(TAP) == 2
    assert DOUBLE_TAP not in kinds(events)


def test_two_taps_offset_too_large_are_two_taps():
    rows = tap_rows(40, tail_ms=0)
    # drift 20 counts while lifted, then a second tap in the pairing window
    rows += [(200, 0, 20), (220, 0), (240, 0), (260, 0), (280, 0), (300, 0), (320, 0), (340, 0), (360, 0), (380, 0)]
    rows += tap_rows(400, pre_ms=0)
    events = run_detector(frames_from(rows), CFG)
    assert kinds(events).count(TAP) == 2
    assert DOUBLE_TAP not in kinds(events)


def test_tap_with_excess_movement_rejected():
    rows = tap_rows(40, dx_during=6)
    events = run_detector(frames_from(rows), CFG)
    assert TAP not in kinds(events)
    assert kinds(events) == [CONTACT_BEGIN, CONTACT_END]


def test_press_not_fired_by_short_tap():
    events = run_detector(frames_from(tap_rows(40)), CFG)
    assert PRESS_BEGIN not in kinds(events)


def test_tap_press_boundary_partition():
    # fall exactly at the window edge is still a tap; one frame later the
    # hold threshold has fired first and the contact is a press instead
    tap_side = [(0, 0), (20, 0)] + [(t, 45) for t in range(40, 340, 20)] + [
        (t, 0) for t in range(340, 960, 20)
    ]
    events = run_detector(frames_from(tap_side), CFG)
    assert kinds(events) == [CONTACT_BEGIN, CONTACT_END, TAP]

    press_side = [(0, 0), (20, 0)] + [(t, 45) for t in range(40, 360, 20)] + [
        (t, 0) for t in range(360, 960, 20)
    ]
    events = run_detector(frames_from(press_side), CFG)
    assert kinds(events) == [CONTACT_BEGIN, PRESS_BEGIN, PRESS_END, CONTACT_END]
    assert TAP not in kinds(events)


def test_long_low_contact_is_contact_only():
    rows = [(t, 20) for t in range(0, 800, 20)] + [(800, 0)]
    events = run_detector(frames_from(rows), CFG)
    assert kinds(events) == [CONTACT_BEGIN, CONTACT_END]


def test_press_begin_end_alternate():
    rows = []
    t = 0
    for _ in range(3):
        for _ in range(25):  # 500 ms held
            rows.append((t, 45))
            t += 20
        for _ in range(5):  # 100 ms released
            rows.append((t, 0))
            t += 20
    events = run_detector(frames_from(rows), CFG)
    presses = [e.kind for e in events if e.kind in (PRESS_BEGIN, PRESS_END)]
    assert presses == [PRESS_BEGIN, PRESS_END] * 3


def test_out_of_order_frame_rejected():
    det = GestureDetector(CFG)
    det.step(frame(100, 0))
    with pytest.raises(ValueError, match="40.*100|100.*40"):
        det.step(frame(40, 0))


def test_events_are_timestamp_ordered_and_positions_accumulate():
    rng = random.Random(5)
    rows = []
    t = 0
    for _ in range(400):
        rows.append((t, rng.choice([0, 0, 20, 45, 60]), rng.randint(-3, 3), rng.randint(-3, 3)))
        t += 20
    events = run_detector(frames_from(rows), CFG)
    for a, b in zip(events, events[1:]):
        assert a.t_ms <= b.t_ms
    assert all(0 <= e.t_ms <= t for e in events)


def _random_trace(seed, n=300):
    rng = random.Random(seed)
    rows = []
    t = 0
    squal = 0
    for _ in range(n):
        if rng.random() < 0.15:
            squal = rng.choice([0, 0, 5, 25, 45, 55])
        rows.append((t, squal, rng.randint(-4, 4), rng.randint(-4, 4)))
        t += 20
    return frames_from(rows)


@pytest.mark.parametrize("seed", range(30))
def test_determinism_and_split_invariance_sampled(seed):
    trace = _random_trace(seed)
    whole = run_detector(trace, CFG)
    assert whole == run_detector(trace, CFG)

    cut = random.Random(seed * 7 + 1).randrange(1, len(trace))
    det = GestureDetector(CFG)
    split_events = []
    for f in trace[:cut]:
        split_events.extend(det.step(f))
    for f in trace[cut:]:
        split_events.extend(det.step(f))
    split_events.extend(det.finish())
    assert split_events == whole


def test_squal_distance_anchor_and_inverse():
    mousepad = TEXTURES["mousepad"]
    assert distance_to_squal(2.4, mousepad) == pytest.approx(40.0, abs=1e-9)
    assert distance_to_squal(5.0, mousepad) == pytest.approx(0.0, abs=1e-9)
    for d in [1.0, 1.7, 2.4, 3.3, 4.4]:
        back = squal_to_distance(distance_to_squal(d, mousepad), mousepad)
        assert back == pytest.approx(d, abs=0.05)


def test_squal_distance_monotone_decreasing_per_texture():
    for texture in TEXTURES.values():
        values = [distance_to_squal(d / 10, texture) for d in range(0, 51, 5)]
        assert all(a > b for a, b in zip(values, values[1:]))


def test_distance_out_of_range_rejected():
    with pytest.raises(ValueError):
        distance_to_squal(5.5, TEXTURES["mousepad"])
    with pytest.raises(ValueError):
        distance_to_squal(-0.1, TEXTURES["mousepad"])


def test_events_jsonl_round_trip(tmp_path):
    events = [
        GestureEvent(TAP, 120, 3, -1),
        GestureEvent(DOUBLE_TAP, 460, 13, 4),
    ]
    path = tmp_path / "gestures.jsonl"
    write_events_jsonl(path, events)
    assert read_events_jsonl(path) == events
    first = path.read_text().splitlines()[0]
    import json

    assert json.loads(first) == {"t_ms": 120, "kind": "Tap", "x": 3, "y": -1}


def test_gesture_config_file_with_texture_profiles(tmp_path):
    path = tmp_path / "gestures.cfg"
    path.write_text(
        "contact_squal=12\n"
        "tap_squal=40\n"
        "jeans.tap_move_limit_counts=8\n"
        "wood.tap_squal=35\n"
    )
    jeans = load_gesture_config(path, "jeans")
    assert jeans.contact_squal == 12
    assert jeans.tap_move_limit_counts == 8
    wood = load_gesture_config(path, "wood")
    assert wood.tap_squal == 35
    assert wood.tap_move_limit_counts == GestureConfig().tap_move_limit_counts


def test_gesture_config_validation():
    with pytest.raises(ValueError):
        GestureConfig(contact_squal=50, tap_squal=40)
