"""Contact sensing and tap / double-tap / press detection.

Everything is keyed off the optical sensor's surface-quality scalar
(SQUAL, 0..169) and the per-frame x/y count deltas:

* contact        SQUAL at or above ``contact_squal``
* tap            rise from below ``contact_squal`` to at least
                 ``tap_squal`` and back below ``contact_squal`` within
                 ``tap_window_ms``, with the net movement while in
                 contact inside +/- ``tap_move_limit_counts`` per axis
* double tap     two taps whose onsets are between the min and max
                 pairing gap and whose positions differ by at most
                 ``doubletap_offset_counts`` on both axes
* press          SQUAL held at or above ``press_squal`` for
                 ``press_hold_ms`` without the tap's rise-and-fall

A completed tap is withheld until the double-tap pairing window can no
longer be satisfied; every event produced while a tap is withheld is
buffered with it so the emitted stream stays timestamp-ordered.

The thresholds default to the mousepad profile; other textures load
their own numbers via :func:`load_gesture_config`.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

CONTACT_BEGIN = "ContactBegin"
CONTACT_END = "ContactEnd"
TAP = "Tap"
DOUBLE_TAP = "DoubleTap"
PRESS_BEGIN = "PressBegin"
PRESS_END = "PressEnd"

# Operational lift range of the modeled optical sensor, in mm.
LIFT_RANGE_MM = 5.0
# Mousepad anchor: squal 40 at 2.4 mm lens-to-surface distance.
_ANCHOR_SQUAL = 40.0
_ANCHOR_DISTANCE_MM = 2.4
_REFERENCE_SQUAL_MEAN = 70.0  # mousepad in-contact average


@dataclass(frozen=True)
class GestureConfig:
    contact_squal: int = 10
    tap_squal: int = 40
    tap_window_ms: int = 300
    tap_move_limit_counts: int = 5
    doubletap_min_gap_ms: int = 200
    doubletap_max_gap_ms: int = 500
    doubletap_offset_counts: int = 15
    press_squal: int = 40
    press_hold_ms: int = 300

    def __post_init__(self) -> None:
        if not 0 < self.contact_squal <= self.tap_squal <= 169:
            raise ValueError("need 0 < contact_squal <= tap_squal <= 169")
        for name in ("tap_window_ms", "doubletap_max_gap_ms", "press_hold_ms"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be > 0")
        if not 0 <= self.doubletap_min_gap_ms <= self.doubletap_max_gap_ms:
            raise ValueError("need 0 <= doubletap_min_gap_ms <= doubletap_max_gap_ms")


@dataclass(frozen=True)
class GestureEvent:
    kind: str
    t_ms: int
    x: int  # accumulated counts at the event
    y: int

    def to_json(self) -> str:
        return json.dumps({"t_ms": self.t_ms, "kind": self.kind, "x": self.x, "y": self.y})


@dataclass
class _CompletedTap:
    onset_ms: int
    fall_ms: int
    x: int
    y: int


class GestureDetector:
    """Deterministic per-stream state machine over sensor frames.

    Feed frames in timestamp order via :meth:`step`; call :meth:`finish`
    exactly once at end of stream to flush a still-withheld tap.
    """

    def __init__(self, config: GestureConfig | None = None):
        self.config = config or GestureConfig()
        self._last_t: int | None = None
        self._cum_x = 0
        self._cum_y = 0
        # contact bookkeeping
        self._in_contact = False
        self._onset_t = 0
        self._onset_x = 0
        self._onset_y = 0
        self._net_dx = 0
        self._net_dy = 0
        self._peak_squal = 0
        self._tap_alive = False
        # press bookkeeping
        self._press_run_start: int | None = None
        self._in_press = False
        # double-tap pairing
        self._pending: _CompletedTap | None = None
        self._holdback: list[GestureEvent] = []

    # -- emission helpers ------------------------------------------------

    def _emit(self, out: list[GestureEvent], event: GestureEvent) -> None:
        if self._pending is not None:
            self._holdback.append(event)
        else:
            out.append(event)

    def _flush_pending_as_tap(self, out: list[GestureEvent]) -> None:
        tap = self._pending
        assert tap is not None
        self._pending = None
        out.append(GestureEvent(TAP, tap.fall_ms, tap.x, tap.y))
        out.extend(self._holdback)
        self._holdback = []

    def _candidate_may_pair(self, t_now: int) -> bool:
        """Could the currently open contact still become the pairing tap?"""
        if not (self._in_contact and self._tap_alive):
            return False
        gap = self._onset_t - self._pending.onset_ms  # type: ignore[union-attr]
        return self.config.doubletap_min_gap_ms <= gap <= self.config.doubletap_max_gap_ms

    def _on_tap(self, out: list[GestureEvent], tap: _CompletedTap) -> None:
        cfg = self.config
        if self._pending is None:
            self._pending = tap
            return
        first = self._pending
        gap = tap.onset_ms - first.onset_ms
        paired = (
            cfg.doubletap_min_gap_ms <= gap <= cfg.doubletap_max_gap_ms
            and abs(tap.x - first.x) <= cfg.doubletap_offset_counts
            and abs(tap.y - first.y) <= cfg.doubletap_offset_counts
        )
        if paired:
            self._pending = None
            out.extend(self._holdback)
            self._holdback = []
            out.append(GestureEvent(DOUBLE_TAP, tap.fall_ms, tap.x, tap.y))
        else:
            self._flush_pending_as_tap(out)
            self._pending = tap

    # -- main entry points -----------------------------------------------

    def step(self, frame) -> list[GestureEvent]:
        """Process one frame (anything with timestamp_ms/dx/dy/squal)."""
        cfg = self.config
        t = frame.timestamp_ms
        if self._last_t is not None and t < self._last_t:
            raise ValueError(f"out-of-order timestamp: {t} ms arrived after {self._last_t} ms")
        self._last_t = t

        out: list[GestureEvent] = []

        # a withheld tap whose pairing window has lapsed becomes a plain Tap,
        # unless an open contact might still complete as the pairing tap
        if self._pending is not None and t - self._pending.onset_ms > cfg.doubletap_max_gap_ms:
            if not self._candidate_may_pair(t):
                self._flush_pending_as_tap(out)

        self._cum_x += frame.dx
        self._cum_y += frame.dy
        squal = frame.squal

        if squal >= cfg.contact_squal and not self._in_contact:
            self._in_contact = True
            self._onset_t = t
            self._onset_x = self._cum_x
            self._onset_y = self._cum_y
            # movement is judged from the frames after touchdown
            self._net_dx = 0
            self._net_dy = 0
            self._peak_squal = squal
            self._tap_alive = True
            self._emit(out, GestureEvent(CONTACT_BEGIN, t, self._cum_x, self._cum_y))
        elif self._in_contact and squal >= cfg.contact_squal:
            self._net_dx += frame.dx
            self._net_dy += frame.dy
            self._peak_squal = max(self._peak_squal, squal)

        if self._in_contact and self._tap_alive:
            moved_too_far = (
                abs(self._net_dx) > cfg.tap_move_limit_counts
                or abs(self._net_dy) > cfg.tap_move_limit_counts
            )
            if t - self._onset_t > cfg.tap_window_ms or moved_too_far:
                self._tap_alive = False

        # press: sustained squal >= press_squal for press_hold_ms
        if squal >= cfg.press_squal:
            if self._press_run_start is None:
                self._press_run_start = t
            elif not self._in_press and t - self._press_run_start >= cfg.press_hold_ms:
                self._in_press = True
                self._tap_alive = False
                self._emit(out, GestureEvent(PRESS_BEGIN, t, self._cum_x, self._cum_y))
        else:
            if self._in_press:
                self._in_press = False
                self._emit(out, GestureEvent(PRESS_END, t, self._cum_x, self._cum_y))
            self._press_run_start = None

        if self._in_contact and squal < cfg.contact_squal:
            self._in_contact = False
            tap_complete = (
                self._tap_alive
                and self._peak_squal >= cfg.tap_squal
                and t - self._onset_t <= cfg.tap_window_ms
            )
            self._emit(out, GestureEvent(CONTACT_END, t, self._cum_x, self._cum_y))
            if tap_complete:
                self._on_tap(out, _CompletedTap(self._onset_t, t, self._onset_x, self._onset_y))
            self._tap_alive = False

        return out

    def finish(self) -> list[GestureEvent]:
        """End of stream: a still-withheld tap can no longer pair."""
        out: list[GestureEvent] = []
        if self._pending is not None:
            self._flush_pending_as_tap(out)
        return out


def run_detector(frames, config: GestureConfig | None = None) -> list[GestureEvent]:
    """Convenience wrapper: run a whole frame sequence through a detector."""
    det = GestureDetector(config)
    events: list[GestureEvent] = []
    for frame in frames:
        events.extend(det.step(frame))
    events.extend(det.finish())
    return events


# -- SQUAL <-> lift distance model ----------------------------------------


def _full_contact_squal(texture_model) -> float:
    """SQUAL the texture would report at zero lens-to-surface distance."""
    mousepad_s0 = _ANCHOR_SQUAL / (1.0 - _ANCHOR_DISTANCE_MM / LIFT_RANGE_MM)
    return mousepad_s0 * texture_model.squal_mean / _REFERENCE_SQUAL_MEAN


def distance_to_squal(distance_mm: float, texture_model) -> float:
    """Monotone-decreasing lift model; squal 40 at 2.4 mm on mousepad."""
    if not 0.0 <= distance_mm <= LIFT_RANGE_MM:
        raise ValueError(f"distance must be within [0, {LIFT_RANGE_MM}] mm, got {distance_mm}")
    return _full_contact_squal(texture_model) * (1.0 - distance_mm / LIFT_RANGE_MM)


def squal_to_distance(squal: float, texture_model) -> float:
    s0 = _full_contact_squal(texture_model)
    if not 0.0 <= squal <= s0:
        raise ValueError(f"squal must be within [0, {s0:.1f}] for this texture, got {squal}")
    return LIFT_RANGE_MM * (1.0 - squal / s0)


# -- event stream serialization -------------------------------------------


def write_events_jsonl(path, events) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for event in events:
            fh.write(event.to_json() + "\n")


def read_events_jsonl(path) -> list[GestureEvent]:
    events = []
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        if not line.strip():
            continue
        payload = json.loads(line)
        events.append(GestureEvent(payload["kind"], payload["t_ms"], payload["x"], payload["y"]))
    return events


# -- per-texture threshold profiles ---------------------------------------

_INT_FIELDS = set(GestureConfig.__dataclass_fields__)


def load_gesture_config(path, texture: str = "mousepad") -> GestureConfig:
    """Flat key=value profile file.

    Unprefixed keys set the base profile; ``texture.key`` lines override
    a single texture. Keys are exactly the GestureConfig field names.
    """
    base: dict[str, int] = {}
    override: dict[str, int] = {}
    for lineno, raw in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ValueError(f"{path}:{lineno}: expected key=value, got {line!r}")
        key, _, value = line.partition("=")
        key = key.strip()
        value = value.strip()
        target = base
        if "." in key:
            prefix, _, key = key.partition(".")
            if prefix != texture:
                continue
            target = override
        if key not in _INT_FIELDS:
            raise ValueError(f"{path}:{lineno}: unknown gesture config key {key!r}")
        target[key] = int(value)
    base.update(override)
    return GestureConfig(**base)
