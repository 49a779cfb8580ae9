"""Sliding time windows over level plays and the fixed per-window feature schema."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .telemetry import EVENT_KINDS, Event, EventKind, LevelPlay, Trace

PLACEMENTS = (EventKind.PLACE_SEMAPHORE, EventKind.PLACE_SIGNAL)
LINKS = (EventKind.LINK_SEMAPHORE_SIGNAL, EventKind.LINK_SIGNAL_SWITCH)
HOVERS = (EventKind.HOVER_COMPONENT, EventKind.HOVER_SIDE_ARROW)


@dataclass(frozen=True)
class WindowSpec:
    tau_s: float

    def __post_init__(self):
        if not (self.tau_s > 0 and math.isfinite(self.tau_s)):
            raise ValueError(f"window length must be positive, got {self.tau_s}")

    @property
    def stride_s(self) -> float:
        return self.tau_s / 2

    @property
    def tau_ms(self) -> float:
        return self.tau_s * 1000.0

    @property
    def stride_ms(self) -> float:
        return self.tau_ms / 2


@dataclass(frozen=True)
class Window:
    """One time slice of a level.

    ``events`` holds the events with ``start_ms <= t_ms < end_ms``; the last
    window of a level also keeps events stamped exactly at the level end.
    ``level_events`` is the whole level, which rules consult for history.
    """

    student_id: str
    level_id: str
    index: int
    start_ms: float
    end_ms: float
    stop_ms: float
    events: tuple[Event, ...]
    level_events: tuple[Event, ...]
    is_last: bool

    @property
    def effective_seconds(self) -> float:
        return (self.stop_ms - self.start_ms) / 1000.0


def window_starts(duration_ms: float, spec: WindowSpec) -> list[float]:
    """Level-relative window starts: multiples of the stride that leave at
    least half a window of play. A level shorter than that gets one window."""
    stride = spec.stride_ms
    if duration_ms < stride:
        return [0.0]
    n = int(math.floor(duration_ms / stride + 1e-9))
    return [k * stride for k in range(n)]


def slice_level(student_id: str, level: LevelPlay, spec: WindowSpec) -> list[Window]:
    origin = level.start_ms
    duration = level.duration_ms
    starts = window_starts(duration, spec)
    times = [e.t_ms for e in level.events]
    windows = []
    for i, rel in enumerate(starts):
        start = origin + rel
        end = start + spec.tau_ms
        last = i == len(starts) - 1
        stop = min(end, origin + duration)
        lo = int(np.searchsorted(times, start, side="left"))
        hi = int(np.searchsorted(times, stop, side="right" if last else "left"))
        windows.append(Window(student_id, level.level_id, i, start, end, stop,
                              level.events[lo:hi], level.events, last))
    return windows


def slice_windows(trace: Trace, spec: WindowSpec) -> list[Window]:
    out: list[Window] = []
    for level in trace.levels:
        out.extend(slice_level(trace.student_id, level, spec))
    return out


# -- feature schema -----------------------------------------------------------

DELTA_FEATURES = (
    "delta_last_place_to_test_s",
    "delta_last_link_to_test_s",
    "delta_test_to_submit_s",
    "delta_level_start_to_first_place_s",
    "mean_inter_place_gap_s",
    "mean_inter_test_gap_s",
    "delta_last_remove_to_place_s",
    "hover_dwell_total_s",
    "drag_duration_total_s",
    "idle_gap_max_s",
)
AGGREGATE_FEATURES = (
    ("tested_before_submit", "flag"),
    ("any_remove", "flag"),
    ("distinct_kinds", "count"),
    ("placements_per_test", "count"),
    ("mouse_distance", "count"),
)


@dataclass(frozen=True)
class FeatureSchema:
    version: str
    columns: tuple[tuple[str, str], ...]

    @property
    def names(self) -> list[str]:
        return [name for name, _ in self.columns]

    def __len__(self) -> int:
        return len(self.columns)


def _schema_v1() -> FeatureSchema:
    cols: list[tuple[str, str]] = []
    for kind in EVENT_KINDS:
        cols.append((f"count_{kind.value}", "count"))
    for kind in EVENT_KINDS:
        cols.append((f"rate_{kind.value}", "rate_per_min"))
    cols.extend((name, "time_delta_s") for name in DELTA_FEATURES)
    cols.extend(AGGREGATE_FEATURES)
    return FeatureSchema("v1", tuple(cols))


SCHEMAS = {"v1": _schema_v1()}
DEFAULT_SCHEMA = "v1"


class SchemaError(ValueError):
    pass


def feature_schema(version: str = DEFAULT_SCHEMA) -> FeatureSchema:
    try:
        return SCHEMAS[version]
    except KeyError:
        raise SchemaError(f"unknown feature schema version {version!r}") from None


@dataclass(frozen=True)
class FeatureVector:
    schema_version: str
    values: tuple[float, ...]

    def as_array(self) -> np.ndarray:
        return np.asarray(self.values, dtype=float)


def _last_before(times: list[int], t: int) -> int | None:
    best = None
    for x in times:
        if x <= t:
            best = x
    return best


def _mean_gap(times: list[int]) -> float:
    if len(times) < 2:
        return -1.0
    return (times[-1] - times[0]) / (len(times) - 1) / 1000.0


def _delta_to_last(anchor_times: list[int], target_times: list[int]) -> float:
    """Seconds from the latest anchor preceding the last target event."""
    if not target_times:
        return -1.0
    t = target_times[-1]
    prev = _last_before(anchor_times, t)
    return -1.0 if prev is None else (t - prev) / 1000.0


def extract_features(window: Window) -> FeatureVector:
    """Compute the v1 feature vector of one window.

    Rates are per minute of effective (possibly truncated) window time.
    Time features are in seconds, with -1 when the quantity is undefined.
    """
    events = window.events
    counts = {k: 0 for k in EVENT_KINDS}
    times: dict[EventKind, list[int]] = {k: [] for k in EVENT_KINDS}
    for ev in events:
        counts[ev.kind] += 1
        times[ev.kind].append(ev.t_ms)
    secs = window.effective_seconds
    scale = 60.0 / secs if secs > 0 else 0.0

    place_t = sorted(times[EventKind.PLACE_SEMAPHORE] + times[EventKind.PLACE_SIGNAL])
    link_t = sorted(times[EventKind.LINK_SEMAPHORE_SIGNAL] + times[EventKind.LINK_SIGNAL_SWITCH])
    test_t = times[EventKind.TEST_PRESSED]
    submit_t = times[EventKind.SUBMIT_PRESSED]

    if times[EventKind.LEVEL_START] and place_t:
        t0 = times[EventKind.LEVEL_START][0]
        after = [t for t in place_t if t >= t0]
        start_to_place = (after[0] - t0) / 1000.0 if after else -1.0
    else:
        start_to_place = -1.0

    hovers = [ev for ev in events if ev.kind in HOVERS]
    dwell = sum(float(ev.get("dwell_ms", 0)) for ev in hovers) / 1000.0 if hovers else -1.0

    drag_total, open_t, paired = 0.0, None, False
    for ev in events:
        if ev.kind is EventKind.DRAG_START:
            open_t = ev.t_ms
        elif ev.kind is EventKind.DRAG_END and open_t is not None:
            drag_total += (ev.t_ms - open_t) / 1000.0
            open_t, paired = None, True
    drag = drag_total if paired else -1.0

    if len(events) >= 2:
        idle = max(b.t_ms - a.t_ms for a, b in zip(events, events[1:])) / 1000.0
    else:
        idle = -1.0

    deltas = [
        _delta_to_last(place_t, test_t),
        _delta_to_last(link_t, test_t),
        _delta_to_last(test_t, submit_t),
        start_to_place,
        _mean_gap(place_t),
        _mean_gap(test_t),
        _delta_to_last(times[EventKind.REMOVE_TO_TRASH], place_t),
        dwell,
        drag,
        idle,
    ]

    tested_before_submit, seen_test = 0.0, False
    for ev in events:
        if ev.kind is EventKind.TEST_PRESSED:
            seen_test = True
        elif ev.kind is EventKind.SUBMIT_PRESSED and seen_test:
            tested_before_submit = 1.0
    mouse = sum(float(ev.get("distance", 0.0)) for ev in events if ev.kind is EventKind.MOUSE_MOVE)
    aggregates = [
        tested_before_submit,
        1.0 if counts[EventKind.REMOVE_TO_TRASH] else 0.0,
        float(sum(1 for c in counts.values() if c)),
        len(place_t) / max(len(test_t), 1),
        mouse,
    ]

    values = [float(counts[k]) for k in EVENT_KINDS]
    values += [counts[k] * scale for k in EVENT_KINDS]
    values += deltas + aggregates
    return FeatureVector(DEFAULT_SCHEMA, tuple(values))


def feature_matrix(windows: list[Window]) -> np.ndarray:
    n = len(feature_schema())
    if not windows:
        return np.zeros((0, n))
    return np.array([extract_features(w).values for w in windows], dtype=float)
