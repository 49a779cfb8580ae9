"""Gameplay telemetry: skill catalog, event vocabulary, trace parsing and validation.

Telemetry files are UTF-8 JSON-lines, one event per line::

    {"student": "s1", "level": "L3", "t_ms": 1500, "kind": "place_semaphore", "payload": {...}}

Manifest files are a JSON array of ``{"level": ..., "skills": [names]}``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Iterable, Mapping

SKILL_NAMES: tuple[str, ...] = (
    "Hover over components to see what they do",
    "Use help bar",
    "Drag objects",
    "Place objects on the track",
    "Hover over side arrows to see different colored tracks",
    "Remove unnecessary elements",
    "Deliver packages",
    "Be able to link signals to direction switches",
    "Be able to link semaphores to signals",
    "Understand the use of semaphores",
    "Understand that arrows move at unpredictable rates",
    "Understand that events happen in different orders",
    "Use diverters",
    "Prevent starvation",
    "Block critical sections",
    "Synchronized multiple arrows",
    "Alternating access with semaphores and signals",
    "Testing before submitting",
    "Understand specific delivery points",
    "Understand exchange points",
    "Deliver packages with multiple synchronized arrows",
)
N_SKILLS = len(SKILL_NAMES)
SKILL_IDS: dict[str, int] = {name: i for i, name in enumerate(SKILL_NAMES)}


def skill_id(name: str) -> int:
    try:
        return SKILL_IDS[name]
    except KeyError:
        valid = "\n  ".join(SKILL_NAMES)
        raise UnknownSkillError(f"unknown skill {name!r}; valid names:\n  {valid}") from None


def skill_name(sid: int) -> str:
    if not 0 <= sid < N_SKILLS:
        raise UnknownSkillError(f"skill id {sid} outside [0, {N_SKILLS - 1}]")
    return SKILL_NAMES[sid]


class EventKind(str, Enum):
    HOVER_COMPONENT = "hover_component"
    HOVER_SIDE_ARROW = "hover_side_arrow"
    CLICK_SIDE_ARROW = "click_side_arrow"
    HELP_OPEN = "help_open"
    HELP_GUIDE_READ = "help_guide_read"
    DRAG_START = "drag_start"
    DRAG_END = "drag_end"
    PLACE_SEMAPHORE = "place_semaphore"
    PLACE_SIGNAL = "place_signal"
    MOVE_COMPONENT = "move_component"
    REMOVE_TO_TRASH = "remove_to_trash"
    LINK_SIGNAL_SWITCH = "link_signal_switch"
    LINK_SEMAPHORE_SIGNAL = "link_semaphore_signal"
    UNLINK = "unlink"
    TEST_PRESSED = "test_pressed"
    TEST_RESULT = "test_result"
    SUBMIT_PRESSED = "submit_pressed"
    SUBMIT_RESULT = "submit_result"
    PACKAGE_DELIVERED = "package_delivered"
    PACKAGE_LOST = "package_lost"
    PACKAGE_EXCHANGED = "package_exchanged"
    ARROW_BLOCKED = "arrow_blocked"
    LEVEL_START = "level_start"
    LEVEL_END = "level_end"
    MOUSE_MOVE = "mouse_move"


EVENT_KINDS: tuple[EventKind, ...] = tuple(EventKind)

# Documented payload keys per kind. Only the result kinds have required keys;
# everything else falls back to neutral defaults when a key is absent.
PAYLOAD_KEYS: dict[EventKind, tuple[str, ...]] = {
    EventKind.HOVER_COMPONENT: ("component", "component_type", "dwell_ms"),
    EventKind.HOVER_SIDE_ARROW: ("arrow", "dwell_ms"),
    EventKind.CLICK_SIDE_ARROW: ("arrow",),
    EventKind.HELP_OPEN: (),
    EventKind.HELP_GUIDE_READ: ("guide",),
    EventKind.DRAG_START: ("component", "component_type"),
    EventKind.DRAG_END: ("component", "component_type"),
    EventKind.PLACE_SEMAPHORE: ("component", "track", "on_track"),
    EventKind.PLACE_SIGNAL: ("component", "track", "on_track"),
    EventKind.MOVE_COMPONENT: ("component", "component_type", "distance"),
    EventKind.REMOVE_TO_TRASH: ("component", "component_type"),
    EventKind.LINK_SIGNAL_SWITCH: ("signal", "switch"),
    EventKind.LINK_SEMAPHORE_SIGNAL: ("semaphore", "signal", "semaphore_track", "signal_track"),
    EventKind.UNLINK: ("component",),
    EventKind.TEST_PRESSED: (),
    EventKind.TEST_RESULT: ("success", "delivered", "required", "lost"),
    EventKind.SUBMIT_PRESSED: (),
    EventKind.SUBMIT_RESULT: ("success", "delivered", "required", "lost"),
    EventKind.PACKAGE_DELIVERED: ("package", "point"),
    EventKind.PACKAGE_LOST: ("package",),
    EventKind.PACKAGE_EXCHANGED: ("package", "point"),
    EventKind.ARROW_BLOCKED: ("arrow", "component"),
    EventKind.LEVEL_START: (),
    EventKind.LEVEL_END: (),
    EventKind.MOUSE_MOVE: ("distance",),
}
REQUIRED_PAYLOAD_KEYS: dict[EventKind, tuple[str, ...]] = {
    EventKind.TEST_RESULT: ("success",),
    EventKind.SUBMIT_RESULT: ("success",),
}


class TelemetryError(ValueError):
    """Raised for malformed telemetry or manifest input."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        super().__init__(f"line {line}: {message}" if line is not None else message)


class UnknownSkillError(TelemetryError):
    pass


@dataclass(frozen=True)
class Event:
    student_id: str
    level_id: str
    t_ms: int
    kind: EventKind
    payload: Mapping[str, Any] = field(default_factory=dict)

    def get(self, key: str, default: Any = None) -> Any:
        return self.payload.get(key, default)

    def to_record(self) -> dict[str, Any]:
        return {
            "student": self.student_id,
            "level": self.level_id,
            "t_ms": self.t_ms,
            "kind": self.kind.value,
            "payload": dict(self.payload),
        }


@dataclass(frozen=True)
class LevelPlay:
    """All events of one level attempt, sorted by time."""

    level_id: str
    events: tuple[Event, ...]

    @property
    def start_ms(self) -> int:
        return self.events[0].t_ms if self.events else 0

    @property
    def end_ms(self) -> int:
        return self.events[-1].t_ms if self.events else 0

    @property
    def duration_ms(self) -> int:
        return self.end_ms - self.start_ms


@dataclass(frozen=True)
class Trace:
    student_id: str
    levels: tuple[LevelPlay, ...]

    @property
    def n_events(self) -> int:
        return sum(len(lv.events) for lv in self.levels)

    def events(self) -> list[Event]:
        return [e for lv in self.levels for e in lv.events]


@dataclass(frozen=True)
class LevelManifest:
    """Mapping level id -> the set of skill ids the level exercises."""

    levels: Mapping[str, frozenset[int]]

    def __contains__(self, level_id: object) -> bool:
        return level_id in self.levels

    def __getitem__(self, level_id: str) -> frozenset[int]:
        return self.levels[level_id]

    def __len__(self) -> int:
        return len(self.levels)

    def to_records(self) -> list[dict[str, Any]]:
        return [
            {"level": lid, "skills": [SKILL_NAMES[s] for s in sorted(skills)]}
            for lid, skills in self.levels.items()
        ]


def _lines(source: str | Iterable[str]) -> Iterable[str]:
    if isinstance(source, str):
        return source.splitlines()
    return source


def _parse_event(raw: str, lineno: int) -> Event:
    try:
        rec = json.loads(raw)
    except json.JSONDecodeError as exc:
        raise TelemetryError(f"malformed JSON ({exc.msg})", lineno) from None
    if not isinstance(rec, dict):
        raise TelemetryError("record is not a JSON object", lineno)
    for key in ("student", "level", "t_ms", "kind"):
        if key not in rec:
            raise TelemetryError(f"missing field {key!r}", lineno)
    student, level, t_ms = rec["student"], rec["level"], rec["t_ms"]
    if not isinstance(student, str) or not isinstance(level, str):
        raise TelemetryError("'student' and 'level' must be strings", lineno)
    if isinstance(t_ms, bool) or not isinstance(t_ms, int) or t_ms < 0:
        raise TelemetryError(f"'t_ms' must be a non-negative integer, got {t_ms!r}", lineno)
    try:
        kind = EventKind(rec["kind"])
    except ValueError:
        raise TelemetryError(f"unknown event kind {rec['kind']!r}", lineno) from None
    payload = rec.get("payload", {})
    if payload is None:
        payload = {}
    if not isinstance(payload, dict):
        raise TelemetryError("'payload' must be a JSON object", lineno)
    for key in REQUIRED_PAYLOAD_KEYS.get(kind, ()):
        if key not in payload:
            raise TelemetryError(f"{kind.value} payload lacks required key {key!r}", lineno)
    return Event(student, level, t_ms, kind, payload)


def parse_traces(source: str | Iterable[str]) -> list[Trace]:
    """Parse a JSON-lines stream holding any number of students.

    Students and levels keep their order of first appearance. Within one
    (student, level) stream timestamps must not decrease and ``level_start``
    may appear at most once. Blank lines are skipped.
    """
    streams: dict[str, dict[str, list[Event]]] = {}
    last_t: dict[tuple[str, str], int] = {}
    started: set[tuple[str, str]] = set()
    for lineno, raw in enumerate(_lines(source), start=1):
        if not raw.strip():
            continue
        ev = _parse_event(raw, lineno)
        key = (ev.student_id, ev.level_id)
        prev = last_t.get(key)
        if prev is not None and ev.t_ms < prev:
            raise TelemetryError(
                f"timestamp regression in level {ev.level_id!r} of student "
                f"{ev.student_id!r}: {ev.t_ms} < {prev}",
                lineno,
            )
        if ev.kind is EventKind.LEVEL_START:
            if key in started:
                raise TelemetryError(
                    f"duplicate level_start for level {ev.level_id!r} of student {ev.student_id!r}",
                    lineno,
                )
            started.add(key)
        last_t[key] = ev.t_ms
        streams.setdefault(ev.student_id, {}).setdefault(ev.level_id, []).append(ev)
    return [
        Trace(student, tuple(LevelPlay(lid, tuple(evs)) for lid, evs in levels.items()))
        for student, levels in streams.items()
    ]


def parse_trace(source: str | Iterable[str]) -> Trace:
    """Parse a stream that must contain exactly one student."""
    traces = parse_traces(source)
    if len(traces) != 1:
        raise TelemetryError(f"expected one student in stream, found {len(traces)}")
    return traces[0]


def serialize_trace(trace: Trace) -> list[str]:
    return [json.dumps(e.to_record(), sort_keys=True) for e in trace.events()]


def read_traces(path) -> list[Trace]:
    with open(path, encoding="utf-8") as fh:
        return parse_traces(fh)


def load_manifest(records: Iterable[Mapping[str, Any]]) -> LevelManifest:
    levels: dict[str, frozenset[int]] = {}
    for i, rec in enumerate(records):
        if not isinstance(rec, Mapping) or "level" not in rec or "skills" not in rec:
            raise TelemetryError(f"manifest record {i} needs 'level' and 'skills'")
        lid = rec["level"]
        if lid in levels:
            raise TelemetryError(f"duplicate manifest entry for level {lid!r}")
        names = rec["skills"]
        if isinstance(names, str) or not names:
            raise TelemetryError(f"level {lid!r} has an empty skill set")
        levels[lid] = frozenset(skill_id(n) for n in names)
    return LevelManifest(levels)


def read_manifest(path) -> LevelManifest:
    with open(path, encoding="utf-8") as fh:
        try:
            records = json.load(fh)
        except json.JSONDecodeError as exc:
            raise TelemetryError(f"manifest is not valid JSON: {exc.msg}") from None
    if not isinstance(records, list):
        raise TelemetryError("manifest must be a JSON array")
    return load_manifest(records)


@dataclass(frozen=True)
class Diagnostic:
    code: str
    student_id: str
    level_id: str
    message: str

    def __str__(self) -> str:
        return f"[{self.code}] {self.student_id}/{self.level_id}: {self.message}"


def unmatched_drags(events: Iterable[Event]) -> list[Event]:
    """Return drag events lacking a partner.

    A drag_start is closed by the next drag_end; a second drag_start before
    that leaves the first one open.
    """
    open_start: Event | None = None
    bad: list[Event] = []
    for ev in events:
        if ev.kind is EventKind.DRAG_START:
            if open_start is not None:
                bad.append(open_start)
            open_start = ev
        elif ev.kind is EventKind.DRAG_END:
            if open_start is None:
                bad.append(ev)
            open_start = None
    if open_start is not None:
        bad.append(open_start)
    return bad


def validate_trace(trace: Trace, manifest: LevelManifest) -> list[Diagnostic]:
    diags: list[Diagnostic] = []
    for lv in trace.levels:
        if lv.level_id not in manifest:
            diags.append(Diagnostic("unknown-level", trace.student_id, lv.level_id,
                                    "level is absent from the manifest"))
        if lv.duration_ms == 0:
            diags.append(Diagnostic("zero-duration", trace.student_id, lv.level_id,
                                    "level has zero duration"))
        for ev in unmatched_drags(lv.events):
            diags.append(Diagnostic("unmatched-drag", trace.student_id, lv.level_id,
                                    f"{ev.kind.value} at t_ms={ev.t_ms} has no partner"))
    return diags
