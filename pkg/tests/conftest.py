from __future__ import annotations

import json

import pytest
from hypothesis import HealthCheck, settings

from playertrace.features import Window
from playertrace.synth import GenConfig, generate_cohort
from playertrace.telemetry import Event, EventKind

settings.register_profile("repo", deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("repo")

ACCEPTANCE: dict[int, tuple[bool, str]] = {}


def ev(t: int, kind: str | EventKind, student: str = "s1", level: str = "L1", **payload) -> Event:
    return Event(student, level, int(t), EventKind(kind), payload)


def line(t: int, kind: str, student: str = "s1", level: str = "L1", **payload) -> str:
    return json.dumps({"student": student, "level": level, "t_ms": t, "kind": kind, "payload": payload})


def window_of(events, level_events=None, start_ms=0.0, end_ms=30_000.0, is_last=False) -> Window:
    events = tuple(events)
    return Window("s1", "L1", 0, start_ms, end_ms, end_ms, events,
                  tuple(level_events) if level_events is not None else events, is_last)


@pytest.fixture(scope="session")
def cohort6():
    return generate_cohort(GenConfig(seed=0, n_students=6))


@pytest.fixture(scope="session")
def tiny_cohort():
    return generate_cohort(GenConfig(seed=3, n_students=3, duration_s=(40, 70)))


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[n]
        terminalreporter.write_line(f"criterion {n:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
