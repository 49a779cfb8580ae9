from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from playertrace.features import (
    DELTA_FEATURES,
    SchemaError,
    WindowSpec,
    extract_features,
    feature_schema,
    slice_level,
    window_starts,
)
from playertrace.telemetry import EVENT_KINDS, LevelPlay

from .conftest import ev, window_of

SCHEMA = feature_schema("v1")
IDX = {n: i for i, n in enumerate(SCHEMA.names)}


def level(times_kinds, level_id="L1"):
    return LevelPlay(level_id, tuple(ev(t, k, level=level_id) for t, k in times_kinds))


def test_stride_is_half_tau():
    spec = WindowSpec(20)
    assert spec.stride_s == 10
    with pytest.raises(ValueError):
        WindowSpec(0)


def test_sixty_seconds_twenty_tau():
    lv = level([(0, "level_start"), (25_000, "unlink"), (60_000, "level_end")])
    wins = slice_level("s1", lv, WindowSpec(20))
    assert [w.start_ms for w in wins] == [0, 10_000, 20_000, 30_000, 40_000, 50_000]
    assert wins[-1].stop_ms == 60_000
    assert sum(1 for w in wins for e in w.events if e.t_ms == 25_000) == 2
    assert wins[-1].events[-1].kind.value == "level_end"


def test_short_level_single_window():
    lv = level([(0, "level_start"), (5_000, "level_end")])
    wins = slice_level("s1", lv, WindowSpec(10))
    assert len(wins) == 1
    assert (wins[0].start_ms, wins[0].stop_ms) == (0, 5_000)
    assert len(wins[0].events) == 2


def test_thirty_seconds_thirty_tau():
    lv = level([(0, "level_start"), (30_000, "level_end")])
    wins = slice_level("s1", lv, WindowSpec(30))
    assert [w.start_ms for w in wins] == [0, 15_000]
    assert wins[1].effective_seconds == 15


def test_windows_are_relative_to_level_start():
    lv = level([(100_000, "level_start"), (160_000, "level_end")])
    wins = slice_level("s1", lv, WindowSpec(20))
    assert wins[0].start_ms == 100_000 and len(wins) == 6


@given(st.integers(1, 400_000), st.sampled_from([10, 20, 30, 7.5]))
def test_starts_form_progression(duration, tau):
    spec = WindowSpec(tau)
    starts = window_starts(duration, spec)
    assert starts[0] == 0
    assert np.allclose(np.diff(starts), spec.stride_ms) if len(starts) > 1 else True
    if duration >= spec.stride_ms:
        assert len(starts) == math.floor(duration / spec.stride_ms)
        assert duration - starts[-1] >= spec.stride_ms


@given(st.integers(20_000, 300_000), st.lists(st.integers(0, 10**6), max_size=40),
       st.sampled_from([10, 20, 30]))
def test_sliding_coverage(duration, raw, tau):
    times = sorted({r % (duration + 1) for r in raw} | {0, duration})
    lv = level([(t, "mouse_move") for t in times])
    spec = WindowSpec(tau)
    wins = slice_level("s1", lv, spec)
    n = len(wins)
    for t in times:
        c = sum(1 for w in wins for e in w.events if e.t_ms == t)
        assert 1 <= c <= 2
        if n >= 2:
            assert (c == 2) == (spec.stride_ms <= t < n * spec.stride_ms)


def test_schema_shape():
    assert len(SCHEMA) == 65
    assert len(set(SCHEMA.names)) == 65
    assert SCHEMA.names[:2] == ["count_hover_component", "count_hover_side_arrow"]
    assert {fam for _, fam in SCHEMA.columns} == {"count", "rate_per_min", "time_delta_s", "flag"}
    with pytest.raises(SchemaError):
        feature_schema("v0")


def test_empty_window():
    v = np.array(extract_features(window_of([])).values)
    n = len(EVENT_KINDS)
    assert (v[:2 * n] == 0).all()
    assert (v[2 * n:2 * n + len(DELTA_FEATURES)] == -1).all()
    assert len(v) == len(SCHEMA)


def test_rate_per_minute():
    evs = [ev(t, "test_pressed") for t in (1_000, 5_000, 9_000)]
    v = extract_features(window_of(evs, end_ms=20_000)).values
    assert v[IDX["count_test_pressed"]] == 3
    assert v[IDX["rate_test_pressed"]] == pytest.approx(9.0)


def test_truncated_window_uses_effective_time():
    from playertrace.features import Window
    evs = (ev(16_000, "unlink"),)
    w = Window("s1", "L1", 1, 15_000, 45_000, 30_000, evs, evs, True)
    assert extract_features(w).values[IDX["rate_unlink"]] == pytest.approx(4.0)


def test_time_deltas():
    evs = [ev(0, "level_start"), ev(2_000, "place_semaphore"), ev(3_000, "drag_start"),
           ev(3_500, "drag_end"), ev(4_000, "place_signal"), ev(7_000, "test_pressed"),
           ev(9_000, "submit_pressed")]
    v = extract_features(window_of(evs)).values
    assert v[IDX["delta_last_place_to_test_s"]] == 3.0
    assert v[IDX["delta_test_to_submit_s"]] == 2.0
    assert v[IDX["delta_level_start_to_first_place_s"]] == 2.0
    assert v[IDX["mean_inter_place_gap_s"]] == 2.0
    assert v[IDX["drag_duration_total_s"]] == 0.5
    assert v[IDX["idle_gap_max_s"]] == 3.0
    assert v[IDX["tested_before_submit"]] == 1.0
    assert v[IDX["placements_per_test"]] == 2.0
    assert v[IDX["delta_last_link_to_test_s"]] == -1.0


@given(st.lists(st.tuples(st.integers(0, 30_000), st.sampled_from([k.value for k in EVENT_KINDS])),
                max_size=25))
def test_features_finite_and_deterministic(rows):
    evs = [ev(t, k, distance=1.5, dwell_ms=300) for t, k in sorted(rows)]
    a = extract_features(window_of(evs))
    b = extract_features(window_of(list(evs)))
    assert a == b
    v = np.array(a.values)
    assert np.isfinite(v).all()
    assert (v[len(EVENT_KINDS):2 * len(EVENT_KINDS)] >= 0).all()
