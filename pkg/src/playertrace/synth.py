"""Deterministic synthetic cohorts: telemetry, strategy truth, mastery truth.

Each student gets a mastery value per skill. On every level the student's
strategy follows a sticky chain over 5-second segments whose stationary law
depends on the mean mastery m of the level's skills::

    P(trial-and-error) = (1 - m)^2,  P(sequential) = 2m(1 - m),  P(parallel) = m^2

so the expected strategy value (0 / 0.5 / 1) equals m. Behaviour within a
strategy episode is drawn from the published per-strategy event rates in
``DEFAULT_RATES``. Skills at or above ``mastery_threshold`` additionally
produce the events their detection rules look for; unmastered skills
produce near-miss variants (short hovers, off-track placements, lost
packages, submissions without a recent test, ...).

With ``noise == 0`` events are evenly spaced and rates are exact; with
``noise > 0`` events follow Poisson processes, each student's rates are
scaled by a log-normal factor (sigma = 0.5 * noise) and a fraction
``confusion * noise`` of strategy episodes behave like a different strategy
than their annotated label.
"""

from __future__ import annotations

import csv
import io
import json
import os
from dataclasses import asdict, dataclass, field
from typing import Any, Mapping

import numpy as np

from ._io import write_atomic
from .features import WindowSpec, slice_windows
from .strategy import StrategyLabel
from .telemetry import (
    N_SKILLS,
    SKILL_NAMES,
    Event,
    EventKind,
    LevelManifest,
    LevelPlay,
    Trace,
    load_manifest,
    parse_traces,
    serialize_trace,
    skill_id,
)

K = EventKind
TE, SEQ, PAR = StrategyLabel.TRIAL_AND_ERROR, StrategyLabel.SEQUENTIAL, StrategyLabel.PARALLEL

LEVEL_SETS: dict[str, dict[str, tuple[str, ...]]] = {
    "A": {
        "A1": ("Understand the use of semaphores", "Block critical sections"),
        "A2": ("Block critical sections", "Use diverters"),
        "A3": ("Understand that arrows move at unpredictable rates",
               "Understand that events happen in different orders"),
        "A4": ("Synchronized multiple arrows", "Alternating access with semaphores and signals"),
        "A5": ("Prevent starvation", "Understand the use of semaphores"),
        "A6": ("Deliver packages with multiple synchronized arrows", "Synchronized multiple arrows",
               "Be able to link semaphores to signals"),
        "A7": ("Use diverters", "Understand that events happen in different orders"),
        "A8": ("Alternating access with semaphores and signals", "Prevent starvation",
               "Understand that arrows move at unpredictable rates"),
    },
    "B": {
        "B1": ("Understand the use of semaphores", "Use diverters"),
        "B2": ("Block critical sections", "Understand that arrows move at unpredictable rates"),
        "B3": ("Understand that events happen in different orders", "Prevent starvation"),
        "B4": ("Alternating access with semaphores and signals", "Block critical sections"),
        "B5": ("Synchronized multiple arrows", "Understand that events happen in different orders"),
        "B6": ("Deliver packages with multiple synchronized arrows", "Deliver packages"),
        "B7": ("Use diverters", "Understand that arrows move at unpredictable rates"),
        "B8": ("Prevent starvation", "Synchronized multiple arrows", "Understand the use of semaphores"),
    },
}

# Per-strategy action rates, events per minute.
DEFAULT_RATES: dict[str, dict[str, float]] = {
    "TRIAL_AND_ERROR": {"test": 16.0, "place": 5.0, "remove": 4.0, "unlink": 2.0, "move": 3.0,
                        "link": 0.2, "link_switch": 0.1, "cross_link": 0.05, "side_arrow": 0.5,
                        "hover": 4.0, "help": 0.5, "mouse": 30.0},
    "SEQUENTIAL": {"test": 6.0, "place": 4.0, "remove": 1.0, "unlink": 0.5, "move": 1.0,
                   "link": 2.0, "link_switch": 1.0, "cross_link": 0.1, "side_arrow": 1.0,
                   "hover": 4.0, "help": 0.5, "mouse": 15.0},
    "PARALLEL": {"test": 1.5, "place": 5.0, "remove": 0.2, "unlink": 0.1, "move": 0.5,
                 "link": 6.0, "link_switch": 2.5, "cross_link": 1.5, "side_arrow": 3.0,
                 "hover": 4.0, "help": 0.5, "mouse": 6.0},
}

UNANNOTATED_SKILLS = ("Prevent starvation", "Deliver packages with multiple synchronized arrows")


class ConfigError(ValueError):
    pass


@dataclass
class GenConfig:
    seed: int = 0
    n_students: int = 6
    level_set: str = "A"
    levels: dict[str, tuple[str, ...]] | None = None
    duration_s: tuple[int, int] = (120, 240)
    noise: float = 0.0
    confusion: float = 0.15
    segment_s: float = 5.0
    persistence: float = 0.9
    mastery: str | float = "uniform"
    mastery_threshold: float = 0.7
    binary_annotation_rate: float = 0.8
    unannotated_skills: tuple[str, ...] = UNANNOTATED_SKILLS
    untested_submit_s: float = 30.0
    packages: tuple[int, int] = (2, 3)
    gap_s: float = 10.0
    rates: dict[str, dict[str, float]] = field(default_factory=lambda: json.loads(json.dumps(DEFAULT_RATES)))
    student_prefix: str = "s"

    def level_catalog(self) -> dict[str, tuple[str, ...]]:
        if self.levels is not None:
            return {k: tuple(v) for k, v in self.levels.items()}
        try:
            return LEVEL_SETS[self.level_set]
        except KeyError:
            raise ConfigError(f"unknown level set {self.level_set!r}") from None

    def validate(self) -> None:
        if self.n_students < 1:
            raise ConfigError("n_students must be at least 1")
        lo, hi = self.duration_s
        if not 0 < lo <= hi:
            raise ConfigError("duration_s must satisfy 0 < min <= max")
        if self.noise < 0:
            raise ConfigError("noise must be non-negative")
        if not 0 <= self.persistence < 1:
            raise ConfigError("persistence must lie in [0, 1)")
        if self.segment_s <= 0:
            raise ConfigError("segment_s must be positive")
        if isinstance(self.mastery, str):
            if self.mastery != "uniform":
                raise ConfigError(f"mastery must be 'uniform' or a number, got {self.mastery!r}")
        elif not 0.0 <= float(self.mastery) <= 1.0:
            raise ConfigError("constant mastery must lie in [0, 1]")
        for strat in StrategyLabel:
            rates = self.rates.get(strat.name)
            if rates is None:
                raise ConfigError(f"missing rates for {strat.name}")
            missing = set(DEFAULT_RATES[strat.name]) - set(rates)
            if missing:
                raise ConfigError(f"missing {strat.name} rates: {sorted(missing)}")
            bad = sorted(k for k, v in rates.items() if not v > 0)
            if bad:
                raise ConfigError(f"{strat.name} rates must be positive: {bad}")
        for name in self.unannotated_skills:
            skill_id(name)
        for skills in self.level_catalog().values():
            if not skills:
                raise ConfigError("every level needs at least one skill")
            for name in skills:
                skill_id(name)

    def to_dict(self) -> dict[str, Any]:
        d = asdict(self)
        d["duration_s"] = list(self.duration_s)
        d["packages"] = list(self.packages)
        d["unannotated_skills"] = list(self.unannotated_skills)
        if self.levels is not None:
            d["levels"] = {k: list(v) for k, v in self.levels.items()}
        return d

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> "GenConfig":
        known = set(cls.__dataclass_fields__)
        extra = set(d) - known
        if extra:
            raise ConfigError(f"unknown generator config keys: {sorted(extra)}")
        kw = dict(d)
        for key in ("duration_s", "packages", "unannotated_skills"):
            if key in kw:
                kw[key] = tuple(kw[key])
        if "rates" in kw:
            base = json.loads(json.dumps(DEFAULT_RATES))
            for strat, rates in kw["rates"].items():
                base.setdefault(strat, {}).update(rates)
            kw["rates"] = base
        cfg = cls(**kw)
        cfg.validate()
        return cfg


def propensity(m: float) -> np.ndarray:
    """Strategy distribution (TE, SEQ, PAR) for mean skill mastery ``m``."""
    m = min(max(float(m), 0.0), 1.0)
    return np.array([(1 - m) ** 2, 2 * m * (1 - m), m * m])


@dataclass(frozen=True)
class Segment:
    start_ms: int
    end_ms: int
    label: StrategyLabel


@dataclass
class Cohort:
    config: GenConfig
    traces: list[Trace]
    manifest: LevelManifest
    segments: dict[tuple[str, str], list[Segment]]
    mastery: dict[str, np.ndarray]
    outcomes: list[tuple[str, str, int, float]]

    @property
    def students(self) -> list[str]:
        return [t.student_id for t in self.traces]

    def outcome_stream(self) -> list[tuple[str, int, float]]:
        return [(s, k, v) for s, _, k, v in self.outcomes]


class _LevelWriter:
    """Collects events of one level; sorted by time, stable on insertion order."""

    def __init__(self, student: str, level: str):
        self.student, self.level = student, level
        self.items: list[tuple[int, int, EventKind, dict]] = []

    def add(self, t: float, kind: EventKind, **payload: Any) -> None:
        self.items.append((int(round(t)), len(self.items), kind, payload))

    def events(self) -> tuple[Event, ...]:
        return tuple(Event(self.student, self.level, t, k, p)
                     for t, _, k, p in sorted(self.items, key=lambda x: (x[0], x[1])))


class _StudentGen:
    def __init__(self, cfg: GenConfig, index: int):
        self.cfg = cfg
        self.rng = np.random.default_rng(np.random.SeedSequence([cfg.seed, index]))
        self.sid = f"{cfg.student_prefix}{index + 1:02d}"
        if cfg.mastery == "uniform":
            self.mastery = self.rng.uniform(0.0, 1.0, N_SKILLS)
        else:
            self.mastery = np.full(N_SKILLS, float(cfg.mastery))
        self.mastered = self.mastery >= cfg.mastery_threshold
        sigma = 0.5 * cfg.noise
        self.rate_scale = np.exp(self.rng.normal(0.0, sigma, 3)) if sigma > 0 else np.ones(3)

    def has(self, name: str) -> bool:
        return bool(self.mastered[skill_id(name)])

    # -- strategy timeline --------------------------------------------------

    def timeline(self, duration_ms: int, m_kc: float) -> list[Segment]:
        seg = int(round(self.cfg.segment_s * 1000))
        probs = propensity(m_kc)
        segs: list[Segment] = []
        cur = None
        for a in range(0, duration_ms, seg):
            if cur is None or self.rng.random() >= self.cfg.persistence:
                cur = StrategyLabel(int(self.rng.choice(3, p=probs)))
            b = min(a + seg, duration_ms)
            if segs and segs[-1].label == cur:
                segs[-1] = Segment(segs[-1].start_ms, b, cur)
            else:
                segs.append(Segment(a, b, cur))
        return segs

    def behaviour(self, label: StrategyLabel) -> StrategyLabel:
        p_swap = min(0.5, self.cfg.confusion * self.cfg.noise)
        if p_swap > 0 and self.rng.random() < p_swap:
            others = [s for s in StrategyLabel if s != label]
            return others[int(self.rng.integers(2))]
        return label

    def times(self, a: float, b: float, rate: float, strat: StrategyLabel) -> list[float]:
        if rate <= 0 or b <= a:
            return []
        if self.cfg.noise == 0:
            step = 60000.0 / rate
            out, t = [], a + step / 2
            while t < b:
                out.append(t)
                t += step
            return out
        lam = rate * self.rate_scale[int(strat)] / 60000.0
        out, t = [], a
        while True:
            t += self.rng.exponential(1.0 / lam)
            if t >= b:
                return out
            out.append(t)

    # -- one level ----------------------------------------------------------

    def level(self, level_id: str, kc: frozenset[int], t0: int) -> tuple[LevelPlay, list[Segment], int]:
        cfg = self.cfg
        lo, hi = cfg.duration_s
        duration = int(self.rng.integers(lo, hi + 1)) * 1000
        m_kc = float(np.mean([self.mastery[s] for s in kc]))
        segs = self.timeline(duration, m_kc)
        w = _LevelWriter(self.sid, level_id)
        end = t0 + duration
        submit_t = end - 3000
        act_end = submit_t - 500
        required = int(self.rng.integers(cfg.packages[0], cfg.packages[1] + 1))
        solvable = (m_kc > cfg.mastery_threshold and self.has("Deliver packages")
                    and self.has("Understand specific delivery points")
                    and self.has("Block critical sections"))
        state = {"sem": 0, "sig": 0, "placed": 0, "pkg": 0, "last_sem": None, "last_sig": None}

        w.add(t0, K.LEVEL_START)
        if not self.has("Understand that arrows move at unpredictable rates"):
            # stacked unlinked semaphores and a long semaphore drag
            for k in range(2):
                w.add(t0 + 1000 + 500 * k, K.PLACE_SEMAPHORE, component=f"semx{k}", track="t0",
                      on_track=self.has("Place objects on the track"))
            w.add(t0 + 2500, K.MOVE_COMPONENT, component="semx0", component_type="semaphore",
                  distance=250.0)

        for seg in segs:
            a, b = t0 + seg.start_ms, min(t0 + seg.end_ms, act_end)
            beh = self.behaviour(seg.label)
            self._emit_episode(w, a, b, beh, required, solvable, state)

        if not self.has("Testing before submitting"):
            quiet = submit_t - cfg.untested_submit_s * 1000
            w.items = [it for it in w.items
                       if not (quiet <= it[0] < submit_t and it[3].get("_test"))]
        else:
            self._emit_test(w, submit_t - 6000, PAR, required, solvable)
        for it in w.items:
            it[3].pop("_test", None)

        w.add(submit_t, K.SUBMIT_PRESSED)
        delivered, lost = self._delivery(required, PAR)
        w.add(submit_t + 1500, K.SUBMIT_RESULT, success=bool(solvable), delivered=delivered,
              required=required, lost=lost)
        w.add(end, K.LEVEL_END)
        shifted = [Segment(s.start_ms + t0, s.end_ms + t0, s.label) for s in segs]
        return LevelPlay(level_id, w.events()), shifted, end

    def _delivery(self, required: int, beh: StrategyLabel) -> tuple[int, int]:
        ok = beh != TE
        delivered = required if ok and self.has("Deliver packages") else required - 1
        lost = 0 if ok and self.has("Understand specific delivery points") else 1
        return delivered, lost

    def _emit_test(self, w: _LevelWriter, t: float, beh: StrategyLabel, required: int,
                   solvable: bool) -> None:
        delivered, lost = self._delivery(required, beh)
        w.add(t, K.TEST_PRESSED, _test=True)
        for k in range(delivered):
            w.add(t + 300 + 100 * k, K.PACKAGE_DELIVERED, _test=True, package=f"p{k}", point=f"d{k}")
        if lost:
            w.add(t + 900, K.PACKAGE_LOST, _test=True, package=f"p{required - 1}")
        if beh != TE and self.has("Understand exchange points"):
            w.add(t + 1000, K.PACKAGE_EXCHANGED, _test=True, package="p0", point="x0")
        if beh != TE:
            w.add(t + 1100, K.ARROW_BLOCKED, _test=True, arrow="a0", component="sem0")
        w.add(t + 1500, K.TEST_RESULT, _test=True, success=bool(solvable and beh == PAR),
              delivered=delivered, required=required, lost=lost)

    def _emit_episode(self, w: _LevelWriter, a: float, b: float, beh: StrategyLabel,
                      required: int, solvable: bool, state: dict) -> None:
        rates = self.cfg.rates[beh.name]
        r = lambda key: rates.get(key, 0.0)  # noqa: E731

        for t in self.times(a, b - 1500, r("test"), beh):
            self._emit_test(w, t, beh, required, solvable)

        drag = self.has("Drag objects")
        on_track = self.has("Place objects on the track")
        for t in self.times(a + 1000, b, r("place"), beh):
            if state["placed"] % 2 == 0:
                k = state["sem"]
                comp, kind, ctype = f"sem{k}", K.PLACE_SEMAPHORE, "semaphore"
                track = f"t{k % 3}"
                state["sem"] += 1
                state["last_sem"] = (comp, track)
            else:
                k = state["sig"]
                comp, kind, ctype = f"sig{k}", K.PLACE_SIGNAL, "signal"
                track = f"t{(k + 1) % 3}"
                state["sig"] += 1
                state["last_sig"] = (comp, track)
            state["placed"] += 1
            if drag:
                w.add(t - 800, K.DRAG_START, component=comp, component_type=ctype)
                w.add(t - 10, K.DRAG_END, component=comp, component_type=ctype)
            w.add(t, kind, component=comp, track=track, on_track=on_track)

        removable = self.has("Remove unnecessary elements")
        for t in self.times(a, b, r("remove"), beh):
            w.add(t, K.REMOVE_TO_TRASH, component=f"rm{int(t)}",
                  component_type="signal" if removable else "arrow")
        for t in self.times(a, b, r("unlink"), beh):
            w.add(t, K.UNLINK, component="sem0")
        for t in self.times(a, b, r("move"), beh):
            w.add(t, K.MOVE_COMPONENT, component="sig0", component_type="signal", distance=20.0)

        if self.has("Be able to link semaphores to signals"):
            for t in self.times(a, b, r("link"), beh):
                sem, sem_track = state["last_sem"] or ("sem0", "t0")
                sig, _ = state["last_sig"] or ("sig0", sem_track)
                w.add(t, K.LINK_SEMAPHORE_SIGNAL, semaphore=sem, signal=sig,
                      semaphore_track=sem_track, signal_track=sem_track)
            if self.has("Synchronized multiple arrows"):
                for t in self.times(a, b - 2000, r("cross_link"), beh):
                    w.add(t, K.LINK_SEMAPHORE_SIGNAL, semaphore="semA", signal="sigB",
                          semaphore_track="t0", signal_track="t1")
                    w.add(t + 1500, K.LINK_SEMAPHORE_SIGNAL, semaphore="semB", signal="sigA",
                          semaphore_track="t1", signal_track="t0")
        if self.has("Be able to link signals to direction switches"):
            for t in self.times(a, b, r("link_switch"), beh):
                w.add(t, K.LINK_SIGNAL_SWITCH, signal="sig0", switch="sw0")

        dwell = 900 if self.has("Hover over components to see what they do") else 200
        for t in self.times(a, b, r("hover"), beh):
            w.add(t, K.HOVER_COMPONENT, component="sem0", component_type="semaphore", dwell_ms=dwell)
        if self.has("Hover over side arrows to see different colored tracks"):
            for i, t in enumerate(self.times(a, b, r("side_arrow"), beh)):
                kind = K.HOVER_SIDE_ARROW if i % 2 == 0 else K.CLICK_SIDE_ARROW
                extra = {"dwell_ms": 700} if kind is K.HOVER_SIDE_ARROW else {}
                w.add(t, kind, arrow="a0", **extra)
        reads = self.has("Use help bar")
        for t in self.times(a, b - 3000, r("help"), beh):
            w.add(t, K.HELP_OPEN)
            if reads:
                w.add(t + 2500, K.HELP_GUIDE_READ, guide="semaphores")
        for t in self.times(a, b, r("mouse"), beh):
            dist = 120.0 if self.cfg.noise == 0 else float(self.rng.gamma(4.0, 30.0))
            w.add(t, K.MOUSE_MOVE, distance=round(dist, 3))

    # -- ground-truth annotations ------------------------------------------

    def annotate(self, level_id: str) -> list[tuple[str, str, int, float]]:
        cfg = self.cfg
        unannotated = {skill_id(n) for n in cfg.unannotated_skills}
        out = []
        for s in range(N_SKILLS):
            m = float(self.mastery[s])
            coin = self.rng.random()
            draw = self.rng.random()
            if s not in unannotated and coin < cfg.binary_annotation_rate:
                value = 1.0 if draw < m else 0.0
            else:
                value = min((0.25, 0.5, 0.75), key=lambda g: (abs(g - m), g))
            out.append((self.sid, level_id, s, value))
        return out


def generate_cohort(config: GenConfig | None = None) -> Cohort:
    cfg = config or GenConfig()
    cfg.validate()
    catalog = cfg.level_catalog()
    manifest = load_manifest([{"level": k, "skills": list(v)} for k, v in catalog.items()])
    traces, segments, mastery, outcomes = [], {}, {}, []
    for i in range(cfg.n_students):
        gen = _StudentGen(cfg, i)
        t = 0
        levels = []
        for lid in catalog:
            play, segs, end = gen.level(lid, manifest[lid], t)
            levels.append(play)
            segments[(gen.sid, lid)] = segs
            outcomes.extend(gen.annotate(lid))
            t = end + int(cfg.gap_s * 1000)
        traces.append(Trace(gen.sid, tuple(levels)))
        mastery[gen.sid] = gen.mastery.copy()
    return Cohort(cfg, traces, manifest, segments, mastery, outcomes)


def window_label(segments: list[Segment], start_ms: float, stop_ms: float) -> StrategyLabel:
    """Strategy covering most of [start, stop); ties go to the lower label."""
    cover = np.zeros(3)
    for seg in segments:
        overlap = min(seg.end_ms, stop_ms) - max(seg.start_ms, start_ms)
        if overlap > 0:
            cover[int(seg.label)] += overlap
    if stop_ms <= start_ms:
        for seg in segments:
            if seg.start_ms <= start_ms < seg.end_ms or seg.end_ms == start_ms:
                return seg.label
    return StrategyLabel(int(np.argmax(cover)))


def window_labels(cohort_segments: Mapping[tuple[str, str], list[Segment]], windows) -> list[StrategyLabel]:
    return [window_label(cohort_segments[(w.student_id, w.level_id)], w.start_ms, w.stop_ms)
            for w in windows]


# -- files ------------------------------------------------------------------

def _labels_csv(cohort: Cohort, tau: float) -> str:
    buf = io.StringIO()
    wr = csv.writer(buf, lineterminator="\n")
    wr.writerow(["student", "level", "tau_s", "window", "start_ms", "label"])
    spec = WindowSpec(tau)
    for trace in cohort.traces:
        wins = slice_windows(trace, spec)
        for w, lab in zip(wins, window_labels(cohort.segments, wins)):
            wr.writerow([w.student_id, w.level_id, _num(tau), w.index, _num(w.start_ms), lab.name])
    return buf.getvalue()


def _num(x: float) -> str:
    return str(int(x)) if float(x).is_integer() else repr(float(x))


def truth_export(cohort: Cohort, out_dir: str | os.PathLike, taus=(10, 20, 30)) -> list[str]:
    """Write telemetry, manifest, strategy truth, mastery truth and outcome
    annotations; returns the written file names."""
    out = os.fspath(out_dir)
    files = {}
    files["telemetry.jsonl"] = "".join(line + "\n" for t in cohort.traces for line in serialize_trace(t))
    files["manifest.json"] = json.dumps(cohort.manifest.to_records(), indent=1) + "\n"
    seg_lines = []
    for (student, level), segs in cohort.segments.items():
        for s in segs:
            seg_lines.append(json.dumps({"student": student, "level": level, "start_ms": s.start_ms,
                                         "end_ms": s.end_ms, "label": s.label.name}, sort_keys=True))
    files["strategy_segments.jsonl"] = "".join(x + "\n" for x in seg_lines)
    for tau in taus:
        files[f"labels_tau{_num(tau)}.csv"] = _labels_csv(cohort, tau)
    files["mastery.json"] = json.dumps(
        {sid: {SKILL_NAMES[s]: float(v) for s, v in enumerate(m)} for sid, m in cohort.mastery.items()},
        indent=1) + "\n"
    files["outcomes.jsonl"] = "".join(
        json.dumps({"student": s, "level": lv, "skill": SKILL_NAMES[k], "value": v}, sort_keys=True) + "\n"
        for s, lv, k, v in cohort.outcomes)
    files["binary_outcomes.jsonl"] = "".join(
        json.dumps({"student": s, "level": lv, "skill": SKILL_NAMES[k], "value": int(v)}, sort_keys=True) + "\n"
        for s, lv, k, v in binary_outcomes(cohort.outcomes))
    files["config.json"] = json.dumps(cohort.config.to_dict(), indent=1, sort_keys=True) + "\n"
    for name, text in files.items():
        write_atomic(os.path.join(out, name), text)
    return sorted(files)


def binary_outcomes(outcomes):
    """Keep only annotations that are exactly 0 or 1."""
    return [o for o in outcomes if o[3] in (0.0, 1.0)]


def read_outcomes(path) -> list[tuple[str, str, int, float]]:
    out = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if line.strip():
                r = json.loads(line)
                out.append((r["student"], r.get("level", ""), skill_id(r["skill"]), float(r["value"])))
    return out


def read_mastery(path) -> dict[str, np.ndarray]:
    with open(path, encoding="utf-8") as fh:
        doc = json.load(fh)
    out = {}
    for sid, skills in doc.items():
        v = np.full(N_SKILLS, np.nan)
        for name, val in skills.items():
            v[skill_id(name)] = float(val)
        out[sid] = v
    return out


def load_cohort(data_dir: str | os.PathLike) -> Cohort:
    """Read a directory written by :func:`truth_export`."""
    d = os.fspath(data_dir)
    with open(os.path.join(d, "config.json"), encoding="utf-8") as fh:
        cfg = GenConfig.from_dict(json.load(fh))
    with open(os.path.join(d, "telemetry.jsonl"), encoding="utf-8") as fh:
        traces = parse_traces(fh)
    with open(os.path.join(d, "manifest.json"), encoding="utf-8") as fh:
        manifest = load_manifest(json.load(fh))
    segments: dict[tuple[str, str], list[Segment]] = {}
    with open(os.path.join(d, "strategy_segments.jsonl"), encoding="utf-8") as fh:
        for line in fh:
            if line.strip():
                r = json.loads(line)
                segments.setdefault((r["student"], r["level"]), []).append(
                    Segment(r["start_ms"], r["end_ms"], StrategyLabel[r["label"]]))
    mastery = read_mastery(os.path.join(d, "mastery.json"))
    outcomes = read_outcomes(os.path.join(d, "outcomes.jsonl"))
    return Cohort(cfg, traces, manifest, segments, mastery, outcomes)
