"""Fuse per-window strategy predictions and rule firings into per-skill mastery.

For skill s over a set of windows F::

    p(s) = (ML_s + R_s) / (I_s + R_s)

where I_s counts windows from levels exercising s, ML_s sums the strategy
value (0, 0.5, 1) over those windows, and R_s sums rule firings for s.
A skill with I_s + R_s = 0 has no estimate (``None``).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .features import Window, WindowSpec, feature_matrix, slice_level, slice_windows
from .rules import RuleFiringReport, apply_rules
from .strategy import ClassifierModel, StrategyLabel, ml_value
from .telemetry import N_SKILLS, SKILL_NAMES, LevelManifest, TelemetryError, Trace


@dataclass
class Accumulators:
    ml: np.ndarray = field(default_factory=lambda: np.zeros(N_SKILLS))
    involved: np.ndarray = field(default_factory=lambda: np.zeros(N_SKILLS, dtype=np.int64))
    rules: np.ndarray = field(default_factory=lambda: np.zeros(N_SKILLS, dtype=np.int64))

    def merge(self, other: "Accumulators") -> "Accumulators":
        return Accumulators(self.ml + other.ml, self.involved + other.involved,
                            self.rules + other.rules)

    def add_window(self, kc: Iterable[int], value: float, firings: Sequence[int]) -> None:
        for s in kc:
            self.ml[s] += value
            self.involved[s] += 1
        self.rules += np.asarray(firings, dtype=np.int64)


@dataclass(frozen=True)
class SkillVector:
    student_id: str
    estimates: tuple[float | None, ...]

    def __getitem__(self, skill: int) -> float | None:
        return self.estimates[skill]

    def to_dict(self) -> dict:
        return {"student": self.student_id,
                "skills": [{"name": n, "p": p} for n, p in zip(SKILL_NAMES, self.estimates)]}

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, doc: dict) -> "SkillVector":
        by_name = {s["name"]: s["p"] for s in doc["skills"]}
        return cls(doc["student"], tuple(by_name.get(n) for n in SKILL_NAMES))


def accumulate(windows: Iterable[tuple[Window, StrategyLabel, RuleFiringReport]],
               manifest: LevelManifest) -> Accumulators:
    acc = Accumulators()
    for window, label, report in windows:
        if window.level_id not in manifest:
            raise TelemetryError(f"level {window.level_id!r} is not in the manifest")
        acc.add_window(manifest[window.level_id], ml_value(label), report.counts)
    return acc


def skill_estimate(acc: Accumulators, student_id: str = "", use_ml: bool = True,
                   use_rules: bool = True) -> SkillVector:
    """Average of ML and rule evidence per skill.

    ``use_ml``/``use_rules`` switch off one evidence source to give the
    ML-only and rules-only variants.
    """
    ml = acc.ml if use_ml else np.zeros(N_SKILLS)
    inv = acc.involved if use_ml else np.zeros(N_SKILLS, dtype=np.int64)
    r = acc.rules if use_rules else np.zeros(N_SKILLS, dtype=np.int64)
    out: list[float | None] = []
    for s in range(N_SKILLS):
        den = inv[s] + r[s]
        out.append(None if den == 0 else float((ml[s] + r[s]) / den))
    return SkillVector(student_id, tuple(out))


def _level_accumulators(student_id: str, windows: list[Window], model: ClassifierModel,
                        manifest: LevelManifest) -> Accumulators:
    if not windows:
        return Accumulators()
    labels = model.predict_labels(feature_matrix(windows))
    items = [(w, StrategyLabel(int(lab)), apply_rules(w)) for w, lab in zip(windows, labels)]
    return accumulate(items, manifest)


def trace_student(trace: Trace, manifest: LevelManifest, model: ClassifierModel,
                  spec: WindowSpec) -> SkillVector:
    """Full pipeline for one play-through: window, featurize, classify, apply
    rules, accumulate over every window of every level, estimate."""
    windows = slice_windows(trace, spec)
    acc = _level_accumulators(trace.student_id, windows, model, manifest)
    return skill_estimate(acc, trace.student_id)


def trace_levels(trace: Trace, manifest: LevelManifest, model: ClassifierModel,
                 spec: WindowSpec) -> dict[str, SkillVector]:
    """Per-level variant: each level's windows form their own F."""
    out = {}
    for level in trace.levels:
        windows = slice_level(trace.student_id, level, spec)
        acc = _level_accumulators(trace.student_id, windows, model, manifest)
        out[level.level_id] = skill_estimate(acc, trace.student_id)
    return out
