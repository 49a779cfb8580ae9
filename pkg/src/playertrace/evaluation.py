"""Evaluation protocols: strategy accuracy, skill-vector error, baselines, PFA.

Experiments:

1. Leave-one-student-out (LOSO) strategy accuracy, every algorithm x tau.
2. Skill-vector MSE for ML, R and ML+R, classifier trained on one cohort and
   tested on another cohort that plays a disjoint set of levels.
3. The same three estimates with LOSO classifier training on one cohort.
4. PFA fed annotated success/failure counts (LOSO over students) next to
   the ML+R estimates of experiment 3 on the same cohort.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field
from typing import Any, Iterable, Mapping, Sequence

import numpy as np

from .features import Window, WindowSpec, feature_matrix, feature_schema, slice_windows
from .pfa import FALLBACK_P, observations_from_outcomes, final_counts, pfa_skill_vector, train_pfa
from .rules import fire_counts
from .strategy import ALGORITHMS, DEFAULT_ALGORITHM, ML_VALUES, LabeledWindow, StrategyLabel, train_arrays
from .synth import Cohort, GenConfig, LEVEL_SETS, generate_cohort, window_labels
from .telemetry import N_SKILLS, SKILL_NAMES, LevelManifest
from .tracer import Accumulators, SkillVector, skill_estimate

TAUS = (10, 20, 30)
ACCURACY_MODES = ("pooled", "macro")


class EvalError(ValueError):
    pass


# -- datasets and folds -----------------------------------------------------

@dataclass
class WindowDataset:
    """Windows of a cohort at one tau with features, truth labels and rule counts."""

    tau_s: float
    windows: list[Window]
    X: np.ndarray
    y: np.ndarray
    firings: np.ndarray
    involved: np.ndarray
    student_ids: np.ndarray

    def __len__(self) -> int:
        return len(self.windows)

    def labeled(self) -> list[LabeledWindow]:
        from .features import FeatureVector
        return [LabeledWindow(FeatureVector("v1", tuple(map(float, x))), int(lab), w.student_id, w.level_id)
                for x, lab, w in zip(self.X, self.y, self.windows)]


def build_dataset(cohort: Cohort, tau_s: float) -> WindowDataset:
    spec = WindowSpec(tau_s)
    windows = [w for t in cohort.traces for w in slice_windows(t, spec)]
    X = feature_matrix(windows) if windows else np.zeros((0, len(feature_schema("v1"))))
    y = np.array([int(l) for l in window_labels(cohort.segments, windows)], dtype=np.int64)
    firings = np.array([fire_counts(w) for w in windows], dtype=np.int64).reshape(-1, N_SKILLS)
    involved = np.zeros((len(windows), N_SKILLS), dtype=bool)
    for i, w in enumerate(windows):
        if w.level_id not in cohort.manifest:
            raise EvalError(f"level {w.level_id!r} is not in the manifest")
        involved[i, list(cohort.manifest[w.level_id])] = True
    students = np.array([w.student_id for w in windows])
    return WindowDataset(float(tau_s), windows, X, y, firings, involved, students)


@dataclass(frozen=True)
class Fold:
    student_id: str
    train: np.ndarray
    test: np.ndarray


def _student_column(data) -> np.ndarray:
    if isinstance(data, WindowDataset):
        return data.student_ids
    return np.array([d.student_id for d in data])


def loso_folds(data: WindowDataset | Sequence[LabeledWindow]) -> list[Fold]:
    """One fold per student, in order of first appearance."""
    students = _student_column(data)
    order = list(dict.fromkeys(students.tolist()))
    if len(order) < 2:
        raise EvalError(f"leave-one-student-out needs at least 2 students, got {len(order)}")
    folds = []
    for s in order:
        mask = students == s
        fold = Fold(s, np.flatnonzero(~mask), np.flatnonzero(mask))
        assert not set(students[fold.train].tolist()) & {s}, "student leakage"
        folds.append(fold)
    return folds


def loso_predictions(ds: WindowDataset, folds: Sequence[Fold], algorithm: str,
                     config: Mapping[str, Any] | None = None, seed: int = 0) -> np.ndarray:
    pred = np.full(len(ds), -1, dtype=np.int64)
    for fold in folds:
        model = train_arrays(ds.X[fold.train], ds.y[fold.train], algorithm, config, seed)
        pred[fold.test] = model.predict_labels(ds.X[fold.test])
    return pred


def strategy_accuracy(ds: WindowDataset, folds: Sequence[Fold], algorithm: str = DEFAULT_ALGORITHM,
                      config: Mapping[str, Any] | None = None, seed: int = 0,
                      mode: str = "pooled") -> float:
    """Held-out accuracy: pooled over all windows, or averaged per student."""
    if mode not in ACCURACY_MODES:
        raise EvalError(f"accuracy mode must be one of {ACCURACY_MODES}")
    pred = loso_predictions(ds, folds, algorithm, config, seed)
    return accuracy_of(pred, ds.y, folds, mode)


def accuracy_of(pred: np.ndarray, truth: np.ndarray, folds: Sequence[Fold], mode: str = "pooled") -> float:
    if mode == "pooled":
        idx = np.concatenate([f.test for f in folds])
        return float(np.mean(pred[idx] == truth[idx]))
    return float(np.mean([np.mean(pred[f.test] == truth[f.test]) for f in folds]))


# -- skill vectors and error --------------------------------------------------

def skill_vectors(ds: WindowDataset, labels: np.ndarray | None, use_ml: bool = True,
                  use_rules: bool = True) -> dict[str, SkillVector]:
    """Per-student estimates from predicted window labels and cached rule counts."""
    lookup = np.array([ML_VALUES[c] for c in StrategyLabel])
    values = lookup[labels] if labels is not None else np.zeros(len(ds))
    out = {}
    for s in dict.fromkeys(ds.student_ids.tolist()):
        m = ds.student_ids == s
        inv = ds.involved[m]
        acc = Accumulators(values[m] @ inv, inv.sum(axis=0).astype(np.int64),
                           ds.firings[m].sum(axis=0))
        out[s] = skill_estimate(acc, s, use_ml=use_ml and labels is not None, use_rules=use_rules)
    return out


@dataclass(frozen=True)
class MseResult:
    overall: float
    per_skill: tuple[float | None, ...]
    n_pairs: int
    n_excluded: int

    def __iter__(self):
        return iter((self.overall, self.per_skill))


def _truth_value(truth: Mapping[str, Any], student: str, skill: int) -> float | None:
    row = truth.get(student)
    if row is None:
        return None
    v = row.get(skill) if isinstance(row, Mapping) else row[skill]
    if v is None or not np.isfinite(v):
        return None
    return float(v)


def skill_mse(predicted: Mapping[str, SkillVector], truth: Mapping[str, Any]) -> MseResult:
    """Mean squared error over (student, skill) pairs holding both an estimate
    and a truth value. Pairs whose estimate is missing are counted as excluded."""
    sq: list[float] = []
    per: list[list[float]] = [[] for _ in range(N_SKILLS)]
    excluded = 0
    for student, vec in predicted.items():
        for s in range(N_SKILLS):
            t = _truth_value(truth, student, s)
            if t is None:
                continue
            if not 0.0 <= t <= 1.0:
                raise EvalError(f"truth value {t} for {student!r} lies outside [0, 1]")
            p = vec[s]
            if p is None:
                excluded += 1
                continue
            e = (p - t) ** 2
            sq.append(e)
            per[s].append(e)
    if not sq:
        raise EvalError("no (student, skill) pair has both an estimate and a truth value")
    return MseResult(float(np.mean(sq)), tuple(float(np.mean(x)) if x else None for x in per),
                     len(sq), excluded)


def _truth_pairs(truth: Mapping[str, Any], students: Iterable[str] | None = None) -> np.ndarray:
    chunks = []
    for student in (students if students is not None else truth):
        row = truth.get(student)
        if row is None:
            continue
        if isinstance(row, Mapping):
            row = [_truth_value(truth, student, s) for s in range(N_SKILLS)]
            row = [np.nan if v is None else v for v in row]
        arr = np.asarray(row, dtype=float)
        chunks.append(arr[np.isfinite(arr)])
    vals = np.concatenate(chunks) if chunks else np.zeros(0)
    if not len(vals):
        raise EvalError("truth is empty")
    return vals


def baseline_random(truth: Mapping[str, Any], seed: int = 0, students: Iterable[str] | None = None) -> float:
    """MSE of uniform [0, 1] guesses over every truth pair."""
    t = _truth_pairs(truth, students)
    guess = np.random.default_rng(np.random.SeedSequence([seed, 0x5EED])).uniform(0.0, 1.0, len(t))
    return float(np.mean((guess - t) ** 2))


def baseline_random_expected(truth: Mapping[str, Any], students: Iterable[str] | None = None) -> float:
    """Closed form of the random baseline: mean of x^2 - x + 1/3."""
    t = _truth_pairs(truth, students)
    return float(np.mean(t * t - t + 1.0 / 3.0))


def baseline_always_one(truth: Mapping[str, Any], students: Iterable[str] | None = None) -> float:
    t = _truth_pairs(truth, students)
    return float(np.mean((1.0 - t) ** 2))


# -- reports -------------------------------------------------------------------

@dataclass
class Cell:
    method: str
    tau_s: float | None
    metric: str
    value: float
    n_pairs: int | None = None
    n_excluded: int | None = None
    per_skill: tuple[float | None, ...] | None = None


@dataclass
class EvalReport:
    experiment: int
    seed: int
    cells: list[Cell] = field(default_factory=list)
    notes: list[str] = field(default_factory=list)

    def add(self, cell: Cell) -> None:
        self.cells.append(cell)

    def get(self, method: str, tau_s: float | None = None, metric: str | None = None) -> float:
        for c in self.cells:
            if c.method == method and c.tau_s == tau_s and (metric is None or c.metric == metric):
                return c.value
        raise KeyError((method, tau_s, metric))

    def methods(self) -> list[str]:
        return list(dict.fromkeys(c.method for c in self.cells))

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write(f"# experiment={self.experiment} seed={self.seed}\n")
        for n in self.notes:
            buf.write(f"# {n}\n")
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["method", "tau_s", "skill", "metric", "value", "n_pairs", "n_excluded"])
        for c in self.cells:
            tau = "" if c.tau_s is None else _fmt_tau(c.tau_s)
            w.writerow([c.method, tau, "ALL", c.metric, repr(c.value),
                        "" if c.n_pairs is None else c.n_pairs,
                        "" if c.n_excluded is None else c.n_excluded])
        for c in self.cells:
            if c.per_skill is None:
                continue
            tau = "" if c.tau_s is None else _fmt_tau(c.tau_s)
            for name, v in zip(SKILL_NAMES, c.per_skill):
                w.writerow([c.method, tau, name, c.metric, "" if v is None else repr(v), "", ""])
        return buf.getvalue()

    def to_table(self) -> str:
        """Methods as rows, tau as columns; untimed values (baselines) in their own column."""
        taus = sorted({c.tau_s for c in self.cells if c.tau_s is not None})
        has_flat = any(c.tau_s is None for c in self.cells)
        header = ["method"] + [f"tau={_fmt_tau(t)}" for t in taus] + (["value"] if has_flat else [])
        rows = [header]
        for m in self.methods():
            vals = {c.tau_s: c.value for c in self.cells if c.method == m}
            row = [m] + [f"{vals[t]:.4f}" if t in vals else "" for t in taus]
            if has_flat:
                row.append(f"{vals[None]:.4f}" if None in vals else "")
            rows.append(row)
        widths = [max(len(r[i]) for r in rows) for i in range(len(header))]
        lines = [f"Experiment {self.experiment} (seed {self.seed})"]
        for k, r in enumerate(rows):
            lines.append("  ".join(x.ljust(wd) if i == 0 else x.rjust(wd) for i, (x, wd) in enumerate(zip(r, widths))))
            if k == 0:
                lines.append("  ".join("-" * wd for wd in widths))
        return "\n".join(lines) + "\n"


def _fmt_tau(t: float) -> str:
    return str(int(t)) if float(t).is_integer() else repr(float(t))


# -- configuration ---------------------------------------------------------------

@dataclass
class EvalConfig:
    seed: int = 0
    taus: tuple[float, ...] = TAUS
    algorithms: tuple[str, ...] = ALGORITHMS
    accuracy: str = "pooled"
    pfa_mode: str = "modified"
    classifier: dict[str, Any] = field(default_factory=dict)
    cohort: dict[str, Any] = field(default_factory=dict)
    train_cohort: dict[str, Any] = field(default_factory=dict)
    test_cohort: dict[str, Any] = field(default_factory=dict)

    def validate(self) -> None:
        bad = [a for a in self.algorithms if a not in ALGORITHMS]
        if bad:
            raise EvalError(f"unknown algorithms {bad}; choose from {ALGORITHMS}")
        if not self.taus or any(t <= 0 for t in self.taus):
            raise EvalError("taus must be positive")
        if self.accuracy not in ACCURACY_MODES:
            raise EvalError(f"accuracy must be one of {ACCURACY_MODES}")

    def to_dict(self) -> dict[str, Any]:
        return {"seed": self.seed, "taus": list(self.taus), "algorithms": list(self.algorithms),
                "accuracy": self.accuracy, "pfa_mode": self.pfa_mode, "classifier": self.classifier,
                "cohort": self.cohort, "train_cohort": self.train_cohort,
                "test_cohort": self.test_cohort}

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> "EvalConfig":
        extra = set(d) - set(cls.__dataclass_fields__)
        if extra:
            raise EvalError(f"unknown eval config keys: {sorted(extra)}")
        kw = dict(d)
        for k in ("taus", "algorithms"):
            if k in kw:
                kw[k] = tuple(kw[k])
        cfg = cls(**kw)
        cfg.validate()
        return cfg

    def _gen(self, overrides: Mapping[str, Any], **defaults: Any) -> GenConfig:
        d = {"seed": self.seed, **defaults, **overrides}
        return GenConfig.from_dict(d)

    def primary_cohort(self) -> GenConfig:
        return self._gen(self.cohort, n_students=6, level_set="A")

    def train_config(self, test_level_set: str = "B") -> GenConfig:
        other = next(k for k in LEVEL_SETS if k != test_level_set)
        return self._gen(self.train_cohort, n_students=6, level_set=other)

    def test_config(self) -> GenConfig:
        return self._gen(self.test_cohort, seed=self.seed + 1, n_students=17, level_set="B",
                         student_prefix="b")


def _truth(cohort: Cohort) -> dict[str, np.ndarray]:
    return cohort.mastery


def _add_baselines(report: EvalReport, truth: Mapping[str, Any], seed: int) -> None:
    report.add(Cell("baseline_random", None, "mse", baseline_random(truth, seed)))
    report.add(Cell("baseline_random_expected", None, "mse", baseline_random_expected(truth)))
    report.add(Cell("baseline_always_one", None, "mse", baseline_always_one(truth)))


def _add_mse(report: EvalReport, method: str, tau: float, vectors, truth) -> None:
    r = skill_mse(vectors, truth)
    report.add(Cell(method, tau, "mse", r.overall, r.n_pairs, r.n_excluded, r.per_skill))


def experiment1(cfg: EvalConfig, cohort: Cohort | None = None) -> EvalReport:
    cohort = cohort or generate_cohort(cfg.primary_cohort())
    report = EvalReport(1, cfg.seed, notes=[f"accuracy={cfg.accuracy}",
                                            f"students={len(cohort.traces)}"])
    for tau in cfg.taus:
        ds = build_dataset(cohort, tau)
        folds = loso_folds(ds)
        for alg in cfg.algorithms:
            acc = strategy_accuracy(ds, folds, alg, cfg.classifier, cfg.seed, cfg.accuracy)
            report.add(Cell(alg, float(tau), "accuracy", acc, len(ds)))
    return report


def experiment2(cfg: EvalConfig, train: Cohort | None = None, test: Cohort | None = None) -> EvalReport:
    test = test or generate_cohort(cfg.test_config())
    if train is None:
        train = generate_cohort(cfg.train_config(test.config.level_set))
    shared = set(train.manifest.levels) & set(test.manifest.levels)
    report = EvalReport(2, cfg.seed, notes=[f"train_students={len(train.traces)}",
                                            f"test_students={len(test.traces)}"])
    if shared:
        report.notes.append(f"warning: train and test share levels {sorted(shared)}")
    truth = _truth(test)
    for tau in cfg.taus:
        tr, te = build_dataset(train, tau), build_dataset(test, tau)
        for alg in cfg.algorithms:
            model = train_arrays(tr.X, tr.y, alg, cfg.classifier, cfg.seed)
            pred = model.predict_labels(te.X)
            _add_mse(report, f"ML:{alg}", tau, skill_vectors(te, pred, use_rules=False), truth)
            _add_mse(report, f"ML+R:{alg}", tau, skill_vectors(te, pred), truth)
        _add_mse(report, "R", tau, skill_vectors(te, None), truth)
    _add_baselines(report, truth, cfg.seed)
    return report


def experiment3(cfg: EvalConfig, cohort: Cohort | None = None) -> EvalReport:
    cohort = cohort or generate_cohort(cfg.primary_cohort())
    report = EvalReport(3, cfg.seed, notes=[f"students={len(cohort.traces)}"])
    truth = _truth(cohort)
    for tau in cfg.taus:
        ds = build_dataset(cohort, tau)
        folds = loso_folds(ds)
        for alg in cfg.algorithms:
            pred = loso_predictions(ds, folds, alg, cfg.classifier, cfg.seed)
            _add_mse(report, f"ML:{alg}", tau, skill_vectors(ds, pred, use_rules=False), truth)
            _add_mse(report, f"ML+R:{alg}", tau, skill_vectors(ds, pred), truth)
        _add_mse(report, "R", tau, skill_vectors(ds, None), truth)
    _add_baselines(report, truth, cfg.seed)
    return report


def pfa_loso(cohort: Cohort, mode: str = "modified", config: Mapping[str, Any] | None = None
             ) -> tuple[dict[str, SkillVector], set[int]]:
    """PFA estimates per student, trained on the other students' binary
    annotations and fed the student's own annotated counts. Returns the
    vectors and the set of skills that were never trainable."""
    stream = cohort.outcome_stream()
    counts = final_counts(stream)
    out = {}
    untrainable: set[int] = set(range(N_SKILLS))
    for student in cohort.students:
        obs = observations_from_outcomes(r for r in stream if r[0] != student)
        params = train_pfa(obs, mode, config)
        untrainable -= set(params.skills)
        own = counts.get(student, {s: (0, 0) for s in range(N_SKILLS)})
        out[student] = pfa_skill_vector(params, own, student)
    return out, untrainable


def experiment4(cfg: EvalConfig, cohort: Cohort | None = None) -> EvalReport:
    cohort = cohort or generate_cohort(cfg.primary_cohort())
    report = experiment3(cfg, cohort)
    report.experiment = 4
    truth = _truth(cohort)
    vectors, untrainable = pfa_loso(cohort, cfg.pfa_mode)
    r = skill_mse(vectors, truth)
    report.add(Cell(f"PFA:{cfg.pfa_mode}", None, "mse", r.overall, r.n_pairs, r.n_excluded, r.per_skill))
    trainable = [s for s in range(N_SKILLS) if s not in untrainable]
    if trainable:
        sub = {u: {s: truth[u][s] for s in trainable} for u in truth}
        rs = skill_mse(vectors, sub)
        report.add(Cell(f"PFA:{cfg.pfa_mode}:trainable", None, "mse", rs.overall, rs.n_pairs))
    report.notes.append("untrainable skills (predicted %s): %s" % (
        FALLBACK_P, "; ".join(SKILL_NAMES[s] for s in sorted(untrainable)) or "none"))
    return report


def best_ml_r(report: EvalReport) -> float:
    vals = [c.value for c in report.cells if c.method.startswith("ML+R:")]
    if not vals:
        raise EvalError("report holds no ML+R cells")
    return min(vals)


def run_experiment(kind: int, config: EvalConfig | None = None, *, cohort: Cohort | None = None,
                   train: Cohort | None = None, test: Cohort | None = None) -> EvalReport:
    """Run experiment ``kind``. ``cohort`` overrides the generated cohort of
    experiments 1, 3 and 4; ``train``/``test`` override those of experiment 2."""
    cfg = config or EvalConfig()
    cfg.validate()
    if kind == 1:
        return experiment1(cfg, cohort)
    if kind == 2:
        return experiment2(cfg, train, test if test is not None else cohort)
    if kind == 3:
        return experiment3(cfg, cohort)
    if kind == 4:
        return experiment4(cfg, cohort)
    raise EvalError(f"experiment must be 1, 2, 3 or 4, got {kind!r}")


def load_eval_config(path) -> EvalConfig:
    with open(path, encoding="utf-8") as fh:
        try:
            return EvalConfig.from_dict(json.load(fh))
        except json.JSONDecodeError as exc:
            raise EvalError(f"malformed eval config: {exc}") from None
