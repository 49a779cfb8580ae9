"""Acceptance criteria 1-11, one test each.

Every test records a PASS/FAIL line in ``conftest.ACCEPTANCE`` (printed in the
terminal summary) and then asserts, so a failing criterion fails the run.
"""

from __future__ import annotations

import os
import time

import numpy as np
import pytest

from playertrace.cli import main
from playertrace.evaluation import (
    EvalConfig,
    best_ml_r,
    build_dataset,
    loso_folds,
    pfa_loso,
    run_experiment,
    strategy_accuracy,
)
from playertrace.features import WindowSpec, slice_level
from playertrace.pfa import FALLBACK_P, pfa_p, train_pfa
from playertrace.rules import BUILTIN_RULES, RULELESS_SKILLS, fire_counts
from playertrace.strategy import naive_bayes, train_arrays, tree
from playertrace.synth import GenConfig, generate_cohort
from playertrace.telemetry import LevelPlay
from playertrace.tracer import skill_estimate

from .conftest import ACCEPTANCE, ev, window_of
from .test_pfa import gradient_relative_error, simulate
from .test_rules import check_determinism_and_monotonicity
from .test_strategy import toy_three_class
from .test_tracer import fraction_oracle, random_accumulators


def record(n: int, ok: bool, detail: str) -> None:
    ACCEPTANCE[n] = (bool(ok), detail)
    assert ok, f"criterion {n}: {detail}"


@pytest.fixture(scope="module")
def heldout_cohort():
    """The 17-student held-out cohort used by criteria 8 and 9."""
    return generate_cohort(EvalConfig(seed=0).test_config())


def test_criterion_01_fusion_oracle():
    rng = np.random.default_rng(2024)
    accs = [random_accumulators(rng) for _ in range(1000)]
    t0 = time.perf_counter()
    got = [skill_estimate(a).estimates for a in accs]
    elapsed = time.perf_counter() - t0
    worst = 0.0
    agree = True
    for a, g in zip(accs, got):
        for x, w in zip(g, fraction_oracle(a.ml, a.involved, a.rules)):
            if (x is None) != (w is None):
                agree = False
            elif x is not None:
                worst = max(worst, abs(x - w))
    ok = agree and worst <= 1e-12 and elapsed < 1.0
    record(1, ok, f"max |err| {worst:.1e} over 1000 instances, {elapsed:.3f}s")


def test_criterion_02_sigmoid():
    ms = np.random.default_rng(5).normal(0, 25, 1000)
    worst = max(abs(pfa_p(m) + pfa_p(-m) - 1.0) for m in ms)
    ok = pfa_p(0.0) == 0.5 and worst <= 1e-12
    record(2, ok, f"p(0)={pfa_p(0.0)}, max symmetry error {worst:.1e}")


def test_criterion_03_pfa_gradient_and_recovery():
    t0 = time.perf_counter()
    rng = np.random.default_rng(99)
    worst = max(gradient_relative_error(rng) for _ in range(50))
    sp = train_pfa(simulate(0.5, -0.5, 500, seed=10)).skills[5]
    elapsed = time.perf_counter() - t0
    recovered = abs(sp.success_weight - 0.5) <= 0.1 and abs(sp.failure_weight + 0.5) <= 0.1
    ok = worst < 1e-4 and recovered and elapsed < 10
    record(3, ok, f"grad rel err {worst:.1e}; weights {sp.success_weight:.3f} / "
                  f"{sp.failure_weight:.3f} (true 0.5 / -0.5); {elapsed:.2f}s")


def test_criterion_04_classifier_sanity():
    X, y = toy_three_class()
    train_acc = float(np.mean(train_arrays(X, y, "multinomial_logistic").predict_labels(X) == y))
    # naive Bayes against a hand-written Bayes rule on four boolean points
    Xb = np.array([[0, 0], [1, 0], [1, 1], [0, 1]], dtype=float)
    yb = np.array([0, 0, 0, 1])
    params = naive_bayes.fit(Xb, yb, 3, var_smoothing=0.1)

    def gauss(x, mu, var):
        return np.exp(-(x - mu) ** 2 / (2 * var)) / np.sqrt(2 * np.pi * var)

    nb_err = 0.0
    for q in Xb:
        a = 4 / 6 * gauss(q[0], 2 / 3, 2 / 9 + 0.1) * gauss(q[1], 1 / 3, 2 / 9 + 0.1)
        b = 2 / 6 * gauss(q[0], 0.0, 0.1) * gauss(q[1], 1.0, 0.1)
        got = naive_bayes.predict_proba(params, q[None, :])[0]
        nb_err = max(nb_err, abs(got[0] - a / (a + b)), abs(got[1] - b / (a + b)))
    # root split: feature 0 has gain ratio 1, feature 1 about 0.214
    Xt = np.array([[0, 0], [0, 0], [0, 0], [0, 1], [0, 1], [0, 1], [1, 1], [1, 1]], dtype=float)
    yt = np.array([0, 0, 0, 0, 0, 0, 1, 1])
    root = tree.best_split(Xt, yt, 3)
    ok = train_acc == 1.0 and nb_err <= 1e-9 and root is not None and root[0] == 0
    record(4, ok, f"logistic train acc {train_acc}, NB max err {nb_err:.1e}, root feature {root[0]}")


def test_criterion_05_windowing():
    mid = list(range(10_000, 50_000, 1_250))
    events = [ev(0, "level_start")] + [ev(t, "mouse_move") for t in mid] + [ev(60_000, "level_end")]
    wins = slice_level("s1", LevelPlay("L1", tuple(events)), WindowSpec(20))
    starts = [w.start_ms / 1000 for w in wins]
    cover = [sum(1 for w in wins for e in w.events if e.t_ms == t) for t in mid]
    ok = len(wins) == 6 and starts == [0, 10, 20, 30, 40, 50] and set(cover) == {2}
    record(5, ok, f"{len(wins)} windows starting {starts}; mid-level coverage {sorted(set(cover))}")


def test_criterion_06_loso_integrity(cohort6):
    ds = build_dataset(cohort6, 20)
    folds = loso_folds(ds)
    tested = np.concatenate([f.test for f in folds])
    leak = sum(f.student_id in set(ds.student_ids[f.train].tolist()) for f in folds)
    foreign = sum(set(ds.student_ids[f.test].tolist()) != {f.student_id} for f in folds)
    partition = sorted(tested.tolist()) == list(range(len(ds)))
    ok = len(folds) == 6 and leak == 0 and foreign == 0 and partition
    record(6, ok, f"{len(folds)} folds, leakage {leak}, each of {len(ds)} windows tested once: {partition}")


def test_criterion_07_strategy_accuracy():
    t0 = time.perf_counter()
    acc = {}
    for noise in (0.0, 1.0):
        cohort = generate_cohort(GenConfig(seed=0, n_students=6, noise=noise))
        for tau in (10, 20, 30):
            ds = build_dataset(cohort, tau)
            acc[(noise, tau)] = strategy_accuracy(ds, loso_folds(ds), "c45_tree")
    elapsed = time.perf_counter() - t0
    clean = min(acc[(0.0, t)] for t in (10, 20, 30))
    noisy = min(acc[(1.0, t)] for t in (10, 20, 30))
    ok = clean >= 0.95 and noisy > 0.40 and elapsed < 120
    record(7, ok, "tree LOSO accuracy noise0 " + "/".join(f"{acc[(0.0, t)]:.3f}" for t in (10, 20, 30))
           + ", noise1 " + "/".join(f"{acc[(1.0, t)]:.3f}" for t in (10, 20, 30)) + f"; {elapsed:.1f}s")


def test_criterion_08_mse_beats_baselines(heldout_cohort):
    t0 = time.perf_counter()
    cfg = EvalConfig(seed=0)
    rep2 = run_experiment(2, cfg, test=heldout_cohort)
    # bagged trees are left out of the cross-validated run for time (see README)
    cfg3 = EvalConfig(seed=0, algorithms=("naive_bayes", "c45_tree", "multinomial_logistic"))
    rep3 = run_experiment(3, cfg3, cohort=heldout_cohort)
    elapsed = time.perf_counter() - t0
    worst = max(max(c.value for c in r.cells if c.method.startswith("ML+R:")) for r in (rep2, rep3))
    always_one = rep2.get("baseline_always_one")
    random_mse = rep2.get("baseline_random")
    ok = worst < 0.25 and worst < always_one and worst < random_mse and elapsed < 120
    record(8, ok, f"worst ML+R MSE {worst:.4f} < 0.25, random {random_mse:.4f}, "
                  f"always-one {always_one:.4f}; {elapsed:.1f}s")


def test_criterion_09_pfa_with_true_counts(heldout_cohort):
    rep = run_experiment(4, EvalConfig(seed=0, algorithms=("c45_tree",)), cohort=heldout_cohort)
    pfa = rep.get("PFA:modified")
    best = best_ml_r(rep)
    vectors, untrainable = pfa_loso(heldout_cohort)
    fallback = all(v[s] == FALLBACK_P for v in vectors.values() for s in untrainable)
    ok = pfa <= best and fallback
    record(9, ok, f"PFA MSE {pfa:.4f} <= best ML+R {best:.4f}; "
                  f"{len(untrainable)} untrainable skills at {FALLBACK_P}: {fallback}")


def test_criterion_10_rule_engine():
    t0 = time.perf_counter()
    n_rules = len(BUILTIN_RULES)
    check_determinism_and_monotonicity(10_000, seed=10)
    silent = all(fire_counts(window_of([ev(t, k) for t in (0, 5, 9) for k in
                                        ("link_semaphore_signal", "test_pressed", "submit_pressed")]))[s] == 0
                 for s in RULELESS_SKILLS)
    elapsed = time.perf_counter() - t0
    ok = n_rules == 15 and silent
    record(10, ok, f"{n_rules} rules, {len(RULELESS_SKILLS)} blank skills silent, "
                   f"10k-window property check passed in {elapsed:.1f}s")


def _pipeline(root):
    data, model, trace, report = (os.path.join(root, x) for x in ("data", "m.json", "t.json", "r.csv"))
    steps = [
        ["synth", "--seed", "0", "--students", "6", "--out", data],
        ["train", "--data", data, "--tau", "30", "--seed", "0", "--out", model],
        ["trace", "--model", model, "--trace", os.path.join(data, "telemetry.jsonl"),
         "--manifest", os.path.join(data, "manifest.json"), "--out", trace],
        ["eval", "--experiment", "3", "--data", data, "--algorithm", "c45_tree", "--seed", "0",
         "--out", report],
    ]
    codes = [main(s) for s in steps]
    files = {}
    for dirpath, _, names in os.walk(root):
        for n in names:
            p = os.path.join(dirpath, n)
            with open(p, "rb") as fh:
                files[os.path.relpath(p, root)] = fh.read()
    return codes, files


def test_criterion_11_end_to_end_determinism(tmp_path, capsys):
    a_codes, a = _pipeline(tmp_path / "a")
    b_codes, b = _pipeline(tmp_path / "b")
    capsys.readouterr()
    same = a == b
    ok = a_codes == b_codes == [0, 0, 0, 0] and same and "r.csv" in a
    record(11, ok, f"{len(a)} artifacts byte-identical across two seed-0 runs: {same}")
