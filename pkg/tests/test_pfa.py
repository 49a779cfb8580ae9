from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from playertrace.pfa import (
    FALLBACK_P,
    BinaryOutcome,
    PfaError,
    PfaParams,
    SkillParams,
    final_counts,
    objective_and_grad,
    observations_from_outcomes,
    pfa_m,
    pfa_p,
    pfa_skill_vector,
    train_pfa,
)


def test_sigmoid_anchor_and_symmetry():
    assert pfa_p(0.0) == 0.5
    rng = np.random.default_rng(0)
    for m in rng.normal(0, 20, 1000):
        assert abs(pfa_p(m) + pfa_p(-m) - 1.0) < 1e-12
    assert pfa_p(800.0) == 1.0 and pfa_p(-800.0) == 0.0


@given(st.floats(-30, 30))
def test_sigmoid_matches_textbook(m):
    assert pfa_p(m) == pytest.approx(1 / (1 + math.exp(-m)), rel=1e-12)


def test_linear_predictor():
    params = PfaParams("modified", 0.2, {3: SkillParams(0.5, -0.25), 4: SkillParams(1.0, 0.0)})
    m = pfa_m(params, {3: (4, 2), 4: (1, 7)}, [3, 4])
    assert m == pytest.approx((0.2 + 2.0 - 0.5) + (0.2 + 1.0))
    with pytest.raises(PfaError):
        pfa_m(params, {3: (1, 1)}, [3, 4])
    orig = PfaParams("original", 0.0, {3: SkillParams(0.0, 0.0, bias=-1.5)})
    assert pfa_m(orig, {3: (0, 0)}, [3]) == -1.5


def gradient_relative_error(rng) -> float:
    n = int(rng.integers(5, 40))
    with_beta = bool(rng.integers(2))
    Z = np.column_stack([rng.integers(0, 8, n), rng.integers(0, 8, n)] +
                        ([np.ones(n)] if with_beta else [])).astype(float)
    y = rng.integers(0, 2, n).astype(float)
    theta = rng.normal(0, 0.7, Z.shape[1])
    offset = float(rng.normal())
    _, g = objective_and_grad(theta, Z, y, offset, 0.01)
    h = 1e-6
    num = np.array([(objective_and_grad(theta + h * e, Z, y, offset, 0.01)[0]
                     - objective_and_grad(theta - h * e, Z, y, offset, 0.01)[0]) / (2 * h)
                    for e in np.eye(len(theta))])
    return float(np.linalg.norm(num - g) / max(np.linalg.norm(g), 1e-12))


def test_gradient_finite_differences():
    rng = np.random.default_rng(7)
    assert max(gradient_relative_error(rng) for _ in range(50)) < 1e-4


def simulate(w_success, w_failure, n_obs, seed, bias=0.0):
    rng = np.random.default_rng(seed)
    obs = []
    for i in range(n_obs):
        c, f = int(rng.integers(0, 6)), int(rng.integers(0, 6))
        label = int(rng.random() < pfa_p(bias + w_success * c + w_failure * f))
        obs.append(BinaryOutcome(f"u{i}", 5, label, c, f))
    return obs


def test_parameter_recovery():
    params = train_pfa(simulate(0.5, -0.5, 500, seed=1))
    sp = params.skills[5]
    assert abs(sp.success_weight - 0.5) <= 0.1 and abs(sp.failure_weight + 0.5) <= 0.1
    assert sp.n_obs == 500 and not sp.degenerate


def test_original_mode_learns_intercept():
    params = train_pfa(simulate(0.4, -0.3, 3000, seed=2, bias=1.0), mode="original")
    sp = params.skills[5]
    assert abs(sp.bias - 1.0) < 0.25
    assert abs(sp.success_weight - 0.4) < 0.1 and abs(sp.failure_weight + 0.3) < 0.1


def test_training_errors_and_degenerate_skills():
    with pytest.raises(PfaError, match="no observations"):
        train_pfa([])
    with pytest.raises(PfaError, match="non-binary"):
        train_pfa([BinaryOutcome("u", 0, 2, 0, 0)])
    with pytest.raises(PfaError, match="mode"):
        train_pfa([BinaryOutcome("u", 0, 1, 0, 0)], mode="bkt")
    params = train_pfa([BinaryOutcome("u", 0, 1, k, 0) for k in range(4)])
    assert params.skills[0].degenerate
    assert np.isfinite([params.skills[0].success_weight, params.skills[0].failure_weight]).all()


def test_observations_snapshot_prior_counts():
    recs = [("a", 2, 1.0), ("a", 2, 0.5), ("a", 2, 0.0), ("b", 2, 1.0), ("a", 2, 1.0)]
    obs = observations_from_outcomes(recs)
    assert [(o.student_id, o.label, o.successes, o.failures) for o in obs] == [
        ("a", 1, 0, 0), ("a", 0, 1, 0), ("b", 1, 0, 0), ("a", 1, 1, 1)]
    counts = final_counts(recs)
    assert counts["a"][2] == (2, 1) and counts["b"][2] == (1, 0) and counts["a"][0] == (0, 0)


def test_untrained_skills_fall_back():
    params = PfaParams("modified", 0.0, {1: SkillParams(1.0, -1.0)})
    sv = pfa_skill_vector(params, {1: (3, 0)}, "u")
    assert sv[1] == pytest.approx(pfa_p(3.0))
    assert all(sv[s] == FALLBACK_P for s in range(21) if s != 1)


@pytest.mark.parametrize("mode", ["modified", "original"])
def test_params_json_round_trip(mode):
    params = train_pfa(simulate(0.5, -0.5, 200, seed=3), mode=mode)
    back = PfaParams.from_json(params.to_json())
    assert back.mode == mode
    assert back.skills[5].success_weight == params.skills[5].success_weight
    with pytest.raises(PfaError):
        PfaParams.from_json("{}")
