"""Performance Factor Analysis baseline.

Performance of student u on the skills KC::

    logit = sum over skills j of (bias_j + success_weight_j * successes_j
                                  + failure_weight_j * failures_j)
    probability = 1 / (1 + exp(-logit))

with the student's prior successes / failures on each skill. In
``modified`` mode the bias is one shared constant (default 0) and only the
two count weights are learned, skill by skill; ``original`` mode also learns
a per-skill bias.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Any, Iterable, Mapping, Sequence

import numpy as np

from .telemetry import N_SKILLS, SKILL_NAMES, skill_id
from .tracer import SkillVector

MODES = ("original", "modified")
L2 = 1e-4
FALLBACK_P = 0.5


class PfaError(ValueError):
    pass


@dataclass
class SkillParams:
    success_weight: float = 0.0
    failure_weight: float = 0.0
    bias: float | None = None
    degenerate: bool = False
    n_obs: int = 0


@dataclass
class PfaParams:
    mode: str = "modified"
    bias: float = 0.0
    skills: dict[int, SkillParams] = field(default_factory=dict)

    def intercept(self, skill: int) -> float:
        sp = self.skills.get(skill)
        if self.mode == "original" and sp is not None and sp.bias is not None:
            return sp.bias
        return self.bias

    def to_json(self) -> str:
        doc: dict[str, Any] = {"mode": self.mode, "bias": self.bias}
        for s, sp in sorted(self.skills.items()):
            entry: dict[str, Any] = {"success_weight": sp.success_weight, "failure_weight": sp.failure_weight, "degenerate": sp.degenerate}
            if self.mode == "original":
                entry["bias"] = sp.bias if sp.bias is not None else self.bias
            doc[SKILL_NAMES[s]] = entry
        return json.dumps(doc, sort_keys=True, indent=1)

    @classmethod
    def from_json(cls, text: str) -> "PfaParams":
        try:
            doc = json.loads(text)
            mode = doc.pop("mode")
            bias = float(doc.pop("bias"))
        except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
            raise PfaError(f"malformed PFA params file: {exc}") from None
        if mode not in MODES:
            raise PfaError(f"unknown PFA mode {mode!r}")
        skills = {}
        for name, e in doc.items():
            skills[skill_id(name)] = SkillParams(float(e["success_weight"]), float(e["failure_weight"]),
                                                 e.get("bias"), bool(e.get("degenerate", False)))
        return cls(mode, bias, skills)


@dataclass(frozen=True)
class BinaryOutcome:
    """One binary observation of a skill with the counts known just before it."""

    student_id: str
    skill: int
    label: int
    successes: int
    failures: int


def pfa_m(params: PfaParams, counts: Mapping[int, tuple[int, int]], skills: Iterable[int]) -> float:
    """Logit of success on a task exercising ``skills`` given (successes, failures) per skill."""
    logit = 0.0
    for s in skills:
        if s not in counts:
            raise PfaError(f"no success/failure counts for skill {s}")
        wins, losses = counts[s]
        sp = params.skills.get(s, SkillParams())
        logit += params.intercept(s) + sp.success_weight * wins + sp.failure_weight * losses
    return logit


def pfa_p(logit: float) -> float:
    """Numerically stable logistic function."""
    if logit >= 0:
        return 1.0 / (1.0 + math.exp(-logit))
    e = math.exp(logit)
    return e / (1.0 + e)


def _design(obs: Sequence[BinaryOutcome], with_bias: bool) -> np.ndarray:
    cols = [[o.successes for o in obs], [o.failures for o in obs]]
    if with_bias:
        cols.append([1.0] * len(obs))
    return np.array(cols, dtype=float).T


def objective_and_grad(theta: np.ndarray, Z: np.ndarray, y: np.ndarray, offset: float = 0.0,
                       l2: float = L2) -> tuple[float, np.ndarray]:
    """Mean Bernoulli log-likelihood minus ``l2/2`` times the squared norm of
    the count weights (first two entries of ``theta``), and its gradient.

    ``Z`` columns are (successes, failures[, 1]); ``offset`` is a fixed added logit.
    """
    eta = Z @ theta + offset
    # log sigma(eta) and log(1 - sigma(eta)), numerically stable
    log_p = -np.logaddexp(0.0, -eta)
    log_q = -np.logaddexp(0.0, eta)
    w = theta[:2]
    obj = float(np.mean(y * log_p + (1 - y) * log_q)) - 0.5 * l2 * float(w @ w)
    p = np.exp(log_p)
    grad = Z.T @ (y - p) / len(y)
    grad[:2] -= l2 * w
    return obj, grad


def _ascend(Z: np.ndarray, y: np.ndarray, offset: float, l2: float, max_iter: int,
            tol: float) -> np.ndarray:
    """Damped Newton ascent with Armijo backtracking.

    A tiny ridge on the unpenalised intercept keeps the Hessian invertible
    when a skill's labels are all equal.
    """
    k = Z.shape[1]
    ridge = np.full(k, 1e-8)
    ridge[:2] = l2
    theta = np.zeros(k)
    obj, g = objective_and_grad(theta, Z, y, offset, l2)
    for _ in range(max_iter):
        if float(np.max(np.abs(g))) < tol:
            break
        eta = Z @ theta + offset
        pq = np.exp(-np.logaddexp(0.0, -eta) - np.logaddexp(0.0, eta))
        H = (Z.T * pq) @ Z / len(y) + np.diag(ridge)
        d = np.linalg.solve(H, g)
        t = 1.0
        while True:
            new_obj, new_g = objective_and_grad(theta + t * d, Z, y, offset, l2)
            if new_obj >= obj + 1e-4 * t * float(g @ d) or t < 1e-12:
                break
            t *= 0.5
        theta = theta + t * d
        obj, g = new_obj, new_g
    return theta


def train_pfa(observations: Sequence[BinaryOutcome], mode: str = "modified",
              config: Mapping[str, Any] | None = None) -> PfaParams:
    """Fit per-skill weights by L2-regularised logistic regression.

    Config keys: ``bias`` (shared intercept, modified mode), ``l2``,
    ``max_iter``, ``tol``. Skills whose observations carry a single label
    are fitted anyway and flagged ``degenerate``.
    """
    if mode not in MODES:
        raise PfaError(f"unknown PFA mode {mode!r}; choose from {MODES}")
    if not observations:
        raise PfaError("no observations to train on")
    cfg = dict(config or {})
    bias = float(cfg.get("bias", 0.0))
    l2 = float(cfg.get("l2", L2))
    max_iter = int(cfg.get("max_iter", 200))
    tol = float(cfg.get("tol", 1e-9))
    by_skill: dict[int, list[BinaryOutcome]] = {}
    for o in observations:
        if o.label not in (0, 1):
            raise PfaError(f"non-binary label {o.label!r} for student {o.student_id!r}")
        by_skill.setdefault(o.skill, []).append(o)
    params = PfaParams(mode, bias)
    for s in sorted(by_skill):
        obs = by_skill[s]
        y = np.array([o.label for o in obs], dtype=float)
        with_bias = mode == "original"
        Z = _design(obs, with_bias)
        theta = _ascend(Z, y, 0.0 if with_bias else bias, l2, max_iter, tol)
        params.skills[s] = SkillParams(
            float(theta[0]), float(theta[1]), float(theta[2]) if with_bias else None,
            degenerate=len(set(y.tolist())) < 2, n_obs=len(obs))
    return params


def observations_from_outcomes(records: Iterable[tuple[str, int, float]]) -> list[BinaryOutcome]:
    """Turn an ordered (student, skill, value) stream into observations.

    Values outside {0, 1} are dropped. Each kept observation carries the
    student's binary success and failure counts on that skill so far.
    """
    counts: dict[tuple[str, int], list[int]] = {}
    out = []
    for student, skill, value in records:
        if value not in (0, 1):
            continue
        tally = counts.setdefault((student, skill), [0, 0])
        out.append(BinaryOutcome(student, skill, int(value), tally[0], tally[1]))
        tally[0 if value == 1 else 1] += 1
    return out


def final_counts(records: Iterable[tuple[str, int, float]]) -> dict[str, dict[int, tuple[int, int]]]:
    """Per-student binary success/failure totals for every skill."""
    out: dict[str, dict[int, tuple[int, int]]] = {}
    for student, skill, value in records:
        per = out.setdefault(student, {s: (0, 0) for s in range(N_SKILLS)})
        wins, losses = per[skill]
        if value == 1:
            per[skill] = (wins + 1, losses)
        elif value == 0:
            per[skill] = (wins, losses + 1)
    return out


def pfa_skill_vector(params: PfaParams, counts: Mapping[int, tuple[int, int]],
                     student_id: str = "") -> SkillVector:
    """Per-skill probability; skills the params never saw get 0.5."""
    out = []
    for s in range(N_SKILLS):
        if s not in params.skills:
            out.append(FALLBACK_P)
            continue
        out.append(pfa_p(pfa_m(params, {s: counts.get(s, (0, 0))}, [s])))
    return SkillVector(student_id, tuple(out))
