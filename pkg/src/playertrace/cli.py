"""Command-line entry point.

Exit codes: 0 success, 1 usage error, 2 data error. Every run echoes its
effective configuration and seed on stderr as one ``# playertrace`` line.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from typing import Any, Sequence

import numpy as np

from ._io import write_atomic
from .evaluation import EvalConfig, EvalError, load_eval_config, run_experiment
from .features import SchemaError, WindowSpec, feature_matrix, feature_schema, slice_windows
from .pfa import MODES, PfaError, PfaParams, final_counts, observations_from_outcomes, pfa_skill_vector, train_pfa
from .rules import BUILTIN_RULES, apply_rules, catalog_markdown
from .strategy import ALGORITHMS, DEFAULT_ALGORITHM, ModelError, StrategyLabel, load_model, model_to_json, train_arrays
from .synth import ConfigError, GenConfig, LEVEL_SETS, generate_cohort, load_cohort, read_outcomes, truth_export, window_labels
from .telemetry import SKILL_NAMES, TelemetryError, read_manifest, read_traces, validate_trace
from .tracer import trace_levels, trace_student

DEFAULT_TAU = 30.0


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _emit(text: str, out: str | None) -> None:
    if out:
        write_atomic(out, text)
    else:
        sys.stdout.write(text)


def _announce(cmd: str, effective: dict[str, Any]) -> None:
    print(f"# playertrace {cmd} " + json.dumps(effective, sort_keys=True, default=str), file=sys.stderr)


def _num(x: float) -> str:
    return str(int(x)) if float(x).is_integer() else repr(float(x))


def _csv(rows: list[list[Any]]) -> str:
    buf = io.StringIO()
    csv.writer(buf, lineterminator="\n").writerows(rows)
    return buf.getvalue()


def _read_json(path: str) -> Any:
    with open(path, encoding="utf-8") as fh:
        try:
            return json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: malformed JSON: {exc.msg}") from None


# -- subcommands -----------------------------------------------------------------

def cmd_validate(a) -> int:
    _announce("validate", {"trace": a.trace, "manifest": a.manifest, "strict": a.strict})
    traces = read_traces(a.trace)
    manifest = read_manifest(a.manifest)
    diags = [d for t in traces for d in validate_trace(t, manifest)]
    lines = [f"{d.code}\t{d.student_id}\t{d.level_id}\t{d.message}" for d in diags]
    n_events = sum(t.n_events for t in traces)
    lines.append(f"{len(traces)} student(s), {n_events} event(s), {len(diags)} diagnostic(s)")
    _emit("\n".join(lines) + "\n", a.out)
    return 2 if (diags and a.strict) else 0


def cmd_windows(a) -> int:
    _announce("windows", {"trace": a.trace, "tau_s": a.tau})
    spec = WindowSpec(a.tau)
    rows: list[list[Any]] = [["student", "level", "window", "start_ms", "end_ms", "stop_ms", "n_events"]]
    for t in read_traces(a.trace):
        for w in slice_windows(t, spec):
            rows.append([w.student_id, w.level_id, w.index, _num(w.start_ms), _num(w.end_ms),
                         _num(w.stop_ms), len(w.events)])
    _emit(_csv(rows), a.out)
    return 0


def cmd_features(a) -> int:
    _announce("features", {"trace": a.trace, "tau_s": a.tau, "schema": "v1"})
    spec = WindowSpec(a.tau)
    rows: list[list[Any]] = [["student", "level", "window", "start_ms"] + list(feature_schema("v1").names)]
    for t in read_traces(a.trace):
        wins = slice_windows(t, spec)
        if not wins:
            continue
        for w, x in zip(wins, feature_matrix(wins)):
            rows.append([w.student_id, w.level_id, w.index, _num(w.start_ms)] + [repr(float(v)) for v in x])
    _emit(_csv(rows), a.out)
    return 0


def _read_labels(path: str) -> dict[tuple[str, str, int], StrategyLabel]:
    out = {}
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        need = {"student", "level", "window", "label"}
        if reader.fieldnames is None or not need <= set(reader.fieldnames):
            raise TelemetryError(f"{path}: label file needs columns {sorted(need)}")
        for i, row in enumerate(reader, start=2):
            try:
                out[(row["student"], row["level"], int(row["window"]))] = StrategyLabel.parse(row["label"])
            except (ValueError, KeyError) as exc:
                raise TelemetryError(f"{path}: bad label row: {exc}", i) from None
    return out


def _training_data(a, spec: WindowSpec):
    if a.data:
        cohort = load_cohort(a.data)
        wins = [w for t in cohort.traces for w in slice_windows(t, spec)]
        labels = [int(l) for l in window_labels(cohort.segments, wins)]
    else:
        if not (a.trace and a.labels):
            raise UsageError("train needs --data, or both --trace and --labels")
        table = _read_labels(a.labels)
        wins = [w for t in read_traces(a.trace) for w in slice_windows(t, spec)]
        missing = [w for w in wins if (w.student_id, w.level_id, w.index) not in table]
        if missing:
            w = missing[0]
            raise TelemetryError(f"no label for window {w.index} of {w.student_id}/{w.level_id} "
                                 f"({len(missing)} unlabeled window(s))")
        labels = [int(table[(w.student_id, w.level_id, w.index)]) for w in wins]
    if not wins:
        raise TelemetryError("no windows to train on")
    return feature_matrix(wins), np.array(labels, dtype=np.int64)


def cmd_train(a) -> int:
    cfg = _read_json(a.config) if a.config else {}
    if not isinstance(cfg, dict):
        raise ConfigError("classifier config must be a JSON object")
    _announce("train", {"algorithm": a.algorithm, "tau_s": a.tau, "seed": a.seed, "config": cfg,
                        "data": a.data, "trace": a.trace, "labels": a.labels})
    X, y = _training_data(a, WindowSpec(a.tau))
    model = train_arrays(X, y, a.algorithm, cfg, a.seed)
    model.config["tau_s"] = a.tau
    for msg in model.warnings:
        print(f"warning: {msg}", file=sys.stderr)
    write_atomic(a.out, model_to_json(model))
    return 0


def _model_tau(model, override: float | None) -> float:
    if override is not None:
        return override
    return float(model.config.get("tau_s", DEFAULT_TAU))


def cmd_predict(a) -> int:
    model = load_model(a.model)
    tau = _model_tau(model, a.tau)
    _announce("predict", {"model": a.model, "trace": a.trace, "tau_s": tau,
                          "algorithm": model.algorithm, "seed": model.config.get("seed", 0)})
    rows: list[list[Any]] = [["student", "level", "window", "start_ms", "label",
                              "p_trial_and_error", "p_sequential", "p_parallel"]]
    for t in read_traces(a.trace):
        wins = slice_windows(t, WindowSpec(tau))
        if not wins:
            continue
        probs = model.predict_proba(feature_matrix(wins))
        for w, p in zip(wins, probs):
            lab = StrategyLabel(int(np.argmax(p)))
            rows.append([w.student_id, w.level_id, w.index, _num(w.start_ms), lab.name]
                        + [repr(float(v)) for v in p])
    _emit(_csv(rows), a.out)
    return 0


def cmd_rules(a) -> int:
    _announce("rules", {"trace": a.trace, "tau_s": a.tau, "n_rules": len(BUILTIN_RULES)})
    lines = []
    for t in read_traces(a.trace):
        for w in slice_windows(t, WindowSpec(a.tau)):
            rep = apply_rules(w)
            counts = {SKILL_NAMES[s]: int(n) for s, n in enumerate(rep.counts) if n}
            lines.append(json.dumps({"student": w.student_id, "level": w.level_id, "window": w.index,
                                     "start_ms": w.start_ms, "counts": counts}, sort_keys=True))
    _emit("".join(x + "\n" for x in lines), a.out)
    return 0


def cmd_trace(a) -> int:
    model = load_model(a.model)
    tau = _model_tau(model, a.tau)
    _announce("trace", {"model": a.model, "trace": a.trace, "manifest": a.manifest, "tau_s": tau,
                        "per_level": a.per_level, "seed": model.config.get("seed", 0)})
    manifest = read_manifest(a.manifest)
    traces = read_traces(a.trace)
    spec = WindowSpec(tau)
    docs = []
    for t in traces:
        if a.per_level:
            per = trace_levels(t, manifest, model, spec)
            docs.append({"student": t.student_id,
                         "levels": [{"level": lid, **v.to_dict()} for lid, v in per.items()]})
        else:
            docs.append(trace_student(t, manifest, model, spec).to_dict())
    doc: Any = docs[0] if len(docs) == 1 else docs
    _emit(json.dumps(doc, indent=1) + "\n", a.out)
    return 0


def cmd_pfa_train(a) -> int:
    cfg = {"bias": a.bias, "l2": a.l2}
    _announce("pfa-train", {"outcomes": a.outcomes, "mode": a.mode, **cfg})
    obs = observations_from_outcomes((s, k, v) for s, _, k, v in read_outcomes(a.outcomes))
    params = train_pfa(obs, a.mode, cfg)
    for s, sp in sorted(params.skills.items()):
        if sp.degenerate:
            print(f"warning: only one outcome label for {SKILL_NAMES[s]!r}", file=sys.stderr)
    write_atomic(a.out, params.to_json() + "\n")
    return 0


def cmd_pfa_predict(a) -> int:
    _announce("pfa-predict", {"params": a.params, "outcomes": a.outcomes, "student": a.student})
    with open(a.params, encoding="utf-8") as fh:
        params = PfaParams.from_json(fh.read())
    counts = final_counts((s, k, v) for s, _, k, v in read_outcomes(a.outcomes))
    students = [a.student] if a.student else sorted(counts)
    docs = []
    for s in students:
        if s not in counts:
            raise PfaError(f"no outcomes for student {s!r}")
        docs.append(pfa_skill_vector(params, counts[s], s).to_dict())
    doc: Any = docs[0] if len(docs) == 1 else docs
    _emit(json.dumps(doc, indent=1) + "\n", a.out)
    return 0


def cmd_eval(a) -> int:
    cfg = load_eval_config(a.config) if a.config else EvalConfig()
    if a.seed is not None:
        cfg.seed = a.seed
    if a.tau:
        cfg.taus = tuple(a.tau)
    if a.algorithm:
        cfg.algorithms = tuple(a.algorithm)
    if a.macro:
        cfg.accuracy = "macro"
    if a.pfa_mode:
        cfg.pfa_mode = a.pfa_mode
    cfg.validate()
    _announce("eval", {"experiment": a.experiment, "data": a.data, "train": a.train, **cfg.to_dict()})
    cohort = load_cohort(a.data) if a.data else None
    train = load_cohort(a.train) if a.train else None
    if a.experiment == 2 and train is not None and cohort is None:
        raise UsageError("eval --experiment 2 with --train also needs --data (the test cohort)")
    report = run_experiment(a.experiment, cfg, cohort=cohort, train=train)
    sys.stdout.write(report.to_table())
    for n in report.notes:
        print(f"note: {n}", file=sys.stderr)
    if a.out:
        write_atomic(a.out, report.to_csv())
    return 0


def cmd_synth(a) -> int:
    base = _read_json(a.config) if a.config else {}
    if not isinstance(base, dict):
        raise ConfigError("generator config must be a JSON object")
    for key, val in (("seed", a.seed), ("n_students", a.students), ("noise", a.noise),
                     ("level_set", a.level_set), ("mastery", a.mastery)):
        if val is not None:
            base[key] = val
    cfg = GenConfig.from_dict(base)
    _announce("synth", cfg.to_dict())
    cohort = generate_cohort(cfg)
    names = truth_export(cohort, a.out, tuple(a.taus))
    print(f"wrote {len(names)} files to {a.out}", file=sys.stderr)
    return 0


def cmd_export_catalog(a) -> int:
    _announce("export-catalog", {"format": a.format})
    if a.format == "markdown":
        text = catalog_markdown()
    else:
        by_skill = {r.skill: r for r in BUILTIN_RULES}
        text = json.dumps([{"id": i, "name": n,
                            "rule": by_skill[i].prose if i in by_skill else None,
                            "proxy": by_skill[i].proxy if i in by_skill else None}
                           for i, n in enumerate(SKILL_NAMES)], indent=1) + "\n"
    _emit(text, a.out)
    return 0


# -- parser ------------------------------------------------------------------------

def _mastery(text: str) -> str | float:
    if text == "uniform":
        return text
    try:
        return float(text)
    except ValueError:
        raise argparse.ArgumentTypeError("mastery must be 'uniform' or a number") from None


def _positive(text: str) -> float:
    try:
        v = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None
    if not v > 0:
        raise argparse.ArgumentTypeError("must be positive")
    return v


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="playertrace", description="Skill mastery estimation from gameplay telemetry.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def tau_arg(sp, default=DEFAULT_TAU):
        sp.add_argument("--tau", type=_positive, default=default, help="window length in seconds")

    sp = sub.add_parser("validate", help="check a telemetry file against a manifest")
    sp.add_argument("--trace", required=True)
    sp.add_argument("--manifest", required=True)
    sp.add_argument("--strict", action="store_true", help="exit 2 when diagnostics are found")
    sp.add_argument("--out")
    sp.set_defaults(func=cmd_validate)

    sp = sub.add_parser("windows", help="list the time windows of each level")
    sp.add_argument("--trace", required=True)
    tau_arg(sp)
    sp.add_argument("--out")
    sp.set_defaults(func=cmd_windows)

    sp = sub.add_parser("features", help="feature vectors per window as CSV")
    sp.add_argument("--trace", required=True)
    tau_arg(sp)
    sp.add_argument("--out")
    sp.set_defaults(func=cmd_features)

    sp = sub.add_parser("train", help="train a strategy classifier")
    sp.add_argument("--data", help="directory written by `synth` (telemetry plus strategy truth)")
    sp.add_argument("--trace")
    sp.add_argument("--labels", help="CSV with student, level, window, label columns")
    sp.add_argument("--algorithm", choices=ALGORITHMS, default=DEFAULT_ALGORITHM)
    sp.add_argument("--config", help="JSON object of classifier settings")
    sp.add_argument("--seed", type=int, default=0)
    tau_arg(sp)
    sp.add_argument("--out", required=True)
    sp.set_defaults(func=cmd_train)

    sp = sub.add_parser("predict", help="strategy label and probabilities per window")
    sp.add_argument("--model", required=True)
    sp.add_argument("--trace", required=True)
    sp.add_argument("--tau", type=_positive, help="defaults to the tau the model was trained with")
    sp.add_argument("--out")
    sp.set_defaults(func=cmd_predict)

    sp = sub.add_parser("rules", help="rule firing counts per window (JSON lines)")
    sp.add_argument("--trace", required=True)
    tau_arg(sp)
    sp.add_argument("--out")
    sp.set_defaults(func=cmd_rules)

    sp = sub.add_parser("trace", help="estimate per-skill mastery")
    sp.add_argument("--model", required=True)
    sp.add_argument("--trace", required=True)
    sp.add_argument("--manifest", required=True)
    sp.add_argument("--tau", type=_positive, help="defaults to the tau the model was trained with")
    sp.add_argument("--per-level", action="store_true", help="one estimate per level instead of per play-through")
    sp.add_argument("--out")
    sp.set_defaults(func=cmd_trace)

    sp = sub.add_parser("pfa-train", help="fit PFA weights from binary outcome annotations")
    sp.add_argument("--outcomes", required=True, help="JSON lines of {student, skill, value}")
    sp.add_argument("--mode", choices=MODES, default="modified")
    sp.add_argument("--bias", type=float, default=0.0, help="shared intercept in modified mode")
    sp.add_argument("--l2", type=float, default=1e-4)
    sp.add_argument("--out", required=True)
    sp.set_defaults(func=cmd_pfa_train)

    sp = sub.add_parser("pfa-predict", help="PFA skill vectors from outcome counts")
    sp.add_argument("--params", required=True)
    sp.add_argument("--outcomes", required=True)
    sp.add_argument("--student")
    sp.add_argument("--out")
    sp.set_defaults(func=cmd_pfa_predict)

    sp = sub.add_parser("eval", help="run one of the four experiments")
    sp.add_argument("--experiment", type=int, choices=(1, 2, 3, 4), required=True)
    sp.add_argument("--config", help="JSON eval config")
    sp.add_argument("--data", help="cohort directory (the test cohort for experiment 2)")
    sp.add_argument("--train", help="training cohort directory for experiment 2")
    sp.add_argument("--seed", type=int)
    sp.add_argument("--tau", type=_positive, action="append")
    sp.add_argument("--algorithm", choices=ALGORITHMS, action="append")
    sp.add_argument("--macro", action="store_true", help="average accuracy per student instead of pooling")
    sp.add_argument("--pfa-mode", choices=MODES)
    sp.add_argument("--out", help="CSV report path")
    sp.set_defaults(func=cmd_eval)

    sp = sub.add_parser("synth", help="generate a synthetic cohort with ground truth")
    sp.add_argument("--out", required=True, help="output directory")
    sp.add_argument("--seed", type=int)
    sp.add_argument("--students", type=int)
    sp.add_argument("--noise", type=float)
    sp.add_argument("--level-set", choices=sorted(LEVEL_SETS))
    sp.add_argument("--mastery", type=_mastery)
    sp.add_argument("--config", help="JSON generator config")
    sp.add_argument("--taus", type=_positive, nargs="+", default=[10, 20, 30])
    sp.set_defaults(func=cmd_synth)

    sp = sub.add_parser("export-catalog", help="skill catalog with rules and proxies")
    sp.add_argument("--format", choices=("markdown", "json"), default="markdown")
    sp.add_argument("--out")
    sp.set_defaults(func=cmd_export_catalog)
    return p


DATA_ERRORS = (TelemetryError, ModelError, PfaError, EvalError, ConfigError, SchemaError,
               OSError, json.JSONDecodeError, ValueError, KeyError)


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"playertrace: error: {exc}", file=sys.stderr)
        return 1
    except DATA_ERRORS as exc:
        print(f"playertrace: data error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
