"""Command-line entry points.

Every subcommand is a pure function of (input files, flags, seed) and
writes one canonical JSON report, plus plot-ready CSV files when
``--format csv`` is chosen. Exit codes: 0 success, 1 input/usage error,
2 success with explicitly surfaced degenerate-metric conditions.

A TOML config file (``--config``) may supply any long flag of the invoked
subcommand as a top-level key (dashes become underscores); flags given on
the command line override the file.
"""

from __future__ import annotations

import argparse
import itertools
import sys
import warnings
from dataclasses import replace
from pathlib import Path

import numpy as np

try:
    import tomllib  # py311+
except ModuleNotFoundError:  # pragma: no cover
    import tomli as tomllib

from .competence import detect_transition
from .errors import DegenerateLabels, UQGateError
from .gating import (
    COST_RATIO_GRID_DEFAULT,
    COVERAGE_GRID_DEFAULT,
    CostModel,
    act_defer_agreement,
    calibrate_threshold,
    evaluate_policy,
    optimize_threshold,
)
from .ingest import assemble_family, load_log, save_log
from .metrics import auroc_value, spearman_value
from .oracle import OracleConfig, generate_ood_run, generate_run
from .report import (
    atomic_write_text,
    ci_dict,
    describe_log,
    make_envelope,
    rc_point_dict,
    write_csv,
    write_report,
)
from .resampling import bootstrap_ci, paired_equivalence
from .robustness import (
    CorruptionKind,
    CorruptionSpec,
    build_shift_report,
    corrupt_log,
    label_histogram,
    ood_auroc,
    rare_class_split,
    split_scores_by_ood,
)
from .scores import (
    ALL_ESTIMATORS,
    SOFTMAX_ESTIMATORS,
    EstimatorId,
    score_run,
    scores_to_csv,
)
from .simulate import (
    MODE_DEPLOYMENT_TRANSFER,
    MODE_MATCHED_AUTONOMY,
    FallbackPolicy,
    SimParams,
    run_protocol,
)
from .util import parse_float_list

EXIT_OK = 0
EXIT_INPUT = 1
EXIT_DEGENERATE = 2

_ESTIMATOR_NAMES = [e.value for e in ALL_ESTIMATORS]


class _CliError(Exception):
    """Usage/input problem: message to stderr, exit 1."""


class _Parser(argparse.ArgumentParser):
    # argparse exits 2 on bad usage by default; this tool reserves 2 for
    # degenerate-metric conditions, so usage problems become exit 1.
    def error(self, message):
        raise _CliError(message)


def _common_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--out", default="report.json", help="report path (canonical JSON)")
    p.add_argument("--format", choices=("json", "csv"), default="json",
                   help="csv additionally writes plot-ready CSV files next to the report")
    p.add_argument("--seed", type=int, default=0, help="master seed")
    p.add_argument("--deterministic", action="store_true",
                   help="omit timestamps so identical runs are byte-identical")
    p.add_argument("--config", default=None, help="TOML file with flag defaults")
    p.add_argument("--workers", type=int, default=1,
                   help="worker threads (results are identical for any value)")


def _estimator_flag(p: argparse.ArgumentParser, default=None, single=False) -> None:
    if single:
        p.add_argument("--estimator", choices=_ESTIMATOR_NAMES,
                       default=EstimatorId.SOFTMAX_ENTROPY.value)
    else:
        p.add_argument("--estimator", action="append", choices=_ESTIMATOR_NAMES,
                       default=None,
                       help="repeatable; default: " + (",".join(e.value for e in default) if default else "softmax_entropy"))


def build_parser() -> tuple[_Parser, dict[str, argparse.ArgumentParser]]:
    parser = _Parser(prog="uqgate", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    commands: dict[str, argparse.ArgumentParser] = {}

    def cmd(name: str, help_: str) -> argparse.ArgumentParser:
        p = sub.add_parser(name, help=help_)
        _common_flags(p)
        commands[name] = p
        return p

    p = cmd("score", "compute per-sample uncertainty scores")
    p.add_argument("--input", required=True)
    _estimator_flag(p, default=SOFTMAX_ESTIMATORS)

    p = cmd("evaluate", "ranking metrics with bootstrap CIs and risk-coverage points")
    p.add_argument("--input", required=True)
    _estimator_flag(p, default=SOFTMAX_ESTIMATORS)
    p.add_argument("--tau", action="append", type=float, default=None,
                   help="extra thresholds to evaluate (repeatable)")
    p.add_argument("--bootstrap", type=int, default=1000)
    p.add_argument("--ci-level", type=float, default=0.95)
    p.add_argument("--coverage-grid", default=None,
                   help="comma list of target coverages (default 0.5,...,0.9)")

    p = cmd("compare", "pairwise equivalence verdicts and act/defer agreement")
    p.add_argument("--input", required=True)
    _estimator_flag(p, default=SOFTMAX_ESTIMATORS)
    p.add_argument("--metric", choices=("spearman_rho", "auroc", "both"), default="both")
    p.add_argument("--delta", type=float, default=0.01)
    p.add_argument("--bootstrap", type=int, default=1000)
    p.add_argument("--ci-level", type=float, default=0.95)
    p.add_argument("--coverage-grid", default=None)

    p = cmd("sweep", "coverage-calibrated threshold sweep")
    p.add_argument("--input", required=True)
    _estimator_flag(p, default=SOFTMAX_ESTIMATORS)
    p.add_argument("--coverage-grid", default=None)

    p = cmd("optimize", "cost-sensitive threshold selection")
    p.add_argument("--input", required=True)
    _estimator_flag(p, single=True)
    p.add_argument("--c-err", type=float, default=None)
    p.add_argument("--c-def", type=float, default=None)
    p.add_argument("--cost-ratio", default=None,
                   help="comma list of c_err/c_def ratios (c_def=1); default 0.5,1,2,5,10,20")

    p = cmd("competence", "competence-transition detection over a run family")
    p.add_argument("--input", action="append", required=True,
                   help="repeatable: one log per (fraction, seed)")
    _estimator_flag(p, single=True)
    p.add_argument("--bootstrap", type=int, default=1000)
    p.add_argument("--ci-level", type=float, default=0.95)
    p.add_argument("--std-cap", type=float, default=0.05)
    p.add_argument("--std-ddof", type=int, choices=(0, 1), default=0)

    p = cmd("corrupt", "corrupt feature sequences, or evaluate a shifted log")
    p.add_argument("--input", required=True, help="clean test log")
    p.add_argument("--corruption", choices=[k.value for k in CorruptionKind], default=None)
    p.add_argument("--severity", type=int, default=None)
    p.add_argument("--corruption-seed", type=int, default=0)
    p.add_argument("--output-log", default=None, help="where to write the corrupted log")
    p.add_argument("--calib", default=None, help="clean calibration log (shift evaluation)")
    p.add_argument("--shifted", action="append", default=None,
                   help="repeatable KIND:SEVERITY:PATH of re-scored corrupted logs")
    _estimator_flag(p, single=True)
    p.add_argument("--target-coverage", type=float, default=0.8)

    p = cmd("oodeval", "uncertainty-based OOD detection AUROC")
    p.add_argument("--input", required=True, help="log containing OOD-flagged records")
    _estimator_flag(p, default=SOFTMAX_ESTIMATORS)
    p.add_argument("--rare-fraction", type=float, default=None,
                   help="also report the lowest-frequency class split at this fraction")

    p = cmd("simulate", "embodied act/defer consequence protocols")
    p.add_argument("--input", action="append", required=True,
                   help="repeatable: one evaluation log per model seed")
    p.add_argument("--calib", action="append", default=None,
                   help="repeatable: calibration log per model seed (deployment transfer)")
    _estimator_flag(p, default=(EstimatorId.SOFTMAX_ENTROPY,))
    p.add_argument("--mode", choices=(MODE_DEPLOYMENT_TRANSFER, MODE_MATCHED_AUTONOMY),
                   default=MODE_DEPLOYMENT_TRANSFER)
    p.add_argument("--coverage-grid", default=None, help="deployment-transfer targets")
    p.add_argument("--target-autonomy", default="0.4", help="matched-autonomy targets")
    p.add_argument("--tolerance", type=float, default=0.01)
    p.add_argument("--n-primitives", type=int, default=3)
    p.add_argument("--cost-success", type=float, default=1.0)
    p.add_argument("--cost-collision", type=float, default=10.0)
    p.add_argument("--cost-defer", type=float, default=2.0)
    p.add_argument("--p-collision-wrong", type=float, default=0.7)
    p.add_argument("--p-collision-correct", type=float, default=0.0)
    p.add_argument("--fallback", choices=[f.value for f in FallbackPolicy],
                   default=FallbackPolicy.SAFE_WAIT.value)
    p.add_argument("--repeats", type=int, default=20)

    p = cmd("synth", "generate synthetic oracle logs")
    p.add_argument("--k", type=int, default=6)
    p.add_argument("--d", type=int, default=8)
    p.add_argument("--t", type=int, default=4)
    p.add_argument("--n-train", type=int, default=600)
    p.add_argument("--n-test", type=int, default=400)
    p.add_argument("--separation", type=float, default=1.0)
    p.add_argument("--dropout-rate", type=float, default=0.25)
    p.add_argument("--n-passes", type=int, default=30)
    p.add_argument("--n-members", type=int, default=3)
    p.add_argument("--temperature", type=float, default=0.05)
    p.add_argument("--fraction", action="append", type=float, default=None,
                   help="train fractions (repeatable; default 0.7)")
    p.add_argument("--model-seed", action="append", type=int, default=None,
                   help="model seeds (repeatable; default 0)")
    p.add_argument("--split", choices=("test", "calibration", "both"), default="test")
    p.add_argument("--holdout", action="append", type=int, default=None,
                   help="classes held out as OOD (repeatable)")
    p.add_argument("--no-features", action="store_true",
                   help="omit raw feature sequences from the logs")
    p.add_argument("--out-dir", default=".")

    return parser, commands


# --- helpers ---------------------------------------------------------------------


def _estimators(args, fallback=SOFTMAX_ESTIMATORS) -> list[EstimatorId]:
    raw = getattr(args, "estimator", None)
    if raw is None:
        return list(fallback)
    if isinstance(raw, str):
        return [EstimatorId(raw)]
    return [EstimatorId(r) for r in raw]


def _coverage_grid(args) -> tuple[float, ...]:
    raw = getattr(args, "coverage_grid", None)
    return parse_float_list(raw) if raw else COVERAGE_GRID_DEFAULT


def _csv_path(args, suffix: str) -> str:
    out = Path(args.out)
    return str(out.with_name(out.stem + f".{suffix}.csv"))


def _load(path: str):
    try:
        return load_log(path)
    except OSError as exc:
        raise _CliError(f"cannot read log {path!r}: {exc}") from None


# --- subcommand implementations ------------------------------------------------------


def _cmd_score(args, report) -> int:
    log = _load(args.input)
    report["inputs"].append(describe_log(args.input, log))
    estimators = _estimators(args)
    score_sets = [score_run(log, e) for e in estimators]
    report["sections"]["scores"] = [
        {
            "estimator": ss.estimator.value,
            "n": len(ss),
            "n_excluded_ood": ss.n_excluded,
            "mean": float(ss.values.mean()),
            "min": float(ss.values.min()),
            "max": float(ss.values.max()),
        }
        for ss in score_sets
    ]
    if args.format == "csv":
        path = _csv_path(args, "scores")
        atomic_write_text(path, scores_to_csv(score_sets))
        report["artifacts"].append(path)
    return EXIT_OK


def _metric_ci(values, errors, fn, b, level, seed, workers):
    return bootstrap_ci(
        lambda idx: fn(values[idx], errors[idx]),
        n=len(values), b=b, level=level, seed=seed, workers=workers,
    )


def _cmd_evaluate(args, report) -> int:
    log = _load(args.input)
    report["inputs"].append(describe_log(args.input, log))
    code = EXIT_OK
    metrics_section, curves = [], []
    for estimator in _estimators(args):
        ss = score_run(log, estimator)
        entry = {
            "estimator": estimator.value,
            "n": len(ss),
            "n_errors": int(np.sum(ss.errors != 0)),
            "degenerate": False,
            "spearman_rho": None,
            "auroc": None,
        }
        try:
            entry["spearman_rho"] = ci_dict(_metric_ci(
                ss.values, ss.errors, spearman_value,
                args.bootstrap, args.ci_level, args.seed, args.workers))
            entry["auroc"] = ci_dict(_metric_ci(
                ss.values, ss.errors, auroc_value,
                args.bootstrap, args.ci_level, args.seed, args.workers))
        except DegenerateLabels as exc:
            entry["degenerate"] = True
            report["warnings"].append(
                f"{estimator.value}: ranking metrics undefined ({exc})")
            code = EXIT_DEGENERATE
        metrics_section.append(entry)

        taus = sorted(
            {calibrate_threshold(ss.values, c).tau for c in _coverage_grid(args)}
            | set(args.tau or ())
        )
        curves.append({
            "estimator": estimator.value,
            "points": [rc_point_dict(evaluate_policy(ss.values, ss.errors, t)) for t in taus],
        })
    report["sections"]["metrics"] = metrics_section
    report["sections"]["risk_coverage"] = curves
    if args.format == "csv":
        path = _csv_path(args, "risk_coverage")
        write_csv(path, ("estimator", "tau", "coverage", "risk"),
                  [(c["estimator"], p["tau"], p["coverage"], p["risk"])
                   for c in curves for p in c["points"]])
        report["artifacts"].append(path)
    return code


def _cmd_compare(args, report) -> int:
    log = _load(args.input)
    report["inputs"].append(describe_log(args.input, log))
    estimators = _estimators(args)
    if len(estimators) < 2:
        raise _CliError("compare needs at least two --estimator values")
    score_sets = {e: score_run(log, e) for e in estimators}
    metrics = ("spearman_rho", "auroc") if args.metric == "both" else (args.metric,)
    code = EXIT_OK

    equivalence = []
    for (ea, sa), (eb, sb) in itertools.combinations(score_sets.items(), 2):
        for metric in metrics:
            try:
                verdict = paired_equivalence(
                    sa, sb, metric=metric, delta=args.delta, b=args.bootstrap,
                    level=args.ci_level, seed=args.seed, workers=args.workers)
            except DegenerateLabels as exc:
                report["warnings"].append(
                    f"{ea.value} vs {eb.value} ({metric}): undefined ({exc})")
                code = EXIT_DEGENERATE
                continue
            equivalence.append({
                "metric": metric,
                "estimator_a": ea.value,
                "estimator_b": eb.value,
                "delta": verdict.delta,
                "verdict": verdict.verdict,
                "diff": ci_dict(verdict.diff_ci),
            })

    grid = _coverage_grid(args)
    pairs = []
    for (ea, sa), (eb, sb) in itertools.combinations(score_sets.items(), 2):
        agreement = [act_defer_agreement(sa, sb, c) for c in grid]
        pairs.append({
            "estimator_a": ea.value,
            "estimator_b": eb.value,
            "agreement": agreement,
            "min_agreement": min(agreement),
        })
    report["sections"]["equivalence"] = equivalence
    report["sections"]["agreement"] = {"coverage_grid": list(grid), "pairs": pairs}
    if args.format == "csv":
        path = _csv_path(args, "agreement")
        write_csv(path, ("estimator_a", "estimator_b", "coverage", "agreement"),
                  [(p["estimator_a"], p["estimator_b"], c, a)
                   for p in pairs for c, a in zip(grid, p["agreement"])])
        report["artifacts"].append(path)
    return code


def _cmd_sweep(args, report) -> int:
    log = _load(args.input)
    report["inputs"].append(describe_log(args.input, log))
    grid = _coverage_grid(args)
    section = []
    for estimator in _estimators(args):
        ss = score_run(log, estimator)
        points = []
        for target in grid:
            cal = calibrate_threshold(ss.values, target)
            point = evaluate_policy(ss.values, ss.errors, cal.tau)
            points.append({
                "target_coverage": target,
                "tau": cal.tau,
                "achieved_coverage": cal.achieved_coverage,
                "risk": point.risk,
                "executed": point.executed,
                "executed_errors": point.executed_errors,
            })
        section.append({"estimator": estimator.value, "points": points})
    report["sections"]["sweep"] = section
    if args.format == "csv":
        path = _csv_path(args, "sweep")
        write_csv(path, ("estimator", "target_coverage", "tau", "achieved_coverage", "risk"),
                  [(c["estimator"], p["target_coverage"], p["tau"],
                    p["achieved_coverage"], p["risk"])
                   for c in section for p in c["points"]])
        report["artifacts"].append(path)
    return EXIT_OK


def _cmd_optimize(args, report) -> int:
    log = _load(args.input)
    report["inputs"].append(describe_log(args.input, log))
    estimator = _estimators(args)[0]
    ss = score_run(log, estimator)
    if args.c_err is not None or args.c_def is not None:
        if args.c_err is None or args.c_def is None:
            raise _CliError("--c-err and --c-def must be given together")
        cost_models = [(CostModel(args.c_err, args.c_def), args.c_err / max(args.c_def, 1e-300))]
    else:
        ratios = parse_float_list(args.cost_ratio) if args.cost_ratio else COST_RATIO_GRID_DEFAULT
        cost_models = [(CostModel(c_err=r, c_def=1.0), r) for r in ratios]
    section = []
    for cost, ratio in cost_models:
        opt = optimize_threshold(ss.values, ss.errors, cost)
        section.append({
            "estimator": estimator.value,
            "c_err": cost.c_err,
            "c_def": cost.c_def,
            "ratio": ratio,
            "tau_star": opt.tau_star,
            "j_star": opt.j_star,
            "curve": [
                {"tau": p.tau, "coverage": p.coverage, "risk": p.risk, "j": p.j}
                for p in opt.curve
            ],
        })
    report["sections"]["cost_optimization"] = section
    if args.format == "csv":
        path = _csv_path(args, "cost")
        write_csv(path, ("estimator", "c_err", "c_def", "tau", "coverage", "risk", "j"),
                  [(e["estimator"], e["c_err"], e["c_def"], p["tau"], p["coverage"],
                    p["risk"], p["j"]) for e in section for p in e["curve"]])
        report["artifacts"].append(path)
    return EXIT_OK


def _cmd_competence(args, report) -> int:
    logs = [_load(p) for p in args.input]
    for path, log in zip(args.input, logs):
        report["inputs"].append(describe_log(path, log))
    family = assemble_family(logs)
    estimator = _estimators(args)[0]
    rep = detect_transition(
        family, estimator, ci_level=args.ci_level, std_cap=args.std_cap,
        b=args.bootstrap, seed=args.seed, std_ddof=args.std_ddof, workers=args.workers)
    report["sections"]["competence"] = {
        "estimator": rep.estimator.value,
        "ci_level": rep.ci_level,
        "std_cap": rep.std_cap,
        "transition_fraction": rep.transition_fraction,
        "transition_accuracy": rep.transition_accuracy,
        "levels": [
            {
                "train_fraction": lv.train_fraction,
                "mean_accuracy": lv.mean_accuracy,
                "rho_std": lv.rho_std,
                "qualifies": lv.qualifies,
                "seeds": [
                    {
                        "model_seed": s.model_seed,
                        "rho": s.rho,
                        "degenerate": s.degenerate,
                        "ci": ci_dict(s.ci) if s.ci is not None else None,
                    }
                    for s in lv.per_seed_rho
                ],
            }
            for lv in rep.levels
        ],
    }
    if any(s.degenerate for lv in rep.levels for s in lv.per_seed_rho):
        report["warnings"].append("family contains degenerate (all-correct/all-wrong) runs")
        return EXIT_DEGENERATE
    return EXIT_OK


def _cmd_corrupt(args, report) -> int:
    log = _load(args.input)
    report["inputs"].append(describe_log(args.input, log))
    estimator = _estimators(args)[0]

    if args.shifted:
        if args.calib is None:
            raise _CliError("shift evaluation needs --calib")
        calib_log = _load(args.calib)
        report["inputs"].append(describe_log(args.calib, calib_log))
        shifted = {}
        for spec in args.shifted:
            try:
                kind, severity, path = spec.split(":", 2)
                shifted[(kind, int(severity))] = score_run(_load(path), estimator)
            except ValueError:
                raise _CliError(
                    f"--shifted must be KIND:SEVERITY:PATH, got {spec!r}") from None
        shift = build_shift_report(
            score_run(calib_log, estimator),
            score_run(log, estimator),
            shifted,
            target_coverage=args.target_coverage,
        )
        report["sections"]["shift"] = {
            "estimator": shift.estimator.value,
            "target_coverage": shift.target_coverage,
            "tau_star": shift.tau_star,
            "rows": [
                {
                    "kind": r.kind,
                    "severity": r.severity,
                    "tau_star": r.tau_star,
                    "accuracy": r.accuracy,
                    "mean_uncertainty": r.mean_uncertainty,
                    "executed_error_clean": r.executed_error_clean,
                    "executed_error_shifted": r.executed_error_shifted,
                    "rho_shifted": r.rho_shifted,
                    "coverage_shifted": r.coverage_shifted,
                }
                for r in shift.rows
            ],
        }
        if args.format == "csv":
            path = _csv_path(args, "shift")
            write_csv(path,
                      ("kind", "severity", "accuracy", "mean_uncertainty",
                       "executed_error_clean", "executed_error_shifted", "rho_shifted"),
                      [(r.kind, r.severity, r.accuracy, r.mean_uncertainty,
                        r.executed_error_clean, r.executed_error_shifted, r.rho_shifted)
                       for r in shift.rows])
            report["artifacts"].append(path)
        if any(r.rho_shifted is None or r.executed_error_shifted is None for r in shift.rows):
            report["warnings"].append("some shifted rows have undefined metrics")
            return EXIT_DEGENERATE
        return EXIT_OK

    if args.corruption is None or args.severity is None:
        raise _CliError("corrupt needs --corruption and --severity (or --shifted logs)")
    spec = CorruptionSpec(
        kind=CorruptionKind(args.corruption), severity=args.severity, seed=args.corruption_seed)
    corrupted = corrupt_log(log, spec)
    output = args.output_log or _csv_path(args, "corrupted").replace(".csv", ".ndjson")
    save_log(corrupted, output)
    report["artifacts"].append(output)
    report["sections"]["corruption"] = {
        "kind": spec.kind.value,
        "severity": spec.severity,
        "corruption_seed": spec.seed,
        "n_records": len(corrupted),
        "output": output,
    }
    return EXIT_OK


def _cmd_oodeval(args, report) -> int:
    log = _load(args.input)
    report["inputs"].append(describe_log(args.input, log))
    results = []
    for estimator in _estimators(args):
        id_scores, ood_scores = split_scores_by_ood(log, estimator)
        if ood_scores.size == 0:
            raise _CliError("input log contains no OOD-flagged records")
        results.append({
            "estimator": estimator.value,
            "auroc": ood_auroc(id_scores, ood_scores),
            "n_id": int(id_scores.size),
            "n_ood": int(ood_scores.size),
        })
    section = {"results": results}
    if args.rare_fraction is not None:
        hist = label_histogram([r.label for r in log.records if not r.ood_flag])
        rare = rare_class_split(hist, args.rare_fraction)
        section["rare_class_split"] = {
            "fraction": args.rare_fraction,
            "classes": sorted(rare),
            "histogram": {str(c): n for c, n in sorted(hist.items())},
        }
    report["sections"]["ood"] = section
    return EXIT_OK


def _cmd_simulate(args, report) -> int:
    eval_logs = [_load(p) for p in args.input]
    for path, log in zip(args.input, eval_logs):
        report["inputs"].append(describe_log(path, log))
    params = SimParams(
        n_primitives=args.n_primitives,
        cost_success=args.cost_success,
        cost_collision=args.cost_collision,
        cost_defer=args.cost_defer,
        p_collision_wrong=args.p_collision_wrong,
        p_collision_correct=args.p_collision_correct,
        fallback=FallbackPolicy(args.fallback),
        repeats=args.repeats,
    )
    if args.mode == MODE_DEPLOYMENT_TRANSFER:
        if not args.calib or len(args.calib) != len(eval_logs):
            raise _CliError("deployment transfer needs one --calib log per --input log")
        targets = _coverage_grid(args)
    else:
        targets = parse_float_list(args.target_autonomy)

    section = []
    for estimator in _estimators(args, fallback=(EstimatorId.SOFTMAX_ENTROPY,)):
        calib_sets = None
        if args.mode == MODE_DEPLOYMENT_TRANSFER:
            calib_sets = [score_run(_load(p), estimator) for p in args.calib]
        result = run_protocol(
            eval_logs, estimator, args.mode, calib=calib_sets, targets=targets,
            params=params, master_seed=args.seed, tolerance=args.tolerance)
        section.append({
            "estimator": estimator.value,
            "mode": result.mode,
            "master_seed": result.master_seed,
            "params": {
                "n_primitives": params.n_primitives,
                "cost_success": params.cost_success,
                "cost_collision": params.cost_collision,
                "cost_defer": params.cost_defer,
                "p_collision_wrong": params.p_collision_wrong,
                "p_collision_correct": params.p_collision_correct,
                "fallback": params.fallback.value,
                "repeats": params.repeats,
            },
            "points": [
                {
                    "target": pt.target,
                    "taus": list(pt.taus),
                    "realized_autonomy": pt.realized_autonomy,
                    "collision_rate": pt.collision_rate,
                    "mean_cost": pt.mean_cost,
                    "seed_std_cost": pt.seed_std_cost,
                    "seed_std_collision": pt.seed_std_collision,
                    "n_episodes": pt.n_episodes,
                }
                for pt in result.points
            ],
        })
    report["sections"]["simulation"] = section
    if args.format == "csv":
        path = _csv_path(args, "simulation")
        write_csv(path,
                  ("estimator", "mode", "target", "realized_autonomy", "collision_rate",
                   "mean_cost", "seed_std_cost", "seed_std_collision"),
                  [(e["estimator"], e["mode"], p["target"], p["realized_autonomy"],
                    p["collision_rate"], p["mean_cost"], p["seed_std_cost"],
                    p["seed_std_collision"])
                   for e in section for p in e["points"]])
        report["artifacts"].append(path)
    return EXIT_OK


def _cmd_synth(args, report) -> int:
    config = OracleConfig(
        k=args.k, d=args.d, t=args.t, n_train=args.n_train, n_test=args.n_test,
        separation=args.separation, dropout_rate=args.dropout_rate,
        n_passes=args.n_passes, n_members=args.n_members,
        temperature=args.temperature, seed=args.seed,
    )
    fractions = args.fraction or [0.7]
    model_seeds = args.model_seed or [0]
    splits = ("test", "calibration") if args.split == "both" else (args.split,)
    out_dir = Path(args.out_dir)
    outputs = []
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        for fraction in fractions:
            for model_seed in model_seeds:
                for split in splits:
                    if args.holdout:
                        log = generate_ood_run(
                            config, args.holdout, fraction, model_seed, split=split,
                            include_features=not args.no_features)
                    else:
                        log = generate_run(
                            config, fraction, model_seed, split=split,
                            include_features=not args.no_features)
                    name = f"run_f{fraction:g}_s{model_seed}_{split}.ndjson"
                    path = str(out_dir / name)
                    save_log(log, path)
                    ss = score_run(log, EstimatorId.SOFTMAX_ENTROPY)
                    outputs.append({
                        "path": path,
                        "split": split,
                        "train_fraction": fraction,
                        "model_seed": model_seed,
                        "n_records": len(log),
                        "accuracy": 1.0 - float(np.mean(ss.errors != 0)) if len(ss) else None,
                    })
    report["warnings"].extend(str(w.message) for w in caught)
    report["sections"]["synthesis"] = {
        "oracle": {
            "k": config.k, "d": config.d, "t": config.t,
            "n_train": config.n_train, "n_test": config.n_test,
            "separation": config.separation, "dropout_rate": config.dropout_rate,
            "n_passes": config.n_passes, "n_members": config.n_members,
            "temperature": config.temperature, "seed": config.seed,
            "holdout": sorted(args.holdout) if args.holdout else [],
        },
        "outputs": outputs,
    }
    report["artifacts"].extend(o["path"] for o in outputs)
    return EXIT_OK


_HANDLERS = {
    "score": _cmd_score,
    "evaluate": _cmd_evaluate,
    "compare": _cmd_compare,
    "sweep": _cmd_sweep,
    "optimize": _cmd_optimize,
    "competence": _cmd_competence,
    "corrupt": _cmd_corrupt,
    "oodeval": _cmd_oodeval,
    "simulate": _cmd_simulate,
    "synth": _cmd_synth,
}


def _apply_config_file(parser, commands, argv: list[str]) -> None:
    """Load TOML defaults for the invoked subcommand (flags still override)."""
    try:
        probe, _ = parser.parse_known_args(argv)
    except _CliError:
        return  # let the real parse report the usage problem
    config_path = getattr(probe, "config", None)
    command = getattr(probe, "command", None)
    if not config_path or command not in commands:
        return
    try:
        with open(config_path, "rb") as fh:
            data = tomllib.load(fh)
    except OSError as exc:
        raise _CliError(f"cannot read config file {config_path!r}: {exc}") from None
    except tomllib.TOMLDecodeError as exc:
        raise _CliError(f"config file {config_path!r} is not valid TOML: {exc}") from None
    sub = commands[command]
    known = {a.dest for a in sub._actions}
    unknown = set(data) - known
    if unknown:
        raise _CliError(
            f"config file {config_path!r} has unknown keys for {command!r}: {sorted(unknown)}")
    sub.set_defaults(**data)
    for action in sub._actions:
        if action.required and action.dest in data:
            action.required = False


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser, commands = build_parser()
    try:
        _apply_config_file(parser, commands, argv)
        args = parser.parse_args(argv)
        report = make_envelope(
            command=args.command,
            seed=args.seed,
            deterministic=args.deterministic,
            config={k: _echo_value(v) for k, v in vars(args).items() if k != "command"},
        )
        code = _HANDLERS[args.command](args, report)
        write_report(report, args.out)
        return code
    except _CliError as exc:
        print(f"uqgate: error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except UQGateError as exc:
        print(f"uqgate: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except OSError as exc:
        print(f"uqgate: io error: {exc}", file=sys.stderr)
        return EXIT_INPUT


def _echo_value(v):
    if isinstance(v, (list, tuple)):
        return [_echo_value(x) for x in v]
    if isinstance(v, (str, int, float, bool)) or v is None:
        return v
    return str(v)


def entrypoint() -> None:  # console-script shim
    sys.exit(main())
