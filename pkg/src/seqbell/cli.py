"""Command line interface: predict | simulate | optimize | verify.

All numeric output in structured mode is full-precision key = value lines;
two invocations with the same config and seed print byte-identical reports
regardless of the worker count.  Inequality violations are scientific
results and never affect the exit status; only configuration and I/O
errors do.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import replace
from pathlib import Path

from . import __version__
from .config import (
    ExperimentConfig,
    OptimizerSettings,
    apply_overrides,
    load_config,
)
from .engine import (
    ConfigError,
    EnsembleResult,
    Mode,
    Model,
    estimate_expectation,
    estimate_pair_prob,
    run_ensemble,
    run_two_series,
    two_series_estimate,
    write_run_log,
)
from .inequalities import (
    eq5_ratio,
    eq16_report,
    eq18_report,
    eval_eq4,
    eval_eq6,
    eval_eq7,
    eval_eq8,
    eval_eq10,
    lhs16,
    lhs18,
    lhs18_from_pair_probs,
    quantum_pair_prob,
)
from .lhv import Setting, TripleDistribution, lhv_pair_prob
from .qubit import Direction, Outcome, dot, state_from_bloch
from .reporting import InequalityReport, kv_line, report_lines, report_table_row
from .search import grid_oracle, maximize, objective, reference_configuration
from .verify import run_verification

PLUS, MINUS = Outcome.PLUS, Outcome.MINUS
A, B, C = Setting.A, Setting.B, Setting.C

# the probabilities entering EQ7 and EQ8, as (setting, sign, setting, sign)
EQ7_PROBS = ((A, PLUS, C, MINUS), (A, PLUS, B, MINUS), (B, PLUS, C, MINUS))
EQ8_PROBS = ((A, MINUS, C, PLUS), (A, MINUS, B, PLUS), (B, MINUS, C, PLUS))
ALL_PROBS = EQ7_PROBS + EQ8_PROBS


def _sign_token(sign: Outcome) -> str:
    return "+" if sign is PLUS else "-"


def _prob_key(x, sx, y, sy) -> str:
    return f"{x.name}{_sign_token(sx)}.{y.name}{_sign_token(sy)}"


def _direction_text(d: Direction) -> str:
    return f"({d.x:+.6f}, {d.y:+.6f}, {d.z:+.6f})"


# ---------------------------------------------------------------------------
# predict


def _closed_form_reports(config: ExperimentConfig) -> list[InequalityReport]:
    a, b, c = config.directions
    eq10 = InequalityReport(
        "EQ10", lhs=dot(a, b) + dot(b, c) - dot(a, c), rhs=1.0, sigma_threshold=config.sigma
    )
    return [
        eq16_report(a, b, c, config.sigma),
        eq18_report(a, b, c, config.sigma),
        eq10,
    ]


def _exact_pair_probs(config: ExperimentConfig, use_prep: bool) -> dict[tuple, float]:
    """The six inequality probabilities in exact closed form."""
    a, b, c = config.directions
    dirs = {A: a, B: b, C: c}
    if config.model is Model.QUANTUM:
        if use_prep:
            state = state_from_bloch(
                int(config.prep_sign) * dirs[config.prep_setting].as_array()
            )
        else:
            state = config.state
        return {
            (x, sx, y, sy): quantum_pair_prob(state, dirs[x], sx, dirs[y], sy)
            for (x, sx, y, sy) in ALL_PROBS
        }
    dist = TripleDistribution(config.weights)
    if use_prep:
        try:
            dist = dist.condition(config.prep_setting, config.prep_sign)
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
    return {
        (x, sx, y, sy): lhv_pair_prob(dist, x, sx, y, sy) for (x, sx, y, sy) in ALL_PROBS
    }


def _exact_triplet_report(inequality_id, probs, keys, sigma) -> InequalityReport:
    lhs_key, rhs1_key, rhs2_key = keys
    return InequalityReport(
        inequality_id,
        lhs=probs[lhs_key],
        rhs=probs[rhs1_key] + probs[rhs2_key],
        stderr_margin=0.0,
        sigma_threshold=sigma,
    )


def build_predict_report(config: ExperimentConfig, use_prep: bool) -> str:
    a, b, c = config.directions
    reports = _closed_form_reports(config)
    probs = _exact_pair_probs(config, use_prep)
    eq7 = _exact_triplet_report("EQ7", probs, EQ7_PROBS, config.sigma)
    eq8 = _exact_triplet_report("EQ8", probs, EQ8_PROBS, config.sigma)

    if config.report_format == "structured":
        lines = [
            "format = structured",
            "command = predict",
            kv_line("config.digest", config.digest()),
        ]
        lines += [f"config.{line}" for line in config.protocol_lines()]
        lines += [
            kv_line("predict.prep_state_used", use_prep),
            kv_line("dot.ab", dot(a, b)),
            kv_line("dot.bc", dot(b, c)),
            kv_line("dot.ac", dot(a, c)),
            kv_line("closed.lhs16", lhs16(a, b, c)),
            kv_line("closed.lhs18", lhs18(a, b, c)),
        ]
        for report in reports:
            lines += report_lines(report, f"inequality.{report.inequality_id}")
        for key, value in probs.items():
            lines.append(kv_line(f"prob.P.{_prob_key(*key)}", value))
        for report in (eq7, eq8):
            lines += report_lines(report, f"inequality.{report.inequality_id}")
        return "\n".join(lines) + "\n"

    lines = [
        "exact predictions (no sampling)",
        f"config digest: {config.digest()}",
        f"  a = {_direction_text(a)}",
        f"  b = {_direction_text(b)}",
        f"  c = {_direction_text(c)}",
        f"  a.b = {dot(a, b):+.9f}   b.c = {dot(b, c):+.9f}   a.c = {dot(a, c):+.9f}",
        "",
        f"lhs16 = {lhs16(a, b, c):.15f}",
        f"lhs18 = {lhs18(a, b, c):.15f}",
        "",
        "inequalities (closed form):",
    ]
    lines += ["  " + report_table_row(r) for r in reports]
    source = "preparation eigenstate" if use_prep else (
        "configured state" if config.model is Model.QUANTUM else "configured weights"
    )
    lines += ["", f"pair probabilities from the {source}:"]
    for key, value in probs.items():
        x, sx, y, sy = key
        lines.append(
            f"  P({x.name}{_sign_token(sx)},{y.name}{_sign_token(sy)}) = {value:.9f}"
        )
    lines += ["", "inequalities (probability form):"]
    lines += ["  " + report_table_row(r) for r in (eq7, eq8)]
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# simulate


def _single_table_sections(config: ExperimentConfig, result: EnsembleResult):
    table = result.table
    expectations = {
        (x, y): estimate_expectation(table, x, y) for (x, y) in ((A, B), (B, C), (A, C))
    }
    probs = {key: estimate_pair_prob(table, *key) for key in ALL_PROBS}
    reports = [
        eval_eq6(table, config.sigma),
        eval_eq7(*(probs[k] for k in EQ7_PROBS), config.sigma),
        eval_eq8(*(probs[k] for k in EQ8_PROBS), config.sigma),
        eval_eq10(
            expectations[(A, B)], expectations[(B, C)], expectations[(A, C)], config.sigma
        ),
    ]
    if result.hidden is not None:
        reports.append(eval_eq4(result.hidden, config.sigma))
    return expectations, probs, reports


def build_simulate_report(config: ExperimentConfig, result, result_minus=None) -> str:
    structured = config.report_format == "structured"
    if result_minus is not None:
        return _build_two_series_report(config, result, result_minus, structured)
    expectations, probs, reports = _single_table_sections(config, result)
    same, agree = result.table.same_setting_totals()
    lhs16_est = expectations[(A, B)].value + expectations[(B, C)].value - expectations[(A, C)].value
    lhs16_err = sum(e.stderr**2 for e in expectations.values()) ** 0.5
    lhs18_est, lhs18_err = lhs18_from_pair_probs(*(probs[k] for k in EQ7_PROBS))

    if structured:
        lines = [
            "format = structured",
            "command = simulate",
            kv_line("config.digest", config.digest()),
        ]
        lines += [f"config.{line}" for line in config.protocol_lines()]
        lines += [
            kv_line("result.total_runs", result.table.total_runs),
            kv_line("result.same_setting_runs", same),
            kv_line("result.same_setting_agreement", agree / same if same else float("nan")),
        ]
        for (x, y), est in expectations.items():
            prefix = f"estimate.E.{x.name}.{y.name}"
            lines += [
                kv_line(f"{prefix}.defined", est.defined),
                kv_line(f"{prefix}.value", est.value),
                kv_line(f"{prefix}.stderr", est.stderr),
                kv_line(f"{prefix}.n", est.n_conditioning),
                kv_line(f"{prefix}.low_stats", est.low_stats),
            ]
        for key, prob in probs.items():
            prefix = f"estimate.P.{_prob_key(*key)}"
            lines += [
                kv_line(f"{prefix}.defined", prob.defined),
                kv_line(f"{prefix}.value", prob.estimate),
                kv_line(f"{prefix}.stderr", prob.stderr),
                kv_line(f"{prefix}.n", prob.n_conditioning),
                kv_line(f"{prefix}.low_stats", prob.low_stats),
            ]
        lines += [
            kv_line("derived.lhs16.value", lhs16_est),
            kv_line("derived.lhs16.stderr", lhs16_err),
            kv_line("derived.lhs18.value", lhs18_est),
            kv_line("derived.lhs18.stderr", lhs18_err),
        ]
        for report in reports:
            lines += report_lines(report, f"inequality.{report.inequality_id}")
        if result.hidden is not None:
            for x in Setting:
                for y in Setting:
                    if x == y:
                        continue
                    for sx in (PLUS, MINUS):
                        for sy in (PLUS, MINUS):
                            ratio = eq5_ratio(result.hidden, result.table, x, sx, y, sy)
                            prefix = f"eq5.{_prob_key(x, sx, y, sy)}"
                            lines.append(kv_line(f"{prefix}.defined", ratio.defined))
                            if ratio.defined:
                                lines += [
                                    kv_line(f"{prefix}.ratio", ratio.ratio),
                                    kv_line(f"{prefix}.stderr", ratio.stderr),
                                    kv_line(f"{prefix}.marginal", ratio.marginal),
                                    kv_line(f"{prefix}.observed", ratio.observed),
                                ]
        return "\n".join(lines) + "\n"

    lines = [
        f"run ensemble report ({config.model.value}, {config.mode.value} mode)",
        f"config digest: {config.digest()}",
        f"runs: {result.table.total_runs}   seed: {config.seed}",
        f"same-setting runs: {same}   agreement: "
        + (f"{agree / same:.6f}" if same else "undefined"),
        "",
        "expectation estimates:",
    ]
    for (x, y), est in expectations.items():
        flag = "  [low statistics]" if est.low_stats else ""
        lines.append(
            f"  E({x.name},{y.name}) = {est.value:+.6f} +/- {est.stderr:.6f}  [n={est.n_conditioning}]{flag}"
        )
    lines += ["", "pair probability estimates:"]
    for key, prob in probs.items():
        x, sx, y, sy = key
        flag = "  [low statistics]" if prob.low_stats else ""
        lines.append(
            f"  P({x.name}{_sign_token(sx)},{y.name}{_sign_token(sy)}) = "
            f"{prob.estimate:.6f} +/- {prob.stderr:.6f}  [n={prob.n_conditioning}]{flag}"
        )
    lines += [
        "",
        f"derived lhs16 = {lhs16_est:+.6f} +/- {lhs16_err:.6f}",
        f"derived lhs18 = {lhs18_est:+.6f} +/- {lhs18_err:.6f}",
        "",
        "inequalities:",
    ]
    lines += ["  " + report_table_row(r) for r in reports]
    if result.hidden is not None:
        lines += ["", "sampling-factor ratios (expected 1):"]
        for (x, sx, y, sy) in ALL_PROBS:
            ratio = eq5_ratio(result.hidden, result.table, x, sx, y, sy)
            if ratio.defined:
                lines.append(
                    f"  9 N[{x.name}{_sign_token(sx)}{y.name}{_sign_token(sy)}] / N(...) = "
                    f"{ratio.ratio:.6f} +/- {ratio.stderr:.6f}"
                )
    return "\n".join(lines) + "\n"


def _build_two_series_report(config, plus, minus, structured) -> str:
    estimates = {
        (x, y): two_series_estimate(plus.table, minus.table, x, y)
        for (x, y) in ((A, B), (B, C), (A, C))
    }
    eq10 = eval_eq10(estimates[(A, B)], estimates[(B, C)], estimates[(A, C)], config.sigma)
    lhs16_est = eq10.lhs if eq10.defined else float("nan")
    if structured:
        lines = [
            "format = structured",
            "command = simulate",
            kv_line("config.digest", config.digest()),
        ]
        lines += [f"config.{line}" for line in config.protocol_lines()]
        lines += [
            kv_line("result.series_plus_runs", plus.table.total_runs),
            kv_line("result.series_minus_runs", minus.table.total_runs),
        ]
        for (x, y), est in estimates.items():
            prefix = f"estimate.E.{x.name}.{y.name}"
            lines += [
                kv_line(f"{prefix}.defined", est.defined),
                kv_line(f"{prefix}.value", est.value),
                kv_line(f"{prefix}.stderr", est.stderr),
                kv_line(f"{prefix}.n", est.n_conditioning),
                kv_line(f"{prefix}.low_stats", est.low_stats),
            ]
        lines += [kv_line("derived.lhs16.value", lhs16_est)]
        lines += report_lines(eq10, "inequality.EQ10")
        return "\n".join(lines) + "\n"
    lines = [
        f"two-series report ({config.model.value})",
        f"config digest: {config.digest()}",
        f"series runs: {plus.table.total_runs} (+1 series), {minus.table.total_runs} (-1 series)",
        "",
        "combined expectation estimates:",
    ]
    for (x, y), est in estimates.items():
        lines.append(
            f"  E({x.name},{y.name}) = {est.value:+.6f} +/- {est.stderr:.6f}  [n={est.n_conditioning}]"
        )
    lines += ["", "  " + report_table_row(eq10)]
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# optimize


def build_optimize_report(config: ExperimentConfig, settings: OptimizerSettings, use_reference_start: bool) -> str:
    kind = settings.objective.upper()
    search_config = settings.to_search_config()
    initial = reference_configuration(kind) if use_reference_start else None
    result = maximize(search_config, initial=initial)
    grid_value = grid_oracle(kind, settings.grid_resolution)
    reference_value = objective(kind, reference_configuration(kind))
    discrepancy = result.value < grid_value - 1e-3
    a, b, c = result.directions()

    if config.report_format == "structured":
        lines = [
            "format = structured",
            "command = optimize",
            kv_line("objective", kind),
            kv_line("search.n_starts", result.n_starts),
            kv_line("search.seed", result.seed),
            kv_line("search.step_tolerance", search_config.step_tolerance),
            kv_line("search.max_iterations", search_config.max_iterations),
            kv_line("search.reference_start", use_reference_start),
            kv_line("search.value", result.value),
            kv_line("search.gradient_norm", result.gradient_norm),
            kv_line("search.converged", result.converged),
        ]
        angles = result.configuration
        for name in ("theta_a", "phi_a", "theta_b", "phi_b", "theta_c", "phi_c"):
            lines.append(kv_line(f"search.angles.{name}", getattr(angles, name)))
        for name, d in (("a", a), ("b", b), ("c", c)):
            lines += [
                kv_line(f"search.directions.{name}.x", d.x),
                kv_line(f"search.directions.{name}.y", d.y),
                kv_line(f"search.directions.{name}.z", d.z),
            ]
        lines += [
            kv_line("grid.resolution", settings.grid_resolution),
            kv_line("grid.value", grid_value),
            kv_line("reference_point.value", reference_value),
            kv_line("discrepancy", discrepancy),
        ]
        return "\n".join(lines) + "\n"

    lines = [
        f"violation search for {kind}",
        f"multi-start ascent: {result.n_starts} starts, seed {result.seed}"
        + (", first start at the reference configuration" if use_reference_start else ""),
        f"  best value      = {result.value:.12f}",
        f"  gradient norm   = {result.gradient_norm:.3e}",
        f"  converged       = {result.converged}",
        f"  a = {_direction_text(a)}",
        f"  b = {_direction_text(b)}",
        f"  c = {_direction_text(c)}",
        f"grid oracle at {settings.grid_resolution:.6f} rad = {grid_value:.12f}",
        f"reference configuration value = {reference_value:.12f}",
    ]
    if discrepancy:
        lines.append("WARNING: multi-start result trails the grid oracle by more than 1e-3")
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# entry points


def _load(args) -> ExperimentConfig:
    config = load_config(args.config) if args.config else ExperimentConfig()
    overrides = {}
    if getattr(args, "seed", None) is not None:
        overrides["seed"] = args.seed
    if getattr(args, "runs", None) is not None:
        overrides["n_runs"] = args.runs
    if getattr(args, "format", None) is not None:
        overrides["report_format"] = args.format
    if getattr(args, "sigma", None) is not None:
        overrides["sigma"] = args.sigma
    if getattr(args, "out", None) is not None:
        overrides["out_dir"] = args.out
    if getattr(args, "log_runs", False):
        overrides["log_runs"] = True
    config = apply_overrides(config, **overrides)
    if config.sigma <= 0:
        raise ConfigError(f"report.sigma must be > 0, got {config.sigma!r}")
    config.to_protocol()
    return config


def cmd_predict(args) -> int:
    config = _load(args)
    sys.stdout.write(build_predict_report(config, use_prep=args.prep))
    return 0


def _write_outputs(config: ExperimentConfig, text: str, results: dict) -> None:
    out = Path(config.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "report.txt").write_text(text, encoding="utf-8")
    for suffix, result in results.items():
        (out / f"counts{suffix}.csv").write_text(result.table.to_csv_text(), encoding="utf-8")
        if config.log_runs:
            with open(out / f"runs{suffix}.csv", "w", encoding="utf-8", newline="") as fh:
                write_run_log(result, fh)


def cmd_simulate(args) -> int:
    config = _load(args)
    protocol = config.to_protocol()
    if config.mode is Mode.TWO_SERIES:
        plus, minus = run_two_series(protocol, workers=args.workers)
        text = build_simulate_report(config, plus, minus)
        results = {"_plus": plus, "_minus": minus}
    else:
        result = run_ensemble(protocol, workers=args.workers)
        text = build_simulate_report(config, result)
        results = {"": result}
    sys.stdout.write(text)
    if config.out_dir is not None:
        _write_outputs(config, text, results)
    return 0


def cmd_optimize(args) -> int:
    config = _load(args)
    settings = config.optimizer or OptimizerSettings()
    updates = {}
    if args.objective is not None:
        updates["objective"] = args.objective
    if args.starts is not None:
        updates["starts"] = args.starts
    if args.seed is not None:
        updates["seed"] = args.seed
    if updates:
        settings = replace(settings, **updates)
    text = build_optimize_report(config, settings, use_reference_start=args.reference_start)
    sys.stdout.write(text)
    if config.out_dir is not None:
        out = Path(config.out_dir)
        out.mkdir(parents=True, exist_ok=True)
        (out / "optimize.txt").write_text(text, encoding="utf-8")
    return 0


def cmd_verify(args) -> int:
    results = run_verification(seed=args.seed, literal_eq3=args.use_literal_eq3)
    all_ok = all(r.passed for r in results)
    if args.format == "structured":
        lines = ["format = structured", "command = verify", kv_line("seed", args.seed)]
        for r in results:
            lines.append(kv_line(f"check.{r.name}", "pass" if r.passed else "fail"))
            lines.append(kv_line(f"check.{r.name}.detail", r.detail))
        lines.append(kv_line("verify.ok", all_ok))
        sys.stdout.write("\n".join(lines) + "\n")
    else:
        for r in results:
            status = "PASS" if r.passed else "FAIL"
            sys.stdout.write(f"{status}  {r.name:<30} {r.detail}\n")
        sys.stdout.write(("all checks passed" if all_ok else "SOME CHECKS FAILED") + "\n")
    return 0 if all_ok else 1


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="seqbell",
        description="temporal Bell inequalities for consecutive measurements",
    )
    parser.add_argument("--version", action="version", version=f"seqbell {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, runs=False, workers=False):
        p.add_argument("--config", metavar="PATH", help="experiment config file")
        p.add_argument("--seed", type=int, metavar="N")
        p.add_argument("--format", choices=("tabular", "structured"))
        p.add_argument("--sigma", type=float, metavar="K", help="violation significance threshold")
        p.add_argument("--out", metavar="DIR", help="directory for report and CSV outputs")
        if runs:
            p.add_argument("--runs", type=int, metavar="N", help="number of runs")
        if workers:
            p.add_argument("--workers", type=int, default=1, metavar="N")

    p_predict = sub.add_parser("predict", help="exact closed-form predictions, no sampling")
    common(p_predict)
    p_predict.add_argument(
        "--prep",
        action="store_true",
        help="use the preparation eigenstate (or conditioned weights) for probabilities",
    )
    p_predict.set_defaults(func=cmd_predict)

    p_sim = sub.add_parser("simulate", help="generate a run ensemble and evaluate inequalities")
    common(p_sim, runs=True, workers=True)
    p_sim.add_argument("--log-runs", action="store_true", dest="log_runs")
    p_sim.set_defaults(func=cmd_simulate)

    p_opt = sub.add_parser("optimize", help="search directions maximizing a violation expression")
    common(p_opt)
    p_opt.add_argument("--objective", choices=("eq16", "eq18"))
    p_opt.add_argument("--starts", type=int, metavar="N")
    p_opt.add_argument(
        "--reference-start",
        action="store_true",
        help="seed the first local search at the reference violating configuration",
    )
    p_opt.set_defaults(func=cmd_optimize)

    p_verify = sub.add_parser("verify", help="run the built-in invariant suite")
    p_verify.add_argument("--seed", type=int, default=42)
    p_verify.add_argument("--format", choices=("tabular", "structured"), default="tabular")
    p_verify.add_argument(
        "--use-literal-eq3", action="store_true", help=argparse.SUPPRESS
    )
    p_verify.set_defaults(func=cmd_verify)
    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
