"""Command line entry point: ``run``, ``plan`` and ``simulate``.

Exit codes: 0 success, 2 configuration error, 3 runtime (trajectory) failure.
"""
from __future__ import annotations

import argparse
import io
import json
import math
import sys
from typing import Callable, Optional

from .analysis import ConvergenceTable, RatePrediction, optimal_params, predict_rate
from .config import ExperimentConfig, build_model, load_config
from .errors import ConfigError, InvalidParameter, JumpEulerError, MissingReference
from .estimator import mc_error_coupled, mc_error_vs_reference, sample_terminals
from .model import power_tail_delta
from .models import PRESETS
from .scheme import SchemeParams

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME = 0, 2, 3


def fmt(v) -> str:
    """Locale-independent, round-trip exact number formatting."""
    if v is None or (isinstance(v, float) and math.isnan(v)):
        return "undefined"
    if isinstance(v, int):
        return str(v)
    return "%.17g" % v


def _alpha_of(cfg: ExperimentConfig) -> Optional[float]:
    if isinstance(cfg.model, str):
        spec_cls, _ = PRESETS[cfg.model]
        return float(cfg.model_overrides.get("alpha", spec_cls.alpha))
    return None


def run_experiment(cfg: ExperimentConfig, workers=None,
                   progress: Optional[Callable[[str], None]] = None) -> ConvergenceTable:
    """Error estimates along the schedule, in schedule order, plus the fit."""
    model = cfg.build_model()
    if cfg.estimator == "exact-reference" and model.exact_reference is None:
        raise ConfigError(f"estimator: model {model.name!r} has no exact reference")
    workers = cfg.workers if workers is None else workers
    rows = []
    for M in cfg.schedule:
        n = cfg.n_for(M)
        if cfg.estimator == "coupled":
            est = mc_error_coupled(model, M, n, cfg.multipliers, cfg.K, cfg.p, cfg.seed,
                                   workers=workers)
        else:
            est = mc_error_vs_reference(model, M, n, cfg.K, cfg.p, cfg.seed, cfg.ref_mult,
                                        workers=workers)
        rows.append((M, n, est.cost, est.error, est.std_error))
        if progress:
            progress(f"M={M} n={n} error={est.error:.6g} +- {est.std_error:.3g}")
    alpha = _alpha_of(cfg)
    predicted = predict_rate(model.class_params, alpha).slope if alpha is not None else None
    return ConvergenceTable.from_rows(rows, predicted)


def table_csv(table: ConvergenceTable) -> str:
    out = io.StringIO()
    out.write("M,n,cost,error,std_error\n")
    for M, n, cost, err, se in table.rows:
        out.write(f"{M},{n},{fmt(cost)},{fmt(err)},{fmt(se)}\n")
    out.write(f"# slope,{fmt(table.slope)}\n")
    out.write(f"# intercept,{fmt(table.intercept)}\n")
    out.write(f"# predicted_slope,{fmt(table.predicted_slope)}\n")
    return out.getvalue()


def _emit(text: str, path: Optional[str]):
    if path is None or path == "-":
        sys.stdout.write(text)
    else:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)


def _cmd_run(args):
    cfg = load_config(args.config)
    if args.seed is not None:
        cfg.seed = args.seed
    log = None if args.quiet else (lambda msg: print(msg, file=sys.stderr, flush=True))
    table = run_experiment(cfg, workers=args.workers, progress=log)
    _emit(table_csv(table), args.out)
    return EXIT_OK


def _delta_from_table(path):
    try:
        with open(path, encoding="utf-8") as fh:
            values = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"delta table {path!r}: {exc}") from None
    if not (isinstance(values, list) and values and all(isinstance(v, (int, float)) for v in values)):
        raise ConfigError("delta table: expected a JSON list of numbers delta(1), delta(2), ...")

    def delta(M):
        if M > len(values):
            raise InvalidParameter("x", f"delta table too short: target not reached by M={len(values)}")
        return float(values[M - 1])

    return delta


def plan_report(epsilon, gamma, KC, alpha=None, delta_fn=None) -> str:
    if delta_fn is None:
        if alpha is None:
            raise ConfigError("plan: give --alpha or --delta-table")
        if not alpha >= 1:
            raise ConfigError("plan: --alpha must be >= 1")

        def delta_fn(M):
            return power_tail_delta(alpha, M)

    M, n = optimal_params(epsilon, gamma, delta_fn, KC)
    lines = ["M,n,cost", f"{M},{n},{M * n}"]
    exponent = RatePrediction(gamma, alpha, None).cost_exponent if alpha is not None else None
    lines.append(f"# cost_exponent,{fmt(exponent)}")
    return "\n".join(lines) + "\n"


def _cmd_plan(args):
    delta_fn = _delta_from_table(args.delta_table) if args.delta_table else None
    _emit(plan_report(args.epsilon, args.gamma, args.KC, args.alpha, delta_fn), args.out)
    return EXIT_OK


def _model_arg(value):
    if value in PRESETS:
        return value
    try:
        with open(value, encoding="utf-8") as fh:
            spec = json.load(fh)
    except OSError:
        raise ConfigError(f"--model: {value!r} is neither a preset {sorted(PRESETS)} nor a readable file")
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{value}: line {exc.lineno} column {exc.colno}: {exc.msg}") from None
    if not isinstance(spec, dict):
        raise ConfigError(f"{value}: expected a JSON object")
    return spec


def simulate_csv(model, M, n, seed, count, workers=None) -> str:
    values, jumps = sample_terminals(model, SchemeParams(M, n), count, seed, workers=workers)
    out = io.StringIO()
    cols = ["value"] if model.dim == 1 else [f"value_{i + 1}" for i in range(model.dim)]
    out.write(",".join(["index"] + cols + ["jumps"]) + "\n")
    for i in range(count):
        out.write(",".join([str(i)] + [fmt(float(v)) for v in values[i]] + [str(int(jumps[i]))]) + "\n")
    return out.getvalue()


def _cmd_simulate(args):
    model = build_model(_model_arg(args.model))
    _emit(simulate_csv(model, args.M, args.n, args.seed, args.count, args.workers), args.out)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="jumpeuler", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    workers_help = "integer, 'auto' or 'max' (default: $JUMPEULER_WORKERS or 1)"

    run = sub.add_parser("run", help="estimate errors along a schedule and fit the slope")
    run.add_argument("config", help="JSON experiment config")
    run.add_argument("--seed", type=int)
    run.add_argument("--workers", help=workers_help)
    run.add_argument("--out", help="CSV output path (default stdout)")
    run.add_argument("-q", "--quiet", action="store_true", help="no progress on stderr")
    run.set_defaults(func=_cmd_run)

    plan = sub.add_parser("plan", help="cheapest (M, n) for a target error")
    plan.add_argument("--epsilon", type=float, required=True)
    plan.add_argument("--gamma", type=float, default=0.5)
    plan.add_argument("--KC", type=float, default=1.0)
    plan.add_argument("--alpha", type=float, help="power-diffusion exponent for delta")
    plan.add_argument("--delta-table", help="JSON list delta(1), delta(2), ...")
    plan.add_argument("--out")
    plan.set_defaults(func=_cmd_plan)

    sim = sub.add_parser("simulate", help="terminal values of independent trajectories")
    sim.add_argument("--model", required=True, help="preset name or inline model JSON file")
    sim.add_argument("--M", type=int, required=True)
    sim.add_argument("--n", type=int, required=True)
    sim.add_argument("--seed", type=int, default=0)
    sim.add_argument("--count", type=int, default=1)
    sim.add_argument("--workers", help=workers_help)
    sim.add_argument("--out")
    sim.set_defaults(func=_cmd_simulate)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, InvalidParameter, MissingReference) as exc:
        print(f"jumpeuler: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except JumpEulerError as exc:
        print(f"jumpeuler: runtime failure: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
