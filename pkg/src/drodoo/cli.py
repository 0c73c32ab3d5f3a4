"""Command-line interface: solve, analyze, and reproduce subcommands.

Exit codes: 0 success; 2 configuration or input parsing problem; 3 solver
failure (including penalty strengths outside an instance's feasible range);
4 output directory or file write failure.  All experiment outputs are
byte-identical for a fixed config and master seed, independent of ``--jobs``
(the flag only caps kernel threads).
"""

from __future__ import annotations

import argparse
import json
import os
import sys

from . import __version__, kernels
from .asymptotics import bias_direction, optimal_delta, rho_estimate
from .config import (
    FullConfig,
    RunManifest,
    Stopwatch,
    config_hash,
    load_config,
)
from .errors import ConfigError, SolverError, ValidationError
from .experiments import (
    TAG_INPUT_SAMPLE,
    TAG_POPULATION,
    averaged_frontiers,
    bootstrap_delta,
    out_of_sample_curve,
    run_sweep,
    stream,
    write_figure1,
    write_figure2a,
    write_figure2b,
    write_figure2c,
    write_figure2d,
)
from .models import EmpiricalSample, sample_demand_values
from .sensitivity import sensitivity_slope, worst_case_sensitivity
from .solver import solve_dro_doo, solve_saa

_FIGURES = ("fig1", "fig2a", "fig2b", "fig2c", "fig2d")
_ESTIMATOR_NOTE = (
    "bootstrap estimator: train on each with-replacement resample, "
    "evaluate on the original dataset's empirical measure"
)
_SEED_NOTE = (
    "counter-based streams keyed by [master_seed, tag<<48|index<<20|sub]; "
    "tags: 1 sweep datasets, 2 bootstrap datasets, 3 bootstrap indices, "
    "4 default input sample, 5 analysis population"
)


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="drodoo",
        description=(
            "Distributionally robust / optimistic optimization with smooth "
            "divergence penalties: single solves, first-order analysis, and "
            "reproducible order-quantity experiments."
        ),
    )
    parser.add_argument(
        "--version", action="version", version=f"%(prog)s {__version__}"
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_solve = sub.add_parser(
        "solve", help="solve one penalized problem and print the result as JSON"
    )
    p_solve.add_argument("config", help="path to an INI config file")
    p_solve.add_argument(
        "--delta",
        type=float,
        default=0.0,
        help="penalty strength (robust > 0, optimistic < 0; 0 = plain SAA)",
    )
    p_solve.add_argument(
        "--input-sample",
        help="CSV sample (columns y_1..y_l,weight); default: one dataset "
        "drawn from the configured demand",
    )

    p_an = sub.add_parser(
        "analyze",
        help="first-order bias, sensitivity, and optimal-penalty analysis",
    )
    p_an.add_argument("config", help="path to an INI config file")
    p_an.add_argument("--input-sample", help="CSV sample (default: drawn)")
    p_an.add_argument(
        "--population-size",
        type=int,
        default=100_000,
        help="Monte-Carlo population size for the out-of-sample slope",
    )

    p_rep = sub.add_parser(
        "reproduce", help="regenerate experiment CSVs and a run manifest"
    )
    p_rep.add_argument(
        "figure",
        choices=_FIGURES + ("all",),
        help="which artifact to produce ('all' shares one sweep)",
    )
    p_rep.add_argument("config", help="path to an INI config file")
    p_rep.add_argument(
        "--out-dir",
        default=None,
        help="output directory (default: $DRODOO_OUT_DIR or the working dir)",
    )
    p_rep.add_argument(
        "--jobs",
        type=int,
        default=os.cpu_count() or 1,
        help="cap kernel threads; results are identical for any value",
    )
    return parser


def _load_sample(config: FullConfig, path: str | None) -> EmpiricalSample:
    if path is not None:
        try:
            return EmpiricalSample.from_csv(path)
        except (OSError, ValidationError, ValueError) as exc:
            raise ConfigError(f"cannot load sample {path}: {exc}") from exc
    exp = config.experiment
    values = sample_demand_values(
        exp.demand, exp.n, stream(exp.master_seed, TAG_INPUT_SAMPLE, 0)
    )
    return EmpiricalSample.from_values(values)


def _cmd_solve(args) -> int:
    config = load_config(args.config)
    sample = _load_sample(config, args.input_sample)
    model = config.build_model()
    try:
        result = solve_dro_doo(model, sample, args.delta)
    except (SolverError, ValidationError) as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return 3
    print(result.to_json())
    return 0


def _cmd_analyze(args) -> int:
    config = load_config(args.config)
    sample = _load_sample(config, args.input_sample)
    model = config.build_model()
    exp = config.experiment
    warnings: list[str] = []
    out: dict = {"model_kind": config.model_kind, "warnings": warnings}
    try:
        x0 = solve_saa(model, sample).x
        report = worst_case_sensitivity(model, sample, x0)
        out["x0"] = [float(v) for v in x0]
        out["sensitivity"] = report.to_dict()
        if config.model_kind == "constant":
            d = model.decision_dim
            out.update(
                {
                    "pi": [0.0] * d,
                    "beta": [0.0] * d,
                    "sensitivity_slope": 0.0,
                    "rho": 0.0,
                    "delta_n": None,
                    "improvement": None,
                }
            )
            warnings.append("no first-order bias; formula inapplicable")
        elif model.gradient is None or model.hessian is None:
            out.update(
                {
                    "pi": None,
                    "beta": None,
                    "sensitivity_slope": None,
                    "rho": None,
                    "delta_n": None,
                    "improvement": None,
                }
            )
            warnings.append(
                "first-order expansion needs a smooth model with gradient "
                "and Hessian; only sensitivity is reported"
            )
        else:
            summary = bias_direction(model, sample, x0)
            out["pi"] = [float(v) for v in summary.pi]
            out["beta"] = [float(v) for v in summary.beta]
            out["sensitivity_slope"] = sensitivity_slope(summary)
            if args.input_sample is not None:
                warnings.append(
                    "rho and delta_n are computed against the configured "
                    "demand population, which may differ from the "
                    "distribution behind the supplied sample"
                )
            population = EmpiricalSample.from_values(
                sample_demand_values(
                    exp.demand,
                    max(int(args.population_size), 2),
                    stream(exp.master_seed, TAG_POPULATION, 0),
                )
            )
            rho = rho_estimate(model, population)
            out["rho"] = rho.to_dict()
            try:
                best = optimal_delta(summary, rho.rho, exp.n)
                out["delta_n"] = best.delta_n
                out["improvement"] = best.improvement
            except ValidationError as exc:
                out["delta_n"] = None
                out["improvement"] = None
                warnings.append(str(exc))
    except (SolverError, ValidationError) as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return 3
    print(json.dumps(out, indent=2))
    return 0


def _cmd_reproduce(args) -> int:
    config = load_config(args.config)
    if config.model_kind != "inventory":
        raise ConfigError("reproduce requires [model] kind = inventory")
    out_dir = args.out_dir or os.environ.get("DRODOO_OUT_DIR") or "."
    try:
        os.makedirs(out_dir, exist_ok=True)
        probe = os.path.join(out_dir, ".drodoo-write-probe")
        with open(probe, "w", encoding="ascii") as fh:
            fh.write("")
        os.unlink(probe)
    except OSError as exc:
        print(f"output directory not writable: {exc}", file=sys.stderr)
        return 4
    kernels.set_thread_cap(args.jobs)
    figures = _FIGURES if args.figure == "all" else (args.figure,)
    exp = config.experiment
    watch = Stopwatch()
    details: dict = {
        "backend": kernels.backend_name(),
        "jobs": args.jobs,
        "config": config.canonical,
        "seed_scheme": _SEED_NOTE,
    }
    try:
        outputs: list[str] = []
        sweep = None
        fronts = None
        if any(f in figures for f in ("fig1", "fig2a", "fig2b", "fig2c")):
            sweep = run_sweep(exp)
            details["sweep_exclusion_rate"] = sweep.exclusion_rate
        if any(f in figures for f in ("fig2a", "fig2b", "fig2c")):
            fronts = averaged_frontiers(exp, sweep)
        writers = {
            "fig1": ("figure1_curve.csv", lambda p: _write_fig1(p, exp, sweep, details)),
            "fig2a": ("figure2a_sensitivity.csv", lambda p: write_figure2a(p, fronts)),
            "fig2b": (
                "figure2b_insample_frontier.csv",
                lambda p: write_figure2b(p, fronts),
            ),
            "fig2c": (
                "figure2c_oos_frontier.csv",
                lambda p: write_figure2c(p, fronts),
            ),
            "fig2d": ("figure2d_bootstrap_hist.csv", lambda p: _write_fig2d(p, exp, details)),
        }
        for fig in figures:
            name, writer = writers[fig]
            path = os.path.join(out_dir, name)
            writer(path)
            outputs.append(path)
    except SolverError as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return 3
    except OSError as exc:
        print(f"cannot write outputs: {exc}", file=sys.stderr)
        return 4
    manifest = RunManifest(
        config_hash=config_hash(config),
        tool_version=__version__,
        master_seed=exp.master_seed,
        subcommand=f"reproduce {args.figure}",
        output_paths=outputs,
        wall_time_seconds=watch.elapsed(),
        details=details,
    )
    manifest_path = os.path.join(out_dir, f"manifest_{args.figure}.json")
    try:
        manifest.write(manifest_path)
    except OSError as exc:
        print(f"cannot write manifest: {exc}", file=sys.stderr)
        return 4
    for path in outputs + [manifest_path]:
        print(f"wrote {path}")
    return 0


def _write_fig1(path, exp, sweep, details) -> None:
    curve = out_of_sample_curve(exp, sweep)
    details["figure1"] = curve.summary_dict()
    write_figure1(path, curve)


def _write_fig2d(path, exp, details) -> None:
    summary = bootstrap_delta(exp)
    details["figure2d"] = summary.summary_dict()
    details["bootstrap_estimator"] = _ESTIMATOR_NOTE
    write_figure2d(path, summary)


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "solve":
            return _cmd_solve(args)
        if args.command == "analyze":
            return _cmd_analyze(args)
        return _cmd_reproduce(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except ValidationError as exc:
        print(f"invalid input: {exc}", file=sys.stderr)
        return 2


def console_main() -> None:  # pragma: no cover - thin wrapper
    sys.exit(main())


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
