"""Command-line benchmark harness.

Config files are flat key = value text (``#`` comments).  Recognized keys
mirror RunConfig: benchmark, k, mode, alpha, beta, gamma, marking_strategy,
marking_theta, refine_strategy, c_res, under_resolved_start, budget_dof,
budget_levels, with_residual_estimator, with_true_error, csv_path, mesh_path,
workers.
"""

import argparse
import sys

from .adaptivity import MODES, MarkingConfig, RunConfig, adapt_loop
from .benchmarks import BENCHMARKS, initial_discretization, make_benchmark

_BOOL_KEYS = {"under_resolved_start", "with_residual_estimator", "with_true_error"}
_INT_KEYS = {"budget_dof", "budget_levels", "workers", "initial_degree"}
_FLOAT_KEYS = {"k", "alpha", "beta", "gamma", "marking_theta", "c_res", "theta_deg"}
_STR_KEYS = {"benchmark", "mode", "marking_strategy", "refine_strategy", "csv_path", "mesh_path"}
_ALL_KEYS = _BOOL_KEYS | _INT_KEYS | _FLOAT_KEYS | _STR_KEYS


class ConfigError(ValueError):
    pass


def parse_config(text: str, source: str = "<config>") -> dict:
    values = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{lineno}: expected 'key = value'")
        key, _, val = line.partition("=")
        key = key.strip()
        val = val.strip()
        if key not in _ALL_KEYS:
            raise ConfigError(f"{source}:{lineno}: unknown key {key!r}")
        try:
            if key in _BOOL_KEYS:
                if val.lower() not in ("true", "false", "1", "0", "yes", "no"):
                    raise ValueError("expected a boolean")
                values[key] = val.lower() in ("true", "1", "yes")
            elif key in _INT_KEYS:
                values[key] = int(val)
            elif key in _FLOAT_KEYS:
                values[key] = float(val)
            else:
                values[key] = val
        except ValueError as exc:
            raise ConfigError(f"{source}:{lineno}: bad value for {key}: {exc}") from exc
    return values


def build_run_config(values: dict) -> RunConfig:
    marking = MarkingConfig(
        strategy=values.pop("marking_strategy", "maximum"),
        theta=values.pop("marking_theta", None) or (0.25 if values.get("_ff") else 0.75),
    )
    if marking.strategy == "fixed_fraction" and marking.theta == 0.75:
        marking = MarkingConfig("fixed_fraction", 0.25)
    values.pop("_ff", None)
    return RunConfig(marking=marking, **values)


def _config_from_args(args) -> tuple:
    values = {}
    if args.config:
        with open(args.config) as fh:
            values = parse_config(fh.read(), args.config)
    if args.mode:
        values["mode"] = args.mode
    if args.k is not None:
        values["k"] = args.k
    if args.budget_dof is not None:
        values["budget_dof"] = args.budget_dof
    if args.out is not None:
        values["csv_path"] = args.out
    benchmark = values.pop("benchmark", "square_hankel")
    if benchmark not in BENCHMARKS:
        raise ConfigError(f"unknown benchmark {benchmark!r}")
    bench_kwargs = {}
    if "theta_deg" in values:
        theta = values.pop("theta_deg")
        if benchmark == "reflect_refract":
            bench_kwargs["theta_deg"] = theta
        else:
            raise ConfigError("theta_deg only applies to reflect_refract")
    config = build_run_config(values)
    config.benchmark = benchmark
    return benchmark, config, bench_kwargs


def cmd_run(args) -> int:
    benchmark, config, bench_kwargs = _config_from_args(args)
    case = make_benchmark(benchmark, k=config.k, **bench_kwargs)
    records = adapt_loop(case, config)
    last = records[-1]
    print(f"{benchmark} k={config.k} mode={config.mode}: {len(records)} levels")
    print(
        f"final: n_dof={last.n_dof} eta={last.report.eta_total:.6e}"
        + (
            f" err_grad={last.error.err_grad:.6e} eff={last.report.eta_total / last.error.err_grad:.3f}"
            if last.error is not None and last.error.err_grad > 0
            else ""
        )
    )
    if config.csv_path:
        print(f"csv: {config.csv_path}")
    if config.mesh_path:
        print(f"mesh snapshot: {config.mesh_path}")
    return 0


def cmd_check(args) -> int:
    benchmark, config, bench_kwargs = _config_from_args(args)
    case = make_benchmark(benchmark, k=config.k, **bench_kwargs)
    mesh, degrees = initial_discretization(
        case,
        c_res=config.c_res,
        under_resolved=config.under_resolved_start,
        degree=config.initial_degree,
    )
    from .field import total_dof

    print(f"config ok: benchmark={benchmark} k={config.k} mode={config.mode}")
    print(
        f"initial mesh: {mesh.n_tris} elements, p={int(degrees[0])}, "
        f"{total_dof(degrees)} dof; budget {config.budget_dof} dof / "
        f"{config.budget_levels} levels"
    )
    return 0


def cmd_list(args) -> int:
    for name in sorted(BENCHMARKS):
        case = BENCHMARKS[name]()
        kind = "exact solution" if case.exact is not None else "estimator only"
        print(f"{name:18s} k={case.k:5.1f} C_res={case.c_res:4.2f} ({kind})")
    return 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="helmdg",
        description="hp-adaptive DG Helmholtz benchmark harness",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="execute an adaptive benchmark run")
    run.add_argument("config", nargs="?", help="flat key=value config file")
    check = sub.add_parser("check", help="validate a config without solving")
    check.add_argument("config", nargs="?", help="flat key=value config file")
    for p in (run, check):
        p.add_argument("--mode", choices=MODES)
        p.add_argument("--k", type=float)
        p.add_argument("--budget-dof", type=int, dest="budget_dof")
        p.add_argument("--out", help="CSV output path")
    sub.add_parser("list-benchmarks", help="list available benchmarks")

    args = parser.parse_args(argv)
    try:
        if args.command == "run":
            return cmd_run(args)
        if args.command == "check":
            return cmd_check(args)
        return cmd_list(args)
    except (ConfigError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
