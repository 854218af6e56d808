"""Command-line entry point.

One binary with subcommands; every run writes its outputs plus a manifest
echoing the configuration, the tool version and the calibration constants,
so any result can be regenerated from the manifest alone.

Exit codes: 0 success, 1 numerical failure, 2 configuration error.
"""

import argparse
import os
import sys

import numpy as np

from . import REFERENCE_MU, __version__
from .config import load_config, resolve_mu
from .dynamics import InitialConditionSpec, make_initial_condition, solve_equilibrium
from .dynamics import equilibrium_record
from .errors import ConfigError, InvalidArgumentError, KinexError
from .indicators import gini, lorenz, mobility_collective, mobility_delta, tax_revenue
from .io import (
    TrajectoryWriter,
    delta_to_csv,
    histogram_to_csv,
    indicator_bundle_csv,
    lorenz_to_csv,
    mobility_to_csv,
    write_json,
)
from .kaniadakis import gini_vs_kappa_table, kappa_table_to_csv
from .model import mean_income, params_hash
from .sweep import (
    calibrate_mu,
    correlation_report,
    level_line_to_csv,
    rates_from_delta_tau,
    sweep_grid,
    sweep_to_csv,
    trace_level_line,
)

__all__ = ["main"]

_DEFAULT_IC = InitialConditionSpec(kind="low-middle-weighted",
                                   target_mu=REFERENCE_MU)


def _manifest(out_dir, command, configs, outputs, threads, extra_constants=None,
              warnings=()):
    constants = {"reference_mu": REFERENCE_MU}
    if extra_constants:
        constants.update(extra_constants)
    doc = {
        "tool_version": __version__,
        "command": command,
        "config": configs[0] if len(configs) == 1 else list(configs),
        "threads": threads,
        "calibration_constants": constants,
        "outputs": sorted(outputs),
    }
    if warnings:
        doc["warnings"] = list(warnings)
    write_json(os.path.join(out_dir, "manifest.json"), doc)


def _out_dir(args, cfg):
    path = args.out_dir or cfg.out_dir
    os.makedirs(path, exist_ok=True)
    return path


def cmd_simulate(args):
    cfg = load_config(args.config)
    out = _out_dir(args, cfg)
    params = cfg.params
    spec = cfg.initial or _DEFAULT_IC
    X0 = make_initial_condition(spec, params.grid)
    mu = mean_income(params.grid, X0)

    writer = None
    outputs = []
    try:
        if cfg.trajectory_stride > 0:
            writer = TrajectoryWriter(os.path.join(out, "trajectory.csv"), params.n)
            outputs.append("trajectory.csv")
        eq = solve_equilibrium(params, mu, cfg.settings, ic_spec=spec,
                               trajectory_writer=writer,
                               trajectory_stride=cfg.trajectory_stride)
    finally:
        if writer is not None:
            writer.close()

    G = gini(params.grid, eq.X_eq)
    report = mobility_collective(params, eq.X_eq)
    TR = tax_revenue(params, eq.X_eq)

    write_json(os.path.join(out, "equilibrium.json"), equilibrium_record(params, eq))
    lorenz_to_csv(os.path.join(out, "lorenz.csv"), lorenz(params.grid, eq.X_eq))
    mobility_to_csv(os.path.join(out, "mobility.csv"), report)
    histogram_to_csv(os.path.join(out, "individual_mobility.csv"),
                     report.classes, report.P_individual, "P_individual")
    histogram_to_csv(os.path.join(out, "class_mobility.csv"),
                     report.classes, report.P_class, "P_class")
    indicator_bundle_csv(os.path.join(out, "indicators.csv"),
                         params, eq.mu, G, report.M, TR, report)
    write_json(os.path.join(out, "summary.json"), {
        "params_hash": params_hash(params),
        "mu": eq.mu, "G": G, "M": report.M, "TR": TR,
        "P_exch_collective": report.P_exch_collective,
        "P_welf_collective": report.P_welf_collective,
        "residual": eq.residual,
        "elapsed_time": eq.elapsed_time,
    })
    outputs += ["equilibrium.json", "lorenz.csv", "mobility.csv",
                "individual_mobility.csv", "class_mobility.csv",
                "indicators.csv", "summary.json"]
    _manifest(out, "simulate", [cfg.raw], outputs, args.threads)
    print(f"G={G:.6f} M={report.M:.6e} TR={TR:.6e} mu={eq.mu:.6f} -> {out}")
    return 0


def cmd_compare(args):
    cfg_a = load_config(args.config_a)
    cfg_b = load_config(args.config_b)
    if (cfg_a.params.n != cfg_b.params.n
            or not np.array_equal(cfg_a.params.grid.r, cfg_b.params.grid.r)):
        raise ConfigError("compare requires both configs to share one income grid")
    out = args.out_dir or cfg_a.out_dir
    os.makedirs(out, exist_ok=True)

    def solve(cfg):
        spec = cfg.initial or _DEFAULT_IC
        X0 = make_initial_condition(spec, cfg.params.grid)
        return solve_equilibrium(cfg.params, mean_income(cfg.params.grid, X0),
                                 cfg.settings, ic_spec=spec)

    eq_a = solve(cfg_a)
    eq_b = solve(cfg_b)
    delta = mobility_delta(cfg_a.params, eq_a, cfg_b.params, eq_b)

    delta_to_csv(os.path.join(out, "delta_mobility.csv"), delta)
    histogram_to_csv(os.path.join(out, "delta_individual.csv"),
                     delta.classes, delta.dP_individual, "dP_individual")
    histogram_to_csv(os.path.join(out, "delta_class.csv"),
                     delta.classes, delta.dP_class, "dP_class")
    write_json(os.path.join(out, "summary.json"), {
        "gini_a": delta.gini_a, "gini_b": delta.gini_b,
        "delta_gini": delta.delta_gini,
        "M_a": delta.M_a, "M_b": delta.M_b, "delta_M": delta.delta_M,
        "mu_a": eq_a.mu, "mu_b": eq_b.mu,
    })
    outputs = ["delta_mobility.csv", "delta_individual.csv", "delta_class.csv",
               "summary.json"]
    _manifest(out, "compare", [cfg_a.raw, cfg_b.raw], outputs, args.threads)
    print(f"delta_G={delta.delta_gini:+.6f} delta_M={delta.delta_M:+.6e} -> {out}")
    return 0


def cmd_sweep(args):
    cfg = load_config(args.config)
    if not cfg.sweep:
        raise ConfigError("sweep: config must provide a [sweep] section")
    out = _out_dir(args, cfg)
    block = cfg.sweep
    cells = sweep_grid(block["delta_tau"], block["gamma"], block["mu"],
                       base=cfg.params, settings=cfg.settings,
                       threads=args.threads)
    warnings = []
    for c in cells:
        if not c.converged:
            warnings.append(
                f"cell delta_tau={c.delta_tau} gamma={c.gamma} did not converge"
            )
            print(f"warning: {warnings[-1]}", file=sys.stderr)
    sweep_to_csv(cells, os.path.join(out, "sweep.csv"))
    outputs = ["sweep.csv"]
    if sum(c.converged for c in cells) >= 3:
        rep = correlation_report(cells)
        write_json(os.path.join(out, "correlation.json"), {
            "n_cells": rep.n_cells,
            "pearson_GM": rep.pearson_GM,
            "degenerate": rep.degenerate,
            "all_increments_opposite": rep.all_opposite,
        })
        outputs.append("correlation.json")
    _manifest(out, "sweep", [cfg.raw], outputs, args.threads, warnings=warnings)
    print(f"{len(cells)} cells -> {out}")
    return 0


def _format_level_tables(lines):
    rows = ["Level lines of the Gini index", ""]
    for line in lines:
        rows.append(f"target G = {line.target_G}  (tolerance {line.tolerance})")
        rows.append(f"  {'rates':<16}{'delta_tau':>10}{'gamma':>10}{'M':>14}")
        for pt in line.points:
            lo, hi = rates_from_delta_tau(pt.delta_tau)
            rates = f"{100 * lo:.4g}% - {100 * hi:.4g}%"
            rows.append(
                f"  {rates:<16}{pt.delta_tau:>10.4g}"
                f"{pt.gamma:>10.4f}{pt.M:>14.6e}"
            )
        for msg in line.warnings:
            rows.append(f"  skipped: {msg}")
        rows.append("")
    return "\n".join(rows)


def cmd_levelline(args):
    cfg = load_config(args.config)
    if not cfg.levelline:
        raise ConfigError("levelline: config must provide a [levelline] section")
    out = _out_dir(args, cfg)
    block = cfg.levelline
    lines = []
    outputs = []
    warnings = []
    for target in block["targets"]:
        line = trace_level_line(target, block["delta_tau"], block["gamma_bounds"],
                                block["mu"], tol=block["tol"], base=cfg.params,
                                settings=cfg.settings, threads=args.threads)
        lines.append(line)
        name = f"levelline_{str(target).replace('.', 'p')}.csv"
        level_line_to_csv(line, os.path.join(out, name))
        outputs.append(name)
        for msg in line.warnings:
            warnings.append(f"target {target}: {msg}")
            print(f"warning: target {target}: {msg}", file=sys.stderr)
    table_path = os.path.join(out, "level_tables.txt")
    with open(table_path, "w") as fh:
        fh.write(_format_level_tables(lines) + "\n")
    outputs.append("level_tables.txt")
    _manifest(out, "levelline", [cfg.raw], outputs, args.threads,
              warnings=warnings)
    print(f"{len(lines)} level lines -> {out}")
    return 0


def cmd_calibrate(args):
    cfg = load_config(args.config)
    if not cfg.calibrate:
        raise ConfigError("calibrate: config must provide a [calibrate] section")
    out = _out_dir(args, cfg)
    block = cfg.calibrate
    mu_star = calibrate_mu(block["reference"], block["mu_interval"],
                           base=cfg.params, settings=cfg.settings)
    _manifest(out, "calibrate", [cfg.raw], [], args.threads,
              extra_constants={
                  "mu_star": mu_star,
                  "target_G": block["reference"]["target_G"],
              })
    print(f"mu_star={mu_star!r} -> {out}")
    return 0


def cmd_kappa(args):
    cfg = load_config(args.config)
    if not cfg.kappa:
        raise ConfigError("kappa: config must provide a [kappa] section")
    out = _out_dir(args, cfg)
    block = cfg.kappa
    rows = gini_vs_kappa_table(block["alpha"], block["kappa"],
                               quadrature=block.get("quadrature"),
                               threads=args.threads)
    warnings = []
    for row in rows:
        if row.flag:
            warnings.append(f"alpha={row.alpha} kappa={row.kappa}: {row.flag}")
            print(f"warning: {warnings[-1]}", file=sys.stderr)
    kappa_table_to_csv(rows, os.path.join(out, "kappa.csv"))
    _manifest(out, "kappa", [cfg.raw], ["kappa.csv"], args.threads,
              warnings=warnings)
    print(f"{len(rows)} rows -> {out}")
    return 0


_COMMANDS = {
    "simulate": cmd_simulate,
    "compare": cmd_compare,
    "sweep": cmd_sweep,
    "levelline": cmd_levelline,
    "calibrate": cmd_calibrate,
    "kappa": cmd_kappa,
}


def _add_common(sub):
    sub.add_argument("--out-dir", default=None,
                     help="output directory (overrides the config)")
    sub.add_argument("--threads", type=int, default=0,
                     help="worker threads, 0 = auto")
    sub.add_argument("--seed", default=None,
                     help="reserved; the model is deterministic")


def build_parser():
    parser = argparse.ArgumentParser(
        prog="kinex",
        description="Kinetic exchange economy: equilibria, inequality and "
                    "mobility indicators, parameter sweeps.",
    )
    parser.add_argument("--version", action="version", version=__version__)
    subs = parser.add_subparsers(dest="command", required=True)
    for name in _COMMANDS:
        sub = subs.add_parser(name)
        if name == "compare":
            sub.add_argument("--config-a", required=True)
            sub.add_argument("--config-b", required=True)
        else:
            sub.add_argument("--config", required=True)
        _add_common(sub)
    return parser


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    if args.seed is not None:
        print("error: --seed is reserved; the model is deterministic and "
              "accepts no random seed", file=sys.stderr)
        return 2
    if args.threads < 0:
        print("error: --threads must be >= 0", file=sys.stderr)
        return 2
    try:
        return _COMMANDS[args.command](args)
    except ConfigError as err:
        print(f"config error: {err}", file=sys.stderr)
        return 2
    except InvalidArgumentError as err:
        print(f"config error: {err}", file=sys.stderr)
        return 2
    except KinexError as err:
        print(f"error: {type(err).__name__}: {err}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
