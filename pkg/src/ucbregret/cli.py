"""Command-line front end: deterministic experiment orchestration and CSV/JSON
emission, with one rendered figure per command alongside the delimited output.

Subcommands
-----------
simulate    Monte Carlo regret histogram -> histogram.csv
rate        saddle-point rate curve      -> rate_curve.csv
trajectory  dominant trajectory vs conditioned simulation
            -> trajectory_theory.csv + trajectory_sim.csv
toy         two-arm one-step branches    -> branches.csv (+ r_c in metadata)
sweep-c     most probable regret vs c    -> rmpv_vs_c.csv

Configuration is a single JSON file (``--config``) merged over built-in
defaults, with command-line flags winning over both.  Unknown keys anywhere in
the file are rejected.  Every run writes metadata.json holding the exact
resolved configuration; pointing ``--config`` at a previous metadata.json
reproduces the CSVs byte for byte.

Exit codes: 0 success, 2 configuration/validation error, 3 I/O error,
4 solver non-convergence on more than half of the requested grid.
"""

from __future__ import annotations

import argparse
import copy
import json
import sys
import time
from pathlib import Path

import numpy as np

from . import instanton, mcsim, toy as toymod
from .core import BanditSpec

__all__ = ["main", "ConfigError"]


class ConfigError(Exception):
    pass


DEFAULTS = {
    "spec": {
        "K": 3,
        "T": 20,
        "mu": [1.0, 2.0, 3.0],
        "sigma_tilde": [1.0, 1.0, 1.0],
        "gamma": 0.36,
        "beta": 10.0,
        "c": 0.4,
    },
    "simulate": {
        "trials": 1_000_000,
        "master_seed": 1,
        "bin_width": 0.5,
        "windows": [],
    },
    "rate": {
        "r_min": -15.0,
        "r_max": 45.0,
        "r_step": 1.0,
        "multistarts": 8,
        "variant": "simplified",
        "multistart_seed": 0,
    },
    "trajectory": {
        "r_window": [6.0, 6.5],
        "trials": 1_000_000,
        "master_seed": 1,
        "multistarts": 8,
        "variant": "simplified",
    },
    "toy": {
        "mu": [1.0, 2.0],
        "gamma": 0.16,
        "beta": 10.0,
        "r_values": [1.0, 3.0],
        "bracket": [1.0, 3.0],
    },
    "sweep": {
        "c_values": [round(0.05 * i, 2) for i in range(21)],
    },
}


def _merge(base: dict, override: dict, path: str = "") -> dict:
    out = copy.deepcopy(base)
    for key, val in override.items():
        here = f"{path}.{key}" if path else key
        if key not in base:
            raise ConfigError(f"unknown configuration key: {here}")
        if isinstance(base[key], dict):
            if not isinstance(val, dict):
                raise ConfigError(f"{here} must be an object")
            out[key] = _merge(base[key], val, here)
        else:
            out[key] = val
    return out


def load_config(path: str | None) -> dict:
    if path is None:
        return copy.deepcopy(DEFAULTS)
    with open(path) as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"invalid JSON in {path}: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError("configuration root must be an object")
    if "resolved_config" in data:  # accept a previously written metadata.json
        data = data["resolved_config"]
    return _merge(DEFAULTS, data)


def _spec_from_config(cfg: dict) -> BanditSpec:
    block = cfg["spec"]
    try:
        return BanditSpec(
            K=block["K"], T=block["T"], mu=block["mu"],
            sigma_tilde=block["sigma_tilde"], gamma=block["gamma"],
            beta=block["beta"], c=block["c"],
        )
    except (ValueError, TypeError) as exc:
        raise ConfigError(f"invalid spec: {exc}") from exc


def _fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return repr(float(x))


def _write_csv(path, header: str, rows) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(header + "\n")
        for row in rows:
            fh.write(",".join(_fmt(v) for v in row) + "\n")


def _probe_writable(out_dir, names) -> list:
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = [out_dir / name for name in names]
    for p in paths:
        with open(p, "a"):
            pass
    return paths


def _write_metadata(out_dir, command: str, cfg: dict, args, wall: float,
                    outputs, extra: dict | None = None) -> None:
    meta = {
        "command": command,
        "resolved_config": cfg,
        "seed": args.seed,
        "threads": args.threads,
        "wall_time_s": wall,
        "outputs": sorted(str(p.name) for p in outputs),
    }
    if extra:
        meta.update(extra)
    with open(out_dir / "metadata.json", "w") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True)
        fh.write("\n")


# ----------------------------------------------------------------------------
# Commands.
# ----------------------------------------------------------------------------


def cmd_simulate(cfg: dict, args) -> int:
    spec = _spec_from_config(cfg)
    block = cfg["simulate"]
    trials = int(block["trials"])
    if trials < 1:
        raise ConfigError("simulate.trials must be >= 1")
    windows = [tuple(map(float, w)) for w in block["windows"]]
    for w in windows:
        if len(w) != 2 or not w[0] < w[1]:
            raise ConfigError(f"invalid window {list(w)}")
    names = ["histogram.csv"] + (["histogram.png"] if args.plot else [])
    paths = _probe_writable(args.out, names)

    start = time.perf_counter()
    hist, stats = mcsim.run_ensemble(
        spec, trials, int(block["master_seed"]), bin_width=float(block["bin_width"]),
        windows=windows, workers=args.threads,
    )
    centers, phi = mcsim.empirical_action(hist)
    counts = [hist.counts[i] for i in sorted(hist.counts)]
    _write_csv(
        paths[0], "r,count,phi_sim,gamma_phi_sim",
        ((c, k, p, spec.gamma * p) for c, k, p in zip(centers, counts, phi)),
    )
    if args.plot:
        from . import plots

        plots.save_histogram_figure(paths[1], centers, spec.gamma * phi, spec.gamma)
    extra = {
        "trials": trials,
        "window_matches": {str(list(w)): s.matched for w, s in zip(windows, stats)},
    }
    _write_metadata(args.out, "simulate", cfg, args,
                    time.perf_counter() - start, paths, extra)
    return 0


def cmd_rate(cfg: dict, args) -> int:
    spec = _spec_from_config(cfg)
    if spec.gamma <= 0:
        raise ConfigError("rate requires gamma > 0")
    block = cfg["rate"]
    r_min, r_max, r_step = (float(block[k]) for k in ("r_min", "r_max", "r_step"))
    if r_step <= 0 or r_max < r_min:
        raise ConfigError("rate grid must have r_step > 0 and r_max >= r_min")
    grid = np.arange(r_min, r_max + 0.5 * r_step, r_step)
    names = ["rate_curve.csv"] + (["rate_curve.png"] if args.plot else [])
    paths = _probe_writable(args.out, names)

    start = time.perf_counter()
    curve = instanton.rate_curve(
        spec, grid, multistarts=int(block["multistarts"]),
        variant=block["variant"], seed_base=int(block["multistart_seed"]),
    )
    _write_csv(
        paths[0], "r,action,rate,ir_hat,n_solutions,residual,converged",
        zip(curve.r_grid, curve.action, curve.rate, curve.ir_hat,
            curve.n_solutions, curve.residual, curve.converged),
    )
    if args.plot:
        from . import plots

        plots.save_rate_figure(paths[1], curve.r_grid, curve.rate, curve.converged)
    extra = {
        "r_mpv": curve.r_mpv,
        "kinks": [float(curve.r_grid[curve.converged][i]) for i in
                  instanton.detect_kinks(curve.r_grid[curve.converged],
                                         curve.rate[curve.converged])],
        "convex_pieces": instanton.convex_piece_count(curve),
    }
    _write_metadata(args.out, "rate", cfg, args,
                    time.perf_counter() - start, paths, extra)
    frac_failed = 1.0 - curve.converged.mean()
    return 4 if frac_failed > 0.5 else 0


def cmd_trajectory(cfg: dict, args) -> int:
    spec = _spec_from_config(cfg)
    if spec.gamma <= 0:
        raise ConfigError("trajectory theory requires gamma > 0")
    block = cfg["trajectory"]
    window = tuple(map(float, block["r_window"]))
    if len(window) != 2 or not window[0] < window[1]:
        raise ConfigError(f"invalid r_window {list(window)}")
    trials = int(block["trials"])
    if trials < 1:
        raise ConfigError("trajectory.trials must be >= 1")
    names = ["trajectory_theory.csv", "trajectory_sim.csv"]
    if args.plot:
        names.append("trajectory.png")
    paths = _probe_writable(args.out, names)

    start = time.perf_counter()
    mid = 0.5 * (window[0] + window[1])
    sols = instanton.solve_saddle(
        spec, mid, multistarts=int(block["multistarts"]), variant=block["variant"],
    )
    theory = sols[0] if sols else None
    t_grid = np.arange(spec.T + 1)
    rows = []
    if theory is not None:
        muhat = theory.s / theory.n
        for t in t_grid:
            for k in range(spec.K):
                rows.append((t, k + 1, theory.n[k, t], muhat[k, t],
                             theory.is_hat[k, t], theory.in_hat[k, t]))
    _write_csv(paths[0], "t,arm,n,muhat,is_hat,in_hat", rows)

    sim = mcsim.conditioned_trajectory_stats(
        spec, trials, int(block["master_seed"]), window, workers=args.threads,
    )
    rows = []
    if not sim.empty:
        for t in t_grid:
            for k in range(spec.K):
                rows.append((t, k + 1, sim.n_mean[k, t], sim.n_std[k, t],
                             sim.muhat_mean[k, t], sim.muhat_std[k, t], sim.matched))
    _write_csv(paths[1], "t,arm,n_mean,n_std,muhat_mean,muhat_std,matched", rows)

    if args.plot and theory is not None:
        from . import plots

        plots.save_trajectory_figure(
            paths[2], (t_grid, theory.s / theory.n, theory.n), sim, window,
        )
    extra = {"window": list(window), "matched": sim.matched,
             "theory_converged": theory is not None}
    _write_metadata(args.out, "trajectory", cfg, args,
                    time.perf_counter() - start, paths, extra)
    return 4 if theory is None else 0


def cmd_toy(cfg: dict, args) -> int:
    block = cfg["toy"]
    try:
        spec = toymod.ToySpec(mu=tuple(block["mu"]), gamma=float(block["gamma"]),
                              beta=float(block["beta"]))
        bracket = tuple(map(float, block["bracket"]))
        if len(bracket) != 2 or not bracket[0] < bracket[1]:
            raise ValueError(f"invalid bracket {list(bracket)}")
    except (ValueError, TypeError) as exc:
        raise ConfigError(str(exc)) from exc
    names = ["branches.csv"] + (["branches.png"] if args.plot else [])
    paths = _probe_writable(args.out, names)

    start = time.perf_counter()
    rows = []
    branch_counts = {}
    for r in block["r_values"]:
        branches = toymod.find_branches(float(r), spec)
        branch_counts[str(float(r))] = len(branches)
        for b in branches:
            rows.append((float(r), b.branch_id, b.delta_s0, b.ir_hat, b.action))
    try:
        r_c = toymod.critical_regret(spec, bracket)
    except ValueError as exc:
        raise ConfigError(f"critical-regret bracket: {exc}") from exc

    _write_csv(paths[0], "r,branch_id,delta_s0,ir_hat,action", rows)
    if args.plot:
        from . import plots

        plots.save_branches_figure(paths[1], rows)
    _write_metadata(args.out, "toy", cfg, args, time.perf_counter() - start,
                    paths, {"r_c": r_c, "branch_counts": branch_counts})
    return 0


def cmd_sweep_c(cfg: dict, args) -> int:
    spec = _spec_from_config(cfg)
    c_values = [float(c) for c in cfg["sweep"]["c_values"]]
    if not c_values or any(c < 0 for c in c_values):
        raise ConfigError("sweep.c_values must be non-empty and >= 0")
    names = ["rmpv_vs_c.csv"] + (["rmpv_vs_c.png"] if args.plot else [])
    paths = _probe_writable(args.out, names)

    start = time.perf_counter()
    r_mpv = [instanton.most_probable_regret(spec.replace(c=c)) for c in c_values]
    _write_csv(paths[0], "c,r_mpv", zip(c_values, r_mpv))
    if args.plot:
        from . import plots

        plots.save_sweep_figure(paths[1], c_values, r_mpv)
    _write_metadata(args.out, "sweep-c", cfg, args,
                    time.perf_counter() - start, paths)
    return 0


# ----------------------------------------------------------------------------
# Argument parsing and dispatch.
# ----------------------------------------------------------------------------


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ucbregret",
        description="Regret statistics of softmax-UCB bandits: Monte Carlo and "
                    "saddle-point theory.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", metavar="PATH", help="JSON config file")
        p.add_argument("--out", metavar="DIR", default=".", help="output directory")
        p.add_argument("--seed", type=int, help="override the command's seed")
        p.add_argument("--threads", type=int, help="worker count (default: env "
                       f"{mcsim.WORKERS_ENV} or all cores)")
        p.add_argument("--no-plot", dest="plot", action="store_false",
                       help="skip the PNG figure")
        p.add_argument("--gamma", type=float, help="override spec.gamma")
        p.add_argument("--beta", type=float, help="override spec.beta")
        p.add_argument("--c", type=float, help="override spec.c")

    p = sub.add_parser("simulate", help="Monte Carlo regret histogram")
    common(p)
    p.add_argument("--trials", type=int)
    p.add_argument("--bin-width", type=float)

    p = sub.add_parser("rate", help="rate function over a regret grid")
    common(p)
    p.add_argument("--r-min", type=float)
    p.add_argument("--r-max", type=float)
    p.add_argument("--r-step", type=float)
    p.add_argument("--multistarts", type=int)
    p.add_argument("--variant", choices=instanton.VARIANTS)

    p = sub.add_parser("trajectory", help="dominant trajectory vs simulation")
    common(p)
    p.add_argument("--r-window", type=float, nargs=2, metavar=("LO", "HI"))
    p.add_argument("--trials", type=int)

    p = sub.add_parser("toy", help="two-arm one-step exact branches")
    common(p)
    p.add_argument("--r-values", type=float, nargs="+")
    p.add_argument("--bracket", type=float, nargs=2, metavar=("LO", "HI"))

    p = sub.add_parser("sweep-c", help="most probable regret vs exploration c")
    common(p)

    return parser


def _apply_overrides(cfg: dict, args) -> None:
    for key in ("gamma", "beta", "c"):
        val = getattr(args, key, None)
        if val is not None:
            cfg["spec"][key] = val
            if key != "c":
                cfg["toy"][key] = val
    cmd = args.command
    if cmd == "simulate":
        if args.trials is not None:
            cfg["simulate"]["trials"] = args.trials
        if args.bin_width is not None:
            cfg["simulate"]["bin_width"] = args.bin_width
        if args.seed is not None:
            cfg["simulate"]["master_seed"] = args.seed
    elif cmd == "rate":
        for key in ("r_min", "r_max", "r_step", "multistarts", "variant"):
            val = getattr(args, key, None)
            if val is not None:
                cfg["rate"][key] = val
        if args.seed is not None:
            cfg["rate"]["multistart_seed"] = args.seed
    elif cmd == "trajectory":
        if args.r_window is not None:
            cfg["trajectory"]["r_window"] = list(args.r_window)
        if args.trials is not None:
            cfg["trajectory"]["trials"] = args.trials
        if args.seed is not None:
            cfg["trajectory"]["master_seed"] = args.seed
    elif cmd == "toy":
        if args.r_values is not None:
            cfg["toy"]["r_values"] = list(args.r_values)
        if args.bracket is not None:
            cfg["toy"]["bracket"] = list(args.bracket)


COMMANDS = {
    "simulate": cmd_simulate,
    "rate": cmd_rate,
    "trajectory": cmd_trajectory,
    "toy": cmd_toy,
    "sweep-c": cmd_sweep_c,
}


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    args.out = Path(args.out)
    if args.threads is not None and args.threads < 1:
        print("error: --threads must be >= 1", file=sys.stderr)
        return 2
    try:
        cfg = load_config(args.config)
        _apply_overrides(cfg, args)
        if args.threads is None:
            args.threads = mcsim.default_workers()
        return COMMANDS[args.command](cfg, args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2 if exc.filename == args.config else 3
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
