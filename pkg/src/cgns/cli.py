"""Command-line front end.

Subcommands: simulate, assimilate, sample, diagnose, case-study. A single
JSON config file supplies defaults; command-line flags override config keys
(precedence flags > file > defaults). Every command is deterministic given
config + seed and writes a manifest JSON next to its outputs.

Exit codes: 0 success, 2 config/validation error, 3 numeric failure.
"""

import argparse
import copy
import datetime
import json
import os
import sys

import numpy as np

from . import __version__, diagnostics
from .errors import CgnsError, InvalidParams
from .filtering import (GaussianState, default_init, run_filter,
                        series_from_csv, series_to_csv)
from .model import build_model
from .sampler import (Direction, ensemble_to_csv, probe_statistics,
                      run_backward_sampler, run_forward_sampler)
from .simulate import TimeGrid, simulate_path, trajectory_from_csv, trajectory_to_csv
from .smoothing import run_smoother


class ConfigError(Exception):
    """Invalid or inconsistent run configuration."""


DEFAULT_CONFIG = {
    "model": {"name": "triad", "params": {}},
    "grid": {"t0": 0.0, "t_end": 60.0, "dt": 1e-3},
    "seed": 0,
    "m": 100,
    "direction": "backward",
    "init": {"x0": None, "y0": None,
             "filter_mean": None, "filter_cov_scale": 0.01},
    "out": ".",
    "diagnostics": {"max_lag": 2000, "segment_len": 4096,
                    "theta": 1.0, "burn_in": 10.0},
}


def _deep_update(base, override):
    for key, value in override.items():
        if (isinstance(value, dict) and isinstance(base.get(key), dict)):
            _deep_update(base[key], value)
        else:
            base[key] = value
    return base


def load_config(args) -> dict:
    """Merge defaults, config file, and flags (flags win)."""
    config = copy.deepcopy(DEFAULT_CONFIG)
    if getattr(args, "config", None):
        try:
            with open(args.config) as fh:
                _deep_update(config, json.load(fh))
        except FileNotFoundError:
            raise ConfigError(f"config file not found: {args.config}")
        except json.JSONDecodeError as err:
            raise ConfigError(f"config file is not valid JSON: {err}")
    if getattr(args, "model", None):
        config["model"]["name"] = args.model
    if getattr(args, "seed", None) is not None:
        config["seed"] = args.seed
    if getattr(args, "out", None):
        config["out"] = args.out
    if getattr(args, "m", None) is not None:
        config["m"] = args.m
    if getattr(args, "direction", None):
        config["direction"] = args.direction
    for key in ("t0", "t_end", "dt"):
        value = getattr(args, key, None)
        if value is not None:
            config["grid"][key] = value
    validate_config(config)
    return config


def validate_config(config):
    grid = config["grid"]
    if not grid["dt"] or grid["dt"] <= 0:
        raise ConfigError(f"grid.dt must be > 0, got {grid['dt']}")
    if grid["t_end"] <= grid["t0"]:
        raise ConfigError("grid.t_end must be > grid.t0")
    if int(config["m"]) < 1:
        raise ConfigError(f"m must be >= 1, got {config['m']}")
    if config["direction"] not in ("forward", "backward", "both"):
        raise ConfigError(f"direction must be forward/backward/both, "
                          f"got {config['direction']!r}")


def _grid(config) -> TimeGrid:
    g = config["grid"]
    return TimeGrid(t0=float(g["t0"]), t_end=float(g["t_end"]), dt=float(g["dt"]))


def _model(config):
    return build_model(config["model"]["name"], config["model"].get("params"))


def _init_vec(value, n):
    if value is None:
        return np.zeros(n)
    return np.asarray(value, dtype=float).reshape(n)


def _filter_init(config, l) -> GaussianState:
    init = config["init"]
    mean = _init_vec(init.get("filter_mean"), l)
    scale = float(init.get("filter_cov_scale", 0.01))
    if scale <= 0:
        raise ConfigError("init.filter_cov_scale must be > 0")
    return GaussianState(mean=mean, cov=scale * np.eye(l))


def write_manifest(outdir, config, files, name="manifest.json"):
    path = os.path.join(outdir, name)
    payload = {
        "config": config,
        "seed": int(config["seed"]),
        "files": sorted(files),
        "created_at": datetime.datetime.now(datetime.timezone.utc).isoformat(),
        "version": __version__,
    }
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
    return path


def cmd_simulate(config) -> list:
    model = _model(config)
    grid = _grid(config)
    init = config["init"]
    traj = simulate_path(model, _init_vec(init.get("x0"), model.k),
                         _init_vec(init.get("y0"), model.l),
                         grid, int(config["seed"]))
    outdir = config["out"]
    os.makedirs(outdir, exist_ok=True)
    trajectory_to_csv(traj, os.path.join(outdir, "truth.csv"))
    write_manifest(outdir, config, ["truth.csv"])
    return ["truth.csv"]


def cmd_assimilate(config, truth_path) -> list:
    model = _model(config)
    grid = _grid(config)
    try:
        traj = trajectory_from_csv(truth_path, dt=grid.dt)
    except FileNotFoundError:
        raise ConfigError(f"truth file not found: {truth_path}")
    if traj.x_path.shape[1] != model.k:
        raise ConfigError(
            f"truth file has {traj.x_path.shape[1]} x-columns, model wants {model.k}")
    filt = run_filter(model, traj.x_path, grid,
                      init=_filter_init(config, model.l),
                      source_path_id=os.path.basename(truth_path))
    smo = run_smoother(model, traj.x_path, grid, filt,
                       source_path_id=os.path.basename(truth_path))
    outdir = config["out"]
    os.makedirs(outdir, exist_ok=True)
    series_to_csv(filt, os.path.join(outdir, "filter.csv"))
    series_to_csv(smo, os.path.join(outdir, "smoother.csv"))
    write_manifest(outdir, config, ["filter.csv", "smoother.csv"])
    return ["filter.csv", "smoother.csv"]


def _parse_probe_times(spec, grid):
    indices = []
    for tok in spec.split(","):
        t = float(tok)
        j = int(round((t - grid.t0) / grid.dt))
        if not (0 <= j <= grid.n_steps):
            raise ConfigError(f"probe time {t} outside the grid")
        indices.append(j)
    return indices


def cmd_sample(config, filter_path, truth_path, probe_times=None) -> list:
    model = _model(config)
    grid = _grid(config)
    try:
        traj = trajectory_from_csv(truth_path, dt=grid.dt)
        filt = series_from_csv(filter_path, dt=grid.dt)
    except FileNotFoundError as err:
        raise ConfigError(str(err))
    m = int(config["m"])
    seed = int(config["seed"])
    direction = config["direction"]
    outdir = config["out"]
    os.makedirs(outdir, exist_ok=True)
    files = []
    directions = (["forward", "backward"] if direction == "both"
                  else [direction])
    for label in directions:
        runner = (run_forward_sampler if label == "forward"
                  else run_backward_sampler)
        if probe_times is not None:
            indices = _parse_probe_times(probe_times, grid)
            stats = probe_statistics(model, traj.x_path, grid, filt, seed, m,
                                     indices, Direction(label))
            report = {
                "direction": label, "m": m, "seed": seed,
                "probes": [{
                    "index": j,
                    "time": grid.time(j),
                    "ensemble_mean": stats["mean"][j].tolist(),
                    "ensemble_cov": stats["cov"][j].tolist(),
                    "filter_mean": filt.means[j].tolist(),
                    "filter_cov": filt.covs[j].tolist(),
                    "mean_abs_dev": np.abs(stats["mean"][j]
                                           - filt.means[j]).tolist(),
                } for j in indices],
            }
            name = f"consistency_{label}.json"
            with open(os.path.join(outdir, name), "w") as fh:
                json.dump(report, fh, indent=2, sort_keys=True)
            files.append(name)
        else:
            ens = runner(model, traj.x_path, grid, filt, seed, m)
            prefix = f"{label}_sample"
            manifest = ensemble_to_csv(
                ens, outdir, prefix=prefix,
                source_series=os.path.basename(filter_path))
            with open(manifest) as fh:
                files.extend(json.load(fh)["files"])
            files.append(os.path.basename(manifest))
    write_manifest(outdir, config, files)
    return files


def _burned(series_array, grid, burn_in):
    # Never discard more than half the series on short runs.
    j0 = min(int(round(burn_in / grid.dt)), (len(series_array) - 1) // 2)
    return series_array[j0:]


def cmd_diagnose(config, truth_path, filter_path, smoother_path,
                 samples=None) -> list:
    model = _model(config)
    grid = _grid(config)
    opts = config["diagnostics"]
    try:
        traj = trajectory_from_csv(truth_path, dt=grid.dt)
        filt = series_from_csv(filter_path, dt=grid.dt)
        smo = series_from_csv(smoother_path, dt=grid.dt)
    except FileNotFoundError as err:
        raise ConfigError(str(err))
    outdir = config["out"]
    os.makedirs(outdir, exist_ok=True)
    files = []
    seed = int(config["seed"])
    m = int(config["m"])

    if samples is None:
        fwd = run_forward_sampler(model, traj.x_path, grid, filt, seed, m)
        bwd = run_backward_sampler(model, traj.x_path, grid, filt, seed, m)
    else:
        fwd, bwd = samples

    theta = float(opts["theta"])
    reports = {
        "filter": diagnostics.metric_report(traj.y_path, filt.means,
                                            fwd.samples, theta=theta),
        "smoother": diagnostics.metric_report(traj.y_path, smo.means,
                                              bwd.samples, theta=theta),
    }
    metrics = {}
    for label, rep in reports.items():
        metrics[label] = {k: float(getattr(rep, k)) for k in
                          ("srmse", "corr", "corr_extreme", "eta",
                           "bias_sq", "variance_term")}
    for coord in range(model.l):
        metrics.setdefault("per_coordinate", {})[f"y_{coord}"] = {
            "corr_filter": diagnostics.corr(traj.y_path[:, coord],
                                            filt.means[:, coord]),
            "corr_smoother": diagnostics.corr(traj.y_path[:, coord],
                                              smo.means[:, coord]),
        }
    with open(os.path.join(outdir, "metrics.json"), "w") as fh:
        json.dump(metrics, fh, indent=2, sort_keys=True)
    files.append("metrics.json")

    burn = float(opts["burn_in"])
    n_burned = len(_burned(traj.y_path, grid, burn))
    max_lag = min(int(opts["max_lag"]), grid.n_steps // 2, n_burned - 2)
    curves = {
        "acf_truth.csv": _burned(traj.y_path, grid, burn),
        "acf_filter.csv": _burned(filt.means, grid, burn),
        "acf_smoother.csv": _burned(smo.means, grid, burn),
        "acf_sample.csv": _burned(bwd.samples[0], grid, burn),
    }
    for name, series in curves.items():
        curve = diagnostics.acf(series, max_lag)
        diagnostics.curve_to_csv(curve.lags * grid.dt, curve.values,
                                 os.path.join(outdir, name))
        files.append(name)

    seg = min(int(opts["segment_len"]), grid.n_steps // 2, n_burned // 2)
    for coord in range(model.l):
        for label, series in (("truth", traj.y_path),
                              ("sample", bwd.samples[0])):
            name = f"psd_{label}_y{coord}.csv"
            freqs, power = diagnostics.psd_estimate(
                _burned(series, grid, burn)[:, coord], seg, dt=grid.dt)
            diagnostics.curve_to_csv(freqs, power,
                                     os.path.join(outdir, name),
                                     header="lag_or_freq,value")
            files.append(name)

    track = diagnostics.uncertainty_spectra(model, [(traj.x_path, filt)])
    diagnostics.spectrum_to_json(track, os.path.join(outdir, "spectrum.json"))
    files.append("spectrum.json")
    write_manifest(outdir, config, files)
    return files


def cmd_case_study(config) -> list:
    """simulate -> assimilate -> sample (both directions) -> diagnose."""
    outdir = config["out"]
    os.makedirs(outdir, exist_ok=True)
    files = list(cmd_simulate(config))
    truth = os.path.join(outdir, "truth.csv")
    files += cmd_assimilate(config, truth)

    model = _model(config)
    grid = _grid(config)
    traj = trajectory_from_csv(truth, dt=grid.dt)
    filt = series_from_csv(os.path.join(outdir, "filter.csv"), dt=grid.dt)
    seed = int(config["seed"])
    m = int(config["m"])
    fwd = run_forward_sampler(model, traj.x_path, grid, filt, seed, m)
    bwd = run_backward_sampler(model, traj.x_path, grid, filt, seed, m)
    for label, ens in (("forward", fwd), ("backward", bwd)):
        manifest = ensemble_to_csv(ens, outdir, prefix=f"{label}_sample",
                                   source_series="filter.csv")
        with open(manifest) as fh:
            files.extend(json.load(fh)["files"])
        files.append(os.path.basename(manifest))

    files += cmd_diagnose(config, truth,
                          os.path.join(outdir, "filter.csv"),
                          os.path.join(outdir, "smoother.csv"),
                          samples=(fwd, bwd))
    write_manifest(outdir, config, sorted(set(files)))
    return sorted(set(files))


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cgns",
        description="Conditional-Gaussian state estimation and sampling toolkit")
    parser.add_argument("--version", action="version",
                        version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="JSON config file")
        p.add_argument("--model", help="model name (triad, linear)")
        p.add_argument("--seed", type=int)
        p.add_argument("--out", help="output directory")
        p.add_argument("--t0", type=float)
        p.add_argument("--t-end", dest="t_end", type=float)
        p.add_argument("--dt", type=float)

    p = sub.add_parser("simulate", help="simulate one truth path")
    common(p)

    p = sub.add_parser("assimilate", help="run filter and smoother on a truth CSV")
    common(p)
    p.add_argument("--truth", required=True)

    p = sub.add_parser("sample", help="draw conditional hidden trajectories")
    common(p)
    p.add_argument("--truth", required=True)
    p.add_argument("--filter", dest="filter_path", required=True)
    p.add_argument("-m", type=int)
    p.add_argument("--direction", choices=["forward", "backward", "both"])
    p.add_argument("--probe-times",
                   help="comma-separated times; report ensemble-vs-posterior "
                        "statistics instead of writing sample files")

    p = sub.add_parser("diagnose", help="metrics, ACF/PSD curves, spectra")
    common(p)
    p.add_argument("--truth", required=True)
    p.add_argument("--filter", dest="filter_path", required=True)
    p.add_argument("--smoother", dest="smoother_path", required=True)
    p.add_argument("-m", type=int)

    p = sub.add_parser("case-study",
                       help="full pipeline with the built-in case-study model")
    common(p)
    p.add_argument("-m", type=int)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        config = load_config(args)
        if args.command == "simulate":
            cmd_simulate(config)
        elif args.command == "assimilate":
            cmd_assimilate(config, args.truth)
        elif args.command == "sample":
            cmd_sample(config, args.filter_path, args.truth,
                       probe_times=args.probe_times)
        elif args.command == "diagnose":
            cmd_diagnose(config, args.truth, args.filter_path,
                         args.smoother_path)
        elif args.command == "case-study":
            cmd_case_study(config)
    except (ConfigError, InvalidParams, KeyError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 2
    except CgnsError as err:
        print(f"numeric failure: {err}", file=sys.stderr)
        return 3
    return 0


if __name__ == "__main__":
    sys.exit(main())
