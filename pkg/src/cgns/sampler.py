"""Conditional trajectory sampling for the hidden variables.

Forward sampling rides the filter mean and adds a correlated-noise SDE for
the residual; backward sampling starts from the filter endpoint and runs the
smoother-consistent SDE in reverse time. Pointwise ensemble statistics match
the filter (forward) or smoother (backward) posterior.

Step functions broadcast over a leading ensemble axis, so whole ensembles
advance per time step with one set of coefficient evaluations; the noise for
step j, member i is a fixed function of (seed, stream, j, i), which makes the
output independent of how members are batched or parallelized.
"""

import enum
import json
from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import rng
from .filtering import PosteriorSeries, SeriesKind
from .linalg import chol_solve, psd_sqrt
from .model import CgnsModel, StepContext, step_context
from .simulate import TimeGrid
from .smoothing import _filter_chol


class Direction(enum.Enum):
    FORWARD = "forward"
    BACKWARD = "backward"


@dataclass(frozen=True)
class TrajectoryEnsemble:
    """Sampled hidden paths conditioned on one observed path.

    samples has shape (m, J+1, l); samples[i] is one trajectory.
    """

    grid: TimeGrid
    observed_x: np.ndarray
    samples: np.ndarray
    direction: Direction
    seed: int

    @property
    def m(self) -> int:
        return self.samples.shape[0]


def forward_sample_step(model: CgnsModel, t, x_j, mu_f_j, mu_f_next, r_f_j,
                        y_hat, dt, eps, ctx: StepContext = None):
    """Advance forward samples one step.

    y_hat and eps may be (l,) or (m, l). The drift follows the filter-mean
    increment plus damped relaxation of the residual; the noise amplitude is
    the PSD square root of B + R*Gamma*R. A precomputed ``ctx`` for (t, x_j)
    may be supplied to skip the coefficient work.
    """
    if ctx is None:
        ctx = step_context(model, t, x_j)
    r_gamma = r_f_j @ ctx.gamma
    damp = ctx.a_mat - r_gamma
    noise_cov = ctx.b_mat + r_gamma @ r_f_j
    amp = psd_sqrt(noise_cov, name="B + R*Gamma*R")
    return (y_hat + (mu_f_next - mu_f_j)
            + (y_hat - mu_f_j) @ damp.T * dt
            + eps @ amp.T * np.sqrt(dt))


def backward_sample_step(model: CgnsModel, t, x_t, x_next, mu_f_t, r_f_t,
                         y_hat_next, dt, eps, ctx: StepContext = None):
    """Advance backward samples one step (from t + dt down to t).

    Coefficients and filter statistics are taken at t; the sample state on
    the right-hand side at t + dt. Requires a strictly PD filter covariance.
    A precomputed ``ctx`` for (t, x_t) may be supplied to skip the
    coefficient work.
    """
    if ctx is None:
        ctx = step_context(model, t, x_t)
    snap = ctx.snap
    lf = _filter_chol(r_f_t, t)
    b_rf_inv = chol_solve(lf, ctx.b_mat.T).T
    relax = b_rf_inv + ctx.a_mat
    obs_term = ctx.obs_gain @ ((x_t - x_next)
                               + (snap.lambda_x @ mu_f_t + snap.f_x) * dt)
    amp = psd_sqrt(ctx.b_mat, name="B")
    drift_const = -(snap.lambda_y @ mu_f_t + snap.f_y) + mu_f_t @ relax.T
    return (y_hat_next
            + (drift_const - y_hat_next @ relax.T) * dt
            + obs_term
            + eps @ amp.T * np.sqrt(dt))


def _initial_draw(gen, mu, cov, m, init_mode, y0):
    if init_mode == "point":
        point = mu if y0 is None else np.asarray(y0, dtype=float)
        return np.tile(point, (m, 1))
    if init_mode != "gaussian":
        raise ValueError(f"unknown init_mode {init_mode!r}")
    amp = psd_sqrt(cov, name="initial covariance")
    return mu + gen.standard_normal((m, len(mu))) @ amp.T


def _check_filter_series(filter_series, grid):
    if filter_series.kind is not SeriesKind.FILTER:
        raise ValueError("samplers need a filter series")
    if len(filter_series) != grid.n_steps + 1:
        raise ValueError("filter series length does not match grid")


def _forward_sweep(model, traj_x, grid, filter_series, seed, m,
                   init_mode, y0, record, probe_indices):
    _check_filter_series(filter_series, grid)
    traj_x = np.asarray(traj_x, dtype=float).reshape(-1, model.k)
    J = grid.n_steps
    gen = rng.generator(seed, "forward")
    y = _initial_draw(gen, filter_series.means[0], filter_series.covs[0],
                      m, init_mode, y0)
    paths = np.empty((m, J + 1, model.l)) if record else None
    probes = {} if probe_indices is not None else None
    if record:
        paths[:, 0, :] = y
    if probes is not None and 0 in probe_indices:
        probes[0] = y.copy()
    ctx = step_context(model, grid.t0, traj_x[0]) if model.constant else None
    for j in range(J):
        eps = gen.standard_normal((m, model.l))
        y = forward_sample_step(model, grid.time(j), traj_x[j],
                                filter_series.means[j],
                                filter_series.means[j + 1],
                                filter_series.covs[j], y, grid.dt, eps,
                                ctx=ctx)
        if record:
            paths[:, j + 1, :] = y
        if probes is not None and (j + 1) in probe_indices:
            probes[j + 1] = y.copy()
    return traj_x, paths, probes


def _backward_sweep(model, traj_x, grid, filter_series, seed, m,
                    init_mode, y0, record, probe_indices):
    _check_filter_series(filter_series, grid)
    traj_x = np.asarray(traj_x, dtype=float).reshape(-1, model.k)
    J = grid.n_steps
    gen = rng.generator(seed, "backward")
    y = _initial_draw(gen, filter_series.means[J], filter_series.covs[J],
                      m, init_mode, y0)
    paths = np.empty((m, J + 1, model.l)) if record else None
    probes = {} if probe_indices is not None else None
    if record:
        paths[:, J, :] = y
    if probes is not None and J in probe_indices:
        probes[J] = y.copy()
    ctx = step_context(model, grid.t0, traj_x[0]) if model.constant else None
    for j in range(J - 1, -1, -1):
        eps = gen.standard_normal((m, model.l))
        y = backward_sample_step(model, grid.time(j), traj_x[j], traj_x[j + 1],
                                 filter_series.means[j], filter_series.covs[j],
                                 y, grid.dt, eps, ctx=ctx)
        if record:
            paths[:, j, :] = y
        if probes is not None and j in probe_indices:
            probes[j] = y.copy()
    return traj_x, paths, probes


def run_forward_sampler(model: CgnsModel, traj_x, grid: TimeGrid,
                        filter_series: PosteriorSeries, seed, m: int,
                        init_mode: str = "gaussian",
                        y0=None) -> TrajectoryEnsemble:
    """m forward-sampled hidden trajectories, initialized from the filter
    posterior at t0 (or a point mass when init_mode='point')."""
    if m < 1:
        raise ValueError("ensemble size m must be >= 1")
    traj_x, paths, _ = _forward_sweep(model, traj_x, grid, filter_series,
                                      seed, m, init_mode, y0, True, None)
    return TrajectoryEnsemble(grid=grid, observed_x=traj_x, samples=paths,
                              direction=Direction.FORWARD, seed=seed)


def run_backward_sampler(model: CgnsModel, traj_x, grid: TimeGrid,
                         filter_series: PosteriorSeries, seed, m: int,
                         init_mode: str = "gaussian",
                         y0=None) -> TrajectoryEnsemble:
    """m backward-sampled hidden trajectories, initialized from the filter
    posterior at T and run in reverse time."""
    if m < 1:
        raise ValueError("ensemble size m must be >= 1")
    traj_x, paths, _ = _backward_sweep(model, traj_x, grid, filter_series,
                                       seed, m, init_mode, y0, True, None)
    return TrajectoryEnsemble(grid=grid, observed_x=traj_x, samples=paths,
                              direction=Direction.BACKWARD, seed=seed)


def probe_statistics(model: CgnsModel, traj_x, grid: TimeGrid,
                     filter_series: PosteriorSeries, seed, m: int,
                     probe_indices, direction: Direction,
                     init_mode: str = "gaussian") -> dict:
    """Streaming ensemble mean/covariance at selected grid indices.

    Avoids materializing full paths for very large m; used for the
    sampler-vs-posterior consistency checks.
    """
    sweep = _forward_sweep if direction is Direction.FORWARD else _backward_sweep
    probe_indices = sorted(set(int(i) for i in probe_indices))
    _, _, probes = sweep(model, traj_x, grid, filter_series, seed, m,
                         init_mode, None, False, set(probe_indices))
    means = {}
    covs = {}
    for j, snap in probes.items():
        means[j] = snap.mean(axis=0)
        covs[j] = np.cov(snap.T, bias=False).reshape(model.l, model.l)
    return {"indices": probe_indices,
            "mean": {j: means[j] for j in probe_indices},
            "cov": {j: covs[j] for j in probe_indices}}


def ensemble_to_csv(ens: TrajectoryEnsemble, outdir, prefix="sample",
                    source_series: str = ""):
    """Write one CSV per sample plus a manifest JSON; returns the manifest path."""
    import os
    os.makedirs(outdir, exist_ok=True)
    l = ens.samples.shape[2]
    header = ",".join(["t"] + [f"yhat_{i}" for i in range(l)])
    times = ens.grid.times()
    files = []
    for i in range(ens.m):
        name = f"{prefix}_{i:04d}.csv"
        data = np.column_stack([times, ens.samples[i]])
        np.savetxt(os.path.join(outdir, name), data, fmt="%.17g",
                   delimiter=",", header=header, comments="")
        files.append(name)
    manifest = {
        "seed": int(ens.seed),
        "direction": ens.direction.value,
        "m": int(ens.m),
        "source_series": source_series,
        "files": files,
    }
    manifest_path = os.path.join(outdir, f"{prefix}_manifest.json")
    with open(manifest_path, "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
    return manifest_path
