import json

import numpy as np
import pytest

from cgns import rng
from cgns.filtering import run_filter
from cgns.linalg import psd_sqrt
from cgns.model import linear_model, step_context
from cgns.sampler import (Direction, backward_sample_step, ensemble_to_csv,
                          forward_sample_step, probe_statistics,
                          run_backward_sampler, run_forward_sampler)
from cgns.simulate import TimeGrid, simulate_path


def planar_model():
    return linear_model([[1.0, 0.5]], [[-1.0, 0.2], [-0.2, -1.5]],
                        sigma1_x=[[1.0]], sigma2_y=np.diag([1.0, 1.2]))


def decoupled_model():
    """Lambda_x = 0 and no cross noise: hidden dynamics decouple."""
    return linear_model([[0.0, 0.0]], [[-1.0, 0.0], [0.0, -2.0]],
                        sigma1_x=[[1.0]], sigma2_y=np.diag([0.8, 1.1]))


def filtered_setup(model, t_end=1.0, seed=5):
    grid = TimeGrid(0.0, t_end, 1e-3)
    traj = simulate_path(model, [0.0], np.zeros(model.l), grid, seed=seed)
    filt = run_filter(model, traj.x_path, grid)
    return grid, traj, filt


def test_forward_step_rides_the_filter_mean():
    m = planar_model()
    mu = np.array([0.3, -0.2])
    mu_next = np.array([0.35, -0.15])
    out = forward_sample_step(m, 0.0, np.zeros(1), mu, mu_next,
                              0.1 * np.eye(2), mu, 1e-3, np.zeros(2))
    assert np.allclose(out, mu_next, atol=1e-15)


def test_forward_step_decoupled_noise_amplitude():
    m = decoupled_model()
    ctx = step_context(m, 0.0, np.zeros(1))
    assert np.allclose(ctx.gamma, 0.0)
    snap = m.coeffs(0.0, np.zeros(1))
    syy = snap.sigma2_y @ snap.sigma2_y.T
    assert np.allclose(ctx.b_mat, syy)
    # With Gamma = 0 the residual damping is lambda_y and the amplitude
    # reduces to psd_sqrt(syy).
    y_hat = np.array([1.0, -1.0])
    mu = np.zeros(2)
    eps = np.array([0.5, 0.25])
    dt = 1e-2
    out = forward_sample_step(m, 0.0, np.zeros(1), mu, mu, 0.2 * np.eye(2),
                              y_hat, dt, eps)
    expected = (y_hat + snap.lambda_y @ y_hat * dt
                + psd_sqrt(syy) @ eps * np.sqrt(dt))
    assert np.allclose(out, expected, atol=1e-14)


def test_forward_residual_closed_form():
    """Subtracting the filter mean from the step output recovers the
    residual recursion exactly (same noise)."""
    m = planar_model()
    rng_ = np.random.default_rng(3)
    snap = m.coeffs(0.0, np.zeros(1))
    sxx = snap.sigma1_x @ snap.sigma1_x.T
    gamma = snap.lambda_x.T @ np.linalg.inv(sxx) @ snap.lambda_x
    a_mat = snap.lambda_y  # no cross noise
    b_mat = snap.sigma2_y @ snap.sigma2_y.T
    for _ in range(10):
        r_f = np.diag(rng_.uniform(0.05, 0.5, 2))
        mu = rng_.normal(size=2)
        mu_next = mu + rng_.normal(size=2) * 0.01
        y_hat = rng_.normal(size=2)
        eps = rng_.normal(size=2)
        dt = 1e-3
        out = forward_sample_step(m, 0.0, np.zeros(1), mu, mu_next, r_f,
                                  y_hat, dt, eps)
        resid = y_hat - mu
        expected = (resid + (a_mat - r_f @ gamma) @ resid * dt
                    + psd_sqrt(b_mat + r_f @ gamma @ r_f) @ eps * np.sqrt(dt))
        assert np.max(np.abs((out - mu_next) - expected)) <= 1e-12


def test_backward_step_no_cross_noise_drops_observation_term():
    m = planar_model()  # sigma1_y defaults to zero: no cross noise
    ctx = step_context(m, 0.0, np.zeros(1))
    assert np.allclose(ctx.obs_gain, 0.0)
    mu_f = np.array([0.1, 0.2])
    r_f = 0.3 * np.eye(2)
    y_next = np.array([0.5, -0.5])
    dt = 1e-3
    out_near = backward_sample_step(m, 0.0, np.zeros(1), np.zeros(1),
                                    mu_f, r_f, y_next, dt, np.zeros(2))
    out_far = backward_sample_step(m, 0.0, np.zeros(1), np.ones(1) * 5.0,
                                   mu_f, r_f, y_next, dt, np.zeros(2))
    assert np.allclose(out_near, out_far, atol=1e-14)


def test_backward_alternative_form_equivalence():
    """The smoother-centered rewrite of the backward step agrees with the
    filter-centered one given identical noise."""
    from cgns.smoothing import run_smoother

    m = planar_model()
    grid, traj, filt = filtered_setup(m)
    smo = run_smoother(m, traj.x_path, grid, filt)
    ctx = step_context(m, 0.0, np.zeros(1))
    gen = np.random.default_rng(8)
    for j in [50, 300, 700]:
        r_f = filt.covs[j]
        g = ctx.b_mat @ np.linalg.inv(r_f) + ctx.a_mat
        y_next = smo.means[j + 1] + gen.normal(size=2) * 0.3
        eps = gen.normal(size=2)
        direct = backward_sample_step(m, grid.time(j), traj.x_path[j],
                                      traj.x_path[j + 1], filt.means[j],
                                      r_f, y_next, grid.dt, eps)
        alt = (y_next + (smo.means[j] - smo.means[j + 1])
               - g @ (y_next - smo.means[j + 1]) * grid.dt
               + psd_sqrt(ctx.b_mat) @ eps * np.sqrt(grid.dt))
        assert np.max(np.abs(direct - alt)) <= 1e-9


def test_zero_noise_hidden_dynamics_collapse_to_filter_mean():
    from cgns.filtering import GaussianState

    m = linear_model([[1.0]], [[-1.0]], sigma1_x=[[1.0]], sigma2_y=[[1e-8]])
    grid = TimeGrid(0.0, 0.5, 1e-3)
    traj = simulate_path(m, [0.0], np.zeros(m.l), grid, seed=5)
    # Zero hidden noise and a point prior keep the posterior covariance at
    # machine scale, so every sample tracks the filter mean.
    filt = run_filter(m, traj.x_path, grid,
                      init=GaussianState(mean=np.zeros(1),
                                         cov=np.zeros((1, 1))))
    ens = run_forward_sampler(m, traj.x_path, grid, filt, seed=1, m=4,
                              init_mode="point")
    dev = np.abs(ens.samples - filt.means[None])
    assert dev.max() <= 1e-6


def test_sampler_determinism_and_direction_streams():
    m = planar_model()
    grid, traj, filt = filtered_setup(m, t_end=0.3)
    a = run_forward_sampler(m, traj.x_path, grid, filt, seed=2, m=3)
    b = run_forward_sampler(m, traj.x_path, grid, filt, seed=2, m=3)
    assert np.array_equal(a.samples, b.samples)
    c = run_backward_sampler(m, traj.x_path, grid, filt, seed=2, m=3)
    assert not np.array_equal(a.samples, c.samples)
    assert a.direction is Direction.FORWARD
    assert c.direction is Direction.BACKWARD


def test_probe_statistics_match_recorded_paths():
    m = planar_model()
    grid, traj, filt = filtered_setup(m, t_end=0.3)
    ens = run_backward_sampler(m, traj.x_path, grid, filt, seed=4, m=50)
    stats = probe_statistics(m, traj.x_path, grid, filt, seed=4, m=50,
                             probe_indices=[0, 150, 300],
                             direction=Direction.BACKWARD)
    for j in [0, 150, 300]:
        assert np.allclose(stats["mean"][j], ens.samples[:, j].mean(axis=0),
                           atol=1e-12)
        assert np.allclose(stats["cov"][j], np.cov(ens.samples[:, j].T),
                           atol=1e-12)


def test_forward_consistency_short_run():
    m = planar_model()
    grid, traj, filt = filtered_setup(m, t_end=1.0)
    stats = probe_statistics(m, traj.x_path, grid, filt, seed=6, m=4000,
                             probe_indices=[600], direction=Direction.FORWARD)
    j = 600
    tol = 4.0 * np.sqrt(np.diag(filt.covs[j]) / 4000)
    assert np.all(np.abs(stats["mean"][j] - filt.means[j]) <= tol)
    rel = np.abs(np.diag(stats["cov"][j]) - np.diag(filt.covs[j]))
    assert np.all(rel <= 0.15 * np.diag(filt.covs[j]))


def test_backward_endpoint_statistics():
    m = planar_model()
    grid, traj, filt = filtered_setup(m, t_end=0.5)
    ens = run_backward_sampler(m, traj.x_path, grid, filt, seed=7, m=5000)
    endpoint = ens.samples[:, -1]
    tol = 4.0 * np.sqrt(np.diag(filt.covs[-1]) / 5000)
    assert np.all(np.abs(endpoint.mean(axis=0) - filt.means[-1]) <= tol)
    assert np.allclose(np.cov(endpoint.T), filt.covs[-1], rtol=0.15, atol=0.02)


def test_init_point_mode():
    m = planar_model()
    grid, traj, filt = filtered_setup(m, t_end=0.1)
    ens = run_forward_sampler(m, traj.x_path, grid, filt, seed=1, m=5,
                              init_mode="point", y0=[1.0, 2.0])
    assert np.allclose(ens.samples[:, 0], [1.0, 2.0])
    with pytest.raises(ValueError):
        run_forward_sampler(m, traj.x_path, grid, filt, seed=1, m=2,
                            init_mode="bogus")


def test_ensemble_csv_and_manifest(tmp_path):
    m = planar_model()
    grid, traj, filt = filtered_setup(m, t_end=0.1)
    ens = run_backward_sampler(m, traj.x_path, grid, filt, seed=9, m=3)
    manifest_path = ensemble_to_csv(ens, tmp_path, prefix="bwd",
                                    source_series="filter.csv")
    manifest = json.loads(open(manifest_path).read())
    assert manifest["seed"] == 9
    assert manifest["direction"] == "backward"
    assert manifest["m"] == 3
    assert manifest["source_series"] == "filter.csv"
    assert len(manifest["files"]) == 3
    first = (tmp_path / "bwd_0000.csv").read_text().splitlines()
    assert first[0] == "t,yhat_0,yhat_1"
    assert len(first) == grid.n_steps + 2
