"""Backward optimal nonlinear smoother.

Runs from t = T down to 0 after a filter pass, refining each state with the
information in future observations. The primary scheme is explicit backward
Euler on the continuous-time backward equations (coefficients and filter
statistics at the earlier time t, smoother statistics at t + dt). The
one-step recursion from the discrete-time derivation is kept alongside as a
cross-check oracle; the two agree to O(dt^2) per step.
"""

import numpy as np

from .errors import FilterCovSingular
from .filtering import (GaussianState, PosteriorSeries, SeriesKind,
                        _check_blowup, _clamp_cov)
from .linalg import TOL_PD_STRICT, chol_solve, spd_cholesky, symmetrize
from .model import (CgnsModel, StepContext, auxiliary, evaluate, gramians,
                    step_context)
from .simulate import TimeGrid


def _filter_chol(r_f, t):
    """Cholesky factor of the filter covariance, guarded for strict PD."""
    w = np.linalg.eigvalsh(symmetrize(r_f))
    if w[0] <= TOL_PD_STRICT:
        raise FilterCovSingular(t, min_eig=float(w[0]))
    return np.linalg.cholesky(symmetrize(r_f))


def smoother_step(model: CgnsModel, t, x_t, x_next, filt: GaussianState,
                  smo_next: GaussianState, dt,
                  ctx: StepContext = None) -> GaussianState:
    """One backward step: smoother statistics at t from those at t + dt.

    A precomputed ``ctx`` for (t, x_t) may be supplied to skip the
    coefficient work (constant models hoist it).
    """
    if ctx is None:
        ctx = step_context(model, t, x_t)
    snap = ctx.snap
    lf = _filter_chol(filt.cov, t)
    b_rf_inv = chol_solve(lf, ctx.b_mat.T).T             # B R_f^{-1}

    mu_s, r_s = smo_next.mean, smo_next.cov
    mu = (mu_s
          - (snap.lambda_y @ mu_s + snap.f_y
             - b_rf_inv @ (filt.mean - mu_s)) * dt
          + ctx.obs_gain @ ((x_t - x_next) + (snap.lambda_x @ mu_s + snap.f_x) * dt))
    g = ctx.a_mat + b_rf_inv
    g_rs = g @ r_s
    r = r_s - (g_rs + g_rs.T - ctx.b_mat) * dt
    r = _clamp_cov(r, t)
    _check_blowup(r, t)
    return GaussianState(mean=mu, cov=r)


def discrete_smoother_step_oracle(model: CgnsModel, t, x_t, x_next,
                                  filt: GaussianState, smo_next: GaussianState,
                                  dt) -> GaussianState:
    """One-step smoother recursion in its discrete-derivation form.

    Uses the leading-order gain matrices E and F built from the filter
    statistics; serves as an independent cross-check for
    :func:`smoother_step` (they differ at O(dt^2) per step).
    """
    snap = evaluate(model, t, x_t)
    gr = gramians(snap, t=t)
    lam_x, lam_y = snap.lambda_x, snap.lambda_y
    r_f, mu_f = filt.cov, filt.mean
    lf = _filter_chol(r_f, t)
    lxx = spd_cholesky(gr.sxx, t=t)

    ident = np.eye(model.l)
    # (C22)_11 = R_f + (Lam_y R_f + R_f Lam_y^T + syy) dt, symmetric.
    m = symmetrize(r_f + (lam_y @ r_f + r_f @ lam_y.T + gr.syy) * dt)
    # RTS-style gain R_f (I + Lam_y dt)^T M^{-1}, computed via M Z = (I + Lam_y dt) R_f.
    c_jj = chol_solve(np.linalg.cholesky(m), (ident + lam_y * dt) @ r_f).T

    g_x = lam_x + chol_solve(lf, gr.sxy.T).T             # k x l
    sxx_inv = chol_solve(lxx, np.eye(model.k))
    k_mat = chol_solve(lxx, g_x)                         # k x l
    h_mat = chol_solve(lf, lam_y @ r_f + r_f @ lam_y.T + gr.syy)
    obs_gain = chol_solve(lxx, gr.sxy).T                 # l x k

    e_mat = c_jj + obs_gain @ g_x * dt
    krk = k_mat @ r_f @ k_mat.T                          # k x k
    f_mat = -r_f @ (k_mat.T
                    + (g_x.T @ krk - chol_solve(lf, h_mat.T @ r_f @ k_mat.T)
                       + lam_y.T @ k_mat.T) * dt
                    - lam_x.T @ (sxx_inv + krk * dt))

    mu_s, r_s = smo_next.mean, smo_next.cov
    mu = (mu_f
          + e_mat @ (mu_s - (ident + lam_y * dt) @ mu_f - snap.f_y * dt)
          + f_mat @ (x_next - x_t - (lam_x @ mu_f + snap.f_x) * dt))
    r = (r_f + e_mat @ (r_s @ e_mat.T - (ident + lam_y * dt) @ r_f)
         - f_mat @ lam_x @ r_f * dt)
    return GaussianState(mean=mu, cov=symmetrize(r))


def run_smoother(model: CgnsModel, traj_x, grid: TimeGrid,
                 filter_series: PosteriorSeries,
                 source_path_id: str = "") -> PosteriorSeries:
    """Backward pass over the whole window.

    The endpoint equals the filter endpoint exactly; earlier states come from
    the backward recursion.
    """
    if filter_series.kind is not SeriesKind.FILTER:
        raise ValueError("run_smoother needs a filter series")
    traj_x = np.asarray(traj_x, dtype=float).reshape(-1, model.k)
    J = grid.n_steps
    if len(filter_series) != J + 1 or len(traj_x) != J + 1:
        raise ValueError("grid, observed path, and filter series lengths disagree")
    means = np.empty_like(filter_series.means)
    covs = np.empty_like(filter_series.covs)
    means[J] = filter_series.means[J]
    covs[J] = filter_series.covs[J]
    state = filter_series.state(J)
    ctx = step_context(model, grid.t0, traj_x[0]) if model.constant else None
    for j in range(J - 1, -1, -1):
        state = smoother_step(model, grid.time(j), traj_x[j], traj_x[j + 1],
                              filter_series.state(j), state, grid.dt, ctx=ctx)
        means[j], covs[j] = state.mean, state.cov
    return PosteriorSeries(grid=grid, means=means, covs=covs,
                           kind=SeriesKind.SMOOTHER,
                           source_path_id=source_path_id)
