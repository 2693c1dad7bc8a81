"""Forward optimal nonlinear filter.

Given an observed x path, the posterior of the hidden variables is exactly
Gaussian; its mean and covariance evolve by a gain-weighted innovation update
and a Riccati equation, stepped here with explicit Euler and coefficients
frozen at the left endpoint of each interval.
"""

import enum
import warnings
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import CovarianceBlowup
from .linalg import TOL_PSD, symmetrize
from .model import CgnsModel, StepContext, auxiliary, evaluate, gramians, step_context
from .simulate import TimeGrid

#: Abort threshold on trace of a posterior covariance.
COV_BLOWUP_LIMIT = 1e8


class SeriesKind(enum.Enum):
    FILTER = "filter"
    SMOOTHER = "smoother"


@dataclass(frozen=True)
class GaussianState:
    """Posterior mean (l,) and covariance (l, l) at one time instant."""

    mean: np.ndarray
    cov: np.ndarray


@dataclass(frozen=True)
class PosteriorSeries:
    """Gaussian posterior statistics on a time grid.

    means has shape (J+1, l) and covs (J+1, l, l); storage is array-based so
    long runs stay cheap, with :meth:`state` giving the value-object view.
    """

    grid: TimeGrid
    means: np.ndarray
    covs: np.ndarray
    kind: SeriesKind
    source_path_id: str = ""

    def state(self, j: int) -> GaussianState:
        return GaussianState(mean=self.means[j], cov=self.covs[j])

    @property
    def states(self):
        return [self.state(j) for j in range(len(self.means))]

    def __len__(self):
        return len(self.means)


def default_init(l: int) -> GaussianState:
    """Documented default initialization: zero mean, 0.01*I covariance."""
    return GaussianState(mean=np.zeros(l), cov=0.01 * np.eye(l))


def _clamp_cov(r, t, warn=True):
    """Symmetrize and clamp a covariance to PSD within the tolerance.

    A Gershgorin bound skips the eigendecomposition when the matrix is safely
    PSD; a genuinely negative eigenvalue is clamped to zero with a warning.
    """
    r = symmetrize(r)
    diag = np.diag(r)
    gersh = np.min(diag - (np.sum(np.abs(r), axis=1) - np.abs(diag)))
    if gersh >= 0.0:
        return r
    w, v = np.linalg.eigh(r)
    if w[0] >= 0.0:
        return r
    if warn and w[0] < -TOL_PSD:
        warnings.warn(f"clamping filter covariance to PSD at t={t} "
                      f"(min eigenvalue {w[0]:.3e})", RuntimeWarning)
    return symmetrize((v * np.clip(w, 0.0, None)) @ v.T)


def _check_blowup(r, t):
    tr = float(np.trace(r))
    if not np.isfinite(tr) or tr > COV_BLOWUP_LIMIT:
        raise CovarianceBlowup(t, tr)


def filter_step(model: CgnsModel, t, x_j, x_next, state: GaussianState,
                dt, ctx: Optional[StepContext] = None) -> GaussianState:
    """Advance the filter statistics by one step.

    Coefficients are evaluated at (t, x_j); the innovation is the observed
    increment minus its predicted drift. A precomputed ``ctx`` for (t, x_j)
    may be supplied to skip the coefficient work (constant models hoist it).
    """
    if ctx is None:
        ctx = step_context(model, t, x_j)
    snap, gr = ctx.snap, ctx.gr
    mu, r = state.mean, state.cov
    k_gain = ctx.kalman_gain(r)
    innovation = x_next - x_j - (snap.lambda_x @ mu + snap.f_x) * dt
    mu_next = mu + (snap.lambda_y @ mu + snap.f_y) * dt + k_gain @ innovation
    lam_y_r = snap.lambda_y @ r
    r_next = r + (lam_y_r + lam_y_r.T + gr.syy
                  - k_gain @ (gr.sxy + snap.lambda_x @ r)) * dt
    r_next = _clamp_cov(r_next, t)
    _check_blowup(r_next, t)
    return GaussianState(mean=mu_next, cov=r_next)


def filter_step_alternative_mean(model: CgnsModel, t, x_j, x_next,
                                 state: GaussianState, dt) -> np.ndarray:
    """Mean update in the equivalent damped form.

    The damping (A - R*Gamma) applied to the mean plus a gain on the raw
    observed increment is algebraically identical to the innovation form;
    kept as a cross-check and for diagnostics of the mean's stability.
    """
    snap = evaluate(model, t, x_j)
    gr = gramians(snap, t=t)
    mu, r = state.mean, state.cov
    aux = auxiliary(snap, gr, r_f=r, t=t)
    damp = aux.a_mat - r @ aux.gamma
    return (mu + (damp @ mu + snap.f_y) * dt
            + aux.kalman_gain @ (x_next - x_j - snap.f_x * dt))


def run_filter(model: CgnsModel, traj_x, grid: TimeGrid,
               init: Optional[GaussianState] = None,
               source_path_id: str = "") -> PosteriorSeries:
    """Sequential filter pass over an observed path of length J+1."""
    traj_x = np.asarray(traj_x, dtype=float).reshape(-1, model.k)
    J = grid.n_steps
    if len(traj_x) != J + 1:
        raise ValueError(f"observed path has {len(traj_x)} rows, grid wants {J + 1}")
    if init is None:
        init = default_init(model.l)
    means = np.empty((J + 1, model.l))
    covs = np.empty((J + 1, model.l, model.l))
    state = GaussianState(mean=np.asarray(init.mean, float).reshape(model.l),
                          cov=symmetrize(np.asarray(init.cov, float)))
    means[0], covs[0] = state.mean, state.cov
    ctx = step_context(model, grid.t0, traj_x[0]) if model.constant else None
    for j in range(J):
        state = filter_step(model, grid.time(j), traj_x[j], traj_x[j + 1],
                            state, grid.dt, ctx=ctx)
        means[j + 1], covs[j + 1] = state.mean, state.cov
    return PosteriorSeries(grid=grid, means=means, covs=covs,
                           kind=SeriesKind.FILTER, source_path_id=source_path_id)


def series_to_csv(series: PosteriorSeries, path):
    """Write `t,mu_0..,R_00,R_01,..,kind` rows (upper triangle, row-major)."""
    l = series.means.shape[1]
    iu = np.triu_indices(l)
    cols = (["t"] + [f"mu_{i}" for i in range(l)]
            + [f"R_{i}{j}" for i, j in zip(*iu)] + ["kind"])
    times = series.grid.times()
    kind = series.kind.value
    with open(path, "w") as fh:
        fh.write(",".join(cols) + "\n")
        for j in range(len(series)):
            nums = [times[j], *series.means[j], *series.covs[j][iu]]
            fh.write(",".join("%.17g" % v for v in nums) + f",{kind}\n")


def series_from_csv(path, dt=None) -> PosteriorSeries:
    """Read a posterior series CSV written by :func:`series_to_csv`."""
    with open(path) as fh:
        header = fh.readline().strip().split(",")
        rows = [line.strip().split(",") for line in fh if line.strip()]
    l = sum(1 for h in header if h.startswith("mu_"))
    iu = np.triu_indices(l)
    kind = SeriesKind(rows[0][-1])
    data = np.array([[float(v) for v in row[:-1]] for row in rows])
    times = data[:, 0]
    if dt is None:
        dt = times[1] - times[0] if len(times) > 1 else 1.0
    grid = TimeGrid(t0=float(times[0]), t_end=float(times[-1]), dt=float(dt))
    means = data[:, 1:1 + l]
    covs = np.empty((len(rows), l, l))
    covs[:, iu[0], iu[1]] = data[:, 1 + l:]
    covs[:, iu[1], iu[0]] = data[:, 1 + l:]
    return PosteriorSeries(grid=grid, means=means, covs=covs, kind=kind)
