"""Euler-Maruyama truth simulation on a uniform time grid.

Coefficients are frozen at the left endpoint of each step (tagged-partition
convention), noise enters as sqrt(dt)-scaled standard normal draws, and every
path is a deterministic function of (model, initial state, grid, seed).
"""

from dataclasses import dataclass, field

import numpy as np

from . import rng
from .errors import NonFiniteState
from .model import CgnsModel, evaluate

#: Abort threshold on any state entry; legitimate states are O(1-10).
BLOWUP_LIMIT = 1e8


@dataclass(frozen=True)
class TimeGrid:
    """Uniform grid t_j = t0 + j*dt for j = 0..n_steps."""

    t0: float
    t_end: float
    dt: float
    n_steps: int = field(init=False)

    def __post_init__(self):
        if self.dt <= 0:
            raise ValueError(f"grid.dt must be > 0, got {self.dt}")
        if self.t_end < self.t0:
            raise ValueError("grid.t_end must be >= grid.t0")
        object.__setattr__(self, "n_steps", int(round((self.t_end - self.t0) / self.dt)))

    def times(self) -> np.ndarray:
        return self.t0 + self.dt * np.arange(self.n_steps + 1)

    def time(self, j: int) -> float:
        return self.t0 + j * self.dt


@dataclass(frozen=True)
class Trajectory:
    """One simulated path: x_path (J+1, k), y_path (J+1, l)."""

    grid: TimeGrid
    x_path: np.ndarray
    y_path: np.ndarray
    seed: int


def em_step(model: CgnsModel, t, x, y, dt, eps1, eps2):
    """One Euler-Maruyama step from (x, y) at time t.

    eps1 (d,) and eps2 (r,) are standard-normal draws. Returns the pair
    (x_next, y_next); raises :class:`NonFiniteState` on blow-up.
    """
    snap = evaluate(model, t, x)
    sq = np.sqrt(dt)
    x_next = (x + (snap.lambda_x @ y + snap.f_x) * dt
              + snap.sigma1_x @ eps1 * sq + snap.sigma2_x @ eps2 * sq)
    y_next = (y + (snap.lambda_y @ y + snap.f_y) * dt
              + snap.sigma1_y @ eps1 * sq + snap.sigma2_y @ eps2 * sq)
    if (not np.all(np.isfinite(x_next)) or not np.all(np.isfinite(y_next))
            or np.max(np.abs(x_next)) > BLOWUP_LIMIT
            or np.max(np.abs(y_next)) > BLOWUP_LIMIT):
        raise NonFiniteState(t)
    return x_next, y_next


def simulate_path(model: CgnsModel, x0, y0, grid: TimeGrid, seed,
                  member: int = 0) -> Trajectory:
    """Simulate one truth path, deterministic given (model, x0, y0, grid, seed).

    ``member`` selects the sub-seeded stream used by ensembles.
    """
    x0 = np.asarray(x0, dtype=float).reshape(model.k)
    y0 = np.asarray(y0, dtype=float).reshape(model.l)
    J = grid.n_steps
    x_path = np.empty((J + 1, model.k))
    y_path = np.empty((J + 1, model.l))
    x_path[0] = x0
    y_path[0] = y0
    gen = rng.generator(seed, "truth", member)
    x, y = x0, y0
    for j in range(J):
        eps1 = gen.standard_normal(model.d)
        eps2 = gen.standard_normal(model.r)
        try:
            x, y = em_step(model, grid.time(j), x, y, grid.dt, eps1, eps2)
        except NonFiniteState as err:
            raise NonFiniteState(err.t, member=member if member else None) from None
        x_path[j + 1] = x
        y_path[j + 1] = y
    return Trajectory(grid=grid, x_path=x_path, y_path=y_path, seed=seed)


def simulate_ensemble(model: CgnsModel, x0, y0, grid: TimeGrid, seed, m: int):
    """m independent truth paths; member i uses sub-seed (seed, i)."""
    if m < 1:
        raise ValueError("ensemble size m must be >= 1")
    return [simulate_path(model, x0, y0, grid, seed, member=i) for i in range(m)]


def trajectory_to_csv(traj: Trajectory, path):
    """Write `t,x_0..,y_0..` rows at full double precision."""
    k = traj.x_path.shape[1]
    l = traj.y_path.shape[1]
    header = ",".join(["t"] + [f"x_{i}" for i in range(k)] + [f"y_{i}" for i in range(l)])
    data = np.column_stack([traj.grid.times(), traj.x_path, traj.y_path])
    np.savetxt(path, data, fmt="%.17g", delimiter=",", header=header, comments="")


def trajectory_from_csv(path, dt=None) -> Trajectory:
    """Read a trajectory CSV written by :func:`trajectory_to_csv`.

    Column counts determine k and l from the header.
    """
    with open(path) as fh:
        header = fh.readline().strip().split(",")
    if header[0] != "t":
        raise ValueError(f"unexpected trajectory header in {path}: {header}")
    k = sum(1 for h in header if h.startswith("x_"))
    l = sum(1 for h in header if h.startswith("y_"))
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    times = data[:, 0]
    if dt is None:
        dt = times[1] - times[0] if len(times) > 1 else 1.0
    grid = TimeGrid(t0=float(times[0]), t_end=float(times[-1]), dt=float(dt))
    return Trajectory(grid=grid, x_path=data[:, 1:1 + k],
                      y_path=data[:, 1 + k:1 + k + l], seed=-1)
