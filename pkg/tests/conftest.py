"""Shared fixtures: the expensive case-study runs are computed once per
session and reused by the module and acceptance tests."""

import numpy as np
import pytest

import cgns
from cgns.filtering import run_filter
from cgns.sampler import run_backward_sampler
from cgns.simulate import TimeGrid, simulate_path
from cgns.smoothing import run_smoother

CASE_SEED = 42


@pytest.fixture(scope="session")
def triad_model():
    return cgns.build_model("triad")


@pytest.fixture(scope="session")
def case_study(triad_model):
    """Default case-study run: truth, filter, smoother on [0, 60], dt=1e-3."""
    grid = TimeGrid(0.0, 60.0, 1e-3)
    traj = simulate_path(triad_model, [0.0], [0.0, 0.0], grid, seed=CASE_SEED)
    filt = run_filter(triad_model, traj.x_path, grid)
    smo = run_smoother(triad_model, traj.x_path, grid, filt)
    return {"grid": grid, "traj": traj, "filt": filt, "smo": smo,
            "seed": CASE_SEED}


@pytest.fixture(scope="session")
def backward_ensemble_1k(triad_model, case_study):
    """m=1000 backward-sampled trajectories on the case-study run."""
    return run_backward_sampler(triad_model, case_study["traj"].x_path,
                                case_study["grid"], case_study["filt"],
                                seed=CASE_SEED, m=1000)


@pytest.fixture(scope="session")
def short_triad_run(triad_model):
    """Cheap 3-time-unit triad run for module-level tests."""
    grid = TimeGrid(0.0, 3.0, 1e-3)
    traj = simulate_path(triad_model, [0.0], [0.0, 0.0], grid, seed=7)
    filt = run_filter(triad_model, traj.x_path, grid)
    smo = run_smoother(triad_model, traj.x_path, grid, filt)
    return {"grid": grid, "traj": traj, "filt": filt, "smo": smo, "seed": 7}
