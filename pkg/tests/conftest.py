"""Shared fixtures: the bundled desk-scale test system and cached scenario
runs used by several test modules."""

import numpy as np
import pytest

from pmuobs.config import bundled_scenario_path, load_config
from pmuobs.observers.pipeline import estimate_trajectory
from pmuobs.simulator import run_scenario


@pytest.fixture(scope="session")
def scenario1_cfg():
    return load_config(bundled_scenario_path("scenario1_case1"))


@pytest.fixture(scope="session")
def scenario2_cfg():
    return load_config(bundled_scenario_path("scenario2_case1"))


@pytest.fixture(scope="session")
def scenario1_run(scenario1_cfg):
    """Noisefree load-variation run with the truth-driven regressor tap."""
    traj = run_scenario(scenario1_cfg, truth_tap=True)
    est = estimate_trajectory(traj)
    return traj, est


@pytest.fixture(scope="session")
def scenario2_run(scenario2_cfg):
    traj = run_scenario(scenario2_cfg)
    est = estimate_trajectory(traj)
    return traj, est


def machine_truth(traj, name):
    """Truth series at the PMU instants for one machine."""
    i = traj.machine_names.index(name)
    ks = traj.pmu_steps
    return {
        "x1": traj.states[ks, i, 0],
        "x2": traj.states[ks, i, 1],
        "x3": traj.states[ks, i, 2],
        "Vt": traj.terminals[ks, i, 0],
        "omega_t": traj.terminals[ks, i, 2],
        "theta": np.array([traj.params[i].a1, traj.params[i].a2,
                           traj.params[i].a2 * traj.params[i].Tm]),
    }
