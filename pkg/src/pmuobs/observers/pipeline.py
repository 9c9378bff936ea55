"""Per-machine online estimation pipeline over a PMU sample stream.

Each machine is processed independently from its own terminal measurements
(the stack is decentralized by construction): algebraic reconstruction of
x1/x3, the identification chain, and the adaptive speed observer. Inputs
are held zero-order between samples.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from pmuobs.model import TWO_PI, PmuSample
from pmuobs.observers.algebraic import estimate_x1, estimate_x3, estimate_x3_alt
from pmuobs.observers.drem import DremEstimator
from pmuobs.observers.iii import iii_advance, iii_output
from pmuobs.simulator import ObserverSettings, Trajectory

ESTIMATE_COLUMNS = (
    "t", "machine_id", "x1_hat", "x3_hat", "clamped", "x2_hat",
    "theta1_hat", "theta2_hat", "theta3_hat", "Delta", "excitation",
)

# layout of EstimatesTable.data along the last axis
_FIELDS = ("x1_hat", "x3_hat", "clamped", "x2_hat",
           "theta1", "theta2", "theta3", "Delta", "excitation")


@dataclass
class EstimatesTable:
    t: np.ndarray                # (M,)
    machine_names: list[str]
    data: np.ndarray             # (M, n_observed, 9), fields as in _FIELDS

    def column(self, machine: str, name: str) -> np.ndarray:
        i = self.machine_names.index(machine)
        return self.data[:, i, _FIELDS.index(name)]


class MachineEstimator:
    """Online estimator for one machine's PMU stream."""

    def __init__(self, name: str, Y: float, omega_s: float,
                 settings: ObserverSettings, dt: float,
                 theta_known=None):
        self.name = name
        self.Y = Y
        self.omega_s = omega_s
        self.settings = settings
        self.dt = dt
        if settings.parameter_mode not in ("drem", "known"):
            raise ValueError(f"unknown parameter mode {settings.parameter_mode!r}")
        if settings.parameter_mode == "known":
            if theta_known is None:
                raise ValueError("parameter_mode='known' needs the true parameters")
            self.theta_known = np.asarray(theta_known, dtype=float)
        else:
            self.theta_known = None
        self.drem = DremEstimator(
            lam=settings.lam, gamma=settings.gamma,
            k1=settings.k1, k2=settings.k2, d1=settings.d1, d2=settings.d2,
            dt=dt, omega_s=omega_s,
            update_theta=settings.parameter_mode == "drem",
            input_lpf=settings.input_lpf,
        )
        self.xI: float | None = None
        self._prev: tuple | None = None  # (x1_hat, omega_t, y2, theta)

    def update(self, t: float, y: np.ndarray) -> np.ndarray:
        sample = PmuSample(t=t, y1=y[0], y2=y[1], y3=y[2], y4=y[3], y5=y[4])
        if self.settings.algebraic_method == "alt":
            x3_hat, c3 = estimate_x3_alt(sample, self.Y)
        else:
            x3_hat, c3 = estimate_x3(sample, self.Y)
        x1_hat, c1 = estimate_x1(sample, self.Y, x3_hat)
        x1_hat = float(x1_hat)
        x3_hat = float(x3_hat)
        clamped = bool(c3) or bool(c1)
        omega_t = TWO_PI * float(y[4])

        snap = self.drem.update(x1_hat, omega_t, float(y[1]))
        theta = self.theta_known if self.theta_known is not None else snap.theta_hat

        if self.xI is None:
            self.xI = -self.settings.k * x1_hat  # no speed prior: x2_hat(0) = 0
        else:
            px1, pw_t, py2, ptheta = self._prev
            self.xI = iii_advance(self.xI, self.settings.k, self.dt,
                                  px1, pw_t, py2, ptheta, self.omega_s,
                                  x1_next=x1_hat, omega_t_next=omega_t,
                                  y2_next=float(y[1]))
        x2_hat = iii_output(self.xI, self.settings.k, x1_hat)
        self._prev = (x1_hat, omega_t, float(y[1]), theta)

        return np.array([
            x1_hat, x3_hat, float(clamped), x2_hat,
            theta[0], theta[1], theta[2], snap.Delta, snap.excitation,
        ])


def estimate_trajectory(traj: Trajectory,
                        settings: ObserverSettings | None = None) -> EstimatesTable:
    """Run the estimation stack over a simulated trajectory's PMU stream."""
    settings = settings or traj.config.observer
    names = list(settings.machines) or list(traj.machine_names)
    indices = []
    for name in names:
        if name not in traj.machine_names:
            raise ValueError(f"observer configured for unknown machine {name!r}")
        indices.append(traj.machine_names.index(name))

    dt = 1.0 / traj.config.pmu_rate
    estimators = []
    for name, idx in zip(names, indices):
        p = traj.params[idx]
        theta_known = (p.a1, p.a2, p.a2 * p.Tm)
        estimators.append(MachineEstimator(
            name=name, Y=p.Y, omega_s=p.omega_s, settings=settings, dt=dt,
            theta_known=theta_known if settings.parameter_mode == "known" else None,
        ))

    M = traj.pmu.shape[0]
    data = np.empty((M, len(names), len(_FIELDS)))
    for k in range(M):
        t = float(traj.pmu_t[k])
        for j, (est, idx) in enumerate(zip(estimators, indices)):
            data[k, j] = est.update(t, traj.pmu[k, idx])
    return EstimatesTable(t=traj.pmu_t.copy(), machine_names=names, data=data)
