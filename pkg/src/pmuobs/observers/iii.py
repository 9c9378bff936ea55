"""Immersion-and-invariance observer for the relative shaft speed.

The estimate is the sum of a proportional term ``k * x1`` and an integrated
correction ``xI``; with known mechanical parameters the observation error
decays exactly as ``exp(-(a1 + k) t)``, and the certainty-equivalence
variant replaces the parameters by their online estimates.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class IiiState:
    xI: float       # integral component [rad/s]
    k: float        # observer gain [1/s]
    x2_hat: float   # current speed estimate [rad/s]


def iii_init(k: float, x1_0: float, x2_hat_0: float = 0.0) -> IiiState:
    """Start the observer with a chosen speed prior (default: none)."""
    if k <= 0.0:
        raise ValueError("observer gain k must be positive")
    xI = x2_hat_0 - k * x1_0
    return IiiState(xI=xI, k=k, x2_hat=x2_hat_0)


def _rk4_xi(xI, dt, rate, k, x1_3, forcing_3):
    """RK4 of xI' = -rate*(xI + k*x1(t)) + forcing(t), with the inputs
    given at (start, midpoint, end) of the step."""
    f = lambda x, stage: -rate * (x + k * x1_3[stage]) + forcing_3[stage]
    k1 = f(xI, 0)
    k2 = f(xI + 0.5 * dt * k1, 1)
    k3 = f(xI + 0.5 * dt * k2, 1)
    k4 = f(xI + dt * k3, 2)
    return xI + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def iii_advance(xI, k, dt, x1, omega_t, y2, theta, omega_s,
                x1_next=None, omega_t_next=None, y2_next=None):
    """Advance the integral state over one sample interval.

    ``theta`` is (theta1, theta2, theta3) = (a1, a2, a2*Tm) or its online
    estimate, held over the step. Inputs are held at their start values
    unless the next sample's values are also given, in which case they are
    interpolated linearly across the step.
    """
    rate = theta[0] + k
    if x1_next is None:
        x1_3 = (x1, x1, x1)
        w_3 = (omega_t - omega_s,) * 3
        y2_3 = (y2, y2, y2)
    else:
        x1_3 = (x1, 0.5 * (x1 + x1_next), x1_next)
        w_3 = (omega_t - omega_s, 0.5 * (omega_t + omega_t_next) - omega_s,
               omega_t_next - omega_s)
        y2_3 = (y2, 0.5 * (y2 + y2_next), y2_next)
    forcing_3 = tuple(k * w_3[j] - theta[1] * y2_3[j] + theta[2] for j in range(3))
    return _rk4_xi(xI, dt, rate, k, x1_3, forcing_3)


def iii_output(xI, k, x1):
    """Output identity x2_hat = xI + k*x1, memoryless in x1."""
    return xI + k * x1


def iii_step_known(state: IiiState, x1, omega_t, y2, a1, a2, Tm, omega_s, dt) -> IiiState:
    """One observer step with known mechanical parameters.

    Inputs are held constant over the step; the returned estimate is
    evaluated at the step end against the given ``x1``.
    """
    rate = a1 + state.k
    forcing = state.k * (omega_t - omega_s) + a2 * (Tm - y2)
    xI = _rk4_xi(state.xI, dt, rate, state.k, (x1, x1, x1), (forcing,) * 3)
    return IiiState(xI=xI, k=state.k, x2_hat=iii_output(xI, state.k, x1))


def iii_step_adaptive(state: IiiState, x1_hat, omega_t, y2, theta_hat, omega_s, dt) -> IiiState:
    """Certainty-equivalence step using online parameter estimates."""
    theta_hat = np.asarray(theta_hat, dtype=float)
    xI = iii_advance(state.xI, state.k, dt, x1_hat, omega_t, y2, theta_hat, omega_s)
    return IiiState(xI=xI, k=state.k, x2_hat=iii_output(xI, state.k, x1_hat))
