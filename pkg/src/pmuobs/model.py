"""Flux-decay generator model, AVR/PSS controller, stator algebra and the
PMU measurement map.

Every function here is pure and accepts either scalars or numpy arrays
(all expressions are ufunc-based), so the simulator can evaluate one
machine or the whole fleet with the same code.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from pmuobs.params import GeneratorParams

TWO_PI = 2.0 * np.pi


@dataclass(frozen=True)
class MachineState:
    """Dynamic state of one 9-state machine."""

    x1: float   # load angle delta - theta_t [rad]
    x2: float   # relative shaft speed omega - omega_s [rad/s]
    x3: float   # quadrature-axis internal voltage [pu]
    Vf: float   # AVR transducer state [pu]
    q: float    # AVR lead-lag state [pu]
    Ef: float   # field voltage [pu]
    p1: float   # PSS states [pu]
    p2: float
    p3: float


@dataclass(frozen=True)
class TerminalSignals:
    """Terminal-bus quantities seen by one machine."""

    Vt: float       # terminal voltage magnitude [pu]
    theta_t: float  # terminal voltage phase angle [rad]
    omega_t: float  # terminal voltage speed [rad/s]


@dataclass(frozen=True)
class PmuSample:
    """One timestamped PMU measurement vector."""

    t: float
    y1: float   # terminal voltage magnitude [pu]
    y2: float   # active power [pu]
    y3: float   # reactive power [pu]
    y4: float   # current magnitude [pu]
    y5: float   # frequency [Hz]


def stator_currents(x1, x3, Vt, Y):
    """d/q stator currents behind the transient reactance.

    Returns ``(Itd, Itq)``.
    """
    Itq = Y * Vt * np.sin(x1)
    Itd = Y * (x3 - Vt * np.cos(x1))
    return Itd, Itq


def electrical_power(x1, x3, Vt, Y):
    """Terminal active power, which also approximates the air-gap torque."""
    return Y * Vt * x3 * np.sin(x1)


def measure(x1, x3, Vt, omega_t, Y, t=0.0) -> PmuSample:
    """Noiseless PMU measurement vector at the generator terminal."""
    sin_x1 = np.sin(x1)
    cos_x1 = np.cos(x1)
    y2 = Y * Vt * x3 * sin_x1
    y3 = Y * (Vt * x3 * cos_x1 - Vt * Vt)
    # radicand is |E' - V|^2 >= 0; clip guards float cancellation at x1=0, x3=Vt
    radicand = x3 * x3 + Vt * Vt - 2.0 * Vt * x3 * cos_x1
    y4 = Y * np.sqrt(np.maximum(radicand, 0.0))
    y5 = omega_t / TWO_PI
    return PmuSample(t=t, y1=Vt, y2=y2, y3=y3, y4=y4, y5=y5)


def generator_derivatives(s: MachineState, p: GeneratorParams, term: TerminalSignals):
    """Time derivatives of the electromechanical states (x1, x2, x3)."""
    dx1 = s.x2 - term.omega_t + p.omega_s
    dx2 = -p.a1 * s.x2 + p.a2 * (p.Tm - electrical_power(s.x1, s.x3, term.Vt, p.Y))
    dx3 = -p.a3 * s.x3 + p.a4 * term.Vt * np.cos(s.x1) + s.Ef / p.Td0p
    return dx1, dx2, dx3


def pss_output(s: MachineState, p: GeneratorParams):
    """Stabilizer contribution added to the AVR voltage error."""
    return s.p1 + p.c3 * s.x2


def controller_derivatives(s: MachineState, p: GeneratorParams, Vt):
    """Time derivatives of the AVR and PSS states.

    The AVR is a transducer + lead-lag + first-order amplifier chain acting
    on the voltage error ``Vref - Vf + Vpss``; the PSS is a third-order
    block driven by the shaft speed deviation.
    """
    Vpss = pss_output(s, p)
    u = p.Vref - s.Vf + Vpss
    dVf = (Vt - s.Vf) / p.TR
    dq = ((1.0 - p.TC / p.TB) * u - s.q) / p.TB
    dEf = (p.KA * (s.q + (p.TC / p.TB) * u) - s.Ef) / p.TA
    dp1 = -p.c1 * s.p1 + s.p2 + (p.c4 - p.c1 * p.c3) * s.x2
    dp2 = -p.c2 * s.p1 + s.p3 + (p.c5 - p.c2 * p.c3) * s.x2
    dp3 = -s.p1 - p.c1 * p.c3 * s.x2
    return dVf, dq, dEf, dp1, dp2, dp3


def machine_derivatives(s: MachineState, p: GeneratorParams, term: TerminalSignals):
    """Full 9-state derivative vector of one machine."""
    dx1, dx2, dx3 = generator_derivatives(s, p, term)
    dVf, dq, dEf, dp1, dp2, dp3 = controller_derivatives(s, p, term.Vt)
    return np.array([dx1, dx2, dx3, dVf, dq, dEf, dp1, dp2, dp3])
