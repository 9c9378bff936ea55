"""Online identification of the mechanical parameter vector
``theta = (a1, a2, a2*Tm)`` from filtered regressor signals.

The construction runs at the PMU rate:

1. a second-order filter bank turns the raw streams (load-angle estimate,
   speed deviation, active power, unit step) into the scalar regression
   ``z = psi^T theta``;
2. a stable three-channel operator (identity / pure delay / lead-lag plus
   delay) extends the scalar regression to three equations ``Z = Psi theta``;
3. adjugate mixing decouples them into scalar problems
   ``calZ_j = Delta * theta_j`` with ``Delta = det(Psi)``;
4. each parameter integrates its own scalar gradient estimator, whose error
   obeys ``|err(t)| = exp(-gamma int Delta^2) |err(0)|``.

A classical vector gradient estimator over ``z = psi^T theta`` is kept as a
baseline for comparison; it needs persistent excitation, which normal grid
operation does not provide.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field

import numpy as np


def bank_derivative(s1, s2, u, lam):
    """State derivatives of the shared lambda^2/(p+lambda)^2 realization."""
    return s2, -2.0 * lam * s2 - lam * lam * s1 + u


def bank_outputs(s1, s2, u, lam):
    """Taps (F0, F1, F2): the filtered signal and its first two filtered
    derivatives."""
    lam2 = lam * lam
    return lam2 * s1, lam2 * s2, lam2 * (u - 2.0 * lam * s2 - lam2 * s1)


class FilterBank:
    """One filter chain. State is shared by all three taps."""

    def __init__(self, lam: float, u0: float = 0.0, matched: bool = False):
        if lam <= 0.0:
            raise ValueError("filter parameter lambda must be positive")
        self.lam = lam
        self.s1 = u0 / (lam * lam) if matched else 0.0
        self.s2 = 0.0

    def advance(self, u: float, dt: float, u_next: float | None = None) -> None:
        """RK4 step over one sample interval.

        With only ``u`` the input is held constant; passing ``u_next``
        reconstructs it linearly across the step (stage inputs at the
        endpoint samples and their midpoint), which removes the dominant
        sample-and-hold bias from the regression chain.
        """
        lam = self.lam
        u0 = u
        u1 = u if u_next is None else u_next
        um = 0.5 * (u0 + u1)
        s1, s2 = self.s1, self.s2
        a1, b1 = bank_derivative(s1, s2, u0, lam)
        a2, b2 = bank_derivative(s1 + 0.5 * dt * a1, s2 + 0.5 * dt * b1, um, lam)
        a3, b3 = bank_derivative(s1 + 0.5 * dt * a2, s2 + 0.5 * dt * b2, um, lam)
        a4, b4 = bank_derivative(s1 + dt * a3, s2 + dt * b3, u1, lam)
        self.s1 = s1 + (dt / 6.0) * (a1 + 2.0 * a2 + 2.0 * a3 + a4)
        self.s2 = s2 + (dt / 6.0) * (b1 + 2.0 * b2 + 2.0 * b3 + b4)

    def outputs(self, u: float):
        return bank_outputs(self.s1, self.s2, u, self.lam)


def filter_bank_step(bank: FilterBank, u: float, dt: float):
    """Advance one bank by dt and return its (F0, F1, F2) taps."""
    bank.advance(u, dt)
    return bank.outputs(u)


def build_regressor(x1_taps, w_taps, y2_taps, step_taps):
    """Assemble (z, psi) from the four banks' taps.

    ``w_taps`` is the bank driven by the speed deviation ``omega_t -
    omega_s``; its F1 tap equals the filtered derivative of ``omega_t``
    once transients settle.
    """
    z = x1_taps[2] + w_taps[1]
    psi = np.array([-x1_taps[1] - w_taps[0], -y2_taps[0], step_taps[0]])
    return z, psi


class _DelayLine:
    """Integer-sample delay with zero history before t = 0."""

    def __init__(self, samples: int):
        self.samples = samples
        self._buf = deque([0.0] * samples)

    def push(self, u: float) -> float:
        if self.samples == 0:
            return u
        self._buf.append(u)
        return self._buf.popleft()


class HOperator:
    """Stable single-input three-output operator.

    Channels: identity; pure delay ``d1``; lead-lag ``(s+k1)/(s+k2)``
    cascaded with delay ``d2``. Delays must be integer multiples of the
    sample interval. BIBO-stable for ``k2 > 0``.
    """

    def __init__(self, k1: float, k2: float, d1: float, d2: float, dt: float):
        if k2 <= 0.0:
            raise ValueError("lead-lag pole k2 must be positive for stability")
        if d1 < 0.0 or d2 < 0.0:
            raise ValueError("delays must be non-negative")
        self.k1, self.k2, self.dt = k1, k2, dt
        self._ring1 = _DelayLine(_delay_samples(d1, dt))
        self._ring2 = _DelayLine(_delay_samples(d2, dt))
        self._ll_state = 0.0
        self._prev_u: float | None = None

    def push(self, u: float) -> np.ndarray:
        """Feed the sample at the current tick; returns the three channels."""
        if self._prev_u is not None:
            self._advance_ll(self._prev_u, u)
        ll_out = u + (self.k1 - self.k2) * self._ll_state
        self._prev_u = u
        return np.array([u, self._ring1.push(u), self._ring2.push(ll_out)])

    def _advance_ll(self, u0: float, u1: float) -> None:
        # RK4 of xdot = -k2 x + u with the input interpolated across the step
        x, k2, dt = self._ll_state, self.k2, self.dt
        um = 0.5 * (u0 + u1)
        f = lambda xx, uu: -k2 * xx + uu
        a = f(x, u0)
        b = f(x + 0.5 * dt * a, um)
        c = f(x + 0.5 * dt * b, um)
        d = f(x + dt * c, u1)
        self._ll_state = x + (dt / 6.0) * (a + 2.0 * b + 2.0 * c + d)


def _delay_samples(d: float, dt: float) -> int:
    n = round(d / dt)
    if abs(n * dt - d) > 1e-9:
        raise ValueError(f"delay {d} s is not an integer multiple of dt={dt} s")
    return n


def apply_H(hop: HOperator, u: float) -> np.ndarray:
    """One tick of the extension operator on a scalar stream."""
    return hop.push(u)


def _det3(M):
    return (M[0, 0] * (M[1, 1] * M[2, 2] - M[1, 2] * M[2, 1])
            - M[0, 1] * (M[1, 0] * M[2, 2] - M[1, 2] * M[2, 0])
            + M[0, 2] * (M[1, 0] * M[2, 1] - M[1, 1] * M[2, 0]))


def _adjugate3(M):
    a, b, c = M[0]
    d, e, f = M[1]
    g, h, i = M[2]
    return np.array([
        [e * i - f * h, c * h - b * i, b * f - c * e],
        [f * g - d * i, a * i - c * g, c * d - a * f],
        [d * h - e * g, b * g - a * h, a * e - b * d],
    ])


def mix(Z: np.ndarray, Psi: np.ndarray):
    """Adjugate mixing: returns ``(calZ, Delta)`` with ``calZ = adj(Psi) Z``.

    Explicit cofactor formulas keep the result deterministic and exact for
    singular matrices (``Delta = 0`` is a valid, unexciting outcome).
    """
    Psi = np.asarray(Psi, dtype=float)
    Z = np.asarray(Z, dtype=float)
    return _adjugate3(Psi) @ Z, _det3(Psi)


def _rk4(f, y, dt):
    k1 = f(y)
    k2 = f(y + 0.5 * dt * k1)
    k3 = f(y + 0.5 * dt * k2)
    k4 = f(y + dt * k3)
    return y + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def drem_update(theta_hat, Delta, calZ, gamma, dt):
    """One RK4 step of the decoupled scalar estimators
    ``theta_j' = -gamma_j Delta (Delta theta_j - calZ_j)``."""
    theta_hat = np.asarray(theta_hat, dtype=float)
    gamma = np.asarray(gamma, dtype=float)
    calZ = np.asarray(calZ, dtype=float)
    return _rk4(lambda th: -gamma * Delta * (Delta * th - calZ), theta_hat, dt)


def gradient_update(theta_hat, psi, z, Gamma, dt):
    """Baseline vector gradient estimator over ``z = psi^T theta``.

    ``Gamma`` is a positive diagonal gain (given as a 3-vector).
    """
    theta_hat = np.asarray(theta_hat, dtype=float)
    psi = np.asarray(psi, dtype=float)
    Gamma = np.asarray(Gamma, dtype=float)
    if np.any(Gamma <= 0.0):
        raise ValueError("gradient gains must be positive")
    return _rk4(lambda th: -Gamma * psi * (psi @ th - z), theta_hat, dt)


@dataclass
class DremSnapshot:
    """Per-sample view of the estimator internals."""

    theta_hat: np.ndarray
    Delta: float
    calZ: np.ndarray
    Z: np.ndarray
    Psi: np.ndarray
    excitation: float
    z: float
    psi: np.ndarray


class _Conditioner:
    """Identical second-order low-pass applied to every regression input.

    The mechanical-subsystem relation is linear in the signals with
    constant coefficients, so filtering all of them (including the step
    input) by one common stable filter preserves the regression identity
    exactly while stripping wideband measurement noise before the
    regressor banks.
    """

    def __init__(self, beta: float):
        self.beta = beta
        self.s1 = 0.0
        self.s2 = 0.0

    def advance(self, u0: float, u1: float, dt: float) -> None:
        b = self.beta
        um = 0.5 * (u0 + u1)
        s1, s2 = self.s1, self.s2
        f = lambda a, c, uu: (b * (uu - a), b * (a - c))
        a1, c1 = f(s1, s2, u0)
        a2, c2 = f(s1 + 0.5 * dt * a1, s2 + 0.5 * dt * c1, um)
        a3, c3 = f(s1 + 0.5 * dt * a2, s2 + 0.5 * dt * c2, um)
        a4, c4 = f(s1 + dt * a3, s2 + dt * c3, u1)
        self.s1 = s1 + (dt / 6.0) * (a1 + 2.0 * a2 + 2.0 * a3 + a4)
        self.s2 = s2 + (dt / 6.0) * (c1 + 2.0 * c2 + 2.0 * c3 + c4)

    @property
    def out(self) -> float:
        return self.s2


@dataclass
class _Held:
    """Interval data carried from the previous sample: raw inputs and bank
    inputs for interpolation, mixing outputs for the estimator ODE."""

    raw: tuple
    bank_in: tuple
    Delta: float
    calZ: np.ndarray


class DremEstimator:
    """Full per-machine identification chain at the PMU rate.

    ``update`` is called once per sample; internal ODEs advance with the
    previous sample's values held (zero-order hold), matching the fixed
    sample clock shared by all channels.
    """

    def __init__(self, lam, gamma, k1, k2, d1, d2, dt, omega_s,
                 update_theta: bool = True, theta0=(0.0, 0.0, 0.0),
                 input_lpf: float | None = None):
        self.lam = lam
        self.gamma = np.asarray(gamma, dtype=float)
        if np.any(self.gamma <= 0.0):
            raise ValueError("adaptation gains must be positive")
        self.dt = dt
        self.omega_s = omega_s
        self.update_theta = update_theta
        self.banks = {name: FilterBank(lam) for name in ("x1", "w", "y2", "step")}
        self.hops = [HOperator(k1, k2, d1, d2, dt) for _ in range(4)]
        self.conditioners = None
        if input_lpf is not None and input_lpf > 0.0:
            self.conditioners = [_Conditioner(input_lpf) for _ in range(4)]
        self.theta_hat = np.asarray(theta0, dtype=float).copy()
        self.excitation = 0.0
        self._held: _Held | None = None
        self._excitation_mark = 0.0

    def update(self, x1_hat: float, omega_t: float, y2: float) -> DremSnapshot:
        dt = self.dt
        w = omega_t - self.omega_s
        raw = (x1_hat, w, y2, 1.0)
        held = self._held
        if held is not None:
            if self.conditioners is not None:
                for cond, u0, u1 in zip(self.conditioners, held.raw, raw):
                    cond.advance(u0, u1, dt)
            if self.update_theta:
                self.theta_hat = drem_update(self.theta_hat, held.Delta,
                                             held.calZ, self.gamma, dt)
            self.excitation += held.Delta ** 2 * dt

        if self.conditioners is not None:
            bank_in = tuple(c.out for c in self.conditioners)
        else:
            bank_in = raw
        if held is not None:
            for name, u0, u1 in zip(("x1", "w", "y2", "step"),
                                    held.bank_in, bank_in):
                self.banks[name].advance(u0, dt, u1)

        z, psi = build_regressor(
            self.banks["x1"].outputs(bank_in[0]),
            self.banks["w"].outputs(bank_in[1]),
            self.banks["y2"].outputs(bank_in[2]),
            self.banks["step"].outputs(bank_in[3]),
        )
        Z = self.hops[0].push(z)
        Psi = np.column_stack([self.hops[1 + j].push(psi[j]) for j in range(3)])
        calZ, Delta = mix(Z, Psi)
        self._held = _Held(raw=raw, bank_in=bank_in, Delta=Delta, calZ=calZ)
        return DremSnapshot(
            theta_hat=self.theta_hat.copy(),
            Delta=Delta,
            calZ=calZ,
            Z=Z,
            Psi=Psi,
            excitation=self.excitation,
            z=z,
            psi=psi,
        )

    def excitation_report(self):
        """Running excitation integral and whether it grew since the last
        report."""
        grew = self.excitation > self._excitation_mark
        self._excitation_mark = self.excitation
        return self.excitation, grew
