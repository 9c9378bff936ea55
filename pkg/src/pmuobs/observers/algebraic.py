"""Instantaneous algebraic reconstruction of the load angle and the
quadrature-axis internal voltage from a single PMU sample.

No dynamic state and no initial conditions: each estimate is a closed-form
function of one measurement vector and the transient admittance magnitude.
Domain violations that can only arise from measurement noise (negative
radicands, arcsin arguments outside [-1, 1]) are clamped and flagged
rather than raised.

All functions accept scalars or equally-shaped numpy arrays.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from pmuobs.model import PmuSample


class InvalidSampleError(ValueError):
    """The sample violates a hard precondition (e.g. y1 <= 0)."""


class DegenerateEstimateError(ValueError):
    """The angle estimate is undefined (zero internal voltage)."""


@dataclass(frozen=True)
class AlgebraicEstimate:
    t: float
    x1_hat: float    # [rad], principal arcsin branch
    x3_hat: float    # [pu], >= 0
    clamped: bool    # any domain clamp fired


def _check_inputs(sample: PmuSample, Y) -> None:
    if np.any(np.asarray(Y) <= 0.0):
        raise InvalidSampleError("transient admittance Y must be positive")
    if np.any(np.asarray(sample.y1) <= 0.0):
        raise InvalidSampleError("terminal voltage measurement y1 must be positive")


def estimate_x3(sample: PmuSample, Y):
    """Internal voltage from reactive power and current magnitude.

    Returns ``(x3_hat, clamped)``.
    """
    _check_inputs(sample, Y)
    radicand = (sample.y4 ** 2 + 2.0 * Y * sample.y3) / Y**2 + sample.y1 ** 2
    clamped = radicand < 0.0
    x3_hat = np.sqrt(np.maximum(radicand, 0.0))
    return x3_hat, clamped


def estimate_x3_alt(sample: PmuSample, Y):
    """Internal voltage from active power and current magnitude.

    The underlying quadratic has two positive roots; which one equals the
    internal voltage depends on the sign of ``x3 cos(x1) - Vt``, which is
    the sign of the reactive power, so ``y3`` selects the branch.

    Returns ``(x3_hat, clamped)``.
    """
    _check_inputs(sample, Y)
    inner = Y**2 * (sample.y4 ** 2 * sample.y1 ** 2 - sample.y2 ** 2)
    clamped = inner < 0.0
    branch = np.where(np.asarray(sample.y3) >= 0.0, 1.0, -1.0)
    value = (sample.y4 ** 2 + Y**2 * sample.y1 ** 2
             + 2.0 * branch * np.sqrt(np.maximum(inner, 0.0))) / Y**2
    clamped = clamped | (value < 0.0)
    x3_hat = np.sqrt(np.maximum(value, 0.0))
    return x3_hat, clamped


def estimate_x1(sample: PmuSample, Y, x3_hat):
    """Load angle from active power, given an internal-voltage estimate.

    Restricted to the principal arcsin branch; arguments pushed outside
    [-1, 1] by noise are clamped and flagged. Returns ``(x1_hat, clamped)``.
    """
    _check_inputs(sample, Y)
    if np.any(np.asarray(x3_hat) <= 0.0):
        raise DegenerateEstimateError("x3 estimate is zero; load angle undefined")
    arg = sample.y2 / (Y * sample.y1 * x3_hat)
    clamped = np.abs(arg) > 1.0
    x1_hat = np.arcsin(np.clip(arg, -1.0, 1.0))
    return x1_hat, clamped


def estimate(sample: PmuSample, Y, method: str = "primary") -> AlgebraicEstimate:
    """Full (x1, x3) reconstruction for one sample."""
    if method == "primary":
        x3_hat, c3 = estimate_x3(sample, Y)
    elif method == "alt":
        x3_hat, c3 = estimate_x3_alt(sample, Y)
    else:
        raise ValueError(f"unknown algebraic method {method!r}")
    x1_hat, c1 = estimate_x1(sample, Y, x3_hat)
    return AlgebraicEstimate(
        t=sample.t,
        x1_hat=float(x1_hat),
        x3_hat=float(x3_hat),
        clamped=bool(c3) or bool(c1),
    )
