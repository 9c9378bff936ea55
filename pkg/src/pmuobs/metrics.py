"""Estimation-quality metrics and report tables."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class EmptyWindowError(ValueError):
    """No samples fall inside the requested evaluation window."""


@dataclass(frozen=True)
class SmapeResult:
    percent: float
    count: int       # pairs scored
    skipped: int     # degenerate pairs (both values zero)


def smape(est, truth, t=None, window=None) -> SmapeResult:
    """Symmetric mean absolute percentage error between aligned series.

    Pairs where both values are exactly zero cannot be scored (the
    denominator vanishes); they are skipped and tallied instead.
    """
    est = np.asarray(est, dtype=float)
    truth = np.asarray(truth, dtype=float)
    if est.shape != truth.shape:
        raise ValueError("series must be aligned on identical timestamps")
    if window is not None:
        if t is None:
            raise ValueError("a window needs the matching time vector")
        t = np.asarray(t, dtype=float)
        mask = (t >= window[0]) & (t <= window[1])
        est, truth = est[mask], truth[mask]
    if est.size == 0:
        raise EmptyWindowError("no samples in the evaluation window")
    denom = 0.5 * (np.abs(est) + np.abs(truth))
    ok = denom > 0.0
    skipped = int(np.count_nonzero(~ok))
    if not np.any(ok):
        return SmapeResult(percent=0.0, count=0, skipped=skipped)
    terms = np.abs(est[ok] - truth[ok]) / denom[ok]
    return SmapeResult(percent=100.0 * float(np.mean(terms)),
                       count=int(np.count_nonzero(ok)), skipped=skipped)


def error_decay_fit(t, err, window=None) -> float:
    """Least-squares slope of log|error| against time.

    Raises if any magnitude in the fit window is non-positive (the decay
    law is only meaningful for strictly positive errors).
    """
    t = np.asarray(t, dtype=float)
    err = np.asarray(err, dtype=float)
    if window is not None:
        mask = (t >= window[0]) & (t <= window[1])
        t, err = t[mask], err[mask]
    if t.size < 2:
        raise EmptyWindowError("need at least two samples to fit a rate")
    mag = np.abs(err)
    if np.any(mag <= 0.0):
        raise ValueError("error magnitudes must be strictly positive in the window")
    slope, _ = np.polyfit(t, np.log(mag), 1)
    return float(slope)


@dataclass(frozen=True)
class ReportRow:
    machine: str
    state: str
    window: tuple[float, float]
    smape_percent: float
    count: int


def render_report(rows: list[ReportRow], title: str) -> str:
    """Aligned plain-text table of per-state sMAPE values."""
    lines = [title, ""]
    header = f"{'machine':<10} {'state':<6} {'window [s]':<18} {'sMAPE [%]':>12} {'samples':>9}"
    lines.append(header)
    lines.append("-" * len(header))
    for r in rows:
        win = f"{r.window[0]:.2f}..{r.window[1]:.2f}"
        lines.append(
            f"{r.machine:<10} {r.state:<6} {win:<18} {r.smape_percent:>12.6f} {r.count:>9d}"
        )
    lines.append("")
    return "\n".join(lines)
