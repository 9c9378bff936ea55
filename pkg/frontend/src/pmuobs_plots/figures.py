"""Figure rendering: state-trace overlays and parameter-convergence panels."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from pmuobs_plots.io import load_machine_series, load_x2_window

_STATE_LABELS = {
    "x1": r"load angle $x_1$ [rad]",
    "x2": r"speed deviation $x_2$ [rad/s]",
    "x3": r"internal voltage $x_3$ [pu]",
}


@dataclass(frozen=True)
class FigureSpec:
    run_dir: Path          # directory holding trajectory.csv / estimates.csv
    machine: str
    out_path: Path
    states: tuple[str, ...] = ("x1", "x2", "x3")
    window: tuple[float, float] | None = None   # x-range restriction [s]


def _clip(t, *series, window):
    if window is None:
        return (t, *series)
    mask = (t >= window[0]) & (t <= window[1])
    return (t[mask], *(s[mask] for s in series))


def plot_states(spec: FigureSpec) -> Path:
    """Overlaid true and estimated state traces, one panel per state.

    The speed-estimate evaluation window from the run manifest is shaded.
    """
    run_dir = Path(spec.run_dir)
    truth = load_machine_series(run_dir / "trajectory.csv", spec.machine,
                                list(spec.states))
    est_cols = {"x1": "x1_hat", "x2": "x2_hat", "x3": "x3_hat"}
    est = load_machine_series(run_dir / "estimates.csv", spec.machine,
                              [est_cols[s] for s in spec.states])
    eval_window = load_x2_window(run_dir)

    fig, axes = plt.subplots(len(spec.states), 1, sharex=True,
                             figsize=(8, 2.4 * len(spec.states)))
    axes = np.atleast_1d(axes)
    for ax, state in zip(axes, spec.states):
        tt, yt = _clip(truth["t"], truth[state], window=spec.window)
        te, ye = _clip(est["t"], est[est_cols[state]], window=spec.window)
        ax.plot(tt, yt, lw=1.2, label="true")
        ax.plot(te, ye, lw=0.9, ls="--", label="estimate")
        if state == "x2" and eval_window is not None:
            ax.axvspan(*eval_window, alpha=0.12, color="gray",
                       label="evaluation window")
        ax.set_ylabel(_STATE_LABELS.get(state, state))
        ax.grid(alpha=0.3)
        ax.legend(loc="upper right", fontsize=8)
    axes[-1].set_xlabel("time [s]")
    fig.suptitle(f"state reconstruction, machine {spec.machine}")
    fig.tight_layout()
    out = Path(spec.out_path)
    fig.savefig(out, dpi=130)
    plt.close(fig)
    return out


def plot_parameters(spec: FigureSpec) -> Path:
    """Parameter-estimate convergence panels plus the excitation integral.

    The y-range of each parameter panel is clipped to [0.5, 1.5] times the
    final estimate so the convergence tail is readable.
    """
    run_dir = Path(spec.run_dir)
    cols = ["theta1_hat", "theta2_hat", "theta3_hat", "excitation"]
    est = load_machine_series(run_dir / "estimates.csv", spec.machine, cols)

    fig, axes = plt.subplots(4, 1, sharex=True, figsize=(8, 9))
    names = (r"$\hat\theta_1$ [1/s]", r"$\hat\theta_2$ [rad/(s$^2$pu)]",
             r"$\hat\theta_3$ [rad/s$^2$]")
    for j, ax in enumerate(axes[:3]):
        tt, yy = _clip(est["t"], est[cols[j]], window=spec.window)
        ax.plot(tt, yy, lw=1.0)
        final = yy[-1]
        ax.axhline(final, ls=":", lw=0.8, color="k")
        if final != 0.0:
            lo, hi = sorted((0.5 * final, 1.5 * final))
            ax.set_ylim(lo, hi)
        ax.set_ylabel(names[j])
        ax.grid(alpha=0.3)
    tt, exc = _clip(est["t"], est["excitation"], window=spec.window)
    axes[3].plot(tt, exc, lw=1.0)
    axes[3].set_ylabel(r"$\int \Delta^2\,dt$")
    axes[3].set_xlabel("time [s]")
    axes[3].grid(alpha=0.3)
    fig.suptitle(f"parameter identification, machine {spec.machine}")
    fig.tight_layout()
    out = Path(spec.out_path)
    fig.savefig(out, dpi=130)
    plt.close(fig)
    return out
