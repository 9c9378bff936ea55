"""Acceptance suite: one test per release criterion, each printing a
PASS/FAIL line with the measured figure against its stated tolerance.

Run with ``pytest tests/test_acceptance.py -v -s``.
"""

import dataclasses
import math
import time

import numpy as np
import pytest
from scipy import stats

from pmuobs.config import bundled_scenario_path, load_config
from pmuobs.metrics import error_decay_fit, smape
from pmuobs.model import measure
from pmuobs.observers.algebraic import estimate_x1, estimate_x3, estimate_x3_alt
from pmuobs.observers.drem import drem_update
from pmuobs.observers.iii import iii_init, iii_step_known
from pmuobs.observers.pipeline import estimate_trajectory
from pmuobs.simulator import (
    Fleet,
    NoiseConfig,
    equilibrium_from_internal,
    integrate,
    run_scenario,
    synthesize_pmu,
)
from tests.conftest import machine_truth

WS = 120.0 * math.pi


def verdict(name: str, ok: bool, detail: str) -> None:
    print(f"{'PASS' if ok else 'FAIL'}: {name} ({detail})")
    assert ok, f"{name}: {detail}"


# ---------------------------------------------------------------------------


def test_criterion_algebraic_exactness(scenario1_run):
    """Noisefree 3-machine load-variation scenario, 120 s:
    sMAPE(x1), sMAPE(x3) < 1e-8 %, runtime < 10 s."""
    cfg = load_config(bundled_scenario_path("scenario1_case1"))
    t0 = time.time()
    traj = run_scenario(cfg)
    est = estimate_trajectory(traj)
    runtime = time.time() - t0
    truth = machine_truth(traj, "G1")
    s1 = smape(est.column("G1", "x1_hat"), truth["x1"]).percent
    s3 = smape(est.column("G1", "x3_hat"), truth["x3"]).percent
    verdict(
        "algebraic-observer exactness",
        s1 < 1e-8 and s3 < 1e-8 and runtime < 10.0,
        f"sMAPE x1={s1:.2e}% x3={s3:.2e}%, runtime {runtime:.1f} s",
    )


def test_criterion_roundtrip_property_suite():
    """10^4 randomized states: both x3 reconstructions and the x1 recovery
    within 1e-10 relative; the two x3 methods agree within 1e-10."""
    rng = np.random.default_rng(2024)
    n = 10_000
    x1 = rng.uniform(-1.4, 1.4, n)
    x3 = rng.uniform(0.5, 1.5, n)
    vt = rng.uniform(0.9, 1.1, n)
    Y = rng.uniform(2.0, 10.0, n)
    sample = measure(x1, x3, vt, WS, Y)
    x3a, c_a = estimate_x3(sample, Y)
    x3b, c_b = estimate_x3_alt(sample, Y)
    x1h, c_1 = estimate_x1(sample, Y, x3a)
    rel3a = np.max(np.abs(x3a - x3) / x3)
    rel3b = np.max(np.abs(x3b - x3) / x3)
    agree = np.max(np.abs(x3a - x3b) / x3)
    rel1 = np.max(np.abs(x1h - x1) / np.maximum(np.abs(x1), 1e-6))
    ok = (rel3a < 1e-10 and rel3b < 1e-10 and agree < 1e-10 and rel1 < 1e-10
          and not (np.any(c_a) or np.any(c_b) or np.any(c_1)))
    verdict(
        "round-trip property suite",
        ok,
        f"max rel: x3={rel3a:.1e} x3alt={rel3b:.1e} agree={agree:.1e} x1={rel1:.1e}",
    )


def test_criterion_lemma1_error_law(scenario1_cfg):
    """Known-parameter speed observer on noiseless true signals: fitted
    decay rate equals -(a1+k) within 1% over 5 time constants."""
    cfg = scenario1_cfg
    net, params, S0, terms = equilibrium_from_internal(
        cfg.network, list(cfg.machines), np.array(cfg.x3_0), np.array(cfg.delta0))
    p = params[0]
    k = cfg.observer.k
    x1 = S0[0, 0] - terms[0].theta_t
    y2 = p.Tm
    st = iii_init(k, x1, x2_hat_0=1.0)  # x2 true is 0 at equilibrium
    dt = 1.0 / cfg.pmu_rate
    horizon = 5.0 / (p.a1 + k)
    n = int(horizon / dt)
    t = np.empty(n)
    err = np.empty(n)
    for i in range(n):
        st = iii_step_known(st, x1, p.omega_s, y2, p.a1, p.a2, p.Tm, p.omega_s, dt)
        t[i] = (i + 1) * dt
        err[i] = abs(st.x2_hat)
    rate = error_decay_fit(t, err)
    want = -(p.a1 + k)
    verdict(
        "Lemma-1 exponential error law",
        abs(rate - want) / abs(want) < 0.01,
        f"fitted rate {rate:.4f} vs -(a1+k) = {want:.4f}",
    )


def test_criterion_lemma2_error_law(scenario1_run):
    """Scalar estimators driven by a recorded determinant trace follow
    exp(-gamma int Delta^2) within 1e-4 relative (RK4 at 60 Hz)."""
    traj, est = scenario1_run
    Delta = est.column("G1", "Delta")
    theta_true = machine_truth(traj, "G1")["theta"]
    gamma = np.array([0.6e7, 1.5e7, 3.0e7])
    dt = 1.0 / traj.config.pmu_rate
    theta = np.zeros(3)
    M = Delta.shape[0]
    worst = 0.0
    integral = 0.0
    floor = 1e-9 * np.abs(theta_true)
    for k in range(M - 1):
        # ZOH convention: Delta_k acts over [t_k, t_{k+1})
        theta = drem_update(theta, Delta[k], Delta[k] * theta_true, gamma, dt)
        integral += Delta[k] ** 2 * dt
        got = np.abs(theta - theta_true)
        want = np.abs(theta_true) * np.exp(-gamma * integral)
        mask = want > floor
        if np.any(mask):
            worst = max(worst, float(np.max(
                np.abs(got[mask] - want[mask]) / want[mask])))
    verdict(
        "Lemma-2 exponential error law",
        worst < 1e-4,
        f"worst relative deviation {worst:.2e} over {M-1} samples",
    )


def test_criterion_regression_identity(scenario1_run):
    """Noiseless trajectory: |z - psi^T theta| < 1e-6 after 5/lambda
    seconds of filter settling."""
    traj, _ = scenario1_run
    i = traj.machine_names.index("G1")
    theta = machine_truth(traj, "G1")["theta"]
    reg = traj.truth_regressor[:, i, :]
    residual = np.abs(reg[:, 0] - reg[:, 1:] @ theta)
    lam = traj.config.observer.lam
    mask = traj.pmu_t >= 5.0 / lam
    worst = float(np.max(residual[mask]))
    verdict(
        "regression identity",
        worst < 1e-6,
        f"max |z - psi^T theta| = {worst:.2e} for t >= {5.0 / lam:.0f} s",
    )


def test_criterion_drem_convergence(scenario1_cfg):
    """Noisefree scenario with the published observer gains: every
    parameter within 1% by t = 50 s; excitation strictly increasing;
    runtime < 30 s."""
    t0 = time.time()
    traj = run_scenario(scenario1_cfg)
    est = estimate_trajectory(traj)
    runtime = time.time() - t0
    theta_true = machine_truth(traj, "G1")["theta"]
    theta = np.stack([est.column("G1", f"theta{j+1}") for j in range(3)], axis=1)
    k50 = np.searchsorted(est.t, 50.0)
    rel = np.abs(theta[k50] - theta_true) / np.abs(theta_true)
    exc = est.column("G1", "excitation")
    grows = all(
        exc[np.searchsorted(est.t, s + 5.0)] > exc[np.searchsorted(est.t, s)]
        for s in np.arange(10.0, 115.0, 5.0))
    ok = np.all(rel < 0.01) and grows and runtime < 30.0
    verdict(
        "DREM convergence under load variations",
        bool(ok),
        f"rel err at 50 s {np.max(rel):.2e}, excitation growing={grows}, "
        f"runtime {runtime:.1f} s",
    )


@pytest.mark.parametrize("kind", ["gaussian", "laplacian"])
def test_criterion_noisy_degradation_scenario1(kind):
    """45 dB noise, 10 seeds: sMAPE(x1) < 1%, sMAPE(x3) < 0.5%,
    sMAPE(x2) < 5% on the post-convergence window."""
    cfg = load_config(bundled_scenario_path("scenario1_case1"))
    cfg = dataclasses.replace(cfg, noise=NoiseConfig(kind=kind, snr_db=45.0))
    worst = {"x1": 0.0, "x3": 0.0, "x2": 0.0}
    for seed in range(1, 11):
        traj = run_scenario(dataclasses.replace(cfg, rng_seed=seed))
        est = estimate_trajectory(traj)
        truth = machine_truth(traj, "G1")
        worst["x1"] = max(worst["x1"],
                          smape(est.column("G1", "x1_hat"), truth["x1"]).percent)
        worst["x3"] = max(worst["x3"],
                          smape(est.column("G1", "x3_hat"), truth["x3"]).percent)
        worst["x2"] = max(worst["x2"],
                          smape(est.column("G1", "x2_hat"), truth["x2"],
                                t=est.t, window=(50.0, 120.0)).percent)
    ok = worst["x1"] < 1.0 and worst["x3"] < 0.5 and worst["x2"] < 5.0
    verdict(
        f"noisy degradation bounds, load variations ({kind})",
        ok,
        f"worst over 10 seeds: x1={worst['x1']:.3f}% x3={worst['x3']:.3f}% "
        f"x2={worst['x2']:.3f}%",
    )


@pytest.mark.parametrize("kind", ["gaussian", "laplacian"])
def test_criterion_noisy_degradation_scenario2(kind):
    """45 dB noise, 10 seeds: sMAPE(x2) < 20% over the fault transient."""
    cfg = load_config(bundled_scenario_path("scenario2_case1"))
    cfg = dataclasses.replace(cfg, noise=NoiseConfig(kind=kind, snr_db=45.0))
    worst = 0.0
    for seed in range(1, 11):
        traj = run_scenario(dataclasses.replace(cfg, rng_seed=seed))
        est = estimate_trajectory(traj)
        truth = machine_truth(traj, "G1")
        worst = max(worst, smape(est.column("G1", "x2_hat"), truth["x2"],
                                 t=est.t, window=(2.0, 3.5)).percent)
    verdict(
        f"noisy degradation bounds, short circuit ({kind})",
        worst < 20.0,
        f"worst sMAPE(x2) over 10 seeds: {worst:.3f}%",
    )


def test_criterion_noise_calibration():
    """10^5-sample Monte-Carlo per channel: empirical SNR 45 +/- 0.5 dB;
    Laplacian excess kurtosis 3 +/- 0.5."""
    M = 100_000
    clean = np.empty((M, 1, 5))
    clean[..., 0] = 1.02
    clean[..., 1] = 0.87
    clean[..., 2] = 0.33
    clean[..., 3] = 0.91
    clean[..., 4] = 60.02  # constant off-nominal frequency
    ref = clean.copy()
    ref[..., 4] -= 60.0
    results = []
    for kind in ("gaussian", "laplacian"):
        rng = np.random.default_rng(99)
        noise = synthesize_pmu(clean, NoiseConfig(kind=kind, snr_db=45.0),
                               rng, 60.0) - clean
        snr = 10.0 * np.log10(np.mean(ref[:, 0, :] ** 2, axis=0)
                              / np.mean(noise[:, 0, :] ** 2, axis=0))
        results.append((kind, snr, noise))
    snr_ok = all(np.all(np.abs(snr - 45.0) < 0.5) for _, snr, _ in results)
    lap_noise = results[1][2]
    kurt = np.array([stats.kurtosis(lap_noise[:, 0, ch]) for ch in range(5)])
    kurt_ok = np.all(np.abs(kurt - 3.0) < 0.5)
    verdict(
        "noise calibration",
        snr_ok and bool(kurt_ok),
        f"SNR range [{min(s.min() for _, s, _ in results):.2f}, "
        f"{max(s.max() for _, s, _ in results):.2f}] dB, "
        f"laplacian excess kurtosis {kurt.min():.2f}..{kurt.max():.2f}",
    )


def test_criterion_integrator_order(scenario1_cfg):
    """Trajectory error against a dt/8 reference shrinks by 14-18x when
    dt halves."""
    cfg = scenario1_cfg
    net, params, S0, terms = equilibrium_from_internal(
        cfg.network, list(cfg.machines), np.array(cfg.x3_0), np.array(cfg.delta0))
    fleet = Fleet(params)
    Sp = S0.copy()
    Sp[0, 1] += 0.4
    Sp[1, 1] -= 0.2

    def final(dt):
        _, states, _, _, _ = integrate(Sp, fleet, net, cfg.network, dt,
                                       round(1.0 / dt))
        return states[-1]

    ref = final(0.01 / 8.0)
    e1 = np.max(np.abs(final(0.01) - ref))
    e2 = np.max(np.abs(final(0.005) - ref))
    ratio = e1 / e2
    verdict(
        "integrator order of convergence",
        14.0 < ratio < 18.0 and e1 > 1e-11,
        f"error ratio {ratio:.2f} (e(dt)={e1:.2e})",
    )


def test_criterion_determinism(tmp_path):
    """Identical manifest and seed produce byte-identical CSV artifacts."""
    from pmuobs.cli import main as cli_main

    config = bundled_scenario_path("scenario2_case2")
    outs = []
    for run_dir in ("d1", "d2"):
        out = tmp_path / run_dir
        rc = cli_main(["run", "--config", str(config), "--out", str(out),
                       "--seed", "5"])
        assert rc == 0
        outs.append(out)
    identical = all(
        (outs[0] / n).read_bytes() == (outs[1] / n).read_bytes()
        for n in ("trajectory.csv", "pmu.csv", "estimates.csv"))
    verdict(
        "determinism of artifacts",
        identical,
        "trajectory/pmu/estimates CSVs byte-identical across reruns",
    )
