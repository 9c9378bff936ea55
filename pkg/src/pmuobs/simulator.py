"""Fixed-step simulation of the coupled machine/network system.

The integrated state per machine is ``(delta, x2, x3, Vf, q, Ef, p1, p2,
p3)`` where ``delta`` is the rotor angle in the synchronously rotating
frame. The load angle ``x1 = delta - theta_t`` and the terminal voltage
speed are derived from the network solve at every stage (the terminal
phasor is linear in the internal phasors, so its angle rate is available
in closed form), and the model equations hold exactly along the
trajectory.

Noise is applied to PMU samples only, never to the integrated truth.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from pmuobs.model import TWO_PI, MachineState, TerminalSignals, machine_derivatives
from pmuobs.network import (
    KronBuilder,
    NetworkSpec,
    ReducedNetwork,
    make_reduced,
    solve_phasors,
    wrap_angle,
)
from pmuobs.params import GeneratorParams, RawGeneratorParams, derive_coefficients


class SimulationError(RuntimeError):
    """Simulation could not proceed (bad event, diverged state, ...)."""


# ---------------------------------------------------------------------------
# configuration containers
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class NoiseConfig:
    kind: str = "none"          # none | gaussian | laplacian
    snr_db: float = 45.0
    # y5 is a ~60 Hz DC channel; its SNR is referenced to the power of the
    # deviation from nominal frequency unless configured otherwise.
    y5_reference: str = "deviation"  # deviation | power


@dataclass(frozen=True)
class LoadWalk:
    """Seeded random walk of load-admittance multipliers.

    Each selected load walks independently (redistributing power between
    buses), and the per-step multipliers are renormalized so the
    p-weighted total follows a separate, smaller common-mode walk. The
    redistribution excites angles and flows while the common component
    alone moves system frequency, so the two amplitudes calibrate
    excitation and the frequency band independently.
    """

    enabled: bool = False
    interval: float = 1.0       # seconds between steps
    sigma: float = 0.02         # std-dev of one per-load multiplier step
    max_dev: float = 0.08       # reflecting bounds 1 +/- max_dev per load
    sigma_common: float = 0.01  # std-dev of the common-mode step
    max_dev_common: float = 0.02
    buses: tuple[str, ...] = () # empty = all loads


@dataclass(frozen=True)
class LoadVariation:
    """Continuous seeded load fluctuation (sum of random-phase tones).

    Each selected load's admittance is modulated by an independent
    multisine plus a shared common-mode multisine, faded in smoothly so the
    run starts at the exact equilibrium. Continuous variation keeps the
    terminal-angle trajectories smooth, which step changes would not
    (each admittance step makes the terminal angles jump and leaves
    impulsive content a sampled regressor cannot represent).
    """

    enabled: bool = False
    amplitude: float = 0.08     # rms of one load's relative modulation
    common_amplitude: float = 0.012
    common_offset: float = 0.0  # sustained total-load offset (off-nominal frequency)
    f_min: float = 0.02         # tone band [Hz]
    f_max: float = 0.4
    n_tones: int = 8
    fade_in: float = 5.0        # seconds to full amplitude
    buses: tuple[str, ...] = ()


@dataclass(frozen=True)
class Event:
    time: float
    kind: str                   # fault_on | fault_off | load_scale
    payload: dict = field(default_factory=dict)


@dataclass(frozen=True)
class ObserverSettings:
    machines: tuple[str, ...] = ()
    k: float = 1.0
    lam: float = 0.5
    gamma: tuple[float, float, float] = (1.5e7, 1.5e7, 1.5e7)
    k1: float = 6.0
    k2: float = 4.0
    d1: float = 4.0
    d2: float = 1.0
    algebraic_method: str = "primary"   # primary | alt
    parameter_mode: str = "drem"        # drem | known
    # identical low-pass (rad/s) on all identification inputs; 0 disables.
    # Conditions the regression against wideband measurement noise without
    # breaking the identity (the relation is linear in the signals).
    input_lpf: float = 3.0


@dataclass(frozen=True)
class ReportSettings:
    # evaluation window for the speed estimate; None = full run
    x2_window: tuple[float, float] | None = None


@dataclass(frozen=True)
class ScenarioConfig:
    machines: tuple[RawGeneratorParams, ...]
    network: NetworkSpec
    x3_0: tuple[float, ...]
    delta0: tuple[float, ...]
    t_end: float = 10.0
    dt_sim: float = 1.0 / 960.0
    pmu_rate: float = 60.0
    rng_seed: int = 0
    noise: NoiseConfig = NoiseConfig()
    events: tuple[Event, ...] = ()
    load_walk: LoadWalk = LoadWalk()
    load_variation: LoadVariation = LoadVariation()
    observer: ObserverSettings = ObserverSettings()
    report: ReportSettings = ReportSettings()
    label: str = "scenario"


@dataclass
class Trajectory:
    """Simulated truth plus the synthesized PMU stream."""

    t: np.ndarray                   # (ns+1,)
    machine_names: list[str]
    states: np.ndarray              # (ns+1, n, 9): x1 x2 x3 Vf q Ef p1 p2 p3
    delta: np.ndarray               # (ns+1, n)
    terminals: np.ndarray           # (ns+1, n, 3): Vt theta_t omega_t
    pmu_t: np.ndarray               # (M,)
    pmu_steps: np.ndarray           # (M,) indices into the grid
    pmu_clean: np.ndarray           # (M, n, 5)
    pmu: np.ndarray                 # (M, n, 5) with measurement noise
    params: list[GeneratorParams]
    config: ScenarioConfig
    truth_regressor: np.ndarray | None = None   # (M, n, 4): z psi1 psi2 psi3


# ---------------------------------------------------------------------------
# vectorized fleet dynamics
# ---------------------------------------------------------------------------

_STATE_COLS = 9   # delta x2 x3 Vf q Ef p1 p2 p3
_TAP_COLS = 8     # two filter states for each of (x1, w, y2, step) inputs


class Fleet:
    """Struct-of-arrays view of the machine parameters."""

    def __init__(self, params: list[GeneratorParams]):
        omega = {p.omega_s for p in params}
        if len(omega) != 1:
            raise SimulationError("all machines must share one synchronous speed")
        self.params = list(params)
        self.omega_s = params[0].omega_s
        for name in ("a1", "a2", "a3", "a4", "Y", "Td0p", "TR", "TB", "TC",
                     "TA", "KA", "c1", "c2", "c3", "xdp"):
            setattr(self, name, np.array([getattr(p, name) for p in params]))
        if any(p.Tm is None or p.Vref is None for p in params):
            raise SimulationError("operating point (Tm, Vref) not initialized")
        self.Tm = np.array([p.Tm for p in params])
        self.Vref = np.array([p.Vref for p in params])
        self.k4 = np.array([p.c4 - p.c1 * p.c3 for p in params])
        self.k5 = np.array([p.c5 - p.c2 * p.c3 for p in params])
        self.c13 = self.c1 * self.c3
        self.tc_tb = self.TC / self.TB
        self.n = len(params)

    @property
    def theta_true(self) -> np.ndarray:
        """True identification targets (a1, a2, a2*Tm) per machine."""
        return np.stack([self.a1, self.a2, self.a2 * self.Tm], axis=1)


def _derivatives(S, fleet: Fleet, Ymat, tap_lam=None, Ymat_dot=None):
    """Right-hand side of the coupled ODE plus algebraic outputs.

    The terminal phasor is linear in the internal phasors, so its angle
    rate (the terminal voltage speed) is computed analytically from the
    state derivatives (plus the network-drift term when the coupling
    matrix itself moves); the model equation x1' = x2 - omega_t + omega_s
    then holds exactly along the trajectory.

    Returns ``(dS, (Vt, theta, omega_t, x1, Pe))``. Pure function.
    """
    delta = S[:, 0]
    x2 = S[:, 1]
    x3 = S[:, 2]
    Vf = S[:, 3]
    q = S[:, 4]
    Ef = S[:, 5]
    p1 = S[:, 6]
    p2 = S[:, 7]
    p3 = S[:, 8]

    rot = np.exp(1j * delta)
    E = x3 * rot
    I = Ymat @ E
    V = E - 1j * fleet.xdp * I
    Vt = np.abs(V)
    x1 = wrap_angle(delta - np.angle(V))
    theta = delta - x1  # continuous because delta is a continuous state
    sin1 = np.sin(x1)
    cos1 = np.cos(x1)
    Pe = fleet.Y * Vt * x3 * sin1

    Vpss = p1 + fleet.c3 * x2
    u = fleet.Vref - Vf + Vpss

    dS = np.empty_like(S)
    dS[:, 0] = x2
    dS[:, 1] = -fleet.a1 * x2 + fleet.a2 * (fleet.Tm - Pe)
    dx3 = -fleet.a3 * x3 + fleet.a4 * Vt * cos1 + Ef / fleet.Td0p
    dS[:, 2] = dx3
    dS[:, 3] = (Vt - Vf) / fleet.TR
    dS[:, 4] = ((1.0 - fleet.tc_tb) * u - q) / fleet.TB
    dS[:, 5] = (fleet.KA * (q + fleet.tc_tb * u) - Ef) / fleet.TA
    dS[:, 6] = -fleet.c1 * p1 + p2 + fleet.k4 * x2
    dS[:, 7] = -fleet.c2 * p1 + p3 + fleet.k5 * x2
    dS[:, 8] = -p1 - fleet.c13 * x2

    dE = (dx3 + 1j * (x2 * x3)) * rot
    dI = Ymat @ dE
    if Ymat_dot is not None:
        dI = dI + Ymat_dot @ E
    dV = dE - 1j * fleet.xdp * dI
    theta_dot = (dV / V).imag
    omega_t = fleet.omega_s + theta_dot

    if tap_lam is not None:
        # truth-driven regression filter banks, one pair of states per input
        lam = tap_lam
        w = theta_dot
        for j, uin in enumerate((x1, w, Pe, 1.0)):
            s1 = S[:, _STATE_COLS + 2 * j]
            s2 = S[:, _STATE_COLS + 1 + 2 * j]
            dS[:, _STATE_COLS + 2 * j] = s2
            dS[:, _STATE_COLS + 1 + 2 * j] = -2.0 * lam * s2 - lam * lam * s1 + uin

    return dS, (Vt, theta, omega_t, x1, Pe)


def rk4_step(S, h, fleet: Fleet, Ymat, tap_lam=None):
    """One classical Runge-Kutta step; network re-solved at every stage."""
    k1, out = _derivatives(S, fleet, Ymat, tap_lam)
    k2, _ = _derivatives(S + (0.5 * h) * k1, fleet, Ymat, tap_lam)
    k3, _ = _derivatives(S + (0.5 * h) * k2, fleet, Ymat, tap_lam)
    k4, _ = _derivatives(S + h * k3, fleet, Ymat, tap_lam)
    return S + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4), out


# ---------------------------------------------------------------------------
# equilibrium initialization
# ---------------------------------------------------------------------------

def equilibrium_from_internal(
    spec: NetworkSpec,
    raws: list[RawGeneratorParams],
    x3_0: np.ndarray,
    delta0: np.ndarray,
    load_scale: np.ndarray | None = None,
):
    """Exact synchronous equilibrium from chosen internal phasors.

    The mechanical torque and AVR setpoint are back-computed so the chosen
    phasors are an equilibrium of the closed-loop system; a damped Newton
    polish on the full per-machine residual then verifies it to 1e-10.

    Returns ``(net, params, S0, terminals)``.
    """
    x3_0 = np.asarray(x3_0, dtype=float)
    delta0 = np.asarray(delta0, dtype=float)
    params0 = [derive_coefficients(r) for r in raws]
    net = make_reduced(spec, params0, load_scale)
    V, I = solve_phasors(net, x3_0, delta0)
    Vt = np.abs(V)
    theta = np.angle(V)
    x1 = delta0 - theta
    Pe = np.real(V * np.conj(I))
    Y = np.array([p.Y for p in params0])
    xd = np.array([p.xd for p in params0])
    xdp = np.array([p.xdp for p in params0])
    KA = np.array([p.KA for p in params0])
    Itd = Y * (x3_0 - Vt * np.cos(x1))
    Ef = x3_0 + (xd - xdp) * Itd
    if np.any(Ef <= 0.0) or np.any(x3_0 <= 0.0):
        raise SimulationError("chosen operating point needs positive excitation")
    Vref = Vt + Ef / KA
    params = [p.with_operating_point(Tm=float(Pe[i]), Vref=float(Vref[i]))
              for i, p in enumerate(params0)]

    u = Ef / KA
    tc_tb = np.array([p.TC / p.TB for p in params0])
    S0 = np.zeros((len(raws), _STATE_COLS))
    S0[:, 0] = delta0
    S0[:, 2] = x3_0
    S0[:, 3] = Vt
    S0[:, 4] = (1.0 - tc_tb) * u
    S0[:, 5] = Ef

    terminals = [
        TerminalSignals(Vt=float(Vt[i]), theta_t=float(theta[i]),
                        omega_t=params[i].omega_s)
        for i in range(len(raws))
    ]
    S0 = polish_equilibrium(S0, params, terminals)
    return net, params, S0, terminals


def _residual(vec, p: GeneratorParams, term: TerminalSignals):
    s = MachineState(*vec)
    return machine_derivatives(s, p, term)


def polish_equilibrium(S0, params, terminals, tol=1e-10, max_iter=25):
    """Damped Newton on each machine's 9-state residual with the network
    solution held fixed."""
    S = S0.copy()
    for i, (p, term) in enumerate(zip(params, terminals)):
        theta = term.theta_t
        vec = np.concatenate(([S[i, 0] - theta], S[i, 1:9]))  # x1, x2, ..., p3
        F = _residual(vec, p, term)
        for _ in range(max_iter):
            if np.max(np.abs(F)) <= tol:
                break
            J = np.empty((9, 9))
            for j in range(9):
                h = 1e-7 * max(1.0, abs(vec[j]))
                vp = vec.copy()
                vp[j] += h
                J[:, j] = (_residual(vp, p, term) - F) / h
            step, *_ = np.linalg.lstsq(J, -F, rcond=None)
            alpha = 1.0
            norm0 = np.linalg.norm(F)
            while alpha > 1e-6:
                cand = vec + alpha * step
                Fc = _residual(cand, p, term)
                if np.linalg.norm(Fc) < norm0:
                    vec, F = cand, Fc
                    break
                alpha *= 0.5
            else:
                raise SimulationError(f"equilibrium polish stalled for {p.name}")
        if np.max(np.abs(F)) > tol:
            raise SimulationError(
                f"equilibrium residual {np.max(np.abs(F)):.3e} > {tol} for {p.name}"
            )
        S[i, 0] = vec[0] + theta
        S[i, 1:9] = vec[1:]
    return S


# ---------------------------------------------------------------------------
# event handling
# ---------------------------------------------------------------------------

def _events_by_step(events, dt, n_steps, spec: NetworkSpec):
    """Quantize events onto the simulation grid, validating as we go."""
    table: dict[int, list[Event]] = {}
    load_index = {load.bus: i for i, load in enumerate(spec.loads)}
    for ev in events:
        k = round(ev.time / dt)
        if abs(k * dt - ev.time) > 1e-9 + 1e-12 * abs(ev.time):
            raise SimulationError(f"event at t={ev.time} is off the simulation grid")
        if not (0 <= k <= n_steps):
            raise SimulationError(f"event at t={ev.time} outside the scenario horizon")
        if ev.kind in ("fault_on", "fault_off"):
            if spec.fault is None:
                raise SimulationError("fault event with no fault defined in the network")
        elif ev.kind == "load_scale":
            if ev.payload.get("bus") not in load_index:
                raise SimulationError(f"load_scale event for unknown load bus "
                                      f"{ev.payload.get('bus')!r}")
        elif ev.kind != "load_scale_vector":
            raise SimulationError(f"unknown event kind {ev.kind!r}")
        table.setdefault(k, []).append(ev)
    return table


def _reflect(v: float, lo: float, hi: float) -> float:
    while v < lo or v > hi:
        v = 2.0 * (lo if v < lo else hi) - v
    return v


def generate_walk_events(walk: LoadWalk, spec: NetworkSpec, t_end: float,
                         rng: np.random.Generator) -> list[Event]:
    """Expand the load-walk config into concrete load-scale events."""
    if not walk.enabled or not spec.loads:
        return []
    if walk.buses:
        idxs = [i for i, load in enumerate(spec.loads) if load.bus in walk.buses]
    else:
        idxs = list(range(len(spec.loads)))
    weights = np.array([spec.loads[i].p for i in idxs])
    if weights.sum() <= 0.0:
        weights = np.ones(len(idxs))
    weights = weights / weights.sum()
    m = np.ones(len(idxs))     # per-load redistribution multipliers
    common = 1.0               # p-weighted total multiplier
    scale = np.ones(len(spec.loads))
    events = []
    t = walk.interval
    while t < t_end - 1e-9:
        for j in range(len(idxs)):
            m[j] = _reflect(m[j] + rng.normal(0.0, walk.sigma),
                            1.0 - walk.max_dev, 1.0 + walk.max_dev)
        common = _reflect(common + rng.normal(0.0, walk.sigma_common),
                          1.0 - walk.max_dev_common, 1.0 + walk.max_dev_common)
        scale = scale.copy()
        scale[idxs] = m * (common / float(weights @ m))
        events.append(Event(time=t, kind="load_scale_vector",
                            payload={"scale": scale.copy()}))
        t += walk.interval
    return events


# ---------------------------------------------------------------------------
# main loops
# ---------------------------------------------------------------------------

def make_load_modulation(var: LoadVariation, spec: NetworkSpec,
                         rng: np.random.Generator):
    """Seeded multisine modulation ``scale(t)`` for the load admittances.

    Returns ``None`` when disabled. Tones are drawn once per scenario;
    the signal fades in smoothly so t=0 remains the exact equilibrium.
    """
    if not var.enabled or not spec.loads:
        return None
    n_loads = len(spec.loads)
    if var.buses:
        active = np.array([load.bus in var.buses for load in spec.loads])
    else:
        active = np.ones(n_loads, dtype=bool)
    n_act = int(active.sum())
    K = var.n_tones
    # independent per-load tones plus one shared common-mode set; tone
    # frequencies are stratified over the band so no draw can degenerate
    # into beating near-duplicates with long excitation nulls
    edges = np.linspace(var.f_min, var.f_max, K + 1)
    freqs = edges[:-1] + rng.uniform(0.0, 1.0, size=(n_act + 1, K)) * np.diff(edges)
    phases = rng.uniform(0.0, TWO_PI, size=(n_act + 1, K))
    amps = np.full((n_act + 1, K), np.sqrt(2.0 / K))  # unit rms
    amps[:-1] *= var.amplitude
    amps[-1] *= var.common_amplitude
    omega = TWO_PI * freqs
    act_idx = np.where(active)[0]
    fade = max(var.fade_in, 1e-9)

    def scale_and_rate(t: float):
        out = np.ones(n_loads)
        rate = np.zeros(n_loads)
        if t <= 0.0:
            return out, rate
        tau = min(1.0, t / fade)
        env = tau * tau * (3.0 - 2.0 * tau)
        denv = (6.0 * tau * (1.0 - tau) / fade) if t < fade else 0.0
        arg = omega * t + phases
        per_load = np.sum(amps * np.sin(arg), axis=1)
        per_rate = np.sum(amps * omega * np.cos(arg), axis=1)
        mod = per_load[:-1] + per_load[-1] + var.common_offset
        mod_rate = per_rate[:-1] + per_rate[-1]
        out[act_idx] += env * mod
        rate[act_idx] = env * mod_rate + denv * mod
        return out, rate

    return scale_and_rate


class _MatrixProvider:
    """Active reduced admittance matrix as a function of time.

    Combines discrete events (fault toggles, explicit load steps) with the
    continuous load modulation. Constant segments are cached so the
    common case costs nothing per stage.
    """

    def __init__(self, spec: NetworkSpec, fleet: Fleet, net: ReducedNetwork,
                 modulation=None):
        self.spec = spec
        self.fleet = fleet
        self.builder = KronBuilder(spec, fleet.params)
        self.modulation = modulation
        self.fault_active = net.fault_active
        self.static_scale = np.ones(len(spec.loads))
        self._cache = None if modulation else net.active_matrix()
        self._load_index = {load.bus: i for i, load in enumerate(spec.loads)}

    def apply_event(self, ev: Event) -> None:
        if ev.kind == "fault_on":
            self.fault_active = True
        elif ev.kind == "fault_off":
            self.fault_active = False
        elif ev.kind == "load_scale_vector":
            self.static_scale = np.asarray(ev.payload["scale"], dtype=float).copy()
        elif ev.kind == "load_scale":
            self.static_scale = self.static_scale.copy()
            self.static_scale[self._load_index[ev.payload["bus"]]] = \
                float(ev.payload["scale"])
        else:
            raise SimulationError(f"unknown event kind {ev.kind!r}")
        self._cache = None

    def __call__(self, t: float):
        """Returns ``(Ymat, Ymat_dot)``; the rate is None on constant segments."""
        if self.modulation is None:
            if self._cache is None:
                self._cache = self.builder.reduced_matrix(
                    self.static_scale, self.fault_active)
            return self._cache, None
        if self._cache is not None and self._cache[0] == t:
            return self._cache[1], self._cache[2]
        scale, rate = self.modulation(t)
        Ym, Ymdot = self.builder.reduced_with_rate(
            self.static_scale * scale, self.static_scale * rate, self.fault_active)
        self._cache = (t, Ym, Ymdot)
        return Ym, Ymdot


def integrate(
    S0: np.ndarray,
    fleet: Fleet,
    net: ReducedNetwork,
    spec: NetworkSpec,
    dt: float,
    n_steps: int,
    events: dict[int, list[Event]] | None = None,
    tap_lam: float | None = None,
    modulation=None,
):
    """Run the fixed-step loop, returning logged truth arrays."""
    if dt <= 0.0:
        raise SimulationError("dt must be positive")
    n = fleet.n
    S = S0.copy()
    if tap_lam is not None and S.shape[1] == _STATE_COLS:
        S = np.hstack([S, np.zeros((n, _TAP_COLS))])
    events = events or {}
    provider = _MatrixProvider(spec, fleet, net, modulation)

    t_log = np.arange(n_steps + 1) * dt
    states = np.empty((n_steps + 1, n, 9))
    delta_log = np.empty((n_steps + 1, n))
    terms = np.empty((n_steps + 1, n, 3))
    tap_log = np.empty((n_steps + 1, n, _TAP_COLS)) if tap_lam is not None else None

    for k in range(n_steps + 1):
        t = k * dt
        for ev in events.get(k, ()):
            provider.apply_event(ev)

        Ym, Ymdot = provider(t)
        d1, out = _derivatives(S, fleet, Ym, tap_lam, Ymdot)
        Vt, theta, omega_t, x1, _pe = out
        states[k, :, 0] = x1
        states[k, :, 1:9] = S[:, 1:9]
        delta_log[k] = S[:, 0]
        terms[k, :, 0] = Vt
        terms[k, :, 1] = theta
        terms[k, :, 2] = omega_t
        if tap_log is not None:
            tap_log[k] = S[:, _STATE_COLS:]
        if not np.all(np.isfinite(S)):
            raise SimulationError(f"state diverged at t={t:.4f}")

        if k < n_steps:
            Ym_h, Ymdot_h = provider(t + 0.5 * dt)
            k2, _ = _derivatives(S + (0.5 * dt) * d1, fleet, Ym_h, tap_lam, Ymdot_h)
            k3, _ = _derivatives(S + (0.5 * dt) * k2, fleet, Ym_h, tap_lam, Ymdot_h)
            Ym_f, Ymdot_f = provider(t + dt)
            k4, _ = _derivatives(S + dt * k3, fleet, Ym_f, tap_lam, Ymdot_f)
            S = S + (dt / 6.0) * (d1 + 2.0 * k2 + 2.0 * k3 + k4)

    return t_log, states, delta_log, terms, tap_log


def pmu_decimation(dt: float, pmu_rate: float) -> int:
    """Simulation steps per PMU sample; requires a commensurate grid."""
    m = 1.0 / (pmu_rate * dt)
    m_int = round(m)
    if m_int < 1 or abs(m - m_int) > 1e-6:
        raise SimulationError(
            f"pmu_rate {pmu_rate} Hz is not commensurate with dt_sim {dt} s"
        )
    return m_int


def synthesize_pmu(clean: np.ndarray, noise: NoiseConfig,
                   rng: np.random.Generator, f_nominal: float) -> np.ndarray:
    """Additive per-channel noise at the configured SNR.

    The noise variance tracks the running mean square of the clean channel
    (for y5: of its deviation from nominal), so a 45 dB setting yields a
    45 dB empirical ratio against that reference power.
    """
    if noise.kind == "none":
        return clean.copy()
    if noise.kind not in ("gaussian", "laplacian"):
        raise SimulationError(f"unknown noise kind {noise.kind!r}")
    ref = clean.copy()
    if noise.y5_reference == "deviation":
        ref[..., 4] -= f_nominal
    count = np.arange(1, clean.shape[0] + 1, dtype=float)[:, None, None]
    running_msq = np.cumsum(ref * ref, axis=0) / count
    sigma = np.sqrt(running_msq / 10.0 ** (noise.snr_db / 10.0))
    if noise.kind == "gaussian":
        raw = rng.normal(0.0, 1.0, size=clean.shape)
    else:
        raw = rng.laplace(0.0, 1.0 / math.sqrt(2.0), size=clean.shape)
    return clean + sigma * raw


def pmu_from_truth(states, terms, params, pmu_steps, t_grid):
    """Noiseless PMU vectors at the sample instants, vectorized."""
    Y = np.array([p.Y for p in params])
    x1 = states[pmu_steps, :, 0]
    x3 = states[pmu_steps, :, 2]
    Vt = terms[pmu_steps, :, 0]
    omega_t = terms[pmu_steps, :, 2]
    cos1 = np.cos(x1)
    clean = np.empty(x1.shape + (5,))
    clean[..., 0] = Vt
    clean[..., 1] = Y * Vt * x3 * np.sin(x1)
    clean[..., 2] = Y * (Vt * x3 * cos1 - Vt * Vt)
    clean[..., 3] = Y * np.sqrt(np.maximum(x3 * x3 + Vt * Vt - 2.0 * Vt * x3 * cos1, 0.0))
    clean[..., 4] = omega_t / TWO_PI
    return clean


def _truth_regressor_outputs(tap_log, states, pmu_steps, lam):
    """Evaluate (z, psi) at sample instants from the truth-driven banks."""
    x1 = states[pmu_steps, :, 0]
    taps = tap_log[pmu_steps]          # (M, n, 8)
    lam2 = lam * lam

    def f0(j):
        return lam2 * taps[..., 2 * j]

    def f1(j):
        return lam2 * taps[..., 2 * j + 1]

    def f2(j, u):
        return lam2 * (u - 2.0 * lam * taps[..., 2 * j + 1] - lam2 * taps[..., 2 * j])

    out = np.empty(x1.shape + (4,))
    out[..., 0] = f2(0, x1) + f1(1)                # z
    out[..., 1] = -f1(0) - f0(1)                   # psi_1
    out[..., 2] = -f0(2)                           # psi_2
    out[..., 3] = f0(3)                            # psi_3
    return out


def init_truth_tap(S0, states0_x1, terms0, params, lam):
    """DC-matched initial filter states so the regression identity holds
    from t = 0 (settled response to the pre-scenario constants)."""
    n = S0.shape[0]
    omega_s = params[0].omega_s
    Y = np.array([p.Y for p in params])
    x1 = states0_x1
    Vt = np.array([t.Vt for t in terms0])
    w = np.array([t.omega_t for t in terms0]) - omega_s
    x3 = S0[:, 2]
    y2 = Y * Vt * x3 * np.sin(x1)
    lam2 = lam * lam
    tap = np.zeros((n, _TAP_COLS))
    for j, u0 in enumerate((x1, w, y2, np.ones(n))):
        tap[:, 2 * j] = u0 / lam2
    return np.hstack([S0, tap])


def run_scenario(cfg: ScenarioConfig, truth_tap: bool = False) -> Trajectory:
    """Simulate one scenario: equilibrium init, events, PMU synthesis.

    Deterministic for a given config and seed. Set ``truth_tap`` to also
    integrate truth-driven regression filter banks (used by the
    identification oracles).
    """
    dt = cfg.dt_sim
    if dt <= 0.0 or cfg.t_end < 0.0:
        raise SimulationError("dt_sim must be > 0 and t_end >= 0")
    n_steps = round(cfg.t_end / dt)
    if abs(n_steps * dt - cfg.t_end) > 1e-9:
        raise SimulationError("t_end must be a multiple of dt_sim")
    m = pmu_decimation(dt, cfg.pmu_rate)

    net, params, S0, terms0 = equilibrium_from_internal(
        cfg.network, list(cfg.machines), np.array(cfg.x3_0), np.array(cfg.delta0),
    )
    fleet = Fleet(params)

    seed_walk, seed_noise, seed_tones = np.random.SeedSequence(cfg.rng_seed).spawn(3)
    walk_events = generate_walk_events(
        cfg.load_walk, cfg.network, cfg.t_end, np.random.default_rng(seed_walk)
    )
    all_events = sorted([*cfg.events, *walk_events], key=lambda e: e.time)
    table = _events_by_step(all_events, dt, n_steps, cfg.network)
    modulation = make_load_modulation(cfg.load_variation, cfg.network,
                                      np.random.default_rng(seed_tones))

    lam = cfg.observer.lam if truth_tap else None
    if truth_tap:
        x1_0 = S0[:, 0] - np.array([t.theta_t for t in terms0])
        S0 = init_truth_tap(S0, x1_0, terms0, params, lam)

    t_log, states, delta_log, terms, tap_log = integrate(
        S0, fleet, net, cfg.network, dt, n_steps,
        events=table, tap_lam=lam, modulation=modulation,
    )

    pmu_steps = np.arange(0, n_steps + 1, m)
    pmu_t = t_log[pmu_steps]
    clean = pmu_from_truth(states, terms, params, pmu_steps, t_log)
    noisy = synthesize_pmu(clean, cfg.noise, np.random.default_rng(seed_noise),
                           f_nominal=fleet.omega_s / TWO_PI)

    truth_reg = None
    if truth_tap:
        truth_reg = _truth_regressor_outputs(tap_log, states, pmu_steps, lam)

    return Trajectory(
        t=t_log,
        machine_names=[p.name for p in params],
        states=states,
        delta=delta_log,
        terminals=terms,
        pmu_t=pmu_t,
        pmu_steps=pmu_steps,
        pmu_clean=clean,
        pmu=noisy,
        params=params,
        config=cfg,
        truth_regressor=truth_reg,
    )
