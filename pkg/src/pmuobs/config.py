"""Scenario configuration files: TOML schema, loading and validation.

The schema is documented in the README. ``validate_config`` returns every
violation it can find (not just the first) so a config can be fixed in one
pass; ``load_config`` raises :class:`ConfigError` carrying the same list.
"""

from __future__ import annotations

import math
import sys
from pathlib import Path

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from pmuobs.network import FaultSpec, Line, Load, NetworkSpec
from pmuobs.params import OMEGA_S_60HZ, RawGeneratorParams
from pmuobs.simulator import (
    Event,
    LoadVariation,
    LoadWalk,
    NoiseConfig,
    ObserverSettings,
    ReportSettings,
    ScenarioConfig,
)


class ConfigError(ValueError):
    """Configuration file is unreadable or violates the schema."""

    def __init__(self, message: str, diagnostics: list[str] | None = None):
        super().__init__(message)
        self.diagnostics = diagnostics or [message]


_NOISE_KINDS = ("none", "gaussian", "laplacian")
_EVENT_KINDS = ("fault_on", "fault_off", "load_scale")


def read_toml(path) -> dict:
    try:
        with open(path, "rb") as fh:
            return tomllib.load(fh)
    except FileNotFoundError as exc:
        raise ConfigError(f"config file not found: {path}") from exc
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"config parse error in {path}: {exc}") from exc


def _get(table: dict, key: str, kind, diags: list[str], where: str,
         default=None, required: bool = False):
    if key not in table:
        if required:
            diags.append(f"{where}.{key}: required key is missing")
        return default
    value = table[key]
    if kind is float and isinstance(value, int) and not isinstance(value, bool):
        value = float(value)
    if not isinstance(value, kind):
        diags.append(f"{where}.{key}: expected {kind.__name__}, got {type(value).__name__}")
        return default
    return value


def _positive(value, key: str, diags: list[str]) -> None:
    if value is not None and not value > 0.0:
        diags.append(f"{key}: must be > 0, got {value}")


_KNOWN_KEYS = {
    "": {"label", "scenario", "noise", "network", "machines", "events",
         "load_walk", "load_variation", "observer", "report"},
    "scenario": {"t_end", "dt_sim", "pmu_rate", "rng_seed", "omega_s"},
    "noise": {"kind", "snr_db", "y5_reference"},
    "load_walk": {"enabled", "interval", "sigma", "max_dev", "sigma_common",
                  "max_dev_common", "buses"},
    "load_variation": {"enabled", "amplitude", "common_amplitude",
                       "common_offset", "f_min", "f_max", "n_tones",
                       "fade_in", "buses"},
    "observer": {"machines", "k", "lambda", "gamma", "k1", "k2", "d1", "d2",
                 "algebraic_method", "parameter_mode", "input_lpf"},
    "report": {"x2_window"},
}


def _check_keys(table: dict, where: str, diags: list[str]) -> None:
    known = _KNOWN_KEYS[where]
    for key in table:
        if key not in known:
            label = f"{where}.{key}" if where else key
            diags.append(f"{label}: unknown key")


def parse_config(doc: dict, diags: list[str]) -> ScenarioConfig | None:
    """Build a ScenarioConfig from a parsed TOML document, collecting
    diagnostics along the way. Returns None when errors were found."""
    label = _get(doc, "label", str, diags, "", default="scenario")
    _check_keys(doc, "", diags)
    for section in ("scenario", "noise", "load_walk", "load_variation",
                    "observer", "report"):
        table = doc.get(section, {})
        if isinstance(table, dict):
            _check_keys(table, section, diags)

    sc = doc.get("scenario", {})
    t_end = _get(sc, "t_end", float, diags, "scenario", required=True)
    dt_sim = _get(sc, "dt_sim", float, diags, "scenario", required=True)
    pmu_rate = _get(sc, "pmu_rate", float, diags, "scenario", default=60.0)
    rng_seed = _get(sc, "rng_seed", int, diags, "scenario", default=0)
    omega_s = _get(sc, "omega_s", float, diags, "scenario", default=OMEGA_S_60HZ)
    _positive(dt_sim, "scenario.dt_sim", diags)
    _positive(pmu_rate, "scenario.pmu_rate", diags)
    _positive(omega_s, "scenario.omega_s", diags)
    if t_end is not None and t_end < 0.0:
        diags.append(f"scenario.t_end: must be >= 0, got {t_end}")
    if dt_sim and pmu_rate and dt_sim > 0 and pmu_rate > 0:
        m = 1.0 / (pmu_rate * dt_sim)
        if abs(m - round(m)) > 1e-6 or round(m) < 1:
            diags.append(
                f"scenario.pmu_rate: {pmu_rate} Hz is not commensurate with "
                f"dt_sim={dt_sim} (1/(pmu_rate*dt_sim) must be a positive integer)"
            )
        if t_end is not None and t_end > 0 and dt_sim > 0:
            steps = t_end / dt_sim
            if abs(steps - round(steps)) > 1e-6:
                diags.append("scenario.t_end: must be an integer multiple of dt_sim")

    nz = doc.get("noise", {})
    kind = _get(nz, "kind", str, diags, "noise", default="none")
    snr_db = _get(nz, "snr_db", float, diags, "noise", default=45.0)
    y5_ref = _get(nz, "y5_reference", str, diags, "noise", default="deviation")
    if kind not in _NOISE_KINDS:
        diags.append(f"noise.kind: must be one of {_NOISE_KINDS}, got {kind!r}")
    if kind != "none" and (snr_db is None or not math.isfinite(snr_db)):
        diags.append("noise.snr_db: must be finite when noise is enabled")
    if y5_ref not in ("deviation", "power"):
        diags.append(f"noise.y5_reference: must be 'deviation' or 'power', got {y5_ref!r}")
    noise = NoiseConfig(kind=kind or "none", snr_db=snr_db or 45.0,
                        y5_reference=y5_ref or "deviation")

    net = doc.get("network")
    spec = None
    buses: list[str] = []
    if net is None:
        diags.append("network: section is missing")
    else:
        buses = net.get("buses", [])
        if not isinstance(buses, list) or not all(isinstance(b, str) for b in buses):
            diags.append("network.buses: must be a list of bus names")
            buses = []
        elif len(set(buses)) != len(buses):
            diags.append("network.buses: bus names must be unique")
        lines = []
        for i, ln in enumerate(net.get("lines", [])):
            where = f"network.lines[{i}]"
            frm = _get(ln, "from", str, diags, where, required=True)
            to = _get(ln, "to", str, diags, where, required=True)
            r = _get(ln, "r", float, diags, where, default=0.0)
            x = _get(ln, "x", float, diags, where, required=True)
            b = _get(ln, "b", float, diags, where, default=0.0)
            for bus in (frm, to):
                if bus is not None and buses and bus not in buses:
                    diags.append(f"{where}: unknown bus {bus!r}")
            if x is not None and r is not None and abs(complex(r, x)) == 0.0:
                diags.append(f"{where}: series impedance must be nonzero")
            if frm and to:
                lines.append(Line(frm, to, r or 0.0, x or 0.0, b or 0.0))
        loads = []
        for i, ld in enumerate(net.get("loads", [])):
            where = f"network.loads[{i}]"
            bus = _get(ld, "bus", str, diags, where, required=True)
            p = _get(ld, "p", float, diags, where, default=0.0)
            q = _get(ld, "q", float, diags, where, default=0.0)
            if bus is not None and buses and bus not in buses:
                diags.append(f"{where}: unknown bus {bus!r}")
            if bus:
                loads.append(Load(bus, p or 0.0, q or 0.0))
        fault = None
        if "fault" in net:
            where = "network.fault"
            fbus = _get(net["fault"], "bus", str, diags, where, required=True)
            fg = _get(net["fault"], "g", float, diags, where, default=1.0e4)
            fb = _get(net["fault"], "b", float, diags, where, default=0.0)
            if fbus is not None and buses and fbus not in buses:
                diags.append(f"{where}: unknown bus {fbus!r}")
            if fbus:
                fault = FaultSpec(bus=fbus, g=fg or 0.0, b=fb or 0.0)
        spec = (buses, lines, loads, fault)

    machines = []
    x3_0 = []
    delta0 = []
    machine_buses = []
    entries = doc.get("machines", [])
    if not entries:
        diags.append("machines: at least one machine is required")
    for i, mc in enumerate(entries):
        where = f"machines[{i}]"
        name = _get(mc, "name", str, diags, where, default=f"G{i+1}")
        bus = _get(mc, "bus", str, diags, where, required=True)
        if bus is not None and buses and bus not in buses:
            diags.append(f"{where}.bus: unknown bus {bus!r}")
        avr = mc.get("avr", {})
        pss = mc.get("pss", {})
        kwargs = {}
        for key in ("H", "D", "xd", "xdp", "Td0p"):
            kwargs[key] = _get(mc, key, float, diags, where, required=True)
        for key in ("TR", "TB", "TC", "TA", "KA"):
            kwargs[key] = _get(avr, key, float, diags, f"{where}.avr", required=True)
        for key in ("Tw", "T1", "T2", "T3", "T4", "Kp"):
            kwargs[key] = _get(pss, key, float, diags, f"{where}.pss", required=True)
        for key in ("H", "xdp", "Td0p"):
            _positive(kwargs[key], f"{where}.{key}", diags)
        for key in ("TR", "TB", "TA"):
            _positive(kwargs[key], f"{where}.avr.{key}", diags)
        for key in ("Tw", "T2", "T4"):
            _positive(kwargs[key], f"{where}.pss.{key}", diags)
        if kwargs["xd"] is not None and kwargs["xdp"] is not None \
                and kwargs["xd"] < kwargs["xdp"]:
            diags.append(f"{where}: xd must not be smaller than xdp")
        x3 = _get(mc, "x3_0", float, diags, where, default=1.2)
        d0 = _get(mc, "delta0", float, diags, where, default=0.0)
        _positive(x3, f"{where}.x3_0", diags)
        if None not in kwargs.values() and bus:
            machines.append(RawGeneratorParams(
                name=name, omega_s=omega_s or OMEGA_S_60HZ,
                **{k: float(v) for k, v in kwargs.items()}))
            machine_buses.append(bus)
            x3_0.append(x3)
            delta0.append(d0)
    names = [m.name for m in machines]
    if len(set(names)) != len(names):
        diags.append("machines: names must be unique")

    events = []
    for i, ev in enumerate(doc.get("events", [])):
        where = f"events[{i}]"
        t = _get(ev, "time", float, diags, where, required=True)
        kind_e = _get(ev, "kind", str, diags, where, required=True)
        if kind_e is not None and kind_e not in _EVENT_KINDS:
            diags.append(f"{where}.kind: must be one of {_EVENT_KINDS}, got {kind_e!r}")
        payload = {}
        if kind_e == "load_scale":
            payload["bus"] = _get(ev, "bus", str, diags, where, required=True)
            payload["scale"] = _get(ev, "scale", float, diags, where, required=True)
        if kind_e in ("fault_on", "fault_off") and spec is not None and spec[3] is None:
            diags.append(f"{where}: fault event but network.fault is not defined")
        if t is not None and t_end is not None and not (0.0 <= t <= t_end):
            diags.append(f"{where}.time: {t} outside [0, t_end]")
        if t is not None and dt_sim and dt_sim > 0:
            k = t / dt_sim
            if abs(k - round(k)) > 1e-6:
                diags.append(f"{where}.time: {t} is not on the simulation grid")
        if t is not None and kind_e:
            events.append(Event(time=t, kind=kind_e, payload=payload))

    lw = doc.get("load_walk", {})
    walk = LoadWalk(
        enabled=_get(lw, "enabled", bool, diags, "load_walk", default=False),
        interval=_get(lw, "interval", float, diags, "load_walk", default=1.0),
        sigma=_get(lw, "sigma", float, diags, "load_walk", default=0.02),
        max_dev=_get(lw, "max_dev", float, diags, "load_walk", default=0.08),
        sigma_common=_get(lw, "sigma_common", float, diags, "load_walk", default=0.01),
        max_dev_common=_get(lw, "max_dev_common", float, diags, "load_walk", default=0.02),
        buses=tuple(lw.get("buses", [])),
    )
    if walk.enabled:
        _positive(walk.interval, "load_walk.interval", diags)

    lv = doc.get("load_variation", {})
    variation = LoadVariation(
        enabled=_get(lv, "enabled", bool, diags, "load_variation", default=False),
        amplitude=_get(lv, "amplitude", float, diags, "load_variation", default=0.08),
        common_amplitude=_get(lv, "common_amplitude", float, diags,
                              "load_variation", default=0.012),
        common_offset=_get(lv, "common_offset", float, diags,
                           "load_variation", default=0.0),
        f_min=_get(lv, "f_min", float, diags, "load_variation", default=0.02),
        f_max=_get(lv, "f_max", float, diags, "load_variation", default=0.4),
        n_tones=_get(lv, "n_tones", int, diags, "load_variation", default=8),
        fade_in=_get(lv, "fade_in", float, diags, "load_variation", default=5.0),
        buses=tuple(lv.get("buses", [])),
    )
    if variation.enabled:
        if not 0.0 < variation.f_min < variation.f_max:
            diags.append("load_variation: need 0 < f_min < f_max")
        if variation.n_tones < 1:
            diags.append("load_variation.n_tones: must be >= 1")

    ob = doc.get("observer", {})
    gamma = ob.get("gamma", [1.5e7, 1.5e7, 1.5e7])
    if not (isinstance(gamma, list) and len(gamma) == 3
            and all(isinstance(g, (int, float)) and g > 0 for g in gamma)):
        diags.append("observer.gamma: must be a list of three positive gains")
        gamma = [1.5e7, 1.5e7, 1.5e7]
    observer = ObserverSettings(
        machines=tuple(ob.get("machines", [])),
        k=_get(ob, "k", float, diags, "observer", default=1.0),
        lam=_get(ob, "lambda", float, diags, "observer", default=0.5),
        gamma=tuple(float(g) for g in gamma),
        k1=_get(ob, "k1", float, diags, "observer", default=6.0),
        k2=_get(ob, "k2", float, diags, "observer", default=4.0),
        d1=_get(ob, "d1", float, diags, "observer", default=4.0),
        d2=_get(ob, "d2", float, diags, "observer", default=1.0),
        algebraic_method=_get(ob, "algebraic_method", str, diags, "observer",
                              default="primary"),
        parameter_mode=_get(ob, "parameter_mode", str, diags, "observer",
                            default="drem"),
        input_lpf=_get(ob, "input_lpf", float, diags, "observer", default=3.0),
    )
    _positive(observer.k, "observer.k", diags)
    _positive(observer.lam, "observer.lambda", diags)
    _positive(observer.k2, "observer.k2", diags)
    if observer.d1 is not None and observer.d1 < 0:
        diags.append("observer.d1: must be >= 0")
    if observer.d2 is not None and observer.d2 < 0:
        diags.append("observer.d2: must be >= 0")
    if observer.algebraic_method not in ("primary", "alt"):
        diags.append("observer.algebraic_method: must be 'primary' or 'alt'")
    if observer.parameter_mode not in ("drem", "known"):
        diags.append("observer.parameter_mode: must be 'drem' or 'known'")
    for name in observer.machines:
        if names and name not in names:
            diags.append(f"observer.machines: unknown machine {name!r}")
    if pmu_rate and observer.d1 is not None and observer.d1 > 0:
        ns = observer.d1 * pmu_rate
        if abs(ns - round(ns)) > 1e-6:
            diags.append("observer.d1: must be an integer number of PMU samples")
    if pmu_rate and observer.d2 is not None and observer.d2 > 0:
        ns = observer.d2 * pmu_rate
        if abs(ns - round(ns)) > 1e-6:
            diags.append("observer.d2: must be an integer number of PMU samples")

    rp = doc.get("report", {})
    window = rp.get("x2_window")
    if window is not None:
        if not (isinstance(window, list) and len(window) == 2
                and all(isinstance(v, (int, float)) for v in window)
                and window[0] < window[1]):
            diags.append("report.x2_window: must be [start, end] with start < end")
            window = None
        else:
            window = (float(window[0]), float(window[1]))
    report = ReportSettings(x2_window=window)

    if diags or spec is None:
        return None
    network = NetworkSpec(
        buses=tuple(buses),
        lines=tuple(spec[1]),
        loads=tuple(spec[2]),
        machine_buses=tuple(machine_buses),
        fault=spec[3],
    )
    return ScenarioConfig(
        machines=tuple(machines),
        network=network,
        x3_0=tuple(x3_0),
        delta0=tuple(delta0),
        t_end=t_end,
        dt_sim=dt_sim,
        pmu_rate=pmu_rate,
        rng_seed=rng_seed,
        noise=noise,
        events=tuple(events),
        load_walk=walk,
        load_variation=variation,
        observer=observer,
        report=report,
        label=label,
    )


def validate_config(path) -> list[str]:
    """Schema check without running; returns all violations found."""
    try:
        doc = read_toml(path)
    except ConfigError as exc:
        return list(exc.diagnostics)
    diags: list[str] = []
    parse_config(doc, diags)
    return diags


def load_config(path) -> ScenarioConfig:
    doc = read_toml(path)
    diags: list[str] = []
    cfg = parse_config(doc, diags)
    if cfg is None:
        raise ConfigError(
            f"invalid config {path}: {len(diags)} problem(s)", diagnostics=diags
        )
    return cfg


def bundled_scenario_path(name: str) -> Path:
    """Path to a scenario config shipped with the package."""
    here = Path(__file__).parent / "scenarios" / f"{name}.toml"
    if not here.exists():
        raise ConfigError(f"no bundled scenario named {name!r}")
    return here
