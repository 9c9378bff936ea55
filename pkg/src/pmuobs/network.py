"""Algebraic network coupling between machines.

Machines are represented by their internal EMF behind the transient
reactance. The bus network (lines, constant-admittance loads, optional
fault shunt) is Kron-reduced to the internal machine nodes once per
topology change; every integration stage then only needs one small
complex mat-vec to recover terminal conditions.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from pmuobs.model import TerminalSignals
from pmuobs.params import GeneratorParams


class NetworkSolveError(RuntimeError):
    """The network admittance system is singular or inconsistent."""


@dataclass(frozen=True)
class Line:
    from_bus: str
    to_bus: str
    r: float        # series resistance [pu]
    x: float        # series reactance [pu]
    b: float = 0.0  # total line charging susceptance [pu]


@dataclass(frozen=True)
class Load:
    """Constant-admittance load, specified as P/Q drawn at 1.0 pu voltage."""

    bus: str
    p: float
    q: float


@dataclass(frozen=True)
class FaultSpec:
    bus: str
    g: float = 1.0e4  # shunt conductance applied during the fault [pu]
    b: float = 0.0


@dataclass(frozen=True)
class NetworkSpec:
    """Bus-level description before reduction."""

    buses: tuple[str, ...]
    lines: tuple[Line, ...]
    loads: tuple[Load, ...]
    machine_buses: tuple[str, ...]  # terminal bus of each machine, in machine order
    fault: FaultSpec | None = None

    def bus_index(self) -> dict[str, int]:
        return {name: i for i, name in enumerate(self.buses)}


@dataclass(frozen=True)
class ReducedNetwork:
    """Admittance coupling among machine internal nodes.

    ``Ykron_fault`` is precomputed at build time so toggling the fault is a
    pure matrix swap with no mid-run refactorization.
    """

    n: int
    Ykron: np.ndarray
    Ykron_fault: np.ndarray | None
    xdp: np.ndarray           # per-machine transient reactance [pu]
    fault_active: bool = False

    def active_matrix(self) -> np.ndarray:
        if self.fault_active:
            if self.Ykron_fault is None:
                raise NetworkSolveError("fault requested but no fault matrix was built")
            return self.Ykron_fault
        return self.Ykron


def build_bus_admittance(
    spec: NetworkSpec,
    load_scale: np.ndarray | None = None,
    with_fault: bool = False,
) -> np.ndarray:
    """Assemble the bus admittance matrix from lines, loads and fault shunt."""
    idx = spec.bus_index()
    nb = len(spec.buses)
    Y = np.zeros((nb, nb), dtype=complex)
    for line in spec.lines:
        i, j = idx[line.from_bus], idx[line.to_bus]
        y = 1.0 / complex(line.r, line.x)
        Y[i, i] += y + 0.5j * line.b
        Y[j, j] += y + 0.5j * line.b
        Y[i, j] -= y
        Y[j, i] -= y
    if load_scale is None:
        load_scale = np.ones(len(spec.loads))
    for k, load in enumerate(spec.loads):
        # admittance drawing (p, q) at unit voltage
        Y[idx[load.bus], idx[load.bus]] += load_scale[k] * complex(load.p, -load.q)
    if with_fault:
        if spec.fault is None:
            raise NetworkSolveError("network spec has no fault definition")
        Y[idx[spec.fault.bus], idx[spec.fault.bus]] += complex(spec.fault.g, spec.fault.b)
    return Y


def _kron_to_internal(spec: NetworkSpec, xdp: np.ndarray, Ybus: np.ndarray) -> np.ndarray:
    """Eliminate all buses, keeping the machine internal nodes."""
    idx = spec.bus_index()
    n = len(spec.machine_buses)
    nb = len(spec.buses)
    yg = 1.0 / (1j * xdp)
    Yii = np.diag(yg)
    Yib = np.zeros((n, nb), dtype=complex)
    for i, bus in enumerate(spec.machine_buses):
        Yib[i, idx[bus]] = -yg[i]
    Ybb = Ybus.copy()
    for i, bus in enumerate(spec.machine_buses):
        Ybb[idx[bus], idx[bus]] += yg[i]
    try:
        elim = np.linalg.solve(Ybb, Yib.T)  # Ybi = Yib^T for a reciprocal network
    except np.linalg.LinAlgError as exc:
        raise NetworkSolveError("bus admittance matrix is singular") from exc
    Ykron = Yii - Yib @ elim
    if not np.all(np.isfinite(Ykron)):
        raise NetworkSolveError("Kron reduction produced non-finite entries")
    return Ykron


class KronBuilder:
    """Fast repeated Kron reduction for time-varying load admittances.

    The bus matrix is affine in the per-load scale factors, so assembly is
    a few vectorized adds; only the small bus-block solve runs per call.
    """

    def __init__(self, spec: NetworkSpec, params: list[GeneratorParams]):
        self.spec = spec
        idx = spec.bus_index()
        nb = len(spec.buses)
        n = len(spec.machine_buses)
        self.xdp = np.array([p.xdp for p in params])
        yg = 1.0 / (1j * self.xdp)
        self._Ybase = build_bus_admittance(
            replace(spec, loads=()), load_scale=None
        )
        for i, bus in enumerate(spec.machine_buses):
            self._Ybase[idx[bus], idx[bus]] += yg[i]
        self._load_bus = np.array([idx[load.bus] for load in spec.loads], dtype=int)
        self._load_y = np.array([complex(load.p, -load.q) for load in spec.loads])
        self._fault_bus = idx[spec.fault.bus] if spec.fault is not None else None
        self._fault_y = (complex(spec.fault.g, spec.fault.b)
                         if spec.fault is not None else 0.0)
        self._Yii = np.diag(yg)
        self._Yib = np.zeros((n, nb), dtype=complex)
        for i, bus in enumerate(spec.machine_buses):
            self._Yib[i, idx[bus]] = -yg[i]

    def reduced_matrix(self, load_scale: np.ndarray, faulted: bool) -> np.ndarray:
        return self.reduced_with_rate(load_scale, None, faulted)[0]

    def reduced_with_rate(self, load_scale: np.ndarray,
                          load_scale_rate: np.ndarray | None,
                          faulted: bool):
        """Reduced matrix and (optionally) its time derivative.

        When loads drift continuously the reduced coupling drifts too; its
        rate is needed for the exact terminal-angle speed. For a diagonal
        bus-matrix perturbation ``d(Ykron)/dt = R^T diag' R`` with
        ``R = Ybb^-1 Ybi``.
        """
        Ybb = self._Ybase.copy()
        np.add.at(Ybb, (self._load_bus, self._load_bus), load_scale * self._load_y)
        if faulted:
            if self._fault_bus is None:
                raise NetworkSolveError("network spec has no fault definition")
            Ybb[self._fault_bus, self._fault_bus] += self._fault_y
        try:
            elim = np.linalg.solve(Ybb, self._Yib.T)  # (nb, n)
        except np.linalg.LinAlgError as exc:
            raise NetworkSolveError("bus admittance matrix is singular") from exc
        Ykron = self._Yii - self._Yib @ elim
        if load_scale_rate is None:
            return Ykron, None
        rows = elim[self._load_bus]                   # (n_loads, n)
        Ykron_dot = rows.T @ (rows * (load_scale_rate * self._load_y)[:, None])
        return Ykron, Ykron_dot


def make_reduced(
    spec: NetworkSpec,
    params: list[GeneratorParams],
    load_scale: np.ndarray | None = None,
) -> ReducedNetwork:
    """Build the reduced network (and its faulted variant) for a machine set."""
    if len(spec.machine_buses) != len(params):
        raise NetworkSolveError(
            f"{len(spec.machine_buses)} machine buses for {len(params)} machines"
        )
    xdp = np.array([p.xdp for p in params])
    Ykron = _kron_to_internal(spec, xdp, build_bus_admittance(spec, load_scale))
    Ykron_fault = None
    if spec.fault is not None:
        Ykron_fault = _kron_to_internal(
            spec, xdp, build_bus_admittance(spec, load_scale, with_fault=True)
        )
    return ReducedNetwork(n=len(params), Ykron=Ykron, Ykron_fault=Ykron_fault, xdp=xdp)


def set_fault(net: ReducedNetwork, active: bool) -> ReducedNetwork:
    """Toggle the active admittance matrix; deterministic and involutive."""
    return replace(net, fault_active=bool(active))


def solve_phasors(net: ReducedNetwork, Eq: np.ndarray, delta: np.ndarray):
    """Terminal voltage and injected current phasors for given internal states.

    ``Eq`` and ``delta`` are per-machine arrays; all phasors live in the
    synchronously rotating frame. Returns ``(V, I)``.
    """
    E = Eq * np.exp(1j * np.asarray(delta))
    I = net.active_matrix() @ E
    V = E - 1j * net.xdp * I
    return V, I


def injected_power(V: np.ndarray, I: np.ndarray) -> np.ndarray:
    """Complex power each machine delivers into the network at its terminal."""
    return V * np.conj(I)


def wrap_angle(theta):
    """Wrap an angle (difference) to (-pi, pi]."""
    return np.pi - np.mod(np.pi - theta, 2.0 * np.pi)


def solve_terminals(
    net: ReducedNetwork,
    internal: list[tuple[float, float]],
    params: list[GeneratorParams],
    theta_filter: np.ndarray | None = None,
    tau: float = 0.02,
) -> list[TerminalSignals]:
    """Terminal signals per machine for internal states ``(E'_q, delta)``.

    ``theta_filter`` holds the first-order filter states used to
    differentiate the terminal angle; when omitted the network is assumed
    quiescent and ``omega_t`` equals the nominal speed.
    """
    Eq = np.array([e for e, _ in internal])
    delta = np.array([d for _, d in internal])
    V, _ = solve_phasors(net, Eq, delta)
    Vt = np.abs(V)
    if np.any(Vt <= 0.0):
        raise NetworkSolveError("terminal voltage collapsed to zero")
    theta_raw = np.angle(V)
    omega_s = params[0].omega_s
    if theta_filter is None:
        theta = theta_raw
        omega_t = np.full(net.n, omega_s)
    else:
        # unwrap near the filter state; the filter lag is far below pi
        theta = theta_filter + wrap_angle(theta_raw - theta_filter)
        omega_t = omega_s + (theta - theta_filter) / tau
    return [
        TerminalSignals(Vt=float(Vt[i]), theta_t=float(theta[i]), omega_t=float(omega_t[i]))
        for i in range(net.n)
    ]
