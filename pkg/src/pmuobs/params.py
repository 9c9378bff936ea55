"""Generator parameter containers and derived-coefficient computation."""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass


class InvalidParameterError(ValueError):
    """A machine constant violates its physical domain."""


#: Nominal synchronous speed of a 60 Hz system [rad/s].
OMEGA_S_60HZ = 376.9911184307752


@dataclass(frozen=True)
class RawGeneratorParams:
    """Raw electrical/mechanical constants of one machine, as configured.

    ``Tm`` and ``Vref`` may be left ``None``; scenario initialization fills
    them from the equilibrium operating point.
    """

    name: str
    H: float        # inertia constant [s]
    D: float        # damping factor [pu torque per rad/s]
    xd: float       # d-axis synchronous reactance [pu]
    xdp: float      # d-axis transient reactance [pu]
    Td0p: float     # d-axis transient open-circuit time constant [s]
    # AVR: transducer + lead-lag + first-order amplifier
    TR: float
    TB: float
    TC: float
    TA: float
    KA: float
    # PSS: washout + double lead-lag acting on shaft speed deviation
    Tw: float
    T1: float
    T2: float
    T3: float
    T4: float
    Kp: float
    omega_s: float = OMEGA_S_60HZ
    Tm: float | None = None     # mechanical torque [pu]
    Vref: float | None = None   # AVR setpoint [pu]


@dataclass(frozen=True)
class GeneratorParams:
    """Raw constants plus the derived coefficients used by the model.

    Produced by :func:`derive_coefficients`; not meant to be constructed
    by hand.
    """

    name: str
    H: float
    D: float
    xd: float
    xdp: float
    Td0p: float
    TR: float
    TB: float
    TC: float
    TA: float
    KA: float
    Tw: float
    T1: float
    T2: float
    T3: float
    T4: float
    Kp: float
    omega_s: float
    Tm: float | None
    Vref: float | None
    Y: float    # transient admittance magnitude 1/xdp [pu]
    a1: float   # omega_s*D/(2H) [1/s]
    a2: float   # omega_s/(2H) [rad/(s^2 pu)]
    a3: float   # xd/(xdp*Td0p) [1/s]
    a4: float   # (xd - xdp)/(xdp*Td0p) [1/s]
    c1: float
    c2: float
    c3: float
    c4: float
    c5: float

    def with_operating_point(self, Tm: float, Vref: float) -> "GeneratorParams":
        return dataclasses.replace(self, Tm=Tm, Vref=Vref)


_POSITIVE_FIELDS = ("H", "xdp", "Td0p", "TR", "TB", "TA", "Tw", "T2", "T4", "omega_s")
_NONNEGATIVE_FIELDS = ("D", "xd", "TC", "KA", "T1", "T3", "Kp")


def derive_coefficients(raw: RawGeneratorParams) -> GeneratorParams:
    """Populate the derived machine coefficients from raw constants.

    Pure and deterministic: identical input gives bitwise-identical output.
    Raises :class:`InvalidParameterError` for non-positive time constants
    or reactances.
    """
    for field in _POSITIVE_FIELDS:
        value = getattr(raw, field)
        if not value > 0.0:
            raise InvalidParameterError(f"{raw.name}: {field} must be > 0, got {value!r}")
    for field in _NONNEGATIVE_FIELDS:
        value = getattr(raw, field)
        if value < 0.0:
            raise InvalidParameterError(f"{raw.name}: {field} must be >= 0, got {value!r}")
    if raw.xd < raw.xdp:
        raise InvalidParameterError(
            f"{raw.name}: xd ({raw.xd}) must not be smaller than xdp ({raw.xdp})"
        )

    Y = 1.0 / raw.xdp
    a1 = raw.omega_s * raw.D / (2.0 * raw.H)
    a2 = raw.omega_s / (2.0 * raw.H)
    a3 = raw.xd / (raw.xdp * raw.Td0p)
    a4 = (raw.xd - raw.xdp) / (raw.xdp * raw.Td0p)

    Tw, T1, T2, T3, T4, Kp = raw.Tw, raw.T1, raw.T2, raw.T3, raw.T4, raw.Kp
    c1 = (T4 * Tw + T4 * T2 + T2 * Tw) / (Tw * T4 * T2)
    c2 = (Tw + T4 + T2) / (Tw * T4 * T2)
    c3 = Kp * T1 * T3 / (T2 * T4)
    c4 = Kp * (T1 + T3) / (T2 * T4)
    c5 = Kp / (T2 * T4)

    return GeneratorParams(
        name=raw.name,
        H=raw.H,
        D=raw.D,
        xd=raw.xd,
        xdp=raw.xdp,
        Td0p=raw.Td0p,
        TR=raw.TR,
        TB=raw.TB,
        TC=raw.TC,
        TA=raw.TA,
        KA=raw.KA,
        Tw=raw.Tw,
        T1=raw.T1,
        T2=raw.T2,
        T3=raw.T3,
        T4=raw.T4,
        Kp=raw.Kp,
        omega_s=raw.omega_s,
        Tm=raw.Tm,
        Vref=raw.Vref,
        Y=Y,
        a1=a1,
        a2=a2,
        a3=a3,
        a4=a4,
        c1=c1,
        c2=c2,
        c3=c3,
        c4=c4,
        c5=c5,
    )
