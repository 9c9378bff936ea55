import math

import numpy as np
import pytest
import sympy

from pmuobs.model import (
    MachineState,
    TerminalSignals,
    controller_derivatives,
    electrical_power,
    generator_derivatives,
    machine_derivatives,
    measure,
    pss_output,
    stator_currents,
)
from tests.test_params import make_raw
from pmuobs.params import derive_coefficients

WS = 120.0 * math.pi


def params(**kw):
    return derive_coefficients(make_raw(**kw)).with_operating_point(Tm=0.9, Vref=1.05)


def test_stator_currents_aligned_case():
    Itd, Itq = stator_currents(0.0, 1.0, 1.0, 5.0)
    assert Itd == 0.0 and Itq == 0.0


def test_stator_currents_quadrature_case():
    Itd, Itq = stator_currents(math.pi / 2, 1.0, 1.0, 2.0)
    assert Itq == pytest.approx(2.0, abs=1e-15)
    assert Itd == pytest.approx(2.0, abs=1e-15)


def test_stator_currents_formula():
    x1, x3, Vt, Y = 0.4, 1.1, 1.02, 7.576
    Itd, Itq = stator_currents(x1, x3, Vt, Y)
    assert Itq == pytest.approx(Y * Vt * math.sin(x1), rel=1e-14)
    assert Itd == pytest.approx(Y * (x3 - Vt * math.cos(x1)), rel=1e-14)


def test_measure_zero_angle_matched_voltage():
    s = measure(0.0, 1.0, 1.0, WS, 5.0)
    assert s.y2 == 0.0
    assert s.y3 == pytest.approx(0.0, abs=1e-14)
    assert s.y4 == pytest.approx(0.0, abs=1e-7)
    assert s.y5 == pytest.approx(60.0, rel=1e-14)


def test_measure_full_vector():
    x1, x3, Vt, Y = 0.4, 1.1, 1.02, 7.576
    s = measure(x1, x3, Vt, WS, Y)
    assert s.y1 == Vt
    assert s.y2 == pytest.approx(Y * Vt * x3 * math.sin(x1), rel=1e-14)
    assert s.y3 == pytest.approx(Y * (Vt * x3 * math.cos(x1) - Vt**2), rel=1e-14)
    assert s.y4 == pytest.approx(
        Y * math.sqrt(x3**2 + Vt**2 - 2 * Vt * x3 * math.cos(x1)), rel=1e-14)


def test_current_magnitude_consistent_with_stator_currents():
    rng = np.random.default_rng(0)
    for _ in range(200):
        x1 = rng.uniform(-1.4, 1.4)
        x3 = rng.uniform(0.5, 1.5)
        Vt = rng.uniform(0.9, 1.1)
        Y = rng.uniform(2.0, 10.0)
        s = measure(x1, x3, Vt, WS, Y)
        Itd, Itq = stator_currents(x1, x3, Vt, Y)
        assert s.y4**2 == pytest.approx(Itd**2 + Itq**2, rel=1e-12)


def test_power_pythagorean_identity():
    rng = np.random.default_rng(1)
    for _ in range(200):
        x1 = rng.uniform(-1.4, 1.4)
        x3 = rng.uniform(0.5, 1.5)
        Vt = rng.uniform(0.9, 1.1)
        Y = rng.uniform(2.0, 10.0)
        s = measure(x1, x3, Vt, WS, Y)
        lhs = s.y2**2 + (s.y3 + Y * s.y1**2) ** 2
        assert lhs == pytest.approx((Y * s.y1 * x3) ** 2, rel=1e-12)


def test_synchronized_machine_has_constant_angle():
    p = params()
    s = MachineState(x1=0.3, x2=0.0, x3=1.1, Vf=1.0, q=0.0, Ef=1.2,
                     p1=0.0, p2=0.0, p3=0.0)
    term = TerminalSignals(Vt=1.0, theta_t=0.0, omega_t=p.omega_s)
    dx1, _, _ = generator_derivatives(s, p, term)
    assert dx1 == 0.0


def test_torque_balance_freezes_speed():
    p = params()
    x1, x3, Vt = 0.25, 1.15, 1.01
    pe = electrical_power(x1, x3, Vt, p.Y)
    p2 = p.with_operating_point(Tm=float(pe), Vref=1.05)
    s = MachineState(x1=x1, x2=0.0, x3=x3, Vf=1.0, q=0.0, Ef=1.2,
                     p1=0.0, p2=0.0, p3=0.0)
    term = TerminalSignals(Vt=Vt, theta_t=0.0, omega_t=p.omega_s)
    _, dx2, _ = generator_derivatives(s, p2, term)
    assert dx2 == pytest.approx(0.0, abs=1e-15)


def test_controller_zero_error_input():
    p = params(KA=50.0)
    # voltage error zero: Vf = Vref, PSS at rest -> only the Ef leak remains
    s = MachineState(x1=0.0, x2=0.0, x3=1.0, Vf=p.Vref, q=0.0, Ef=0.7,
                     p1=0.0, p2=0.0, p3=0.0)
    dVf, dq, dEf, dp1, dp2, dp3 = controller_derivatives(s, p, Vt=p.Vref)
    assert dVf == 0.0
    assert dq == 0.0
    assert dEf == pytest.approx(-s.Ef / p.TA, rel=1e-14)


def test_pss_at_rest():
    p = params()
    s = MachineState(x1=0.1, x2=0.0, x3=1.0, Vf=1.0, q=0.0, Ef=1.0,
                     p1=0.0, p2=0.0, p3=0.0)
    assert pss_output(s, p) == 0.0
    _, _, _, dp1, dp2, dp3 = controller_derivatives(s, p, Vt=1.0)
    assert (dp1, dp2, dp3) == (0.0, 0.0, 0.0)


def test_derivatives_match_symbolic_oracle():
    """Second implementation of the 9-state equations in sympy."""
    x1, x2, x3, Vf, q, Ef, p1, p2, p3 = sympy.symbols(
        "x1 x2 x3 Vf q Ef p1 p2 p3")
    Vt, th = sympy.symbols("Vt th")
    a1, a2, a3, a4, Td0p, Tm, ws, wt, Y = sympy.symbols(
        "a1 a2 a3 a4 Td0p Tm ws wt Y")
    TR, TB, TC, TA, KA, Vref = sympy.symbols("TR TB TC TA KA Vref")
    c1, c2, c3, c4, c5 = sympy.symbols("c1 c2 c3 c4 c5")

    vpss = p1 + c3 * x2
    u = Vref - Vf + vpss
    exprs = [
        x2 - wt + ws,
        -a1 * x2 + a2 * (Tm - Y * Vt * x3 * sympy.sin(x1)),
        -a3 * x3 + a4 * Vt * sympy.cos(x1) + Ef / Td0p,
        (Vt - Vf) / TR,
        ((1 - TC / TB) * u - q) / TB,
        (KA * (q + (TC / TB) * u) - Ef) / TA,
        -c1 * p1 + p2 + (c4 - c1 * c3) * x2,
        -c2 * p1 + p3 + (c5 - c2 * c3) * x2,
        -p1 - c1 * c3 * x2,
    ]

    p = params()
    rng = np.random.default_rng(7)
    for _ in range(20):
        sv = rng.uniform(-0.5, 1.5, size=9)
        term = TerminalSignals(Vt=float(rng.uniform(0.9, 1.1)),
                               theta_t=0.0,
                               omega_t=float(p.omega_s + rng.uniform(-1, 1)))
        state = MachineState(*sv)
        got = machine_derivatives(state, p, term)
        subs = {
            x1: sv[0], x2: sv[1], x3: sv[2], Vf: sv[3], q: sv[4], Ef: sv[5],
            p1: sv[6], p2: sv[7], p3: sv[8],
            Vt: term.Vt, wt: term.omega_t, ws: p.omega_s,
            a1: p.a1, a2: p.a2, a3: p.a3, a4: p.a4, Td0p: p.Td0p, Tm: p.Tm,
            Y: p.Y, TR: p.TR, TB: p.TB, TC: p.TC, TA: p.TA, KA: p.KA,
            Vref: p.Vref, c1: p.c1, c2: p.c2, c3: p.c3, c4: p.c4, c5: p.c5,
        }
        want = [float(e.evalf(subs=subs)) for e in exprs]
        np.testing.assert_allclose(got, want, rtol=1e-9, atol=1e-12)
