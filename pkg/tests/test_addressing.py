import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import solve_ivp

from gradkit.addressing import (SR88_QUBIT, QubitConstants, build_address_map, crosstalk_at_pi,
                                excitation_probability, required_gradient, splitting,
                                zeeman_shift)
from gradkit.ionchain import SPECIES, equilibrium_positions
from gradkit.magnetostatics import site_report
from gradkit.optimizer import REFERENCE_PARAMS, build_geometry


def two_level_ode(rabi, detuning, duration_us):
    """Upper-state population from integrating the Schrodinger equation.

    H / h = (1/2) [[-detuning, rabi], [rabi, detuning]] with frequencies in kHz
    and time in ms, so phases are 2 pi f t.
    """
    H = 0.5 * np.array([[-detuning, rabi], [rabi, detuning]], dtype=complex)

    def rhs(t, y):
        c = y[:2] + 1j * y[2:]
        d = -2j * np.pi * (H @ c)
        return np.r_[d.real, d.imag]

    sol = solve_ivp(rhs, (0.0, duration_us * 1e-3), [1.0, 0.0, 0.0, 0.0], method="DOP853",
                    rtol=1e-12, atol=1e-13)
    c = sol.y[:2, -1] + 1j * sol.y[2:, -1]
    return abs(c[1]) ** 2


@pytest.mark.parametrize("rabi, detuning, t", [
    (35.0, 190.0, 1e3 / 70), (34.0, 188.5, 1e3 / 68), (9.0, 0.0, 50.0), (9.0, 13.0, 50.0),
    (20.0, -40.0, 77.0),
])
def test_rabi_formula_matches_ode(rabi, detuning, t):
    assert excitation_probability(rabi, detuning, t) == pytest.approx(
        two_level_ode(rabi, detuning, t), abs=1e-6)


def test_khz_per_gauss():
    assert SR88_QUBIT.khz_per_gauss == pytest.approx(2799.249, rel=1e-6)
    assert zeeman_shift(1e-3) == pytest.approx(2.799249, rel=1e-6)


def test_splittings_against_published():
    assert splitting(4.81, 23.0) == pytest.approx(309.68, abs=0.01)
    assert abs(splitting(4.81, 23.0) - 310.0) / 310.0 < 0.02
    assert abs(splitting(4.11, 23.0) - 266.0) / 266.0 < 0.015
    assert abs(splitting(4.81, 14.0) - 190.0) / 190.0 < 0.02


def test_required_gradient():
    assert required_gradient(5.0, 100.0, 1.0) == pytest.approx(7.1448, abs=1e-4)
    assert abs(required_gradient(5.0, 100.0) - 7.2) / 7.2 < 0.01
    with pytest.raises(ValueError):
        required_gradient(5.0, 100.0, 0.5)
    with pytest.raises(ValueError):
        splitting(0.0, 10.0)


@settings(max_examples=60, deadline=None)
@given(st.floats(1, 200), st.floats(-500, 500), st.floats(0, 500))
def test_probability_bounded(rabi, det, t):
    p = excitation_probability(rabi, det, t)
    assert 0.0 <= p <= 1.0
    assert p <= rabi**2 / (rabi**2 + det**2) + 1e-12


@settings(max_examples=40, deadline=None)
@given(st.floats(1, 200))
def test_resonant_pi_pulse_is_complete(rabi):
    assert excitation_probability(rabi, 0.0, 1e3 / (2 * rabi)) == pytest.approx(1.0, abs=1e-12)


@settings(max_examples=40, deadline=None)
@given(st.floats(1, 100), st.floats(1, 1000))
def test_crosstalk_decreases_with_splitting(rabi, sp):
    a = crosstalk_at_pi(rabi, sp)
    b = crosstalk_at_pi(rabi, 2 * sp)
    assert b.envelope < a.envelope
    assert a.instantaneous <= a.envelope + 1e-12
    assert a.time_averaged == pytest.approx(a.envelope / 2)


def test_crosstalk_published_numbers():
    assert crosstalk_at_pi(34.0, 188.5).instantaneous <= 0.028
    ct = crosstalk_at_pi(35.0, 190.0)
    assert 0.012 <= ct.instantaneous <= 0.032 or 0.012 <= ct.time_averaged <= 0.032


def test_from_lande():
    # S1/2 m=-1/2 (g=2) to D5/2 m=-5/2 (g=6/5): |(-3) - (-1)| = 2
    q = QubitConstants.from_lande(2.0, -0.5, 1.2, -2.5)
    assert q.delta_g == pytest.approx(2.0)
    with pytest.raises(ValueError):
        QubitConstants(delta_g=0.0)


def test_address_map_on_reference_layout():
    site = site_report(build_geometry(REFERENCE_PARAMS, 500.0), (0, 0, 100))
    chain = equilibrium_positions(SPECIES["Sr88"], 847.0, 3)
    amap = build_address_map(chain, site, 35.0)
    assert np.all(np.diff(amap.offsets) > 0)
    sp = np.diff(amap.offsets)
    assert np.allclose(sp, splitting(4.1165, site.dBz_dy), rtol=1e-4)
    assert np.all(amap.neighbour_crosstalk() < 0.028)
    assert amap.center_shift == pytest.approx(zeeman_shift(site.residual_b[2]))
