import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import integrate

from decupsim import spinboson as sb
from decupsim.errors import ConvergenceError, ValidationError


def small_bath(n=1, g=0.08, temperature=0.0):
    w = np.linspace(0.7, 1.3, n)
    return sb.BosonBath(w, np.full(n, g), temperature)


def test_zero_coupling_keeps_coherence():
    bath = sb.BosonBath([1.0, 2.0], [0.0, 0.0])
    t = np.linspace(0, 10, 5)
    assert np.allclose(sb.free_coherence(bath, t).coherence, 1.0)
    assert np.allclose(sb.cp_coherence(bath, 0.5, n_cycles=4).coherence, 1.0)


def test_single_mode_free_decay_closed_form():
    bath = small_bath()
    t = np.linspace(0, 12, 7)
    w, g = bath.omega[0], bath.g[0]
    expected = np.exp(-4 * (g / w) ** 2 * (1 - np.cos(w * t)))
    assert np.allclose(sb.free_coherence(bath, t).coherence, expected, atol=1e-14)


def test_free_decay_is_periodic_for_one_mode():
    bath = small_bath()
    period = 2 * np.pi / bath.omega[0]
    c = sb.free_coherence(bath, [0.0, period, 2 * period]).coherence
    assert np.allclose(c, 1.0)


def test_temperature_increases_decay():
    t = [5.0]
    cold = sb.free_coherence(small_bath(3), t).coherence[0]
    warm = sb.free_coherence(small_bath(3, temperature=1.0), t).coherence[0]
    assert warm < cold < 1


@given(st.floats(0.1, 5), st.floats(0.05, 2), st.floats(0, 9))
def test_cp_filter_matches_quadrature(w, dt, t):
    f = sb.cp_filter(np.array([w]), dt, [t])[0, 0]
    breaks = [x for x in dt * np.arange(1, int(t / dt) + 1) if x < t]
    eps = lambda s: 1.0 if int(np.floor(s / dt)) % 2 == 0 else -1.0
    re = integrate.quad(lambda s: eps(s) * np.cos(w * s), 0, t, points=breaks or None, limit=400)[0]
    im = integrate.quad(lambda s: eps(s) * np.sin(w * s), 0, t, points=breaks or None, limit=400)[0]
    assert abs(f - (re + 1j * im)) < 1e-8


def test_cp_filter_without_pulses_is_free():
    w = np.array([0.5, 1.5])
    t = [0.3]
    free = (np.exp(1j * w * 0.3) - 1) / (1j * w)
    assert np.allclose(sb.cp_filter(w, 1.0, t)[:, 0], free)


def test_ohmic_bath_defaults():
    bath = sb.ohmic_bath()
    assert bath.n_modes == 20 and bath.omega_max == pytest.approx(1.0)
    with pytest.raises(ValidationError):
        sb.ohmic_bath(n_modes=0)


@pytest.mark.parametrize("n_cycles", [1, 2, 4])
def test_analytic_matches_fock_oracle(n_cycles):
    bath = small_bath(2)
    dt = 0.6
    t = 2 * dt * n_cycles
    ref = sb.fock_oracle(bath, 12, sb.cp_pulse_times(dt, n_cycles), t)
    assert sb.cp_coherence(bath, dt, n_cycles).coherence[-1] == pytest.approx(ref, abs=1e-10)


def test_fock_oracle_free_and_thermal():
    bath = small_bath(1, temperature=0.5)
    ref = sb.fock_oracle(bath, 16, [], 3.0)
    assert sb.free_coherence(bath, [3.0]).coherence[0] == pytest.approx(ref, abs=1e-10)


def test_fock_oracle_detects_unconverged_cutoff():
    with pytest.raises(ConvergenceError):
        sb.fock_oracle(small_bath(1, g=0.6), 2, [], 3.0)
    with pytest.raises(ValidationError):
        sb.fock_oracle(small_bath(4), 4, [], 1.0)


def test_pulse_error_path_sum():
    bath = small_bath(2)
    exact = sb.cp_coherence(bath, 0.5, n_cycles=2).coherence
    nearly = sb.cp_coherence(bath, 0.5, n_cycles=2, pulse_error=1e-9).coherence
    assert np.allclose(exact, nearly, atol=1e-7)
    faulty = sb.cp_coherence(bath, 0.5, n_cycles=2, pulse_error=0.1)
    ref = sb.fock_oracle(bath, 12, sb.cp_pulse_times(0.5, 2), 2.0, pulse_angle=np.pi * 1.1)
    assert faulty.coherence[-1] == pytest.approx(ref, abs=1e-9)
    with pytest.raises(ValidationError):
        sb.cp_coherence(bath, 0.5, n_cycles=6, pulse_error=0.1)


@given(st.floats(0.01, 0.5))
def test_cp_protection_improves_when_dt_halves(dt):
    bath = sb.ohmic_bath()
    t = [50.0]
    coarse = sb.cp_coherence(bath, dt, times=t).coherence[0]
    fine = sb.cp_coherence(bath, dt / 2, times=t).coherence[0]
    assert fine >= coarse - 1e-12


def test_slow_cp_gives_no_protection():
    bath = sb.ohmic_bath()
    t = np.array([20.0, 40.0])
    free = sb.free_coherence(bath, t).coherence
    slow = sb.cp_coherence(bath, 10.0, times=t).coherence
    assert np.all(slow <= free + 0.05)


def test_coherence_bounded():
    bath = sb.ohmic_bath(temperature=0.3)
    t = np.linspace(0, 30, 61)
    for s in (sb.free_coherence(bath, t), sb.cp_coherence(bath, 0.3, times=t)):
        assert np.all((s.coherence >= 0) & (s.coherence <= 1 + 1e-12))
        assert np.all(s.gamma_c >= -1e-12)
