import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from decupsim import euler, oneoverf as of, protocol
from decupsim.errors import ValidationError
from decupsim.series import QubitSpec

CP = protocol.cp_group()


def cp(dt):
    return protocol.bb_schedule(CP, dt)


# ---------------------------------------------------------------- ensembles


def test_density_normalisation():
    ens = of.sample_ensemble(1e-4, 1e2)
    assert ens.log_density_constant == pytest.approx(1 / math.log(1e6))
    assert ens.n_fluctuators == 60


@given(st.floats(1e-6, 1.0), st.floats(1.5, 1e6), st.floats(0.5, 20))
@settings(max_examples=25)
def test_rates_within_bounds_and_count(gmin, ratio, n_d):
    ens = of.sample_ensemble(gmin, gmin * ratio, n_d=n_d, seed=3)
    assert ens.n_fluctuators == max(1, round(n_d * math.log10(ratio)))
    assert np.all((ens.rates >= gmin) & (ens.rates <= gmin * ratio * (1 + 1e-12)))


def test_degenerate_range():
    ens = of.sample_ensemble(100 * (1 - 1e-12), 100.0, n_fluctuators=5)
    assert np.allclose(ens.rates, 100.0)


@pytest.mark.parametrize("stratified", [False, True])
def test_log_rate_mean(stratified):
    gmin, gmax = 1e-4, 1e2
    ens = of.sample_ensemble(gmin, gmax, n_fluctuators=100_000, seed=11, stratified=stratified)
    sigma = math.log(gmax / gmin) / math.sqrt(12) / math.sqrt(ens.n_fluctuators)
    assert abs(np.log(ens.rates).mean() - math.log(math.sqrt(gmin * gmax))) < 3 * sigma


def test_ensemble_validation_and_determinism():
    with pytest.raises(ValidationError):
        of.sample_ensemble(1.0, 0.5)
    with pytest.raises(ValidationError):
        of.sample_ensemble(0.0, 1.0)
    a = of.sample_ensemble(1e-2, 1e2, seed=5)
    b = of.sample_ensemble(1e-2, 1e2, seed=5)
    assert np.array_equal(a.rates, b.rates)
    v = of.sample_ensemble(1e-2, 1e2, v_distribution=lambda rng, m: rng.normal(1.0, 0.1, m), seed=5)
    assert v.couplings.std() > 0


# ---------------------------------------------------------------- trajectories


def test_frozen_fluctuator():
    traj = of.sample_trajectory(of.single_fluctuator(0.0, 2.0), 100.0, seed=1)
    assert traj.switch_times[0].size == 0
    assert np.all(traj.value(np.linspace(0, 100, 9)) == traj.value(0.0))
    with pytest.raises(ValidationError):
        of.sample_trajectory(of.single_fluctuator(1.0, 1.0), 0.0)


def test_switch_count_and_gaps():
    gamma, t = 2.0, 50.0
    ens = of.single_fluctuator(gamma, 1.0)
    counts, gaps = [], []
    for i in range(400):
        st_ = of.sample_trajectory(ens, t, seed=9, index=i).switch_times[0]
        counts.append(st_.size)
        gaps.extend(np.diff(st_))
    mean = gamma * t / 2  # per-direction flip rate gamma / 2
    assert abs(np.mean(counts) - mean) < 3 * math.sqrt(mean / 400)
    assert np.mean(gaps) == pytest.approx(2 / gamma, rel=0.03)
    # exponential gaps: coefficient of variation 1
    assert np.std(gaps) / np.mean(gaps) == pytest.approx(1.0, rel=0.05)


def test_initial_signs_balanced():
    ens = of.single_fluctuator(1.0, 1.0)
    signs = [of.sample_trajectory(ens, 1.0, seed=4, index=i).initial_signs[0] for i in range(2000)]
    assert abs(np.mean(signs)) < 3 / math.sqrt(2000)


def test_autocorrelation():
    gamma, v = 1.0, 2.0
    ens = of.single_fluctuator(gamma, v)
    lags = np.array([0.0, 0.5, 1.0, 2.0])
    prods = []
    for i in range(3000):
        traj = of.sample_trajectory(ens, 2.5, seed=2, index=i)
        prods.append(traj.value(lags) * traj.value(0.0))
    prods = np.array(prods)
    expect = v**2 / 4 * np.exp(-gamma * lags)
    err = prods.std(axis=0) / math.sqrt(len(prods))
    assert np.all(np.abs(prods.mean(axis=0) - expect) < 3.5 * np.maximum(err, 1e-12))


# ---------------------------------------------------------------- spectra


def test_zero_coupling_spectrum():
    ens = of.FluctuatorEnsemble([1.0, 2.0], [0.0, 0.0], 1.0, 2.0, 1.0, 0.0)
    psd = of.estimate_psd(ens, 50.0, 3)
    assert not psd.power.any()


def test_single_fluctuator_lorentzian():
    ens = of.single_fluctuator(1.0, 1.0)
    psd = of.estimate_psd(ens, 400.0, 100, seed=1)
    assert psd.half_power_point(0.1, 30.0) == pytest.approx(1.0, rel=0.2)
    w, s = psd.binned(0.2, 5.0, 8)
    assert np.allclose(s, ens.spectrum(w), rtol=0.15)


def test_short_record_warns():
    ens = of.sample_ensemble(1e-3, 1.0)
    with pytest.warns(UserWarning):
        of.estimate_psd(ens, 100.0, 1, dt=0.5)


def test_psd_validation():
    ens = of.single_fluctuator(1.0, 1.0)
    with pytest.raises(ValidationError):
        of.estimate_psd(ens, 1.0, 0)
    with pytest.raises(ValidationError):
        of.estimate_psd(ens, 1.0, 1, dt=0.5)


# ---------------------------------------------------------------- deterministic references


def test_exact_reference_matches_closed_form():
    gamma, v = 1.0, 1.4
    t = np.linspace(0, 6, 13)
    lam = np.sqrt(gamma**2 / 4 - v**2 + 0j)
    closed = np.abs(np.exp(-gamma * t / 2) * (np.cosh(lam * t) + gamma / (2 * lam) * np.sinh(lam * t)))
    ens = of.single_fluctuator(gamma, v)
    assert np.allclose(of.exact_dephasing_coherence(ens, t).coherence, closed, atol=1e-12)
    assert np.allclose(of.telegraph_ode_coherence(gamma, v, t), closed, atol=1e-8)


def test_exact_reference_under_cp_is_stroboscopically_periodic_for_frozen_noise():
    ens = of.single_fluctuator(0.0, 1.0)
    c = of.exact_dephasing_coherence(ens, [0.0, 1.0, 2.0, 4.0], control=(1.0, (1.0, -1.0)))
    assert np.allclose(c.coherence[[0, 2, 3]], 1.0)
    # frozen +-v/2 noise: phase +-v at t = 1, averaged over the sign
    assert c.coherence[1] == pytest.approx(abs(math.cos(1.0)))


# ---------------------------------------------------------------- Monte Carlo


def test_zero_coupling_gives_unit_coherence():
    ens = of.FluctuatorEnsemble([1.0, 10.0], [0.0, 0.0], 1.0, 10.0, 1.0, 0.0)
    s = of.controlled_coherence(ens, cp(0.5), n_cycles=4, n_traj=100)
    assert np.all(s.coherence == 1.0) and np.all(s.gamma_c == 0)


def test_min_trajectories_and_inputs():
    ens = of.single_fluctuator(1.0, 1.0)
    with pytest.raises(ValidationError):
        of.controlled_coherence(ens, cp(1.0), n_cycles=2, n_traj=50)
    with pytest.raises(ValidationError):
        of.controlled_coherence(ens, None, n_traj=100)
    es = euler.eulerian_schedule(CP, 1.0)
    with pytest.raises(ValidationError, match="substeps"):
        of.controlled_coherence(ens, es, QubitSpec(1.0, 0.2), n_cycles=2, n_traj=100)


def test_free_mc_matches_ode_oracle():
    gamma, v = 1.0, 1.0
    t = np.linspace(0, 4, 9)
    s = of.controlled_coherence(of.single_fluctuator(gamma, v), None, times=t, n_traj=20000, seed=8)
    ode = of.telegraph_ode_coherence(gamma, v, t)
    assert np.all(np.abs(s.coherence - ode) <= 3 * s.stderr + 1e-12)


def test_cp_mc_matches_exact_reference():
    ens = of.sample_ensemble(0.1, 10.0, n_d=3, mean_v=0.8, seed=1)
    s = of.controlled_coherence(ens, cp(0.4), n_cycles=8, n_traj=4000, seed=3)
    ref = of.exact_dephasing_coherence(ens, s.times, control=(0.4, (1.0, -1.0))).coherence
    assert np.all(np.abs(s.coherence - ref) <= 3 * s.stderr + 1e-12)


def test_fast_control_preserves_coherence():
    ens = of.sample_ensemble(1e-2, 100.0, mean_v=1e-2, seed=0)
    dt = 0.001 / 100.0
    s = of.controlled_coherence(ens, cp(dt), n_cycles=50, n_traj=100, seed=0)
    assert np.all(s.coherence >= 1 - 2 * s.stderr - 1e-9)


def test_exact_path_agrees_with_phase_path():
    ens = of.sample_ensemble(0.1, 10.0, n_d=3, mean_v=0.8, seed=1)
    a = of.controlled_coherence(ens, cp(0.4), n_cycles=5, n_traj=200, seed=3)
    b = of.controlled_coherence(ens, cp(0.4), n_cycles=5, n_traj=200, seed=3, pulse_error=1e-13)
    assert np.allclose(a.coherence, b.coherence, atol=1e-9)


def test_workers_do_not_change_results():
    ens = of.sample_ensemble(0.1, 10.0, n_d=3, mean_v=0.8, seed=1)
    runs = [of.controlled_coherence(ens, cp(0.4), n_cycles=5, n_traj=150, seed=3, workers=w) for w in (1, 3, 8)]
    for r in runs[1:]:
        assert np.array_equal(r.coherence, runs[0].coherence)
        assert np.array_equal(r.stderr, runs[0].stderr)
    es = euler.eulerian_schedule(protocol.pauli_group(), 0.2, kind="sine")
    e1 = of.controlled_coherence(ens, es, n_cycles=3, n_traj=100, seed=3, workers=1, substeps=4)
    e8 = of.controlled_coherence(ens, es, n_cycles=3, n_traj=100, seed=3, workers=8, substeps=4)
    assert np.array_equal(e1.coherence, e8.coherence)


def test_transverse_drift_exact_path():
    ens = of.sample_ensemble(0.1, 10.0, n_d=3, mean_v=0.3, seed=1)
    s = of.controlled_coherence(ens, cp(0.2), QubitSpec(1.0, 0.5), n_cycles=5, n_traj=200, seed=0)
    assert s.coherence[0] == 1.0
    assert np.all(s.coherence <= 1 + 3 * s.stderr)


@given(st.sampled_from([0.8, 0.4, 0.2]))
@settings(max_examples=3)
def test_halving_dt_never_hurts(dt):
    ens = of.sample_ensemble(0.05, 20.0, n_d=3, mean_v=1.0, seed=2)
    t = 2 * dt * np.arange(11)
    coarse = of.dephasing_scan(ens, [(dt, (1.0, -1.0)), (dt / 2, (1.0, -1.0))], [t, t], 400, seed=1)
    a, b = coarse
    assert np.all(b.coherence >= a.coherence - 2 * np.hypot(a.stderr, b.stderr))


def test_values_bounded():
    ens = of.sample_ensemble(0.1, 10.0, n_d=3, mean_v=2.0, seed=1)
    s = of.controlled_coherence(ens, None, times=np.linspace(0, 5, 11), n_traj=100)
    assert np.all((s.coherence >= 0) & (s.coherence <= 1 + 3 * s.stderr))


# ---------------------------------------------------------------- free vs Carr-Purcell 1/f runs


def test_fig3_case_parameters():
    assert of.FIG3_CASES["a"]["gamma_min"] == 1e-4 and of.FIG3_CASES["a"]["mean_v"] == 1e-4
    assert of.FIG3_CASES["c"]["dt_list"] == (10.0, 1.0, 0.1)
    with pytest.raises(ValidationError):
        of.fig3_experiment("z")


def test_fig3_case_c_small():
    res = of.fig3_experiment("c", n_traj=100, seed=1)
    assert res.ensemble.gamma_min == 1e-4 and res.ensemble.mean_v == 1e-2
    assert len(res.series) == 4
    for s in res.series:
        assert s.coherence[0] == 1.0
    assert res.free.first_crossing(0.2) == pytest.approx(res.horizon)
    for d, s in res.controlled.items():
        assert s.times[-1] >= res.horizon - 1e-9
    ends = {s.times[-1] for s in res.controlled.values()}
    assert max(ends) - min(ends) < 1e-9
