import numpy as np
import pytest
import scipy.linalg
from hypothesis import given
from hypothesis import strategies as st

from decupsim import qmat
from decupsim.errors import ValidationError

coef = st.floats(-3, 3, allow_nan=False)


def herm(a, b, c, d):
    return a * qmat.I2 + b * qmat.SX + c * qmat.SY + d * qmat.SZ


def test_pauli_algebra():
    assert np.allclose(qmat.SX @ qmat.SY, 1j * qmat.SZ)
    assert np.allclose(qmat.commutator(qmat.SX, qmat.SY), 2j * qmat.SZ)
    for p in qmat.PAULI.values():
        assert qmat.is_hermitian(p) and qmat.is_unitary(p)


def test_validation_rejects_bad_input():
    with pytest.raises(ValidationError):
        qmat.as_operator(np.ones(3))
    with pytest.raises(ValidationError):
        qmat.require_hermitian(np.array([[0, 1], [0, 0]]))
    with pytest.raises(ValidationError):
        qmat.require_unitary(2 * qmat.I2)
    with pytest.raises(ValidationError):
        qmat.PiecewiseHamiltonian([])
    with pytest.raises(ValidationError):
        qmat.PiecewiseHamiltonian([(0.0, qmat.SZ)])


@given(coef, coef, coef, coef, st.floats(-5, 5))
def test_expm_matches_scipy_and_is_unitary(a, b, c, d, t):
    h = herm(a, b, c, d)
    u = qmat.expm(h, t)
    assert np.allclose(u, scipy.linalg.expm(-1j * h * t), atol=1e-10)
    assert qmat.is_unitary(u)


@given(coef, coef, coef, st.floats(0, 2 * np.pi))
def test_phase_distance_ignores_global_phase(b, c, d, phi):
    u = qmat.expm(herm(0, b, c, d), 1.0)
    assert qmat.phase_distance(u, np.exp(1j * phi) * u) < 1e-12
    assert qmat.equal_up_to_phase(u, np.exp(1j * phi) * u)


def test_phase_distance_separates_distinct_unitaries():
    assert qmat.phase_distance(qmat.SX, qmat.SZ) > 1.0
    assert qmat.frobenius_distance(qmat.SX, -qmat.SX) == pytest.approx(np.sqrt(8))


@given(coef, coef, coef)
def test_unitary_generator_roundtrip(b, c, d):
    u = qmat.expm(herm(0, b, c, d), 1.0)
    direction, angle = qmat.unitary_generator(u)
    assert 0 <= angle <= np.pi + 1e-12
    assert qmat.equal_up_to_phase(qmat.expm(direction, angle), u, atol=1e-7)


def test_unitary_generator_of_pauli_x():
    direction, angle = qmat.unitary_generator(qmat.SX)
    assert angle == pytest.approx(np.pi / 2)
    assert np.allclose(direction, qmat.SX) or np.allclose(direction, -qmat.SX)
    d0, a0 = qmat.unitary_generator(qmat.I2)
    assert a0 == 0 and not d0.any()


def test_constant_segments_are_exact():
    ham = qmat.PiecewiseHamiltonian([(0.3, qmat.SX), (0.5, qmat.SZ)])
    u = qmat.time_ordered_propagator(ham, 0.8, substeps_per_segment=1)
    assert np.allclose(u, qmat.expm(qmat.SZ, 0.5) @ qmat.expm(qmat.SX, 0.3))
    assert ham.total_duration == pytest.approx(0.8)
    with pytest.raises(ValidationError):
        qmat.time_ordered_propagator(ham, 1.0)


def test_midpoint_rule_converges_at_second_order():
    # rotating drive: exact solution is known in closed form
    w, a = 1.3, 0.7

    def gen(s):
        return a * (np.cos(w * s) * qmat.SX + np.sin(w * s) * qmat.SY)

    t = 2.0
    ham = qmat.PiecewiseHamiltonian([(t, gen)])
    exact = qmat.expm(0.5 * w * qmat.SZ, t) @ qmat.expm(a * qmat.SX - 0.5 * w * qmat.SZ, t)
    e1 = np.linalg.norm(qmat.time_ordered_propagator(ham, t, 32) - exact)
    e2 = np.linalg.norm(qmat.time_ordered_propagator(ham, t, 64) - exact)
    assert e2 < e1 / 3.5
    u, err = qmat.propagator_with_error(ham, t, 64)
    assert np.linalg.norm(u - exact) < err
