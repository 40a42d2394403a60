import numpy as np
import pytest

from mfattitude import so3
from mfattitude.baselines import (MekfState, measurement_jacobian, mekf_from_fisher,
                                  mekf_propagate, mekf_uncertainty_deg, mekf_update,
                                  norm_be_preprocess)
from mfattitude.errors import IncompatibleNoiseModel, SingularInnovation
from mfattitude.estimator import EstimatorState, correct_conjugate, correct_full
from mfattitude.matrix_fisher import MatrixFisher, mode
from mfattitude.measurements import (Gaussian, GyroSample, IsotropicGaussian, VectorMeasurement,
                                     VonMisesFisher)
from oracles import random_rotation


def test_from_fisher_mapping(rng):
    s = np.array([7.0, 4.0, -1.0])
    u, v = random_rotation(rng), random_rotation(rng)
    mf = MatrixFisher(u @ np.diag(s) @ v.T)
    st = mekf_from_fisher(mf)
    np.testing.assert_allclose(st.p, np.diag([1 / 3, 1 / 6, 1 / 11]), atol=1e-12)
    np.testing.assert_allclose(st.attitude, mode(mf), atol=1e-14)
    half = mekf_from_fisher(MatrixFisher(so3.exp_so3([np.pi, 0, 0])))
    np.testing.assert_allclose(half.p, 0.5 * np.eye(3), atol=1e-15)


def test_propagate_static_cases(rng):
    st = MekfState(random_rotation(rng), np.diag([0.3, 0.2, 0.1]))
    out = mekf_propagate(st, GyroSample(np.zeros(3), np.zeros((3, 3)), 0.02))
    np.testing.assert_array_equal(out.attitude, st.attitude)
    np.testing.assert_array_equal(out.p, st.p)
    sigma = 0.05
    out = mekf_propagate(st, GyroSample(np.zeros(3), sigma * np.eye(3), 0.02))
    np.testing.assert_allclose(out.p, st.p + 0.02 * sigma**2 * np.eye(3), atol=1e-17)


def test_propagate_follows_rate(rng):
    st = MekfState(random_rotation(rng), 0.1 * np.eye(3))
    w = np.array([0.5, -1.0, 2.0])
    out = mekf_propagate(st, GyroSample(w, np.zeros((3, 3)), 0.02))
    np.testing.assert_allclose(out.attitude, st.attitude @ so3.exp_so3(0.02 * w), atol=1e-14)


def test_covariance_stays_psd(rng):
    st = MekfState(np.eye(3), 0.5 * np.eye(3))
    refs = np.eye(3)
    for k in range(3000):
        st = mekf_propagate(st, GyroSample(rng.normal(size=3) * 3, 0.02 * np.eye(3), 0.02))
        if k % 5 == 0:
            meas = [VectorMeasurement(r, st.attitude.T @ r + 0.2 * rng.normal(size=3),
                                      IsotropicGaussian(0.04)) for r in refs]
            st = mekf_update(st, meas)
        np.testing.assert_allclose(st.p, st.p.T, atol=1e-12)
        assert np.min(np.linalg.eigvalsh(st.p)) >= -1e-12
    assert so3.is_rotation(st.attitude)


def test_jacobian_matches_finite_differences(rng):
    worst = 0.0
    for _ in range(20):
        att = random_rotation(rng)
        ref = rng.normal(size=3)
        jac = measurement_jacobian(att, ref)
        h = 1e-6
        fd = np.empty((3, 3))
        for i, e in enumerate(np.eye(3)):
            plus = (att @ so3.exp_so3(h * e)).T @ ref
            minus = (att @ so3.exp_so3(-h * e)).T @ ref
            fd[:, i] = (plus - minus) / (2 * h)
        worst = max(worst, np.max(np.abs(jac - fd)) / np.max(np.abs(fd)))
    assert worst < 1e-4


def test_update_converges_on_clean_readings(rng):
    truth = random_rotation(rng)
    st = MekfState(truth @ so3.exp_so3([0.15, -0.1, 0.05]), 10.0 * np.eye(3))
    refs = [np.array([1.0, 0, 0]), np.array([0, 1.0, 0])]
    for _ in range(5):
        st = mekf_update(st, [VectorMeasurement(r, truth.T @ r, IsotropicGaussian(1e-4))
                              for r in refs])
    assert np.rad2deg(so3.geodesic_angle(st.attitude, truth)) < 0.5


def test_huge_noise_is_no_op(rng):
    st = MekfState(random_rotation(rng), np.diag([0.2, 0.1, 0.3]))
    m = VectorMeasurement([1, 0, 0], [0, 1, 0], IsotropicGaussian(1e12))
    out = mekf_update(st, [m])
    np.testing.assert_allclose(out.attitude, st.attitude, atol=1e-9)
    np.testing.assert_allclose(out.p, st.p, atol=1e-9)


def test_batch_equals_sequential(rng):
    truth = random_rotation(rng)
    st = MekfState(truth @ so3.exp_so3([0.01, 0.02, -0.01]), 0.01 * np.eye(3))
    m1 = VectorMeasurement([1, 0, 0], truth.T @ [1, 0, 0] + [0.01, 0, 0], IsotropicGaussian(0.01))
    m2 = VectorMeasurement([0, 0, 1], truth.T @ [0, 0, 1] + [0, -0.01, 0], Gaussian(np.diag([0.01, 0.02, 0.03])))
    both = mekf_update(st, [m1, m2])
    seq = mekf_update(mekf_update(st, [m1]), [m2])
    np.testing.assert_allclose(both.attitude, seq.attitude, atol=1e-6)
    np.testing.assert_allclose(both.p, seq.p, atol=1e-6)


def test_update_errors():
    st = MekfState(np.eye(3), np.eye(3))
    with pytest.raises(IncompatibleNoiseModel):
        mekf_update(st, [VectorMeasurement([1, 0, 0], [1, 0, 0], VonMisesFisher(3.0))])
    with pytest.raises(SingularInnovation):
        mekf_update(st, [VectorMeasurement([1, 0, 0], [1, 0, 0], IsotropicGaussian(0.0))])


def test_uncertainty_scalar():
    st = MekfState(np.eye(3), np.diag([0.1, 0.2, 0.3]))
    assert mekf_uncertainty_deg(st) == pytest.approx(np.rad2deg(np.sqrt(0.6)))


def test_norm_be_preprocess():
    m = VectorMeasurement([2, 0, 0], [0, 1.9, 0.1], IsotropicGaussian(0.5))
    (out,) = norm_be_preprocess([m])
    assert out.noise.kappa == pytest.approx(4 / 0.5)
    np.testing.assert_allclose(np.linalg.norm(out.measured), 1.0)
    np.testing.assert_allclose(out.reference, [1, 0, 0])
    (out,) = norm_be_preprocess([VectorMeasurement([0, 1, 0], [0, 1, 0],
                                                   Gaussian(np.diag([0.01, 0.01, 0.30])))])
    assert out.noise.kappa == pytest.approx(9.375)
    with pytest.raises(IncompatibleNoiseModel):
        norm_be_preprocess([out])


def test_unit_vmf_readings_update_identically(rng):
    st = EstimatorState(MatrixFisher(random_rotation(rng) * 3.0))
    meas = [VectorMeasurement(r, random_rotation(rng) @ r, VonMisesFisher(k))
            for r, k in zip(np.eye(3), (2.0, 5.0, 9.0))]
    np.testing.assert_array_equal(correct_full(st, meas).belief.f,
                                  correct_conjugate(st, meas).belief.f)
