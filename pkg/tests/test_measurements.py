import numpy as np
import pytest

from mfattitude.errors import ZeroMean
from mfattitude.measurements import (Gaussian, GyroSample, IsotropicGaussian, VectorMeasurement,
                                     VonMisesFisher, gyro_strength, sample_vmf, simulate_gyro,
                                     simulate_vector, sqrt_psd, vmf_from_gaussian)
from mfattitude.sim import rng_stream
from oracles import random_rotation


def test_noise_validation():
    with pytest.raises(ValueError):
        IsotropicGaussian(-1.0)
    with pytest.raises(ValueError):
        Gaussian([[1, 0.5, 0], [0, 1, 0], [0, 0, 1]])
    with pytest.raises(ValueError):
        Gaussian(np.diag([1.0, -0.1, 1.0]))
    with pytest.raises(ValueError):
        VonMisesFisher(0.0)
    q = Gaussian(np.diag([0.01, 0.01, 0.3]))
    assert not q.is_isotropic and Gaussian(0.2 * np.eye(3)).is_isotropic
    with pytest.raises(ValueError):
        q.q[0, 0] = 1.0


def test_vmf_measurement_requires_unit_vectors():
    VectorMeasurement([1, 0, 0], [0, 1, 0], VonMisesFisher(3.0))
    with pytest.raises(ValueError):
        VectorMeasurement([2, 0, 0], [0, 1, 0], VonMisesFisher(3.0))
    with pytest.raises(TypeError):
        VectorMeasurement([1, 0, 0], [0, 1, 0], object())


def test_zero_noise_reading_is_exact(rng):
    truth = random_rotation(rng)
    ref = np.array([0.3, -2.0, 0.5])
    z = simulate_vector(truth, ref, IsotropicGaussian(0.0), rng).measured
    np.testing.assert_array_equal(z, truth.T @ ref)


def test_gaussian_sample_covariance(rng):
    truth = random_rotation(rng)
    q = np.array([[0.02, 0.005, 0.0], [0.005, 0.01, -0.003], [0.0, -0.003, 0.3]])
    ref = np.array([1.0, 2.0, -0.5])
    z = np.array([simulate_vector(truth, ref, Gaussian(q), rng).measured
                  for _ in range(100_000)])
    np.testing.assert_allclose(z.mean(axis=0), truth.T @ ref, atol=4 * np.sqrt(0.3 / 1e5))
    cov = np.cov(z.T)
    assert np.linalg.norm(cov - q) < 0.05 * np.linalg.norm(q)


def test_vmf_draws(rng):
    truth = random_rotation(rng)
    ref = np.array([0.0, 0.6, 0.8])
    for kappa in (0.5, 5.0, 300.0):
        z = np.array([simulate_vector(truth, ref, VonMisesFisher(kappa), rng).measured
                      for _ in range(20_000)])
        np.testing.assert_allclose(np.linalg.norm(z, axis=1), 1.0, atol=1e-12)
        mean = z.mean(axis=0)
        mu = truth.T @ ref
        # the mean direction is mu; its length is the vMF mean resultant
        cos = z @ mu
        expected = 1 / np.tanh(kappa) - 1 / kappa
        assert abs(cos.mean() - expected) < 3 * cos.std() / np.sqrt(len(z))
        perp = mean - (mean @ mu) * mu
        assert np.linalg.norm(perp) < 4 * np.sqrt((1 - cos**2).mean() / len(z))


def test_sample_vmf_large_kappa_is_finite(rng):
    x = sample_vmf([0, 0, 1], 1e6, rng, 1000)
    assert np.all(np.isfinite(x)) and np.all(x[:, 2] > 0.99)


def test_vmf_from_gaussian_examples():
    _, k = vmf_from_gaussian([1, 0, 0], IsotropicGaussian(0.01))
    assert k == pytest.approx(100.0)
    mu = np.array([0.0, 3.0, 4.0])
    _, k_iso = vmf_from_gaussian(mu, IsotropicGaussian(0.2))
    _, k_full = vmf_from_gaussian(mu, Gaussian(0.2 * np.eye(3)))
    assert k_iso == pytest.approx(k_full) == pytest.approx(25 / 0.2)
    unit, k = vmf_from_gaussian([0, 1, 0], Gaussian(np.diag([0.01, 0.01, 0.30])))
    assert k == pytest.approx(9.375)
    np.testing.assert_array_equal(unit, [0, 1, 0])


def test_vmf_from_gaussian_scale_consistent():
    mu = np.array([0.4, -1.2, 0.3])
    _, k = vmf_from_gaussian(mu, IsotropicGaussian(0.05))
    for c in (0.1, 3.0, 70.0):
        _, kc = vmf_from_gaussian(c * mu, IsotropicGaussian(0.05 * c * c))
        assert kc == pytest.approx(k, rel=1e-12)


def test_vmf_from_gaussian_errors():
    with pytest.raises(ZeroMean):
        vmf_from_gaussian([0, 0, 0], IsotropicGaussian(1.0))
    with pytest.raises(TypeError):
        vmf_from_gaussian([1, 0, 0], VonMisesFisher(2.0))


def test_gyro_zero_strength_is_exact(rng):
    w = np.array([0.1, -2.0, 3.0])
    np.testing.assert_array_equal(simulate_gyro(w, np.zeros((3, 3)), 0.02, rng), w)


def test_gyro_increment_statistics(rng):
    h = 0.02
    strength = gyro_strength(1.0)
    w = np.array([0.3, 0.2, -0.1])
    inc = np.array([h * (simulate_gyro(w, strength, h, rng) - w) for _ in range(100_000)])
    g = strength @ strength.T
    assert np.linalg.norm(np.cov(inc.T) - h * g) < 0.05 * np.linalg.norm(h * g)
    # 1 deg/sqrt(s) at 0.02 s: per-axis increment std is sqrt(0.02) deg
    assert np.rad2deg(inc.std(axis=0)) == pytest.approx(np.full(3, np.sqrt(0.02)), rel=0.02)
    assert np.sqrt(GyroSample(w, strength, h).g[0, 0]) == pytest.approx(np.deg2rad(1.0))
    with pytest.raises(ValueError):
        GyroSample(w, strength, 0.0)


def test_independent_streams():
    a = rng_stream(5, 0, 1)
    b = rng_stream(5, 0, 2)
    truth = np.eye(3)
    za = np.array([simulate_vector(truth, [1, 0, 0], IsotropicGaussian(1.0), a).measured
                   for _ in range(20_000)])
    zb = np.array([simulate_vector(truth, [1, 0, 0], IsotropicGaussian(1.0), b).measured
                   for _ in range(20_000)])
    cross = (za - za.mean(0)).T @ (zb - zb.mean(0)) / len(za)
    assert np.max(np.abs(cross)) < 4 / np.sqrt(len(za))


def test_sqrt_psd_symmetric(rng):
    a = rng.normal(size=(3, 3))
    q = a @ a.T
    root = sqrt_psd(q)
    np.testing.assert_allclose(root, root.T, atol=1e-14)
    np.testing.assert_allclose(root @ root, q, atol=1e-12)
