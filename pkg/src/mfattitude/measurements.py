"""Sensor models: vector measurements and rate gyros."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ZeroMean

UNIT_TOL = 1e-9
SYMMETRY_TOL = 1e-12


@dataclass(frozen=True)
class IsotropicGaussian:
    """Additive Gaussian noise with covariance ``sigma2 * I``.

    ``sigma2 = 0`` is accepted for noise-free simulation; estimators that
    divide by the variance reject it.
    """

    sigma2: float

    def __post_init__(self):
        if not (np.isfinite(self.sigma2) and self.sigma2 >= 0.0):
            raise ValueError(f"sigma2 must be finite and non-negative, got {self.sigma2}")

    def cov(self):
        return self.sigma2 * np.eye(3)


@dataclass(frozen=True, eq=False)
class Gaussian:
    """Additive Gaussian noise with a full covariance matrix."""

    q: np.ndarray

    def __post_init__(self):
        q = np.array(self.q, dtype=float).reshape(3, 3)
        if np.max(np.abs(q - q.T)) > SYMMETRY_TOL * max(1.0, np.max(np.abs(q))):
            raise ValueError("covariance must be symmetric")
        if np.min(np.linalg.eigvalsh(q)) < 0.0:
            raise ValueError("covariance must be positive semidefinite")
        q.setflags(write=False)
        object.__setattr__(self, "q", q)

    def cov(self):
        return self.q

    @property
    def is_isotropic(self):
        return np.array_equal(self.q, self.q[0, 0] * np.eye(3))


@dataclass(frozen=True)
class VonMisesFisher:
    """Unit-vector noise with density proportional to exp(kappa * mu^T z)."""

    kappa: float

    def __post_init__(self):
        if not (np.isfinite(self.kappa) and self.kappa > 0.0):
            raise ValueError(f"kappa must be positive, got {self.kappa}")


@dataclass(frozen=True, eq=False)
class VectorMeasurement:
    """Pair of a reference direction (inertial frame) and its body-frame reading."""

    reference: np.ndarray
    measured: np.ndarray
    noise: object

    def __post_init__(self):
        r = np.array(self.reference, dtype=float).reshape(3)
        z = np.array(self.measured, dtype=float).reshape(3)
        if not (np.all(np.isfinite(r)) and np.all(np.isfinite(z))):
            raise ValueError("measurement vectors must be finite")
        if isinstance(self.noise, VonMisesFisher):
            if abs(np.linalg.norm(r) - 1.0) > UNIT_TOL or abs(np.linalg.norm(z) - 1.0) > UNIT_TOL:
                raise ValueError("von Mises-Fisher measurements need unit vectors")
        elif not isinstance(self.noise, (IsotropicGaussian, Gaussian)):
            raise TypeError(f"unknown noise model {self.noise!r}")
        r.setflags(write=False)
        z.setflags(write=False)
        object.__setattr__(self, "reference", r)
        object.__setattr__(self, "measured", z)


@dataclass(frozen=True, eq=False)
class GyroSample:
    """Angular velocity reading held over one step ``dt`` with noise strength ``H``."""

    omega: np.ndarray
    strength: np.ndarray
    dt: float

    def __post_init__(self):
        if not self.dt > 0.0:
            raise ValueError(f"dt must be positive, got {self.dt}")
        object.__setattr__(self, "omega", np.asarray(self.omega, dtype=float).reshape(3))
        object.__setattr__(self, "strength", np.asarray(self.strength, dtype=float).reshape(3, 3))

    @property
    def g(self):
        return self.strength @ self.strength.T


def gyro_strength(sigma_deg_per_sqrt_s):
    """Noise strength H = sigma I from a density given in deg/sqrt(s)."""
    return np.deg2rad(sigma_deg_per_sqrt_s) * np.eye(3)


def sqrt_psd(q):
    """Symmetric square root of a positive semidefinite matrix."""
    w, v = np.linalg.eigh(q)
    return (v * np.sqrt(np.clip(w, 0.0, None))) @ v.T


def sample_vmf(mu, kappa, rng, size=None):
    """Draw unit vectors from the von Mises-Fisher law on the sphere.

    The cosine to the mean direction has a closed-form inverse CDF on S^2;
    the azimuth is uniform.
    """
    mu = np.asarray(mu, dtype=float)
    mu = mu / np.linalg.norm(mu)
    n = 1 if size is None else int(size)
    u = rng.uniform(size=n)
    # log1p form stays accurate for large kappa
    w = 1.0 + np.log(u + (1.0 - u) * np.exp(-2.0 * kappa)) / kappa
    w = np.clip(w, -1.0, 1.0)
    phi = 2.0 * np.pi * rng.uniform(size=n)
    # orthonormal frame around mu
    a = np.eye(3)[np.argmin(np.abs(mu))]
    e1 = np.cross(mu, a)
    e1 /= np.linalg.norm(e1)
    e2 = np.cross(mu, e1)
    rho = np.sqrt(np.clip(1.0 - w * w, 0.0, None))
    x = w[:, None] * mu + rho[:, None] * (np.cos(phi)[:, None] * e1 + np.sin(phi)[:, None] * e2)
    x /= np.linalg.norm(x, axis=1, keepdims=True)
    return x[0] if size is None else x


def simulate_vector(truth, reference, noise, rng):
    """Body-frame reading of ``reference`` under attitude ``truth``."""
    reference = np.asarray(reference, dtype=float)
    mean = truth.T @ reference
    if isinstance(noise, VonMisesFisher):
        z = sample_vmf(mean, noise.kappa, rng)
    elif isinstance(noise, IsotropicGaussian):
        z = mean + np.sqrt(noise.sigma2) * rng.standard_normal(3)
    elif isinstance(noise, Gaussian):
        z = mean + sqrt_psd(noise.q) @ rng.standard_normal(3)
    else:
        raise TypeError(f"unknown noise model {noise!r}")
    return VectorMeasurement(reference, z, noise)


def vmf_from_gaussian(mu, noise):
    """Unit direction and vMF concentration approximating a normalized Gaussian.

    Isotropic noise uses kappa = |mu|^2 / sigma^2; a full covariance uses the
    average dispersion kappa = 3 |mu|^2 / tr(Q).
    """
    mu = np.asarray(mu, dtype=float)
    norm = np.linalg.norm(mu)
    if norm < 1e-12:
        raise ZeroMean(f"|mu| = {norm:.3g}")
    if isinstance(noise, IsotropicGaussian):
        kappa = norm**2 / noise.sigma2
    elif isinstance(noise, Gaussian):
        kappa = 3.0 * norm**2 / np.trace(noise.q)
    else:
        raise TypeError(f"expected a Gaussian noise model, got {noise!r}")
    return mu / norm, float(kappa)


def simulate_gyro(truth_omega, strength, dt, rng):
    """Gyro reading ``omega + H dW / dt`` with ``dW ~ N(0, dt I)``.

    The estimator integrates ``dt * omega_meas``, so the per-step rotation
    increment carries noise with covariance ``dt * H H^T``.
    """
    if not dt > 0.0:
        raise ValueError(f"dt must be positive, got {dt}")
    dw = np.sqrt(dt) * rng.standard_normal(3)
    return np.asarray(truth_omega, dtype=float) + np.asarray(strength) @ dw / dt
