"""Comparison estimators: a multiplicative EKF and the normalized-vector filter.

MEKF conventions, in one place:

* error state ``dtheta`` is body-frame and right-multiplicative,
  ``R = R_hat exp(hat(dtheta))``;
* the predicted reading is ``z_hat = R_hat^T r``; to first order
  ``R^T r = z_hat + hat(z_hat) dtheta``, so the measurement sensitivity is
  ``hat(z_hat)``;
* propagation ``R_hat <- R_hat exp(h hat(omega))`` transports the error with
  ``Phi = exp(-h hat(omega))``; gyro noise adds ``h G``;
* updates are sequential per vector, Joseph form, followed by the reset
  ``R_hat <- R_hat exp(hat(dtheta))``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import so3
from .errors import IncompatibleNoiseModel, SingularInnovation
from .matrix_fisher import mode
from .measurements import Gaussian, IsotropicGaussian, VectorMeasurement, VonMisesFisher, vmf_from_gaussian

INNOVATION_COND_LIMIT = 1e12


@dataclass(frozen=True, eq=False)
class MekfState:
    attitude: np.ndarray
    p: np.ndarray


def mekf_from_fisher(mf):
    """MEKF state with matching attitude and covariance diag(1/(s_j + s_k))."""
    s = mf.s
    p = np.diag([1.0 / (s[1] + s[2]), 1.0 / (s[0] + s[2]), 1.0 / (s[0] + s[1])])
    return MekfState(mode(mf), p)


def mekf_propagate(state, gyro):
    h = gyro.dt
    phi = so3.exp_so3(-h * gyro.omega)
    p = phi @ state.p @ phi.T + h * gyro.g
    return MekfState(state.attitude @ phi.T, 0.5 * (p + p.T))


def measurement_jacobian(attitude, reference):
    """Sensitivity of the predicted reading to the error state."""
    return so3.hat(attitude.T @ reference)


def mekf_update(state, meas):
    r_hat = state.attitude
    p = state.p
    for mz in meas:
        if isinstance(mz.noise, VonMisesFisher):
            raise IncompatibleNoiseModel("MEKF expects Gaussian vector noise")
        q = mz.noise.cov()
        z_hat = r_hat.T @ mz.reference
        hm = so3.hat(z_hat)
        s = hm @ p @ hm.T + q
        if not np.all(np.isfinite(s)) or np.linalg.cond(s) > INNOVATION_COND_LIMIT:
            raise SingularInnovation("innovation covariance is singular")
        k = np.linalg.solve(s, hm @ p).T
        dtheta = k @ (mz.measured - z_hat)
        a = np.eye(3) - k @ hm
        p = a @ p @ a.T + k @ q @ k.T
        p = 0.5 * (p + p.T)
        r_hat = r_hat @ so3.exp_so3(dtheta)
    return MekfState(so3.project_to_so3(r_hat), p)


def mekf_uncertainty_deg(state):
    return float(np.rad2deg(np.sqrt(np.trace(state.p))))


def norm_be_preprocess(meas):
    """Replace Gaussian readings by unit readings with a matched vMF concentration.

    The concentration uses the reference magnitude as the Gaussian mean norm.
    """
    out = []
    for mz in meas:
        if not isinstance(mz.noise, (IsotropicGaussian, Gaussian)):
            raise IncompatibleNoiseModel("measurement is not Gaussian; nothing to normalize")
        r_unit, kappa = vmf_from_gaussian(mz.reference, mz.noise)
        z_unit, _ = vmf_from_gaussian(mz.measured, mz.noise)
        out.append(VectorMeasurement(r_unit, z_unit, VonMisesFisher(kappa)))
    return out
