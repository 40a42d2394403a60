"""Bayesian attitude estimator with matrix Fisher beliefs.

One filter cycle propagates the first moment along the gyro kinematics and
refits the belief, then corrects with vector measurements. Isotropic Gaussian
and von Mises-Fisher readings update the parameter matrix exactly (conjugate
rank-one sums). Non-isotropic Gaussian readings go through an unscented
transform: sigma-point Wahba solutions are averaged into a first moment,
which is turned into a matrix Fisher likelihood by moment matching.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from . import so3
from .errors import CollinearReferences, IncompatibleNoiseModel
from .matrix_fisher import MatrixFisher, first_moment, fit_from_moment, mode
from .measurements import Gaussian, IsotropicGaussian, VonMisesFisher, sqrt_psd

# Relative size of the second singular value of a Wahba matrix below which
# the references count as collinear.
COLLINEAR_TOL = 1e-9


@dataclass(frozen=True)
class UtConfig:
    """Unscented transform settings.

    ``degenerate`` picks what happens when the non-isotropic subset cannot fix
    an attitude (a single vector, or collinear references): ``"isotropic"``
    replaces each covariance by its average variance tr(Q)/3 and uses the
    conjugate update, ``"raise"`` raises ``CollinearReferences``.
    """

    kappa_ut: float = 1.0
    d: int = 3
    degenerate: str = "isotropic"

    def __post_init__(self):
        if not self.kappa_ut > 0.0:
            raise ValueError(f"kappa_ut must be positive, got {self.kappa_ut}")
        if self.d != 3:
            raise ValueError("vector measurements are three-dimensional")
        if self.degenerate not in ("isotropic", "raise"):
            raise ValueError(f"unknown degenerate policy {self.degenerate!r}")


@dataclass(frozen=True)
class EstimatorState:
    belief: MatrixFisher
    time_index: int = 0


def _is_conjugate(noise):
    if isinstance(noise, (IsotropicGaussian, VonMisesFisher)):
        return True
    return isinstance(noise, Gaussian) and noise.is_isotropic


def _conjugate_weight(noise):
    if isinstance(noise, VonMisesFisher):
        return noise.kappa
    var = noise.sigma2 if isinstance(noise, IsotropicGaussian) else noise.q[0, 0]
    if not var > 0.0:
        raise IncompatibleNoiseModel("zero-variance Gaussian measurement")
    return 1.0 / var


def propagate(state, gyro, diagnostics=None):
    """Advance the belief one gyro step.

    E(R') = E(R) (I + h/2 (G - tr(G) I)) exp(h hat(omega)), then refit.
    """
    mf = state.belief
    h = gyro.dt
    step = so3.exp_so3(h * gyro.omega)
    g = gyro.g
    if not np.any(g):
        # noiseless transport keeps the concentration
        nxt = MatrixFisher.from_svd(mf.u, mf.s, step.T @ mf.v, logc=mf.logc, d=mf.d)
        return EstimatorState(nxt, state.time_index + 1)
    diff = np.eye(3) + 0.5 * h * (g - np.trace(g) * np.eye(3))
    m = first_moment(mf) @ diff @ step
    nxt = fit_from_moment(m, warm_s=mf.s, diagnostics=diagnostics)
    return EstimatorState(nxt, state.time_index + 1)


def conjugate_increment(meas):
    """Sum of weighted outer products r z^T for conjugate-compatible readings."""
    inc = np.zeros((3, 3))
    for mz in meas:
        if not _is_conjugate(mz.noise):
            raise IncompatibleNoiseModel(
                f"{type(mz.noise).__name__} noise needs the unscented update")
        inc += _conjugate_weight(mz.noise) * np.outer(mz.reference, mz.measured)
    return inc


def correct_conjugate(state, meas):
    """Exact posterior for isotropic Gaussian and vMF readings."""
    if not meas:
        return state
    f = state.belief.f + conjugate_increment(meas)
    return EstimatorState(MatrixFisher(f), state.time_index)


def wahba_svd(meas, weights=None):
    """Attitude minimizing the weighted Wahba loss, via the SVD of sum w r z^T."""
    if weights is None:
        weights = np.ones(len(meas))
    r = np.array([m.reference for m in meas], dtype=float).reshape(-1, 3)
    z = np.array([m.measured for m in meas], dtype=float).reshape(-1, 3)
    b = np.einsum("n,ni,nj->ij", np.asarray(weights, dtype=float), r, z)
    svd = so3.proper_svd(b)
    if svd.s[1] <= COLLINEAR_TOL * max(svd.s[0], 1e-300):
        raise CollinearReferences("Wahba matrix has rank < 2")
    return svd.rotation()


@lru_cache(maxsize=256)
def _sigma_offsets(q_bytes, scale):
    q = np.frombuffer(q_bytes).reshape(3, 3)
    root = sqrt_psd(scale * q)
    # columns j and their negatives
    return np.concatenate([root.T, -root.T])


def ut_sigma_offsets(q, scale):
    """Rows are the 2d sigma offsets +-columns of sqrt(scale * q)."""
    return _sigma_offsets(np.ascontiguousarray(q, dtype=float).tobytes(), float(scale))


def unscented_likelihood(meas, ut=UtConfig()):
    """Sigma-point approximation of the first moment of the Wahba attitude.

    The base set uses every measurement unperturbed; each of the 2dN
    perturbed sets moves exactly one measurement by one sigma offset. Every
    set yields an unweighted Wahba attitude, and the attitudes are averaged
    with weights kappa/(kappa+Nd) (base) and 1/(2(kappa+Nd)) (others).
    """
    n = len(meas)
    lam = n * ut.d + ut.kappa_ut
    r = np.array([m.reference for m in meas], dtype=float)
    z = np.array([m.measured for m in meas], dtype=float)
    offsets = []
    for mz in meas:
        if isinstance(mz.noise, VonMisesFisher):
            raise IncompatibleNoiseModel("unscented update needs Gaussian noise")
        offsets.append(ut_sigma_offsets(mz.noise.cov(), lam))
    # set 0 is the base; set 1 + 2d i + j moves measurement i by offset j
    b = np.empty((1 + 2 * ut.d * n, 3, 3))
    b[:] = r.T @ z
    b[1:] += (r[:, None, :, None] * np.array(offsets)[:, :, None, :]).reshape(-1, 3, 3)
    u, sv, vt = np.linalg.svd(b)
    if np.any(sv[:, 1] <= COLLINEAR_TOL * np.maximum(sv[:, 0], 1e-300)):
        raise CollinearReferences("a sigma-point Wahba problem is degenerate")
    u[:, :, 2] *= np.sign(np.linalg.det(u) * np.linalg.det(vt))[:, None]
    rots = u @ vt
    return (ut.kappa_ut * rots[0] + 0.5 * rots[1:].sum(axis=0)) / lam


def _references_degenerate(meas):
    if len(meas) < 2:
        return True
    r = np.array([m.reference for m in meas], dtype=float)
    s = np.linalg.svd(r, compute_uv=False)
    return s[1] <= COLLINEAR_TOL * s[0]


def correct_full(state, meas, ut=UtConfig(), diagnostics=None):
    """Correction with any mix of Gaussian (isotropic or not) and vMF readings.

    Non-isotropic Gaussian readings are folded in through the unscented
    likelihood; the rest use the exact conjugate update.
    """
    if not meas:
        return state
    conj = [m for m in meas if _is_conjugate(m.noise)]
    non = [m for m in meas if not _is_conjugate(m.noise)]
    f = state.belief.f
    if non:
        if _references_degenerate(non):
            if ut.degenerate == "raise":
                raise CollinearReferences("non-isotropic subset does not fix an attitude")
            f = f + sum(3.0 / np.trace(m.noise.q) * np.outer(m.reference, m.measured)
                        for m in non)
        else:
            lik = fit_from_moment(unscented_likelihood(non, ut), diagnostics=diagnostics)
            f = f + lik.f
    f = f + conjugate_increment(conj)
    return EstimatorState(MatrixFisher(f), state.time_index)


def step(state, gyro, meas=None, ut=UtConfig(), diagnostics=None):
    """Propagate, correct if readings are present, and return the mode estimate."""
    state = propagate(state, gyro, diagnostics)
    if meas:
        state = correct_full(state, meas, ut, diagnostics)
    return state, mode(state.belief)


def uncertainty_deg(mf):
    """Scalar spread in degrees: sqrt(trace) of the matching error covariance."""
    s = mf.s
    var = 1.0 / (s[1] + s[2]) + 1.0 / (s[0] + s[2]) + 1.0 / (s[0] + s[1])
    return float(np.rad2deg(np.sqrt(var)))


def diagnostics_summary(mf):
    """Concentration sum and the error covariance diagonal matched to ``mf``."""
    s = mf.s
    return {
        "s_sum": float(np.sum(s)),
        "cov_diag": [1.0 / (s[1] + s[2]), 1.0 / (s[0] + s[2]), 1.0 / (s[0] + s[1])],
        "first_moment": first_moment(mf),
        "mode": mode(mf),
    }
