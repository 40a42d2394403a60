"""Truth trajectories, sensor scheduling, Monte-Carlo runs and error statistics."""
from __future__ import annotations

import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from . import so3
from .baselines import (mekf_from_fisher, mekf_propagate, mekf_uncertainty_deg, mekf_update,
                        norm_be_preprocess)
from .errors import ConfigError
from .estimator import (UtConfig, EstimatorState, correct_conjugate, correct_full, propagate,
                        uncertainty_deg, wahba_svd)
from .matrix_fisher import FitDiagnostics, MatrixFisher, mode
from .measurements import (Gaussian, GyroSample, IsotropicGaussian, VonMisesFisher, gyro_strength,
                           simulate_gyro, simulate_vector)

ESTIMATORS = ("meas", "mekf", "be", "normbe")
WORKERS_ENV = "MFATTITUDE_WORKERS"
MIDPOINT_TOL = 1e-14


@dataclass(frozen=True, eq=False)
class PendulumParams:
    """Rigid body swinging about a fixed pivot.

    ``lever`` is m g rho: mass times gravity times the body-frame vector from
    the pivot to the mass center (N m per unit gravity direction).
    """

    inertia: np.ndarray = field(default_factory=lambda: np.diag([0.1, 0.2, 0.3]))
    lever: np.ndarray = field(default_factory=lambda: np.array([0.0, 0.0, 0.981]))
    gravity_dir: np.ndarray = field(default_factory=lambda: np.array([0.0, 0.0, 1.0]))

    def __post_init__(self):
        j = np.asarray(self.inertia, dtype=float).reshape(3, 3)
        if np.max(np.abs(j - j.T)) > 1e-12 or np.min(np.linalg.eigvalsh(j)) <= 0.0:
            raise ConfigError("inertia must be symmetric positive definite")
        g = np.asarray(self.gravity_dir, dtype=float).reshape(3)
        if abs(np.linalg.norm(g) - 1.0) > 1e-9:
            raise ConfigError("gravity direction must be a unit vector")
        object.__setattr__(self, "inertia", j)
        object.__setattr__(self, "lever", np.asarray(self.lever, dtype=float).reshape(3))
        object.__setattr__(self, "gravity_dir", g)


def pendulum_torque(r, params):
    return np.cross(params.lever, r.T @ params.gravity_dir)


def pendulum_energy(r, omega, params):
    kinetic = 0.5 * omega @ params.inertia @ omega
    return kinetic - params.lever @ (r.T @ params.gravity_dir)


def _pendulum_step_mid(r, omega, params, dt):
    # implicit midpoint for the angular velocity, exp-map retraction for R
    j = params.inertia
    jinv = np.linalg.inv(j)
    w_new = omega.copy()
    for _ in range(100):
        w_mid = 0.5 * (omega + w_new)
        r_mid = r @ so3.exp_so3(0.5 * dt * w_mid)
        rhs = np.cross(j @ w_mid, w_mid) + pendulum_torque(r_mid, params)
        w_next = omega + dt * (jinv @ rhs)
        if np.max(np.abs(w_next - w_new)) <= MIDPOINT_TOL * max(1.0, np.max(np.abs(w_next))):
            w_new = w_next
            break
        w_new = w_next
    w_mid = 0.5 * (omega + w_new)
    return r @ so3.exp_so3(dt * w_mid), w_new, w_mid


def pendulum_step(r, omega, params, dt):
    """One step of the attitude/angular-velocity integrator; returns (R, omega)."""
    r_new, w_new, _ = _pendulum_step_mid(np.asarray(r, dtype=float),
                                         np.asarray(omega, dtype=float), params, dt)
    return r_new, w_new


def simulate_truth(params, r0, omega0, dt, steps):
    """Attitudes R_0..R_K and the constant body rates that carry R_k to R_{k+1}."""
    key = (np.asarray(params.inertia, dtype=float).tobytes(), params.lever.tobytes(),
           params.gravity_dir.tobytes(), np.asarray(r0, dtype=float).tobytes(),
           np.asarray(omega0, dtype=float).tobytes(), float(dt), int(steps))
    rs, rates = _truth_cached(key)
    return rs.copy(), rates.copy()


@lru_cache(maxsize=8)
def _truth_cached(key):
    # the trajectory has no process noise, so every run shares it
    j, lever, grav, r0, w0, dt, steps = key
    params = PendulumParams(np.frombuffer(j).reshape(3, 3), np.frombuffer(lever),
                            np.frombuffer(grav))
    return _integrate_truth(params, np.frombuffer(r0).reshape(3, 3), np.frombuffer(w0),
                            dt, steps)


def _integrate_truth(params, r0, omega0, dt, steps):
    rs = np.empty((steps + 1, 3, 3))
    rates = np.empty((steps, 3))
    r = np.asarray(r0, dtype=float)
    w = np.asarray(omega0, dtype=float)
    rs[0] = r
    for k in range(steps):
        r, w, w_mid = _pendulum_step_mid(r, w, params, dt)
        rs[k + 1] = r
        rates[k] = w_mid
    return rs, rates


@dataclass(frozen=True, eq=False)
class ScenarioConfig:
    duration_s: float = 60.0
    dt_s: float = 0.02
    gyro_rate_hz: float = 50.0
    vector_rate_hz: float = 10.0
    gyro_sigma_deg_per_sqrt_s: float = 1.0
    vector_noise: tuple = (IsotropicGaussian(0.08),) * 3
    references: tuple = ((1.0, 0.0, 0.0), (0.0, 1.0, 0.0), (0.0, 0.0, 1.0))
    f0: np.ndarray = field(default_factory=lambda: so3.exp_so3([np.pi, 0.0, 0.0]))
    mc_runs: int = 50
    seed: int = 0
    ut: UtConfig = UtConfig()
    estimators: tuple = ESTIMATORS
    pendulum: PendulumParams = PendulumParams()
    r0: np.ndarray = field(default_factory=lambda: np.eye(3))
    omega0_rad_s: np.ndarray = field(default_factory=lambda: 4.14 * np.ones(3))

    def __post_init__(self):
        self.validate()

    @property
    def steps(self):
        return int(round(self.duration_s / self.dt_s))

    @property
    def vector_every(self):
        return int(round(self.gyro_rate_hz / self.vector_rate_hz))

    def validate(self):
        if not (self.duration_s > 0 and self.dt_s > 0):
            raise ConfigError("duration and dt must be positive")
        if abs(self.steps * self.dt_s - self.duration_s) > 1e-9 * self.duration_s:
            raise ConfigError("duration must be a whole number of steps")
        if abs(self.gyro_rate_hz * self.dt_s - 1.0) > 1e-9:
            raise ConfigError("the gyro must sample once per step (gyro_rate * dt = 1)")
        if not 0 < self.vector_rate_hz <= self.gyro_rate_hz:
            raise ConfigError("vector rate must be positive and at most the gyro rate")
        if abs(self.vector_every * self.vector_rate_hz - self.gyro_rate_hz) > 1e-9 * self.gyro_rate_hz:
            raise ConfigError("gyro rate must be an integer multiple of the vector rate")
        if len(self.vector_noise) != len(self.references):
            raise ConfigError("one noise model per reference vector is required")
        for noise in self.vector_noise:
            if not isinstance(noise, (IsotropicGaussian, Gaussian, VonMisesFisher)):
                raise ConfigError(f"unknown noise model {noise!r}")
        unknown = set(self.estimators) - set(ESTIMATORS)
        if unknown:
            raise ConfigError(f"unknown estimators {sorted(unknown)}")
        if self.mc_runs < 1:
            raise ConfigError("at least one Monte-Carlo run is required")
        if self.gyro_sigma_deg_per_sqrt_s < 0:
            raise ConfigError("gyro noise density must be non-negative")
        f0 = np.asarray(self.f0, dtype=float)
        if f0.shape != (3, 3) or not np.all(np.isfinite(f0)):
            raise ConfigError("f0 must be a finite 3x3 matrix")
        if not so3.is_rotation(np.asarray(self.r0, dtype=float), 1e-6):
            raise ConfigError("r0 must be a rotation matrix")


def rng_stream(seed, run_index, sensor_id):
    """Counter-based stream for one sensor of one run."""
    ss = np.random.SeedSequence(seed, spawn_key=(run_index, sensor_id))
    return np.random.Generator(np.random.Philox(ss))


@dataclass
class MeasurementStream:
    truth: np.ndarray
    gyro: list
    vectors: dict


def simulate_measurements(config, run_index):
    """Truth trajectory plus the gyro and vector readings shared by all estimators."""
    steps = config.steps
    truth, rates = simulate_truth(config.pendulum, config.r0, config.omega0_rad_s,
                                  config.dt_s, steps)
    h = gyro_strength(config.gyro_sigma_deg_per_sqrt_s)
    rng_g = rng_stream(config.seed, run_index, 0)
    gyro = [GyroSample(simulate_gyro(rates[k], h, config.dt_s, rng_g), h, config.dt_s)
            for k in range(steps)]
    rngs = [rng_stream(config.seed, run_index, 1 + i) for i in range(len(config.references))]
    vectors = {}
    for k in range(config.vector_every, steps + 1, config.vector_every):
        vectors[k] = [simulate_vector(truth[k], np.asarray(ref, dtype=float), noise, rng)
                      for ref, noise, rng in zip(config.references, config.vector_noise, rngs)]
    return MeasurementStream(truth, gyro, vectors)


def _measurement_weight(noise):
    if isinstance(noise, IsotropicGaussian):
        return 1.0 / noise.sigma2 if noise.sigma2 > 0 else 1.0
    if isinstance(noise, Gaussian):
        tr = np.trace(noise.q)
        return 3.0 / tr if tr > 0 else 1.0
    return noise.kappa


def _run_be(config, stream, diag, normalized):
    state = EstimatorState(MatrixFisher(config.f0))
    est = [mode(state.belief)]
    unc = [uncertainty_deg(state.belief)]
    for k, gyro in enumerate(stream.gyro, start=1):
        state = propagate(state, gyro, diag)
        meas = stream.vectors.get(k)
        if meas:
            if normalized:
                state = correct_conjugate(state, norm_be_preprocess(meas))
            else:
                state = correct_full(state, meas, config.ut, diag)
        est.append(mode(state.belief))
        unc.append(uncertainty_deg(state.belief))
    return np.array(est), np.array(unc)


def _run_mekf(config, stream):
    state = mekf_from_fisher(MatrixFisher(config.f0))
    est = [state.attitude]
    unc = [mekf_uncertainty_deg(state)]
    for k, gyro in enumerate(stream.gyro, start=1):
        state = mekf_propagate(state, gyro)
        meas = stream.vectors.get(k)
        if meas:
            state = mekf_update(state, meas)
        est.append(state.attitude)
        unc.append(mekf_uncertainty_deg(state))
    return np.array(est), np.array(unc)


def _run_meas(config, stream):
    est = np.full((config.steps + 1, 3, 3), np.nan)
    for k, meas in stream.vectors.items():
        est[k] = wahba_svd(meas, [_measurement_weight(m.noise) for m in meas])
    return est, np.full(config.steps + 1, np.nan)


@dataclass
class RunTraces:
    """Per-step error traces (degrees) of every estimator for one run."""

    run_index: int
    errors: dict
    uncertainty: dict
    wall_time: dict
    diagnostics: dict


def run_single(config, run_index):
    """Simulate one run and evaluate every enabled estimator on it."""
    stream = simulate_measurements(config, run_index)
    errors, unc, wall = {}, {}, {}
    diag = FitDiagnostics()
    for name in ESTIMATORS:
        if name not in config.estimators:
            continue
        t0 = time.perf_counter()
        if name == "be":
            est, u = _run_be(config, stream, diag, normalized=False)
        elif name == "normbe":
            est, u = _run_be(config, stream, diag, normalized=True)
        elif name == "mekf":
            est, u = _run_mekf(config, stream)
        else:
            est, u = _run_meas(config, stream)
        wall[name] = time.perf_counter() - t0
        err = np.rad2deg(so3.geodesic_angle(est, stream.truth))
        err[np.isnan(est[:, 0, 0])] = np.nan
        errors[name] = err
        unc[name] = u
    return RunTraces(run_index, errors, unc, wall, diag.as_dict())


@dataclass
class EstimatorSummary:
    mean: np.ndarray
    p2_5: np.ndarray
    p97_5: np.ndarray
    uncertainty: np.ndarray
    run_averages: np.ndarray
    wall_times: np.ndarray

    @property
    def average_error(self):
        return float(np.mean(self.run_averages))

    @property
    def wall_time(self):
        return float(np.mean(self.wall_times))


@dataclass
class MCSummary:
    t_s: np.ndarray
    estimators: dict
    runs: int
    diagnostics: dict


def _nan_stat(fn, x, *args, **kw):
    # columns that are all NaN (no estimate at that step) stay NaN silently
    out = np.full(x.shape[1], np.nan)
    ok = ~np.all(np.isnan(x), axis=0)
    if np.any(ok):
        out[ok] = fn(x[:, ok], *args, axis=0, **kw)
    return out


def summarize(traces, dt_s):
    """Per-step mean and 2.5/97.5 percentile envelope across runs.

    Time averages cover every estimate epoch after t = 0.
    """
    if not traces:
        raise ValueError("no runs to summarize")
    names = list(traces[0].errors)
    n = len(next(iter(traces[0].errors.values()))) if names else 0
    out = {}
    for name in names:
        err = np.array([tr.errors[name] for tr in traces])
        unc = np.array([tr.uncertainty[name] for tr in traces])
        lo, hi = (_nan_stat(np.nanpercentile, err, q) for q in (2.5, 97.5))
        out[name] = EstimatorSummary(
            mean=_nan_stat(np.nanmean, err), p2_5=lo, p97_5=hi,
            uncertainty=_nan_stat(np.nanmean, unc),
            run_averages=np.nanmean(err[:, 1:], axis=1),
            wall_times=np.array([tr.wall_time[name] for tr in traces]))
    diag = FitDiagnostics()
    for tr in traces:
        diag.merge(FitDiagnostics(**tr.diagnostics))
    return MCSummary(np.arange(n) * dt_s, out, len(traces), diag.as_dict())


def worker_count(default=None):
    raw = os.environ.get(WORKERS_ENV)
    if raw:
        try:
            return max(1, int(raw))
        except ValueError as exc:
            raise ConfigError(f"{WORKERS_ENV} must be an integer, got {raw!r}") from exc
    return default if default is not None else (os.cpu_count() or 1)


def run_monte_carlo(config, workers=None):
    """All runs of ``config``; results are ordered by run index for any worker count."""
    workers = worker_count() if workers is None else max(1, int(workers))
    idx = range(config.mc_runs)
    if workers == 1 or config.mc_runs == 1:
        return [run_single(config, i) for i in idx]
    with ProcessPoolExecutor(max_workers=min(workers, config.mc_runs)) as pool:
        return list(pool.map(run_single, [config] * config.mc_runs, idx))
