"""Scenario presets and the scenario file format.

Scenario files are TOML (or JSON with the same layout). Every physical
quantity carries its unit in the key name::

    duration_s = 60.0
    dt_s = 0.02
    gyro_rate_hz = 50.0
    vector_rate_hz = 10.0
    gyro_sigma_deg_per_sqrt_s = 1.0
    mc_runs = 50
    seed = 0
    estimators = ["meas", "mekf", "be", "normbe"]
    ut_kappa = 1.0
    f0_rotvec_rad = [3.141592653589793, 0.0, 0.0]   # or f0 = [[...], [...], [...]]
    r0_rotvec_rad = [0.0, 0.0, 0.0]
    omega0_rad_s = [4.14, 4.14, 4.14]

    [pendulum]
    inertia_kg_m2 = [[0.1, 0, 0], [0, 0.2, 0], [0, 0, 0.3]]
    lever_n_m = [0.0, 0.0, 0.981]
    gravity_dir = [0.0, 0.0, 1.0]

    [[sensors]]
    reference = [1.0, 0.0, 0.0]
    noise = "isotropic"          # or "gaussian" with cov, or "vmf" with kappa
    sigma2 = 0.08
"""
from __future__ import annotations

import json
import sys
from pathlib import Path

import numpy as np

from . import so3
from .errors import ConfigError
from .estimator import UtConfig
from .measurements import Gaussian, IsotropicGaussian, VonMisesFisher
from .sim import PendulumParams, ScenarioConfig

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

AXES = ((1.0, 0.0, 0.0), (0.0, 1.0, 0.0), (0.0, 0.0, 1.0))

CASES = {
    "I": dict(gyro_sigma=1.0, noise=IsotropicGaussian(0.08)),
    "II": dict(gyro_sigma=1.0, noise=Gaussian(np.diag([0.01, 0.01, 0.30]))),
    "III": dict(gyro_sigma=10.0, noise=IsotropicGaussian(0.24)),
}


def preset(case):
    """Scenario for experimental case ``"I"``, ``"II"`` or ``"III"``."""
    key = str(case).upper()
    if key not in CASES:
        raise ConfigError(f"unknown case {case!r}; expected one of {sorted(CASES)}")
    c = CASES[key]
    return ScenarioConfig(
        duration_s=60.0, dt_s=0.02, gyro_rate_hz=50.0, vector_rate_hz=10.0,
        gyro_sigma_deg_per_sqrt_s=c["gyro_sigma"],
        vector_noise=(c["noise"],) * len(AXES), references=AXES,
        f0=so3.exp_so3([np.pi, 0.0, 0.0]), mc_runs=50, seed=0)


def _noise_to_dict(noise):
    if isinstance(noise, IsotropicGaussian):
        return {"noise": "isotropic", "sigma2": noise.sigma2}
    if isinstance(noise, Gaussian):
        return {"noise": "gaussian", "cov": noise.q.tolist()}
    return {"noise": "vmf", "kappa": noise.kappa}


def _noise_from_dict(d):
    kind = d.get("noise")
    if kind == "isotropic":
        return IsotropicGaussian(float(d["sigma2"]))
    if kind == "gaussian":
        return Gaussian(np.array(d["cov"], dtype=float))
    if kind == "vmf":
        return VonMisesFisher(float(d["kappa"]))
    raise ConfigError(f"unknown noise kind {kind!r}")


def config_to_dict(cfg):
    """Plain-data echo of a scenario; :func:`config_from_dict` inverts it exactly."""
    return {
        "duration_s": cfg.duration_s,
        "dt_s": cfg.dt_s,
        "gyro_rate_hz": cfg.gyro_rate_hz,
        "vector_rate_hz": cfg.vector_rate_hz,
        "gyro_sigma_deg_per_sqrt_s": cfg.gyro_sigma_deg_per_sqrt_s,
        "mc_runs": cfg.mc_runs,
        "seed": cfg.seed,
        "estimators": list(cfg.estimators),
        "ut_kappa": cfg.ut.kappa_ut,
        "ut_degenerate": cfg.ut.degenerate,
        "f0": np.asarray(cfg.f0, dtype=float).tolist(),
        "r0": np.asarray(cfg.r0, dtype=float).tolist(),
        "omega0_rad_s": np.asarray(cfg.omega0_rad_s, dtype=float).tolist(),
        "pendulum": {
            "inertia_kg_m2": cfg.pendulum.inertia.tolist(),
            "lever_n_m": cfg.pendulum.lever.tolist(),
            "gravity_dir": cfg.pendulum.gravity_dir.tolist(),
        },
        "sensors": [dict(reference=[float(x) for x in ref], **_noise_to_dict(noise))
                    for ref, noise in zip(cfg.references, cfg.vector_noise)],
    }


_KNOWN = {"duration_s", "dt_s", "gyro_rate_hz", "vector_rate_hz", "gyro_sigma_deg_per_sqrt_s",
          "mc_runs", "seed", "estimators", "ut_kappa", "ut_degenerate", "f0", "f0_rotvec_rad",
          "r0", "r0_rotvec_rad", "omega0_rad_s", "pendulum", "sensors", "case"}


def config_from_dict(d, base=None):
    """Build a scenario from plain data; missing keys come from ``base``."""
    unknown = set(d) - _KNOWN
    if unknown:
        raise ConfigError(f"unknown scenario keys {sorted(unknown)}")
    if base is None:
        base = preset(d["case"]) if "case" in d else preset("I")
    echo = config_to_dict(base)
    try:
        for key in ("duration_s", "dt_s", "gyro_rate_hz", "vector_rate_hz",
                    "gyro_sigma_deg_per_sqrt_s", "ut_kappa"):
            if key in d:
                echo[key] = float(d[key])
        for key in ("mc_runs", "seed"):
            if key in d:
                echo[key] = int(d[key])
        if "estimators" in d:
            est = d["estimators"]
            echo["estimators"] = ([e.strip() for e in est.split(",") if e.strip()]
                                  if isinstance(est, str) else list(est))
        if "ut_degenerate" in d:
            echo["ut_degenerate"] = str(d["ut_degenerate"])
        if "f0" in d:
            echo["f0"] = d["f0"]
        if "f0_rotvec_rad" in d:
            echo["f0"] = so3.exp_so3(np.array(d["f0_rotvec_rad"], dtype=float)).tolist()
        if "r0" in d:
            echo["r0"] = d["r0"]
        if "r0_rotvec_rad" in d:
            echo["r0"] = so3.exp_so3(np.array(d["r0_rotvec_rad"], dtype=float)).tolist()
        if "omega0_rad_s" in d:
            echo["omega0_rad_s"] = d["omega0_rad_s"]
        if "pendulum" in d:
            echo["pendulum"].update(d["pendulum"])
        if "sensors" in d:
            echo["sensors"] = d["sensors"]
        pend = echo["pendulum"]
        return ScenarioConfig(
            duration_s=echo["duration_s"], dt_s=echo["dt_s"],
            gyro_rate_hz=echo["gyro_rate_hz"], vector_rate_hz=echo["vector_rate_hz"],
            gyro_sigma_deg_per_sqrt_s=echo["gyro_sigma_deg_per_sqrt_s"],
            vector_noise=tuple(_noise_from_dict(s) for s in echo["sensors"]),
            references=tuple(tuple(float(x) for x in s["reference"]) for s in echo["sensors"]),
            f0=np.array(echo["f0"], dtype=float), mc_runs=echo["mc_runs"], seed=echo["seed"],
            ut=UtConfig(kappa_ut=echo["ut_kappa"], degenerate=echo["ut_degenerate"]),
            estimators=tuple(echo["estimators"]),
            pendulum=PendulumParams(np.array(pend["inertia_kg_m2"], dtype=float),
                                    np.array(pend["lever_n_m"], dtype=float),
                                    np.array(pend["gravity_dir"], dtype=float)),
            r0=np.array(echo["r0"], dtype=float),
            omega0_rad_s=np.array(echo["omega0_rad_s"], dtype=float))
    except ConfigError:
        raise
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"invalid scenario: {exc}") from exc


def load_scenario(path):
    path = Path(path)
    try:
        raw = path.read_bytes()
    except OSError as exc:
        raise ConfigError(f"cannot read scenario file {path}: {exc}") from exc
    try:
        if path.suffix.lower() == ".json":
            data = json.loads(raw.decode())
        else:
            data = tomllib.loads(raw.decode())
    except (ValueError, tomllib.TOMLDecodeError) as exc:
        raise ConfigError(f"cannot parse scenario file {path}: {exc}") from exc
    if isinstance(data, dict) and "config" in data and "version" in data:
        # a run manifest: replay its configuration echo
        data = data["config"]
    return config_from_dict(data)


def parse_overrides(items):
    """``key=value`` strings to a dict; values are parsed as JSON when possible."""
    out = {}
    for item in items or ():
        if "=" not in item:
            raise ConfigError(f"override {item!r} is not key=value")
        key, value = item.split("=", 1)
        try:
            out[key.strip()] = json.loads(value)
        except ValueError:
            out[key.strip()] = value
    return out
