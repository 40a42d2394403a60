"""Command-line front end.

    mfattitude run --case I --runs 50 --seed 7 --out results/
    mfattitude run --scenario my.toml --set gyro_sigma_deg_per_sqrt_s=5

Exit status: 0 on success, 2 for configuration errors, 3 for numerical failures.
"""
from __future__ import annotations

import argparse
import csv
import json
import math
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from ._backend import BACKEND
from .errors import ConfigError, EstimationError
from .scenario import config_from_dict, config_to_dict, load_scenario, parse_overrides, preset
from .sim import ESTIMATORS, run_monte_carlo, summarize, worker_count

TABLE_LABELS = {"meas": "Mea.", "mekf": "MEKF", "be": "BE", "normbe": "NormBE"}
ENVELOPE_NOTE = "per-step empirical 2.5 and 97.5 percentiles across runs"


@dataclass
class RunManifest:
    config: dict
    seed: int
    version: str
    results: dict = field(default_factory=dict)
    diagnostics: dict = field(default_factory=dict)
    outputs: dict = field(default_factory=dict)
    metadata: dict = field(default_factory=dict)

    def as_dict(self):
        return dict(config=self.config, seed=self.seed, version=self.version,
                    results=self.results, diagnostics=self.diagnostics,
                    outputs=self.outputs, metadata=self.metadata)


def build_config(case=None, scenario=None, overrides=None, runs=None, seed=None,
                 estimators=None, ut_kappa=None):
    """Scenario from a preset or file plus command-line overrides."""
    if (case is None) == (scenario is None):
        raise ConfigError("give exactly one of a case id or a scenario file")
    base = preset(case) if case is not None else load_scenario(scenario)
    extra = dict(overrides or {})
    if runs is not None:
        extra["mc_runs"] = runs
    if seed is not None:
        extra["seed"] = seed
    if estimators is not None:
        extra["estimators"] = estimators
    if ut_kappa is not None:
        extra["ut_kappa"] = ut_kappa
    return config_from_dict(extra, base=base) if extra else base


def run_case(config, workers=None):
    """Run every Monte-Carlo repetition; returns ``(summary, manifest)``."""
    traces = run_monte_carlo(config, workers)
    summary = summarize(traces, config.dt_s)
    results = {name: {"average_error_deg": s.average_error, "wall_time_s": s.wall_time}
               for name, s in summary.estimators.items()}
    manifest = RunManifest(
        config=config_to_dict(config), seed=config.seed,
        version=f"{__version__}+{BACKEND}", results=results,
        diagnostics=summary.diagnostics,
        metadata={"envelope": ENVELOPE_NOTE,
                  "average_window": "all estimate epochs with t > 0",
                  "uncertainty": "sqrt of the trace of the (matched) error covariance, deg"})
    return summary, manifest


def _fmt(x):
    return repr(float(x)) if not math.isnan(x) else "nan"


def emit_outputs(summary, manifest, out_dir):
    """Write summary.csv, table.txt and manifest.json; existing files are replaced."""
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
        names = list(summary.estimators) if summary is not None else []
        paths = {"manifest": str(out / "manifest.json")}
        if names:
            csv_path = out / "summary.csv"
            with open(csv_path, "w", newline="") as fh:
                w = csv.writer(fh)
                header = ["t_s"]
                for n in names:
                    header += [f"{n}_err_deg_mean", f"{n}_err_deg_p2_5",
                               f"{n}_err_deg_p97_5", f"{n}_uncertainty"]
                w.writerow(header)
                for k, t in enumerate(summary.t_s):
                    row = [_fmt(t)]
                    for n in names:
                        s = summary.estimators[n]
                        row += [_fmt(s.mean[k]), _fmt(s.p2_5[k]), _fmt(s.p97_5[k]),
                                _fmt(s.uncertainty[k])]
                    w.writerow(row)
            table_path = out / "table.txt"
            table_path.write_text(format_table(summary))
            paths.update(csv=str(csv_path), table=str(table_path))
        manifest.outputs = paths
        with open(out / "manifest.json", "w") as fh:
            json.dump(manifest.as_dict(), fh, indent=2)
            fh.write("\n")
    except OSError as exc:
        raise OSError(f"writing outputs to {out}: {exc}") from exc
    return paths


def format_table(summary):
    names = [n for n in ESTIMATORS if n in summary.estimators]
    width = 10
    lines = [f"{'':<18}" + "".join(f"{TABLE_LABELS[n]:>{width}}" for n in names)]
    lines.append(f"{'est. err. (deg)':<18}" + "".join(
        f"{summary.estimators[n].average_error:>{width}.2f}" for n in names))
    lines.append(f"{'time (s)':<18}" + "".join(
        f"{'-':>{width}}" if n == "meas" else f"{summary.estimators[n].wall_time:>{width}.2f}"
        for n in names))
    lines.append(f"runs: {summary.runs}")
    return "\n".join(lines) + "\n"


def _parser():
    p = argparse.ArgumentParser(prog="mfattitude", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)
    run = sub.add_parser("run", help="run a Monte-Carlo scenario")
    src = run.add_mutually_exclusive_group(required=True)
    src.add_argument("--case", choices=["I", "II", "III"])
    src.add_argument("--scenario", type=Path, help="TOML or JSON scenario file")
    run.add_argument("--runs", type=int)
    run.add_argument("--seed", type=int)
    run.add_argument("--out", type=Path, default=Path("out"))
    run.add_argument("--estimators", help="comma list from be,normbe,mekf,meas")
    run.add_argument("--ut-kappa", type=float)
    run.add_argument("--workers", type=int, help="worker processes (default: env or CPU count)")
    run.add_argument("--set", action="append", metavar="KEY=VALUE", default=[],
                     help="override a scenario key")
    return p


def main(argv=None):
    args = _parser().parse_args(argv)
    try:
        cfg = build_config(args.case, args.scenario, parse_overrides(args.set), args.runs,
                           args.seed, args.estimators, args.ut_kappa)
        workers = args.workers if args.workers is not None else worker_count()
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    try:
        summary, manifest = run_case(cfg, workers)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    except (EstimationError, np.linalg.LinAlgError, FloatingPointError) as exc:
        print(f"numerical failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 3
    emit_outputs(summary, manifest, args.out)
    print(format_table(summary), end="")
    d = summary.diagnostics
    print(f"moment clamps: {d['clamps']}, Newton non-convergences: {d['nonconvergences']}")
    print(f"outputs: {args.out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
