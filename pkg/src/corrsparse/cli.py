"""Command line front end.

Commands
--------
simulate        write the simulated recording and sampled correlations
solve           sparse support recovery on a simulated scene
recover         solve plus the least squares refit on the support
phase-diagram   exact-support success rates over a (sources, sampling) grid
calibrate-tau   pure-noise calibration of the image penalty weight
selftest        fast internal consistency checks

Exit codes: 0 success, 2 configuration or usage problems, 3 runtime failures.
All outputs are deterministic for a fixed seed; manifests echo the resolved
configuration so any directory can be reproduced bit for bit.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time
from dataclasses import fields
from pathlib import Path

import numpy as np

from . import __version__
from .errors import CalibrationError, ConfigError, DivergenceError, DomainError
from .pipeline import (
    ExperimentConfig,
    SweepResult,
    TrialResult,
    config_from_ini,
    run_calibration,
    run_phase_diagram,
    run_recovery,
    selftest,
    simulate,
)

ENV_OUTPUT = "CORRSPARSE_OUTPUT"
ENV_THREADS = "CORRSPARSE_THREADS"


def _float_repr(x) -> str:
    return repr(float(x))


def _write_rows(path: Path, header: str, rows) -> None:
    with open(path, "w", encoding="utf-8") as handle:
        handle.write(header + "\n")
        for row in rows:
            handle.write(",".join(str(item) for item in row) + "\n")


def _write_matrix(path: Path, matrix: np.ndarray) -> None:
    with open(path, "w", encoding="utf-8") as handle:
        for row in np.atleast_2d(matrix):
            handle.write(",".join(_float_repr(v) for v in row) + "\n")


def _write_json(path: Path, payload: dict) -> None:
    with open(path, "w", encoding="utf-8") as handle:
        json.dump(payload, handle, indent=2, sort_keys=True)
        handle.write("\n")


def _write_manifest(out: Path, command: str, config: ExperimentConfig, **extra) -> None:
    payload = {
        "command": command,
        "config": config.to_dict(),
        "package_version": __version__,
    }
    payload.update(extra)
    _write_json(out / "manifest.json", payload)


def _config_from_dict(data: dict) -> ExperimentConfig:
    config = ExperimentConfig()
    for f in fields(config):
        section = getattr(config, f.name)
        stored = data.get(f.name, {})
        known = {sf.name for sf in fields(section)}
        unknown = set(stored) - known
        if unknown:
            raise ConfigError(f"unknown keys {sorted(unknown)} in manifest [{f.name}]")
        for key, value in stored.items():
            setattr(section, key, value)
    return config


def _load_config(args) -> ExperimentConfig:
    config = config_from_ini(args.config) if args.config else ExperimentConfig()
    if getattr(args, "seed", None) is not None:
        config.run.seed = args.seed
    if getattr(args, "snr_db", None) is not None:
        config.run.snr_db = None if args.snr_db in ("none", "") else float(args.snr_db)
    threads = getattr(args, "threads", None)
    if threads is None and os.environ.get(ENV_THREADS):
        threads = int(os.environ[ENV_THREADS])
    if threads is not None:
        config.run.threads = threads
    if getattr(args, "no_stage2", False):
        config.run.stage2 = False
    return config


def _output_dir(args, config: ExperimentConfig) -> Path:
    out = getattr(args, "out", None) or os.environ.get(ENV_OUTPUT) or config.run.output
    path = Path(out)
    path.mkdir(parents=True, exist_ok=True)
    return path


def _complex_rows(values: np.ndarray, *extra_columns):
    for idx, value in enumerate(values):
        row = [idx, _float_repr(value.real), _float_repr(value.imag)]
        for column in extra_columns:
            row.extend(
                [_float_repr(column[idx].real), _float_repr(column[idx].imag)]
            )
        yield row


def _write_simulation(out: Path, bundle) -> None:
    _write_rows(out / "linear_data.csv", "index,re,im", _complex_rows(bundle.observed))
    system = bundle.system
    _write_rows(
        out / "correlation_rows.csv",
        "row,i,j,re,im",
        (
            [int(s), int(i), int(j), _float_repr(v.real), _float_repr(v.imag)]
            for s, i, j, v in zip(
                system.row_indices, system.i_indices, system.j_indices, system.data
            )
        ),
    )
    chi = bundle.linear.chi
    _write_rows(
        out / "chi_true.csv",
        "pixel,value",
        ([k, _float_repr(v)] for k, v in enumerate(chi)),
    )
    _write_rows(
        out / "support_true.csv",
        "pixel",
        ([int(k)] for k in np.flatnonzero(chi)),
    )


def cmd_simulate(args) -> int:
    config = _load_config(args)
    out = _output_dir(args, config)
    bundle = simulate(config)
    _write_simulation(out, bundle)
    _write_manifest(out, "simulate", config, master_seed=config.run.seed)
    print(f"simulated {bundle.matrix.n_linear} samples, "
          f"{bundle.system.n_rows} correlation rows -> {out}")
    return 0


def _metrics_payload(result: TrialResult) -> dict:
    metrics = result.metrics
    payload = {
        "snr_db": result.bundle.snr_db,
        "iterations": result.report.iterations,
        "converged": result.report.converged,
        "residual_norm": result.report.residual_norm,
        "wall_time_s": result.wall_time,
        "tau": result.report.tau,
        "dt1": result.report.dt1,
        "dt2": result.report.dt2,
        "support_recovered": [int(k) for k in metrics.recovered],
        "support_true": [int(k) for k in metrics.expected],
        "exact_support": metrics.exact,
        "false_positives": metrics.false_positives,
        "false_negatives": metrics.false_negatives,
        "score": metrics.score,
        "gamma": metrics.gamma,
    }
    if result.refit is not None:
        refit = result.refit
        stage2 = {
            "residual": refit.residual,
            "residual_symmetrized": refit.residual_symmetrized,
            "conjugate_inconsistency": refit.conjugate_inconsistency,
            "condition": refit.condition,
            "used_fallback": refit.used_fallback,
            "amplitude_error": result.amplitude_error,
        }
        if result.angle_stats is not None:
            stage2["angle_mean_aligned"] = result.angle_stats.mean_abs_aligned
            stage2["angle_max_aligned"] = result.angle_stats.max_abs_aligned
            stage2["angle_rotation"] = result.angle_stats.rotation
        payload["stage2"] = stage2
    return payload


def _write_recovery(out: Path, result: TrialResult) -> None:
    report = result.report
    _write_rows(
        out / "chi_recovered.csv",
        "pixel,re,im,descaled_re,descaled_im",
        _complex_rows(report.chi, report.chi_descaled),
    )
    _write_rows(
        out / "support_recovered.csv",
        "pixel",
        ([int(k)] for k in report.support),
    )
    grid = result.bundle.matrix.grid
    _write_matrix(out / "image_grid.csv", grid.as_image(np.abs(report.chi_descaled)))
    _write_rows(
        out / "convergence.csv",
        "iteration,residual_norm,iterate_change",
        (
            [k, _float_repr(r), _float_repr(c)]
            for k, (r, c) in enumerate(
                zip(report.history.residual_norms, report.history.iterate_changes)
            )
        ),
    )
    if result.refit is not None:
        refit = result.refit
        _write_matrix(out / "xhat_magnitude.csv", np.abs(refit.x_hat))
        _write_matrix(out / "xhat_angle.csv", np.angle(refit.x_hat))
        _write_rows(
            out / "rho_hat.csv",
            "pixel,re,im",
            (
                [int(k), _float_repr(v.real), _float_repr(v.imag)]
                for k, v in zip(refit.support, refit.rho_hat)
            ),
        )
    _write_json(out / "metrics.json", _metrics_payload(result))


def _run_solve(args, stage2: bool, command: str) -> int:
    if getattr(args, "in_dir", None):
        manifest_path = Path(args.in_dir) / "manifest.json"
        if not manifest_path.exists():
            raise ConfigError(f"no manifest at {manifest_path}")
        with open(manifest_path, encoding="utf-8") as handle:
            manifest = json.load(handle)
        config = _config_from_dict(manifest["config"])
        if getattr(args, "no_stage2", False):
            config.run.stage2 = False
    else:
        config = _load_config(args)
    out = _output_dir(args, config)
    result = run_recovery(config, stage2=stage2 and config.run.stage2)
    _write_simulation(out, result.bundle)
    _write_recovery(out, result)
    _write_manifest(out, command, config, master_seed=config.run.seed)
    metrics = result.metrics
    print(
        f"{command}: support {len(metrics.recovered)} pixels, "
        f"exact={metrics.exact}, fp={metrics.false_positives}, "
        f"iterations={result.report.iterations}, "
        f"wall={result.wall_time:.2f}s -> {out}"
    )
    return 0


def cmd_solve(args) -> int:
    return _run_solve(args, stage2=False, command="solve")


def cmd_recover(args) -> int:
    return _run_solve(args, stage2=True, command="recover")


def cmd_phase_diagram(args) -> int:
    config = _load_config(args)
    out = _output_dir(args, config)
    started = time.perf_counter()

    def progress(done, total, cell):
        elapsed = time.perf_counter() - started
        print(
            f"[{done}/{total}] m={cell.m} factor={cell.factor} "
            f"score={cell.score:.2f} elapsed={elapsed:.0f}s",
            file=sys.stderr,
            flush=True,
        )

    result = run_phase_diagram(config, progress=progress)
    _write_rows(
        out / "cells.csv",
        "m,factor,rows,successes,trials,score",
        (
            [c.m, c.factor, c.rows, c.successes, c.trials, _float_repr(c.score)]
            for c in result.cells
        ),
    )
    _write_rows(out / "boundary.csv", "rows,m_star",
                ([rows, m] for rows, m in result.boundary))
    _write_rows(
        out / "reference_curve.csv",
        "rows,m_reference",
        ([rows, _float_repr(v)] for rows, v in result.reference_curve),
    )
    _write_json(
        out / "metrics.json",
        {
            "fit_exponent": result.fit_exponent,
            "cells": len(result.cells),
            "trials_per_cell": config.phase_diagram.trials,
        },
    )
    _write_manifest(out, "phase-diagram", config, master_seed=config.run.seed)
    print(f"phase diagram: {len(result.cells)} cells, "
          f"boundary fit exponent {result.fit_exponent} -> {out}")
    return 0


def cmd_calibrate_tau(args) -> int:
    config = _load_config(args)
    out = _output_dir(args, config)
    tau = run_calibration(config)
    _write_json(out / "calibration.json", {"tau": tau})
    _write_manifest(out, "calibrate-tau", config, master_seed=config.run.seed)
    print(f"calibrated tau = {tau}")
    return 0


def cmd_selftest(args) -> int:
    ok, lines = selftest()
    for line in lines:
        print(line)
    if getattr(args, "out", None):
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / "selftest.txt").write_text("\n".join(lines) + "\n", encoding="utf-8")
    return 0 if ok else 3


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="corrsparse",
        description="Sparse scene recovery from cross-correlated array data.",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, threads=False, stage2=False, in_dir=False):
        p.add_argument("--config", help="INI configuration file")
        p.add_argument("--out", help=f"output directory (or ${ENV_OUTPUT})")
        p.add_argument("--seed", type=int, help="master seed override")
        p.add_argument("--snr-db", dest="snr_db",
                       help="signal to noise ratio in dB, or 'none'")
        if threads:
            p.add_argument("--threads", type=int,
                           help=f"worker pool size (or ${ENV_THREADS})")
        if stage2:
            p.add_argument("--no-stage2", dest="no_stage2", action="store_true",
                           help="skip the least squares refit")
        if in_dir:
            p.add_argument("--in", dest="in_dir",
                           help="reuse the configuration of a simulate directory")

    common(sub.add_parser("simulate", help="write a simulated scene"))
    common(sub.add_parser("solve", help="stage one support recovery"),
           stage2=True, in_dir=True)
    common(sub.add_parser("recover", help="support recovery plus refit"),
           stage2=True, in_dir=True)
    common(sub.add_parser("phase-diagram", help="success rate sweep"), threads=True)
    common(sub.add_parser("calibrate-tau", help="pure noise penalty calibration"))
    selftest_parser = sub.add_parser("selftest", help="internal consistency checks")
    selftest_parser.add_argument("--out", help="optional report directory")

    handlers = {
        "simulate": cmd_simulate,
        "solve": cmd_solve,
        "recover": cmd_recover,
        "phase-diagram": cmd_phase_diagram,
        "calibrate-tau": cmd_calibrate_tau,
        "selftest": cmd_selftest,
    }
    parser.set_defaults(handlers=handlers)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    handler = args.handlers[args.command]
    try:
        return handler(args)
    except (ConfigError, DomainError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (CalibrationError, DivergenceError, RuntimeError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3


def entry_point() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entry_point()
