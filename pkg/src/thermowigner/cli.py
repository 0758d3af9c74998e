"""Command-line entry point: ``thermowigner <subcommand> [options]``.

Subcommands: ``sample``, ``evolve``, ``quench``, ``validate`` and
``dump-wigner``. Exit status is 0 on success, 1 when a check fails and 2 on a
configuration error (in which case no file is created). Diagnostics go to
stderr; data go to files in the output directory.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import numpy as np

from .config import OUTPUT_FORMATS, RunConfig, load_config
from .exceptions import ConfigurationError, PropagationError, ThermoWignerError
from .experiments import (
    TrajectoryRecorder,
    ensemble_records,
    run_equilibrium_experiment,
    run_quench_experiment,
    series_records,
)
from .output import build_manifest, utc_now, write_csv, write_jsonl, write_manifest, write_series, write_text
from .sampling import sample_ensemble
from .validation import reference_config, run_validation_suite
from .wigner import PhaseGrid, thermal_wigner_density

log = logging.getLogger("thermowigner")

EXIT_OK, EXIT_CHECK_FAILED, EXIT_CONFIG = 0, 1, 2


def _parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="TOML run configuration")
    common.add_argument("--seed", type=int, help="override ensemble.seed")
    common.add_argument("--output-dir", type=Path, help="override output.directory")
    common.add_argument(
        "--format", action="append", choices=OUTPUT_FORMATS, dest="formats", help="series format (repeatable)"
    )
    common.add_argument("--stride", type=int, help="override output.stride (steps between outputs)")
    common.add_argument("--workers", type=int, help="override execution.workers")
    common.add_argument("-v", "--verbose", action="store_true", help="debug logging")

    p = argparse.ArgumentParser(prog="thermowigner", description="Thermal Wigner ensembles of free-field modes.")
    sub = p.add_subparsers(dest="command", required=True)
    sub.add_parser("sample", parents=[common], help="write the initial thermal ensemble")
    sub.add_parser("evolve", parents=[common], help="equilibrium stationarity experiment")
    sub.add_parser("quench", parents=[common], help="quantum-to-classical quench experiment")
    v = sub.add_parser("validate", parents=[common], help="run the validation suite")
    v.add_argument("--n-traj", type=int, help="ensemble size of the statistical checks")
    d = sub.add_parser("dump-wigner", parents=[common], help="write the analytic Wigner grid of every mode")
    d.add_argument("--grid", type=int, default=101, help="grid points per axis")
    d.add_argument("--n-sigma", type=float, default=6.0, help="grid half-width in standard deviations")
    return p


def _load(args, required: bool = True) -> RunConfig:
    if args.config is None:
        if required:
            raise ConfigurationError(f"{args.command}: --config is required")
        cfg = reference_config()
    else:
        try:
            cfg = load_config(args.config)
        except OSError as exc:
            raise ConfigurationError(f"cannot read config: {exc}") from None
    return cfg.with_overrides(
        seed=args.seed,
        output_dir=args.output_dir,
        formats=tuple(args.formats) if args.formats else None,
        stride=args.stride,
        workers=args.workers,
    )


def _outdir(cfg: RunConfig) -> Path:
    out = Path(cfg.output.directory)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _finish(cfg, command, started, out, files, checks=None):
    manifest = build_manifest(cfg, command, started, utc_now(), checks, files)
    write_manifest(manifest, out / f"{command}_manifest.json")


def _recorded_series(cfg, recorder, out, name):
    n = cfg.output.record_trajectories
    if n == 0 or recorder.times is None:
        return []
    return write_series(series_records(cfg, recorder.times, recorder.snapshots()), out / name, cfg.output.formats)


def cmd_sample(cfg: RunConfig, args) -> int:
    started = utc_now()
    ens = sample_ensemble(cfg.field, cfg.ensemble_init(), cfg.seed)
    out = _outdir(cfg)
    files = write_series(ensemble_records(cfg, ens), out / "sample", cfg.output.formats)
    _finish(cfg, "sample", started, out, files)
    print(f"sampled {ens.n_traj} trajectories x {ens.n_modes} modes -> {out}", file=sys.stderr)
    return EXIT_OK


def _experiment(cfg: RunConfig, command: str, runner) -> int:
    started = utc_now()
    recorder = TrajectoryRecorder(cfg.output.record_trajectories)
    report = runner(cfg, observers=(recorder,))
    out = _outdir(cfg)
    files = [write_jsonl(report.records(), out / f"{command}_report.jsonl")]
    files.append(write_text(report.summary() + "\n", out / f"{command}_summary.txt"))
    files += _recorded_series(cfg, recorder, out, f"{command}_series")
    _finish(cfg, command, started, out, files, {"passed": report.passed, "verdicts": report.verdicts})
    print(report.summary(), file=sys.stderr)
    return EXIT_OK if report.passed else EXIT_CHECK_FAILED


def cmd_evolve(cfg: RunConfig, args) -> int:
    return _experiment(cfg, "evolve", run_equilibrium_experiment)


def cmd_quench(cfg: RunConfig, args) -> int:
    if cfg.schedule.kind not in ("step-quench", "linear-ramp"):
        raise ConfigurationError(f"quench: schedule.kind must be step-quench or linear-ramp, got {cfg.schedule.kind!r}")
    return _experiment(cfg, "quench", run_quench_experiment)


def cmd_validate(cfg: RunConfig, args) -> int:
    if args.n_traj is not None and args.n_traj < 2:
        raise ConfigurationError(f"--n-traj must be >= 2, got {args.n_traj}")
    started = utc_now()
    report = run_validation_suite(cfg, n_traj=args.n_traj)
    out = _outdir(cfg)
    files = [write_jsonl(report.records(), out / "validate_report.jsonl")]
    _finish(cfg, "validate", started, out, files, {"passed": report.passed})
    print(report.summary(), file=sys.stderr)
    return EXIT_OK if report.passed else EXIT_CHECK_FAILED


def _wigner_rows(cfg: RunConfig, n: int, n_sigma: float):
    for tp in cfg.ensemble_init().thermal:
        grid = PhaseGrid.around(tp, n_sigma=n_sigma, n=n)
        Q, P = grid.mesh()
        W = thermal_wigner_density(tp, Q, P)
        for q, p, w in zip(Q.ravel(), P.ravel(), W.ravel()):
            yield tp.mode.index, float(q), float(p), float(w)


def cmd_dump_wigner(cfg: RunConfig, args) -> int:
    if args.grid < 2 or not args.n_sigma > 0:
        raise ConfigurationError("dump-wigner: --grid must be >= 2 and --n-sigma > 0")
    started = utc_now()
    out = _outdir(cfg)
    path = write_csv(("mode", "Q", "P", "W"), _wigner_rows(cfg, args.grid, args.n_sigma), out / "wigner.csv")
    _finish(cfg, "dump-wigner", started, out, [path])
    return EXIT_OK


COMMANDS = {
    "sample": cmd_sample,
    "evolve": cmd_evolve,
    "quench": cmd_quench,
    "validate": cmd_validate,
    "dump-wigner": cmd_dump_wigner,
}


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    np.seterr(all="ignore")
    try:
        cfg = _load(args, required=args.command != "validate")
        return COMMANDS[args.command](cfg, args)
    except ConfigurationError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except PropagationError as exc:
        print(f"propagation failed: {exc}", file=sys.stderr)
        return EXIT_CHECK_FAILED
    except (ThermoWignerError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CHECK_FAILED


run_cli = main

if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
