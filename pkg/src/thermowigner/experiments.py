"""Packaged ensemble experiments: equilibrium stationarity and the quantum-to-classical quench.

Both experiments sample the thermal Wigner ensemble described by a
:class:`~thermowigner.config.RunConfig`, propagate it and compare ensemble
statistics with their closed-form values. Tolerances follow one rule,
:func:`stat_tolerance`: a relative floor or a multiple of the measured
standard error, whichever is larger, so verdicts stay meaningful from small
desk runs to large production runs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable, Iterator, Sequence

import numpy as np

from .config import RunConfig
from .dynamics import ChunkResult, compressibilities, conserved_energies, mode_energies, propagate_ensemble
from .exceptions import ConfigurationError
from .observables import (
    HistogramEstimate,
    MomentAccumulator,
    estimate_observable,
    observable_quantities,
    standard_quantities,
)
from .sampling import EnsembleState, sample_ensemble
from .schedules import schedule_kbt
from .wigner import thermal_moments

REL_TOL = 0.03
N_SIGMA = 4.0
PLATEAU_SIGMA = 3.0


def stat_tolerance(oracle, stderr, rel_tol: float = REL_TOL, n_sigma: float = N_SIGMA):
    """``max(rel_tol * |oracle|, n_sigma * stderr)``, elementwise.

    Since ``stderr`` scales as ``sigma / sqrt(n)``, the tolerance widens
    automatically for small ensembles.
    """
    return np.maximum(rel_tol * np.abs(oracle), n_sigma * np.asarray(stderr))


@dataclass
class StatisticSeries:
    """Ensemble estimate of one statistic of one mode at every output time."""

    name: str
    mode: int
    times: np.ndarray
    mean: np.ndarray
    stderr: np.ndarray
    oracle: float | None = None
    tolerance: np.ndarray | None = None
    every: int = 1

    @property
    def deviation(self) -> np.ndarray:
        return np.abs(self.mean - self.oracle)

    @property
    def passed(self) -> bool:
        if self.oracle is None:
            return True
        return bool(np.all(self.deviation <= self.tolerance))

    @property
    def max_relative_deviation(self) -> float:
        return float(np.max(self.deviation) / abs(self.oracle))

    def records(self, experiment: str, every: int = 1) -> Iterator[dict]:
        for k in range(0, len(self.times), every):
            rec = {
                "experiment": experiment,
                "time": float(self.times[k]),
                "mode": self.mode,
                "observable": self.name,
                "mean": _json_number(self.mean[k]),
                "stderr": float(self.stderr[k]),
            }
            if self.oracle is not None:
                rec.update(
                    oracle=float(self.oracle),
                    tolerance=float(self.tolerance[k]),
                    passed=bool(self.deviation[k] <= self.tolerance[k]),
                )
            yield rec


def _json_number(x):
    x = complex(x)
    return x.real if x.imag == 0 else [x.real, x.imag]


class WindowAverager:
    """Per-trajectory time averages of one quantity over fixed time windows.

    The standard error is that of the per-trajectory averages, so it accounts
    for time correlation along each trajectory.
    """

    def __init__(self, quantity: Callable[[np.ndarray], np.ndarray], windows: Sequence[tuple[float, float]], n_modes):
        self.quantity = quantity
        self.windows = list(windows)
        shape = (len(self.windows), n_modes)
        self.count = np.zeros(shape)
        self.sums = np.zeros(shape)
        self.sq_sums = np.zeros(shape)

    def __call__(self, chunk: ChunkResult):
        ok = np.isfinite(chunk.snapshots).all(axis=(0, 2, 3))
        values = self.quantity(chunk.snapshots[:, ok])
        for w, (t0, t1) in enumerate(self.windows):
            sel = (chunk.times >= t0) & (chunk.times <= t1)
            if not sel.any():
                raise ConfigurationError(f"averaging window [{t0}, {t1}] contains no output time")
            avg = values[sel].mean(axis=0)
            self.count[w] += avg.shape[0]
            self.sums[w] += avg.sum(axis=0)
            self.sq_sums[w] += (avg**2).sum(axis=0)

    def mean(self) -> np.ndarray:
        return self.sums / self.count

    def stderr(self) -> np.ndarray:
        m = self.mean()
        return np.sqrt(np.maximum(self.sq_sums / self.count - m**2, 0.0) / self.count)


class TrajectoryRecorder:
    """Keeps the snapshots of the first ``n_record`` trajectories for series output."""

    def __init__(self, n_record: int):
        self.n_record = n_record
        self.times = None
        self.parts = []

    def __call__(self, chunk: ChunkResult):
        self.times = chunk.times
        take = self.n_record - chunk.traj_start
        if take > 0:
            self.parts.append((chunk.traj_start, chunk.snapshots[:, :take].copy()))

    def snapshots(self) -> np.ndarray:
        """Array of shape ``(n_times, n_recorded, N, 6)``."""
        if not self.parts:
            return np.empty((0 if self.times is None else len(self.times), 0, 0, 6))
        return np.concatenate([p for _, p in self.parts], axis=1)


def series_records(
    config: RunConfig, times: np.ndarray, snapshots: np.ndarray, traj_offset: int = 0
) -> Iterator[tuple]:
    """Rows ``(time, trajectory, mode, Q, P, xi1, xi2, chi1, chi2, H_mode, H_conserved, kappa)``.

    ``snapshots`` has shape ``(n_times, n, N, 6)``; rows are produced lazily in
    time-major, trajectory, mode order.
    """
    f = config.field
    thermostats = config.thermostats()
    for k, t in enumerate(times):
        kbt = np.array([schedule_kbt(config.schedule, m, float(t), f.units) for m in f.modes])
        snap = snapshots[k]
        h = mode_energies(f, snap)
        hc = conserved_energies(f, thermostats, kbt, snap)
        kappa = compressibilities(thermostats, snap)
        for i in range(snap.shape[0]):
            for j in range(snap.shape[1]):
                s = snap[i, j]
                yield (float(t), traj_offset + i, j + 1, s[0], s[3], s[1], s[2], s[4], s[5], h[i, j], hc[i, j], kappa[i, j])


def ensemble_records(config: RunConfig, ens: EnsembleState, block: int = 4096) -> Iterator[tuple]:
    """Series rows of a whole ensemble at its current time, generated block by block."""
    for lo in range(0, ens.n_traj, block):
        yield from series_records(config, np.array([ens.time]), ens.states[None, lo : lo + block], lo)


# -- reports -----------------------------------------------------------------------


@dataclass
class ExperimentReport:
    """Outcome of one packaged experiment."""

    experiment: str
    series: list[StatisticSeries]
    verdicts: dict[str, bool]
    details: dict = field(default_factory=dict)
    n_traj: int = 0
    n_failed: int = 0
    histograms: list[tuple[str, HistogramEstimate]] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(self.verdicts.values())

    def records(self) -> Iterator[dict]:
        """One JSON-serializable record per statistic per output time per mode."""
        for s in self.series:
            yield from s.records(self.experiment, s.every)
        for name, h in self.histograms:
            yield {
                "experiment": self.experiment,
                "time": self.details.get("t_final"),
                "mode": h.mode,
                "observable": name,
                "edges": h.edges.tolist(),
                "density": h.density.tolist(),
                "n": h.n,
            }

    def summary(self) -> str:
        lines = [f"{self.experiment}: {'PASS' if self.passed else 'FAIL'} ({self.n_traj} trajectories, {self.n_failed} failed)"]
        for name, ok in self.verdicts.items():
            lines.append(f"  {'PASS' if ok else 'FAIL'}  {name}")
        for key, value in self.details.items():
            lines.append(f"  {key}: {value}")
        return "\n".join(lines)


def _quantities(config: RunConfig) -> dict:
    q = standard_quantities(config.field)
    q.update(observable_quantities(config.observables, config.field))
    return q


def _propagate(config: RunConfig, observers, thermostat_on: bool):
    f = config.field
    ens = sample_ensemble(f, config.ensemble_init(), config.seed)
    n_times = config.n_steps // config.output.stride + 1
    acc = MomentAccumulator(_quantities(config), n_times, len(f.modes))
    propagate_ensemble(
        ens, f, config.thermostats(), config.schedule, config.integrator, config.t_final,
        observers=(acc, *observers), stride=config.output.stride,
        workers=config.execution.workers, chunk_size=config.execution.chunk_size,
        thermostat_on=thermostat_on,
    )  # fmt: skip
    return ens, acc


def _configured_series(config: RunConfig, acc: MomentAccumulator, times) -> list[StatisticSeries]:
    out = []
    for spec in config.observables:
        if spec.kind == "histogram":
            continue
        if spec.kind in ("position-variance", "momentum-variance"):
            lin = "Q" if spec.kind == "position-variance" else "P"
            mean = acc.mean(spec.name).real - acc.mean(lin) ** 2
        else:
            mean = acc.mean(spec.name)
        err = acc.stderr(spec.name)
        for j in spec.mode_columns(config.field):
            out.append(StatisticSeries(spec.name, j + 1, times, mean[:, j], err[:, j], every=spec.stride))
    return out


def _histograms(config: RunConfig, ens: EnsembleState, report: ExperimentReport):
    for spec in config.observables:
        if spec.kind == "histogram":
            for h in estimate_observable(spec, config.field, ens.active()):
                report.histograms.append((spec.name, h))


def run_equilibrium_experiment(
    config: RunConfig,
    *,
    thermostat_on: bool | None = None,
    observers: Sequence[Callable] = (),
    rel_tol: float = REL_TOL,
    n_sigma: float = N_SIGMA,
) -> ExperimentReport:
    """Propagate the thermal ensemble at constant quantum targets and test stationarity.

    Reports ``Var(Q)``, ``Var(P)`` and ``<H>`` per mode at every output time;
    each is compared against the thermal Wigner moments with
    :func:`stat_tolerance`, using the larger of the measured standard error
    and the one implied by the thermal Gaussian (which guards small ensembles
    against underestimated spread). ``thermostat_on=False`` gives the free-flow
    variant; ``None`` follows ``config.thermostat.enabled``.

    Raises
    ------
    ConfigurationError
        If the schedule is not ``constant-quantum``.
    PropagationError
        If too many trajectories fail.
    """
    if config.schedule.kind != "constant-quantum":
        raise ConfigurationError(f"equilibrium experiment needs a constant-quantum schedule, got {config.schedule.kind}")
    on = config.thermostat.enabled if thermostat_on is None else thermostat_on
    ens, acc = _propagate(config, observers, on)
    times = acc.times
    series = []
    verdicts = {}
    for j, tp in enumerate(config.ensemble_init().thermal):
        m = thermal_moments(tp)
        # sigma of Q**2, P**2 and H under the thermal Gaussian itself
        stats = {
            "var_Q": (acc.mean("Q2") - acc.mean("Q") ** 2, acc.stderr("Q2"), m.varQ, math.sqrt(2) * m.varQ),
            "var_P": (acc.mean("P2") - acc.mean("P") ** 2, acc.stderr("P2"), m.varP, math.sqrt(2) * m.varP),
            "mean_H": (acc.mean("H"), acc.stderr("H"), m.meanH, m.meanH),
        }
        n = acc.count[:, j]
        for name, (mean, err, oracle, sigma0) in stats.items():
            s = StatisticSeries(name, j + 1, times, mean[:, j], err[:, j], oracle)
            s.tolerance = stat_tolerance(oracle, np.maximum(s.stderr, sigma0 / np.sqrt(n)), rel_tol, n_sigma)
            series.append(s)
            verdicts[f"mode {j + 1} {name} stationary"] = s.passed
    report = ExperimentReport(
        "equilibrium" if on else "free-flow",
        series + _configured_series(config, acc, times),
        verdicts,
        n_traj=ens.n_traj,
        n_failed=int(ens.failed.sum()),
    )
    report.details["t_final"] = float(ens.time)
    report.details["max_relative_deviation"] = {
        f"mode {s.mode} {s.name}": round(s.max_relative_deviation, 6) for s in series
    }
    _histograms(config, ens, report)
    return report


def negative_control(config: RunConfig, scale: float = 2.0) -> RunConfig:
    """Same run with every thermostat target multiplied by ``scale``; must fail stationarity."""
    return replace(config, schedule=replace(config.schedule, target_scale=scale))


def smooth(values: np.ndarray, width: int) -> np.ndarray:
    """Centred moving average with the window truncated at both ends."""
    width = max(1, int(width))
    c = np.concatenate([[0.0], np.cumsum(values)])
    n = len(values)
    lo = np.clip(np.arange(n) - width // 2, 0, n)
    hi = np.clip(np.arange(n) + width - width // 2, 0, n)
    return (c[hi] - c[lo]) / (hi - lo)


def relaxation_time(times, curve, final: float, gap0: float, t_start: float) -> float | None:
    """First time after ``t_start`` at which ``|curve - final|`` drops below ``|gap0| / e``."""
    below = np.flatnonzero((times >= t_start) & (np.abs(curve - final) < abs(gap0) / math.e))
    return None if below.size == 0 else float(times[below[0]] - t_start)


def run_quench_experiment(
    config: RunConfig,
    *,
    final_window: float | None = None,
    observers: Sequence[Callable] = (),
    n_sigma: float = PLATEAU_SIGMA,
) -> ExperimentReport:
    """Quantum-to-classical quench of the thermostat targets.

    Plateaus are per-trajectory time averages of the mode energy over the
    pre-quench interval ``[0, t_q)`` and over the last ``final_window`` time
    units (default ``min(10, (t_final - t_q) / 4)``), compared with
    ``1 / beta_tilde`` and ``1 / beta`` (or the quantum value again for modes
    outside the schedule scope) within ``n_sigma`` standard errors.

    The relaxation time of each mode is the time after ``t_q`` at which the
    smoothed ensemble energy (window: half a mode period, one period of the
    energy ringing at twice the mode frequency) first comes within
    ``1/e`` of the analytic gap of the final plateau; it is ``None`` when the
    gap is not resolved statistically.
    """
    s = config.schedule
    if s.kind not in ("step-quench", "linear-ramp"):
        raise ConfigurationError(f"quench experiment needs a step-quench or linear-ramp schedule, got {s.kind}")
    f = config.field
    t_q = s.t_quench if s.kind == "step-quench" else s.ramp[0]
    t_end_switch = s.t_quench if s.kind == "step-quench" else s.ramp[1]
    T = config.t_final
    if not t_q > 0:
        raise ConfigurationError(f"quench must start after t=0, got {t_q}")
    if not t_end_switch < T:
        raise ConfigurationError(f"quench must finish before t_final={T}")
    if final_window is None:
        final_window = min(10.0, (T - t_end_switch) / 4.0)
    dt_out = config.integrator.dt * config.output.stride
    pre = (0.0, t_q - 0.5 * dt_out)
    post = (T - final_window, T)
    energy = standard_quantities(f)["H"]
    windows = WindowAverager(energy, [pre, post], len(f.modes))
    ens, acc = _propagate(config, (windows, *observers), config.thermostat.enabled)
    times = acc.times
    H, H_err = acc.mean("H"), acc.stderr("H")
    w_mean, w_err = windows.mean(), windows.stderr()

    series, verdicts, details = [], {}, {"t_final": float(ens.time), "modes": {}}
    measured_gaps = []
    for j, mode in enumerate(f.modes):
        quantum = s.quantum_kbt(mode, f.units) / s.target_scale
        final = (s.classical_kbt() if s.in_scope(mode) else s.quantum_kbt(mode, f.units)) / s.target_scale
        series.append(StatisticSeries("mean_H", j + 1, times, H[:, j], H_err[:, j]))
        init_ok = abs(w_mean[0, j] - quantum) <= n_sigma * w_err[0, j]
        final_ok = abs(w_mean[1, j] - final) <= n_sigma * w_err[1, j]
        verdicts[f"mode {j + 1} initial plateau"] = bool(init_ok)
        verdicts[f"mode {j + 1} final plateau"] = bool(final_ok)

        gap0 = quantum - final
        after = times >= t_q
        width = max(1, round(math.pi / mode.omega / dt_out))
        curve = np.full_like(times, np.nan)
        curve[after] = smooth(H[after, j], width)
        resolved = abs(gap0) > n_sigma * max(w_err[0, j], w_err[1, j])
        tau = relaxation_time(times, curve, final, gap0, t_q) if resolved else None
        monotone = True
        if resolved:
            # only the approach counts: stop once the curve enters the final plateau band
            g = (curve[after] - final) * np.sign(gap0)
            band = np.flatnonzero(g <= n_sigma * H_err[after, j])
            stop = band[0] + 1 if band.size else g.size
            rise = g[:stop] - np.minimum.accumulate(g[:stop])
            rise = np.pad(rise, (0, g.size - stop))
            monotone = bool(np.all(rise <= n_sigma * H_err[after, j]))
            verdicts[f"mode {j + 1} monotone relaxation"] = monotone
        if not s.in_scope(mode):
            iso = StatisticSeries("mean_H", j + 1, times, H[:, j], H_err[:, j], quantum)
            iso.tolerance = stat_tolerance(quantum, iso.stderr)
            verdicts[f"mode {j + 1} outside scope stationary"] = iso.passed
        measured_gaps.append(w_mean[0, j] - w_mean[1, j])
        details["modes"][j + 1] = {
            "omega": mode.omega,
            "in_scope": s.in_scope(mode),
            "initial_oracle": quantum,
            "initial_measured": float(w_mean[0, j]),
            "initial_stderr": float(w_err[0, j]),
            "final_oracle": final,
            "final_measured": float(w_mean[1, j]),
            "final_stderr": float(w_err[1, j]),
            "relaxation_time": tau,
        }

    scoped = [j for j, m in enumerate(f.modes) if s.in_scope(m)]
    order = sorted(scoped, key=lambda j: f.modes[j].omega)
    gaps = [measured_gaps[j] for j in order]
    verdicts["gap ordering monotone in omega"] = bool(all(a < b for a, b in zip(gaps, gaps[1:])))
    details["measured_gaps"] = {f.modes[j].index: round(float(measured_gaps[j]), 6) for j in range(len(f.modes))}
    report = ExperimentReport(
        "quench", series + _configured_series(config, acc, times), verdicts, details,
        n_traj=ens.n_traj, n_failed=int(ens.failed.sum()),
    )  # fmt: skip
    _histograms(config, ens, report)
    return report
