"""Free and Nose-Hoover-chain thermostatted propagation of field modes.

Each mode carries its own two-link chain. The quasi-Hamiltonian equations of
motion of one mode are::

    dQ/dt    = P / mu
    dP/dt    = -mu omega**2 Q - P chi1 / M1
    dxi1/dt  = chi1 / M1
    dxi2/dt  = chi2 / M2
    dchi1/dt = P**2 / mu - g kBT - chi1 chi2 / M2
    dchi2/dt = chi1**2 / M1 - kBT

They conserve ``H + chi1**2/2M1 + chi2**2/2M2 + g kBT xi1 + kBT xi2`` for a
constant target and compress phase space at the rate
``kappa = -chi1/M1 - chi2/M2``.
"""

from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Iterator, NamedTuple, Sequence

import numpy as np

from . import _kernels
from .exceptions import ConfigurationError, InvalidStateError, PropagationError
from .field import (
    CHI1,
    CHI2,
    XI1,
    XI2,
    ExtendedModeState,
    FieldSpec,
    ModePhasePoint,
    ModeSpec,
    ThermostatParams,
    mode_hamiltonian,
)
from .field import P as P_
from .field import Q as Q_
from .sampling import EnsembleState
from .schedules import TemperatureSchedule

log = logging.getLogger(__name__)

_W = 1.0 / (2.0 - 2.0 ** (1.0 / 3.0))
SUZUKI_YOSHIDA = {1: (1.0,), 4: (_W, 1.0 - 2.0 * _W, _W)}
MAX_FAILED_FRACTION = 1e-3


@dataclass(frozen=True)
class IntegratorConfig:
    """Timestep, thermostat sub-cycles and Suzuki-Yoshida weights of the chain update."""

    dt: float
    n_respa: int = 1
    sy_weights: tuple[float, ...] = SUZUKI_YOSHIDA[1]

    def __post_init__(self):
        if not (self.dt > 0 and math.isfinite(self.dt)):
            raise ConfigurationError(f"dt must be > 0, got {self.dt}")
        if int(self.n_respa) != self.n_respa or self.n_respa < 1:
            raise ConfigurationError(f"n_respa must be an integer >= 1, got {self.n_respa}")
        object.__setattr__(self, "sy_weights", tuple(float(w) for w in self.sy_weights))
        if not self.sy_weights or abs(sum(self.sy_weights) - 1.0) > 1e-12:
            raise ConfigurationError(f"sy_weights must sum to 1, got {self.sy_weights}")

    @classmethod
    def order(cls, dt: float, sy_order: int = 1, n_respa: int = 1) -> "IntegratorConfig":
        if sy_order not in SUZUKI_YOSHIDA:
            raise ConfigurationError(f"Suzuki-Yoshida order must be one of {sorted(SUZUKI_YOSHIDA)}, got {sy_order}")
        return cls(dt, n_respa, SUZUKI_YOSHIDA[sy_order])

    @property
    def weights_array(self) -> np.ndarray:
        return np.array(self.sy_weights)


class NhcRates(NamedTuple):
    dQ: float
    dXi1: float
    dXi2: float
    dP: float
    dChi1: float
    dChi2: float


def free_flow_exact(mode: ModeSpec, x: ModePhasePoint, t: float) -> ModePhasePoint:
    """Exact harmonic flow of one mode over time ``t``."""
    c, s = math.cos(mode.omega * t), math.sin(mode.omega * t)
    mw = mode.mu * mode.omega
    return ModePhasePoint(x.Q * c + x.P / mw * s, x.P * c - mw * x.Q * s)


def nhc_vector_field(mode: ModeSpec, params: ThermostatParams, kBT: float, s: ExtendedModeState) -> NhcRates:
    mu, M1, M2 = mode.mu, params.M1, params.M2
    return NhcRates(
        dQ=s.P / mu,
        dXi1=s.chi1 / M1,
        dXi2=s.chi2 / M2,
        dP=-mu * mode.omega**2 * s.Q - s.P * s.chi1 / M1,
        dChi1=s.P**2 / mu - params.g * kBT - s.chi1 * s.chi2 / M2,
        dChi2=s.chi1**2 / M1 - kBT,
    )


def compressibility(params: ThermostatParams, s: ExtendedModeState) -> float:
    """Phase-space compressibility (divergence of the NHC vector field) of one mode."""
    return -s.chi1 / params.M1 - s.chi2 / params.M2


def conserved_quantity(mode: ModeSpec, params: ThermostatParams, kBT: float, s: ExtendedModeState) -> float:
    return (
        mode_hamiltonian(mode, s.phase_point)
        + s.chi1**2 / (2.0 * params.M1)
        + s.chi2**2 / (2.0 * params.M2)
        + params.g * kBT * s.xi1
        + kBT * s.xi2
    )


def nhc_step(
    mode: ModeSpec,
    params: ThermostatParams,
    kBT: float,
    s: ExtendedModeState,
    cfg: IntegratorConfig,
    n_steps: int = 1,
    thermostat_on: bool = True,
) -> ExtendedModeState:
    """Advance one mode by ``n_steps`` time-reversible splitting steps.

    Each step is a chain half-step, the exact harmonic rotation over ``dt``,
    and a second chain half-step. With ``thermostat_on=False`` only the
    rotation is applied.

    Raises
    ------
    InvalidStateError
        If any coordinate becomes non-finite.
    """
    arr = s.as_array()
    c, sn = math.cos(mode.omega * cfg.dt), math.sin(mode.omega * cfg.dt)
    w = cfg.weights_array
    for _ in range(n_steps):
        _kernels.step_mode(
            arr, mode.omega, mode.mu, params.M1, params.M2, params.g, kBT, cfg.dt, c, sn, cfg.n_respa, w, thermostat_on
        )
    if not np.isfinite(arr).all():
        raise InvalidStateError(f"mode {mode.index}: step produced non-finite state {arr.tolist()}")
    return ExtendedModeState.from_array(arr)


# -- vectorized diagnostics on (..., N, 6) arrays ------------------------------


def mode_energies(field: FieldSpec, states: np.ndarray) -> np.ndarray:
    mu, omega = field.mus, field.omegas
    return states[..., P_] ** 2 / (2.0 * mu) + 0.5 * mu * omega**2 * states[..., Q_] ** 2


def _thermostat_arrays(thermostats: Sequence[ThermostatParams]):
    return (
        np.array([t.M1 for t in thermostats]),
        np.array([t.M2 for t in thermostats]),
        np.array([t.g for t in thermostats]),
    )


def conserved_energies(field: FieldSpec, thermostats, kbt, states: np.ndarray) -> np.ndarray:
    M1, M2, g = _thermostat_arrays(thermostats)
    kbt = np.asarray(kbt)
    return (
        mode_energies(field, states)
        + states[..., CHI1] ** 2 / (2.0 * M1)
        + states[..., CHI2] ** 2 / (2.0 * M2)
        + g * kbt * states[..., XI1]
        + kbt * states[..., XI2]
    )


def compressibilities(thermostats, states: np.ndarray) -> np.ndarray:
    M1, M2, _ = _thermostat_arrays(thermostats)
    return -states[..., CHI1] / M1 - states[..., CHI2] / M2


# -- ensembles -------------------------------------------------------------------


@dataclass
class ChunkResult:
    """Snapshots of a contiguous block of trajectories.

    ``snapshots`` has shape ``(len(times), n, N, 6)``; rows of failed
    trajectories are NaN after the failure.
    """

    traj_start: int
    times: np.ndarray
    snapshots: np.ndarray
    failed: np.ndarray

    @property
    def n_traj(self) -> int:
        return self.snapshots.shape[1]


@dataclass(frozen=True)
class _Job:
    field: FieldSpec
    thermostats: tuple
    schedule: TemperatureSchedule
    cfg: IntegratorConfig
    time0: float
    n_steps: int
    stride: int
    thermostat_on: bool

    def run(self, states: np.ndarray, failed: np.ndarray) -> np.ndarray:
        f = self.field
        M1, M2, g = _thermostat_arrays(self.thermostats)
        kq, kc, scoped = self.schedule.kernel_arrays(f)
        n_out = self.n_steps // self.stride + 1
        snaps = np.empty((n_out,) + states.shape)
        _kernels.propagate_chunk(
            states, f.omegas, f.mus, M1, M2, g,
            self.schedule.code, kq, kc, scoped,
            float(self.schedule.t_quench), float(self.schedule.ramp[0]), float(self.schedule.ramp[1]),
            float(self.time0), float(self.cfg.dt), int(self.n_steps), int(self.stride),
            int(self.cfg.n_respa), self.cfg.weights_array, bool(self.thermostat_on),
            snaps, failed,
        )  # fmt: skip
        return snaps


def iter_chunks(
    ensemble: EnsembleState,
    field: FieldSpec,
    thermostats: Sequence[ThermostatParams],
    schedule: TemperatureSchedule,
    cfg: IntegratorConfig,
    t_final: float,
    *,
    stride: int = 1,
    workers: int = 1,
    chunk_size: int = 256,
    thermostat_on: bool = True,
) -> Iterator[ChunkResult]:
    """Propagate ``ensemble`` in place, yielding chunk results in trajectory order.

    The chunking is fixed by ``chunk_size`` alone and every trajectory is
    integrated independently, so the yielded data are identical for any
    ``workers``.
    """
    if ensemble.n_modes != len(field.modes) or len(thermostats) != len(field.modes):
        raise ConfigurationError(
            f"field has {len(field.modes)} modes, ensemble {ensemble.n_modes}, thermostats {len(thermostats)}"
        )
    if not t_final > 0:
        raise ConfigurationError(f"t_final must be > 0, got {t_final}")
    if stride < 1 or chunk_size < 1 or workers < 1:
        raise ConfigurationError("stride, chunk_size and workers must all be >= 1")
    n_steps = int(round(t_final / cfg.dt))
    if n_steps < 1 or abs(n_steps * cfg.dt - t_final) > 1e-9 * max(1.0, t_final):
        raise ConfigurationError(f"t_final={t_final} is not an integer multiple of dt={cfg.dt}")
    job = _Job(field, tuple(thermostats), schedule, cfg, ensemble.time, n_steps, stride, thermostat_on)
    times = ensemble.time + cfg.dt * stride * np.arange(n_steps // stride + 1)
    bounds = [(lo, min(lo + chunk_size, ensemble.n_traj)) for lo in range(0, ensemble.n_traj, chunk_size)]

    def work(bound):
        lo, hi = bound
        states = np.ascontiguousarray(ensemble.states[lo:hi])
        failed = ensemble.failed[lo:hi].copy()
        snaps = job.run(states, failed)
        return lo, states, failed, snaps

    def emit(result):
        lo, states, failed, snaps = result
        hi = lo + states.shape[0]
        ensemble.states[lo:hi] = states
        ensemble.failed[lo:hi] = failed
        return ChunkResult(lo, times, snaps, failed)

    if workers == 1:
        for b in bounds:
            yield emit(work(b))
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            for wave in range(0, len(bounds), workers):
                for result in pool.map(work, bounds[wave : wave + workers]):
                    yield emit(result)
    ensemble.time = job.time0 + n_steps * cfg.dt


def propagate_ensemble(
    ensemble: EnsembleState,
    field: FieldSpec,
    thermostats: Sequence[ThermostatParams],
    schedule: TemperatureSchedule,
    cfg: IntegratorConfig,
    t_final: float,
    *,
    observers: Sequence[Callable[[ChunkResult], None]] = (),
    stride: int = 1,
    workers: int = 1,
    chunk_size: int = 256,
    thermostat_on: bool = True,
    max_failed_fraction: float = MAX_FAILED_FRACTION,
) -> EnsembleState:
    """Propagate every trajectory, feeding each chunk to ``observers`` in trajectory order.

    Trajectories that become non-finite are flagged and excluded.

    Raises
    ------
    PropagationError
        If the flagged fraction exceeds ``max_failed_fraction``.
    """
    before = int(ensemble.failed.sum())
    for chunk in iter_chunks(
        ensemble, field, thermostats, schedule, cfg, t_final,
        stride=stride, workers=workers, chunk_size=chunk_size, thermostat_on=thermostat_on,
    ):  # fmt: skip
        for observe in observers:
            observe(chunk)
    n_failed = int(ensemble.failed.sum())
    if n_failed > before:
        bad = np.flatnonzero(ensemble.failed)[:10].tolist()
        log.warning("%d trajectories became non-finite and were excluded (first: %s)", n_failed - before, bad)
    if n_failed > max_failed_fraction * ensemble.n_traj:
        raise PropagationError(
            f"{n_failed} of {ensemble.n_traj} trajectories failed, above the {max_failed_fraction:.3%} budget"
        )
    return ensemble
