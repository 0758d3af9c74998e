"""Seeded sampling of initial ensembles in the extended phase space.

Random numbers are derived per ``(mode, block)`` substream, where a block is a
fixed run of ``SeedSpec.block_size`` consecutive trajectories::

    Generator(PCG64(SeedSequence(master, spawn_key=(mode_index, block))))

Each substream draws ``standard_normal((block_size, 4))``; column 0 feeds
``Q``, column 1 feeds ``P`` and columns 2-3 feed the chain momenta when they
are Maxwell-initialized. A trajectory's draws therefore depend only on
``(master, mode, trajectory)`` and never on how the work is split.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .exceptions import ConfigurationError
from .field import CHI1, CHI2, XI1, XI2, ExtendedModeState, FieldSpec, ModePhasePoint, ThermostatParams
from .field import P as P_
from .field import Q as Q_
from .wigner import ThermalModeParams, thermal_moments

CHAIN_INIT_KINDS = ("fixed", "maxwell")
RNG_DESCRIPTION = (
    "numpy PCG64 seeded by SeedSequence(master, spawn_key=(mode_index, block)); "
    "Generator.standard_normal (ziggurat) of shape (block_size, 4) per block; "
    "columns Q, P, chi1, chi2"
)


@dataclass(frozen=True)
class SeedSpec:
    master: int
    block_size: int = 4096

    def __post_init__(self):
        if int(self.master) != self.master or not 0 <= self.master < 2**64:
            raise ConfigurationError(f"seed must be an integer in [0, 2**64), got {self.master}")
        if self.block_size < 1:
            raise ConfigurationError(f"block_size must be >= 1, got {self.block_size}")

    def stream(self, mode_index: int, block: int) -> np.random.Generator:
        seq = np.random.SeedSequence(int(self.master), spawn_key=(int(mode_index), int(block)))
        return np.random.Generator(np.random.PCG64(seq))

    def block_normals(self, mode_index: int, block: int) -> np.ndarray:
        return self.stream(mode_index, block).standard_normal((self.block_size, 4))


def _per_mode(value, n, name):
    if np.ndim(value) == 0:
        return (float(value),) * n
    value = tuple(float(v) for v in value)
    if len(value) != n:
        raise ConfigurationError(f"{name}: expected {n} per-mode values, got {len(value)}")
    return value


@dataclass(frozen=True)
class EnsembleInit:
    """How to draw ``n_traj`` initial extended states.

    Thermostat coordinates start at the fixed values ``xi1, xi2, chi1, chi2``
    (scalars or one value per mode). With ``chain_init="maxwell"`` the chain
    momenta are instead drawn from Gaussians of variance ``M_K * kbt0`` centred
    on ``chi1``, ``chi2``.
    """

    n_traj: int
    thermal: tuple[ThermalModeParams, ...]
    thermostats: tuple[ThermostatParams, ...] | None = None
    xi1: float | tuple = 0.0
    xi2: float | tuple = 0.0
    chi1: float | tuple = 0.0
    chi2: float | tuple = 0.0
    chain_init: str = "fixed"
    kbt0: tuple[float, ...] | None = None

    def __post_init__(self):
        n = len(self.thermal)
        object.__setattr__(self, "thermal", tuple(self.thermal))
        if int(self.n_traj) != self.n_traj or self.n_traj < 1:
            raise ConfigurationError(f"n_traj must be >= 1, got {self.n_traj}")
        for name in ("xi1", "xi2", "chi1", "chi2"):
            vals = _per_mode(getattr(self, name), n, name)
            if not all(math.isfinite(v) for v in vals):
                raise ConfigurationError(f"{name}: thermostat initial values must be finite")
            object.__setattr__(self, name, vals)
        if self.chain_init not in CHAIN_INIT_KINDS:
            raise ConfigurationError(f"chain_init must be one of {CHAIN_INIT_KINDS}, got {self.chain_init!r}")
        if self.chain_init == "maxwell":
            if self.thermostats is None or len(self.thermostats) != n:
                raise ConfigurationError("maxwell chain initialization needs one ThermostatParams per mode")
            kbt0 = self.kbt0 if self.kbt0 is not None else tuple(tp.kbt_target for tp in self.thermal)
            object.__setattr__(self, "kbt0", _per_mode(kbt0, n, "kbt0"))
        if self.thermostats is not None:
            object.__setattr__(self, "thermostats", tuple(self.thermostats))

    @property
    def n_modes(self) -> int:
        return len(self.thermal)

    def offsets(self) -> np.ndarray:
        """Fixed thermostat values as an ``(N, 6)`` array with zero physical columns."""
        out = np.zeros((self.n_modes, 6))
        out[:, XI1], out[:, XI2] = self.xi1, self.xi2
        out[:, CHI1], out[:, CHI2] = self.chi1, self.chi2
        return out


@dataclass
class EnsembleState:
    """Extended states of every trajectory and mode at a common time.

    ``states`` has shape ``(n_traj, N, 6)`` with the last axis ordered
    ``(Q, xi1, xi2, P, chi1, chi2)``; ``failed`` marks trajectories excluded
    after becoming non-finite.
    """

    states: np.ndarray
    time: float = 0.0
    seed: int | None = None
    failed: np.ndarray = field(default=None)

    def __post_init__(self):
        self.states = np.asarray(self.states, dtype=float)
        if self.states.ndim != 3 or self.states.shape[2] != 6:
            raise ConfigurationError(f"ensemble states must have shape (n_traj, N, 6), got {self.states.shape}")
        if self.failed is None:
            self.failed = np.zeros(self.states.shape[0], dtype=bool)

    @property
    def n_traj(self) -> int:
        return self.states.shape[0]

    @property
    def n_modes(self) -> int:
        return self.states.shape[1]

    def active(self) -> np.ndarray:
        """States of the trajectories that were not flagged as failed."""
        return self.states[~self.failed]


def sample_mode(tp: ThermalModeParams, stream: np.random.Generator) -> ModePhasePoint:
    """Draw one phase point from the thermal Wigner Gaussian of a mode."""
    m = thermal_moments(tp)
    z = stream.standard_normal(2)
    return ModePhasePoint(float(z[0] * math.sqrt(m.varQ)), float(z[1] * math.sqrt(m.varP)))


def _fill_mode(out: np.ndarray, init: EnsembleInit, j: int, normals: np.ndarray):
    """Write extended states of mode ``j`` from standard normals of shape ``(n, 4)``."""
    m = thermal_moments(init.thermal[j])
    out[:, Q_] = normals[:, 0] * math.sqrt(m.varQ)
    out[:, P_] = normals[:, 1] * math.sqrt(m.varP)
    out[:, XI1], out[:, XI2] = init.xi1[j], init.xi2[j]
    out[:, CHI1], out[:, CHI2] = init.chi1[j], init.chi2[j]
    if init.chain_init == "maxwell":
        th, kbt = init.thermostats[j], init.kbt0[j]
        out[:, CHI1] += normals[:, 2] * math.sqrt(th.M1 * kbt)
        out[:, CHI2] += normals[:, 3] * math.sqrt(th.M2 * kbt)


def sample_extended(init: EnsembleInit, seed: SeedSpec, mode_index: int, trajectory: int) -> ExtendedModeState:
    """Initial state of one (mode, trajectory) pair; ``mode_index`` counts from 1."""
    if not 1 <= mode_index <= init.n_modes:
        raise ConfigurationError(f"mode index {mode_index} out of range 1..{init.n_modes}")
    if not 0 <= trajectory < init.n_traj:
        raise ConfigurationError(f"trajectory {trajectory} out of range 0..{init.n_traj - 1}")
    block, offset = divmod(trajectory, seed.block_size)
    normals = seed.block_normals(mode_index, block)[offset : offset + 1]
    out = np.empty((1, 6))
    _fill_mode(out, init, mode_index - 1, normals)
    return ExtendedModeState.from_array(out[0])


def sample_ensemble(field: FieldSpec, init: EnsembleInit, seed: SeedSpec) -> EnsembleState:
    """Draw the full ``(n_traj, N, 6)`` initial ensemble; modes are sampled independently."""
    if init.n_modes != len(field.modes):
        raise ConfigurationError(f"field has {len(field.modes)} modes but init describes {init.n_modes}")
    for mode, tp in zip(field.modes, init.thermal):
        if mode != tp.mode:
            raise ConfigurationError(f"mode {mode.index}: thermal parameters belong to a different mode")
    n = init.n_traj
    states = np.empty((n, init.n_modes, 6))
    n_blocks = -(-n // seed.block_size)
    for j in range(init.n_modes):
        for b in range(n_blocks):
            lo = b * seed.block_size
            hi = min(lo + seed.block_size, n)
            normals = seed.block_normals(j + 1, b)[: hi - lo]
            _fill_mode(states[lo:hi, j, :], init, j, normals)
    return EnsembleState(states, 0.0, int(seed.master))


def thermal_params_for(field: FieldSpec, beta: float | Sequence[float]) -> tuple[ThermalModeParams, ...]:
    betas = _per_mode(beta, len(field.modes), "beta")
    return tuple(ThermalModeParams(m, b, field.units) for m, b in zip(field.modes, betas))
