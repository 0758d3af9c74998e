"""Per-mode thermostat target temperatures as functions of time.

The quantum target of mode ``J`` is ``1 / beta_tilde_J``, the classical one
``1 / beta``. A schedule moves the modes in its scope from the first to the
second; modes outside the scope keep the quantum target for the whole run.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ._kernels import SCHEDULE_CODES, scheduled_kbt
from .exceptions import ConfigurationError
from .field import FieldSpec, ModeSpec, UnitSystem
from .wigner import tilde_beta

SCHEDULE_KINDS = tuple(SCHEDULE_CODES)


@dataclass(frozen=True)
class TemperatureSchedule:
    """Target-temperature protocol.

    Parameters
    ----------
    kind : str
        One of ``constant-quantum``, ``constant-classical``, ``step-quench``,
        ``linear-ramp``.
    beta : float
        Physical inverse temperature.
    t_quench : float
        Switch time of ``step-quench``.
    ramp : (float, float)
        Window of ``linear-ramp``.
    scope : tuple of int or None
        Mode indices the protocol applies to; ``None`` means all modes.
    target_scale : float
        Multiplies every emitted target. Only negative controls change it.
    """

    kind: str = "constant-quantum"
    beta: float = 1.0
    t_quench: float = 0.0
    ramp: tuple[float, float] = (0.0, 1.0)
    scope: tuple[int, ...] | None = None
    target_scale: float = 1.0

    def __post_init__(self):
        if self.kind not in SCHEDULE_CODES:
            raise ConfigurationError(f"schedule kind must be one of {SCHEDULE_KINDS}, got {self.kind!r}")
        if not (self.beta > 0 and math.isfinite(self.beta)):
            raise ConfigurationError(f"schedule: beta must be > 0, got {self.beta}")
        if not self.t_quench >= 0:
            raise ConfigurationError(f"schedule: t_quench must be >= 0, got {self.t_quench}")
        object.__setattr__(self, "ramp", tuple(float(v) for v in self.ramp))
        if len(self.ramp) != 2 or not self.ramp[1] > self.ramp[0]:
            raise ConfigurationError(f"schedule: ramp window must satisfy t0 < t1, got {self.ramp}")
        if self.scope is not None:
            object.__setattr__(self, "scope", tuple(int(j) for j in self.scope))
        if not (self.target_scale > 0 and math.isfinite(self.target_scale)):
            raise ConfigurationError(f"schedule: target_scale must be > 0, got {self.target_scale}")

    @property
    def code(self) -> int:
        return SCHEDULE_CODES[self.kind]

    def in_scope(self, mode: ModeSpec) -> bool:
        return self.scope is None or mode.index in self.scope

    def quantum_kbt(self, mode: ModeSpec, units: UnitSystem = UnitSystem()) -> float:
        return self.target_scale / tilde_beta(self.beta, mode.omega, units.hbar)

    def classical_kbt(self) -> float:
        return self.target_scale / self.beta

    def kernel_arrays(self, field: FieldSpec):
        """``(kq, kc, scoped)`` per-mode arrays consumed by the compiled propagator."""
        for j in self.scope or ():
            if not 1 <= j <= len(field.modes):
                raise ConfigurationError(f"schedule scope names mode {j}, field has {len(field.modes)}")
        kq = np.array([self.quantum_kbt(m, field.units) for m in field.modes])
        kc = np.full(len(field.modes), self.classical_kbt())
        scoped = np.array([self.in_scope(m) for m in field.modes])
        return kq, kc, scoped


def schedule_kbt(s: TemperatureSchedule, mode: ModeSpec, t: float, units: UnitSystem = UnitSystem()) -> float:
    """Target ``kBT`` of ``mode`` at time ``t``; same code path as the propagator."""
    return float(
        scheduled_kbt(
            s.code, s.quantum_kbt(mode, units), s.classical_kbt(), s.in_scope(mode), float(t), s.t_quench, *s.ramp
        )
    )
