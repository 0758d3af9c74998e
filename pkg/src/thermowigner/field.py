"""Mode structure, unit conventions and energy functions of a free bosonic field.

Every mode ``J`` is a harmonic oscillator with frequency ``omega`` and a
scaling factor ``lambda`` that fixes the canonical map between the ladder
amplitude and the phase point ``(Q, P)``::

    a = (lambda * Q + 1j * P / lambda) / sqrt(2 * hbar)

The effective mass ``mu = lambda**2 / omega`` is always derived, never stored.

The extended phase point of a thermostatted mode is laid out as
``(Q, xi1, xi2, P, chi1, chi2)``; the integer constants below index that
layout in arrays of shape ``(..., 6)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, fields
from typing import Sequence

import numpy as np

from .exceptions import ConfigurationError, DomainError, InvalidStateError

Q, XI1, XI2, P, CHI1, CHI2 = range(6)
STATE_COMPONENTS = ("Q", "xi1", "xi2", "P", "chi1", "chi2")


def _require_finite(name, *values):
    for v in values:
        if not math.isfinite(v):
            raise InvalidStateError(f"{name}: coordinates must be finite, got {values}")


@dataclass(frozen=True)
class UnitSystem:
    """Action scale ``hbar`` and Boltzmann constant ``kB``; natural units by default."""

    hbar: float = 1.0
    kB: float = 1.0

    def __post_init__(self):
        if not (self.hbar > 0 and math.isfinite(self.hbar)):
            raise DomainError(f"hbar must be > 0, got {self.hbar}")
        if not (self.kB > 0 and math.isfinite(self.kB)):
            raise DomainError(f"kB must be > 0, got {self.kB}")


@dataclass(frozen=True)
class ModeSpec:
    """One field mode.

    Parameters
    ----------
    index : int
        Mode label ``J >= 1``.
    omega : float
        Angular frequency.
    lam : float
        Scaling factor of the canonical transformation.
    """

    index: int
    omega: float
    lam: float = 1.0

    def __post_init__(self):
        if int(self.index) != self.index or self.index < 1:
            raise ConfigurationError(f"mode index must be a positive integer, got {self.index}")
        if not (self.omega > 0 and math.isfinite(self.omega)):
            raise DomainError(f"mode {self.index}: omega must be > 0, got {self.omega}")
        if not (self.lam > 0 and math.isfinite(self.lam)):
            raise DomainError(f"mode {self.index}: lambda must be > 0, got {self.lam}")

    @property
    def mu(self) -> float:
        return self.lam**2 / self.omega

    @classmethod
    def massive(cls, index: int, omega: float, mass: float) -> "ModeSpec":
        """Mode of a material oscillator of mass ``mass``: ``lambda = sqrt(m * omega)``."""
        if not mass > 0:
            raise DomainError(f"mode {index}: mass must be > 0, got {mass}")
        return cls(index, omega, math.sqrt(mass * omega))

    @classmethod
    def electromagnetic(
        cls, index: int, omega: float, c: float = 1.0, units: UnitSystem = UnitSystem()
    ) -> "ModeSpec":
        """Electromagnetic mode: ``lambda = sqrt(hbar) * omega / c``."""
        if not c > 0:
            raise DomainError(f"mode {index}: speed of light must be > 0, got {c}")
        return cls(index, omega, math.sqrt(units.hbar) * omega / c)


@dataclass(frozen=True)
class FieldSpec:
    """A truncated set of ``N`` modes with consecutive indices ``1..N``."""

    modes: tuple[ModeSpec, ...]
    units: UnitSystem = UnitSystem()

    def __post_init__(self):
        object.__setattr__(self, "modes", tuple(self.modes))
        if len(self.modes) < 1:
            raise ConfigurationError("a field needs at least one mode")
        indices = [m.index for m in self.modes]
        if indices != list(range(1, len(self.modes) + 1)):
            raise ConfigurationError(f"mode indices must be consecutive from 1, got {indices}")

    @classmethod
    def from_frequencies(
        cls, omegas: Sequence[float], lams: Sequence[float] | None = None, units=UnitSystem()
    ) -> "FieldSpec":
        if lams is None:
            lams = [1.0] * len(omegas)
        if len(lams) != len(omegas):
            raise ConfigurationError("omegas and lambdas differ in length")
        return cls(tuple(ModeSpec(j + 1, w, l) for j, (w, l) in enumerate(zip(omegas, lams))), units)

    def __len__(self):
        return len(self.modes)

    @property
    def omegas(self) -> np.ndarray:
        return np.array([m.omega for m in self.modes])

    @property
    def mus(self) -> np.ndarray:
        return np.array([m.mu for m in self.modes])


@dataclass(frozen=True)
class ModePhasePoint:
    Q: float
    P: float

    def __post_init__(self):
        _require_finite("phase point", self.Q, self.P)


@dataclass(frozen=True)
class ExtendedModeState:
    """Phase point of one mode extended by a two-link thermostat chain."""

    Q: float
    xi1: float
    xi2: float
    P: float
    chi1: float
    chi2: float

    def __post_init__(self):
        _require_finite("extended state", *self.as_tuple())

    def as_tuple(self) -> tuple[float, ...]:
        return tuple(getattr(self, f.name) for f in fields(self))

    def as_array(self) -> np.ndarray:
        return np.array(self.as_tuple(), dtype=float)

    @classmethod
    def from_array(cls, values) -> "ExtendedModeState":
        return cls(*(float(v) for v in values))

    @property
    def phase_point(self) -> ModePhasePoint:
        return ModePhasePoint(self.Q, self.P)


@dataclass(frozen=True)
class ThermostatParams:
    """Chain inertias ``M1``, ``M2`` and multiplicity ``g`` of the first link.

    ``g`` is the number of degrees of freedom the first thermostat controls;
    one chain per mode means ``g = 1``.
    """

    M1: float
    M2: float
    g: float = 1.0

    def __post_init__(self):
        if not (self.M1 > 0 and math.isfinite(self.M1)):
            raise DomainError(f"M1 must be > 0, got {self.M1}")
        if not (self.M2 > 0 and math.isfinite(self.M2)):
            raise DomainError(f"M2 must be > 0, got {self.M2}")
        if not self.g >= 1:
            raise DomainError(f"g must be >= 1, got {self.g}")

    @classmethod
    def matched(cls, mode: ModeSpec, kBT: float, tau_factor: float = 0.25, g: float = 1.0):
        """Inertias ``kBT * tau**2`` with response time ``tau = tau_factor / omega``."""
        if not kBT > 0:
            raise DomainError(f"kBT must be > 0, got {kBT}")
        if not tau_factor > 0:
            raise DomainError(f"tau_factor must be > 0, got {tau_factor}")
        M = kBT * (tau_factor / mode.omega) ** 2
        return cls(M, M, g)


def mode_hamiltonian(mode: ModeSpec, x: ModePhasePoint) -> float:
    """Weyl symbol of one mode's Hamiltonian, ``P**2/(2 mu) + mu omega**2 Q**2 / 2``."""
    _require_finite("phase point", x.Q, x.P)
    mu = mode.mu
    return x.P**2 / (2.0 * mu) + 0.5 * mu * mode.omega**2 * x.Q**2


def nhc_energy(params: ThermostatParams, s: ExtendedModeState, kBT: float) -> float:
    """Energy stored in one mode's thermostat chain. Unbounded below in ``xi``."""
    if not kBT > 0:
        raise DomainError(f"kBT must be > 0, got {kBT}")
    return (
        s.chi1**2 / (2.0 * params.M1)
        + params.g * kBT * s.xi1
        + s.chi2**2 / (2.0 * params.M2)
        + kBT * s.xi2
    )


def total_hamiltonian(
    field: FieldSpec,
    params: Sequence[ThermostatParams],
    states: Sequence[ExtendedModeState],
    kBT: Sequence[float],
) -> float:
    """Field energy plus thermostat energy, summed over modes."""
    n = len(field.modes)
    if not (len(params) == len(states) == len(kBT) == n):
        raise ConfigurationError(
            f"expected {n} thermostat parameter sets, states and temperatures, got "
            f"{len(params)}, {len(states)}, {len(kBT)}"
        )
    total = 0.0
    for mode, p, s, t in zip(field.modes, params, states, kBT):
        total += mode_hamiltonian(mode, s.phase_point) + nhc_energy(p, s, t)
    return total


def ladder_from_phase(mode: ModeSpec, units: UnitSystem, x: ModePhasePoint) -> complex:
    """Complex amplitude ``a`` of the phase point; ``hbar omega |a|**2`` is the mode energy."""
    _require_finite("phase point", x.Q, x.P)
    return complex(mode.lam * x.Q, x.P / mode.lam) / math.sqrt(2.0 * units.hbar)
