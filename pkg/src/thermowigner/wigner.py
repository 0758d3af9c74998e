"""Analytic Wigner functions of a harmonic mode and their brute-force Fock oracle.

The thermal Wigner function of a mode is a Gaussian Boltzmann factor with a
frequency-dependent inverse temperature::

    beta_tilde = 2 tanh(beta hbar omega / 2) / (hbar omega)
    W(Q, P) = omega beta_tilde / (2 pi) * exp(-beta_tilde H_W(Q, P))

The Fock-state functions ``W_n`` and their Boltzmann-weighted sum give an
independent route to the same Gaussian; the two are compared in the test
suite.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np

from .exceptions import ConfigurationError, DomainError, TruncationError
from .field import FieldSpec, ModePhasePoint, ModeSpec, UnitSystem, ladder_from_phase

TAIL_TOLERANCE = 1e-12
_RESCALE = 1e100
_LOG_RESCALE = math.log(_RESCALE)


def tilde_beta(beta: float, omega: float, hbar: float = 1.0) -> float:
    """Frequency-dependent inverse temperature of a harmonic mode.

    Tends to ``beta`` as ``omega -> 0`` and to ``2 / (hbar omega)`` as
    ``beta -> inf``.
    """
    if not (beta > 0 and omega > 0 and hbar > 0):
        raise DomainError(f"beta, omega and hbar must be > 0, got {beta}, {omega}, {hbar}")
    return 2.0 * math.tanh(0.5 * beta * hbar * omega) / (hbar * omega)


@dataclass(frozen=True)
class ThermalModeParams:
    """A mode held at physical inverse temperature ``beta``."""

    mode: ModeSpec
    beta: float
    units: UnitSystem = UnitSystem()

    def __post_init__(self):
        if not (self.beta > 0 and math.isfinite(self.beta)):
            raise DomainError(f"mode {self.mode.index}: beta must be > 0, got {self.beta}")

    @property
    def beta_tilde(self) -> float:
        return tilde_beta(self.beta, self.mode.omega, self.units.hbar)

    @property
    def kbt_target(self) -> float:
        """Classical thermostat target whose canonical state equals the quantum Wigner function."""
        return 1.0 / self.beta_tilde


class ThermalMoments(NamedTuple):
    varQ: float
    varP: float
    meanH: float
    meanOccupation: float


def thermal_moments(tp: ThermalModeParams) -> ThermalMoments:
    bt = tp.beta_tilde
    mu, omega = tp.mode.mu, tp.mode.omega
    meanH = 1.0 / bt
    return ThermalMoments(
        varQ=1.0 / (bt * mu * omega**2),
        varP=mu / bt,
        meanH=meanH,
        meanOccupation=max(meanH / (tp.units.hbar * omega) - 0.5, 0.0),
    )


@dataclass(frozen=True)
class PhaseGrid:
    """Uniform lattice over a rectangle of one mode's phase plane."""

    q_range: tuple[float, float]
    p_range: tuple[float, float]
    nq: int
    np_: int

    def __post_init__(self):
        if self.nq < 2 or self.np_ < 2:
            raise ConfigurationError(f"grid needs at least 2 points per axis, got {self.nq}x{self.np_}")
        if not (self.q_range[1] > self.q_range[0] and self.p_range[1] > self.p_range[0]):
            raise ConfigurationError(f"degenerate grid ranges {self.q_range}, {self.p_range}")

    @classmethod
    def around(cls, tp: ThermalModeParams, n_sigma: float = 8.0, n: int = 401) -> "PhaseGrid":
        """Square lattice spanning ``n_sigma`` thermal standard deviations on each axis."""
        m = thermal_moments(tp)
        sq, sp = n_sigma * math.sqrt(m.varQ), n_sigma * math.sqrt(m.varP)
        return cls((-sq, sq), (-sp, sp), n, n)

    @property
    def q(self) -> np.ndarray:
        return np.linspace(*self.q_range, self.nq)

    @property
    def p(self) -> np.ndarray:
        return np.linspace(*self.p_range, self.np_)

    def mesh(self) -> tuple[np.ndarray, np.ndarray]:
        """``(Q, P)`` arrays of shape ``(nq, np_)``."""
        return np.meshgrid(self.q, self.p, indexing="ij")

    def integrate(self, values: np.ndarray) -> float:
        """Trapezoidal quadrature of grid values over the rectangle."""
        return float(np.trapezoid(np.trapezoid(values, self.p, axis=1), self.q))


def _energy(mode: ModeSpec, Q, P):
    mu = mode.mu
    return P**2 / (2.0 * mu) + 0.5 * mu * mode.omega**2 * Q**2


def thermal_wigner_density(tp: ThermalModeParams, Q, P):
    """Array version of :func:`thermal_wigner_value`."""
    bt = tp.beta_tilde
    return tp.mode.omega * bt / (2.0 * math.pi) * np.exp(-bt * _energy(tp.mode, np.asarray(Q), np.asarray(P)))


def thermal_wigner_value(tp: ThermalModeParams, x: ModePhasePoint) -> float:
    return float(thermal_wigner_density(tp, x.Q, x.P))


def thermal_wigner_grid(tp: ThermalModeParams, grid: PhaseGrid) -> np.ndarray:
    return thermal_wigner_density(tp, *grid.mesh())


def _laguerre_scaled(n: int, x: np.ndarray):
    """Yield ``(k, mantissa, log_scale)`` with ``L_k(x) = mantissa * exp(log_scale)`` for k <= n.

    Upward three-term recurrence; the pair of running values is rescaled by a
    common factor whenever it grows past ``1e100`` so nothing overflows.
    """
    prev = np.ones_like(x)
    log_scale = np.zeros_like(x)
    yield 0, prev, log_scale
    if n == 0:
        return
    cur = 1.0 - x
    yield 1, cur, log_scale
    for k in range(1, n):
        prev, cur = cur, ((2 * k + 1 - x) * cur - k * prev) / (k + 1)
        big = np.abs(cur) > _RESCALE
        if big.any():
            prev = np.where(big, prev / _RESCALE, prev)
            cur = np.where(big, cur / _RESCALE, cur)
            log_scale = log_scale + big * _LOG_RESCALE
        yield k + 1, cur, log_scale


def _weighted_term(mantissa, log_scale, log_weight):
    # mantissa * exp(log_scale + log_weight) without overflowing the intermediate
    with np.errstate(divide="ignore"):
        return np.sign(mantissa) * np.exp(np.log(np.abs(mantissa)) + log_scale + log_weight)


def fock_wigner_density(n: int, mode: ModeSpec, units: UnitSystem, Q, P):
    """Wigner function of the Fock state ``|n>``, evaluated on arrays."""
    if int(n) != n or n < 0:
        raise DomainError(f"occupation number must be a non-negative integer, got {n}")
    hw = units.hbar * mode.omega
    x = 4.0 * _energy(mode, np.asarray(Q, dtype=float), np.asarray(P, dtype=float)) / hw
    for k, mant, log_scale in _laguerre_scaled(int(n), x):
        if k == n:
            lag = _weighted_term(mant, log_scale, -0.5 * x)
    return (-1.0) ** n / (math.pi * units.hbar) * lag


def fock_wigner_value(n: int, mode: ModeSpec, units: UnitSystem, x: ModePhasePoint) -> float:
    return float(fock_wigner_density(n, mode, units, x.Q, x.P))


def required_n_max(beta: float, omega: float, hbar: float = 1.0, tol: float = TAIL_TOLERANCE) -> int:
    """Smallest Fock truncation whose Boltzmann tail ``exp(-beta hbar omega n_max)`` is below ``tol``."""
    if not (beta > 0 and omega > 0 and hbar > 0):
        raise DomainError(f"beta, omega and hbar must be > 0, got {beta}, {omega}, {hbar}")
    return max(1, math.ceil(-math.log(tol) / (beta * hbar * omega)))


def fock_thermal_density(mode: ModeSpec, units: UnitSystem, beta: float, n_max: int, Q, P):
    """Boltzmann-weighted sum of Fock Wigner functions ``sum_n p_n W_n`` truncated at ``n_max``.

    Raises
    ------
    TruncationError
        If ``exp(-beta hbar omega n_max)`` is not below ``TAIL_TOLERANCE``.
    """
    need = required_n_max(beta, mode.omega, units.hbar)
    if n_max < need:
        raise TruncationError(
            f"n_max={n_max} leaves a Boltzmann tail above {TAIL_TOLERANCE:g}; need n_max >= {need}",
            need,
        )
    hw = units.hbar * mode.omega
    log_q = -beta * hw
    x = 4.0 * _energy(mode, np.asarray(Q, dtype=float), np.asarray(P, dtype=float)) / hw
    total = np.zeros_like(x)
    # The common factor exp(-beta hbar omega / 2) cancels against Z.
    for k, mant, log_scale in _laguerre_scaled(n_max, x):
        total += (-1.0) ** k * _weighted_term(mant, log_scale, k * log_q - 0.5 * x)
    z = -math.expm1((n_max + 1) * log_q) / -math.expm1(log_q)
    return total / (z * math.pi * units.hbar)


def fock_thermal_sum(mode: ModeSpec, units: UnitSystem, beta: float, n_max: int, x: ModePhasePoint) -> float:
    return float(fock_thermal_density(mode, units, beta, n_max, x.Q, x.P))


def multimode_wigner_value(
    field: FieldSpec, params: Sequence[ThermalModeParams], points: Sequence[ModePhasePoint]
) -> float:
    """Product of per-mode thermal Wigner functions."""
    if not (len(params) == len(points) == len(field.modes)):
        raise ConfigurationError(
            f"expected {len(field.modes)} thermal parameter sets and phase points, "
            f"got {len(params)} and {len(points)}"
        )
    value = 1.0
    for tp, x in zip(params, points):
        value *= thermal_wigner_value(tp, x)
    return value


def weyl_monomial_symbol(n: int, m: int, mode: ModeSpec, units: UnitSystem, x: ModePhasePoint) -> complex:
    """Phase-space symbol ``conj(a)**n * a**m`` of the symmetrized monomial of ladder operators."""
    if n < 0 or m < 0:
        raise DomainError(f"monomial powers must be >= 0, got ({n}, {m})")
    a = ladder_from_phase(mode, units, x)
    return a.conjugate() ** n * a**m


def weyl_monomial_density(n: int, m: int, mode: ModeSpec, units: UnitSystem, Q, P):
    """Array version of :func:`weyl_monomial_symbol`."""
    a = (mode.lam * np.asarray(Q) + 1j * np.asarray(P) / mode.lam) / math.sqrt(2.0 * units.hbar)
    return np.conj(a) ** n * a**m
