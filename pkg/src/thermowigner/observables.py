"""Phase-space observables and their ensemble estimators.

A phase-space average of a symmetric-ordered observable is the mean of its
Weyl symbol over trajectories drawn from (and propagated with) the Wigner
function, so every estimator here is a plain Monte Carlo mean with standard
error ``sigma / sqrt(n)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, NamedTuple, Sequence

import numpy as np

from .exceptions import ConfigurationError
from .field import P as P_
from .field import Q as Q_
from .field import FieldSpec

OBSERVABLE_KINDS = (
    "mode-energy",
    "kinetic-temperature",
    "occupation",
    "weyl-monomial",
    "histogram",
    "position-variance",
    "momentum-variance",
)


@dataclass(frozen=True)
class ObservableSpec:
    """What to measure, on which modes, how often.

    ``powers`` is the ``(n, m)`` pair of a ``weyl-monomial``; ``variable``,
    ``bins`` and ``range`` configure a ``histogram``. ``modes=None`` selects
    every mode.
    """

    kind: str
    modes: tuple[int, ...] | None = None
    stride: int = 1
    powers: tuple[int, int] = (1, 1)
    variable: str = "Q"
    bins: int = 32
    range: tuple[float, float] | None = None

    def __post_init__(self):
        if self.kind not in OBSERVABLE_KINDS:
            raise ConfigurationError(f"observable kind must be one of {OBSERVABLE_KINDS}, got {self.kind!r}")
        if int(self.stride) != self.stride or self.stride < 1:
            raise ConfigurationError(f"observable stride must be >= 1, got {self.stride}")
        if self.modes is not None:
            object.__setattr__(self, "modes", tuple(int(j) for j in self.modes))
            if not self.modes:
                raise ConfigurationError("observable mode selection is empty")
        object.__setattr__(self, "powers", tuple(int(v) for v in self.powers))
        if len(self.powers) != 2 or min(self.powers) < 0:
            raise ConfigurationError(f"weyl-monomial powers must be two non-negative integers, got {self.powers}")
        if self.variable not in ("Q", "P"):
            raise ConfigurationError(f"histogram variable must be 'Q' or 'P', got {self.variable!r}")
        if self.bins < 8:
            raise ConfigurationError(f"histogram needs at least 8 bins, got {self.bins}")
        if self.range is not None:
            object.__setattr__(self, "range", tuple(float(v) for v in self.range))
            if len(self.range) != 2 or not self.range[1] > self.range[0]:
                raise ConfigurationError(f"histogram range must satisfy lo < hi, got {self.range}")

    @property
    def name(self) -> str:
        if self.kind == "weyl-monomial":
            return f"weyl-monomial({self.powers[0]},{self.powers[1]})"
        if self.kind == "histogram":
            return f"histogram({self.variable})"
        return self.kind

    def mode_columns(self, field: FieldSpec) -> list[int]:
        """Zero-based mode columns selected by this spec."""
        if self.modes is None:
            return list(range(len(field.modes)))
        for j in self.modes:
            if not 1 <= j <= len(field.modes):
                raise ConfigurationError(f"observable {self.name} selects mode {j}, field has {len(field.modes)}")
        return [j - 1 for j in self.modes]


class ObservableEstimate(NamedTuple):
    mode: int
    mean: complex | float
    stderr: float
    n: int


class HistogramEstimate(NamedTuple):
    mode: int
    edges: np.ndarray
    density: np.ndarray
    n: int


def symbol_values(spec: ObservableSpec, field: FieldSpec, states: np.ndarray) -> np.ndarray:
    """Per-sample values of the observable on ``(..., N, 6)`` states, shape ``(..., N)``.

    Variances are returned as squared coordinates; :func:`estimate_observable`
    subtracts the squared mean.
    """
    mu, omega, hbar = field.mus, field.omegas, field.units.hbar
    q, p = states[..., Q_], states[..., P_]
    if spec.kind == "mode-energy":
        return p**2 / (2 * mu) + 0.5 * mu * omega**2 * q**2
    if spec.kind == "kinetic-temperature":
        return p**2 / mu / field.units.kB
    if spec.kind == "occupation":
        return (p**2 / (2 * mu) + 0.5 * mu * omega**2 * q**2) / (hbar * omega) - 0.5
    if spec.kind == "weyl-monomial":
        lam = np.array([m.lam for m in field.modes])
        a = (lam * q + 1j * p / lam) / math.sqrt(2.0 * hbar)
        n, m = spec.powers
        return np.conj(a) ** n * a**m
    if spec.kind == "position-variance":
        return q**2
    if spec.kind == "momentum-variance":
        return p**2
    raise ConfigurationError(f"{spec.kind} has no per-sample symbol")


def _coordinate(spec, states):
    return states[..., Q_ if spec.variable == "Q" else P_]


def estimate_observable(spec: ObservableSpec, field: FieldSpec, snapshot: np.ndarray):
    """Monte Carlo estimate of ``spec`` on a snapshot of shape ``(n, N, 6)``.

    Rows containing NaN (failed trajectories) are dropped.

    Returns
    -------
    list of ObservableEstimate or HistogramEstimate
        One entry per selected mode.
    """
    snapshot = np.asarray(snapshot, dtype=float)
    rows = snapshot[np.isfinite(snapshot).all(axis=(1, 2))]
    if rows.shape[0] == 0:
        raise ConfigurationError(f"observable {spec.name}: empty ensemble selection")
    cols = spec.mode_columns(field)
    n = rows.shape[0]
    if spec.kind == "histogram":
        out = []
        for j in cols:
            x = _coordinate(spec, rows[:, j])
            rng = spec.range or (float(x.min()), float(x.max()))
            density, edges = np.histogram(x, bins=spec.bins, range=rng, density=True)
            out.append(HistogramEstimate(j + 1, edges, density, n))
        return out
    values = symbol_values(spec, field, rows)
    out = []
    for j in cols:
        v = values[:, j]
        mean = v.mean()
        spread = float(np.sqrt(np.mean(np.abs(v - mean) ** 2)))
        if spec.kind in ("position-variance", "momentum-variance"):
            col = Q_ if spec.kind == "position-variance" else P_
            mean = mean - rows[:, j, col].mean() ** 2
        stderr = spread / math.sqrt(n)
        mean = complex(mean) if np.iscomplexobj(v) else float(mean)
        out.append(ObservableEstimate(j + 1, mean, stderr, n))
    return out


class MomentAccumulator:
    """Order-insensitive running sums of per-sample quantities at fixed output times.

    Used as a propagation observer: each chunk's contribution is reduced to
    sums first and the chunk sums are added in trajectory order, so the result
    does not depend on how trajectories were distributed over workers.

    Parameters
    ----------
    quantities : dict of name -> callable
        Each callable maps states ``(..., N, 6)`` to values ``(..., N)``.
    n_times, n_modes : int
        Output grid size.
    """

    def __init__(self, quantities: dict[str, Callable[[np.ndarray], np.ndarray]], n_times: int, n_modes: int):
        self.quantities = dict(quantities)
        self.count = np.zeros((n_times, n_modes))
        self.sums = {k: np.zeros((n_times, n_modes), dtype=complex) for k in self.quantities}
        self.sq_sums = {k: np.zeros((n_times, n_modes)) for k in self.quantities}
        self.times = None

    def __call__(self, chunk):
        snaps = chunk.snapshots
        self.times = chunk.times
        ok = np.isfinite(snaps).all(axis=3)
        self.count += ok.sum(axis=1)
        for name, f in self.quantities.items():
            v = np.where(ok, f(np.nan_to_num(snaps)), 0.0)
            self.sums[name] += v.sum(axis=1)
            self.sq_sums[name] += (np.abs(v) ** 2).sum(axis=1)

    def mean(self, name: str) -> np.ndarray:
        m = self.sums[name] / self.count
        return m.real if not np.iscomplexobj(m) or not np.any(m.imag) else m

    def stderr(self, name: str) -> np.ndarray:
        m = self.sums[name] / self.count
        var = np.maximum(self.sq_sums[name] / self.count - np.abs(m) ** 2, 0.0)
        return np.sqrt(var / self.count)

    def variance(self, sq_name: str, lin_name: str) -> tuple[np.ndarray, np.ndarray]:
        """Central variance and its standard error from a squared and a linear quantity."""
        return self.mean(sq_name).real - self.mean(lin_name).real ** 2, self.stderr(sq_name)


def standard_quantities(field: FieldSpec) -> dict[str, Callable]:
    """Position, momentum, their squares, mode energy and kinetic temperature."""
    mu, omega = field.mus, field.omegas
    return {
        "Q": lambda s: s[..., Q_],
        "P": lambda s: s[..., P_],
        "Q2": lambda s: s[..., Q_] ** 2,
        "P2": lambda s: s[..., P_] ** 2,
        "H": lambda s: s[..., P_] ** 2 / (2 * mu) + 0.5 * mu * omega**2 * s[..., Q_] ** 2,
        "kinT": lambda s: s[..., P_] ** 2 / mu / field.units.kB,
    }


def observable_quantities(specs: Sequence[ObservableSpec], field: FieldSpec) -> dict[str, Callable]:
    """Accumulator quantities for the non-histogram entries of ``specs``, keyed by name."""
    out = {}
    for spec in specs:
        if spec.kind != "histogram":
            out[spec.name] = lambda s, spec=spec: symbol_values(spec, field, s)
    return out
