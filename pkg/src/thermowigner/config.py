"""Declarative run configuration in TOML.

Every key is optional except ``beta`` and ``[[modes]]``; unknown keys are
errors. A minimal file::

    beta = 1.0

    [[modes]]
    omega = 1.0

The full grammar, with defaults, is documented in ``README.md``. Parsing
materializes every default so ``RunConfig.to_toml()`` reproduces the resolved
configuration exactly.
"""

from __future__ import annotations

import math
import sys
from dataclasses import dataclass, field, replace
from typing import Any

import tomli_w

if sys.version_info >= (3, 11):
    import tomllib
else:  # pragma: no cover
    import tomli as tomllib

from .dynamics import SUZUKI_YOSHIDA, IntegratorConfig
from .exceptions import ConfigurationError, DomainError
from .field import FieldSpec, ModeSpec, ThermostatParams, UnitSystem
from .observables import ObservableSpec
from .sampling import CHAIN_INIT_KINDS, EnsembleInit, SeedSpec, thermal_params_for
from .schedules import SCHEDULE_KINDS, TemperatureSchedule

OUTPUT_FORMATS = ("csv", "jsonl")


class _Table:
    """Strict view of one TOML table: every key must be consumed exactly once."""

    def __init__(self, data: Any, path: str):
        if not isinstance(data, dict):
            raise ConfigurationError(f"{path}: expected a table, got {type(data).__name__}")
        self.data, self.path, self.seen = data, path, set()

    def get(self, key, default, kind=None):
        self.seen.add(key)
        value = self.data.get(key, default)
        if kind is float and isinstance(value, int) and not isinstance(value, bool):
            value = float(value)
        if kind is not None and value is not None and not isinstance(value, kind):
            raise ConfigurationError(f"{self.where(key)}: expected {_kind_name(kind)}, got {value!r}")
        if kind in (int, float) and isinstance(value, bool):
            raise ConfigurationError(f"{self.where(key)}: expected {_kind_name(kind)}, got {value!r}")
        return value

    def require(self, key, kind=None):
        if key not in self.data:
            extra = sorted(set(self.data) - self.seen - {key})
            hint = f" (unknown key(s) {', '.join(map(repr, extra))})" if extra else ""
            raise ConfigurationError(f"{self.where(key)}: required key is missing{hint}")
        return self.get(key, None, kind)

    def where(self, key):
        return f"{self.path}.{key}" if self.path else key

    def finish(self):
        unknown = sorted(set(self.data) - self.seen)
        if unknown:
            raise ConfigurationError(f"{self.path or 'top level'}: unknown key(s) {', '.join(map(repr, unknown))}")


def _kind_name(kind):
    if isinstance(kind, tuple):
        return " or ".join(k.__name__ for k in kind)
    return kind.__name__


def _positive(table: _Table, key: str, value: float):
    if not (value > 0 and math.isfinite(value)):
        raise ConfigurationError(f"{table.where(key)} must be > 0, got {value}")
    return value


@dataclass(frozen=True)
class ThermostatConfig:
    enabled: bool = True
    tau_factor: float = 0.25
    g: float = 1.0
    M1: float | None = None
    M2: float | None = None


@dataclass(frozen=True)
class EnsembleConfig:
    n_traj: int = 1000
    seed: int = 0
    chain_init: str = "maxwell"
    xi1: float = 0.0
    xi2: float = 0.0
    chi1: float = 0.0
    chi2: float = 0.0
    block_size: int = 4096


@dataclass(frozen=True)
class ExecutionConfig:
    workers: int = 1
    chunk_size: int = 256


@dataclass(frozen=True)
class OutputConfig:
    directory: str = "out"
    formats: tuple[str, ...] = ("csv",)
    stride: int = 100
    record_trajectories: int = 4


@dataclass(frozen=True)
class RunConfig:
    """Resolved description of one simulation run."""

    field: FieldSpec
    beta: float
    thermostat: ThermostatConfig = ThermostatConfig()
    integrator: IntegratorConfig = IntegratorConfig(0.01, 1, SUZUKI_YOSHIDA[4])
    t_final: float = 100.0
    ensemble: EnsembleConfig = EnsembleConfig()
    schedule: TemperatureSchedule = None
    observables: tuple[ObservableSpec, ...] = ()
    output: OutputConfig = OutputConfig()
    execution: ExecutionConfig = ExecutionConfig()

    def __post_init__(self):
        if self.schedule is None:
            object.__setattr__(self, "schedule", TemperatureSchedule(beta=self.beta))
        if self.schedule.beta != self.beta:
            raise ConfigurationError("schedule.beta must equal the run's beta")
        object.__setattr__(self, "observables", tuple(self.observables))
        for spec in self.observables:
            spec.mode_columns(self.field)
        self.schedule.kernel_arrays(self.field)
        n_steps = round(self.t_final / self.integrator.dt)
        if n_steps < 1 or abs(n_steps * self.integrator.dt - self.t_final) > 1e-9 * max(1.0, self.t_final):
            raise ConfigurationError(f"integrator.t_final={self.t_final} is not a multiple of dt={self.integrator.dt}")
        for name in ("M1", "M2"):
            value = getattr(self.thermostat, name)
            if value is not None and len(value) != len(self.field.modes):
                raise ConfigurationError(f"thermostat.{name}: expected {len(self.field.modes)} per-mode values")

    # -- resolved objects ---------------------------------------------------------

    @property
    def n_steps(self) -> int:
        return round(self.t_final / self.integrator.dt)

    @property
    def seed(self) -> SeedSpec:
        return SeedSpec(self.ensemble.seed, self.ensemble.block_size)

    def initial_kbt(self) -> list[float]:
        from .schedules import schedule_kbt

        return [schedule_kbt(self.schedule, m, 0.0, self.field.units) for m in self.field.modes]

    def thermostats(self) -> tuple[ThermostatParams, ...]:
        th = self.thermostat
        out = []
        for j, (mode, kbt) in enumerate(zip(self.field.modes, self.initial_kbt())):
            matched = ThermostatParams.matched(mode, kbt, th.tau_factor, th.g)
            M1 = th.M1[j] if th.M1 is not None else matched.M1
            M2 = th.M2[j] if th.M2 is not None else matched.M2
            out.append(ThermostatParams(M1, M2, th.g))
        return tuple(out)

    def ensemble_init(self) -> EnsembleInit:
        e = self.ensemble
        return EnsembleInit(
            e.n_traj,
            thermal_params_for(self.field, self.beta),
            self.thermostats(),
            e.xi1, e.xi2, e.chi1, e.chi2,
            chain_init=e.chain_init,
            kbt0=tuple(self.initial_kbt()),
        )  # fmt: skip

    def with_overrides(self, **kwargs) -> "RunConfig":
        """Copy with ``seed``, ``output_dir``, ``formats``, ``stride`` or ``workers`` replaced."""
        cfg = self
        if kwargs.get("seed") is not None:
            cfg = replace(cfg, ensemble=replace(cfg.ensemble, seed=_check_seed(kwargs["seed"], "--seed")))
        if kwargs.get("output_dir") is not None:
            cfg = replace(cfg, output=replace(cfg.output, directory=str(kwargs["output_dir"])))
        if kwargs.get("formats") is not None:
            cfg = replace(cfg, output=replace(cfg.output, formats=_check_formats(kwargs["formats"], "--format")))
        if kwargs.get("stride") is not None:
            if kwargs["stride"] < 1:
                raise ConfigurationError(f"--stride must be >= 1, got {kwargs['stride']}")
            cfg = replace(cfg, output=replace(cfg.output, stride=int(kwargs["stride"])))
        if kwargs.get("workers") is not None:
            if kwargs["workers"] < 1:
                raise ConfigurationError(f"--workers must be >= 1, got {kwargs['workers']}")
            cfg = replace(cfg, execution=replace(cfg.execution, workers=int(kwargs["workers"])))
        return cfg

    # -- serialization ------------------------------------------------------------

    def to_dict(self) -> dict:
        th = self.thermostat
        s = self.schedule
        sy_order = next(k for k, w in SUZUKI_YOSHIDA.items() if w == self.integrator.sy_weights)
        return {
            "beta": self.beta,
            "units": {"hbar": self.field.units.hbar, "kB": self.field.units.kB},
            "modes": [{"omega": m.omega, "lambda": m.lam} for m in self.field.modes],
            "thermostat": {
                "enabled": th.enabled,
                "tau_factor": th.tau_factor,
                "g": th.g,
                "M1": list(th.M1) if th.M1 is not None else "auto",
                "M2": list(th.M2) if th.M2 is not None else "auto",
            },
            "integrator": {
                "dt": self.integrator.dt,
                "n_respa": self.integrator.n_respa,
                "sy_order": sy_order,
                "t_final": self.t_final,
            },
            "ensemble": dict(vars(self.ensemble)),
            "schedule": {
                "kind": s.kind,
                "t_quench": s.t_quench,
                "ramp": list(s.ramp),
                "scope": list(s.scope) if s.scope is not None else "all",
                "target_scale": s.target_scale,
            },
            "observables": [
                {
                    "kind": o.kind,
                    "modes": list(o.modes) if o.modes is not None else "all",
                    "stride": o.stride,
                    "powers": list(o.powers),
                    "variable": o.variable,
                    "bins": o.bins,
                    "range": list(o.range) if o.range is not None else "auto",
                }
                for o in self.observables
            ],
            "output": {
                "directory": self.output.directory,
                "formats": list(self.output.formats),
                "stride": self.output.stride,
                "record_trajectories": self.output.record_trajectories,
            },
            "execution": dict(vars(self.execution)),
        }

    def to_toml(self) -> str:
        return tomli_w.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, data: dict) -> "RunConfig":
        return _build(data)


def _check_seed(value, where):
    if isinstance(value, bool) or not isinstance(value, int) or not 0 <= value < 2**64:
        raise ConfigurationError(f"{where}: seed must be an integer in [0, 2**64), got {value!r}")
    return value


def _check_formats(value, where):
    formats = (value,) if isinstance(value, str) else tuple(value)
    if not formats or any(f not in OUTPUT_FORMATS for f in formats):
        raise ConfigurationError(f"{where}: formats must be a non-empty subset of {OUTPUT_FORMATS}, got {value!r}")
    return formats


def _auto_list(table, key, n_modes):
    value = table.get(key, "auto", (str, list, float))
    if value == "auto":
        return None
    if isinstance(value, str):
        raise ConfigurationError(f"{table.where(key)}: expected 'auto', a number or a list, got {value!r}")
    values = [value] * n_modes if isinstance(value, float) else value
    for v in values:
        if isinstance(v, bool) or not isinstance(v, (int, float)) or not v > 0:
            raise ConfigurationError(f"{table.where(key)} must be > 0, got {v!r}")
    return tuple(float(v) for v in values)


def _all_or_list(table, key):
    value = table.get(key, "all", (str, list))
    if value == "all":
        return None
    if isinstance(value, str) or not all(isinstance(v, int) and not isinstance(v, bool) for v in value):
        raise ConfigurationError(f"{table.where(key)}: expected 'all' or a list of mode indices, got {value!r}")
    return tuple(value)


def _build(data: dict) -> RunConfig:
    top = _Table(data, "")
    beta = _positive(top, "beta", top.require("beta", float))

    u = _Table(top.get("units", {}), "units")
    try:
        units = UnitSystem(u.get("hbar", 1.0, float), u.get("kB", 1.0, float))
    except DomainError as exc:
        raise ConfigurationError(f"units: {exc}") from None
    u.finish()

    raw_modes = top.require("modes", list)
    if not raw_modes:
        raise ConfigurationError("modes: at least one [[modes]] entry is required")
    modes = []
    for j, raw in enumerate(raw_modes, start=1):
        t = _Table(raw, f"modes[{j}]")
        omega = t.require("omega", float)
        lam = t.get("lambda", None, float)
        mass = t.get("mass", None, float)
        t.finish()
        try:
            if lam is not None and mass is not None:
                raise ConfigurationError(f"mode {j}: give either lambda or mass, not both")
            mode = ModeSpec.massive(j, omega, mass) if mass is not None else ModeSpec(j, omega, 1.0 if lam is None else lam)
        except DomainError as exc:
            raise ConfigurationError(str(exc)) from None
        modes.append(mode)
    field_spec = FieldSpec(tuple(modes), units)
    n = len(modes)

    t = _Table(top.get("thermostat", {}), "thermostat")
    thermostat = ThermostatConfig(
        enabled=t.get("enabled", True, bool),
        tau_factor=_positive(t, "tau_factor", t.get("tau_factor", 0.25, float)),
        g=t.get("g", 1.0, float),
        M1=_auto_list(t, "M1", n),
        M2=_auto_list(t, "M2", n),
    )
    if not thermostat.g >= 1:
        raise ConfigurationError(f"thermostat.g must be >= 1, got {thermostat.g}")
    t.finish()

    t = _Table(top.get("integrator", {}), "integrator")
    dt = _positive(t, "dt", t.get("dt", 0.01, float))
    n_respa = t.get("n_respa", 1, int)
    sy_order = t.get("sy_order", 4, int)
    t_final = _positive(t, "t_final", t.get("t_final", 100.0, float))
    t.finish()
    integrator = IntegratorConfig.order(dt, sy_order, n_respa)

    t = _Table(top.get("ensemble", {}), "ensemble")
    ensemble = EnsembleConfig(
        n_traj=t.get("n_traj", 1000, int),
        seed=_check_seed(t.get("seed", 0, int), "ensemble.seed"),
        chain_init=t.get("chain_init", "maxwell", str),
        xi1=t.get("xi1", 0.0, float),
        xi2=t.get("xi2", 0.0, float),
        chi1=t.get("chi1", 0.0, float),
        chi2=t.get("chi2", 0.0, float),
        block_size=t.get("block_size", 4096, int),
    )
    t.finish()
    if ensemble.n_traj < 1:
        raise ConfigurationError(f"ensemble.n_traj must be >= 1, got {ensemble.n_traj}")
    if ensemble.chain_init not in CHAIN_INIT_KINDS:
        raise ConfigurationError(f"ensemble.chain_init must be one of {CHAIN_INIT_KINDS}, got {ensemble.chain_init!r}")
    if ensemble.block_size < 1:
        raise ConfigurationError(f"ensemble.block_size must be >= 1, got {ensemble.block_size}")

    t = _Table(top.get("schedule", {}), "schedule")
    kind = t.get("kind", "constant-quantum", str)
    if kind not in SCHEDULE_KINDS:
        raise ConfigurationError(f"schedule.kind must be one of {SCHEDULE_KINDS}, got {kind!r}")
    schedule = TemperatureSchedule(
        kind,
        beta,
        t.get("t_quench", 0.0, float),
        tuple(t.get("ramp", [0.0, 1.0], list)),
        _all_or_list(t, "scope"),
        t.get("target_scale", 1.0, float),
    )
    t.finish()

    observables = []
    for j, raw in enumerate(top.get("observables", [], list), start=1):
        t = _Table(raw, f"observables[{j}]")
        rng = t.get("range", "auto", (str, list))
        if isinstance(rng, str) and rng != "auto":
            raise ConfigurationError(f"observables[{j}].range: expected 'auto' or [lo, hi], got {rng!r}")
        observables.append(
            ObservableSpec(
                kind=t.require("kind", str),
                modes=_all_or_list(t, "modes"),
                stride=t.get("stride", 1, int),
                powers=tuple(t.get("powers", [1, 1], list)),
                variable=t.get("variable", "Q", str),
                bins=t.get("bins", 32, int),
                range=None if rng == "auto" else tuple(rng),
            )
        )
        t.finish()

    t = _Table(top.get("output", {}), "output")
    output = OutputConfig(
        directory=t.get("directory", "out", str),
        formats=_check_formats(t.get("formats", ["csv"], (list, str)), "output.formats"),
        stride=t.get("stride", 100, int),
        record_trajectories=t.get("record_trajectories", 4, int),
    )
    t.finish()
    if output.stride < 1:
        raise ConfigurationError(f"output.stride must be >= 1, got {output.stride}")
    if output.record_trajectories < 0:
        raise ConfigurationError(f"output.record_trajectories must be >= 0, got {output.record_trajectories}")

    t = _Table(top.get("execution", {}), "execution")
    execution = ExecutionConfig(workers=t.get("workers", 1, int), chunk_size=t.get("chunk_size", 256, int))
    t.finish()
    if execution.workers < 1 or execution.chunk_size < 1:
        raise ConfigurationError("execution.workers and execution.chunk_size must be >= 1")

    top.finish()
    return RunConfig(
        field=field_spec,
        beta=beta,
        thermostat=thermostat,
        integrator=integrator,
        t_final=t_final,
        ensemble=ensemble,
        schedule=schedule,
        observables=tuple(observables),
        output=output,
        execution=execution,
    )


def parse_config(text: str) -> RunConfig:
    """Parse and validate TOML text.

    Raises
    ------
    ConfigurationError
        On TOML syntax errors (the message carries line and column) and on
        any violated invariant or unknown key.
    """
    try:
        data = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigurationError(f"config syntax error: {exc}") from None
    try:
        return _build(data)
    except ConfigurationError:
        raise
    except (DomainError, ValueError, TypeError) as exc:
        raise ConfigurationError(str(exc)) from None


def load_config(path) -> RunConfig:
    with open(path, encoding="utf-8") as fh:
        return parse_config(fh.read())
