"""One-pass self-check of the analytic oracles, the dynamics and the ensemble machinery.

Every check records a measured value, its tolerance and a verdict.
Statistical checks take tolerance ``max(floor, 4 sigma / sqrt(n))`` with the
sample ``sigma`` measured on the run, so shrinking ``n_traj`` widens them in
proportion to the expected noise instead of failing spuriously.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np

from .config import RunConfig, parse_config
from .dynamics import (
    IntegratorConfig,
    compressibility,
    conserved_quantity,
    free_flow_exact,
    nhc_step,
    nhc_vector_field,
)
from .experiments import N_SIGMA, REL_TOL, negative_control, run_equilibrium_experiment
from .field import ExtendedModeState, ModePhasePoint, ModeSpec, ThermostatParams, UnitSystem, mode_hamiltonian
from .sampling import EnsembleInit, SeedSpec, sample_ensemble, thermal_params_for
from .wigner import (
    PhaseGrid,
    ThermalModeParams,
    fock_thermal_density,
    required_n_max,
    thermal_moments,
    thermal_wigner_density,
    tilde_beta,
)

REFERENCE_CONFIG = """\
beta = 1.0

[[modes]]
omega = 1.0

[integrator]
dt = 0.01
t_final = 10.0

[ensemble]
n_traj = 10000
seed = 0

[output]
stride = 50
"""


@dataclass
class Check:
    name: str
    measured: float
    tolerance: float
    passed: bool
    note: str = ""

    def as_dict(self) -> dict:
        return {
            "check": self.name,
            "measured": self.measured,
            "tolerance": self.tolerance,
            "passed": self.passed,
            "note": self.note,
        }


@dataclass
class ValidationReport:
    checks: list[Check] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def add(self, name, measured, tolerance, note="", *, passed=None):
        measured = float(measured)
        ok = measured <= tolerance if passed is None else passed
        self.checks.append(Check(name, measured, float(tolerance), bool(ok), note))

    def records(self):
        return [c.as_dict() for c in self.checks]

    def summary(self) -> str:
        head = f"validation: {'PASS' if self.passed else 'FAIL'} ({sum(c.passed for c in self.checks)}/{len(self.checks)})"
        rows = [f"  {'PASS' if c.passed else 'FAIL'}  {c.name}: {c.measured:.3e} (tol {c.tolerance:.1e})" for c in self.checks]
        return "\n".join([head, *rows])


def _rel(a, b):
    return abs(a - b) / abs(b)


def _analytic_checks(rep: ValidationReport):
    # independent exponential form of the frequency-dependent inverse temperature
    worst = 0.0
    for beta in (0.2, 1.0, 5.0):
        for omega in (0.5, 1.0, 2.0):
            x = beta * omega
            alt = 2.0 / omega * (-math.expm1(-x)) / (1.0 + math.exp(-x))
            worst = max(worst, _rel(tilde_beta(beta, omega), alt))
    rep.add("tilde_beta lattice vs exponential form", worst, 1e-12)
    x = 1e-4
    rep.add("tilde_beta high-temperature limit", _rel(tilde_beta(x, 1.0), x * (1 - x**2 / 12)), 1e-12)
    rep.add("tilde_beta low-temperature limit", _rel(tilde_beta(60.0, 1.0), 2.0), 1e-12)

    worst = 0.0
    units = UnitSystem()
    for beta in (0.2, 1.0, 5.0):
        for omega in (0.5, 1.0, 2.0):
            mode = ModeSpec(1, omega)
            tp = ThermalModeParams(mode, beta, units)
            grid = PhaseGrid.around(tp, n_sigma=6, n=61)
            Q, P = grid.mesh()
            ref = fock_thermal_density(mode, units, beta, required_n_max(beta, omega), Q, P)
            worst = max(worst, float(np.max(np.abs(thermal_wigner_density(tp, Q, P) - ref))))
    rep.add("thermal Wigner vs Fock sum (max abs grid error)", worst, 1e-8)


def _dynamics_checks(rep: ValidationReport, vector_field: Callable):
    mode = ModeSpec.massive(1, 0.7, 2.0)
    x0 = ModePhasePoint(0.4, -1.1)
    e0 = mode_hamiltonian(mode, x0)
    rep.add("free flow energy conservation", _rel(mode_hamiltonian(mode, free_flow_exact(mode, x0, 100.0)), e0), 1e-12)

    unit = ModeSpec(1, 1.0)
    th = ThermostatParams(1.0, 1.0, 1.0)
    s = ExtendedModeState(1.0, 0.0, 0.0, 2.0, 0.5, -0.25)
    got = np.array(vector_field(unit, th, 1.0, s))
    want = np.array([2.0, 0.5, -0.25, -2.0, 3.125, -0.75])
    rep.add("vector field hand example", np.max(np.abs(got - want)), 0.0)

    rng = np.random.default_rng(7)
    mode = ModeSpec(1, 1.3, 0.8)
    th = ThermostatParams(0.6, 1.7, 1.0)
    kbt, h = 0.9, 1e-5
    div_err = cons_err = ident_err = 0.0
    for _ in range(20):
        base = rng.normal(size=6)
        st = ExtendedModeState.from_array(base)
        div = 0.0
        for k in range(6):
            e = np.zeros(6)
            e[k] = h
            fp = np.array(vector_field(mode, th, kbt, ExtendedModeState.from_array(base + e)))
            fm = np.array(vector_field(mode, th, kbt, ExtendedModeState.from_array(base - e)))
            div += (fp[k] - fm[k]) / (2 * h)
        kappa = compressibility(th, st)
        div_err = max(div_err, abs(div - kappa))
        v = np.array(vector_field(mode, th, kbt, st))
        ident_err = max(ident_err, abs(kappa + v[1] + v[2]))
        # H' is at most quadratic, so a central difference along v is exact up to roundoff
        eps = 1e-3
        hp = conserved_quantity(mode, th, kbt, ExtendedModeState.from_array(base + eps * v))
        hm = conserved_quantity(mode, th, kbt, ExtendedModeState.from_array(base - eps * v))
        cons_err = max(cons_err, abs(hp - hm) / (2 * eps) / max(1.0, float(np.abs(v).max())))
    rep.add("compressibility vs finite-difference divergence", div_err, 1e-8)
    rep.add("compressibility equals -(dxi1 + dxi2)", ident_err, 1e-14)
    rep.add("dH'/dt along vector field", cons_err, 1e-10)

    mode = ModeSpec(1, 1.0)
    th = ThermostatParams.matched(mode, 1.0)
    s0 = ExtendedModeState(1.0, 0.0, 0.0, 0.5, 0.3, -0.2)
    cfg = IntegratorConfig.order(1e-3, 1, 8)
    h0 = conserved_quantity(mode, th, 1.0, s0)
    s1 = nhc_step(mode, th, 1.0, s0, cfg, n_steps=100_000)
    rep.add("integrator conserved-quantity drift (1e5 steps)", _rel(conserved_quantity(mode, th, 1.0, s1), h0), 1e-5)

    cfg = IntegratorConfig.order(0.05, 4, 1)
    flip = np.array([1, 1, 1, -1, -1, -1])
    fwd = nhc_step(mode, th, 1.0, s0, cfg, n_steps=200)
    back = nhc_step(mode, th, 1.0, ExtendedModeState.from_array(fwd.as_array() * flip), cfg, n_steps=200)
    rep.add("time reversibility (200 steps)", np.max(np.abs(back.as_array() * flip - s0.as_array())), 1e-10)


def _ensemble_checks(rep: ValidationReport, config: RunConfig):
    f = config.field
    thermal = thermal_params_for(f, config.beta)
    ens = sample_ensemble(f, EnsembleInit(config.ensemble.n_traj, thermal), SeedSpec(config.ensemble.seed))
    n = ens.n_traj
    for j, tp in enumerate(thermal):
        m = thermal_moments(tp)
        q, p = ens.states[:, j, 0], ens.states[:, j, 3]
        h = p**2 / (2 * tp.mode.mu) + 0.5 * tp.mode.mu * tp.mode.omega**2 * q**2
        for name, x, oracle in (("var Q", q**2, m.varQ), ("var P", p**2, m.varP), ("mean H", h, m.meanH)):
            rel_err = x.std() / math.sqrt(n) / oracle
            rep.add(
                f"sampler mode {j + 1} {name}",
                _rel(x.mean(), oracle),
                max(0.01, N_SIGMA * rel_err),
                f"n={n}",
            )

    eq = run_equilibrium_experiment(config)
    worst = max(s.max_relative_deviation for s in eq.series if s.oracle is not None)
    rep.add("ensemble stationarity under matched thermostat", worst, REL_TOL, "or 4 stderr if larger", passed=eq.passed)
    neg = run_equilibrium_experiment(negative_control(config))
    rep.add("negative control (target x2) detected", float(not neg.passed), 1.0, passed=not neg.passed)
    free = run_equilibrium_experiment(config, thermostat_on=False)
    worst = max(s.max_relative_deviation for s in free.series if s.oracle is not None)
    rep.add("free-flow stationarity", worst, REL_TOL, "or 4 stderr if larger", passed=free.passed)


def reference_config() -> RunConfig:
    return parse_config(REFERENCE_CONFIG)


def run_validation_suite(
    config: RunConfig | None = None,
    *,
    n_traj: int | None = None,
    vector_field: Callable = nhc_vector_field,
) -> ValidationReport:
    """Run every oracle, invariant and ensemble check and collect the verdicts.

    Parameters
    ----------
    config : RunConfig, optional
        Drives the ensemble checks; defaults to :func:`reference_config`.
    n_traj : int, optional
        Overrides the ensemble size.
    vector_field : callable
        Implementation of the thermostatted equations of motion under test;
        replaceable for fault injection.
    """
    config = config or reference_config()
    if n_traj is not None:
        config = replace(config, ensemble=replace(config.ensemble, n_traj=int(n_traj)))
    if config.schedule.kind != "constant-quantum":
        config = replace(config, schedule=replace(config.schedule, kind="constant-quantum"))
    rep = ValidationReport()
    _analytic_checks(rep)
    _dynamics_checks(rep, vector_field)
    _ensemble_checks(rep, config)
    return rep
