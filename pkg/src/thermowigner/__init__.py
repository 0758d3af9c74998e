"""Thermal bosonic field modes in Wigner phase space.

Free-field modes are sampled from their thermal Wigner function and evolved
either freely or under per-mode Nose-Hoover chain thermostats whose targets
reproduce quantum thermal statistics. Submodules:

``field``        mode, state and thermostat types
``wigner``       closed-form thermal Wigner functions and the Fock-sum oracle
``sampling``     seeded ensemble sampling
``dynamics``     free flow, thermostatted equations of motion, integrator
``schedules``    per-mode target temperatures in time
``observables``  phase-space observables and Monte Carlo estimators
``experiments``  equilibrium and quench experiments
``validation``   self-check suite
``config``       TOML run configuration
``output``       data files and manifests
``estimators``   scikit-learn style wrappers
``cli``          command-line entry point
"""

from .config import RunConfig, load_config, parse_config
from .dynamics import (
    IntegratorConfig,
    NhcRates,
    compressibility,
    conserved_quantity,
    free_flow_exact,
    nhc_step,
    nhc_vector_field,
    propagate_ensemble,
)
from .exceptions import (
    ConfigurationError,
    DomainError,
    InvalidStateError,
    PropagationError,
    ThermoWignerError,
    TruncationError,
)
from .experiments import run_equilibrium_experiment, run_quench_experiment
from .field import (
    ExtendedModeState,
    FieldSpec,
    ModePhasePoint,
    ModeSpec,
    ThermostatParams,
    UnitSystem,
    mode_hamiltonian,
    total_hamiltonian,
)
from .observables import ObservableSpec, estimate_observable
from .output import write_series
from .sampling import EnsembleInit, EnsembleState, SeedSpec, sample_ensemble, sample_mode
from .schedules import TemperatureSchedule, schedule_kbt
from .validation import run_validation_suite
from .wigner import (
    ThermalModeParams,
    fock_thermal_sum,
    thermal_moments,
    thermal_wigner_grid,
    thermal_wigner_value,
    tilde_beta,
    weyl_monomial_symbol,
)

__all__ = [
    "ConfigurationError", "DomainError", "EnsembleInit", "EnsembleState", "ExtendedModeState", "FieldSpec",
    "IntegratorConfig", "InvalidStateError", "ModePhasePoint", "ModeSpec", "NhcRates", "ObservableSpec",
    "PropagationError", "RunConfig", "SeedSpec", "TemperatureSchedule", "ThermalModeParams", "ThermoWignerError",
    "ThermostatParams", "TruncationError", "UnitSystem", "compressibility", "conserved_quantity",
    "estimate_observable", "fock_thermal_sum", "free_flow_exact", "load_config", "mode_hamiltonian", "nhc_step",
    "nhc_vector_field", "parse_config", "propagate_ensemble", "run_equilibrium_experiment",
    "run_quench_experiment", "run_validation_suite", "sample_ensemble", "sample_mode", "schedule_kbt",
    "thermal_moments", "thermal_wigner_grid", "thermal_wigner_value", "tilde_beta", "total_hamiltonian",
    "weyl_monomial_symbol", "write_series",
]  # fmt: skip
