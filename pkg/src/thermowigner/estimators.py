"""scikit-learn style wrappers around the thermal Wigner density and the thermostatted flow.

``ThermalWignerDensity`` behaves like a fitted density estimator
(``score_samples`` returns log-densities, ``sample`` draws phase points), and
``NoseHooverChainFlow`` is a stateless transformer mapping phase points at
``t = 0`` to extended states at ``t``. Both expose ``get_params`` and
``set_params`` and validate array inputs with ``sklearn.utils.check_array``.
"""

from __future__ import annotations

import math

import numpy as np
from sklearn.base import BaseEstimator, DensityMixin, TransformerMixin
from sklearn.utils import check_array
from sklearn.utils.validation import check_is_fitted

from .dynamics import IntegratorConfig, propagate_ensemble
from .exceptions import ConfigurationError
from .field import FieldSpec, ThermostatParams, UnitSystem
from .sampling import EnsembleInit, EnsembleState, SeedSpec, sample_ensemble, thermal_params_for
from .schedules import TemperatureSchedule
from .wigner import thermal_moments


def _field(omegas, lams, hbar) -> FieldSpec:
    omegas = np.atleast_1d(np.asarray(omegas, dtype=float))
    lams = np.ones_like(omegas) if lams is None else np.atleast_1d(np.asarray(lams, dtype=float))
    return FieldSpec.from_frequencies(omegas.tolist(), lams.tolist(), UnitSystem(hbar=hbar))


class ThermalWignerDensity(DensityMixin, BaseEstimator):
    """Product of single-mode thermal Wigner Gaussians.

    Parameters
    ----------
    omegas : array-like of float
        Mode frequencies.
    beta : float
        Inverse temperature.
    lams : array-like of float, optional
        Mode scale factors; all 1 by default.
    hbar : float
        Reduced Planck constant.

    Attributes
    ----------
    field_ : FieldSpec
    var_q_, var_p_ : ndarray of shape (n_modes,)
        Thermal variances of each mode.

    Notes
    -----
    Samples are arrays of shape ``(n, 2 N)`` holding ``Q_1..Q_N`` followed by
    ``P_1..P_N``. ``fit`` ignores its data: the density is fully determined by
    the parameters.
    """

    def __init__(self, omegas=(1.0,), beta=1.0, lams=None, hbar=1.0):
        self.omegas = omegas
        self.beta = beta
        self.lams = lams
        self.hbar = hbar

    def fit(self, X=None, y=None):
        self.field_ = _field(self.omegas, self.lams, self.hbar)
        self.thermal_ = thermal_params_for(self.field_, self.beta)
        m = [thermal_moments(tp) for tp in self.thermal_]
        self.var_q_ = np.array([x.varQ for x in m])
        self.var_p_ = np.array([x.varP for x in m])
        self.n_features_in_ = 2 * len(self.field_.modes)
        return self

    def score_samples(self, X) -> np.ndarray:
        """Log of the Wigner density at each row of ``X``."""
        check_is_fitted(self, "field_")
        X = check_array(X, dtype=float)
        n = len(self.field_.modes)
        if X.shape[1] != 2 * n:
            raise ConfigurationError(f"expected {2 * n} columns (Q then P per mode), got {X.shape[1]}")
        q, p = X[:, :n], X[:, n:]
        log_norm = -np.log(2 * math.pi * np.sqrt(self.var_q_ * self.var_p_))
        return np.sum(log_norm - 0.5 * q**2 / self.var_q_ - 0.5 * p**2 / self.var_p_, axis=1)

    def score(self, X, y=None) -> float:
        """Mean log-density of ``X``."""
        return float(np.mean(self.score_samples(X)))

    def sample(self, n_samples=1, random_state=0) -> np.ndarray:
        """Draw phase points with the package's seeded sampler; ``random_state`` must be an int."""
        check_is_fitted(self, "field_")
        if isinstance(random_state, bool) or not isinstance(random_state, (int, np.integer)):
            raise ConfigurationError("random_state must be an integer seed")
        ens = sample_ensemble(self.field_, EnsembleInit(int(n_samples), self.thermal_), SeedSpec(int(random_state)))
        return np.hstack([ens.states[:, :, 0], ens.states[:, :, 3]])


class NoseHooverChainFlow(TransformerMixin, BaseEstimator):
    """Propagate phase points under per-mode Nose-Hoover chains at the quantum targets.

    Parameters
    ----------
    omegas, beta, lams, hbar
        As in :class:`ThermalWignerDensity`.
    t : float
        Propagation time.
    dt : float
        Timestep.
    sy_order : {1, 4}
        Suzuki-Yoshida order of the chain update.
    n_respa : int
        Chain sub-cycles per step.
    tau_factor : float
        Thermostat inertias are ``kBT (tau_factor / omega)**2``.
    thermostat : bool
        ``False`` gives the free harmonic flow.

    Notes
    -----
    ``transform`` accepts ``(n, 2 N)`` phase points (chains start at rest) or
    ``(n, 6 N)`` extended states in ``(Q, xi1, xi2, P, chi1, chi2)`` order per
    mode, and always returns ``(n, 6 N)`` extended states.
    """

    def __init__(
        self, omegas=(1.0,), beta=1.0, lams=None, hbar=1.0, t=1.0, dt=0.01, sy_order=4, n_respa=1,
        tau_factor=0.25, thermostat=True,
    ):  # fmt: skip
        self.omegas = omegas
        self.beta = beta
        self.lams = lams
        self.hbar = hbar
        self.t = t
        self.dt = dt
        self.sy_order = sy_order
        self.n_respa = n_respa
        self.tau_factor = tau_factor
        self.thermostat = thermostat

    def fit(self, X=None, y=None):
        self.field_ = _field(self.omegas, self.lams, self.hbar)
        self.schedule_ = TemperatureSchedule(beta=self.beta)
        kbt = [self.schedule_.quantum_kbt(m, self.field_.units) for m in self.field_.modes]
        self.thermostats_ = tuple(ThermostatParams.matched(m, k, self.tau_factor) for m, k in zip(self.field_.modes, kbt))
        self.integrator_ = IntegratorConfig.order(self.dt, self.sy_order, self.n_respa)
        return self

    def transform(self, X) -> np.ndarray:
        check_is_fitted(self, "field_")
        X = check_array(X, dtype=float)
        n = len(self.field_.modes)
        if X.shape[1] == 2 * n:
            states = np.zeros((X.shape[0], n, 6))
            states[:, :, 0], states[:, :, 3] = X[:, :n], X[:, n:]
        elif X.shape[1] == 6 * n:
            states = X.reshape(X.shape[0], n, 6).copy()
        else:
            raise ConfigurationError(f"expected {2 * n} or {6 * n} columns, got {X.shape[1]}")
        ens = EnsembleState(states)
        propagate_ensemble(
            ens, self.field_, self.thermostats_, self.schedule_, self.integrator_, float(self.t),
            stride=max(1, round(self.t / self.dt)), thermostat_on=bool(self.thermostat),
        )  # fmt: skip
        return ens.states.reshape(X.shape[0], 6 * n)
