import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from thermowigner import ConfigurationError, FieldSpec, thermal_wigner_value
from thermowigner.estimators import NoseHooverChainFlow, ThermalWignerDensity
from thermowigner.field import ModePhasePoint, ModeSpec
from thermowigner.sampling import thermal_params_for


def test_params_and_clone():
    est = ThermalWignerDensity(omegas=(1.0, 2.0), beta=0.5)
    assert est.get_params() == {"omegas": (1.0, 2.0), "beta": 0.5, "lams": None, "hbar": 1.0}
    c = clone(est).set_params(beta=2.0)
    assert c.beta == 2.0 and est.beta == 0.5
    flow = NoseHooverChainFlow(t=0.5)
    assert clone(flow).get_params()["t"] == 0.5


def test_score_samples_matches_wigner():
    est = ThermalWignerDensity(omegas=(1.0, 3.0), beta=0.7).fit()
    X = np.array([[0.1, -0.2, 0.3, 0.4], [0.0, 0.0, 0.0, 0.0]])
    f = FieldSpec.from_frequencies([1.0, 3.0])
    tps = thermal_params_for(f, 0.7)
    for row, logw in zip(X, est.score_samples(X)):
        want = thermal_wigner_value(tps[0], ModePhasePoint(row[0], row[2])) * thermal_wigner_value(
            tps[1], ModePhasePoint(row[1], row[3])
        )
        assert logw == pytest.approx(np.log(want), rel=1e-12)
    assert est.score(X) == pytest.approx(est.score_samples(X).mean())


def test_sample_shape_moments_and_seed():
    est = ThermalWignerDensity(omegas=(1.0,), beta=1.0).fit()
    X = est.sample(50000, random_state=3)
    assert X.shape == (50000, 2)
    assert X[:, 0].var() == pytest.approx(est.var_q_[0], rel=0.03)
    assert np.array_equal(X, est.sample(50000, random_state=3))
    with pytest.raises(ConfigurationError):
        est.sample(3, random_state=np.random.default_rng(0))


def test_unfitted_and_bad_shapes():
    with pytest.raises(NotFittedError):
        ThermalWignerDensity().score_samples([[0.0, 0.0]])
    est = ThermalWignerDensity().fit()
    with pytest.raises(ConfigurationError):
        est.score_samples([[0.0, 0.0, 0.0]])
    with pytest.raises(ValueError):
        est.score_samples([[np.nan, 0.0]])
    with pytest.raises(ValueError):
        ThermalWignerDensity(omegas=(-1.0,)).fit()


def test_flow_transform_shapes_and_free_limit():
    X = np.array([[1.0, 0.0], [0.0, 1.0]])
    out = NoseHooverChainFlow(t=np.pi / 2, dt=np.pi / 200, thermostat=False).fit().fit_transform(X)
    assert out.shape == (2, 6)
    np.testing.assert_allclose(out[:, [0, 3]], [[0.0, -1.0], [1.0, 0.0]], atol=1e-12)
    flow = NoseHooverChainFlow(omegas=(1.0, 2.0), t=0.1, dt=0.01).fit()
    Y = flow.transform(np.zeros((3, 4)) + 0.1)
    assert Y.shape == (3, 12)
    assert np.array_equal(flow.transform(Y), flow.transform(Y.copy()))
    with pytest.raises(ConfigurationError):
        flow.transform(np.zeros((3, 5)))


def test_flow_matches_mode_step():
    from thermowigner import ExtendedModeState, IntegratorConfig, ThermostatParams, nhc_step, schedule_kbt
    from thermowigner import TemperatureSchedule

    flow = NoseHooverChainFlow(t=0.2, dt=0.01).fit()
    x = np.array([[0.3, 0.0, 0.0, -0.4, 0.2, 0.1]])
    m = ModeSpec(1, 1.0)
    kbt = schedule_kbt(TemperatureSchedule(beta=1.0), m, 0.0)
    s = nhc_step(m, ThermostatParams.matched(m, kbt), kbt, ExtendedModeState.from_array(x[0]),
                 IntegratorConfig.order(0.01, 4), n_steps=20)  # fmt: skip
    np.testing.assert_array_equal(flow.transform(x)[0], s.as_array())
