import math
import numpy as np
import pytest

from thermowigner import (
    ConfigurationError,
    EnsembleInit,
    FieldSpec,
    ObservableSpec,
    SeedSpec,
    TemperatureSchedule,
    estimate_observable,
    parse_config,
    run_equilibrium_experiment,
    run_quench_experiment,
    run_validation_suite,
    sample_ensemble,
    schedule_kbt,
)
from thermowigner.dynamics import nhc_vector_field
from thermowigner.experiments import negative_control, relaxation_time, smooth, stat_tolerance
from thermowigner.field import ModeSpec
from thermowigner.sampling import thermal_params_for

QUANTUM_KBT = 1.0819767068693265  # 1 / tilde_beta(1, 1), see test_wigner


def thermal_snapshot(n, beta=1.0, omegas=(1.0,), seed=0):
    f = FieldSpec.from_frequencies(list(omegas))
    ens = sample_ensemble(f, EnsembleInit(n, thermal_params_for(f, beta)), SeedSpec(seed))
    return f, ens.states


def config(body: str, n_traj=2000, t_final=20.0, stride=50, extra=""):
    return parse_config(
        f"beta = 1.0\n{body}\n[integrator]\ndt = 0.01\nt_final = {t_final}\n"
        f"[ensemble]\nn_traj = {n_traj}\nseed = 3\n[output]\nstride = {stride}\n{extra}"
    )


ONE_MODE = "[[modes]]\nomega = 1.0\n"


# schedules


def test_constant_quantum_schedule():
    s = TemperatureSchedule(beta=1.0)
    m = ModeSpec(1, 1.0)
    for t in (0.0, 3.0, 1e4):
        assert schedule_kbt(s, m, t) == pytest.approx(QUANTUM_KBT, rel=1e-12)
    assert schedule_kbt(TemperatureSchedule("constant-classical", 2.0), m, 1.0) == 0.5


def test_step_quench_branches():
    s = TemperatureSchedule("step-quench", 1.0, t_quench=10.0)
    m = ModeSpec(1, 1.0)
    assert schedule_kbt(s, m, 9.99) == pytest.approx(QUANTUM_KBT, rel=1e-12)
    assert schedule_kbt(s, m, 10.01) == 1.0


def test_linear_ramp_interpolates():
    s = TemperatureSchedule("linear-ramp", 1.0, ramp=(2.0, 4.0))
    m = ModeSpec(1, 1.0)
    assert schedule_kbt(s, m, 1.0) == pytest.approx(QUANTUM_KBT)
    assert schedule_kbt(s, m, 3.0) == pytest.approx(0.5 * (QUANTUM_KBT + 1.0))
    assert schedule_kbt(s, m, 5.0) == 1.0
    ts = np.linspace(0, 6, 61)
    v = [schedule_kbt(s, m, t) for t in ts]
    assert np.all(np.diff(v) <= 1e-15) and min(v) > 0


def test_low_frequency_quench_is_noop():
    s = TemperatureSchedule("step-quench", 1.0, t_quench=1.0)
    m = ModeSpec(1, 1e-4)
    assert schedule_kbt(s, m, 0.5) == pytest.approx(schedule_kbt(s, m, 2.0), rel=1e-8)


def test_scope_isolation_schedule():
    s = TemperatureSchedule("step-quench", 1.0, t_quench=1.0, scope=(2,))
    assert schedule_kbt(s, ModeSpec(1, 1.0), 5.0) == pytest.approx(QUANTUM_KBT)
    assert schedule_kbt(s, ModeSpec(2, 1.0), 5.0) == 1.0


@pytest.mark.parametrize(
    "kw", [dict(kind="x"), dict(beta=0.0), dict(t_quench=-1.0), dict(ramp=(2.0, 1.0)), dict(target_scale=0.0)]
)
def test_schedule_validation(kw):
    with pytest.raises(ConfigurationError):
        TemperatureSchedule(**kw)


# estimators


def test_mode_energy_estimate():
    f, snap = thermal_snapshot(10**6)
    (e,) = estimate_observable(ObservableSpec("mode-energy"), f, snap)
    assert e.n == 10**6
    assert abs(e.mean - QUANTUM_KBT) <= 5 * e.stderr


def test_weyl_identity_and_number():
    f, snap = thermal_snapshot(1000)
    (e,) = estimate_observable(ObservableSpec("weyl-monomial", powers=(0, 0)), f, snap)
    assert e.mean == 1.0 and e.stderr == 0.0
    (a,) = estimate_observable(ObservableSpec("weyl-monomial", powers=(1, 1)), f, snap)
    (h,) = estimate_observable(ObservableSpec("mode-energy"), f, snap)
    assert a.mean.real == pytest.approx(h.mean, rel=1e-12)


def test_vacuum_occupation():
    f, snap = thermal_snapshot(10**5, beta=50.0)
    (e,) = estimate_observable(ObservableSpec("occupation"), f, snap)
    assert abs(e.mean) <= 5 * e.stderr


def test_kinetic_temperature_and_variances():
    f, snap = thermal_snapshot(10**5, omegas=(1.0, 2.0))
    kin = estimate_observable(ObservableSpec("kinetic-temperature", modes=(2,)), f, snap)
    assert [k.mode for k in kin] == [2]
    assert abs(kin[0].mean - 1.0 / math.tanh(1.0)) <= 5 * kin[0].stderr
    (vq,) = estimate_observable(ObservableSpec("position-variance", modes=(1,)), f, snap)
    assert vq.mean == pytest.approx(snap[:, 0, 0].var(), rel=1e-10)


def test_histogram_matches_gaussian():
    f, snap = thermal_snapshot(10**5)
    (h,) = estimate_observable(ObservableSpec("histogram", variable="P", bins=40, range=(-4, 4)), f, snap)
    c = 0.5 * (h.edges[1:] + h.edges[:-1])
    g = np.exp(-(c**2) / (2 * QUANTUM_KBT)) / math.sqrt(2 * math.pi * QUANTUM_KBT)
    assert np.max(np.abs(h.density - g)) < 0.01
    assert np.sum(h.density * np.diff(h.edges)) == pytest.approx(1.0, abs=1e-3)


def test_stderr_scaling_slope():
    ns = np.array([10**3, 10**4, 10**5])
    errs = []
    for n in ns:
        f, snap = thermal_snapshot(int(n), seed=9)
        errs.append(estimate_observable(ObservableSpec("mode-energy"), f, snap)[0].stderr)
    slope = np.polyfit(np.log(ns), np.log(errs), 1)[0]
    assert slope == pytest.approx(-0.5, abs=0.05)


def test_estimator_errors():
    f, snap = thermal_snapshot(10)
    with pytest.raises(ConfigurationError):
        estimate_observable(ObservableSpec("mode-energy"), f, snap[:0])
    with pytest.raises(ConfigurationError):
        estimate_observable(ObservableSpec("mode-energy", modes=(2,)), f, snap)
    nan = snap.copy()
    nan[:, 0, 0] = np.nan
    with pytest.raises(ConfigurationError):
        estimate_observable(ObservableSpec("mode-energy"), f, nan)
    for kw in [dict(kind="bogus"), dict(kind="histogram", bins=7), dict(kind="mode-energy", stride=0)]:
        with pytest.raises(ConfigurationError):
            ObservableSpec(**kw)


def test_tolerance_rule():
    assert stat_tolerance(1.0, 0.001) == pytest.approx(0.03)
    assert stat_tolerance(1.0, 0.1) == pytest.approx(0.4)


def test_smoothing_and_relaxation_time():
    x = np.arange(10.0)
    assert np.allclose(smooth(x, 1), x)
    assert smooth(np.ones(7), 3).tolist() == [1.0] * 7
    t = np.linspace(0, 10, 1001)
    curve = 1.0 + np.exp(-(t - 2.0).clip(0) / 1.5)
    tau = relaxation_time(t, curve, 1.0, 1.0, 2.0)
    assert tau == pytest.approx(1.5, abs=0.02)
    assert relaxation_time(t, np.full_like(t, 5.0), 1.0, 1.0, 0.0) is None


# experiments


def test_equilibrium_experiment_passes():
    rep = run_equilibrium_experiment(config(ONE_MODE))
    assert rep.passed, rep.summary()
    assert rep.experiment == "equilibrium"
    names = {(s.name, s.mode) for s in rep.series}
    assert names == {("var_Q", 1), ("var_P", 1), ("mean_H", 1)}
    recs = list(rep.records())
    assert recs and {"experiment", "observable", "mode", "time", "mean", "stderr"} <= set(recs[0])


def test_free_flow_variant_passes():
    rep = run_equilibrium_experiment(config(ONE_MODE), thermostat_on=False)
    assert rep.passed and rep.experiment == "free-flow"


def test_negative_control_fails():
    rep = run_equilibrium_experiment(negative_control(config(ONE_MODE)))
    assert not rep.passed
    assert not rep.verdicts["mode 1 var_P stationary"]


def test_equilibrium_requires_constant_quantum():
    cfg = config(ONE_MODE, extra='[schedule]\nkind = "step-quench"\nt_quench = 5.0\n')
    with pytest.raises(ConfigurationError):
        run_equilibrium_experiment(cfg)
    with pytest.raises(ConfigurationError):
        run_quench_experiment(config(ONE_MODE))


def test_quench_scope_isolation_and_noop_mode():
    body = "[[modes]]\nomega = 0.02\n[[modes]]\nomega = 1.0\n[[modes]]\nomega = 3.0\n"
    cfg = config(body, n_traj=3000, t_final=40.0, stride=10,
                 extra='[schedule]\nkind = "step-quench"\nt_quench = 10.0\nscope = [1, 3]\n')  # fmt: skip
    rep = run_quench_experiment(cfg)
    assert rep.passed, rep.summary()
    modes = rep.details["modes"]
    assert modes[1]["initial_oracle"] == pytest.approx(modes[1]["final_oracle"], rel=1e-4)
    assert modes[1]["relaxation_time"] is None
    assert modes[2]["in_scope"] is False
    assert "mode 2 outside scope stationary" in rep.verdicts
    assert modes[3]["initial_oracle"] == pytest.approx(1.5 / math.tanh(1.5), rel=1e-12)
    assert modes[3]["final_oracle"] == 1.0
    assert modes[3]["relaxation_time"] is not None and modes[3]["relaxation_time"] > 0


def test_quench_argument_checks():
    with pytest.raises(ConfigurationError):
        run_quench_experiment(config(ONE_MODE, extra='[schedule]\nkind = "step-quench"\nt_quench = 0.0\n'))
    with pytest.raises(ConfigurationError):
        run_quench_experiment(config(ONE_MODE, extra='[schedule]\nkind = "step-quench"\nt_quench = 30.0\n'))


# validation suite


@pytest.fixture(scope="module")
def suite():
    return run_validation_suite()


def test_validation_suite_passes(suite):
    assert suite.passed, suite.summary()
    recs = list(suite.records())
    assert all({"check", "measured", "tolerance", "passed"} <= set(r) for r in recs)


def test_validation_suite_small_ensemble_widens():
    rep = run_validation_suite(n_traj=100)
    assert rep.passed, rep.summary()


def test_validation_detects_flipped_chi2_sign():
    def faulty(mode, th, kbt, s):
        r = nhc_vector_field(mode, th, kbt, s)
        return r._replace(dChi2=-r.dChi2)

    rep = run_validation_suite(n_traj=100, vector_field=faulty)
    assert not rep.passed
    failed = {c.name for c in rep.checks if not c.passed}
    assert "dH'/dt along vector field" in failed
