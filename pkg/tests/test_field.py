import math

import pytest
from hypothesis import given
from hypothesis import strategies as st

from thermowigner import (
    ConfigurationError,
    DomainError,
    ExtendedModeState,
    FieldSpec,
    InvalidStateError,
    ModePhasePoint,
    ModeSpec,
    ThermostatParams,
    UnitSystem,
    mode_hamiltonian,
    total_hamiltonian,
)
from thermowigner.field import ladder_from_phase, nhc_energy

pos = st.floats(1e-3, 1e3)
coord = st.floats(-1e3, 1e3)


def test_units_validation():
    assert UnitSystem() == UnitSystem(1.0, 1.0)
    with pytest.raises(DomainError):
        UnitSystem(hbar=0.0)
    with pytest.raises(DomainError):
        UnitSystem(kB=-1.0)


def test_mode_validation_and_mu():
    m = ModeSpec(2, 3.0, 1.5)
    assert m.mu == 1.5**2 / 3.0
    with pytest.raises(DomainError, match="mode 3: omega must be > 0"):
        ModeSpec(3, -1.0)
    with pytest.raises(DomainError, match="lambda"):
        ModeSpec(1, 1.0, 0.0)
    with pytest.raises(ConfigurationError):
        ModeSpec(0, 1.0)


def test_named_constructors():
    m = ModeSpec.massive(1, 2.0, 3.0)
    assert m.lam == math.sqrt(6.0)
    assert m.mu == pytest.approx(3.0, rel=1e-15)
    em = ModeSpec.electromagnetic(1, 2.0, c=4.0, units=UnitSystem(hbar=9.0))
    assert em.lam == 3.0 * 2.0 / 4.0


def test_field_indices_consecutive():
    f = FieldSpec.from_frequencies([1.0, 2.0])
    assert len(f) == 2 and list(f.omegas) == [1.0, 2.0]
    with pytest.raises(ConfigurationError):
        FieldSpec((ModeSpec(1, 1.0), ModeSpec(3, 1.0)))
    with pytest.raises(ConfigurationError):
        FieldSpec(())


def test_states_must_be_finite():
    with pytest.raises(InvalidStateError):
        ModePhasePoint(float("nan"), 0.0)
    with pytest.raises(InvalidStateError):
        ExtendedModeState(0.0, 0.0, float("inf"), 0.0, 0.0, 0.0)


@pytest.mark.parametrize(
    "mu, omega, q, p, expected",
    [(1, 1, 0, 0, 0.0), (1, 1, 1, 0, 0.5), (2, 3, 0.5, 1, 2.5)],
)
def test_mode_hamiltonian_examples(mu, omega, q, p, expected):
    mode = ModeSpec(1, omega, math.sqrt(mu * omega))
    assert mode_hamiltonian(mode, ModePhasePoint(q, p)) == pytest.approx(expected, rel=1e-15, abs=0)


def test_nhc_energy_examples():
    th = ThermostatParams(1.0, 1.0, 1.0)
    assert nhc_energy(th, ExtendedModeState(0, 0, 0, 0, 0, 0), 3.0) == 0.0
    assert nhc_energy(th, ExtendedModeState(0, 0, 0, 0, 1, 0), 1.0) == 0.5
    assert nhc_energy(th, ExtendedModeState(0, -2, 1, 0, 0, 0), 1.0) == -1.0
    with pytest.raises(DomainError):
        nhc_energy(th, ExtendedModeState(0, 0, 0, 0, 0, 0), 0.0)


def test_thermostat_validation():
    with pytest.raises(DomainError):
        ThermostatParams(0.0, 1.0)
    with pytest.raises(DomainError):
        ThermostatParams(1.0, 1.0, 0.5)
    m = ThermostatParams.matched(ModeSpec(1, 2.0), 1.5, tau_factor=0.5)
    assert m.M1 == m.M2 == 1.5 * 0.25**2


def test_total_hamiltonian_examples():
    f1 = FieldSpec.from_frequencies([1.0])
    th = ThermostatParams(1.0, 1.0)
    s = ExtendedModeState(1.0, 0, 0, 0, 0, 0)
    zero = ExtendedModeState(0, 0, 0, 0, 0, 0)
    assert total_hamiltonian(f1, [th], [zero], [1.0]) == 0.0
    assert total_hamiltonian(f1, [th], [s], [1.0]) == 0.5
    f2 = FieldSpec.from_frequencies([1.0, 1.0])
    assert total_hamiltonian(f2, [th, th], [s, s], [1.0, 1.0]) == 1.0
    with pytest.raises(ConfigurationError):
        total_hamiltonian(f2, [th], [s], [1.0])


def test_ladder_examples():
    m, u = ModeSpec(1, 1.0), UnitSystem()
    assert ladder_from_phase(m, u, ModePhasePoint(0, 0)) == 0
    assert ladder_from_phase(m, u, ModePhasePoint(1, 0)) == pytest.approx(1 / math.sqrt(2), rel=1e-15)
    assert abs(ladder_from_phase(m, u, ModePhasePoint(1, 1))) ** 2 == pytest.approx(1.0, rel=1e-15)


@given(pos, pos, pos, coord, coord)
def test_ladder_energy_identity(omega, lam, hbar, q, p):
    mode, units = ModeSpec(1, omega, lam), UnitSystem(hbar=hbar)
    x = ModePhasePoint(q, p)
    h = mode_hamiltonian(mode, x)
    a = ladder_from_phase(mode, units, x)
    assert hbar * omega * abs(a) ** 2 == pytest.approx(h, rel=1e-12, abs=1e-300)
    assert h >= 0.0


@given(st.lists(st.tuples(pos, coord, coord), min_size=2, max_size=5), st.integers(1, 4))
def test_total_hamiltonian_additive(data, cut):
    cut = min(cut, len(data) - 1)
    th = ThermostatParams(1.0, 2.0)

    def total(rows):
        f = FieldSpec.from_frequencies([r[0] for r in rows])
        states = [ExtendedModeState(r[1], 0.1, -0.2, r[2], 0.3, 0.4) for r in rows]
        return total_hamiltonian(f, [th] * len(rows), states, [1.0] * len(rows))

    assert total(data) == pytest.approx(total(data[:cut]) + total(data[cut:]), rel=1e-12, abs=1e-9)
