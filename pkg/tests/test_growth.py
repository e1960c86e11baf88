import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from decaylab.core.errors import ConfigError, InvalidGrowthError
from decaylab.core.growth import GROWTH_CATALOG, GrowthKind, catalog_growth, power_growth

CATALOG_PARAMS = {
    "power": {"p": 3},
    "power_log": {"p": 3, "q": 1},
    "exp_inv_sq": {},
    "log_weak": {"p": 1},
    "exp_log_pow": {"p": 2},
    "linear": {},
    "arctan": {},
}


def test_catalog_params_cover_every_entry():
    assert set(CATALOG_PARAMS) == set(GROWTH_CATALOG)


@pytest.mark.parametrize("name", sorted(CATALOG_PARAMS))
def test_catalog_growth_satisfies_assumptions(name):
    growth = catalog_growth(name, CATALOG_PARAMS[name])
    assert growth.validate() == []
    assert 0.0 < growth.s0 <= 1.0


def test_linear_kinds():
    assert catalog_growth("linear").kind == GrowthKind.LINEAR
    assert catalog_growth("arctan").kind == GrowthKind.LINEAR
    assert catalog_growth("power", {"p": 2}).kind == GrowthKind.SUPERLINEAR


def test_unknown_growth_names_the_field():
    with pytest.raises(ConfigError) as err:
        catalog_growth("cubic")
    assert err.value.field == "growth.name"
    assert err.value.exit_code == 2


def test_missing_parameter_names_the_field():
    with pytest.raises(ConfigError) as err:
        catalog_growth("power_log", {"p": 3})
    assert err.value.field == "growth.q"


def test_power_needs_superlinear_exponent():
    with pytest.raises(InvalidGrowthError):
        power_growth(1.0)


def test_s0_override():
    growth = catalog_growth("power", {"p": 3, "s0": 0.5})
    assert growth.s0 == 0.5


def test_validate_reports_s0_out_of_range():
    growth = power_growth(3.0, s0=1.5)
    assert any("s0" in issue for issue in growth.validate())


@given(st.floats(min_value=1e-6, max_value=1.0), st.sampled_from([2.0, 3.0, 5.0]))
def test_power_inverse_round_trip(s, p):
    growth = power_growth(p)
    assert float(growth.inverse(growth(np.array(s)))) == pytest.approx(s, rel=1e-12)


@given(st.floats(min_value=-1.0, max_value=1.0))
def test_power_log_is_odd(s):
    growth = catalog_growth("power_log", {"p": 3, "q": 1})
    assert float(growth(np.array(-s))) == -float(growth(np.array(s)))


@pytest.mark.parametrize("p", [3.0, 5.0])
def test_power_predicts_algebraic_decay(p):
    growth = power_growth(p)
    assert growth.predicted_exponent == -2.0 / (p - 1.0)
    assert growth.predicted_rate(16.0) == pytest.approx(16.0 ** (-2.0 / (p - 1.0)))
