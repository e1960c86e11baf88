import numpy as np
import pytest

from decaylab.core.errors import ConfigError
from decaylab.core.feedback import linear_feedback
from decaylab.models.builder import build_model
from decaylab.schemas.config import ModelSection
from decaylab.services.probes import LCG_A, LCG_C, Lcg64, initial_state


def test_lcg_first_draw():
    state = (LCG_A * 1 + LCG_C) % 2 ** 64
    assert Lcg64(1).next_unit() == (state >> 11) / 2.0 ** 53


def test_lcg_is_reproducible():
    a, b = Lcg64(20240607).symmetric(50), Lcg64(20240607).symmetric(50)
    np.testing.assert_array_equal(a, b)
    assert np.all((a >= -1.0) & (a < 1.0))
    assert not np.array_equal(a, Lcg64(20240608).symmetric(50))


def test_seed_wraps_to_64_bits():
    assert Lcg64(2 ** 64 + 5).next_unit() == Lcg64(5).next_unit()


def test_highfreq_packet_goes_into_velocity():
    system = build_model(ModelSection(kind="wave1d", n=32), linear_feedback())
    u = initial_state(system, "highfreq", window=(0.6, 0.9))
    N = system.n_nodes
    assert np.all(u[:N] == 0.0)
    packet = u[N:]
    assert system.dx * np.sum(packet ** 2) == pytest.approx(1.0)
    inside = (system.nodes > 0.6) & (system.nodes < 0.9)
    assert np.all(packet[~inside] == 0.0)
    nonzero = packet[inside]
    assert np.all(nonzero[:-1] * nonzero[1:] < 0.0)


def test_highfreq_on_schrodinger_uses_real_part():
    system = build_model(ModelSection(kind="schrodinger1d", n=16), linear_feedback())
    u = initial_state(system, "highfreq")
    assert np.any(u[:16] != 0.0)
    assert np.all(u[16:] == 0.0)


def test_smooth_transport_is_one_period():
    system = build_model(ModelSection(kind="transport1d", n=32), linear_feedback())
    u = initial_state(system, "smooth")
    assert np.sum(u) == pytest.approx(0.0, abs=1e-12)
    assert u.max() == pytest.approx(1.0)


def test_energy_rescaling():
    system = build_model(ModelSection(kind="wave1d", n=16), linear_feedback())
    u = initial_state(system, "random", seed=9, energy=0.25)
    assert system.energy(u) == pytest.approx(0.25, rel=1e-12)


def test_window_without_nodes():
    system = build_model(ModelSection(kind="wave1d", n=16), linear_feedback())
    with pytest.raises(ConfigError) as err:
        initial_state(system, "highfreq", window=(0.999, 0.9999))
    assert err.value.field == "initial.window"


def test_unknown_rule():
    system = build_model(ModelSection(kind="wave1d", n=8), linear_feedback())
    with pytest.raises(ConfigError):
        initial_state(system, "gaussian")
