import numpy as np
import pytest

from decaylab.core.errors import ShapeError, SizeError
from decaylab.core.feedback import linear_feedback
from decaylab.core.integrator import TimeScheme
from decaylab.core.settings import reset_settings_cache
from decaylab.models.builder import build_model
from decaylab.models.systems import SemiDiscreteSystem
from decaylab.schemas.config import DampingSection, ModelSection
from decaylab.services.gramian import gramian_by_mesh, gramian_constant


@pytest.mark.parametrize("T,dt", [(2.0, 0.5), (3.0, 0.1)])
def test_scalar_constant_is_twice_the_horizon(scalar_system, T, dt):
    report = gramian_constant(scalar_system, T, scheme=TimeScheme(dt=dt, time_viscosity="none"))
    assert report.C_T == pytest.approx(2.0 * T, rel=1e-12)
    assert report.asymmetry == 0.0
    assert report.method == "dense-midpoint"


def _wave(n, support):
    spec = ModelSection(kind="wave1d", n=n, damping=DampingSection(support=support, alpha=1.0))
    return build_model(spec, linear_feedback())


def test_short_horizon_sees_nothing():
    full = _wave(25, [(-np.inf, np.inf)])
    local = _wave(25, [(0.2, 0.5)])
    reference = gramian_constant(full, 2.0).C_T
    short = gramian_constant(local, 0.05).C_T
    assert reference > 0.0
    assert short <= 1e-3 * reference


def test_time_viscosity_sums_are_labelled():
    system = _wave(12, [(0.2, 0.5)])
    plain = gramian_constant(system, 1.0)
    with_visc = gramian_constant(system, 1.0, include_viscosity=True)
    assert with_visc.method == "dense-midpoint+time-viscosity-sums"
    assert with_visc.C_T >= plain.C_T * (1.0 - 1e-9)


@pytest.mark.slow
def test_uniformly_damped_wave_is_mesh_stable():
    values = [gramian_constant(_wave(n, [(-np.inf, np.inf)]), 2.0).C_T for n in (25, 50, 100)]
    assert min(values) > 0.0
    assert max(values) / min(values) <= 2.0


def test_dense_limit(monkeypatch):
    system = SemiDiscreteSystem.from_matrices(np.zeros((3, 3)), np.eye(3))
    monkeypatch.setenv("DECAYLAB_DENSE_LIMIT", "2")
    reset_settings_cache()
    with pytest.raises(SizeError):
        gramian_constant(system, 1.0)


def test_constant_grows_with_the_horizon():
    system = _wave(12, [(0.2, 0.5)])
    scheme = TimeScheme.default_for(system)
    values = [gramian_constant(system, T, scheme=scheme).C_T for T in (0.5, 1.0, 2.0, 4.0)]
    assert all(b >= a * (1.0 - 1e-9) for a, b in zip(values, values[1:]))
    assert values[-1] > values[0]


def test_by_mesh_keeps_the_mesh_order():
    systems = [_wave(n, [(0.2, 0.5)]) for n in (8, 12)]
    schemes = [TimeScheme.default_for(system) for system in systems]
    reports = gramian_by_mesh(systems, 1.0, False, schemes)
    assert [report.n for report in reports] == [16, 24]
    assert reports[1].C_T == gramian_constant(systems[1], 1.0, scheme=schemes[1]).C_T
    with pytest.raises(ShapeError):
        gramian_by_mesh(systems, 1.0, False, schemes[:1])
