import numpy as np
import pytest
from pydantic import ValidationError

from decaylab.core.errors import ConfigError
from decaylab.core.feedback import linear_feedback, power_feedback
from decaylab.core.integrator import (
    TRAJECTORY_COLUMNS,
    MidpointIntegrator,
    StageSolver,
    TimeScheme,
    simulate,
    simulate_linear_companions,
    step,
    time_viscosity_operator,
)
from decaylab.models.builder import build_model
from decaylab.models.operators import laplacian_1d, m_adjoint
from decaylab.schemas.config import DampingSection, ModelSection, SolverSection
from decaylab.services.config_loader import validate
from decaylab.services.factory import build_scheme
from decaylab.services.probes import initial_state

BALANCE_TOL = 1e-11


def _monotone(energies):
    return bool(np.all(np.diff(energies) <= 1e-14 * energies[0]))


@pytest.mark.parametrize("time_viscosity", ["none", "squared", "bounded_squared"])
def test_scalar_step(scalar_system, time_viscosity):
    scheme = TimeScheme(dt=0.1, time_viscosity=time_viscosity)
    result = step(scalar_system, scheme, np.array([1.0]))
    assert result.u_next[0] == pytest.approx(0.95 / 1.05, rel=1e-12)
    assert result.u_next[0] == pytest.approx(0.904762, abs=1e-6)
    assert result.diagnostics.balance_residual <= BALANCE_TOL


def test_zero_state_stays_zero(wave_cubic):
    scheme = TimeScheme.default_for(wave_cubic)
    traj = simulate(wave_cubic, scheme, np.zeros(wave_cubic.n), 0.5)
    assert np.all(traj.energies == 0.0)
    assert traj.completed


def test_conservation_without_damping():
    spec = ModelSection(kind="wave1d", n=100, viscosity="none", damping=DampingSection(alpha=0.0))
    system = build_model(spec, linear_feedback())
    scheme = TimeScheme(dt=0.5 * system.dx, time_viscosity="none")
    u0 = initial_state(system, "smooth")
    traj = MidpointIntegrator(system, scheme).simulate(u0, 10_000 * scheme.dt)
    assert traj.steps == 10_000
    drift = np.max(np.abs(traj.energies - traj.energies[0])) / traj.energies[0]
    assert drift <= 1e-10


@pytest.mark.parametrize("kind,feedback", [
    ("wave1d", power_feedback(3.0)),
    ("wave1d", linear_feedback()),
    ("transport1d", linear_feedback()),
    ("schrodinger1d", power_feedback(3.0)),
])
@pytest.mark.parametrize("time_viscosity", ["squared", "bounded_squared"])
def test_energy_balance_and_monotone_decay(kind, feedback, time_viscosity):
    system = build_model(ModelSection(kind=kind, n=24), feedback)
    scheme = TimeScheme.default_for(system, time_viscosity=time_viscosity)
    traj = simulate(system, scheme, initial_state(system, "smooth"), 1.0)
    assert traj.completed
    assert traj.max_residual <= BALANCE_TOL
    assert _monotone(traj.energies)
    assert traj.energies[-1] < traj.energies[0]


def test_dissipation_terms_are_nonnegative(wave_cubic):
    scheme = TimeScheme.default_for(wave_cubic)
    traj = simulate(wave_cubic, scheme, initial_state(wave_cubic, "highfreq"), 0.5)
    for trace in (traj.diss_damping, traj.diss_space_visc, traj.diss_time_visc):
        assert trace[0] == 0.0
        assert np.all(trace >= -1e-15)
    assert np.max(traj.diss_time_visc) > 0.0
    assert np.max(traj.diss_space_visc) > 0.0


def test_linear_feedback_companion_is_bitwise_identical():
    system = build_model(ModelSection(kind="wave1d", n=16), linear_feedback())
    scheme = TimeScheme.default_for(system)
    runs = simulate_linear_companions(system, scheme, initial_state(system, "smooth"), 0.5)
    np.testing.assert_array_equal(runs.nonlinear.energies, runs.linear_damped.energies)
    np.testing.assert_array_equal(runs.nonlinear.states, runs.linear_damped.states)
    assert runs.conservative.has_full_snapshots
    assert runs.conservative.diss_damping.max() == 0.0


def test_wave_time_viscosity_is_block_laplacian():
    system = build_model(ModelSection(kind="wave1d", n=10), linear_feedback())
    dt = 0.05
    lap = laplacian_1d(10, system.dx).toarray()
    expected = dt ** 2 * np.block([[-lap, np.zeros_like(lap)], [np.zeros_like(lap), -lap]])
    V_dt = time_viscosity_operator(system, dt, "squared").toarray()
    np.testing.assert_allclose(V_dt, expected, atol=1e-9 * np.abs(expected).max())
    adjoint = dt ** 2 * m_adjoint(system.A, system.M) @ system.A.toarray()
    np.testing.assert_allclose(V_dt, adjoint, atol=1e-9 * np.abs(expected).max())


def test_bounded_time_viscosity_is_bounded():
    system = build_model(ModelSection(kind="wave1d", n=10), linear_feedback())
    V_dt = time_viscosity_operator(system, 0.05, "bounded_squared").toarray()
    eigenvalues = np.linalg.eigvals(V_dt).real
    assert eigenvalues.max() < 1.0
    assert eigenvalues.min() > -1e-10


def test_unknown_time_viscosity(scalar_system):
    with pytest.raises(ConfigError):
        time_viscosity_operator(scalar_system, 0.1, "cubed")


def test_horizon_shorter_than_dt(scalar_system):
    with pytest.raises(ConfigError) as err:
        simulate(scalar_system, TimeScheme(dt=0.5), np.ones(1), 0.1)
    assert err.value.field == "run.T_final"


def test_initial_state_shape(scalar_system):
    with pytest.raises(ConfigError):
        simulate(scalar_system, TimeScheme(dt=0.1), np.ones(2), 1.0)


def test_stage_failure_returns_partial_record(wave_cubic):
    solver = StageSolver(method="fixed_point", tol=1e-30, max_iter=1)
    scheme = TimeScheme.default_for(wave_cubic, solver=solver)
    traj = simulate(wave_cubic, scheme, initial_state(wave_cubic, "smooth"), 0.5)
    assert not traj.completed
    assert traj.failed_at == 0
    assert traj.steps == 0
    assert "did not converge" in traj.failure


def test_fixed_point_solver_agrees_with_newton(wave_cubic):
    u0 = initial_state(wave_cubic, "smooth")
    newton = simulate(wave_cubic, TimeScheme.default_for(wave_cubic), u0, 0.25)
    fixed = simulate(
        wave_cubic,
        TimeScheme.default_for(wave_cubic, solver=StageSolver(method="fixed_point", max_iter=500)),
        u0,
        0.25,
    )
    np.testing.assert_allclose(fixed.energies, newton.energies, rtol=1e-9)


def test_snapshot_stride_keeps_last_step(scalar_system):
    traj = simulate(scalar_system, TimeScheme(dt=0.1), np.ones(1), 1.0, snapshots=3)
    assert list(traj.snapshot_steps) == [0, 3, 6, 9, 10]
    assert traj.states.shape == (5, 1)
    assert not traj.has_full_snapshots


def test_trajectory_frame_columns(scalar_system):
    traj = simulate(scalar_system, TimeScheme(dt=0.1), np.ones(1), 1.0)
    frame = traj.to_frame()
    assert list(frame.columns) == TRAJECTORY_COLUMNS
    assert len(frame) == traj.steps + 1 == 11
    assert frame["energy"].iloc[0] == 0.5


def test_beam_balance_relative_to_its_energy_scale():
    # fourth-order stiffness puts energy roundoff far above the absolute balance tolerance
    system = build_model(ModelSection(kind="beam1d", n=24), power_feedback(3.0))
    scheme = TimeScheme.default_for(system)
    traj = simulate(system, scheme, initial_state(system, "smooth"), 0.5)
    assert traj.completed
    assert traj.max_residual <= 1e-8 * traj.energies[0]
    assert traj.energies[-1] < traj.energies[0]


def test_time_viscosity_post_step_contracts_energy():
    spec = ModelSection(kind="wave1d", n=32, damping=DampingSection(support="none"))
    system = build_model(spec, linear_feedback()).without_damping()
    integrator = MidpointIntegrator(system, TimeScheme(dt=0.5 * system.dx, time_viscosity="squared"))
    rng = np.random.default_rng(3)
    for _ in range(10):
        u = rng.standard_normal(system.n)
        assert system.energy(integrator.post_step(u)) <= system.energy(u) * (1.0 + 1e-14)
    smooth = initial_state(system, "smooth")
    assert system.energy(integrator.post_step(smooth)) <= system.energy(smooth)


def test_newton_converges_in_a_few_iterations(wave_cubic):
    traj = simulate(wave_cubic, TimeScheme.default_for(wave_cubic), initial_state(wave_cubic, "smooth"), 1.0)
    assert traj.completed
    assert np.median(traj.solver_iters[1:]) <= 5


def test_stage_solver_is_the_config_solver_section(wave_cubic):
    config = validate({
        "feedback.name": "power",
        "feedback.p": "3",
        "scheme.solver.method": "fixed_point",
        "scheme.solver.tol": "1e-10",
        "scheme.solver.max_iter": "80",
    })
    scheme = build_scheme(config, wave_cubic)
    assert isinstance(scheme.solver, SolverSection)
    assert scheme.solver.model_dump() == config.scheme.solver.model_dump()
    assert StageSolver().model_dump() == SolverSection().model_dump()
    with pytest.raises(ValidationError):
        StageSolver(method="secant")
