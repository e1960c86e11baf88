import numpy as np
import pytest
import scipy.sparse as sp

from decaylab.core.errors import ConfigError, ModelAssemblyError, SizeError
from decaylab.core.feedback import linear_feedback, power_feedback
from decaylab.models.builder import build_model
from decaylab.models.matrix_io import read_coo, write_coo
from decaylab.models.operators import central_difference_1d, laplacian_1d, m_adjoint, viscosity_sqrtAA
from decaylab.models.structure import check_structure
from decaylab.schemas.config import CustomSection, DampingSection, ModelSection


def test_dirichlet_laplacian_entries():
    lap = laplacian_1d(3, 0.25).toarray()
    expected = np.array([[-32.0, 16.0, 0.0], [16.0, -32.0, 16.0], [0.0, 16.0, -32.0]])
    np.testing.assert_array_equal(lap, expected)


def test_periodic_laplacian_rows_sum_to_zero():
    lap = laplacian_1d(8, 0.125, "periodic")
    np.testing.assert_allclose(np.asarray(lap.sum(axis=1)).ravel(), 0.0, atol=1e-12)
    assert abs(lap - lap.T).max() == 0.0


def test_central_difference_is_antisymmetric():
    d = central_difference_1d(7, 0.1)
    assert abs(d + d.T).max() == 0.0


def test_laplacian_rejects_tiny_grids():
    with pytest.raises(SizeError):
        laplacian_1d(1, 0.5)


@pytest.mark.parametrize("kind", ["wave1d", "beam1d", "transport1d", "schrodinger1d"])
def test_catalog_models_pass_structure_checks(kind):
    system = build_model(ModelSection(kind=kind, n=16), power_feedback(3.0))
    report = check_structure(system)
    assert report.ok, report.messages
    assert report.skew_margin <= 1e-12
    assert report.viscosity_bound > 0.0


def test_sqrtAA_viscosity_is_M_symmetric():
    system = build_model(ModelSection(kind="wave1d", n=8, viscosity="sqrtAA"), linear_feedback())
    MV = system.MV.toarray()
    np.testing.assert_allclose(MV, MV.T, atol=1e-8 * np.abs(MV).max())
    assert check_structure(system).mv_psd_ok


def test_sqrtAA_squares_to_adjoint_product():
    system = build_model(ModelSection(kind="transport1d", n=10, viscosity="none"), linear_feedback())
    V = viscosity_sqrtAA(system.A, system.M).toarray()
    A = system.A.toarray()
    target = m_adjoint(system.A, system.M) @ A
    np.testing.assert_allclose(V @ V, target, atol=1e-8 * np.abs(target).max())


def test_damping_rank_matches_support():
    spec = ModelSection(kind="wave1d", n=16, damping=DampingSection(support=[(0.2, 0.5)], alpha=2.0))
    system = build_model(spec, linear_feedback())
    inside = np.count_nonzero((system.nodes > 0.2) & (system.nodes < 0.5))
    assert np.linalg.matrix_rank(system.B.toarray()) == inside
    assert system.norm_B == pytest.approx(2.0)


def test_wave_energy_is_discrete_energy():
    system = build_model(ModelSection(kind="wave1d", n=20, viscosity="none"), linear_feedback())
    y = np.sin(np.pi * system.nodes)
    u = np.concatenate([y, np.zeros_like(y)])
    grad = np.diff(np.concatenate([[0.0], y, [0.0]])) / system.dx
    assert system.energy(u) == pytest.approx(0.5 * system.dx * np.sum(grad ** 2), rel=1e-12)


def test_viscosity_none_zeroes_V():
    system = build_model(ModelSection(kind="wave1d", n=8, viscosity="none"), linear_feedback())
    assert system.V.nnz == 0
    assert not system.viscosity_enabled


def test_custom_model_from_files(tmp_path):
    write_coo(tmp_path / "A.txt", np.array([[0.0, 1.0], [-1.0, 0.0]]))
    write_coo(tmp_path / "B.txt", np.eye(2))
    spec = ModelSection(
        kind="custom",
        viscosity="none",
        custom=CustomSection(A=str(tmp_path / "A.txt"), B=str(tmp_path / "B.txt"), dx=0.5),
    )
    system = build_model(spec, linear_feedback())
    assert system.n == 2
    assert system.dx == 0.5
    np.testing.assert_array_equal(system.M.toarray(), np.eye(2))


def test_custom_model_must_be_skew(tmp_path):
    write_coo(tmp_path / "A.txt", np.diag([1.0, 0.0]))
    write_coo(tmp_path / "B.txt", np.eye(2))
    spec = ModelSection(
        kind="custom",
        viscosity="none",
        custom=CustomSection(A=str(tmp_path / "A.txt"), B=str(tmp_path / "B.txt")),
    )
    with pytest.raises(ModelAssemblyError):
        build_model(spec, linear_feedback())


def test_custom_laplacian_block_needs_V_file(tmp_path):
    write_coo(tmp_path / "A.txt", np.array([[0.0, 1.0], [-1.0, 0.0]]))
    write_coo(tmp_path / "B.txt", np.eye(2))
    spec = ModelSection(
        kind="custom",
        viscosity="laplacian_block",
        custom=CustomSection(A=str(tmp_path / "A.txt"), B=str(tmp_path / "B.txt")),
    )
    with pytest.raises(ConfigError) as err:
        build_model(spec, linear_feedback())
    assert err.value.field == "model.custom.V"


def test_read_coo_errors(tmp_path):
    with pytest.raises(ConfigError):
        read_coo(tmp_path / "missing.txt")
    bad = tmp_path / "bad.txt"
    bad.write_text("2 1\n0 5 1.0\n")
    with pytest.raises(ConfigError):
        read_coo(bad)


def test_write_read_coo_preserves_values(tmp_path):
    matrix = sp.random(6, 6, density=0.4, random_state=3, format="csr")
    write_coo(tmp_path / "m.txt", matrix)
    np.testing.assert_array_equal(read_coo(tmp_path / "m.txt").toarray(), matrix.toarray())


def test_dirichlet_spectrum_matches_closed_form():
    n = 100
    dx = 1.0 / (n + 1)
    eig = np.sort(np.linalg.eigvalsh(laplacian_1d(n, dx).toarray()))
    k = np.arange(1, n + 1)
    exact = np.sort(-(4.0 / dx ** 2) * np.sin(k * np.pi / (2.0 * (n + 1))) ** 2)
    np.testing.assert_allclose(eig, exact, rtol=1e-10, atol=1e-8)


def test_lowest_wave_frequency_converges_at_second_order():
    errors = []
    for n in (15, 31, 63):
        system = build_model(ModelSection(kind="wave1d", n=n), linear_feedback())
        freqs = np.abs(np.linalg.eigvals(system.A.toarray()).imag)
        errors.append(abs(freqs.min() - np.pi))
    assert errors[-1] < 1e-3
    for coarse, fine in zip(errors, errors[1:]):
        assert coarse / fine == pytest.approx(4.0, rel=0.05)


@pytest.mark.parametrize("n", [4, 16, 64, 256])
def test_scaled_laplacian_spectrum_is_bounded(n):
    dx = 1.0 / (n + 1)
    top = float(np.max(np.linalg.eigvalsh((-laplacian_1d(n, dx)).toarray())))
    assert dx ** 2 * top <= 4.0
