import numpy as np
import pytest

from pdn.errors import DegenerateDataError, InvalidArgumentError
from pdn.inverse import density, density_batch
from pdn.network import MixtureParams
from pdn.pca import density_map, fit_pca, lift, project, write_density_csv, write_density_svg


def planted_plane_points(n=50, d=5, seed=0):
    rng = np.random.default_rng(seed)
    u = np.array([1.0, 0.0, 1.0, 0.0, 1.0]) / np.sqrt(3)
    v = np.array([0.0, 1.0, 0.0, -1.0, 0.0]) / np.sqrt(2)
    coeffs = rng.standard_normal((n, 2)) * [3.0, 1.5]
    return 0.5 + coeffs[:, :1] * u + coeffs[:, 1:] * v


def test_planted_plane_recovered_exactly():
    points = planted_plane_points()
    model = fit_pca(points)
    reconstructed = lift(model, project(model, points))
    assert np.max(np.abs(reconstructed - points)) < 1e-10


def test_components_orthonormal():
    model = fit_pca(np.random.default_rng(1).standard_normal((100, 5)))
    gram = model.components @ model.components.T
    assert np.max(np.abs(gram - np.eye(2))) < 1e-10
    assert model.explained_variance[0] >= model.explained_variance[1] >= 0.0


def test_sign_convention_deterministic():
    points = np.random.default_rng(2).standard_normal((60, 4))
    model = fit_pca(points)
    for row in model.components:
        assert row[np.argmax(np.abs(row))] > 0
    again = fit_pca(points)
    assert np.array_equal(model.components, again.components)


def test_isotropic_cloud_has_balanced_variances():
    points = np.random.default_rng(3).standard_normal((10_000, 5))
    model = fit_pca(points)
    ratio = model.explained_variance[0] / model.explained_variance[1]
    assert ratio < 1.1


def test_project_mean_is_origin():
    points = planted_plane_points(seed=5)
    model = fit_pca(points)
    assert np.max(np.abs(project(model, model.mean))) < 1e-12


def test_round_trip_for_in_plane_points():
    points = planted_plane_points(seed=6)
    model = fit_pca(points)
    coords = np.array([[0.7, -1.3]])
    assert np.max(np.abs(project(model, lift(model, coords)) - coords)) < 1e-12


def test_projection_is_optimal_in_plane():
    rng = np.random.default_rng(7)
    model = fit_pca(planted_plane_points(seed=7))
    p = rng.standard_normal(5)
    best = np.linalg.norm(p - lift(model, project(model, p)))
    for _ in range(100):
        q = rng.standard_normal(2) * 3
        assert best <= np.linalg.norm(p - lift(model, q)) + 1e-12


def test_weighted_fit_uses_weights():
    points = np.array([[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]])
    weights = np.array([1.0, 1.0, 1.0, 0.0])
    model = fit_pca(points, weights=weights)
    # the zero-weight point contributes nothing: mean stays in the x-y plane
    assert np.max(np.abs(model.mean - np.array([1 / 3, 1 / 3, 0.0]))) < 1e-12


def test_rank_deficient_rejected():
    line = np.outer(np.linspace(0, 1, 10), np.ones(5))
    with pytest.raises(DegenerateDataError):
        fit_pca(line)
    with pytest.raises(InvalidArgumentError):
        fit_pca(np.zeros((2, 5)))


def make_mixture(seed=0, m=4, d=5):
    rng = np.random.default_rng(seed)
    return MixtureParams(
        pi=rng.dirichlet(np.ones(m)),
        mu=rng.uniform(0.0, 1.0, (m, d)),
        sigma=rng.uniform(0.05, 0.2, m),
    )


def test_density_map_argmax_at_in_plane_mean():
    model = fit_pca(planted_plane_points(seed=8))
    mu = lift(model, np.array([0.4, -0.6]))
    params = MixtureParams(pi=np.array([1.0]), mu=mu[None, :], sigma=np.array([0.1]))
    dmap = density_map(params, model, resolution=101)
    i, j = np.unravel_index(np.argmax(dmap.values), dmap.values.shape)
    target = project(model, mu)
    dx = dmap.x[1] - dmap.x[0]
    dy = dmap.y[1] - dmap.y[0]
    assert abs(dmap.x[j] - target[0]) <= dx
    assert abs(dmap.y[i] - target[1]) <= dy


def test_density_map_matches_direct_evaluation():
    params = make_mixture(seed=9)
    model = fit_pca(np.random.default_rng(9).uniform(0, 1, (40, 5)))
    dmap = density_map(params, model, resolution=40)
    rng = np.random.default_rng(10)
    for _ in range(100):
        i = rng.integers(0, 40)
        j = rng.integers(0, 40)
        point = lift(model, np.array([dmap.x[j], dmap.y[i]]))
        assert dmap.values[i, j] == pytest.approx(density(params, point), rel=1e-12)


def test_density_map_refinement_consistency():
    params = make_mixture(seed=11, m=2)
    model = fit_pca(np.random.default_rng(11).uniform(0, 1, (40, 5)))
    coarse = density_map(params, model, resolution=30)
    fine = density_map(params, model, resolution=60)
    fine_cells = fine.values.reshape(30, 2, 30, 2).mean(axis=(1, 3))
    scale = coarse.values.max()
    assert np.max(np.abs(fine_cells - coarse.values)) / scale < 0.05


def test_mode_markers_inside_extents():
    params = make_mixture(seed=12)
    model = fit_pca(np.random.default_rng(12).uniform(0, 1, (40, 5)))
    from pdn.inverse import find_modes

    modes = [m.point for m in find_modes(params)]
    dmap = density_map(params, model, modes=modes)
    assert np.all(dmap.markers[:, 0] >= dmap.x[0] - (dmap.x[1] - dmap.x[0]))
    assert np.all(dmap.markers[:, 0] <= dmap.x[-1] + (dmap.x[1] - dmap.x[0]))
    assert np.all(dmap.markers[:, 1] >= dmap.y[0] - (dmap.y[1] - dmap.y[0]))
    assert np.all(dmap.markers[:, 1] <= dmap.y[-1] + (dmap.y[1] - dmap.y[0]))


def test_density_csv_round_trip(tmp_path):
    params = make_mixture(seed=13)
    model = fit_pca(np.random.default_rng(13).uniform(0, 1, (40, 5)))
    dmap = density_map(params, model, resolution=12)
    path = tmp_path / "map.csv"
    write_density_csv(dmap, path)
    lines = path.read_text().strip().splitlines()
    header = lines[0].split(",")
    assert header[0] == "y\\x"
    assert [float(v) for v in header[1:]] == dmap.x.tolist()
    assert len(lines) == 13
    row = lines[3].split(",")
    assert float(row[0]) == dmap.y[2]
    assert np.array_equal(np.array([float(v) for v in row[1:]]), dmap.values[2])


def test_density_svg_written(tmp_path):
    params = make_mixture(seed=14)
    model = fit_pca(np.random.default_rng(14).uniform(0, 1, (40, 5)))
    dmap = density_map(params, model, resolution=24, modes=[params.mu[0]])
    path = tmp_path / "map.svg"
    write_density_svg(dmap, path)
    text = path.read_text()
    assert text.lstrip().startswith("<?xml")
    assert "<svg" in text
