import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sgbm_bsde.errors import ConfigurationError, DecompositionError, SimulationOverflowError
from sgbm_bsde.forward import (TimeGrid, brownian, cholesky, euler_gbm, euler_model, exact_gbm,
                               simulate_cloud, standard_normals)
from sgbm_bsde.problems import DAX_RHO, DAX_VOLS


def test_uniform_grid():
    g = TimeGrid.uniform(1.0, 4)
    np.testing.assert_allclose(g.times, [0, 0.25, 0.5, 0.75, 1.0])
    np.testing.assert_allclose(g.deltas, 0.25)
    assert g.N == 4 and g.T == 1.0
    assert g.mesh_ratio == pytest.approx(1.0)
    assert g.max_step == pytest.approx(0.25)


def test_mesh_ratio_nonuniform():
    g = TimeGrid([0.0, 0.5, 0.75, 1.0])
    assert g.mesh_ratio == pytest.approx(2.0)


@pytest.mark.parametrize("times", [[0.0], [0.1, 1.0], [0.0, 0.5, 0.5], [0.0, 1.0, 0.5]])
def test_grid_rejects_bad_times(times):
    with pytest.raises(ConfigurationError):
        TimeGrid(times)


def test_cholesky_identity():
    np.testing.assert_array_equal(cholesky(np.eye(2)), np.eye(2))


def test_cholesky_2x2():
    L = cholesky([[1.0, 0.25], [0.25, 1.0]])
    np.testing.assert_allclose(L, [[1.0, 0.0], [0.25, np.sqrt(1 - 0.0625)]], rtol=0, atol=1e-15)
    np.testing.assert_allclose(L @ L.T, [[1.0, 0.25], [0.25, 1.0]], atol=1e-15)


def test_cholesky_dax_matrix():
    rho = np.array(DAX_RHO)
    L = cholesky(rho)
    assert np.all(np.diag(L) > 0)
    assert np.allclose(np.triu(L, 1), 0)
    np.testing.assert_allclose(L @ L.T, rho, rtol=0, atol=1e-12)


def test_cholesky_failure_names_pivot():
    with pytest.raises(DecompositionError) as exc:
        cholesky([[1.0, 0.9, 0.9], [0.9, 1.0, -0.9], [0.9, -0.9, 1.0]])
    assert exc.value.pivot == 2
    assert "pivot 2" in str(exc.value)


@pytest.mark.parametrize("rho", [[[1.0, 0.2], [0.3, 1.0]], [[2.0, 0.0], [0.0, 1.0]]])
def test_cholesky_rejects_non_correlation(rho):
    with pytest.raises(ConfigurationError):
        cholesky(rho)


@settings(max_examples=50, deadline=None)
@given(st.integers(1, 8), st.integers(0, 2**32 - 1))
def test_cholesky_random_correlations(n, seed):
    rng = np.random.default_rng(seed)
    A = rng.standard_normal((n, n + 2))
    cov = A @ A.T
    s = np.sqrt(np.diag(cov))
    rho = cov / np.outer(s, s)
    rho = 0.5 * (rho + rho.T)
    np.fill_diagonal(rho, 1.0)
    L = cholesky(rho)
    np.testing.assert_allclose(L @ L.T, rho, atol=1e-12)


def test_normals_block_addressing():
    full = standard_normals(11, 0, 37, 5, 3)
    for start, stop in [(0, 1), (1, 2), (3, 17), (20, 37)]:
        np.testing.assert_array_equal(standard_normals(11, start, stop, 5, 3), full[start:stop])
    assert np.all(np.isfinite(full))


def test_brownian_states_are_increment_sums():
    cloud = simulate_cloud(brownian(), TimeGrid.uniform(1.0, 8), [0.0], 50, seed=3)
    np.testing.assert_array_equal(cloud.states[:, 0, 0], 0.0)
    np.testing.assert_allclose(cloud.states[:, 1:, 0], np.cumsum(cloud.increments[:, :, 0], axis=1),
                               rtol=0, atol=1e-14)


def test_increments_are_scaled_normals():
    grid = TimeGrid([0.0, 0.1, 0.5, 1.0])
    cloud = simulate_cloud(brownian(2), grid, [0.0, 0.0], 20, seed=5)
    z = standard_normals(5, 0, 20, 3, 2)
    np.testing.assert_allclose(cloud.increments, z * np.sqrt(grid.deltas)[None, :, None], rtol=1e-15)


def test_gbm_zero_vol_is_deterministic():
    grid = TimeGrid.uniform(1.0, 10)
    cloud = simulate_cloud(exact_gbm(0.06, [0.0]), grid, [40.0], 7, seed=1)
    np.testing.assert_allclose(cloud.states[:, :, 0], np.broadcast_to(40 * np.exp(0.06 * grid.times), (7, 11)),
                               rtol=1e-14)


def test_gbm_terminal_mean():
    cloud = simulate_cloud(exact_gbm(0.06, [0.2]), TimeGrid.uniform(1.0, 20), [40.0], 10**6, seed=0)
    ST = cloud.states[:, -1, 0]
    se = ST.std(ddof=1) / np.sqrt(ST.size)
    assert abs(ST.mean() - 40 * np.exp(0.06)) < 3 * se


def test_gbm_log_moments():
    rates = np.array([0.05, 0.05, 0.02])
    vols = np.array([0.3, 0.2, 0.5])
    rho = np.array([[1, 0.5, 0.2], [0.5, 1, -0.3], [0.2, -0.3, 1.0]])
    S0 = np.array([1.0, 2.0, 0.5])
    M, T = 10**5, 1.5
    cloud = simulate_cloud(exact_gbm(rates, vols, rho), TimeGrid.uniform(T, 6), S0, M, seed=9)
    logs = np.log(cloud.states[:, -1])
    mean_exp = np.log(S0) + (rates - 0.5 * vols**2) * T
    var_exp = vols**2 * T
    assert np.all(np.abs(logs.mean(0) - mean_exp) < 4 * np.sqrt(var_exp / M))
    assert np.all(np.abs(logs.var(0, ddof=1) - var_exp) < 4 * var_exp * np.sqrt(2 / (M - 1)))


def test_correlated_increment_correlation():
    rho = np.array(DAX_RHO)
    model = exact_gbm(0.05, DAX_VOLS, rho)
    cloud = simulate_cloud(model, TimeGrid.uniform(1.0, 10), np.full(5, 0.01), 10**4, seed=4)
    shocks = cloud.increments.reshape(-1, 5) @ model.chol.T
    assert shocks.shape[0] >= 10**5
    assert np.max(np.abs(np.corrcoef(shocks.T) - rho)) < 0.01


def test_euler_recomputation_is_exact():
    model = euler_gbm(0.05, DAX_VOLS, DAX_RHO)
    grid = TimeGrid.uniform(1.0, 10)
    cloud = simulate_cloud(model, grid, np.full(5, 0.01), 200, seed=8)
    for k in range(grid.N):
        xk = cloud.states[:, k]
        step = (xk + model.drift_at(grid.times[k], xk) * grid.deltas[k]
                + np.einsum("mqd,md->mq", model.diffusion_at(grid.times[k], xk), cloud.increments[:, k]))
        np.testing.assert_array_equal(cloud.states[:, k + 1], step)


def test_euler_gbm_step_form():
    model = euler_gbm([0.05, 0.01], [0.2, 0.4], [[1, 0.3], [0.3, 1]])
    grid = TimeGrid.uniform(1.0, 3)
    cloud = simulate_cloud(model, grid, [1.0, 2.0], 10, seed=1)
    k = 1
    S = cloud.states[:, k]
    expected = S * (1 + model.rates * grid.deltas[k] + model.vols * (cloud.increments[:, k] @ model.chol.T))
    np.testing.assert_allclose(cloud.states[:, k + 1], expected, rtol=1e-13)


def test_reproducible_and_thread_independent():
    model = exact_gbm(0.06, np.full(3, 0.2), 0.25)
    grid = TimeGrid.uniform(1.0, 5)
    a = simulate_cloud(model, grid, np.full(3, 40.0), 1000, seed=17)
    b = simulate_cloud(model, grid, np.full(3, 40.0), 1000, seed=17)
    c = simulate_cloud(model, grid, np.full(3, 40.0), 1000, seed=17, threads=4, block=96)
    np.testing.assert_array_equal(a.states, b.states)
    np.testing.assert_array_equal(a.states, c.states)
    np.testing.assert_array_equal(a.increments, c.increments)
    d = simulate_cloud(model, grid, np.full(3, 40.0), 1000, seed=18)
    assert not np.array_equal(a.states, d.states)


def test_cloud_is_read_only():
    cloud = simulate_cloud(brownian(), TimeGrid.uniform(1.0, 2), [0.0], 4, seed=0)
    with pytest.raises(ValueError):
        cloud.states[0, 0, 0] = 1.0


def test_overflow_reports_path_and_step():
    model = euler_model(lambda t, X: 1e306 * np.ones_like(X) * (X + 1) ** 2,
                        lambda t, X: np.zeros((X.shape[0], 1, 1)), q=1, d=1)
    with pytest.raises(SimulationOverflowError) as exc:
        simulate_cloud(model, TimeGrid.uniform(10.0, 5), [1.0], 3, seed=0)
    assert exc.value.path == 0 and exc.value.step >= 1


def test_exact_gbm_requires_square():
    with pytest.raises(ConfigurationError):
        simulate_cloud(brownian(), TimeGrid.uniform(1.0, 2), [0.0, 1.0], 4, seed=0)
    with pytest.raises(ConfigurationError):
        simulate_cloud(brownian(), TimeGrid.uniform(1.0, 2), [0.0], 0, seed=0)


def test_csv_dump(tmp_path):
    cloud = simulate_cloud(brownian(), TimeGrid.uniform(1.0, 2), [0.0], 2, seed=0)
    path = tmp_path / "cloud.csv"
    cloud.to_csv(path)
    lines = path.read_text().splitlines()
    assert lines[0] == "path,step,x1,dw1"
    assert len(lines) == 1 + 2 * 3
    assert lines[3].endswith(",")
    assert float(lines[2].split(",")[2]) == cloud.states[0, 1, 0]
