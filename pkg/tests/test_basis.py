import numpy as np
import pytest

from sgbm_bsde.basis import (GEOMETRIC_MEAN, MONOMIAL, SUPPORTED_PAIRINGS, WEIGHTED_SUM, BasisSpec,
                             cond_expect, eval_basis, gaussian_power_moments)
from sgbm_bsde.errors import ConfigurationError, DomainError
from sgbm_bsde.forward import EULER, brownian, euler_gbm, euler_model, exact_gbm, standard_normals
from sgbm_bsde.problems import DAX_RHO, DAX_VOLS, DAX_WEIGHTS


def test_eval_monomial():
    np.testing.assert_array_equal(eval_basis(BasisSpec(MONOMIAL, 3), [2.0]), [1.0, 2.0, 4.0])


def test_eval_weighted_sum_dax():
    b = BasisSpec(WEIGHTED_SUM, 2, q=5, weights=DAX_WEIGHTS)
    np.testing.assert_allclose(eval_basis(b, np.full(5, 0.01)), [1.0, 1.0], rtol=1e-14)


def test_eval_geometric():
    b = BasisSpec(GEOMETRIC_MEAN, 3, q=3)
    np.testing.assert_allclose(eval_basis(b, [40.0, 40.0, 40.0]), [1.0, 40.0, 1600.0], rtol=1e-14)
    np.testing.assert_allclose(eval_basis(b, [[1.0, 2.0, 4.0]]), [[1.0, 2.0, 4.0]], rtol=1e-14)


def test_geometric_rejects_non_positive():
    with pytest.raises(DomainError):
        eval_basis(BasisSpec(GEOMETRIC_MEAN, 2, q=2), [1.0, 0.0])


@pytest.mark.parametrize("kw", [dict(family="legendre", Q=2), dict(family=MONOMIAL, Q=0),
                                dict(family=MONOMIAL, Q=2, q=2), dict(family=WEIGHTED_SUM, Q=2, q=2),
                                dict(family=WEIGHTED_SUM, Q=2, q=2, weights=(1.0,))])
def test_basis_spec_validation(kw):
    with pytest.raises(ConfigurationError):
        BasisSpec(**kw)


def test_brownian_monomial_example():
    ce = cond_expect(BasisSpec(MONOMIAL, 3), brownian(), 0.0, 0.25, [0.5])
    np.testing.assert_allclose(ce.e_p, [1.0, 0.5, 0.5], rtol=0, atol=1e-15)
    np.testing.assert_allclose(ce.e_pdw, [[0.0, 1.0, 1.0]], rtol=0, atol=1e-15)


def test_geometric_single_asset_mean():
    ce = cond_expect(BasisSpec(GEOMETRIC_MEAN, 2), exact_gbm(0.06, [0.2]), 0.0, 0.05, [40.0])
    assert ce.e_p[1] == pytest.approx(40 * np.exp(0.003), rel=1e-14)
    assert ce.e_pdw[0, 1] == pytest.approx(40 * np.exp(0.003) * 0.2, rel=1e-14)


@pytest.mark.parametrize("basis,model,x", [
    (BasisSpec(MONOMIAL, 4), brownian(), [0.3]),
    (BasisSpec(MONOMIAL, 3), exact_gbm(0.05, [0.3]), [1.2]),
    (BasisSpec(WEIGHTED_SUM, 3, q=5, weights=DAX_WEIGHTS), euler_gbm(0.05, DAX_VOLS, DAX_RHO), np.full(5, 0.01)),
    (BasisSpec(WEIGHTED_SUM, 3, q=2, weights=(1.0, 2.0)), exact_gbm(0.05, [0.2, 0.3], 0.4), [1.0, 0.5]),
    (BasisSpec(GEOMETRIC_MEAN, 3, q=3), exact_gbm(0.06, [0.2] * 3, 0.25), [40.0, 38.0, 41.0]),
])
def test_constant_element(basis, model, x):
    ce = cond_expect(basis, model, 0.0, 0.1, x)
    assert ce.e_p[0] == 1.0
    np.testing.assert_array_equal(ce.e_pdw[:, 0], 0.0)


def test_unsupported_pairing_lists_supported():
    with pytest.raises(ConfigurationError) as exc:
        cond_expect(BasisSpec(GEOMETRIC_MEAN, 2, q=2), euler_gbm(0.05, [0.2, 0.2]), 0.0, 0.1, [1.0, 1.0])
    for family, scheme in SUPPORTED_PAIRINGS:
        assert f"{family}x{scheme}" in str(exc.value)


def test_dimension_mismatch():
    with pytest.raises(ConfigurationError):
        cond_expect(BasisSpec(MONOMIAL, 2), brownian(2), 0.0, 0.1, [0.0, 0.0])


def test_batch_matches_single():
    basis = BasisSpec(WEIGHTED_SUM, 3, q=2, weights=(0.5, 1.5))
    model = exact_gbm([0.03, 0.05], [0.2, 0.4], 0.3)
    X = np.array([[1.0, 2.0], [0.5, 0.7], [3.0, 0.1]])
    batch = cond_expect(basis, model, 0.0, 0.2, X)
    for m in range(3):
        one = cond_expect(basis, model, 0.0, 0.2, X[m])
        np.testing.assert_allclose(batch.e_p[m], one.e_p, rtol=1e-15)
        np.testing.assert_allclose(batch.e_pdw[m], one.e_pdw, rtol=1e-15)


def test_gaussian_power_moments():
    raw = gaussian_power_moments(0.7, 0.3, 4)
    m, v = 0.7, 0.3
    np.testing.assert_allclose(raw, [1, m, m * m + v, m**3 + 3 * m * v, m**4 + 6 * m * m * v + 3 * v * v],
                               rtol=1e-14)


def _one_step_mc(basis, model, t, delta, x, n, seed):
    x = np.asarray(x, dtype=float)
    dW = standard_normals(seed, 0, n, 1, model.d)[:, 0] * np.sqrt(delta)
    X = np.broadcast_to(x, (n, model.q))
    if model.scheme == EULER:
        Xn = X + model.drift_at(t, X) * delta + np.einsum("mqd,md->mq", model.diffusion_at(t, X), dW)
    else:
        Xn = X * np.exp((model.rates - 0.5 * model.vols**2) * delta + model.vols * (dW @ model.chol.T))
    P = eval_basis(basis, Xn)
    PW = P[:, None, :] * dW[:, :, None] / delta
    return P, PW


@pytest.mark.parametrize("basis,model,x", [
    (BasisSpec(MONOMIAL, 4), euler_model(lambda t, X: -X, lambda t, X: 0.5 * np.ones((X.shape[0], 1, 1)), 1, 1),
     [0.8]),
    (BasisSpec(MONOMIAL, 3), exact_gbm(0.05, [0.3]), [1.2]),
    (BasisSpec(WEIGHTED_SUM, 3, q=5, weights=DAX_WEIGHTS), euler_gbm(0.05, DAX_VOLS, DAX_RHO), np.full(5, 0.01)),
    (BasisSpec(WEIGHTED_SUM, 3, q=5, weights=DAX_WEIGHTS), exact_gbm(0.05, DAX_VOLS, DAX_RHO), np.full(5, 0.01)),
    (BasisSpec(GEOMETRIC_MEAN, 3, q=3), exact_gbm(0.06, [0.2] * 3, 0.25), [40.0, 38.0, 41.0]),
])
def test_agrees_with_monte_carlo(basis, model, x):
    delta = 0.2
    ce = cond_expect(basis, model, 0.0, delta, x)
    P, PW = _one_step_mc(basis, model, 0.0, delta, x, 200_000, seed=3)
    se_p = P.std(0, ddof=1) / np.sqrt(P.shape[0])
    se_w = PW.std(0, ddof=1) / np.sqrt(P.shape[0])
    assert np.all(np.abs(P.mean(0) - ce.e_p) <= 4 * se_p + 1e-15)
    assert np.all(np.abs(PW.mean(0) - ce.e_pdw) <= 4 * se_w + 1e-15)


def test_tower_property_gauss_hermite():
    # constant coefficients: two steps of size h compose to one step of 2h
    mu, sig = 0.3, 0.7
    model = euler_model(lambda t, X: np.full_like(X, mu), lambda t, X: np.full((X.shape[0], 1, 1), sig), 1, 1)
    basis = BasisSpec(MONOMIAL, 5)
    h, x0 = 0.15, 0.4
    nodes, weights = np.polynomial.hermite_e.hermegauss(20)
    x1 = x0 + mu * h + sig * np.sqrt(h) * nodes
    inner = cond_expect(basis, model, 0.0, h, x1[:, None]).e_p
    two_step = weights @ inner / weights.sum()
    direct = cond_expect(basis, model, 0.0, 2 * h, [x0]).e_p
    np.testing.assert_allclose(two_step, direct, rtol=1e-8, atol=1e-8)


@pytest.mark.parametrize("n", [1, 2, 3, 4])
def test_degree_closure(n):
    # under a Gaussian step E[x'^n | x] is a degree-n polynomial of x
    basis = BasisSpec(MONOMIAL, n + 1)
    xs = np.linspace(-2, 2, n + 6)
    vals = cond_expect(basis, brownian(), 0.0, 0.3, xs[:, None]).e_p[:, n]
    coef = np.polynomial.polynomial.polyfit(xs, vals, n)
    np.testing.assert_allclose(np.polynomial.polynomial.polyval(xs, coef), vals, atol=1e-10)
    assert coef[n] == pytest.approx(1.0, abs=1e-10)
