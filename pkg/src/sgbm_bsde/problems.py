"""Builders for the benchmark FBSDEs: a trigonometric test equation and two
Black-Scholes basket puts."""

from __future__ import annotations

from scipy.linalg import solve_triangular
import numpy as np

from .errors import ConfigurationError
from .forward import EULER, EXACT_GBM, TimeGrid, brownian, euler_gbm, exact_gbm
from .solver import BsdeProblem

DAX_VOLS = (0.518, 0.648, 0.623, 0.570, 0.530)
DAX_WEIGHTS = (38.1, 6.5, 5.7, 27.0, 22.7)
DAX_RHO = (
    (1.00, 0.79, 0.82, 0.91, 0.84),
    (0.79, 1.00, 0.73, 0.80, 0.76),
    (0.82, 0.73, 1.00, 0.77, 0.72),
    (0.91, 0.80, 0.77, 1.00, 0.90),
    (0.84, 0.76, 0.72, 0.90, 1.00),
)
DAX_RATE = 0.05
DAX_SPOT = 0.01


def example1_problem(N: int, T: float = 1.0, x0: float = 0.0) -> BsdeProblem:
    """``dX = dW``; exact solution ``(sin(X_t + t), cos(X_t + t))``."""

    def driver(t, X, Y, Z):
        x = X[:, 0]
        z = Z[:, 0]
        s = np.sin(t + x)
        return Y * z - z + 2.5 * Y - s * np.cos(t + x) - 2.0 * s

    def terminal(X):
        return np.sin(X[:, 0] + T)

    def terminal_grad(X):
        return np.cos(X[:, 0] + T)[:, None]

    return BsdeProblem(model=brownian(1), grid=TimeGrid.uniform(T, N), driver=driver,
                       terminal=terminal, terminal_grad=terminal_grad, x0=np.array([x0]))


def black_scholes_driver(model, r):
    """``f(t, x, y, z) = -r y - z . L^{-1} ((mu - r) / sigma)``."""
    lam = solve_triangular(model.chol, (model.rates - r) / model.vols, lower=True)

    def driver(t, X, Y, Z):
        return -r * Y - Z @ lam

    return driver, r + float(np.linalg.norm(lam))


def _gbm_model(dynamics, rates, vols, rho):
    if dynamics == EULER:
        return euler_gbm(rates, vols, rho)
    if dynamics == EXACT_GBM:
        return exact_gbm(rates, vols, rho)
    raise ConfigurationError(f"unknown asset dynamics {dynamics!r}")


def arithmetic_basket_problem(N: int = 10, T: float = 1.0, dynamics: str = EULER,
                              spot=DAX_SPOT, r: float = DAX_RATE, vols=DAX_VOLS,
                              rho=DAX_RHO, weights=DAX_WEIGHTS, strike: float = 1.0) -> BsdeProblem:
    """Put on ``sum_i w_i S_i`` with payoff ``(strike - sum_i w_i S_i)^+``."""
    vols = np.asarray(vols, dtype=float)
    w = np.asarray(weights, dtype=float)
    model = _gbm_model(dynamics, r, vols, rho)
    driver, lip = black_scholes_driver(model, r)

    def terminal(X):
        return np.maximum(strike - X @ w, 0.0)

    def terminal_grad(X):
        itm = (X @ w < strike).astype(float)
        return -itm[:, None] * w[None, :]

    x0 = np.broadcast_to(np.asarray(spot, dtype=float), (model.q,)).copy()
    return BsdeProblem(model=model, grid=TimeGrid.uniform(T, N), driver=driver, terminal=terminal,
                       terminal_grad=terminal_grad, x0=x0, lipschitz=lip)


def geometric_basket_problem(q: int, N: int = 20, T: float = 1.0, spot: float = 40.0,
                             strike: float = 40.0, r: float = 0.06, vol: float = 0.2,
                             corr: float = 0.25, dynamics: str = EXACT_GBM) -> BsdeProblem:
    """Put on the geometric mean of ``q`` identical, equicorrelated assets."""
    if q < 1:
        raise ConfigurationError("need at least one asset")
    rho = np.full((q, q), corr)
    np.fill_diagonal(rho, 1.0)
    model = _gbm_model(dynamics, r, np.full(q, vol), rho)
    driver, lip = black_scholes_driver(model, r)

    def gmean(X):
        return np.exp(np.mean(np.log(X), axis=1))

    def terminal(X):
        return np.maximum(strike - gmean(X), 0.0)

    def terminal_grad(X):
        G = gmean(X)
        itm = (G < strike).astype(float)
        return -(itm * G)[:, None] / (q * X)

    return BsdeProblem(model=model, grid=TimeGrid.uniform(T, N), driver=driver, terminal=terminal,
                       terminal_grad=terminal_grad, x0=np.full(q, spot), lipschitz=lip)
