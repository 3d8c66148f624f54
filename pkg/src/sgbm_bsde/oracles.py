"""Closed-form reference solutions."""

from __future__ import annotations

import numpy as np
from scipy.stats import norm

from .errors import ConfigurationError
from .forward import cholesky

# Reference price of the five-asset DAX-like arithmetic basket put
ARITHMETIC_BASKET_REFERENCE = 0.175866


def example1_exact(t, x):
    """Exact ``(Y_t, Z_t) = (sin(x + t), cos(x + t))``."""
    return np.sin(x + t), np.cos(x + t)


def black_scholes_put(spot, strike, r, vol, T, dividend=0.0):
    if vol == 0.0:
        fwd = spot * np.exp((r - dividend) * T)
        return float(np.exp(-r * T) * max(strike - fwd, 0.0))
    sd = vol * np.sqrt(T)
    d1 = (np.log(spot / strike) + (r - dividend + 0.5 * vol**2) * T) / sd
    d2 = d1 - sd
    return float(strike * np.exp(-r * T) * norm.cdf(-d2) - spot * np.exp(-dividend * T) * norm.cdf(-d1))


def _as_corr(rho, q):
    rho = np.asarray(rho, dtype=float)
    if rho.ndim == 0:
        rho = np.full((q, q), float(rho))
        np.fill_diagonal(rho, 1.0)
    return rho


def geometric_basket_params(S0, r, vols, rho, T):
    """``(G_0, sigma_hat, dividend)`` of the geometric mean as one log-normal asset."""
    vols = np.atleast_1d(np.asarray(vols, dtype=float))
    q = vols.size
    S0 = np.broadcast_to(np.asarray(S0, dtype=float), (q,))
    if np.any(S0 <= 0) or T <= 0:
        raise ConfigurationError("geometric basket needs positive spots and maturity")
    rho = _as_corr(rho, q)
    cholesky(rho)
    g0 = float(np.exp(np.mean(np.log(S0))))
    var_hat = float(vols @ rho @ vols) / q**2
    dividend = 0.5 * (np.mean(vols**2) - var_hat)
    return g0, np.sqrt(max(var_hat, 0.0)), dividend


def geometric_basket_put(S0, K, r, vols, rho, T) -> float:
    """European put on ``(prod_i S_i,T)**(1/q)`` under risk-neutral correlated GBM."""
    if K <= 0:
        raise ConfigurationError("strike must be positive")
    g0, vol_hat, dividend = geometric_basket_params(S0, r, vols, rho, T)
    return black_scholes_put(g0, K, r, vol_hat, T, dividend)


def geometric_basket_put_mc(S0, K, r, vols, rho, T, n: int, seed: int = 0, chunk: int = 1_000_000):
    """Direct Monte Carlo of the discounted geometric-basket put; returns ``(price, stderr)``."""
    vols = np.atleast_1d(np.asarray(vols, dtype=float))
    q = vols.size
    S0 = np.broadcast_to(np.asarray(S0, dtype=float), (q,))
    L = cholesky(_as_corr(rho, q))
    rng = np.random.default_rng(seed)
    log_g0 = np.mean(np.log(S0))
    drift = np.mean(r - 0.5 * vols**2) * T
    theta = L.T @ vols / q
    total, total_sq, done = 0.0, 0.0, 0
    while done < n:
        m = min(chunk, n - done)
        W = rng.standard_normal((m, q))
        G = np.exp(log_g0 + drift + np.sqrt(T) * (W @ theta))
        pay = np.exp(-r * T) * np.maximum(K - G, 0.0)
        total += pay.sum()
        total_sq += (pay * pay).sum()
        done += m
    mean = total / n
    var = total_sq / n - mean**2
    return mean, float(np.sqrt(var / n))
