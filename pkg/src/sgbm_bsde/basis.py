"""Regression bases and their closed-form one-step conditional expectations.

All three families are powers of a scalar feature ``s(x)``:
``p_k(x) = s(x)**(k-1)`` for ``k = 1..Q`` with

* ``monomial``               -- ``s(x) = x`` (scalar state),
* ``weighted_sum_powers``    -- ``s(x) = sum_i w_i x_i``,
* ``geometric_mean_powers``  -- ``s(x) = (prod_i x_i)**(1/q)``.

Regress-later needs ``E[p_l(X_{k+1}) | X_k = x]`` and
``E[p_l(X_{k+1}) dW_r / Delta | X_k = x]``; these are computed exactly for
the feature/transition pairs where the feature of the next state has a
known law (Gaussian for linear features under an Euler step, log-normal
for the geometric mean and for products of exact-GBM assets).
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from math import comb, factorial
from typing import Optional

import numpy as np

from .errors import ConfigurationError, DomainError
from .forward import EULER, EXACT_GBM, ForwardModel

MONOMIAL = "monomial"
WEIGHTED_SUM = "weighted_sum_powers"
GEOMETRIC_MEAN = "geometric_mean_powers"
FAMILIES = (MONOMIAL, WEIGHTED_SUM, GEOMETRIC_MEAN)

SUPPORTED_PAIRINGS = (
    (MONOMIAL, EULER),
    (MONOMIAL, EXACT_GBM),
    (WEIGHTED_SUM, EULER),
    (WEIGHTED_SUM, EXACT_GBM),
    (GEOMETRIC_MEAN, EXACT_GBM),
)


@dataclass(frozen=True)
class BasisSpec:
    family: str
    Q: int
    q: int = 1
    weights: Optional[tuple] = None

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ConfigurationError(f"unknown basis family {self.family!r}; expected one of {FAMILIES}")
        if self.Q < 1:
            raise ConfigurationError("basis size Q must be at least 1")
        if self.family == MONOMIAL and self.q != 1:
            raise ConfigurationError("monomial basis is one-dimensional (q = 1)")
        if self.family == WEIGHTED_SUM:
            if self.weights is None or len(self.weights) != self.q:
                raise ConfigurationError("weighted_sum_powers needs one weight per state component")
            object.__setattr__(self, "weights", tuple(float(w) for w in self.weights))

    @property
    def linear_weights(self) -> np.ndarray:
        """Weights of the feature when it is linear in the state."""
        if self.family == MONOMIAL:
            return np.ones(1)
        if self.family == WEIGHTED_SUM:
            return np.asarray(self.weights)
        raise ConfigurationError("geometric mean feature is not linear")

    def feature(self, X) -> np.ndarray:
        """Scalar feature ``s(x)`` for an ``(M, q)`` array (or a single state)."""
        X = np.asarray(X, dtype=float)
        single = X.ndim == 1
        X = np.atleast_2d(X)
        if X.shape[1] != self.q:
            raise ConfigurationError(f"state dimension {X.shape[1]} does not match basis dimension {self.q}")
        if self.family == GEOMETRIC_MEAN:
            if np.any(X <= 0):
                raise DomainError("geometric mean basis needs strictly positive states")
            s = np.exp(np.mean(np.log(X), axis=1))
        else:
            s = X @ self.linear_weights
        return s[0] if single else s


def eval_basis(basis: BasisSpec, x) -> np.ndarray:
    """``(p_1(x), ..., p_Q(x))``; shape ``(Q,)`` or ``(M, Q)``."""
    s = np.asarray(basis.feature(x))
    return s[..., None] ** np.arange(basis.Q)


@dataclass(frozen=True)
class CondExpectation:
    """``e_p[..., l] = E[p_l(X')]`` and ``e_pdw[..., r, l] = E[p_l(X') dW_r / Delta]``."""

    e_p: np.ndarray
    e_pdw: np.ndarray


def gaussian_power_moments(mean, var, n_max: int) -> np.ndarray:
    """Raw moments ``E[Y**n]``, ``n = 0..n_max``, for ``Y ~ N(mean, var)``.

    Binomial expansion around the mean with central moments from
    ``m_0 = 1, m_1 = 0, m_j = (j - 1) var m_{j-2}``.
    """
    mean = np.asarray(mean, dtype=float)
    var = np.asarray(var, dtype=float)
    central = [np.ones_like(var), np.zeros_like(var)]
    for j in range(2, n_max + 1):
        central.append((j - 1) * var * central[j - 2])
    out = []
    for n in range(n_max + 1):
        acc = np.zeros(np.broadcast(mean, var).shape)
        for j in range(0, n + 1, 2):
            acc = acc + comb(n, j) * mean ** (n - j) * central[j]
        out.append(acc)
    return np.stack(out, axis=-1)


def _affine_gaussian(basis, model, t, delta, X):
    # s(X') = w.(x + mu dt) + (sigma^T w).dW is Gaussian given x
    w = basis.linear_weights
    mean = (X + model.drift_at(t, X) * delta) @ w
    b = np.einsum("mqd,q->md", model.diffusion_at(t, X), w)
    var = np.sum(b * b, axis=1) * delta
    Q = basis.Q
    raw = gaussian_power_moments(mean, var, Q - 1)
    e_p = raw
    powers = np.arange(Q)
    # Gaussian integration by parts: E[g(Y) dW_r]/dt = E[g'(Y)] b_r
    lower = np.concatenate([np.zeros((X.shape[0], 1)), raw[:, :-1]], axis=1)
    e_pdw = b[:, :, None] * (powers * lower)[:, None, :]
    return e_p, e_pdw


def _compositions(n, q):
    for bars in itertools.combinations(range(n + q - 1), q - 1):
        k, prev = [], -1
        for bar in bars + (n + q - 1,):
            k.append(bar - prev - 1)
            prev = bar
        yield np.array(k)


def _lognormal_weighted_sum(basis, model, delta, X):
    # multinomial expansion; each product of log-normal assets is log-normal
    w = basis.linear_weights
    M, q = X.shape
    d = model.d
    Q = basis.Q
    e_p = np.zeros((M, Q))
    e_pdw = np.zeros((M, d, Q))
    e_p[:, 0] = 1.0
    wx = X * w
    log_drift = (model.rates - 0.5 * model.vols**2) * delta
    for n in range(1, Q):
        for k in _compositions(n, q):
            coef = factorial(n) / np.prod([factorial(int(ki)) for ki in k])
            v = model.chol.T @ (k * model.vols)
            growth = np.exp(k @ log_drift + 0.5 * (v @ v) * delta)
            term = coef * growth * np.prod(wx ** k, axis=1)
            e_p[:, n] += term
            e_pdw[:, :, n] += term[:, None] * v[None, :]
    return e_p, e_pdw


def _lognormal_geometric(basis, model, delta, X):
    G = np.exp(np.mean(np.log(X), axis=1))
    q = model.q
    c = np.mean(model.rates - 0.5 * model.vols**2) * delta
    theta = model.chol.T @ model.vols / q
    a = np.arange(basis.Q)
    e_p = G[:, None] ** a * np.exp(a * c + 0.5 * a**2 * (theta @ theta) * delta)
    e_pdw = e_p[:, None, :] * a[None, None, :] * theta[None, :, None]
    return e_p, e_pdw


def cond_expect(basis: BasisSpec, model: ForwardModel, t: float, delta: float, x) -> CondExpectation:
    """Closed-form one-step expectations of the basis from state ``x`` at ``t``.

    ``x`` may be a single state ``(q,)`` or a batch ``(M, q)``.
    """
    pairing = (basis.family, model.scheme)
    if pairing not in SUPPORTED_PAIRINGS:
        raise ConfigurationError(
            f"no closed-form expectations for basis {basis.family!r} under scheme {model.scheme!r}; "
            f"supported pairings: {', '.join(f'{b}x{s}' for b, s in SUPPORTED_PAIRINGS)}"
        )
    if basis.q != model.q:
        raise ConfigurationError(f"basis dimension {basis.q} does not match model dimension {model.q}")
    X = np.asarray(x, dtype=float)
    single = X.ndim == 1
    X = np.atleast_2d(X)
    if model.scheme == EULER:
        e_p, e_pdw = _affine_gaussian(basis, model, t, delta, X)
    elif basis.family == GEOMETRIC_MEAN:
        if np.any(X <= 0):
            raise DomainError("geometric mean basis needs strictly positive states")
        e_p, e_pdw = _lognormal_geometric(basis, model, delta, X)
    else:
        e_p, e_pdw = _lognormal_weighted_sum(basis, model, delta, X)
    if single:
        return CondExpectation(e_p[0], e_pdw[0])
    return CondExpectation(e_p, e_pdw)
