"""Forward process simulation: time grids, models and path clouds.

Paths are simulated once and stored together with the (uncorrelated)
Brownian increments, since the backward pass needs both.  Normal draws are
produced from a Philox counter stream keyed by the seed, addressed by
``(path, step, component)``; any block of paths can therefore be generated
independently and yields exactly the same numbers as a full simulation.
"""

from __future__ import annotations

import csv
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy.special import ndtri

from .errors import ConfigurationError, DecompositionError, SimulationOverflowError

EULER = "euler"
EXACT_GBM = "exact_gbm"


@dataclass(frozen=True)
class TimeGrid:
    """Partition ``0 = t_0 < ... < t_N = T``."""

    times: np.ndarray

    def __post_init__(self):
        times = np.asarray(self.times, dtype=float)
        if times.ndim != 1 or times.size < 2:
            raise ConfigurationError("a time grid needs at least two points (N >= 1)")
        if times[0] != 0.0:
            raise ConfigurationError("time grid must start at t_0 = 0")
        if not np.all(np.diff(times) > 0):
            raise ConfigurationError("time grid must be strictly increasing")
        times.setflags(write=False)
        object.__setattr__(self, "times", times)

    @classmethod
    def uniform(cls, T: float, N: int) -> "TimeGrid":
        if N < 1 or T <= 0:
            raise ConfigurationError("uniform grid needs T > 0 and N >= 1")
        return cls(T * np.arange(N + 1) / N)

    @property
    def N(self) -> int:
        return self.times.size - 1

    @property
    def T(self) -> float:
        return float(self.times[-1])

    @property
    def deltas(self) -> np.ndarray:
        return np.diff(self.times)

    @property
    def mesh_ratio(self) -> float:
        """``max_{k <= N-2} Delta_k / Delta_{k+1}``; 1.0 for a single step."""
        d = self.deltas
        if d.size < 2:
            return 1.0
        return float(np.max(d[:-1] / d[1:]))

    @property
    def max_step(self) -> float:
        return float(self.deltas.max())


def cholesky(rho) -> np.ndarray:
    """Lower-triangular ``L`` with ``L @ L.T == rho`` and positive diagonal.

    Raises :class:`DecompositionError` naming the first non-positive pivot.
    """
    rho = np.asarray(rho, dtype=float)
    if rho.ndim != 2 or rho.shape[0] != rho.shape[1]:
        raise ConfigurationError("correlation matrix must be square")
    if not np.allclose(rho, rho.T, rtol=0.0, atol=1e-14):
        raise ConfigurationError("correlation matrix must be symmetric")
    if not np.allclose(np.diag(rho), 1.0, rtol=0.0, atol=1e-14):
        raise ConfigurationError("correlation matrix must have unit diagonal")
    n = rho.shape[0]
    L = np.zeros_like(rho)
    for j in range(n):
        pivot = rho[j, j] - L[j, :j] @ L[j, :j]
        if not pivot > 0.0:
            raise DecompositionError(j, float(pivot))
        L[j, j] = np.sqrt(pivot)
        for i in range(j + 1, n):
            L[i, j] = (rho[i, j] - L[i, :j] @ L[j, :j]) / L[j, j]
    return L


@dataclass(frozen=True)
class ForwardModel:
    """Forward SDE ``dX = mu(t, X) dt + sigma(t, X) dW``.

    ``drift(t, X)`` maps an ``(M, q)`` state array to ``(M, q)`` and
    ``diffusion(t, X)`` maps it to ``(M, q, d)``.  For the Black-Scholes
    models the per-asset ``rates``, ``vols`` and correlation ``rho`` are
    kept as well, because the closed-form basis expectations need them.
    """

    q: int
    d: int
    drift: Callable[[float, np.ndarray], np.ndarray]
    diffusion: Callable[[float, np.ndarray], np.ndarray]
    scheme: str = EULER
    rates: Optional[np.ndarray] = None
    vols: Optional[np.ndarray] = None
    rho: Optional[np.ndarray] = None
    chol: Optional[np.ndarray] = None

    def __post_init__(self):
        if self.scheme not in (EULER, EXACT_GBM):
            raise ConfigurationError(f"unknown forward scheme {self.scheme!r}")
        if self.scheme == EXACT_GBM:
            if self.q != self.d:
                raise ConfigurationError("exact GBM requires q == d")
            if self.rates is None or self.vols is None or self.chol is None:
                raise ConfigurationError("exact GBM requires rates, vols and a Cholesky factor")

    @property
    def is_gbm(self) -> bool:
        return self.chol is not None and self.vols is not None

    def drift_at(self, t, X):
        return np.asarray(self.drift(t, X), dtype=float)

    def diffusion_at(self, t, X):
        return np.asarray(self.diffusion(t, X), dtype=float)


def brownian(q: int = 1) -> ForwardModel:
    """``dX = dW`` in ``q`` dimensions, simulated by the (exact) Euler step."""

    def drift(t, X):
        return np.zeros_like(X)

    def diffusion(t, X):
        return np.broadcast_to(np.eye(q), (X.shape[0], q, q))

    return ForwardModel(q=q, d=q, drift=drift, diffusion=diffusion, scheme=EULER)


def euler_model(drift, diffusion, q: int, d: int) -> ForwardModel:
    return ForwardModel(q=q, d=d, drift=drift, diffusion=diffusion, scheme=EULER)


def _gbm_parts(rates, vols, rho):
    vols = np.atleast_1d(np.asarray(vols, dtype=float))
    q = vols.size
    rates = np.broadcast_to(np.asarray(rates, dtype=float), (q,)).copy()
    if rho is None:
        rho = np.eye(q)
    rho = np.asarray(rho, dtype=float)
    if rho.ndim == 0:
        rho = np.full((q, q), float(rho))
        np.fill_diagonal(rho, 1.0)
    chol = cholesky(rho)

    def drift(t, X):
        return X * rates

    def diffusion(t, X):
        return (X * vols)[:, :, None] * chol[None, :, :]

    return q, rates, vols, rho, chol, drift, diffusion


def exact_gbm(rates, vols, rho=None) -> ForwardModel:
    """Correlated Black-Scholes assets with exact log-normal transitions."""
    q, rates, vols, rho, chol, drift, diffusion = _gbm_parts(rates, vols, rho)
    return ForwardModel(q=q, d=q, drift=drift, diffusion=diffusion, scheme=EXACT_GBM,
                        rates=rates, vols=vols, rho=rho, chol=chol)


def euler_gbm(rates, vols, rho=None) -> ForwardModel:
    """Correlated Black-Scholes assets stepped as ``S' = S (1 + mu dt + sigma L dW)``."""
    q, rates, vols, rho, chol, drift, diffusion = _gbm_parts(rates, vols, rho)
    return ForwardModel(q=q, d=q, drift=drift, diffusion=diffusion, scheme=EULER,
                        rates=rates, vols=vols, rho=rho, chol=chol)


def standard_normals(seed: int, path_start: int, path_stop: int, n_steps: int, d: int) -> np.ndarray:
    """Standard normals of shape ``(path_stop - path_start, n_steps, d)``.

    Entry ``(m, k, r)`` is a function of ``(seed, m, k, r)`` only.
    """
    per_path = n_steps * d
    count = (path_stop - path_start) * per_path
    offset = path_start * per_path
    bg = np.random.Philox(key=int(seed))
    bg.advance(offset // 4)
    if offset % 4:
        bg.random_raw(offset % 4)
    raw = bg.random_raw(count)
    # 53-bit midpoint uniforms, strictly inside (0, 1)
    u = ((raw >> np.uint64(11)).astype(float) + 0.5) * 2.0**-53
    return ndtri(u).reshape(path_stop - path_start, n_steps, d)


@dataclass(frozen=True)
class PathCloud:
    """Simulated forward states ``(M, N+1, q)`` and increments ``(M, N, d)``."""

    states: np.ndarray
    increments: np.ndarray
    grid: TimeGrid
    seed: int
    model: Optional[ForwardModel] = field(default=None, compare=False, repr=False)

    @property
    def M(self) -> int:
        return self.states.shape[0]

    def to_csv(self, path) -> None:
        """Debug dump, one row per (path, step); increments empty at the last step."""
        M, n1, q = self.states.shape
        d = self.increments.shape[2]
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow(["path", "step"] + [f"x{i + 1}" for i in range(q)] + [f"dw{r + 1}" for r in range(d)])
            for m in range(M):
                for k in range(n1):
                    inc = [repr(float(v)) for v in self.increments[m, k]] if k < n1 - 1 else [""] * d
                    w.writerow([m, k] + [repr(float(v)) for v in self.states[m, k]] + inc)


def _simulate_block(model, grid, x0, seed, start, stop):
    with np.errstate(over="ignore", invalid="ignore"):
        return _simulate_block_raw(model, grid, x0, seed, start, stop)


def _simulate_block_raw(model, grid, x0, seed, start, stop):
    deltas = grid.deltas
    n = stop - start
    dW = standard_normals(seed, start, stop, grid.N, model.d) * np.sqrt(deltas)[None, :, None]
    X = np.empty((n, grid.N + 1, model.q))
    X[:, 0] = x0
    if model.scheme == EXACT_GBM:
        log_drift = (model.rates - 0.5 * model.vols**2)
        for k in range(grid.N):
            shock = dW[:, k] @ model.chol.T
            X[:, k + 1] = X[:, k] * np.exp(log_drift * deltas[k] + model.vols * shock)
    else:
        for k in range(grid.N):
            t = grid.times[k]
            xk = X[:, k]
            X[:, k + 1] = (xk + model.drift_at(t, xk) * deltas[k]
                           + np.einsum("mqd,md->mq", model.diffusion_at(t, xk), dW[:, k]))
    return X, dW


def simulate_cloud(model: ForwardModel, grid: TimeGrid, x0, M: int, seed: int,
                   threads: int = 1, block: int = 8192) -> PathCloud:
    """Simulate ``M`` forward paths from ``x0``; deterministic in ``seed``.

    The result does not depend on ``threads`` or ``block``.
    """
    if M < 1:
        raise ConfigurationError("need at least one path")
    x0 = np.atleast_1d(np.asarray(x0, dtype=float))
    if x0.shape != (model.q,):
        raise ConfigurationError(f"x0 must have dimension {model.q}")
    bounds = [(s, min(s + block, M)) for s in range(0, M, block)]
    if threads > 1 and len(bounds) > 1:
        with ThreadPoolExecutor(max_workers=threads) as ex:
            parts = list(ex.map(lambda b: _simulate_block(model, grid, x0, seed, *b), bounds))
    else:
        parts = [_simulate_block(model, grid, x0, seed, *b) for b in bounds]
    states = np.concatenate([p[0] for p in parts]) if len(parts) > 1 else parts[0][0]
    incs = np.concatenate([p[1] for p in parts]) if len(parts) > 1 else parts[0][1]
    bad = ~np.isfinite(states)
    if bad.any():
        m, k, _ = np.argwhere(bad)[0]
        raise SimulationOverflowError(int(m), int(k))
    states.setflags(write=False)
    incs.setflags(write=False)
    return PathCloud(states=states, increments=incs, grid=grid, seed=int(seed), model=model)
