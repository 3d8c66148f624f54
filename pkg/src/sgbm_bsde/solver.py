"""Backward SGBM recursion for decoupled FBSDEs under a theta-scheme."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional, Union

import numpy as np

from .basis import BasisSpec, cond_expect, eval_basis
from .bundling import BundleLeastSquares, BundleRegression, check_acceptance, make_bundles
from .errors import ConfigurationError, StepFailureError
from .forward import ForwardModel, PathCloud, TimeGrid, simulate_cloud


@dataclass(frozen=True)
class BsdeProblem:
    """``dY = -f(t, X, Y, Z) dt + Z dW``, ``Y_T = terminal(X_T)``.

    Vectorised callables: ``driver(t, X[M, q], Y[M], Z[M, d]) -> [M]``,
    ``terminal(X[M, q]) -> [M]`` and ``terminal_grad(X[M, q]) -> [M, q]``.
    ``lipschitz`` is informational only; it is never enforced.
    """

    model: ForwardModel
    grid: TimeGrid
    driver: Callable
    terminal: Callable
    terminal_grad: Callable
    x0: np.ndarray
    lipschitz: Optional[float] = None

    def __post_init__(self):
        x0 = np.atleast_1d(np.asarray(self.x0, dtype=float))
        if x0.shape != (self.model.q,):
            raise ConfigurationError(f"x0 must have dimension {self.model.q}")
        object.__setattr__(self, "x0", x0)


@dataclass(frozen=True)
class SchemeConfig:
    theta1: float
    theta2: float
    basis: BasisSpec
    bundles: int = 1
    picard: int = 1
    bound: float = np.inf
    sort_key: Union[str, Callable] = "basis"
    # verification only: regress beta even when theta2 == 1
    force_beta: bool = False

    def __post_init__(self):
        if not 0.0 <= self.theta1 <= 1.0:
            raise ConfigurationError("theta1 must lie in [0, 1]")
        if not 0.0 < self.theta2 <= 1.0:
            raise ConfigurationError("theta2 must lie in (0, 1]")
        if self.theta1 > 0 and self.picard < 1:
            raise ConfigurationError("implicit schemes need at least one Picard iteration")
        if self.bundles < 1:
            raise ConfigurationError("need at least one bundle")
        if not self.bound >= 0:
            raise ConfigurationError("coefficient bound L must be non-negative")

    @property
    def uses_beta(self) -> bool:
        return self.theta2 != 1.0


def sort_keys(config: SchemeConfig, X) -> np.ndarray:
    """Scalar bundling key per path."""
    key = config.sort_key
    if callable(key):
        return np.asarray(key(X), dtype=float)
    if key == "basis":
        return config.basis.feature(X)
    if key == "first_component":
        return np.asarray(X, dtype=float)[:, 0]
    raise ConfigurationError(f"unknown sort key {key!r}")


@dataclass
class StepDiagnostics:
    k: int
    bundles: int
    max_norm: float
    accepted: bool
    condition: np.ndarray


@dataclass
class SolverResult:
    y0: float
    z0: np.ndarray
    accepted: bool
    steps: list = field(default_factory=list)
    # per-step path values, only when requested
    history: Optional[dict] = None

    @property
    def max_norm(self) -> float:
        return max((s.max_norm for s in self.steps), default=0.0)


def terminal_values(problem: BsdeProblem, cloud: PathCloud):
    """``Y_N = Phi(X_N)`` and ``Z_N = grad Phi(X_N) sigma(t_N, X_N)``."""
    XN = cloud.states[:, -1]
    Y = np.asarray(problem.terminal(XN), dtype=float)
    grad = np.asarray(problem.terminal_grad(XN), dtype=float).reshape(XN.shape)
    sigma = problem.model.diffusion_at(cloud.grid.T, XN)
    Z = np.einsum("mq,mqd->md", grad, sigma)
    return Y, Z


def _check_finite(k, assignment, *arrays):
    for a in arrays:
        a = a.reshape(a.shape[0], -1)
        bad = ~np.isfinite(a).all(axis=1)
        if bad.any():
            m = int(np.argmax(bad))
            raise StepFailureError(k, int(assignment.membership[m]), m)


def backward_step(k: int, Y, Z, F, cloud: PathCloud, config: SchemeConfig, problem: BsdeProblem,
                  bundles: Optional[int] = None):
    """One step ``k+1 -> k`` of the recursion.

    ``Y`` ``(M,)``, ``Z`` ``(M, d)`` and ``F = f(t_{k+1}, X_{k+1}, Y, Z)``
    ``(M,)`` are the per-path values at ``t_{k+1}``.  Returns
    ``(Y_k, Z_k, regression, accepted)``.
    """
    model = problem.model
    grid = cloud.grid
    t, dt = grid.times[k], grid.deltas[k]
    th1, th2 = config.theta1, config.theta2
    Xk = cloud.states[:, k]
    Xn = cloud.states[:, k + 1]
    B = config.bundles if bundles is None else bundles

    assignment = make_bundles(sort_keys(config, Xk), B)
    lsq = BundleLeastSquares(assignment, eval_basis(config.basis, Xn))
    alpha = lsq.solve(Y)
    gamma = lsq.solve(F)
    d = Z.shape[1]
    beta = None
    if config.uses_beta or config.force_beta:
        beta = np.stack([lsq.solve(Z[:, r]) for r in range(d)], axis=1)
    guarded = ("alpha", "beta", "gamma") if config.uses_beta else ("alpha", "gamma")
    reg = BundleRegression(alpha=alpha, gamma=gamma, beta=beta, condition=lsq.condition, guarded=guarded)

    ce = cond_expect(config.basis, model, t, dt, Xk)
    e_p, e_pdw = ce.e_p, ce.e_pdw
    b_of = assignment.membership
    a_m = alpha[b_of]
    g_m = gamma[b_of]

    Zk = np.einsum("mdq,mq->md", e_pdw, a_m + (1.0 - th2) * dt * g_m) / th2
    if config.uses_beta:
        Zk = Zk - (1.0 - th2) / th2 * np.einsum("mq,mdq->md", e_p, beta[b_of])
    h = np.einsum("mq,mq->m", e_p, a_m + dt * (1.0 - th1) * g_m)
    if th1 == 0.0:
        Yk = h
    else:
        Yk = np.einsum("mq,mq->m", e_p, a_m)
        for _ in range(config.picard):
            Yk = dt * th1 * np.asarray(problem.driver(t, Xk, Yk, Zk), dtype=float) + h
    _check_finite(k, assignment, Yk, Zk)
    return Yk, Zk, reg, check_acceptance(reg, config.bound)


def solve_cloud(problem: BsdeProblem, config: SchemeConfig, cloud: PathCloud,
                keep_history: bool = False) -> SolverResult:
    """Run the backward recursion on an existing path cloud."""
    if config.basis.q != problem.model.q:
        raise ConfigurationError("basis dimension does not match the forward model")
    grid = cloud.grid
    N = grid.N
    Y, Z = terminal_values(problem, cloud)
    _check_finite(N, make_bundles(np.zeros(cloud.M), 1), Y, Z)
    history = {"Y": [None] * (N + 1), "Z": [None] * (N + 1)} if keep_history else None
    if history is not None:
        history["Y"][N], history["Z"][N] = Y, Z
    steps = []
    accepted = True
    for k in range(N - 1, -1, -1):
        F = np.asarray(problem.driver(grid.times[k + 1], cloud.states[:, k + 1], Y, Z), dtype=float)
        # every path starts at x0, so any bundling of t_0 is degenerate
        B = 1 if k == 0 else min(config.bundles, cloud.M)
        Y, Z, reg, ok = backward_step(k, Y, Z, F, cloud, config, problem, bundles=B)
        accepted = accepted and ok
        steps.append(StepDiagnostics(k=k, bundles=B, max_norm=reg.max_norm(), accepted=ok,
                                     condition=reg.condition))
        if history is not None:
            history["Y"][k], history["Z"][k] = Y, Z
    return SolverResult(y0=float(Y[0]), z0=np.array(Z[0]), accepted=accepted, steps=steps,
                        history=history)


def solve(problem: BsdeProblem, config: SchemeConfig, M: int, seed: int,
          threads: int = 1, keep_history: bool = False) -> SolverResult:
    """Simulate ``M`` forward paths once, then recurse backward to ``(y0, z0)``."""
    cloud = simulate_cloud(problem.model, problem.grid, problem.x0, M, seed, threads=threads)
    return solve_cloud(problem, config, cloud, keep_history=keep_history)
