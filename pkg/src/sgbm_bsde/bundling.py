"""Equal-partition bundling and bundle-wise least squares."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import ConfigurationError, DataError

# singular values below RANK_TOL * s_max are treated as zero
RANK_TOL = 1e-12


@dataclass(frozen=True)
class BundleAssignment:
    """Partition of ``M`` paths into ``B`` consecutive slices of the key order.

    ``order`` lists path indices sorted by key (ties by index); bundle ``b``
    holds ``order[offsets[b]:offsets[b + 1]]``.
    """

    B: int
    membership: np.ndarray
    order: np.ndarray
    sizes: np.ndarray

    @property
    def offsets(self) -> np.ndarray:
        return np.concatenate([[0], np.cumsum(self.sizes)])

    def members(self, b: int) -> np.ndarray:
        off = self.offsets
        return self.order[off[b]:off[b + 1]]


def bundle_sizes(M: int, B: int) -> np.ndarray:
    """``B`` sizes summing to ``M``; the first ``M mod B`` bundles get one extra path."""
    base, extra = divmod(M, B)
    sizes = np.full(B, base, dtype=int)
    sizes[:extra] += 1
    return sizes


def make_bundles(keys, B: int) -> BundleAssignment:
    keys = np.asarray(keys, dtype=float)
    if keys.ndim != 1:
        raise ConfigurationError("bundle keys must be one scalar per path")
    M = keys.size
    if not 1 <= B <= M:
        raise ConfigurationError(f"bundle count must satisfy 1 <= B <= M, got B={B}, M={M}")
    order = np.argsort(keys, kind="stable")
    sizes = bundle_sizes(M, B)
    membership = np.empty(M, dtype=int)
    membership[order] = np.repeat(np.arange(B), sizes)
    return BundleAssignment(B=B, membership=membership, order=order, sizes=sizes)


def _pinv_stack(A):
    """Minimal-norm pseudo-inverses of a stack ``(b, n, Q)`` via SVD."""
    u, s, vt = np.linalg.svd(A, full_matrices=False)
    smax = s[..., :1]
    keep = s > RANK_TOL * smax
    s_inv = np.divide(1.0, s, out=np.zeros_like(s), where=keep)
    pinv = np.swapaxes(vt, -1, -2) @ (s_inv[..., None] * np.swapaxes(u, -1, -2))
    Q = A.shape[-1]
    with np.errstate(divide="ignore", invalid="ignore"):
        cond = np.where(keep.all(axis=-1) & (s.shape[-1] == Q), smax[..., 0] / s[..., -1], np.inf)
    return pinv, cond


class BundleLeastSquares:
    """Pre-factorised bundle design matrices for one time step.

    Each call to :meth:`solve` regresses one per-path target independently,
    so the coefficients of one target never depend on which other targets
    are regressed.
    """

    def __init__(self, assignment: BundleAssignment, design):
        design = np.asarray(design, dtype=float)
        bad = ~np.isfinite(design).all(axis=1)
        if bad.any():
            raise DataError(int(np.argmax(bad)), "basis value")
        self.assignment = assignment
        self.Q = design.shape[1]
        sizes = assignment.sizes
        n_hi = int(sizes[0])
        r = int(np.sum(sizes == n_hi))
        self._groups = []
        cond = []
        start = 0
        for count, n in ((r, n_hi), (assignment.B - r, n_hi - 1)):
            if count == 0 or n == 0:
                continue
            idx = assignment.order[start:start + count * n].reshape(count, n)
            pinv, c = _pinv_stack(design[idx])
            self._groups.append((idx, pinv))
            cond.append(c)
            start += count * n
        self.condition = np.concatenate(cond)

    def solve(self, target) -> np.ndarray:
        target = np.asarray(target, dtype=float)
        bad = ~np.isfinite(target)
        if bad.any():
            raise DataError(int(np.argmax(bad)), "regression target")
        return np.concatenate([(pinv @ target[idx][..., None])[..., 0] for idx, pinv in self._groups])


def regress_bundle(targets, basis_values, L: float = np.inf):
    """Minimal-norm least-squares coefficients for a single bundle.

    Returns ``(coefficients, norm)``; the caller compares ``norm`` with ``L``.
    """
    targets = np.asarray(targets, dtype=float)
    basis_values = np.atleast_2d(np.asarray(basis_values, dtype=float))
    if targets.size < 1:
        raise ConfigurationError("a bundle needs at least one path")
    assignment = BundleAssignment(B=1, membership=np.zeros(targets.size, dtype=int),
                                  order=np.arange(targets.size), sizes=np.array([targets.size]))
    coef = BundleLeastSquares(assignment, basis_values).solve(targets)[0]
    return coef, float(np.linalg.norm(coef))


@dataclass(frozen=True)
class BundleRegression:
    """Coefficients of one backward step, one row per bundle.

    ``beta`` is ``None`` when the scheme never uses it (``theta2 == 1``).
    ``guarded`` names the coefficient families that enter the update and
    hence the acceptance check.
    """

    alpha: np.ndarray
    gamma: np.ndarray
    beta: Optional[np.ndarray]
    condition: np.ndarray
    guarded: tuple = ("alpha", "beta", "gamma")

    def norms(self) -> dict:
        out = {"alpha": np.linalg.norm(self.alpha, axis=-1),
               "gamma": np.linalg.norm(self.gamma, axis=-1)}
        if self.beta is not None:
            out["beta"] = np.linalg.norm(self.beta, axis=-1)
        return out

    def max_norm(self) -> float:
        norms = self.norms()
        vals = [np.max(norms[name]) for name in self.guarded if name in norms and norms[name].size]
        return float(max(vals)) if vals else 0.0


def check_acceptance(regressions, L: float) -> bool:
    """True iff every guarded coefficient vector of every bundle has norm <= ``L``."""
    if isinstance(regressions, BundleRegression):
        regressions = [regressions]
    if np.isinf(L) and L > 0:
        return True
    return all(reg.max_norm() <= L for reg in regressions)
