"""Predefined test cases, repeated runs and error tables."""

from __future__ import annotations

import csv
import io
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Callable, Optional

import numpy as np

from .basis import GEOMETRIC_MEAN, MONOMIAL, WEIGHTED_SUM, BasisSpec
from .errors import ConfigurationError, SGBMError
from .oracles import ARITHMETIC_BASKET_REFERENCE, example1_exact, geometric_basket_put
from .problems import (DAX_WEIGHTS, arithmetic_basket_problem, example1_problem,
                       geometric_basket_problem)
from .solver import SchemeConfig, solve

CSV_COLUMNS = ("case", "J", "M", "N", "B", "L", "runs", "successes", "mean_abs_error_y0",
               "mean_abs_error_z0", "total_variation_per_successful_run", "wall_ms")


@dataclass(frozen=True)
class CaseSetup:
    """Everything needed to run one (case, J) cell."""

    M: int
    N: int
    B: int
    L: float
    problem: object
    config: SchemeConfig
    y_ref: float
    z_ref: Optional[np.ndarray] = None


@dataclass(frozen=True)
class ExperimentCase:
    case_id: str
    theta1: float
    theta2: float
    picard: Optional[int]
    j_range: tuple
    description: str
    build: Callable[["ExperimentCase", int], CaseSetup] = field(repr=False, compare=False)

    def setup(self, J: int, bound: Optional[float] = None) -> CaseSetup:
        if J not in range(self.j_range[0], self.j_range[1] + 1):
            raise ConfigurationError(
                f"J={J} outside the tabulated range {self.j_range[0]}..{self.j_range[1]} of case {self.case_id}")
        s = self.build(self, J)
        if bound is not None:
            s = replace(s, L=bound, config=replace(s.config, bound=bound))
        return s


def _example1(L):
    def build(case, J):
        M, N, B = 2 ** (2 * J), 2 ** J, 2 ** J
        problem = example1_problem(N)
        cfg = SchemeConfig(case.theta1, case.theta2, BasisSpec(MONOMIAL, 3), bundles=B,
                           picard=case.picard or 1, bound=L, sort_key="basis")
        y, z = example1_exact(0.0, 0.0)
        return CaseSetup(M, N, B, L, problem, cfg, float(y), np.array([z]))
    return build


def _arithmetic(K):
    def build(case, J):
        M, N, B = 2 ** 12, 10, 2 ** (2 * J)
        problem = arithmetic_basket_problem(N=N)
        cfg = SchemeConfig(case.theta1, case.theta2, BasisSpec(WEIGHTED_SUM, K, q=5, weights=DAX_WEIGHTS),
                           bundles=B, picard=case.picard or 1, bound=math.inf, sort_key="basis")
        return CaseSetup(M, N, B, math.inf, problem, cfg, ARITHMETIC_BASKET_REFERENCE)
    return build


def _geometric(case, J):
    M, N, B, q = 2 ** 12, 20, 16, J
    problem = geometric_basket_problem(q, N=N)
    cfg = SchemeConfig(case.theta1, case.theta2, BasisSpec(GEOMETRIC_MEAN, 3, q=q), bundles=B,
                       picard=case.picard or 1, bound=math.inf, sort_key="basis")
    ref = geometric_basket_put(40.0, 40.0, 0.06, np.full(q, 0.2), 0.25, 1.0)
    return CaseSetup(M, N, B, math.inf, problem, cfg, ref)


_EX1 = "trigonometric FBSDE, basis {1, x, x^2}"
CASES = {
    "1a": ExperimentCase("1a", 0.0, 1.0, None, (2, 8), _EX1 + ", explicit, L=100", _example1(100.0)),
    "1b": ExperimentCase("1b", 0.0, 1.0, None, (2, 8), _EX1 + ", explicit, L=1e4", _example1(1e4)),
    "1c": ExperimentCase("1c", 0.0, 1.0, None, (2, 8), _EX1 + ", explicit, no bound", _example1(math.inf)),
    "1d": ExperimentCase("1d", 0.5, 0.5, 4, (2, 8), _EX1 + ", Crank-Nicolson, L=100", _example1(100.0)),
    "1e": ExperimentCase("1e", 0.5, 0.5, 4, (2, 8), _EX1 + ", Crank-Nicolson, L=1e4", _example1(1e4)),
    "1f": ExperimentCase("1f", 0.5, 0.5, 4, (2, 8), _EX1 + ", Crank-Nicolson, no bound", _example1(math.inf)),
    "2.1a": ExperimentCase("2.1a", 0.5, 0.5, 4, (0, 2), "arithmetic basket put, Crank-Nicolson, K=3",
                           _arithmetic(3)),
    "2.1b": ExperimentCase("2.1b", 0.0, 1.0, None, (0, 2), "arithmetic basket put, explicit, K=2",
                           _arithmetic(2)),
    "2.2a": ExperimentCase("2.2a", 0.0, 1.0, None, (1, 15), "geometric basket put, explicit, q=J",
                           _geometric),
    "2.2b": ExperimentCase("2.2b", 0.5, 0.5, 4, (1, 15), "geometric basket put, Crank-Nicolson, q=J",
                           _geometric),
}


def get_case(case_id: str) -> ExperimentCase:
    try:
        return CASES[case_id]
    except KeyError:
        raise ConfigurationError(f"unknown case {case_id!r}; known cases: {', '.join(CASES)}") from None


@dataclass(frozen=True)
class RunRecord:
    seed: int
    y0: float
    z0: Optional[np.ndarray]
    accepted: bool
    error: float
    failure: Optional[str] = None


@dataclass
class RunStatistics:
    case: str
    J: int
    M: int
    N: int
    B: int
    L: float
    records: list
    wall_ms: float = 0.0
    y_ref: float = 0.0
    z_ref: Optional[np.ndarray] = None

    @property
    def runs(self) -> int:
        return len(self.records)

    @property
    def successful(self) -> list:
        return [r for r in self.records if r.accepted]

    @property
    def successes(self) -> int:
        return len(self.successful)

    @property
    def mean_abs_error_y0(self) -> Optional[float]:
        """Error of the averaged estimate, ``|mean(y0) - reference|`` over successful runs."""
        ok = self.successful
        if not ok:
            return None
        return abs(math.fsum(r.y0 for r in ok) / len(ok) - self.y_ref)

    @property
    def mean_abs_error_z0(self) -> Optional[float]:
        ok = self.successful
        if not ok or self.z_ref is None:
            return None
        mean = np.sum([r.z0 for r in ok], axis=0) / len(ok)
        return float(np.linalg.norm(mean - self.z_ref))

    @property
    def total_variation_per_successful_run(self) -> Optional[float]:
        ok = self.successful
        if not ok:
            return None
        return math.fsum(r.error for r in ok) / len(ok)


def _single_run(setup: CaseSetup, seed: int) -> RunRecord:
    try:
        res = solve(setup.problem, setup.config, setup.M, seed)
    except SGBMError as exc:
        return RunRecord(seed=seed, y0=math.nan, z0=None, accepted=False, error=math.nan, failure=str(exc))
    return RunRecord(seed=seed, y0=res.y0, z0=res.z0, accepted=res.accepted,
                     error=abs(res.y0 - setup.y_ref))


def run_case(case_id: str, J: int, runs: int = 10, base_seed: int = 0, threads: int = 1,
             bound: Optional[float] = None) -> RunStatistics:
    """Solve one (case, J) cell ``runs`` times with seeds ``base_seed + i``.

    ``bound`` overrides the case's coefficient bound L.
    """
    setup = get_case(case_id).setup(J, bound=bound)
    seeds = [base_seed + i for i in range(runs)]
    start = time.perf_counter()
    if threads > 1 and runs > 1:
        with ThreadPoolExecutor(max_workers=threads) as ex:
            records = list(ex.map(lambda s: _single_run(setup, s), seeds))
    else:
        records = [_single_run(setup, s) for s in seeds]
    wall = (time.perf_counter() - start) * 1000.0
    return RunStatistics(case=case_id, J=J, M=setup.M, N=setup.N, B=setup.B, L=setup.L,
                         records=records, wall_ms=wall, y_ref=setup.y_ref, z_ref=setup.z_ref)


def _num(v) -> str:
    return "" if v is None else repr(float(v))


def _bound(L) -> str:
    return "inf" if math.isinf(L) else f"{L:g}"


def report_rows(stats) -> list:
    rows = []
    for s in sorted(stats, key=lambda s: (s.case, s.J)):
        rows.append([s.case, str(s.J), str(s.M), str(s.N), str(s.B), _bound(s.L), str(s.runs),
                     str(s.successes), _num(s.mean_abs_error_y0), _num(s.mean_abs_error_z0),
                     _num(s.total_variation_per_successful_run), str(int(round(s.wall_ms)))])
    return rows


def to_csv(stats) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    w.writerows(report_rows(stats))
    return buf.getvalue()


def format_table(stats) -> str:
    """Aligned plain-text rendering; zero-success cells read NA."""
    rows = [[c if c != "" else "NA" for c in row] for row in report_rows(stats)]
    for row in rows:
        for i in (8, 9, 10):
            if row[i] not in ("NA",):
                row[i] = f"{float(row[i]):.6g}"
    header = list(CSV_COLUMNS)
    widths = [max(len(header[i]), *(len(r[i]) for r in rows)) if rows else len(header[i])
              for i in range(len(header))]
    lines = ["  ".join(h.rjust(w) for h, w in zip(header, widths))]
    lines.append("  ".join("-" * w for w in widths))
    lines += ["  ".join(c.rjust(w) for c, w in zip(r, widths)) for r in rows]
    return "\n".join(lines) + "\n"


def emit_report(stats, out=None, fmt: str = "csv") -> str:
    """Render ``stats``; when ``out`` is given the CSV is written there as UTF-8."""
    if not stats:
        raise ConfigurationError("report needs at least one cell")
    text = to_csv(stats)
    if out is not None:
        with open(out, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    return text if fmt == "csv" else format_table(stats)
