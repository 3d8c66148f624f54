"""Command-line entry point: ``sgbm run | solve | list-cases``.

Exit codes: 0 success, 2 configuration error, 3 every run rejected.
"""

from __future__ import annotations

import argparse
import json
import logging
import re
import sys

from .config import load_config
from .errors import ConfigurationError, SGBMError
from .experiments import CASES, emit_report, get_case, run_case
from .solver import solve

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_REJECTED = 3

log = logging.getLogger("sgbm_bsde")


def parse_j(spec: str) -> list:
    """``"7"``, ``"3-7"``, ``"3..7"`` or ``"2,4,6"`` to a list of ints."""
    out = []
    for part in spec.split(","):
        part = part.strip()
        m = re.fullmatch(r"(\d+)\s*(?:-|\.\.)\s*(\d+)", part)
        if m:
            lo, hi = int(m.group(1)), int(m.group(2))
            if hi < lo:
                raise ConfigurationError(f"empty J range {part!r}")
            out.extend(range(lo, hi + 1))
        elif part.isdigit():
            out.append(int(part))
        else:
            raise ConfigurationError(f"cannot parse J specification {spec!r}")
    return out


def _cmd_run(args) -> int:
    case_ids = [c.strip() for c in args.case.split(",") if c.strip()]
    js = parse_j(args.j)
    cells = []
    for cid in case_ids:
        case = get_case(cid)
        for J in js:
            case.setup(J)  # validate the whole request before computing anything
            cells.append((cid, J))
    if args.runs < 0:
        raise ConfigurationError("--runs must be non-negative")
    stats = []
    for cid, J in cells:
        log.info("running case %s, J=%d, %d runs", cid, J, args.runs)
        stats.append(run_case(cid, J, runs=args.runs, base_seed=args.seed, threads=args.threads))
    try:
        text = emit_report(stats, out=args.out, fmt=args.format)
    except OSError as exc:
        print(f"error: cannot write {args.out}: {exc}", file=sys.stderr)
        return 1
    sys.stdout.write(text)
    total = sum(s.runs for s in stats)
    if total > 0 and sum(s.successes for s in stats) == 0:
        return EXIT_REJECTED
    return EXIT_OK


def _cmd_solve(args) -> int:
    job = load_config(args.config)
    res = solve(job.problem, job.config, job.M, job.seed, threads=args.threads)
    out = {
        "y0": res.y0,
        "z0": [float(v) for v in res.z0],
        "accepted": res.accepted,
        "max_coefficient_norm": res.max_norm,
        "mesh_ratio": job.problem.grid.mesh_ratio,
    }
    if job.reference is not None:
        out["reference_y0"] = job.reference
        out["abs_error_y0"] = abs(res.y0 - job.reference)
    if job.z_reference is not None:
        out["reference_z0"] = job.z_reference
    print(json.dumps(out, indent=2, allow_nan=True))
    return EXIT_OK if res.accepted else EXIT_REJECTED


def _cmd_list(args) -> int:
    for cid, case in CASES.items():
        lo, hi = case.j_range
        picard = "-" if case.picard is None else str(case.picard)
        print(f"{cid:5s} theta=({case.theta1:g}, {case.theta2:g}) I={picard:2s} J={lo}..{hi}  {case.description}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="sgbm", description="SGBM solver for decoupled FBSDEs")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run predefined test cases")
    run.add_argument("--case", required=True, help="case id, or comma-separated ids")
    run.add_argument("--j", required=True, help="J value, range (3-7) or list (2,4)")
    run.add_argument("--runs", type=int, default=10)
    run.add_argument("--seed", type=int, default=0)
    run.add_argument("--out", default=None, help="CSV output path")
    run.add_argument("--threads", type=int, default=1)
    run.add_argument("--format", choices=("csv", "table"), default="csv")
    run.set_defaults(func=_cmd_run)

    sol = sub.add_parser("solve", help="solve a problem described by a JSON config")
    sol.add_argument("--config", required=True)
    sol.add_argument("--threads", type=int, default=1)
    sol.set_defaults(func=_cmd_solve)

    lst = sub.add_parser("list-cases", help="list predefined test cases")
    lst.set_defaults(func=_cmd_list)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except ConfigurationError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except SGBMError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_REJECTED


if __name__ == "__main__":
    sys.exit(main())
