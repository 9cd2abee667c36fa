"""Command-line interface: ``netsize run|bounds|verify``.

Exit codes: 0 success, 1 failed verification, 2 bad configuration,
3 simulation aborted. ``NETSIZE_LOG`` sets the log level (e.g. ``INFO``).
"""

from __future__ import annotations

import argparse
import logging
import math
import os
import sys
from pathlib import Path

import numpy as np

from . import analysis, config
from .graph import connected_components, laplacian, spectral
from .io import write_report, write_trajectory_csv, format_report
from .sim.engine import integrate
from .sim.integrators import SimulationError
from .verify import run_verify

log = logging.getLogger("netsize")


def _setup_logging():
    level = os.environ.get("NETSIZE_LOG", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING),
                        format="%(levelname)s %(name)s: %(message)s")


def _load(path) -> "config.Scenario | None":
    try:
        return config.load(path)
    except config.ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return None


def cmd_run(config_path, out_dir) -> int:
    sc = _load(config_path)
    if sc is None:
        return 2
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        print(f"error: cannot create {out}: {exc.strerror}", file=sys.stderr)
        return 2
    try:
        samples, report = integrate(sc)
    except SimulationError as exc:
        print(f"simulation aborted: {exc}", file=sys.stderr)
        return 3
    write_trajectory_csv(out / "trajectory.csv", samples, sc.agents)
    write_report(out, report)
    sys.stdout.write(format_report(report))
    return 0


def bounds_lines(sc) -> list[str]:
    g = sc.initial_graph()
    st = sc.initial_state.build(len(sc.agents))
    lines = []
    for k, c in enumerate(connected_components(g)):
        m = list(c.members)
        L = laplacian(g, c)
        sp = spectral(L)
        eq = analysis.max_id_equilibrium(c, sp, sc.gamma, st.z[m], st.mu[m])
        se = analysis.size_equilibrium(c, L, st.x[m], eq.eta_norm0, eq.t1)
        pc = se.constants
        xs = np.array2string(se.x_star, precision=6, separator=", ", max_line_width=10_000)
        t2 = "+inf (vacuous)" if math.isinf(pc.t2) else f"{pc.t2:.6g}"
        lines += [
            f"component {k}: N={c.local_n} a_max={c.a_max} leader ordinal={c.leader_ordinal}",
            f"  zbar*  = {eq.zbar_star:.6f}",
            f"  x*     = {xs}",
            f"  lambda2 = {sp.lambda2:.6g}" if c.local_n > 1 else "  lambda2 = n/a (single agent)",
            f"  lambda_min(J + a_max^3 L) = {se.lambda_min_JL:.6g}",
            f"  beta   = {eq.beta:.6g}",
            f"  |eta0| = {eq.eta_norm0:.6g}",
            f"  T1     = {eq.t1:.6g}",
            f"  log c  = {pc.log_c:.6g}",
            f"  T2     = {t2}",
        ]
    return lines


def cmd_bounds(config_path) -> int:
    sc = _load(config_path)
    if sc is None:
        return 2
    print("\n".join(bounds_lines(sc)))
    return 0


def cmd_verify(seed: int = 0, cases: int = 200, lambda2_bound_scale: float = 1.0) -> int:
    if cases == 0:
        print("warning: --cases 0 runs no checks; passing vacuously", file=sys.stderr)
    results = run_verify(seed, cases, lambda2_bound_scale)
    width = max(len(r.name) for r in results)
    for r in results:
        status = "PASS" if r.passed else "FAIL"
        print(f"{r.name:<{width}}  {status}  {r.cases:>5} cases  {r.elapsed:6.2f}s")
    failed = [r for r in results if not r.passed]
    for r in failed:
        print(f"counterexample [{r.name}]: {r.counterexample}")
    return 1 if failed else 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="netsize", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)
    r = sub.add_parser("run", help="simulate a scenario and write CSV + reports")
    r.add_argument("config")
    r.add_argument("--out", required=True, help="output directory")
    b = sub.add_parser("bounds", help="print per-component equilibria and bounds")
    b.add_argument("config")
    v = sub.add_parser("verify", help="run the randomised property suites")
    v.add_argument("--seed", type=int, default=0)
    v.add_argument("--cases", type=int, default=200)
    # negative-path hook: scales the algebraic-connectivity lower bound
    v.add_argument("--lambda2-bound-scale", type=float, default=1.0, help=argparse.SUPPRESS)
    return p


def main(argv=None) -> int:
    _setup_logging()
    args = build_parser().parse_args(argv)
    if args.command == "run":
        return cmd_run(args.config, args.out)
    if args.command == "bounds":
        return cmd_bounds(args.config)
    if args.cases < 0:
        print("error: --cases must be >= 0", file=sys.stderr)
        return 2
    return cmd_verify(args.seed, args.cases, args.lambda2_bound_scale)


if __name__ == "__main__":
    sys.exit(main())
