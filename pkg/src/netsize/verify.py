"""Randomised property suites behind ``netsize verify``.

Every suite draws its cases from one seeded generator, so a failure is
reproducible from ``(seed, cases)`` alone.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass

import numpy as np

from . import analysis
from .graph import (NetworkGraph, connected_components, laplacian, spectral,
                    zero_eigenvalue_count, zero_threshold)
from .protocol import h_vector, round_nearest
from .sim.integrators import (AffinePropagator, ComponentSystem, IntegratorSettings,
                              adaptive_propagate)


@dataclass
class SuiteResult:
    name: str
    cases: int
    failures: int = 0
    counterexample: str | None = None
    elapsed: float = 0.0

    @property
    def passed(self) -> bool:
        return self.failures == 0

    def fail(self, msg: str):
        self.failures += 1
        if self.counterexample is None:
            self.counterexample = msg


def random_connected_graph(rng: np.random.Generator, n: int, max_id: int = 50,
                           extra_p: float | None = None) -> NetworkGraph:
    """Random spanning tree plus random chords, with distinct ids in ``[1, max_id]``."""
    ids = rng.choice(np.arange(1, max_id + 1), size=n, replace=False)
    order = rng.permutation(n)
    edges = set()
    for k in range(1, n):
        i, j = int(order[k]), int(order[rng.integers(0, k)])
        edges.add((min(i, j), max(i, j)))
    p = rng.uniform(0.0, 0.5) if extra_p is None else extra_p
    for i in range(n):
        for j in range(i + 1, n):
            if rng.random() < p:
                edges.add((i, j))
    return NetworkGraph.from_identifiers(ids.tolist(), sorted(edges))


def random_disconnected_graph(rng: np.random.Generator, max_id: int = 60) -> NetworkGraph:
    parts = [random_connected_graph(rng, int(rng.integers(1, 6)), max_id=max_id)
             for _ in range(int(rng.integers(2, 5)))]
    total = sum(p.n for p in parts)
    ids = rng.choice(np.arange(1, max_id + 1), size=total, replace=False).tolist()
    edges, off = [], 0
    for p in parts:
        edges += [(i + off, j + off) for i, j in p.edges]
        off += p.n
    return NetworkGraph.from_identifiers(ids, edges)


def _case(g: NetworkGraph) -> str:
    return f"ids={g.identifiers.tolist()} edges={sorted(g.edges)}"


def spectral_suite(rng, cases: int, lambda2_bound_scale: float = 1.0) -> SuiteResult:
    """Laplacian bounds; ``lambda2_bound_scale`` != 1 is a negative-path hook."""
    res = SuiteResult("spectral", cases)
    for _ in range(cases):
        n = int(rng.integers(2, 13))
        g = random_connected_graph(rng, n)
        sp = spectral(laplacian(g))
        L, R = sp.laplacian, sp.R
        tol = 1e-9 * n
        checks = {
            "lambda1 ~ 0": sp.eigenvalues[0] <= zero_threshold(n),
            "lambda2 > 4/N^2": sp.lambda2 > lambda2_bound_scale * 4.0 / n ** 2,
            "||L|| <= N": np.linalg.norm(L, 2) <= n * (1 + 1e-12),
            "1'R = 0": np.abs(R.sum(axis=0)).max() <= tol,
            "R'R = I": np.abs(R.T @ R - np.eye(n - 1)).max() <= tol,
            "R'LR = Lambda": np.abs(R.T @ L @ R - sp.Lambda).max() <= tol,
        }
        bad = [k for k, ok in checks.items() if not ok]
        if bad:
            res.fail(f"{', '.join(bad)} failed for {_case(g)} (lambda2={sp.lambda2:.6g})")
    for _ in range(max(1, cases // 4) if cases else 0):
        g = random_disconnected_graph(rng)
        k = len(connected_components(g))
        z = zero_eigenvalue_count(laplacian(g))
        if z != k:
            res.fail(f"{z} zero eigenvalues but {k} components for {_case(g)}")
    return res


def equilibrium_suite(rng, cases: int) -> SuiteResult:
    res = SuiteResult("equilibrium", cases)
    for _ in range(cases):
        n = int(rng.integers(2, 13))
        g = random_connected_graph(rng, n)
        c = connected_components(g)[0]
        a = c.ids
        zb = analysis.zbar_star(c)
        root = analysis.solve_g_root(a, n)
        h = h_vector(np.full(n, zb), a)
        checks = {
            "zbar* in (a_max - 1/4, a_max)": c.a_max - 0.25 < zb < c.a_max,
            "|g(zbar*)| <= 1e-9": abs(analysis.g_scalar(zb, a)) <= 1e-9,
            "root agrees": abs(root - zb) <= 1e-10,
            "cost argmin": abs(analysis.cost_argmin_grid(a) - zb) <= 1e-3,
            "H(1 zbar*) leader-only": np.count_nonzero(h) == 1 and h[c.leader_position] > 0,
            "round(zbar*) = a_max": round_nearest(zb) == c.a_max,
        }
        bad = [k for k, ok in checks.items() if not ok]
        if bad:
            res.fail(f"{', '.join(bad)} failed for {_case(g)}")
    return res


def size_suite(rng, cases: int) -> SuiteResult:
    res = SuiteResult("size-equilibrium", cases)
    for _ in range(cases):
        n = int(rng.integers(2, 13))
        g = random_connected_graph(rng, n)
        c = connected_components(g)[0]
        L = laplacian(g)
        xs = analysis.x_star(c, L)
        lmin = analysis.lambda_min_JL(c, L)
        checks = {
            "x*[leader] = N": abs(xs[c.leader_position] - n) <= 1e-8,
            "|x* - N| < sqrt2/4": np.abs(xs - n).max() < math.sqrt(2) / 4,
            "lambda_min >= 1/(4N)": lmin >= 1.0 / (4 * n),
        }
        bad = [k for k, ok in checks.items() if not ok]
        if bad:
            res.fail(f"{', '.join(bad)} failed for {_case(g)}")
    return res


def secant_suite(rng, cases: int) -> SuiteResult:
    res = SuiteResult("secant-factorisation", cases)
    for _ in range(cases):
        n = int(rng.integers(1, 13))
        ids = rng.choice(np.arange(1, 51), size=n, replace=False)
        amax = ids.max()
        w = rng.uniform(-2 * amax, 2 * amax, n)
        ws = rng.uniform(-2 * amax, 2 * amax, n)
        # exercise the equal-argument and same-side branches too
        if rng.random() < 0.2:
            ws[: n // 2] = w[: n // 2]
        rep = analysis.check_secant(w, ws, ids)
        if not rep.ok:
            res.fail(f"ids={ids.tolist()} w={w.tolist()} w*={ws.tolist()}: {rep}")
    return res


def settled_segment(rng, n: int | None = None, max_id: int = 50):
    """Random component plus a state inside the settled affine regime."""
    while True:
        n_ = int(rng.integers(2, 9)) if n is None else n
        g = random_connected_graph(rng, n_, max_id=max_id)
        c = connected_components(g)[0]
        L = laplacian(g)
        sp = spectral(L)
        gamma = float(rng.uniform(1.0, 10.0))
        zb = analysis.zbar_star(c)
        margin = c.a_max - zb
        z = zb + rng.uniform(-0.1, 0.1, n_) * margin
        mu = sp.R @ (analysis.mu_tilde_star(c, sp, gamma)
                     + rng.uniform(-0.1, 0.1, n_ - 1) * margin) + rng.normal()
        x = analysis.x_star(c, L) + rng.uniform(-1.0, 1.0, n_) * n_
        system = ComponentSystem(c.ids, L, gamma)
        y = np.concatenate([z, mu, x])
        if AffinePropagator(system).propagate(y, 1.0, 32) is not None:
            return system, y


def integrator_suite(rng, cases: int, length: float = 1.0, samples: int = 10,
                     tol: float = 1e-6) -> SuiteResult:
    res = SuiteResult("integrator-equivalence", cases)
    settings = IntegratorSettings(rel_tol=1e-10, abs_tol=1e-12, max_step=0.1)
    for _ in range(cases):
        system, y0 = settled_segment(rng)
        prop = AffinePropagator(system)
        ya = yb = y0
        h = 1e-4
        dt = length / samples
        worst = 0.0
        for k in range(samples):
            ya = prop.propagate(ya, dt, 4)
            if ya is None:
                res.fail(f"regime left mid-segment for ids={system.ids.tolist()}")
                break
            yb, h = adaptive_propagate(system, yb, k * dt, (k + 1) * dt, h, settings)
            worst = max(worst, float(np.abs(ya - yb).max()))
        if worst > tol:
            res.fail(f"fast/adaptive mismatch {worst:.3e} for ids={system.ids.tolist()}")
    return res


def run_verify(seed: int = 0, cases: int = 200, lambda2_bound_scale: float = 1.0,
               integrator_cases: int | None = None) -> list[SuiteResult]:
    rng = np.random.default_rng(seed)
    out = []
    jobs = [
        lambda: spectral_suite(rng, cases, lambda2_bound_scale),
        lambda: equilibrium_suite(rng, cases),
        lambda: size_suite(rng, cases),
        lambda: secant_suite(rng, 5 * cases),
        lambda: integrator_suite(rng, min(cases, 20) if integrator_cases is None
                                 else integrator_cases),
    ]
    for job in jobs:
        t = time.perf_counter()
        r = job()
        r.elapsed = time.perf_counter() - t
        out.append(r)
    return out
