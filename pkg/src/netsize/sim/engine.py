"""Scenario integration with topology events, settling detection and
live monitoring of the convergence envelopes."""

from __future__ import annotations

import logging
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .. import analysis
from ..graph import ComponentView, NetworkGraph, connected_components, laplacian, spectral
from ..protocol import Params, ProtocolState, round_nearest
from .integrators import (AffinePropagator, ComponentSystem, IntegratorSettings,
                          SimulationError, StepStats, adaptive_propagate, adaptive_step)
from .scenario import Scenario

log = logging.getLogger(__name__)

ENVELOPE_RTOL = 1e-9


@dataclass(frozen=True)
class TrajectorySample:
    """Network-wide snapshot; arrays are indexed by agent ordinal."""

    t: float
    z: np.ndarray
    mu: np.ndarray
    x: np.ndarray
    u: np.ndarray
    x_rounded: np.ndarray
    component_id: np.ndarray


@dataclass
class ComponentReport:
    component_id: int
    members: list[int]
    identifiers: list[int]
    local_n: int
    a_max: int
    leader_ordinal: int
    zbar_star: float
    lambda2: float
    beta: float
    eta0: float
    t1: float
    log_c: float
    t2: float
    u_settle: float | None = None
    x_settle: float | None = None
    max_id_envelope_violations: int = 0
    size_envelope_violations: int = 0
    size_envelope_checked: bool = False
    samples: int = 0
    estimate: int | None = None
    max_id_estimate: int | None = None

    @property
    def vacuous_t2(self) -> bool:
        return math.isinf(self.t2)


@dataclass
class WindowReport:
    t_start: float
    t_end: float
    components: list[ComponentReport]
    mu_sum_start: float
    mu_sum_max_drift: float = 0.0


@dataclass
class RunReport:
    windows: list[WindowReport]
    stats: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        def clean(v):
            if isinstance(v, float) and not math.isfinite(v):
                return "inf" if v > 0 else ("-inf" if v < 0 else "nan")
            if isinstance(v, dict):
                return {k: clean(w) for k, w in v.items()}
            if isinstance(v, list):
                return [clean(w) for w in v]
            return v
        out = asdict(self)
        for w, wr in zip(out["windows"], self.windows):
            for cd, cr in zip(w["components"], wr.components):
                cd["vacuous_t2"] = cr.vacuous_t2
        return clean(out)


def settling_time(times, ok) -> float | None:
    """Earliest sample time after which ``ok`` holds through the last sample."""
    ok = np.asarray(ok, dtype=bool)
    if ok.size == 0 or not ok[-1]:
        return None
    bad = np.flatnonzero(~ok)
    k = 0 if bad.size == 0 else bad[-1] + 1
    return float(np.asarray(times)[k])


def detect_settling(samples: list[TrajectorySample], window: tuple[float, float],
                    component: ComponentView, last: bool = False):
    """``(u_settle, x_settle)`` for one component inside ``[t0, t1)``.

    With ``last=True`` the window end is included.
    """
    t0, t1 = window
    sel = [s for s in samples if t0 <= s.t < t1 or (last and s.t == t1)]
    m = list(component.members)
    times = [s.t for s in sel]
    u_ok = [bool(np.all(s.u[m] == component.a_max)) for s in sel]
    x_ok = [bool(np.all(s.x_rounded[m] == component.local_n)) for s in sel]
    return settling_time(times, u_ok), settling_time(times, x_ok)


def step(state: ProtocolState, g: NetworkGraph, p: Params, h: float,
         settings: IntegratorSettings | None = None):
    """One accepted adaptive step on the whole graph.

    Returns ``(new_state, h_used, h_next)``.
    """
    settings = settings or IntegratorSettings()
    sys_ = ComponentSystem(g.identifiers, laplacian(g), p.gamma)
    y, h_used, h_next = adaptive_step(sys_, state.stacked(), h, settings)
    return ProtocolState.from_stacked(y), h_used, h_next


def affine_fast_path(state: ProtocolState, g: NetworkGraph, component: ComponentView,
                     p: Params, dt: float, settings: IntegratorSettings | None = None):
    """Advance one component by ``dt`` exactly if its regime is settled.

    Falls back to adaptive stepping when the precondition does not hold.
    Returns ``(new_state, used_fast_path)``; other components are untouched.
    """
    settings = settings or IntegratorSettings()
    m = np.asarray(component.members)
    sys_ = ComponentSystem(component.ids, laplacian(g, component), p.gamma)
    y = np.concatenate([state.z[m], state.mu[m], state.x[m]])
    out = AffinePropagator(sys_).propagate(y, dt, settings.checks_per_interval) if dt > 0 else y
    fast = out is not None
    if not fast:
        out, _ = adaptive_propagate(sys_, y, 0.0, dt, min(1e-3, dt), settings)
    n = len(m)
    new = ProtocolState(state.z.copy(), state.mu.copy(), state.x.copy())
    new.z[m], new.mu[m], new.x[m] = out[:n], out[n:2 * n], out[2 * n:]
    return new, fast


def _slack(envelope, target):
    # relative slack measured against the state scale, so a zero envelope
    # (start exactly at equilibrium) still tolerates rounding error
    return envelope + ENVELOPE_RTOL * max(envelope, abs(target), 1.0)


class _ComponentRun:
    """Per-window bookkeeping for one component."""

    def __init__(self, cid, comp: ComponentView, g: NetworkGraph, gamma: float,
                 state: ProtocolState, t0: float):
        self.cid = cid
        self.comp = comp
        self.m = np.asarray(comp.members)
        L = laplacian(g, comp)
        sp = spectral(L)
        self.sys = ComponentSystem(comp.ids, L, gamma)
        self.prop = AffinePropagator(self.sys)
        z0, mu0, x0 = state.z[self.m], state.mu[self.m], state.x[self.m]
        self.eq = analysis.max_id_equilibrium(comp, sp, gamma, z0, mu0)
        self.size = analysis.size_equilibrium(comp, L, x0, self.eq.eta_norm0, self.eq.t1)
        pc = self.size.constants
        self.c = pc.c
        self.t0 = t0
        self.report = ComponentReport(
            component_id=cid, members=[int(v) for v in comp.members],
            identifiers=[int(v) for v in comp.identifiers], local_n=comp.local_n,
            a_max=comp.a_max, leader_ordinal=comp.leader_ordinal,
            zbar_star=self.eq.zbar_star, lambda2=sp.lambda2, beta=self.eq.beta,
            eta0=self.eq.eta_norm0, t1=self.eq.t1, log_c=pc.log_c, t2=pc.t2,
            size_envelope_checked=math.isfinite(self.c))
        self.y = np.concatenate([z0, mu0, x0])
        self.h = 1e-3

    def monitor(self, t: float, y: np.ndarray):
        n = self.comp.local_n
        tau = t - self.t0
        r = self.report
        r.samples += 1
        env1 = analysis.max_id_envelope(tau, self.eq.eta_norm0, self.eq.beta)
        if np.max(np.abs(y[:n] - self.eq.zbar_star)) > _slack(env1, self.eq.zbar_star):
            r.max_id_envelope_violations += 1
        if r.size_envelope_checked:
            env2 = analysis.size_envelope(tau, self.c, n)
            if np.max(np.abs(y[2 * n:] - n)) > _slack(env2, n):
                r.size_envelope_violations += 1


def integrate(scenario: Scenario):
    """Simulate ``scenario``; returns ``(samples, RunReport)``.

    The state is carried unchanged across topology events. Raises
    :class:`SimulationError` on step-size underflow or non-finite states.
    """
    settings = scenario.integrator
    n = len(scenario.agents)
    state = scenario.initial_state.build(n)
    if not state.is_finite():
        raise SimulationError("initial state is not finite")
    times = scenario.sample_times()
    windows = scenario.windows()
    stats = StepStats()
    samples: list[TrajectorySample] = []
    reports: list[WindowReport] = []

    for w, (t0, t1, g) in enumerate(windows):
        last = w == len(windows) - 1
        comps = connected_components(g)
        cid = np.zeros(n, dtype=np.int64)
        for k, c in enumerate(comps):
            cid[list(c.members)] = k
        runs = [_ComponentRun(k, c, g, scenario.gamma, state, t0) for k, c in enumerate(comps)]
        wr = WindowReport(t0, t1, [r.report for r in runs], float(np.sum(state.mu)))
        log.info("window %d [%g, %g): %d components", w, t0, t1, len(comps))

        in_window = [t for t in times if t0 <= t < t1 or (last and t == t1)]
        record = set(in_window)
        targets = sorted({*(t for t in in_window if t > t0), t1})
        snaps: dict[float, ProtocolState] = {}
        if in_window and in_window[0] == t0:
            snaps[t0] = ProtocolState(state.z.copy(), state.mu.copy(), state.x.copy())

        for run in runs:
            m, nc = run.m, run.comp.local_n
            ta = t0
            if t0 in snaps:
                run.monitor(t0, run.y)
            for tb in targets:
                dt = round(tb - ta, 12)
                y_new = None
                if settings.affine_fast_path and run.sys.settled(run.y):
                    y_new = run.prop.propagate(run.y, dt, settings.checks_per_interval)
                    if y_new is None:
                        stats.affine_fallbacks += 1
                    else:
                        stats.affine_intervals += 1
                if y_new is None:
                    y_new, run.h = adaptive_propagate(run.sys, run.y, ta, tb, run.h,
                                                      settings, stats)
                if not np.all(np.isfinite(y_new)):
                    raise SimulationError(f"non-finite state at t={tb:g}")
                run.y = y_new
                ta = tb
                if tb in record:
                    snap = snaps.get(tb)
                    if snap is None:
                        snap = snaps[tb] = ProtocolState(np.zeros(n), np.zeros(n), np.zeros(n))
                    snap.z[m], snap.mu[m], snap.x[m] = y_new[:nc], y_new[nc:2 * nc], y_new[2 * nc:]
                    run.monitor(tb, y_new)
            state.z[m], state.mu[m], state.x[m] = run.y[:nc], run.y[nc:2 * nc], run.y[2 * nc:]

        win_samples = []
        for t in sorted(snaps):
            s = snaps[t]
            win_samples.append(TrajectorySample(
                float(t), s.z, s.mu, s.x, round_nearest(s.z), round_nearest(s.x), cid.copy()))
            wr.mu_sum_max_drift = max(wr.mu_sum_max_drift,
                                      abs(float(np.sum(s.mu)) - wr.mu_sum_start))
        wr.mu_sum_max_drift = max(wr.mu_sum_max_drift, abs(float(np.sum(state.mu)) - wr.mu_sum_start))
        for run in runs:
            us, xs = detect_settling(win_samples, (t0, t1), run.comp, last=last)
            run.report.u_settle, run.report.x_settle = us, xs
            if win_samples:
                end = win_samples[-1]
                xr, uu = set(end.x_rounded[run.m].tolist()), set(end.u[run.m].tolist())
                run.report.estimate = xr.pop() if len(xr) == 1 else None
                run.report.max_id_estimate = uu.pop() if len(uu) == 1 else None
        samples.extend(win_samples)
        reports.append(wr)

    return samples, RunReport(reports, asdict(stats))
