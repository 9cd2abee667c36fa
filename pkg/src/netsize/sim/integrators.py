"""Time stepping for one connected component.

Two routes share the stacked state ``y = [z, mu, x]``:

* an adaptive linearly-implicit Rosenbrock pair (3rd order with a 2nd order
  embedded estimate, L-stable) driven by the exact piecewise Jacobian;
* an exact propagator for the affine regime reached once every ``u_i`` equals
  the component's largest identifier.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla

from ..protocol import h_vector, indicator, jacobian_arrays, round_nearest


class SimulationError(RuntimeError):
    pass


@dataclass(frozen=True)
class IntegratorSettings:
    rel_tol: float = 1e-8
    abs_tol: float = 1e-10
    max_step: float = 1.0
    affine_fast_path: bool = True
    checks_per_interval: int = 4

    def __post_init__(self):
        if not (self.rel_tol > 0 and self.abs_tol > 0 and self.max_step > 0):
            raise ValueError("integrator tolerances and max_step must be positive")
        if self.checks_per_interval < 1:
            raise ValueError("checks_per_interval must be >= 1")


class ComponentSystem:
    """Protocol vector field restricted to one component."""

    def __init__(self, ids, L, gamma: float):
        self.ids = np.asarray(ids, dtype=np.int64)
        self.a = self.ids.astype(float)
        self.L = np.asarray(L, dtype=float)
        self.gamma = float(gamma)
        self.n = self.ids.shape[0]
        self.a_max = int(self.ids.max())

    def split(self, y):
        n = self.n
        return y[:n], y[n:2 * n], y[2 * n:]

    def u_of(self, y) -> np.ndarray:
        return round_nearest(y[:self.n])

    def active_of(self, y) -> np.ndarray:
        return (self.a - y[:self.n]) > 0

    def f(self, y, u) -> np.ndarray:
        z, mu, x = self.split(y)
        L, g = self.L, self.gamma
        Lz = L @ z
        uf = u.astype(float)
        return np.concatenate([
            -z + h_vector(z, self.a) - g * Lz - g * (L @ mu),
            g * Lz,
            1.0 - indicator(u, self.ids) * x - uf ** 3 * (L @ x),
        ])

    def jac(self, y, u) -> np.ndarray:
        return jacobian_arrays(y[:self.n], self.a, self.L, self.gamma, u)

    def settled(self, y) -> bool:
        return bool(np.all(self.u_of(y) == self.a_max))


# ROS3 of Sandu et al. (KPP form): G = I/(h*g) - J; y1 = y0 + sum M_j K_j.
_G = 0.43586652150845899941601945119356
_A21 = 1.0
_C21 = -0.10156171083877702091975600115545e+01
_C31 = 0.40759956452537699824805835358067e+01
_C32 = 0.92076794298330791242156818474003e+01
_M = (1.0, 0.61697947043828245592553615689730e+01, -0.42772256543218573326238373806514)
_E = (0.5, -0.29079558716805469821718236208017e+01, 0.22354069897811569627360909276199)
_ORDER = 3.0


def ros3_trial(system: ComponentSystem, y: np.ndarray, h: float, u=None):
    """One Rosenbrock trial step; returns ``(y_new, err_vector)``.

    ``u`` is sampled at the step start and held across all stages.
    """
    if u is None:
        u = system.u_of(y)
    J = system.jac(y, u)
    G = np.eye(y.shape[0]) / (h * _G) - J
    lu = sla.lu_factor(G, check_finite=False)
    f0 = system.f(y, u)
    k1 = sla.lu_solve(lu, f0, check_finite=False)
    f1 = system.f(y + _A21 * k1, u)
    k2 = sla.lu_solve(lu, f1 + (_C21 / h) * k1, check_finite=False)
    k3 = sla.lu_solve(lu, f1 + (_C31 / h) * k1 + (_C32 / h) * k2, check_finite=False)
    y_new = y + _M[0] * k1 + _M[1] * k2 + _M[2] * k3
    err = _E[0] * k1 + _E[1] * k2 + _E[2] * k3
    return y_new, err


def error_norm(err, y0, y1, rel_tol, abs_tol) -> float:
    sc = abs_tol + rel_tol * np.maximum(np.abs(y0), np.abs(y1))
    return float(np.sqrt(np.mean((err / sc) ** 2)))


@dataclass
class StepStats:
    accepted: int = 0
    rejected: int = 0
    affine_intervals: int = 0
    affine_fallbacks: int = 0


def adaptive_step(system: ComponentSystem, y, h, settings: IntegratorSettings,
                  stats: StepStats | None = None, h_floor: float = 1e-14):
    """Take one accepted step starting from trial size ``h``.

    Returns ``(y_new, h_used, h_next)``.
    """
    h = min(h, settings.max_step)
    last_rejected = False
    while True:
        if h < h_floor:
            raise SimulationError(f"step size underflow (h={h:.3e})")
        y_new, err = ros3_trial(system, y, h)
        en = error_norm(err, y, y_new, settings.rel_tol, settings.abs_tol)
        if not np.isfinite(en):
            en = math.inf
        fac = 0.9 * en ** (-1.0 / _ORDER) if en > 0 else 6.0
        fac = min(6.0, max(0.2, fac))
        if en <= 1.0:
            if stats is not None:
                stats.accepted += 1
            if last_rejected:
                fac = min(1.0, fac)
            if not np.all(np.isfinite(y_new)):
                raise SimulationError("non-finite state produced")
            return y_new, h, min(h * fac, settings.max_step)
        if stats is not None:
            stats.rejected += 1
        last_rejected = True
        h *= fac if math.isfinite(en) else 0.1


def adaptive_propagate(system: ComponentSystem, y, t0: float, t1: float, h: float,
                       settings: IntegratorSettings, stats: StepStats | None = None):
    """Integrate from ``t0`` to ``t1`` landing exactly on ``t1``.

    Returns ``(y, h_next)`` where ``h_next`` is the suggested size for the
    next call.
    """
    t = t0
    y = np.array(y, dtype=float)
    span = t1 - t0
    while t1 - t > 1e-12 * max(1.0, abs(t1)):
        remaining = t1 - t
        clipped = h >= 0.999 * remaining
        h_try = remaining if clipped else h
        y, h_used, h_next = adaptive_step(system, y, h_try, settings, stats,
                                          h_floor=1e-14 * max(1.0, abs(t), span))
        if clipped and h_used == h_try:
            t = t1
            # a short landing step must not shrink the controller's proposal
            h = max(h, h_next)
        else:
            t += h_used
            h = h_next
    return y, h


class AffinePropagator:
    """Exact flow of a component in a fixed regime.

    Valid while all ``u_i`` equal ``a_max`` (size dynamics linear with the
    leader-pinned matrix) and the set of agents with ``z_i < a_i`` stays
    fixed (max-id dynamics affine).
    """

    def __init__(self, system: ComponentSystem):
        self.sys = system
        n = system.n
        a_max = float(system.a_max)
        lead = int(np.argmax(system.ids))
        M = a_max ** 3 * system.L
        M[lead, lead] += 1.0
        self.x_star = np.linalg.solve(M, np.ones(n))
        self.w, self.V = np.linalg.eigh(M)
        self._zm_cache: dict[tuple, np.ndarray] = {}

    def _zm_flow(self, active: np.ndarray, dt: float) -> np.ndarray:
        key = (active.tobytes(), dt)
        phi = self._zm_cache.get(key)
        if phi is None:
            s = self.sys
            n, g, L = s.n, s.gamma, s.L
            d = 4.0 * s.a * s.a * active
            aug = np.zeros((2 * n + 1, 2 * n + 1))
            aug[:n, :n] = -np.eye(n) - np.diag(d) - g * L
            aug[:n, n:2 * n] = -g * L
            aug[n:2 * n, :n] = g * L
            aug[:n, 2 * n] = d * s.a
            phi = sla.expm(aug * dt)[:2 * n]
            if len(self._zm_cache) > 256:
                self._zm_cache.clear()
            self._zm_cache[key] = phi
        return phi

    def flow(self, y, dt: float, active: np.ndarray | None = None) -> np.ndarray:
        """Exact solution after ``dt`` assuming the regime holds throughout."""
        s = self.sys
        n = s.n
        if active is None:
            active = s.active_of(y)
        phi = self._zm_flow(active, dt)
        zm = phi[:, :2 * n] @ y[:2 * n] + phi[:, 2 * n]
        e = y[2 * n:] - self.x_star
        x = self.x_star + self.V @ (np.exp(-self.w * dt) * (self.V.T @ e))
        return np.concatenate([zm, x])

    def propagate(self, y, dt: float, checks: int = 4):
        """Propagate by ``dt`` in ``checks`` sub-steps, verifying the regime.

        Returns ``None`` when the regime is not in force at the start or is
        seen to change at one of the check points.
        """
        s = self.sys
        if not s.settled(y):
            return None
        active = s.active_of(y)
        sub = dt / checks
        cur = y
        for _ in range(checks):
            cur = self.flow(cur, sub, active)
            if not (s.settled(cur) and np.array_equal(s.active_of(cur), active)):
                return None
        return cur
