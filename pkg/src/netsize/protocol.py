"""Agent dynamics: max-identifier estimation and size estimation.

Each agent ``i`` carries three scalars ``z_i``, ``mu_i`` and ``x_i``. The pair
``(z, mu)`` runs a primal-dual flow whose consensus value sits just below the
largest identifier; the rounded ``u_i = round(z_i)`` then drives the size
estimator ``x_i``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .graph import NetworkGraph, laplacian


@dataclass(frozen=True)
class Params:
    gamma: float

    def __post_init__(self):
        if not (self.gamma > 0 and np.isfinite(self.gamma)):
            raise ValueError(f"coupling gain must be positive, got {self.gamma}")


@dataclass
class ProtocolState:
    z: np.ndarray
    mu: np.ndarray
    x: np.ndarray

    def __post_init__(self):
        self.z = np.asarray(self.z, dtype=float)
        self.mu = np.asarray(self.mu, dtype=float)
        self.x = np.asarray(self.x, dtype=float)
        if not (self.z.shape == self.mu.shape == self.x.shape) or self.z.ndim != 1:
            raise ValueError("z, mu and x must be 1-D vectors of equal length")

    def __len__(self):
        return self.z.shape[0]

    def stacked(self) -> np.ndarray:
        return np.concatenate([self.z, self.mu, self.x])

    @classmethod
    def from_stacked(cls, y: np.ndarray) -> "ProtocolState":
        n = y.shape[0] // 3
        return cls(y[:n].copy(), y[n:2 * n].copy(), y[2 * n:].copy())

    def is_finite(self) -> bool:
        return bool(np.all(np.isfinite(self.z)) and np.all(np.isfinite(self.mu))
                    and np.all(np.isfinite(self.x)))


def h_vector(z, ids) -> np.ndarray:
    """Elementwise ``4 a_i^2 max(a_i - z_i, 0)``."""
    z = np.asarray(z, dtype=float)
    a = np.asarray(ids, dtype=float)
    if z.shape != a.shape:
        raise ValueError(f"length mismatch: z {z.shape} vs ids {a.shape}")
    return 4.0 * a * a * np.maximum(a - z, 0.0)


def round_nearest(v):
    """Round to the nearest integer, halves away from zero.

    Works on scalars (returns ``int``) and arrays (returns int64 array).
    """
    arr = np.asarray(v, dtype=float)
    f = np.floor(arr)
    frac = arr - f  # exact for |v| < 2**52
    out = f + ((frac > 0.5) | ((frac == 0.5) & (arr > 0)))
    out = out.astype(np.int64)
    return int(out) if out.ndim == 0 else out


def indicator(u, a):
    """1 where the rounded estimate equals the agent's own identifier."""
    res = np.asarray(u) == np.asarray(a)
    return int(res) if res.ndim == 0 else res.astype(np.int64)


def rhs_arrays(z, mu, x, ids, L, gamma, u=None):
    """Derivatives for stacked vectors given a (block) Laplacian ``L``.

    ``u`` defaults to the rounded ``z``; integrators pass a held value.
    """
    a = np.asarray(ids)
    if u is None:
        u = round_nearest(z)
    u = np.asarray(u, dtype=float)
    Lz = L @ z
    dz = -z + h_vector(z, a) - gamma * Lz - gamma * (L @ mu)
    dmu = gamma * Lz
    dx = 1.0 - indicator(u, a) * x - u ** 3 * (L @ x)
    return dz, dmu, dx


def rhs(state: ProtocolState, g: NetworkGraph, p: Params, u=None) -> ProtocolState:
    """Time derivative of the full protocol state on graph ``g``."""
    if len(state) != g.n:
        raise ValueError(f"state has {len(state)} agents, graph has {g.n}")
    L = laplacian(g)
    dz, dmu, dx = rhs_arrays(state.z, state.mu, state.x, g.identifiers, L, p.gamma, u)
    return ProtocolState(dz, dmu, dx)


def jacobian_arrays(z, ids, L, gamma, u) -> np.ndarray:
    """Jacobian of the stacked field ``[z, mu, x]`` with ``u`` held fixed.

    The max-terms are differentiated on the side selected by the current
    ``z``; exactly at a kink the inactive side is used.
    """
    a = np.asarray(ids, dtype=float)
    n = a.shape[0]
    active = (a - z) > 0
    u = np.asarray(u, dtype=float)
    J = np.zeros((3 * n, 3 * n))
    J[:n, :n] = -np.eye(n) - np.diag(4.0 * a * a * active) - gamma * L
    J[:n, n:2 * n] = -gamma * L
    J[n:2 * n, :n] = gamma * L
    J[2 * n:, 2 * n:] = -np.diag((u == a).astype(float)) - (u ** 3)[:, None] * L
    return J
