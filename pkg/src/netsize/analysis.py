"""Closed-form equilibria, convergence constants and their numerical oracles."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .graph import ComponentView, SpectralData
from .protocol import h_vector

SQRT2 = math.sqrt(2.0)
LOG_FLOAT_MAX = math.log(np.finfo(float).max)


def _ids(ids) -> np.ndarray:
    a = np.asarray(ids, dtype=float).ravel()
    if a.size == 0:
        raise ValueError("identifier list is empty")
    return a


# -- max-identifier subsystem ------------------------------------------------

def zbar_star_from(a_max: float, n: int) -> float:
    return 4.0 * a_max ** 3 / (n + 4.0 * a_max ** 2)


def zbar_star(c: ComponentView) -> float:
    """Consensus value of ``z`` at equilibrium, inside ``(a_max - 1/4, a_max)``."""
    return zbar_star_from(float(c.a_max), c.local_n)


def g_scalar(r: float, ids) -> float:
    a = _ids(ids)
    return float(-r + np.mean(4.0 * a * a * np.maximum(a - r, 0.0)))


def solve_g_root(ids, local_n: int | None = None, tol: float = 1e-12) -> float:
    """Unique zero of ``g`` by bisection on ``[0, a_max + 1]``."""
    a = _ids(ids)
    if local_n is not None and local_n != a.size:
        raise ValueError(f"local_n={local_n} does not match {a.size} identifiers")
    lo, hi = 0.0, float(a.max()) + 1.0
    glo, ghi = g_scalar(lo, a), g_scalar(hi, a)
    if not (glo > 0.0 > ghi):
        raise RuntimeError(f"bisection bracket failed: g(0)={glo}, g({hi})={ghi}")
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if mid in (lo, hi):
            break
        if g_scalar(mid, a) > 0.0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def scalar_cost(s: float, ids) -> float:
    """Penalised cost restricted to the consensus line ``z_i = s``."""
    a = _ids(ids)
    p = np.maximum(a - s, 0.0)
    return float(0.5 * np.sum(s * s + 4.0 * a * a * p * p))


def cost_argmin_grid(ids, step: float = 1e-4) -> float:
    """Brute-force minimiser of :func:`scalar_cost` on ``[0, a_max + 1]``."""
    a = _ids(ids)
    s = np.arange(0.0, a.max() + 1.0 + step / 2, step)
    cost = a.size * s * s
    for ai in a:
        p = np.maximum(ai - s, 0.0)
        cost += 4.0 * ai * ai * p * p
    return float(s[np.argmin(cost)])


def mu_tilde_star(c: ComponentView, spec: SpectralData, gamma: float) -> np.ndarray:
    if c.local_n == 1:
        return np.zeros(0)
    h = h_vector(np.full(c.local_n, zbar_star(c)), c.ids)
    lam = np.diag(spec.Lambda)
    return (spec.R.T @ h) / (gamma * lam)


def eta_norm(z0, mu0, c: ComponentView, spec: SpectralData, gamma: float) -> float:
    """Norm of the error vector stacking ``z - zbar*`` and ``R^T mu - mu~*``."""
    z0 = np.asarray(z0, dtype=float)
    mu0 = np.asarray(mu0, dtype=float)
    ez = z0 - zbar_star(c)
    emu = spec.R.T @ mu0 - mu_tilde_star(c, spec, gamma)
    return float(math.sqrt(ez @ ez + emu @ emu))


def beta(gamma: float, lambda2: float, a_max: float) -> float:
    gl = gamma * lambda2
    q = 4.0 * a_max ** 2
    return gl / (q + 2.0 * (q + 1.0) ** 2 / gl + gl + 6.0)


def component_beta(c: ComponentView, spec: SpectralData, gamma: float) -> float:
    """Rate for one component; an isolated agent contracts at rate 1."""
    if c.local_n == 1:
        return 1.0
    return beta(gamma, spec.lambda2, c.a_max)


def t1(beta_: float, eta0: float) -> float:
    arg = 4.0 * SQRT2 * eta0
    if arg <= 1.0:
        return 0.0
    return math.log(arg) / beta_


def max_id_envelope(t, eta0: float, beta_: float):
    return SQRT2 * eta0 * np.exp(-beta_ * np.asarray(t, dtype=float))


@dataclass(frozen=True)
class MaxIdEquilibrium:
    zbar_star: float
    mu_tilde_star: np.ndarray
    beta: float
    eta_norm0: float
    t1: float


def max_id_equilibrium(c: ComponentView, spec: SpectralData, gamma: float,
                       z0, mu0) -> MaxIdEquilibrium:
    b = component_beta(c, spec, gamma)
    eta0 = eta_norm(z0, mu0, c, spec, gamma)
    return MaxIdEquilibrium(zbar_star(c), mu_tilde_star(c, spec, gamma), b, eta0, t1(b, eta0))


# -- size subsystem ----------------------------------------------------------

def leader_matrix(c: ComponentView) -> np.ndarray:
    J = np.zeros((c.local_n, c.local_n))
    J[c.leader_position, c.leader_position] = 1.0
    return J


def size_matrix(c: ComponentView, L: np.ndarray, a_max: float | None = None) -> np.ndarray:
    a = float(c.a_max if a_max is None else a_max)
    return leader_matrix(c) + a ** 3 * np.asarray(L, dtype=float)


def x_star(c: ComponentView, L: np.ndarray, a_max: float | None = None) -> np.ndarray:
    M = size_matrix(c, L, a_max)
    try:
        return np.linalg.solve(M, np.ones(c.local_n))
    except np.linalg.LinAlgError as exc:
        raise RuntimeError("leader-pinned size matrix is singular; is the component connected?") from exc


def lambda_min_JL(c: ComponentView, L: np.ndarray, a_max: float | None = None) -> float:
    return float(np.linalg.eigvalsh(size_matrix(c, L, a_max))[0])


def alpha(y, ystar) -> np.ndarray:
    """Secant slope of ``max(., 0)`` between ``y`` and ``y*`` (0 when equal)."""
    y = np.asarray(y, dtype=float)
    ys = np.asarray(ystar, dtype=float)
    out = np.zeros(np.broadcast(y, ys).shape)
    both = (y > 0) & (ys > 0) & (y != ys)
    out[both] = 1.0
    up = (y > 0) & (ys <= 0)
    down = (y <= 0) & (ys > 0)
    yb, ysb = np.broadcast_arrays(y, ys)
    out[up] = yb[up] / (yb[up] - ysb[up])
    out[down] = ysb[down] / (ysb[down] - yb[down])
    return out


def a_matrix(w, w_star, ids) -> np.ndarray:
    a = _ids(ids)
    w = np.asarray(w, dtype=float)
    ws = np.asarray(w_star, dtype=float)
    return np.diag(4.0 * a * a * alpha(a - w, a - ws))


@dataclass(frozen=True)
class SecantReport:
    identity_residual: float
    min_diagonal: float
    norm: float
    norm_bound: float
    rtol: float = 1e-12

    @property
    def identity_ok(self) -> bool:
        return self.identity_residual <= self.rtol

    @property
    def psd_ok(self) -> bool:
        return self.min_diagonal >= 0.0

    @property
    def norm_ok(self) -> bool:
        return self.norm <= self.norm_bound * (1.0 + self.rtol)

    @property
    def ok(self) -> bool:
        return self.identity_ok and self.psd_ok and self.norm_ok


def check_secant(w, w_star, ids, rtol: float = 1e-12) -> SecantReport:
    """Check the secant factorisation ``H(w) - H(w*) = -A (w - w*)``.

    The identity residual is reported relative to the per-entry scale
    ``|H_i(w)| + |H_i(w*)| + 4 a_i^2 |w_i - w*_i|``.
    """
    a = _ids(ids)
    w = np.asarray(w, dtype=float)
    ws = np.asarray(w_star, dtype=float)
    A = a_matrix(w, ws, a)
    d = np.diag(A)
    lhs = h_vector(w, a) - h_vector(ws, a)
    rhs_ = -d * (w - ws)
    scale = np.abs(h_vector(w, a)) + np.abs(h_vector(ws, a)) + 4.0 * a * a * np.abs(w - ws)
    res = np.abs(lhs - rhs_) / np.where(scale > 0, scale, 1.0)
    return SecantReport(float(res.max()), float(d.min()), float(np.abs(d).max()),
                        float(4.0 * a.max() ** 2), rtol)


@dataclass(frozen=True)
class ProofConstants:
    c1: float
    c2: float
    c3: float
    log_c1: float
    log_c2: float
    log_c3: float
    log_c4: float
    log_c: float
    t2: float

    @property
    def c4(self) -> float:
        return _exp_sat(self.log_c4)

    @property
    def c(self) -> float:
        return _exp_sat(self.log_c)

    @property
    def vacuous(self) -> bool:
        return math.isinf(self.t2)


def _exp_sat(v: float) -> float:
    if v > LOG_FLOAT_MAX:
        return math.inf
    return math.exp(v)


def _log(v: float) -> float:
    return math.log(v) if v > 0 else -math.inf


def proof_constants(eta0: float, x_star_: np.ndarray, a_max: float, local_n: int,
                    W0: float, t1_: float) -> ProofConstants:
    """Constants of the size-estimate envelope, evaluated in log-domain.

    ``c4`` and ``c`` saturate to ``inf`` once they leave the double range;
    ``t2`` is then reported as ``inf`` too.
    """
    if t1_ < 0:
        raise ValueError("T1 must be non-negative")
    N = float(local_n)
    a = float(a_max)
    c1 = 1.0 + N * a ** 3 + N * (SQRT2 * eta0 + a + 0.5) ** 3
    c2 = c1 * float(np.linalg.norm(x_star_))
    c3 = -1.0 / (2.0 * N) + 2.0 * c1 + 2.0 * c2
    q = c2 / c3
    x = c3 * t1_
    # c4 = q (e^x - 1) + W0 e^x = e^x (q (1 - e^-x) + W0)
    log_c4 = x + _log(q * -math.expm1(-x) + W0)
    log_c = 0.5 * (math.log(2.0) + log_c4) + t1_ / (4.0 * N)
    if log_c > LOG_FLOAT_MAX:
        t2_ = math.inf
    elif log_c == -math.inf:
        t2_ = 0.0
    else:
        t2_ = max(0.0, 4.0 * N * (math.log(4.0) + log_c - math.log(2.0 - SQRT2)))
    return ProofConstants(c1, c2, c3, _log(c1), _log(c2), _log(c3), log_c4, log_c, t2_)


def size_envelope(t, c: float, local_n: int):
    return c * np.exp(-np.asarray(t, dtype=float) / (4.0 * local_n)) + SQRT2 / 4.0


@dataclass(frozen=True)
class SizeEquilibrium:
    x_star: np.ndarray
    lambda_min_JL: float
    J: np.ndarray
    W0: float
    constants: ProofConstants = field(repr=False)

    @property
    def t2(self) -> float:
        return self.constants.t2


def size_equilibrium(c: ComponentView, L: np.ndarray, x0, eta0: float,
                     t1_: float) -> SizeEquilibrium:
    xs = x_star(c, L)
    e = np.asarray(x0, dtype=float) - xs
    W0 = 0.5 * float(e @ e)
    pc = proof_constants(eta0, xs, c.a_max, c.local_n, W0, t1_)
    return SizeEquilibrium(xs, lambda_min_JL(c, L), leader_matrix(c), W0, pc)
