import math
from dataclasses import replace

import numpy as np
import pytest

from netsize import analysis
from netsize.graph import NetworkGraph, connected_components, laplacian, spectral
from netsize.protocol import Params, ProtocolState, rhs
from netsize.sim.engine import (TrajectorySample, affine_fast_path, detect_settling, integrate,
                                settling_time, step)
from netsize.sim.integrators import (AffinePropagator, ComponentSystem, IntegratorSettings,
                                     SimulationError, adaptive_propagate, adaptive_step)
from netsize.sim.scenario import InitialState, Scenario, TopologyEvent
from netsize.verify import random_connected_graph, settled_segment


def singleton_closed_form(t, a=5):
    """z' = 4a^3 - (1 + 4a^2) z from z=0; x' = 1 until round(z) = a, then x' = 1 - x."""
    k = 1 + 4 * a * a
    zb = 4 * a ** 3 / k
    z = zb * (1 - np.exp(-k * t))
    ts = -math.log(1 - (a - 0.5) / zb) / k
    x = np.where(t < ts, t, 1 + (ts - 1) * np.exp(-(t - ts)))
    return z, x, ts


def test_singleton_matches_closed_form():
    sc = Scenario(agents=(5,), initial_edges=(), gamma=1.0, horizon=50.0, sample_interval=0.01)
    samples, rep = integrate(sc)
    t = np.array([s.t for s in samples])
    z = np.array([s.z[0] for s in samples])
    x = np.array([s.x[0] for s in samples])
    zc, xc, ts = singleton_closed_form(t)
    np.testing.assert_allclose(z, zc, atol=1e-6)
    # u is held over each step, so the switch of the x-dynamics lags by < one step
    np.testing.assert_allclose(x, xc, atol=2e-3)
    u = np.array([s.u[0] for s in samples])
    assert np.all(u[t > ts + 0.01] == 5)
    assert samples[-1].x_rounded[0] == 1
    assert z[-1] == pytest.approx(500 / 101, abs=1e-9)
    (c,) = rep.windows[0].components
    assert c.estimate == 1 and c.max_id_estimate == 5


def _equilibrium_state(g, gamma):
    c = connected_components(g)[0]
    L = laplacian(g)
    sp = spectral(L)
    n = g.n
    mu = sp.R @ analysis.mu_tilde_star(c, sp, gamma) + 0.3
    return np.full(n, analysis.zbar_star(c)), mu, analysis.x_star(c, L)


@pytest.mark.parametrize("fast", [True, False])
def test_equilibrium_is_held(fast):
    rng = np.random.default_rng(17)
    g = random_connected_graph(rng, 6, max_id=20)
    z, mu, x = _equilibrium_state(g, 4.0)
    sc = Scenario(agents=tuple(g.identifiers.tolist()), initial_edges=tuple(sorted(g.edges)),
                  gamma=4.0, horizon=20.0, sample_interval=0.5,
                  initial_state=InitialState("explicit", z=tuple(z), mu=tuple(mu), x=tuple(x)),
                  integrator=IntegratorSettings(affine_fast_path=fast))
    samples, _ = integrate(sc)
    y0 = np.concatenate([z, mu, x])
    for s in samples:
        assert np.abs(np.concatenate([s.z, s.mu, s.x]) - y0).max() <= 1e-6


def test_step_first_order_consistency():
    rng = np.random.default_rng(1)
    g = random_connected_graph(rng, 5, max_id=10)
    s = ProtocolState(rng.uniform(0, 10, 5), rng.normal(size=5), rng.normal(size=5))
    p = Params(2.0)
    f = rhs(s, g, p).stacked()
    y, scale = s.stacked(), np.abs(f).max()
    ratios = []
    for h in (1e-7, 5e-8):
        new, h_used, _ = step(s, g, p, h)
        assert 0 < h_used <= h
        err = np.abs(new.stacked() - (y + h_used * f)).max()
        # deviation from the Euler step is second order in h
        ratios.append(err / (h_used * scale))
    assert ratios[0] <= 1e-3 and ratios[1] <= ratios[0]


def test_step_matches_exact_affine():
    rng = np.random.default_rng(6)
    system, y = settled_segment(rng, n=4, max_id=12)
    settings = IntegratorSettings(rel_tol=1e-10, abs_tol=1e-12)
    exact = AffinePropagator(system).flow(y, 0.01)
    got, _ = adaptive_propagate(system, y, 0.0, 0.01, 1e-5, settings)
    # global error stays within a small multiple of the local tolerance
    assert np.abs(got - exact).max() <= 1e-8 * (1 + np.abs(exact).max())


def test_step_underflow_aborts():
    system = ComponentSystem([3], np.zeros((1, 1)), 1.0)
    with pytest.raises(SimulationError, match="underflow"):
        adaptive_step(system, np.zeros(3), 1e-20, IntegratorSettings())


def test_non_finite_initial_state_aborts():
    sc = Scenario(agents=(2,), initial_edges=(), gamma=1.0, horizon=1.0, sample_interval=0.1,
                  initial_state=InitialState("explicit", z=(math.nan,), mu=(0.0,), x=(0.0,)))
    with pytest.raises(SimulationError):
        integrate(sc)


def test_affine_fast_path_limits():
    rng = np.random.default_rng(2)
    system, y = settled_segment(rng, n=5)
    prop = AffinePropagator(system)
    np.testing.assert_allclose(prop.flow(y, 0.0), y, atol=1e-12)
    far = prop.flow(y, 1e4)
    np.testing.assert_allclose(far[2 * system.n:], prop.x_star, atol=1e-9)


def test_affine_fast_path_wrapper_falls_back():
    g = NetworkGraph.from_identifiers([1, 4, 2], [(0, 1), (1, 2)])
    (c,) = connected_components(g)
    s = ProtocolState(np.zeros(3), np.zeros(3), np.zeros(3))
    new, fast = affine_fast_path(s, g, c, Params(1.0), 0.1)
    assert not fast and np.all(new.z > 0)
    z, mu, x = _equilibrium_state(g, 1.0)
    s = ProtocolState(z, mu, x + 0.2)
    new, fast = affine_fast_path(s, g, c, Params(1.0), 0.1)
    assert fast
    assert np.all(np.abs(new.x - x) < 0.2)


def test_fast_path_state_contracts_monotonically():
    rng = np.random.default_rng(12)
    system, y = settled_segment(rng, n=6, max_id=15)
    settings = IntegratorSettings(rel_tol=1e-9, abs_tol=1e-11)
    xs = AffinePropagator(system).x_star
    n = system.n
    prev = np.linalg.norm(y[2 * n:] - xs)
    h = 1e-4
    for k in range(20):
        y, h = adaptive_propagate(system, y, 0.05 * k, 0.05 * (k + 1), h, settings)
        cur = np.linalg.norm(y[2 * n:] - xs)
        assert cur <= prev * (1 + 1e-9)
        prev = cur


def _samples(values, a_max=3, n_true=2):
    out = []
    for k, (u_ok, x_ok) in enumerate(values):
        u = np.array([a_max if u_ok else a_max - 1, a_max])
        xr = np.array([n_true if x_ok else 0, n_true])
        out.append(TrajectorySample(float(k), np.zeros(2), np.zeros(2), np.zeros(2), u, xr,
                                    np.zeros(2, dtype=np.int64)))
    return out


def test_detect_settling_examples():
    c = connected_components(NetworkGraph.from_identifiers([1, 3], [(0, 1)]))[0]
    assert detect_settling(_samples([(1, 1)] * 5), (0, 5), c) == (0.0, 0.0)
    s = _samples([(1, 0), (0, 1), (1, 1), (1, 0), (1, 1), (1, 1)])
    assert detect_settling(s, (0, 6), c) == (2.0, 4.0)
    assert detect_settling(_samples([(1, 1), (0, 0)]), (0, 2), c) == (None, None)
    assert settling_time([], []) is None


def test_scenario_validation():
    base = dict(agents=(1, 2), initial_edges=((0, 1),), gamma=1.0, horizon=10.0,
                sample_interval=1.0)
    with pytest.raises(ValueError):
        Scenario(**{**base, "agents": ()})
    with pytest.raises(ValueError):
        Scenario(**base, events=(TopologyEvent(5.0), TopologyEvent(5.0)))
    with pytest.raises(ValueError):
        Scenario(**base, events=(TopologyEvent(10.0),))
    with pytest.raises(ValueError, match="not present"):
        Scenario(**base, events=(TopologyEvent(2.0, remove_edges=((0, 1),)), TopologyEvent(
            3.0, remove_edges=((0, 1),))))
    with pytest.raises(ValueError):
        Scenario(**{**base, "sample_interval": 0.0})


def test_state_continuous_across_events():
    sc = Scenario(agents=(1, 2, 3), initial_edges=((0, 1),), gamma=2.0, horizon=6.0,
                  sample_interval=0.25, events=(TopologyEvent(3.1, add_edges=((1, 2),)),))
    samples, rep = integrate(sc)
    assert [w.t_start for w in rep.windows] == [0.0, 3.1]
    assert [s.t for s in samples] == [0.25 * k for k in range(25)]
    assert [c.local_n for c in rep.windows[0].components] == [2, 1]
    # continuity: the run split at the event reproduces a fresh run seeded at t=3.1
    pre, _ = integrate(replace(sc, horizon=3.1, events=()))
    assert pre[-1].t == 3.0
    np.testing.assert_array_equal(pre[-1].z, samples[12].z)
    assert samples[-1].component_id.tolist() == [0, 0, 0]


def test_size_envelope_checked_when_finite():
    sc = Scenario(agents=(5,), initial_edges=(), gamma=1.0, horizon=20.0, sample_interval=0.1,
                  initial_state=InitialState("explicit", z=(500 / 101,), mu=(0.0,), x=(0.0,)))
    samples, rep = integrate(sc)
    (c,) = rep.windows[0].components
    assert c.size_envelope_checked and math.isfinite(c.t2)
    assert c.size_envelope_violations == 0 and c.max_id_envelope_violations == 0
    assert c.x_settle is not None and c.x_settle <= c.t2
