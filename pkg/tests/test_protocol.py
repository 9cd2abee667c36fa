import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from netsize import analysis
from netsize.graph import NetworkGraph, connected_components, laplacian, spectral
from netsize.protocol import Params, ProtocolState, h_vector, indicator, rhs, round_nearest
from netsize.verify import random_connected_graph, random_disconnected_graph


def test_h_vector_examples():
    np.testing.assert_array_equal(h_vector([2, 5], [2, 5]), [0, 0])
    np.testing.assert_array_equal(h_vector([0, 0], [2, 5]), [32, 500])
    np.testing.assert_array_equal(h_vector([3, 9], [2, 5]), [0, 0])


def test_h_vector_length_mismatch():
    with pytest.raises(ValueError):
        h_vector([1, 2], [1])


@pytest.mark.parametrize("v,expected", [(8.92, 9), (4.5, 5), (-4.5, -5), (4.49, 4),
                                        (-0.5, -1), (0.49999999999999994, 0), (-3.2, -3)])
def test_round_nearest(v, expected):
    assert round_nearest(v) == expected


@given(st.floats(-1e6, 1e6))
def test_round_nearest_is_nearest(v):
    r = round_nearest(v)
    assert abs(v - r) <= 0.5
    if abs(abs(v - r) - 0.5) == 0:
        assert abs(r) > abs(v)


def test_indicator():
    assert indicator(9, 9) == 1 and indicator(9, 5) == 0


def test_indicator_selects_single_leader():
    ids = np.array([3, 11, 7, 2])
    u = np.full(4, ids.max())
    assert indicator(u, ids).tolist() == [0, 1, 0, 0]


def test_params_validation():
    with pytest.raises(ValueError):
        Params(0.0)


def test_rhs_singleton():
    g = NetworkGraph.from_identifiers([5])
    d = rhs(ProtocolState([5.0], [0.0], [1.0]), g, Params(1.0))
    assert d.z.tolist() == [-5.0] and d.mu.tolist() == [0.0] and d.x.tolist() == [0.0]


def test_rhs_consensus_subspace():
    rng = np.random.default_rng(2)
    g = random_connected_graph(rng, 6)
    z = np.full(6, 13.7)
    d = rhs(ProtocolState(z, np.full(6, -2.0), np.zeros(6)), g, Params(3.0))
    np.testing.assert_allclose(d.z, -z + h_vector(z, g.identifiers), rtol=0, atol=1e-12)
    np.testing.assert_allclose(d.mu, 0.0, atol=1e-12)


def test_rhs_dimension_mismatch():
    g = NetworkGraph.from_identifiers([1, 2], [(0, 1)])
    with pytest.raises(ValueError):
        rhs(ProtocolState([1.0], [0.0], [0.0]), g, Params(1.0))


def test_rhs_vanishes_at_equilibrium():
    rng = np.random.default_rng(5)
    for _ in range(20):
        n = int(rng.integers(2, 9))
        g = random_connected_graph(rng, n)
        c = connected_components(g)[0]
        L = laplacian(g)
        sp = spectral(L)
        gamma = float(rng.uniform(0.5, 10))
        zb = analysis.zbar_star(c)
        mu = sp.R @ analysis.mu_tilde_star(c, sp, gamma) + rng.normal()
        x = analysis.x_star(c, L)
        d = rhs(ProtocolState(np.full(n, zb), mu, x), g, Params(gamma))
        scale = 1 + 4 * c.a_max ** 3
        assert np.abs(d.z).max() <= 1e-8 * scale
        assert np.abs(d.mu).max() <= 1e-8 * scale
        assert np.abs(d.x).max() <= 1e-8 * c.a_max ** 3


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 2 ** 32 - 1), st.floats(0.1, 20))
def test_mu_conservation(seed, gamma):
    rng = np.random.default_rng(seed)
    g = random_disconnected_graph(rng)
    n = g.n
    s = ProtocolState(rng.uniform(-50, 50, n), rng.uniform(-50, 50, n), rng.uniform(-50, 50, n))
    d = rhs(s, g, Params(gamma))
    bound = 1e-12 * np.linalg.norm(s.z) * gamma * max(len(g.edges), 1)
    assert abs(d.mu.sum()) <= bound


def test_rhs_is_local_to_components():
    rng = np.random.default_rng(9)
    g = random_disconnected_graph(rng)
    comps = connected_components(g)
    n = g.n
    s = ProtocolState(rng.normal(size=n) * 10, rng.normal(size=n), rng.normal(size=n))
    d0 = rhs(s, g, Params(2.0))
    c = comps[0]
    others = [k for k in range(n) if k not in c.members]
    s2 = ProtocolState(s.z.copy(), s.mu.copy(), s.x.copy())
    s2.z[others] += 100.0
    s2.mu[others] -= 7.0
    s2.x[others] *= -3.0
    d1 = rhs(s2, g, Params(2.0))
    m = list(c.members)
    for a, b in ((d0.z, d1.z), (d0.mu, d1.mu), (d0.x, d1.x)):
        np.testing.assert_array_equal(a[m], b[m])


@settings(max_examples=200, deadline=None)
@given(st.integers(0, 2 ** 32 - 1))
def test_h_secant_form(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(1, 10))
    ids = rng.choice(np.arange(1, 60), n, replace=False)
    w, ws = rng.uniform(-80, 80, n), rng.uniform(-80, 80, n)
    A = analysis.a_matrix(w, ws, ids)
    expect = -A @ (w - ws) + h_vector(ws, ids)
    np.testing.assert_allclose(h_vector(w, ids), expect, rtol=1e-12, atol=1e-9)
