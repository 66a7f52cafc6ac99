import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from lossyavg import spectral as sp
from lossyavg import topology as tp


@pytest.mark.parametrize("m", [3, 7, 20])
def test_complete_and_star_lambda2(m):
    full = sp.expected_matrix(tp.make_complete(m), sp.uniform_q(tp.make_complete(m)))
    star = sp.expected_matrix(tp.make_star(m), sp.uniform_q(tp.make_star(m)))
    assert full.lambda2 == pytest.approx(1 - 1 / (m - 1), abs=1e-12)
    assert star.lambda2 == pytest.approx(1 - 1 / (2 * (m - 1)), abs=1e-12)


def test_two_node_path_has_zero_lambda2():
    t = tp.make_path(2)
    assert abs(sp.expected_matrix(t, sp.uniform_q(t)).lambda2) < 1e-15


def test_pairwise_matrix():
    a = sp.pairwise_matrix(0, 2, 3)
    np.testing.assert_array_equal(a, [[0.5, 0, 0.5], [0, 1, 0], [0.5, 0, 0.5]])
    assert np.allclose(a @ a, a)
    with pytest.raises(sp.SpectralError):
        sp.pairwise_matrix(1, 1, 3)


def test_averaging_matrix_matches_sum_of_pairwise_terms():
    rng = np.random.default_rng(3)
    t = tp.random_connected(6, 0.5, rng)
    q = sp.random_q(t, rng)
    direct = sum(q[i, j] * sp.pairwise_matrix(i, j, 6) for i in range(6) for j in range(6) if q[i, j])
    np.testing.assert_allclose(sp.averaging_matrix(t, q), direct / 6, atol=1e-15)


def test_jacobi_matches_numpy():
    rng = np.random.default_rng(11)
    x = rng.standard_normal((30, 30))
    a = x + x.T
    vals, vecs = sp.jacobi_eigh(a)
    np.testing.assert_allclose(vals, np.sort(np.linalg.eigvalsh(a))[::-1], atol=1e-10)
    np.testing.assert_allclose(vecs @ np.diag(vals) @ vecs.T, a, atol=1e-10)
    np.testing.assert_allclose(vecs.T @ vecs, np.eye(30), atol=1e-12)


def test_jacobi_rejects_bad_input():
    with pytest.raises(sp.SpectralError):
        sp.jacobi_eigh(np.ones((2, 3)))
    with pytest.raises(sp.SpectralError):
        sp.jacobi_eigh(np.array([[1.0, 2.0], [0.0, 1.0]]))


def test_validate_q_errors():
    t = tp.make_path(3)
    q = sp.uniform_q(t)
    sp.validate_q(t, q)
    bad = q.copy()
    bad[0, 2] = 0.1
    bad[0, 1] = 0.9
    with pytest.raises(sp.SpectralError):
        sp.validate_q(t, bad)
    with pytest.raises(sp.SpectralError):
        sp.validate_q(t, q * 0.5)
    with pytest.raises(sp.SpectralError):
        sp.validate_q(t, np.eye(2))


def test_disconnected_topology_rejected():
    t = tp.Topology.from_edges(4, [(0, 1), (2, 3)])
    with pytest.raises(tp.TopologyError):
        sp.expected_matrix(t, sp.uniform_q(t))


def test_q_csv_round_trip():
    rng = np.random.default_rng(5)
    t = tp.make_complete(5)
    q = sp.random_q(t, rng)
    np.testing.assert_array_equal(sp.q_from_csv(sp.q_to_csv(q)), q)


def test_optimize_keeps_symmetric_optimum():
    t = tp.make_complete(10)
    q = sp.optimize_q(t, iterations=50)
    assert sp.expected_matrix(t, q).lambda2 <= 1 - 1 / 9 + 1e-9


def test_optimize_star_not_worse_than_uniform():
    t = tp.make_star(20)
    lam = sp.expected_matrix(t, sp.optimize_q(t, iterations=50)).lambda2
    assert lam <= 1 - 1 / 38 + 1e-12


def test_optimize_improves_path():
    t = tp.make_path(5)
    base = sp.expected_matrix(t, sp.uniform_q(t)).lambda2
    q = sp.optimize_q(t, iterations=300)
    sp.validate_q(t, q)
    assert sp.expected_matrix(t, q).lambda2 < base - 5e-3


def test_optimize_needs_budget():
    with pytest.raises(sp.SpectralError):
        sp.optimize_q(tp.make_path(3), iterations=0)


def test_subgradient_matches_finite_difference():
    rng = np.random.default_rng(2)
    t = tp.make_complete(5)
    q = sp.random_q(t, rng)
    lam, g = sp.lambda2_subgradient(t, q)
    h = 1e-6
    dq = np.zeros_like(q)
    dq[0, 1], dq[0, 2] = h, -h
    lam_h = sp.expected_matrix(t, q + dq).lambda2
    assert (lam_h - lam) / h == pytest.approx(g[0, 1] - g[0, 2], rel=1e-3, abs=1e-6)


@settings(max_examples=25, deadline=None)
@given(m=st.integers(2, 9), seed=st.integers(0, 2**32 - 1))
def test_contraction_inequalities(m, seed):
    rng = np.random.default_rng(seed)
    t = tp.random_connected(m, 0.4, rng)
    q = sp.random_q(t, rng)
    lam2 = sp.expected_matrix(t, q).lambda2
    shift = rng.standard_normal()
    rep = sp.contraction_check(sp.gossip_matrix_sampler(t, q),
                               lambda r, n: r.standard_normal((n, m)) + shift, 4000, lam2, rng)
    assert rep.holds(sigmas=4)


@settings(max_examples=30, deadline=None)
@given(m=st.integers(2, 12), seed=st.integers(0, 2**32 - 1))
def test_expected_matrix_structure(m, seed):
    rng = np.random.default_rng(seed)
    t = tp.random_connected(m, 0.3, rng)
    s = sp.expected_matrix(t, sp.random_q(t, rng))
    assert abs(np.trace(s.a) - (m - 1)) < 1e-9
    assert abs(s.eigenvalues[0] - 1) < 1e-9
    np.testing.assert_allclose(s.a.sum(axis=1), 1.0, atol=1e-12)
    assert s.eigenvalues[-1] >= -1e-12
    assert 0 < s.gap <= 1 + 1e-12
    cos = abs(s.eigenvectors[:, 0].sum()) / math.sqrt(m)
    assert cos >= 1 - 1e-9
