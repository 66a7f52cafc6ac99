import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from lossyavg import ensemble as en
from lossyavg import topology as tp


def _random_seq(m, T, rng):
    edges = tp.make_complete(m).sorted_edges()
    return [edges[k] for k in rng.integers(len(edges), size=T)]


def test_fresh_state():
    s = en.init_state(4)
    assert all(s.second_moment(i) == 1.0 for i in range(4))
    assert s.cross_moment(0, 3) == 0.0
    assert en.wz_correlation(s, 1, 2) == 0.0
    with pytest.raises(en.EnsembleError):
        en.init_state(1)


def test_two_node_exchange_closed_form():
    d = 0.2
    s = en.apply_exchange(en.init_state(2), 0, 1, d)
    np.testing.assert_allclose(s.gamma, 0.5)
    expect = d / (4 * (1 - d))
    np.testing.assert_allclose(s.sigma_v, np.diag([expect, expect]), atol=1e-17)
    assert en.node_distortion(s, 0) == pytest.approx(expect, rel=1e-14)
    assert en.average_distortion(s) == pytest.approx(expect, rel=1e-14)


def test_apply_exchange_leaves_input_untouched():
    s = en.init_state(3)
    en.apply_exchange(s, 0, 1, 0.1)
    assert s.round == 0 and not s.participated.any()


def test_noiseless_exchange_is_plain_gossip():
    rng = np.random.default_rng(0)
    seq = _random_seq(5, 30, rng)
    s = en.run_sequence(5, seq, 0.0)
    g = np.eye(5)
    for i, j in seq:
        avg = (g[i] + g[j]) / 2
        g[i] = g[j] = avg
    np.testing.assert_array_equal(s.gamma, g)
    assert not s.sigma_v.any()


def test_exact_average_after_one_noiseless_exchange():
    s = en.run_sequence(2, [(0, 1)], 0.0)
    assert en.node_distortions(s).tolist() == [0.0, 0.0]
    assert en.wz_correlation(s, 0, 1) == 1.0


def test_exchange_errors():
    s = en.init_state(3)
    with pytest.raises(en.EnsembleError):
        s.exchange_(1, 1, 0.1)
    with pytest.raises(en.EnsembleError):
        s.exchange_(0, 1, 1.0)


@pytest.mark.parametrize("m", [2, 3, 9])
def test_idle_network_distortion(m):
    assert en.average_distortion(en.init_state(m)) == (m - 1) / m**2


def test_idle_node_uses_own_scaled_source():
    s = en.run_sequence(4, [(0, 1)], 0.1)
    assert en.node_distortion(s, 3) == pytest.approx(3 / 16, rel=1e-15)


@settings(max_examples=60, deadline=None)
@given(m=st.integers(2, 10), T=st.integers(0, 60), d=st.floats(0.0, 0.95),
       seed=st.integers(0, 2**32 - 1))
def test_state_invariants(m, T, d, seed):
    s = en.run_sequence(m, _random_seq(m, T, np.random.default_rng(seed)), d)
    assert (s.gamma >= 0).all()
    np.testing.assert_allclose(s.gamma.sum(axis=1), 1.0, atol=1e-12)
    assert (s.sigma_v == s.sigma_v.T).all()
    assert np.linalg.eigvalsh(s.sigma_v).min() >= -1e-10
    assert (np.diag(s.gamma) >= 2.0 ** -s.selections).all()
    assert (en.node_distortions(s) >= 0).all()
    assert 0.0 <= en.wz_correlation(s, 0, 1) <= 1.0


def test_sigma_stays_psd_over_long_runs():
    s = en.run_sequence(8, _random_seq(8, 1000, np.random.default_rng(9)), 0.3)
    assert np.linalg.eigvalsh(s.sigma_v).min() >= -1e-9


def test_json_round_trip():
    s = en.run_sequence(4, [(0, 1), (2, 3), (1, 2)], 0.05)
    back = en.EnsembleState.from_json(s.to_json())
    np.testing.assert_array_equal(back.gamma, s.gamma)
    np.testing.assert_array_equal(back.sigma_v, s.sigma_v)
    assert back.round == 3 and back.selections.tolist() == s.selections.tolist()
    assert back.participated.tolist() == s.participated.tolist()


def test_batch_engine_matches_single_engine():
    rng = np.random.default_rng(4)
    m, T, runs = 6, 25, 5
    seqs = [_random_seq(m, T, rng) for _ in range(runs)]
    batch = en.BatchEnsemble(runs, m)
    for t in range(T):
        i = np.array([s[t][0] for s in seqs])
        j = np.array([s[t][1] for s in seqs])
        batch.exchange(i, j, 0.1)
    for r, seq in enumerate(seqs):
        single = en.run_sequence(m, seq, 0.1)
        np.testing.assert_allclose(batch.node_distortions()[r], en.node_distortions(single), rtol=1e-12)


def test_engine_matches_monte_carlo():
    seq = _random_seq(4, 20, np.random.default_rng(21))
    state = en.run_sequence(4, seq, 0.05)
    mc = en.monte_carlo_run(4, seq, 0.05, 100_000, seed=17)
    z = np.abs(en.node_distortions(state) - mc.distortion) / mc.distortion_se
    assert (z < 3).all(), z


def test_monte_carlo_correlation_estimate():
    seq = _random_seq(10, 50, np.random.default_rng(8))
    state = en.run_sequence(10, seq, 0.1)
    mc = en.monte_carlo_run(10, seq, 0.1, 50_000, seed=3)
    i, j = seq[-1]
    est, se = mc.wz_correlation(i, j)
    assert abs(est - en.wz_correlation(state, i, j)) < 3 * se


def test_monte_carlo_is_deterministic_and_reaches_consensus():
    seq = [(0, 1), (1, 2), (0, 2)] * 20
    a = en.monte_carlo_run(3, seq, 0.0, 5000, seed=1)
    b = en.monte_carlo_run(3, seq, 0.0, 5000, seed=1)
    np.testing.assert_array_equal(a.distortion, b.distortion)
    assert a.avg_distortion < 1e-12


def test_non_gaussian_sources_have_unit_power():
    rng = np.random.default_rng(0)
    for kind in en.SOURCE_KINDS:
        x = en.draw_sources(rng, kind, 200_000)
        assert (x**2).mean() == pytest.approx(1.0, abs=0.02)
    with pytest.raises(en.EnsembleError):
        en.draw_sources(rng, "cauchy", 3)


def test_complete_graph_expectation_matches_seeded_runs():
    from lossyavg import protocols as pr
    from lossyavg import spectral as sp

    m, d, T = 6, 0.1, 60
    t = tp.make_complete(m)
    edges = pr.gossip_edges(t, sp.uniform_q(t), T, 4000, seed=12)
    _, track = pr.run_gossip_batch(m, edges, d, record_every=1)
    exact = en.expected_distortion_complete(m, d, T)
    assert exact[0] == (m - 1) / m**2
    se = np.maximum(track.std(axis=1, ddof=1) / np.sqrt(track.shape[1]), 1e-12)
    assert (np.abs(track.mean(axis=1) - exact) / se).max() < 4.5
