"""Transition-model checks against a dense quadratic rebuild."""

import math

import numpy as np
import pytest

from flowcode import (
    ConvergenceError,
    Network,
    build_flow_model,
    config_model_factor,
    config_model_weight,
    empirical_model,
    prior_strength,
    prior_weight,
    visit_rates,
)

from conftest import dense_transition, random_network, stationary_dense


def test_prior_strength_matches_closed_form():
    assert prior_strength(424, 50) == pytest.approx(math.log(474) / 474, abs=1e-15)
    assert prior_strength(424, 50) == pytest.approx(0.012998, abs=5e-7)
    assert prior_strength(10, 0) == pytest.approx(math.log(10) / 10)


def test_prior_strength_rejects_bad_counts():
    with pytest.raises(ValueError):
        prior_strength(0)
    with pytest.raises(ValueError):
        prior_strength(1, 0)


def test_config_model_weight_unweighted_is_one():
    net = Network.from_links([(0, 1, 1.0), (1, 2, 1.0), (0, 2, 1.0)], directed=False)
    assert config_model_factor(net) == pytest.approx(1.0)
    for u in range(3):
        for v in range(3):
            assert config_model_weight(net, u, v) == pytest.approx(1.0)


def test_config_model_weight_zero_degree_rule():
    net = Network.from_links([(0, 1, 2.0)], directed=True, n=3)
    # node 0 has no in-links, node 1 no out-links, node 2 nothing at all
    assert config_model_weight(net, 0, 0) == 0.0
    assert config_model_weight(net, 1, 1) == 0.0
    assert config_model_weight(net, 2, 1) == 0.0
    assert config_model_weight(net, 0, 2) == 0.0
    assert config_model_weight(net, 0, 1) > 0.0


def test_prior_weight_factorizes():
    for seed in range(10):
        net = random_network(seed)
        lam = prior_strength(net.n, 50)
        g = config_model_factor(net)
        rng = np.random.default_rng(seed)
        for _ in range(20):
            u, v = int(rng.integers(net.n)), int(rng.integers(net.n))
            direct = prior_weight(net, u, v, 50)
            if net.k_out[u] == 0 or net.k_in[v] == 0:
                assert direct == 0.0
            else:
                part = (net.s_out[u] / net.k_out[u]) * (net.s_in[v] / net.k_in[v])
                assert direct == pytest.approx(lam * g * part, rel=1e-12)


@pytest.mark.parametrize("correction", [None, 0, 50])
@pytest.mark.parametrize("seed", range(10))
def test_rows_match_dense_rebuild(seed, correction):
    net = random_network(seed)
    fm = build_flow_model(net, correction=correction)
    t = dense_transition(net, correction)
    for u in range(net.n):
        np.testing.assert_allclose(fm.transition_row(u), t[u], atol=1e-12)


@pytest.mark.parametrize("correction", [None, 50])
def test_rows_are_stochastic(correction, small_networks):
    for net in small_networks:
        fm = build_flow_model(net, correction=correction)
        for u in range(net.n):
            assert fm.transition_row(u).sum() == pytest.approx(1.0, abs=1e-12)
            assert (fm.transition_row(u) >= 0).all()


def test_pointwise_transition_agrees_with_row():
    net = random_network(12, n=8)
    fm = build_flow_model(net, correction=50)
    for u in range(net.n):
        row = fm.transition_row(u)
        for v in range(net.n):
            assert fm.transition(u, v) == pytest.approx(row[v], abs=1e-14)


def test_step_matches_dense_product():
    for seed in range(6):
        net = random_network(seed, n=10)
        fm = build_flow_model(net, correction=50)
        t = dense_transition(net, 50)
        rng = np.random.default_rng(seed)
        x = rng.random(net.n)
        x /= x.sum()
        np.testing.assert_allclose(fm.step(x), x @ t, atol=1e-12)


def test_alpha_between_zero_and_one():
    net = random_network(7, n=9)
    fm = build_flow_model(net, correction=50)
    assert (fm.alpha >= 0).all() and (fm.alpha <= 1).all()
    plain = empirical_model(net)
    # without the prior, only dangling rows teleport
    linked = net.k_out > 0
    assert np.allclose(plain.alpha[linked], 0.0)


def test_dangling_rows_use_uniform_reachable():
    net = Network.from_links([(0, 1, 1.0), (2, 1, 1.0)], directed=True, n=4)
    fm = empirical_model(net)
    # nodes 1 and 3 have no out-links; only node 1 has in-mass
    row = fm.transition_row(1)
    expect = np.zeros(4)
    expect[1] = 1.0
    np.testing.assert_allclose(row, expect)
    np.testing.assert_allclose(fm.transition_row(3), expect)


def test_overlay_arcs_added_before_normalization():
    net = Network.from_links([(0, 1, 1.0)], directed=True, n=3)

    class Extra:
        src = np.array([0, 1])
        dst = np.array([2, 2])
        weight = np.array([1.0, 4.0])
        n = 3

    fm = build_flow_model(net, extra=Extra())
    np.testing.assert_allclose(fm.transition_row(0), [0.0, 0.5, 0.5])
    np.testing.assert_allclose(fm.transition_row(1), [0.0, 0.0, 1.0])


def test_overlay_node_count_mismatch():
    net = Network.from_links([(0, 1, 1.0)], directed=True, n=2)

    class Extra:
        src = np.array([0])
        dst = np.array([1])
        weight = np.array([1.0])
        n = 5

    with pytest.raises(ValueError):
        build_flow_model(net, extra=Extra())


def test_total_weight_tracks_prior_mass():
    net = random_network(3, weighted=False)
    plain = empirical_model(net)
    assert plain.total_weight == pytest.approx(net.w_tot)
    reg = build_flow_model(net, correction=50)
    lam = prior_strength(net.n, 50)
    n_in = int((net.k_in > 0).sum())
    n_out = int((net.k_out > 0).sum())
    # unweighted: every prior pair weighs lam
    assert reg.total_weight == pytest.approx(net.w_tot + lam * n_in * n_out, rel=1e-12)


@pytest.mark.parametrize("correction", [None, 50])
def test_visit_rates_match_dense_stationary(correction, small_networks):
    for net in small_networks:
        fm = build_flow_model(net, correction=correction)
        p = visit_rates(fm)
        assert p.sum() == pytest.approx(1.0, abs=1e-10)
        t = dense_transition(net, correction)
        np.testing.assert_allclose(p, stationary_dense(t, x0=fm.out_mass), atol=1e-8)
        # stationarity under the model's own step
        np.testing.assert_allclose(fm.step(p), p, atol=1e-10)


def test_visit_rates_cached():
    net = random_network(5)
    fm = build_flow_model(net, correction=50)
    p1 = visit_rates(fm)
    assert visit_rates(fm) is p1


def test_visit_rates_convergence_error_carries_residual():
    net = random_network(5, n=8)
    fm = build_flow_model(net, correction=50)
    with pytest.raises(ConvergenceError) as err:
        visit_rates(fm, tol=1e-30, max_iters=3)
    assert err.value.residual > 0


def test_empty_network_rejected():
    with pytest.raises(ValueError):
        build_flow_model(Network.from_links([], directed=True, n=0))
