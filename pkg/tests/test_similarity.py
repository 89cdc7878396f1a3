"""Step-cost similarity: closed forms, dense oracles, ranking order."""

import math

import numpy as np
import pytest

import flowcode as fc
from flowcode.tree import CodingTree, TreeModule

from conftest import (
    dense_transition,
    random_network,
    stationary_dense,
)


def two_triangles():
    links = [(0, 1), (0, 2), (1, 2), (3, 4), (3, 5), (4, 5), (2, 3)]
    return fc.Network.from_links([(a, b, 1.0) for a, b in links], directed=False, n=6)


def tree_for(net, membership, correction=None):
    model = fc.build_flow_model(net, correction=correction)
    fc.visit_rates(model)
    return fc.build_two_level_tree(model, np.asarray(membership))


def dense_bits(net, membership, correction, u, v):
    # independent reconstruction: dense flow matrix, explicit module rates
    t = dense_transition(net, correction=correction)
    fm = fc.build_flow_model(net, correction=correction)
    p = stationary_dense(t, x0=fm.out_mass / fm.out_mass.sum())
    member = np.asarray(membership)
    f = p[:, None] * t
    mods = np.unique(member)
    enter = {m: f[np.ix_(member != m, member == m)].sum() for m in mods}
    exit_ = {m: f[np.ix_(member == m, member != m)].sum() for m in mods}
    use = {m: exit_[m] + p[member == m].sum() for m in mods}
    root_use = sum(enter.values())
    mu, mv = member[u], member[v]
    if p[v] <= 0 or use[mv] <= 0:
        return math.inf
    ratio = p[v] / use[mv]
    if mu != mv:
        if exit_[mu] <= 0 or use[mu] <= 0 or enter[mv] <= 0 or root_use <= 0:
            return math.inf
        ratio *= (exit_[mu] / use[mu]) * (enter[mv] / root_use)
    return -math.log2(ratio)


class TestClosedForms:
    def test_within_module_power_of_two(self):
        tree = tree_for(two_triangles(), [0, 0, 0, 1, 1, 1])
        # p_1 = 2/14, module use = 8/14, ratio exactly 1/4
        assert fc.mapsim_bits(tree, 0, 1) == pytest.approx(2.0, rel=1e-12)
        assert fc.mapsim_bits(tree, 0, 2) == pytest.approx(math.log2(8 / 3), rel=1e-12)

    def test_cross_module_worked_example(self):
        tree = tree_for(two_triangles(), [0, 0, 0, 1, 1, 1])
        # exit/use = 1/8, enter/root_use = 1/2, p_4/use = 1/4
        assert fc.mapsim_bits(tree, 0, 4) == pytest.approx(6.0, rel=1e-12)
        assert fc.mapsim_bits(tree, 0, 3) == pytest.approx(math.log2(128 / 3), rel=1e-12)

    def test_symmetric_graph_symmetric_bits(self):
        tree = tree_for(two_triangles(), [0, 0, 0, 1, 1, 1])
        assert fc.mapsim_bits(tree, 0, 4) == pytest.approx(fc.mapsim_bits(tree, 4, 0), rel=1e-12)

    def test_one_module_bits_are_surprisal(self):
        net = two_triangles()
        tree = tree_for(net, [0] * 6)
        p = fc.visit_rates(fc.build_flow_model(net))
        for v in range(1, 6):
            assert fc.mapsim_bits(tree, 0, v) == pytest.approx(-math.log2(p[v]), rel=1e-12)

    def test_same_endpoint_rejected(self):
        tree = tree_for(two_triangles(), [0, 0, 0, 1, 1, 1])
        with pytest.raises(ValueError):
            fc.mapsim_bits(tree, 3, 3)
        with pytest.raises(ValueError):
            fc.score_pairs(tree, [(0, 1), (3, 3)])


class TestDenseOracle:
    @pytest.mark.parametrize("correction", [None, 50])
    def test_matches_dense_reconstruction(self, correction):
        rng = np.random.default_rng(7)
        for seed in range(6):
            net = random_network(seed, n=9, directed=seed % 2 == 1, weighted=seed % 3 == 0)
            member = rng.integers(0, 3, size=net.n)
            tree = tree_for(net, member, correction)
            for _ in range(12):
                u, v = rng.choice(net.n, size=2, replace=False)
                got = fc.mapsim_bits(tree, int(u), int(v))
                want = dense_bits(net, member, correction, int(u), int(v))
                if math.isinf(want):
                    assert math.isinf(got)
                else:
                    assert got == pytest.approx(want, rel=1e-9, abs=1e-9)


class TestZeroFlow:
    def net_with_isolate(self):
        return fc.Network.from_links([(0, 1, 1.0), (1, 2, 1.0)], directed=False, n=4)

    def test_unvisited_target_is_infinite(self):
        tree = tree_for(self.net_with_isolate(), [0, 0, 0, 1])
        assert math.isinf(fc.mapsim_bits(tree, 0, 3))

    def test_unvisited_source_module_is_infinite(self):
        tree = tree_for(self.net_with_isolate(), [0, 0, 0, 1])
        assert math.isinf(fc.mapsim_bits(tree, 3, 0))

    def test_isolate_stays_unreachable_under_teleportation(self):
        # prior links need nonzero degree at both ends
        tree = tree_for(self.net_with_isolate(), [0, 0, 0, 1], correction=50)
        assert math.isinf(fc.mapsim_bits(tree, 0, 3))

    def test_teleportation_bridges_components(self):
        net = fc.Network.from_links(
            [(0, 1, 1.0), (1, 2, 1.0), (3, 4, 1.0)], directed=False, n=5
        )
        plain = tree_for(net, [0, 0, 0, 1, 1])
        glued = tree_for(net, [0, 0, 0, 1, 1], correction=50)
        assert math.isinf(fc.mapsim_bits(plain, 0, 3))
        assert math.isfinite(fc.mapsim_bits(glued, 0, 3))
        assert math.isfinite(fc.mapsim_bits(glued, 3, 0))

    def test_infinite_bits_rank_last(self):
        tree = tree_for(self.net_with_isolate(), [0, 0, 0, 1])
        ranked = fc.rank_candidates(tree, 0, [1, 2, 3])
        assert ranked[-1].target == 3
        assert math.isinf(ranked[-1].bits)
        assert ranked[-1].score == -math.inf


class TestRanking:
    def test_sorted_by_bits_then_id(self):
        tree = tree_for(two_triangles(), [0, 0, 0, 1, 1, 1])
        ranked = fc.rank_candidates(tree, 2, [5, 4, 1, 0, 3])
        bits = [s.bits for s in ranked]
        assert bits == sorted(bits)
        # nodes 0 and 1 tie exactly by symmetry; lower id first
        pos0 = [s.target for s in ranked].index(0)
        assert ranked[pos0 + 1].target == 1
        assert ranked[pos0].bits == ranked[pos0 + 1].bits

    def test_score_is_negated_bits(self):
        tree = tree_for(two_triangles(), [0, 0, 0, 1, 1, 1])
        for s in fc.rank_candidates(tree, 0, [1, 2, 3]):
            assert s.score == -s.bits
            assert s.source == 0


class TestScorePairs:
    @pytest.mark.parametrize("correction", [None, 50])
    def test_agrees_with_scalar(self, correction):
        rng = np.random.default_rng(11)
        for seed in range(5):
            net = random_network(seed + 20, n=10, directed=seed % 2 == 0)
            member = rng.integers(0, 4, size=net.n)
            tree = tree_for(net, member, correction)
            pairs = [
                (int(u), int(v))
                for u in range(net.n)
                for v in range(net.n)
                if u != v
            ]
            vec = fc.score_pairs(tree, pairs)
            for (u, v), got in zip(pairs, vec):
                want = fc.mapsim_bits(tree, u, v)
                if math.isinf(want):
                    assert math.isinf(got)
                else:
                    assert got == pytest.approx(want, rel=1e-9, abs=1e-12)

    def test_empty_pairs(self):
        tree = tree_for(two_triangles(), [0, 0, 0, 1, 1, 1])
        out = fc.score_pairs(tree, np.zeros((0, 2), dtype=np.int64))
        assert out.shape == (0,)


class TestDeeperTrees:
    def build_three_level(self):
        # same flows as the two-module split, nested under one super module
        two = tree_for(two_triangles(), [0, 0, 0, 1, 1, 1])
        a = two.modules[(0,)]
        b = two.modules[(1,)]
        modules = {
            (0,): TreeModule(path=(0,), enter=0.0, exit=0.0, use=a.enter + b.enter),
            (0, 0): TreeModule(path=(0, 0), enter=a.enter, exit=a.exit, use=a.use),
            (0, 1): TreeModule(path=(0, 1), enter=b.enter, exit=b.exit, use=b.use),
        }
        paths = tuple((0, p[0]) for p in two.node_path)
        return two, CodingTree(
            node_path=paths,
            node_flow=two.node_flow.copy(),
            modules=modules,
            root_use=0.0,
            codelength=two.codelength,
        )

    def test_nested_walk_matches_flat(self):
        two, three = self.build_three_level()
        pairs = [(u, v) for u in range(6) for v in range(6) if u != v]
        flat = fc.score_pairs(two, pairs)
        nested = fc.score_pairs(three, pairs)
        np.testing.assert_allclose(nested, flat, rtol=1e-12)

    def test_nested_scalar_walk(self):
        two, three = self.build_three_level()
        assert fc.mapsim_bits(three, 0, 4) == pytest.approx(6.0, rel=1e-12)
        assert fc.mapsim_bits(three, 0, 1) == pytest.approx(2.0, rel=1e-12)
