"""Similarity from code structure: bit costs for walking between nodes.

The cost of describing a step from u to v is the codeword length of v seen
from u's position in the coding tree: walk up from u's module to the
smallest module containing both endpoints, paying each exit codeword, then
down to v, paying entry codewords and finally v's own codeword. Lower bits
mean more similar; score = -bits so that higher means more likely link.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .tree import CodingTree

__all__ = ["SimilarityScore", "mapsim_bits", "rank_candidates", "score_pairs"]

INF = math.inf


@dataclass(frozen=True)
class SimilarityScore:
    source: int
    target: int
    bits: float

    @property
    def score(self) -> float:
        return -self.bits


def _use_rate(tree: CodingTree, path: tuple[int, ...]) -> float:
    return tree.root_use if not path else tree.modules[path].use


def mapsim_bits(tree: CodingTree, u: int, v: int) -> float:
    """Bits to describe a walker step from u to v given the coding tree.

    Infinite when any codeword along the path has zero rate, which happens
    only for zero-flow endpoints or unreachable modules.
    """
    if u == v:
        raise ValueError("source and target must differ")
    path_u = tree.node_path[u]
    path_v = tree.node_path[v]
    shared = 0
    for pu, pv in zip(path_u, path_v):
        if pu != pv:
            break
        shared += 1
    ratio = 1.0
    # up from u's module, paying exit/use at every level below the meet
    for depth in range(len(path_u), shared, -1):
        mod = tree.modules[path_u[:depth]]
        use = mod.use
        if mod.exit <= 0.0 or use <= 0.0:
            return INF
        ratio *= mod.exit / use
    # down to v's module, paying enter/parent-use at every level
    for depth in range(shared + 1, len(path_v) + 1):
        mod = tree.modules[path_v[:depth]]
        parent_use = _use_rate(tree, path_v[: depth - 1])
        if mod.enter <= 0.0 or parent_use <= 0.0:
            return INF
        ratio *= mod.enter / parent_use
    p_v = float(tree.node_flow[v])
    leaf_use = _use_rate(tree, path_v)
    if p_v <= 0.0 or leaf_use <= 0.0:
        return INF
    ratio *= p_v / leaf_use
    return max(0.0, -math.log2(ratio))


def rank_candidates(tree: CodingTree, u: int, candidates) -> list[SimilarityScore]:
    """Candidates sorted by ascending bits, ties by ascending node id."""
    scored = [SimilarityScore(u, int(v), mapsim_bits(tree, u, int(v))) for v in candidates]
    scored.sort(key=lambda s: (s.bits, s.target))
    return scored


def score_pairs(tree: CodingTree, pairs) -> np.ndarray:
    """Vectorized mapsim_bits over (source, target) pairs of a 2-level tree."""
    pairs = np.asarray(pairs, dtype=np.int64)
    if pairs.size == 0:
        return np.zeros(0, dtype=np.float64)
    if any(len(path) != 1 for path in set(tree.node_path)):
        return np.array([mapsim_bits(tree, int(s), int(t)) for s, t in pairs])
    n_mod = 1 + max(path[0] for path in tree.modules)
    enter = np.zeros(n_mod)
    exit_ = np.zeros(n_mod)
    use = np.zeros(n_mod)
    for path, mod in tree.modules.items():
        enter[path[0]] = mod.enter
        exit_[path[0]] = mod.exit
        use[path[0]] = mod.use
    node_mod = np.fromiter((path[0] for path in tree.node_path), dtype=np.int64, count=tree.n)
    src = pairs[:, 0]
    dst = pairs[:, 1]
    if (src == dst).any():
        raise ValueError("source and target must differ")
    p_v = tree.node_flow[dst]
    mu = node_mod[src]
    mv = node_mod[dst]
    same = mu == mv
    with np.errstate(divide="ignore", invalid="ignore"):
        within = p_v / use[mv]
        across = (exit_[mu] / use[mu]) * (enter[mv] / tree.root_use if tree.root_use > 0 else 0.0)
        across = across * (p_v / use[mv])
        ratio = np.where(same, within, across)
        bits = np.where(
            np.isfinite(ratio) & (ratio > 0.0), -np.log2(np.maximum(ratio, 1e-323)), INF
        )
    return np.maximum(bits, 0.0)
