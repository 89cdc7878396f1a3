"""Link-weight overlays that reconnect structurally nearby nodes.

Each overlay is a sparse set of extra directed arcs, meant to be added on
top of the observed weights before building a transition model. Overlays
never carry diagonal entries.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .graph import Network, _accumulate_arcs

__all__ = [
    "WeightOverlay",
    "combine_overlays",
    "common_neighbors_overlay",
    "mixed_markov_overlay",
    "variable_markov_overlay",
    "overlay_to_edge_list",
]


@dataclass(frozen=True, eq=False)
class WeightOverlay:
    """Extra arc weights over an existing node id space, no self-pairs."""

    n: int
    src: np.ndarray
    dst: np.ndarray
    weight: np.ndarray

    @classmethod
    def from_entries(cls, n: int, entries) -> "WeightOverlay":
        su, sv, sw = [], [], []
        for u, v, w in entries:
            if u == v:
                raise ValueError("overlay entries must not be self-pairs")
            if w < 0 or not math.isfinite(w):
                raise ValueError(f"invalid overlay weight {w!r}")
            if w == 0:
                continue
            su.append(u)
            sv.append(v)
            sw.append(w)
        src, dst, weight = _accumulate_arcs(su, sv, sw, max(n, 1))
        return cls(n=n, src=src, dst=dst, weight=weight)

    @property
    def total(self) -> float:
        return float(self.weight.sum())

    def out_weight(self) -> np.ndarray:
        return np.bincount(self.src, weights=self.weight, minlength=self.n)


def combine_overlays(a: WeightOverlay, b: WeightOverlay) -> WeightOverlay:
    """Sum two overlays arc-wise; node spaces must match."""
    if a.n != b.n:
        raise ValueError(f"overlay node counts differ: {a.n} vs {b.n}")
    src = np.concatenate([a.src, b.src])
    dst = np.concatenate([a.dst, b.dst])
    weight = np.concatenate([a.weight, b.weight])
    src, dst, weight = _accumulate_arcs(src, dst, weight, max(a.n, 1))
    return WeightOverlay(n=a.n, src=src, dst=dst, weight=weight)


def overlay_to_edge_list(overlay: WeightOverlay, labels) -> str:
    """Serialize overlay arcs in the standard edge-list text format."""
    lines = [
        f"{labels[u]} {labels[v]} {w:.16e}"
        for u, v, w in zip(overlay.src.tolist(), overlay.dst.tolist(), overlay.weight.tolist())
    ]
    return "\n".join(lines) + ("\n" if lines else "")


def common_neighbors_overlay(net: Network) -> WeightOverlay:
    """Connect every pair sharing a neighbor, weighted by Jaccard similarity.

    Neighborhoods ignore direction and weights. Each qualifying unordered
    pair receives |N(u) & N(v)| / |N(u) | N(v)| in both directions.
    """
    adj: list[set[int]] = [set() for _ in range(net.n)]
    for u, v in zip(net.src.tolist(), net.dst.tolist()):
        adj[u].add(v)
        adj[v].add(u)
    pairs: set[tuple[int, int]] = set()
    for x in range(net.n):
        ns = sorted(adj[x])
        for i in range(len(ns)):
            for j in range(i + 1, len(ns)):
                pairs.add((ns[i], ns[j]))
    entries = []
    for u, v in sorted(pairs):
        inter = len(adj[u] & adj[v])
        union = len(adj[u] | adj[v])
        w = inter / union
        entries.append((u, v, w))
        entries.append((v, u, w))
    return WeightOverlay.from_entries(net.n, entries)


def mixed_markov_overlay(net: Network, beta: float = 0.7) -> WeightOverlay:
    """Blend one- and two-step transition probabilities into link weights.

    W = beta * T + (1 - beta) * T^2 with T the row-normalized observed
    transitions; the diagonal is zeroed after the combination.
    """
    if not 0.0 <= beta <= 1.0:
        raise ValueError(f"beta must lie in [0, 1], got {beta}")
    n = net.n
    weights = sp.csr_matrix((net.weight, (net.src, net.dst)), shape=(n, n))
    row = np.asarray(weights.sum(axis=1)).ravel()
    inv = np.where(row > 0, 1.0 / np.where(row > 0, row, 1.0), 0.0)
    trans = sp.diags(inv) @ weights
    mix = beta * trans + (1.0 - beta) * (trans @ trans)
    mix = sp.csr_matrix(mix)
    mix.setdiag(0.0)
    mix.eliminate_zeros()
    coo = mix.tocoo()
    return WeightOverlay.from_entries(n, zip(coo.row.tolist(), coo.col.tolist(), coo.data.tolist()))


def _entropy_bits(weights: list[float], total: float) -> float:
    h = 0.0
    for w in weights:
        q = w / total
        if q > 0:
            h -= q * math.log2(q)
    return h


def variable_markov_overlay(net: Network, fm, absorption: float = 0.5) -> WeightOverlay:
    """Deposit walk stopping probabilities as link weights.

    From each node with out-links, a walker spends an information budget of
    log2(k_max) bits, where k_max is the largest out-degree. The first step
    costs the entropy of the node's out-weight distribution and is always
    affordable. Each later step chooses among out-neighbors not already on
    the path, costs the entropy of their renormalized weights, and is
    preceded by a stop decision with probability ``absorption``; an empty
    candidate set or an unaffordable step forces a stop. The walk's stopping
    distribution, scaled by the node's visit rate times the total network
    weight, becomes out-weights of the source, so the overlay redistributes
    exactly the observed total weight across sources with positive visit
    rate.

    ``fm`` must be a flow model of ``net`` with visit rates computed.
    """
    if not 0.0 < absorption < 1.0:
        raise ValueError(f"absorption must lie in (0, 1), got {absorption}")
    if fm.p is None:
        raise ValueError("variable-markov overlay needs visit rates on the flow model")
    if fm.n != net.n:
        raise ValueError("flow model node count differs from network node count")
    n = net.n
    out_adj: list[list[tuple[int, float]]] = [[] for _ in range(n)]
    for u, v, w in zip(net.src.tolist(), net.dst.tolist(), net.weight.tolist()):
        out_adj[u].append((v, w))
    for lst in out_adj:
        lst.sort()
    k_out = net.k_out
    k_max = int(k_out.max()) if n else 0
    if k_max == 0:
        return WeightOverlay.from_entries(n, [])
    budget = math.log2(k_max)
    w_tot = net.w_tot
    keep = 1.0 - absorption
    tol = 1e-12

    entries: list[tuple[int, int, float]] = []
    on_path = np.zeros(n, dtype=bool)

    for source in range(n):
        if k_out[source] == 0:
            continue
        scale = float(fm.p[source]) * w_tot
        if scale == 0.0:
            continue
        deposits: dict[int, float] = {}
        on_path[source] = True
        # (node, unstopped probability mass, remaining budget) processed
        # depth-first with explicit backtracking so long zero-cost chains
        # cannot exhaust the recursion limit
        first = out_adj[source]
        s_first = sum(w for _, w in first)
        cost0 = _entropy_bits([w for _, w in first], s_first)
        stack: list[tuple[str, int, float, float]] = []
        if cost0 <= budget + tol:
            for v, w in reversed(first):
                stack.append(("visit", v, w / s_first, budget - cost0))
        while stack:
            action, x, massx, rem = stack.pop()
            if action == "leave":
                on_path[x] = False
                continue
            cands = [(v, w) for v, w in out_adj[x] if not on_path[v]]
            if cands:
                s_c = sum(w for _, w in cands)
                cost = _entropy_bits([w for _, w in cands], s_c)
                affordable = cost <= rem + tol
            else:
                affordable = False
            if not affordable:
                deposits[x] = deposits.get(x, 0.0) + massx
                continue
            deposits[x] = deposits.get(x, 0.0) + massx * absorption
            cont = massx * keep
            on_path[x] = True
            stack.append(("leave", x, 0.0, 0.0))
            for v, w in reversed(cands):
                stack.append(("visit", v, cont * w / s_c, rem - cost))
        on_path[source] = False
        for x in sorted(deposits):
            entries.append((source, x, scale * deposits[x]))
    return WeightOverlay.from_entries(n, entries)
