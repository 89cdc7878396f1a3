"""Shared fixtures and independent reference implementations.

The reference helpers here recompute quantities with dense matrices and
exhaustive enumeration so the package's sparse incremental code can be
checked against something slow but obviously correct.
"""

import math

import numpy as np
import pytest

from flowcode import Network, build_flow_model, empirical_model


def random_network(seed, n=None, directed=None, weighted=None, density=0.35):
    """Small random graph with reproducible shape choices."""
    rng = np.random.default_rng(seed)
    if n is None:
        n = int(rng.integers(4, 11))
    if directed is None:
        directed = bool(rng.integers(2))
    if weighted is None:
        weighted = bool(rng.integers(2))
    links = []
    for u in range(n):
        for v in range(n):
            if u == v:
                continue
            if not directed and u > v:
                continue
            if rng.random() < density:
                w = float(rng.integers(1, 6)) if weighted else 1.0
                links.append((u, v, w))
    if not links:
        links = [(0, 1, 1.0)]
    return Network.from_links(links, directed=directed, n=n)


def planted_network(n, n_blocks, seed, avg_degree=5.0, p_intra=0.85):
    """Planted-partition graph: links mostly fall within equal-size blocks."""
    rng = np.random.default_rng(seed)
    member = np.array([i * n_blocks // n for i in range(n)])
    target = int(n * avg_degree / 2)
    links = set()
    tries = 0
    while len(links) < target and tries < 200 * target:
        tries += 1
        u = int(rng.integers(n))
        if rng.random() < p_intra:
            same = np.flatnonzero(member == member[u])
            v = int(same[rng.integers(len(same))])
        else:
            v = int(rng.integers(n))
        if u != v:
            links.add((min(u, v), max(u, v)))
    net = Network.from_links(
        [(u, v, 1.0) for u, v in sorted(links)], directed=False, n=n
    )
    return net, member


def dolphin_scale_network(seed=62159):
    """62-node, 159-edge undirected surrogate with hubby community structure.

    Four communities (16/16/15/15), each wired as a hub star plus a ring
    among the remaining members, topped up with random intra-community
    links and 24 inter-community links to reach exactly 159 edges.
    """
    rng = np.random.default_rng(seed)
    sizes = [16, 16, 15, 15]
    blocks, start = [], 0
    for s in sizes:
        blocks.append(list(range(start, start + s)))
        start += s
    n = start
    links = set()

    def add(u, v):
        if u != v:
            links.add((min(u, v), max(u, v)))

    for block in blocks:
        hub = block[0]
        for v in block[1:]:
            add(hub, v)
        rest = block[1:]
        for i in range(len(rest)):
            add(rest[i], rest[(i + 1) % len(rest)])
    inter_pool = []
    for bi in range(4):
        for bj in range(bi + 1, 4):
            for u in blocks[bi][:4]:
                for v in blocks[bj][:4]:
                    inter_pool.append((u, v))
    idx = rng.choice(len(inter_pool), size=24, replace=False)
    for i in sorted(idx.tolist()):
        add(*inter_pool[i])
    intra_pool = [
        (b[i], b[j])
        for b in blocks
        for i in range(len(b))
        for j in range(i + 1, len(b))
        if (b[i], b[j]) not in links
    ]
    need = 159 - len(links)
    idx = rng.choice(len(intra_pool), size=need, replace=False)
    for i in sorted(idx.tolist()):
        links.add(intra_pool[i])
    net = Network.from_links(
        [(u, v, 1.0) for u, v in sorted(links)], directed=False, n=n
    )
    assert net.n == 62 and len(net.links()) == 159
    return net


def set_partitions(items):
    """Yield every partition of `items` as a list of blocks."""
    items = list(items)
    if not items:
        yield []
        return
    head, rest = items[0], items[1:]
    for sub in set_partitions(rest):
        for i in range(len(sub)):
            yield sub[:i] + [[head] + sub[i]] + sub[i + 1 :]
        yield [[head]] + sub


def partition_to_membership(blocks, n):
    member = [0] * n
    for m, block in enumerate(blocks):
        for u in block:
            member[u] = m
    return member


def dense_weights(net, extra=None):
    """Dense arc-weight matrix; undirected arcs are already stored both ways."""
    w = np.zeros((net.n, net.n))
    np.add.at(w, (net.src, net.dst), net.weight)
    if extra is not None:
        np.add.at(w, (np.asarray(extra.src), np.asarray(extra.dst)), np.asarray(extra.weight))
    return w


def dense_transition(net, correction=None, extra=None):
    """Transition matrix rebuilt row by row from explicit pair weights.

    Deliberately quadratic: observed weights plus, when a correction is
    given, the full matrix of prior weights, each row normalized directly.
    Rows with no mass at all fall back to a uniform draw over nodes with
    positive observed in-mass.
    """
    n = net.n
    w = dense_weights(net, extra)
    gamma = np.zeros((n, n))
    if correction is not None:
        lam = math.log(n + correction) / (n + correction)
        ssum = float(net.s_in.sum() + net.s_out.sum())
        g = float(net.k_in.sum() + net.k_out.sum()) / ssum if ssum > 0 else 0.0
        for u in range(n):
            for v in range(n):
                if net.k_out[u] > 0 and net.k_in[v] > 0:
                    gamma[u, v] = (
                        lam * g * net.s_out[u] * net.s_in[v] / (net.k_out[u] * net.k_in[v])
                    )
    rows = w + gamma
    rowsum = rows.sum(axis=1)
    in_mass = w.sum(axis=0)
    if (in_mass > 0).any():
        fallback = (in_mass > 0) / float((in_mass > 0).sum())
    else:
        fallback = np.full(n, 1.0 / n)
    t = np.zeros((n, n))
    for u in range(n):
        if rowsum[u] > 0:
            t[u] = rows[u] / rowsum[u]
        else:
            t[u] = fallback
    return t


def stationary_dense(t, x0=None, tol=1e-13):
    """Stationary distribution by lazy iteration x <- (x + xT) / 2.

    Laziness keeps periodic structures from oscillating without moving the
    fixed points. Reducible chains have many stationary distributions; the
    start vector decides how mass splits across closed classes, so callers
    comparing against another solver must pass the same start.
    """
    n = t.shape[0]
    p = np.full(n, 1.0 / n) if x0 is None else np.asarray(x0, dtype=float) / np.sum(x0)
    for _ in range(200000):
        nxt = p @ t
        if np.abs(nxt - p).max() < tol:
            out = nxt / nxt.sum()
            return out
        p = 0.5 * (p + nxt)
        p /= p.sum()
    raise AssertionError("dense stationary iteration did not converge")


def plogp(x):
    return x * math.log2(x) if x > 0 else 0.0


def naive_codelength(net, membership, correction=None, extra=None, p=None, t=None):
    """Map equation evaluated from dense per-arc flows, no shortcuts."""
    n = net.n
    if t is None:
        t = dense_transition(net, correction, extra)
    if p is None:
        p = stationary_dense(t)
    f = p[:, None] * t
    member = np.asarray(membership)
    mods = sorted(set(member.tolist()))
    enter = {m: 0.0 for m in mods}
    exit_ = {m: 0.0 for m in mods}
    for u in range(n):
        for v in range(n):
            if member[u] != member[v]:
                exit_[member[u]] += f[u, v]
                enter[member[v]] += f[u, v]
    total_enter = sum(enter.values())
    val = plogp(total_enter)
    for m in mods:
        val -= plogp(enter[m])
        val -= plogp(exit_[m])
        p_m = exit_[m] + p[member == m].sum()
        val += plogp(p_m)
    for u in range(n):
        val -= plogp(p[u])
    return val


@pytest.fixture(scope="session")
def small_networks():
    return [random_network(seed) for seed in range(20)]


@pytest.fixture(scope="session")
def method_models():
    """One network per (directed, weighted) corner, standard and global."""
    out = []
    for seed in (3, 4, 5, 6):
        net = random_network(seed, n=9)
        out.append(empirical_model(net))
        out.append(build_flow_model(net, correction=50.0))
    return out
