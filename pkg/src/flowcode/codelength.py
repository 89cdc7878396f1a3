"""Two-level codelength bookkeeping over a factorized flow decomposition.

All quantities live in bits. The decomposition used throughout:

    L = plogp(q) - sum_m plogp(q_m) - sum_m plogp(exit_m)
        + sum_m plogp(use_m) - sum_u plogp(p_u)

with q_m the module entry rate, exit_m the module exit rate, use_m the
module codebook rate exit_m + sum of member visit rates, and q the total
entry rate. Flows are represented as stored-arc flows plus teleport
channels (a per-node mass vector paired with one shared target
distribution), which keeps every evaluation O(arcs + n + modules) even when
the underlying model mixes in a dense-but-factorized prior.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .flow import FlowModel

__all__ = [
    "FlowSystem",
    "ModuleFlows",
    "PartitionState",
    "delta_move",
    "flow_system",
    "module_flows",
    "one_level_codelength",
    "plogp",
    "two_level_codelength",
]


def plogp(x: float) -> float:
    """x * log2(x), with the 0 * log 0 := 0 convention."""
    return x * math.log2(x) if x > 0.0 else 0.0


def _plogp_arr(x: np.ndarray) -> np.ndarray:
    out = np.zeros_like(x, dtype=np.float64)
    mask = x > 0
    out[mask] = x[mask] * np.log2(x[mask])
    return out


def one_level_codelength(p) -> float:
    """Entropy in bits of a visit-rate distribution."""
    p = np.asarray(p, dtype=np.float64)
    if p.size and (p < 0).any():
        raise ValueError("visit rates must be non-negative")
    if abs(float(p.sum()) - 1.0) > 1e-9:
        raise ValueError(f"visit rates must sum to 1, got {float(p.sum())!r}")
    return float(-_plogp_arr(p).sum())


@dataclass(eq=False)
class FlowSystem:
    """Stationary one-step flows: sparse arc flows plus teleport channels.

    Each channel is (mass, target): node u sends mass[u] * target[v] to v.
    Aggregating by modules preserves this shape exactly, so coarse systems
    evaluate coarse partitions to the same codelength as their fine
    preimages.
    """

    p: np.ndarray
    flows: sp.csr_matrix
    flows_in: sp.csr_matrix
    channels: tuple[tuple[np.ndarray, np.ndarray], ...]
    arc_src: np.ndarray
    arc_dst: np.ndarray
    arc_w: np.ndarray
    out_tot: np.ndarray
    in_tot: np.ndarray
    self_flow: np.ndarray
    # plogp sum over the finest-level nodes; carried through aggregation so
    # coarse partitions evaluate to their preimage codelength
    node_term: float

    @property
    def n(self) -> int:
        return int(self.p.size)

    @classmethod
    def build(cls, p, flows, channels, node_term: float | None = None) -> "FlowSystem":
        flows = sp.csr_matrix(flows)
        flows.sum_duplicates()
        flows.sort_indices()
        flows_in = flows.T.tocsr()
        flows_in.sort_indices()
        arc_dst = flows.indices.astype(np.int64)
        arc_src = np.repeat(
            np.arange(p.size, dtype=np.int64), np.diff(flows.indptr)
        )
        arc_w = flows.data.astype(np.float64)
        out_tot = np.asarray(flows.sum(axis=1)).ravel()
        in_tot = np.asarray(flows.sum(axis=0)).ravel()
        self_flow = flows.diagonal().astype(np.float64)
        for mass, targ in channels:
            tsum = float(targ.sum())
            msum = float(mass.sum())
            out_tot = out_tot + mass * tsum
            in_tot = in_tot + msum * targ
            self_flow = self_flow + mass * targ
        p = np.asarray(p, dtype=np.float64)
        if node_term is None:
            node_term = float(_plogp_arr(p).sum())
        return cls(
            p=p,
            flows=flows,
            flows_in=flows_in,
            channels=tuple((np.asarray(m, float), np.asarray(t, float)) for m, t in channels),
            arc_src=arc_src,
            arc_dst=arc_dst,
            arc_w=arc_w,
            out_tot=out_tot,
            in_tot=in_tot,
            self_flow=self_flow,
            node_term=node_term,
        )

    @classmethod
    def from_model(cls, fm: FlowModel) -> "FlowSystem":
        if fm.p is None:
            raise ValueError("flow model has no visit rates; call visit_rates first")
        row_scale = fm.p * fm.sparse_frac
        rows = np.repeat(np.arange(fm.n), np.diff(fm.sparse_part.indptr))
        flows = fm.sparse_part.copy()
        flows.data = flows.data * row_scale[rows]
        channels = (
            (fm.p * fm.prior_frac, fm.prior_dist.astype(np.float64)),
            (fm.p * fm.dangling_frac, fm.dangling_dist.astype(np.float64)),
        )
        return cls.build(fm.p.copy(), flows, channels)

    def aggregate(self, membership: np.ndarray, n_modules: int) -> "FlowSystem":
        """Collapse nodes into their modules, preserving all flows exactly."""
        member = np.asarray(membership, dtype=np.int64)
        msrc = member[self.arc_src]
        mdst = member[self.arc_dst]
        flows = sp.csr_matrix((self.arc_w, (msrc, mdst)), shape=(n_modules, n_modules))
        p = np.bincount(member, weights=self.p, minlength=n_modules)
        channels = tuple(
            (
                np.bincount(member, weights=mass, minlength=n_modules),
                np.bincount(member, weights=targ, minlength=n_modules),
            )
            for mass, targ in self.channels
        )
        return FlowSystem.build(p, flows, channels, node_term=self.node_term)


def flow_system(model) -> FlowSystem:
    """Coerce a FlowModel or FlowSystem into the evaluation view."""
    if isinstance(model, FlowSystem):
        return model
    return FlowSystem.from_model(model)


def _check_membership(member, n: int) -> np.ndarray:
    member = np.asarray(member)
    if member.shape != (n,):
        raise ValueError(f"membership must assign all {n} nodes, got shape {member.shape}")
    if member.size and member.min() < 0:
        raise ValueError("module ids must be non-negative")
    return member.astype(np.int64)


def _compact(member: np.ndarray) -> tuple[np.ndarray, int, dict[int, int]]:
    """Relabel modules to 0..M-1 in order of first appearance by node id."""
    seen: dict[int, int] = {}
    out = np.empty_like(member)
    for i, m in enumerate(member.tolist()):
        if m not in seen:
            seen[m] = len(seen)
        out[i] = seen[m]
    return out, len(seen), seen


def _module_flow_arrays(system: FlowSystem, member: np.ndarray, n_modules: int):
    """Per-module entry rate, exit rate, codebook rate, and member flow sum."""
    msrc = member[system.arc_src]
    mdst = member[system.arc_dst]
    cross = msrc != mdst
    enter = np.bincount(mdst[cross], weights=system.arc_w[cross], minlength=n_modules)
    exit_ = np.bincount(msrc[cross], weights=system.arc_w[cross], minlength=n_modules)
    for mass, targ in system.channels:
        tm = np.bincount(member, weights=mass, minlength=n_modules)
        gm = np.bincount(member, weights=targ, minlength=n_modules)
        enter = enter + (float(mass.sum()) - tm) * gm
        exit_ = exit_ + tm * (float(targ.sum()) - gm)
    sum_p = np.bincount(member, weights=system.p, minlength=n_modules)
    use = exit_ + sum_p
    return enter, exit_, use, sum_p


@dataclass(frozen=True)
class ModuleFlows:
    """Per-module flow rates for a two-level partition."""

    module_ids: np.ndarray
    enter: np.ndarray
    exit: np.ndarray
    use: np.ndarray


def module_flows(model, membership) -> ModuleFlows:
    """Entry rate, exit rate, and codebook rate of every module."""
    system = flow_system(model)
    member = _check_membership(membership, system.n)
    ids = np.unique(member)
    index = np.searchsorted(ids, member)
    enter, exit_, use, _ = _module_flow_arrays(system, index, ids.size)
    return ModuleFlows(module_ids=ids, enter=enter, exit=exit_, use=use)


def _codelength_from_arrays(node_term: float, enter, exit_, use) -> float:
    q = float(enter.sum())
    return float(
        plogp(q)
        - _plogp_arr(enter).sum()
        - _plogp_arr(exit_).sum()
        + _plogp_arr(use).sum()
        - node_term
    )


def two_level_codelength(model, membership) -> float:
    """Codelength in bits of a two-level partition of the flow model."""
    system = flow_system(model)
    member = _check_membership(membership, system.n)
    cmember, n_mod, _ = _compact(member)
    enter, exit_, use, _ = _module_flow_arrays(system, cmember, n_mod)
    return _codelength_from_arrays(system.node_term, enter, exit_, use)


class PartitionState:
    """Mutable partition bookkeeping for greedy node moves.

    Module ids are compacted on construction. A move evaluation touches the
    moved node's arcs and the teleport channel sums only, so one pass over
    the nodes costs O(arcs + n * channels).
    """

    def __init__(self, system, membership) -> None:
        self.sys = flow_system(system)
        n = self.sys.n
        member = _check_membership(membership, n)
        self.member, n_mod, self._id_map = _compact(member)
        self.capacity = n
        enter, exit_, use, sum_p = _module_flow_arrays(self.sys, self.member, n)
        self.enter = enter
        self.exit = exit_
        self.sum_p = sum_p
        self.cnt = np.bincount(self.member, minlength=n).astype(np.int64)
        self.q_total = float(enter.sum())
        self._node_term = self.sys.node_term
        self._free: list[int] = []
        self._next_id = n_mod
        # per-channel per-module sums
        self._tmass = [np.bincount(self.member, weights=m, minlength=n) for m, _ in self.sys.channels]
        self._gtarg = [np.bincount(self.member, weights=t, minlength=n) for _, t in self.sys.channels]
        # nodes touching a teleport channel exchange flow with every module,
        # so the move search must offer them non-adjacent targets too
        active = np.zeros(n, dtype=bool)
        for mass, targ in self.sys.channels:
            active |= (mass > 0) | (targ > 0)
        self._channel_active = active

    @property
    def n(self) -> int:
        return self.sys.n

    @property
    def num_modules(self) -> int:
        return int((self.cnt > 0).sum())

    def membership(self) -> np.ndarray:
        return self.member.copy()

    def compact_membership(self) -> tuple[np.ndarray, int]:
        out, n_mod, _ = _compact(self.member)
        return out, n_mod

    def fresh_id(self) -> int | None:
        """Smallest unused module id, or None when every id is occupied."""
        while self._free and self.cnt[self._free[0]] > 0:
            heapq.heappop(self._free)
        if self._free:
            return self._free[0]
        if self._next_id < self.capacity:
            return self._next_id
        return None

    def neighbor_modules(self, u: int) -> list[int]:
        """Modules holding sparse in- or out-neighbors of u, ascending."""
        mods = set()
        f = self.sys.flows
        for v in f.indices[f.indptr[u] : f.indptr[u + 1]].tolist():
            if v != u:
                mods.add(int(self.member[v]))
        g = self.sys.flows_in
        for v in g.indices[g.indptr[u] : g.indptr[u + 1]].tolist():
            if v != u:
                mods.add(int(self.member[v]))
        return sorted(mods)

    def candidate_modules(self, u: int) -> list[int]:
        """Move targets for u: arc neighbors' modules, or every occupied
        module when u exchanges teleport flow."""
        if self._channel_active[u]:
            return np.flatnonzero(self.cnt > 0).tolist()
        return self.neighbor_modules(u)

    def _sparse_sums(self, u: int) -> tuple[dict[int, float], dict[int, float]]:
        out_by: dict[int, float] = {}
        in_by: dict[int, float] = {}
        f = self.sys.flows
        lo, hi = f.indptr[u], f.indptr[u + 1]
        for v, w in zip(f.indices[lo:hi].tolist(), f.data[lo:hi].tolist()):
            if v == u:
                continue
            m = int(self.member[v])
            out_by[m] = out_by.get(m, 0.0) + w
        g = self.sys.flows_in
        lo, hi = g.indptr[u], g.indptr[u + 1]
        for v, w in zip(g.indices[lo:hi].tolist(), g.data[lo:hi].tolist()):
            if v == u:
                continue
            m = int(self.member[v])
            in_by[m] = in_by.get(m, 0.0) + w
        return out_by, in_by

    def _move_terms(self, u: int, b: int):
        """New (enter, exit, sum_p) of source and target modules after a move."""
        a = int(self.member[u])
        out_by, in_by = self._sparse_sums(u)
        pu = float(self.sys.p[u])
        fuu = float(self.sys.self_flow[u])
        out_total = float(self.sys.out_tot[u]) - fuu
        in_total = float(self.sys.in_tot[u]) - fuu

        def pair_flows(m: int, exclude_self: bool) -> tuple[float, float]:
            o = out_by.get(m, 0.0)
            i = in_by.get(m, 0.0)
            for c, (mass, targ) in enumerate(self.sys.channels):
                mu = float(mass[u])
                tu = float(targ[u])
                tm = float(self._tmass[c][m])
                gm = float(self._gtarg[c][m])
                if exclude_self:
                    tm -= mu
                    gm -= tu
                o += mu * gm
                i += tu * tm
            return o, i

        out_a, in_a = pair_flows(a, True)
        out_b, in_b = pair_flows(b, False)
        if self.cnt[a] == 1:
            enter_a = exit_a = sum_a = 0.0
        else:
            exit_a = max(0.0, float(self.exit[a]) - (out_total - out_a) + in_a)
            enter_a = max(0.0, float(self.enter[a]) - (in_total - in_a) + out_a)
            sum_a = max(0.0, float(self.sum_p[a]) - pu)
        exit_b = max(0.0, float(self.exit[b]) + (out_total - out_b) - in_b)
        enter_b = max(0.0, float(self.enter[b]) + (in_total - in_b) - out_b)
        sum_b = float(self.sum_p[b]) + pu
        return a, enter_a, exit_a, sum_a, enter_b, exit_b, sum_b

    def delta_move(self, u: int, target: int) -> float:
        """Codelength change in bits if node u moved to module ``target``."""
        a = int(self.member[u])
        if target == a:
            return 0.0
        _, enter_a, exit_a, sum_a, enter_b, exit_b, sum_b = self._move_terms(u, target)
        q_new = self.q_total - float(self.enter[a]) - float(self.enter[target]) + enter_a + enter_b
        d = plogp(q_new) - plogp(self.q_total)
        d -= plogp(enter_a) - plogp(float(self.enter[a]))
        d -= plogp(enter_b) - plogp(float(self.enter[target]))
        d -= plogp(exit_a) - plogp(float(self.exit[a]))
        d -= plogp(exit_b) - plogp(float(self.exit[target]))
        d += plogp(exit_a + sum_a) - plogp(float(self.exit[a]) + float(self.sum_p[a]))
        d += plogp(exit_b + sum_b) - plogp(float(self.exit[target]) + float(self.sum_p[target]))
        return d

    def apply_move(self, u: int, target: int) -> None:
        a = int(self.member[u])
        if target == a:
            return
        if target >= self.capacity or target < 0:
            raise ValueError(f"module id {target} out of range")
        _, enter_a, exit_a, sum_a, enter_b, exit_b, sum_b = self._move_terms(u, target)
        self.q_total += enter_a + enter_b - float(self.enter[a]) - float(self.enter[target])
        self.enter[a], self.exit[a], self.sum_p[a] = enter_a, exit_a, sum_a
        self.enter[target], self.exit[target], self.sum_p[target] = enter_b, exit_b, sum_b
        for c, (mass, targ) in enumerate(self.sys.channels):
            self._tmass[c][a] -= mass[u]
            self._tmass[c][target] += mass[u]
            self._gtarg[c][a] -= targ[u]
            self._gtarg[c][target] += targ[u]
        was_empty = self.cnt[target] == 0
        self.cnt[a] -= 1
        self.cnt[target] += 1
        self.member[u] = target
        if self.cnt[a] == 0:
            for c in range(len(self.sys.channels)):
                self._tmass[c][a] = 0.0
                self._gtarg[c][a] = 0.0
            heapq.heappush(self._free, a)
        if was_empty:
            if target == self._next_id:
                self._next_id += 1
            # freed ids are cleaned lazily in fresh_id()

    def codelength(self) -> float:
        return float(
            plogp(self.q_total)
            - _plogp_arr(self.enter).sum()
            - _plogp_arr(self.exit).sum()
            + _plogp_arr(self.exit + self.sum_p).sum()
            - self._node_term
        )


def delta_move(model, tree_or_membership, u: int, target: int) -> float:
    """Codelength change for moving one node, evaluated from a fresh state.

    ``target`` may be an existing module id or any unused id, which is
    treated as a fresh empty module.
    """
    system = flow_system(model)
    member = tree_or_membership
    if hasattr(member, "membership"):
        member = member.membership()
    state = PartitionState(system, member)
    if target in state._id_map:
        mapped = state._id_map[int(target)]
        if mapped == int(state.member[u]):
            return 0.0
        return state.delta_move(u, mapped)
    fresh = state.fresh_id()
    if fresh is None:
        return 0.0
    return state.delta_move(u, fresh)
