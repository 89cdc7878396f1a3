"""Weighted directed multigraph with dense integer ids and degree caches."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

__all__ = [
    "Network",
    "ParseError",
    "parse_edge_list",
    "degrees_and_strengths",
    "to_edge_list",
]


class ParseError(ValueError):
    """Malformed edge-list input; carries the offending 1-based line number."""

    def __init__(self, message: str, line: int) -> None:
        super().__init__(f"line {line}: {message}")
        self.line = line


def _accumulate_arcs(src, dst, weight, n):
    """Sum parallel arcs into unique (src, dst) pairs, sorted row-major."""
    src = np.asarray(src, dtype=np.int64)
    dst = np.asarray(dst, dtype=np.int64)
    weight = np.asarray(weight, dtype=np.float64)
    if src.size == 0:
        return src, dst, weight
    key = src * np.int64(n) + dst
    order = np.argsort(key, kind="stable")
    key = key[order]
    weight = weight[order]
    starts = np.flatnonzero(np.r_[True, key[1:] != key[:-1]])
    sums = np.add.reduceat(weight, starts)
    key = key[starts]
    return key // n, key % n, sums


@dataclass(frozen=True, eq=False)
class Network:
    """Immutable weighted directed multigraph with dense node ids 0..n-1.

    Undirected networks are stored as two opposing arcs of equal weight, so
    per-node in- and out-quantities coincide. Arc weights are strictly
    positive after construction: zero-weight entries and self-loops are
    dropped. Isolated nodes are legal and keep their ids, which is what lets
    link-removal experiments retain every node.
    """

    n: int
    directed: bool
    labels: tuple[str, ...]
    src: np.ndarray
    dst: np.ndarray
    weight: np.ndarray
    k_in: np.ndarray
    k_out: np.ndarray
    s_in: np.ndarray
    s_out: np.ndarray
    w_tot: float

    @classmethod
    def from_links(
        cls,
        links: Iterable[tuple[int, int, float]],
        *,
        directed: bool,
        n: int | None = None,
        labels: Sequence[str] | None = None,
    ) -> "Network":
        """Build a network from (source, target, weight) id triples.

        Undirected links are given once per pair and stored in both
        directions. Parallel entries accumulate into one arc. Self-loops and
        zero weights are dropped; negative or non-finite weights are
        rejected.
        """
        su, sv, sw = [], [], []
        max_id = -1
        for u, v, w in links:
            u = int(u)
            v = int(v)
            w = float(w)
            if not math.isfinite(w) or w < 0:
                raise ValueError(f"invalid link weight {w!r} on ({u}, {v})")
            max_id = max(max_id, u, v)
            if u == v or w == 0:
                continue
            su.append(u)
            sv.append(v)
            sw.append(w)
            if not directed:
                su.append(v)
                sv.append(u)
                sw.append(w)
        if n is None:
            n = max_id + 1
        if max_id >= n:
            raise ValueError(f"node id {max_id} out of range for n={n}")
        if labels is None:
            labels = tuple(str(i) for i in range(n))
        else:
            labels = tuple(labels)
            if len(labels) != n:
                raise ValueError("labels length does not match node count")
        src, dst, weight = _accumulate_arcs(su, sv, sw, max(n, 1))
        k_in = np.bincount(dst, minlength=n).astype(np.int64)
        k_out = np.bincount(src, minlength=n).astype(np.int64)
        s_in = np.bincount(dst, weights=weight, minlength=n)
        s_out = np.bincount(src, weights=weight, minlength=n)
        return cls(
            n=n,
            directed=directed,
            labels=labels,
            src=src,
            dst=dst,
            weight=weight,
            k_in=k_in,
            k_out=k_out,
            s_in=s_in,
            s_out=s_out,
            w_tot=float(weight.sum()),
        )

    @property
    def n_arcs(self) -> int:
        return int(self.src.size)

    def links(self) -> list[tuple[int, int, float]]:
        """Canonical link triples: every arc if directed, one arc per
        unordered pair (src < dst) if undirected."""
        if self.directed:
            src, dst, weight = self.src, self.dst, self.weight
        else:
            mask = self.src < self.dst
            src, dst, weight = self.src[mask], self.dst[mask], self.weight[mask]
        return list(zip(src.tolist(), dst.tolist(), weight.tolist()))

    def arc_pairs(self) -> set[tuple[int, int]]:
        """Set of stored (src, dst) pairs; both directions for undirected."""
        return set(zip(self.src.tolist(), self.dst.tolist()))

    def label_ids(self) -> dict[str, int]:
        return {lab: i for i, lab in enumerate(self.labels)}


def parse_edge_list(text, *, directed: bool = False, weighted: bool = False) -> Network:
    """Parse edge-list text into a Network.

    Each non-comment line is "src dst" (weighted=False) or "src dst weight"
    (weighted=True); '#' starts a comment and blank lines are skipped.
    Labels are arbitrary whitespace-free tokens and node ids follow first
    appearance. Duplicate lines accumulate weight; for undirected input the
    two orientations of a pair accumulate into the same link.
    """
    if hasattr(text, "read"):
        lines = text.read().splitlines()
    elif isinstance(text, str):
        lines = text.splitlines()
    else:
        lines = list(text)
    label_ids: dict[str, int] = {}
    links: list[tuple[int, int, float]] = []
    want = 3 if weighted else 2
    for lineno, raw in enumerate(lines, 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        toks = line.split()
        if len(toks) != want:
            raise ParseError(f"expected {want} fields, got {len(toks)}", lineno)
        ids = []
        for tok in toks[:2]:
            if tok not in label_ids:
                label_ids[tok] = len(label_ids)
            ids.append(label_ids[tok])
        if weighted:
            try:
                w = float(toks[2])
            except ValueError:
                raise ParseError(f"weight {toks[2]!r} is not a number", lineno) from None
            if not math.isfinite(w):
                raise ParseError(f"weight {toks[2]!r} is not finite", lineno)
            if w < 0:
                raise ParseError(f"negative weight {toks[2]!r}", lineno)
        else:
            w = 1.0
        links.append((ids[0], ids[1], w))
    labels = tuple(sorted(label_ids, key=label_ids.get))
    return Network.from_links(links, directed=directed, n=len(labels), labels=labels)


def to_edge_list(net: Network) -> str:
    """Serialize a network to edge-list text.

    Directed networks emit one line per arc; undirected networks emit each
    pair once (src < dst). Weights are printed with enough digits to
    round-trip exactly. Isolated nodes carry no arcs and do not appear.
    """
    lines = [f"{net.labels[u]} {net.labels[v]} {w:.16e}" for u, v, w in net.links()]
    return "\n".join(lines) + ("\n" if lines else "")


def degrees_and_strengths(net: Network):
    """Recompute (k_in, k_out, s_in, s_out) from the arc arrays.

    Degrees count distinct neighbors per direction (parallel input lines
    were already merged); strengths sum arc weights.
    """
    k_in = np.bincount(net.dst, minlength=net.n).astype(np.int64)
    k_out = np.bincount(net.src, minlength=net.n).astype(np.int64)
    s_in = np.bincount(net.dst, weights=net.weight, minlength=net.n)
    s_out = np.bincount(net.src, weights=net.weight, minlength=net.n)
    return k_in, k_out, s_in, s_out
