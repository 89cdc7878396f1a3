"""Coding trees: module structure annotated with flow rates.

A two-level tree has one layer of modules under the root; every node sits
in exactly one module. Paths are tuples of 0-based child indices, so module
(2,) holds nodes whose path is (2,). Serialization uses 1-based ids to keep
the text form friendly.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .codelength import (
    _codelength_from_arrays,
    _compact,
    _check_membership,
    _module_flow_arrays,
    flow_system,
)

__all__ = [
    "CodingTree",
    "TreeModule",
    "build_two_level_tree",
    "tree_from_json",
    "tree_to_json",
    "tree_to_text",
]


@dataclass(frozen=True)
class TreeModule:
    path: tuple[int, ...]
    enter: float
    exit: float
    use: float


@dataclass(eq=False)
class CodingTree:
    """Partition of nodes into flow-annotated modules."""

    node_path: tuple[tuple[int, ...], ...]
    node_flow: np.ndarray
    modules: dict[tuple[int, ...], TreeModule]
    root_use: float
    codelength: float

    @property
    def n(self) -> int:
        return len(self.node_path)

    @property
    def num_modules(self) -> int:
        """Distinct leaf modules, including any that carry zero flow."""
        return len(set(self.node_path))

    @property
    def num_flow_modules(self) -> int:
        """Leaf modules whose codebook is ever used by the walk."""
        paths = set(self.node_path)
        return sum(1 for path in paths if self.modules[path].use > 0.0)

    def membership(self) -> np.ndarray:
        """Module index per node, compacted in order of first appearance."""
        seen: dict[tuple[int, ...], int] = {}
        out = np.empty(self.n, dtype=np.int64)
        for i, path in enumerate(self.node_path):
            if path not in seen:
                seen[path] = len(seen)
            out[i] = seen[path]
        return out


def build_two_level_tree(model, membership) -> CodingTree:
    """Assemble a two-level tree with exact module flow annotations."""
    system = flow_system(model)
    member = _check_membership(membership, system.n)
    cmember, n_mod, _ = _compact(member)
    enter, exit_, use, _sum_p = _module_flow_arrays(system, cmember, n_mod)
    codelength = _codelength_from_arrays(system.node_term, enter, exit_, use)
    modules = {
        (m,): TreeModule(
            path=(m,), enter=float(enter[m]), exit=float(exit_[m]), use=float(use[m])
        )
        for m in range(n_mod)
    }
    return CodingTree(
        node_path=tuple((int(m),) for m in cmember),
        node_flow=system.p.copy(),
        modules=modules,
        root_use=float(enter.sum()),
        codelength=codelength,
    )


def _leaf_positions(tree: CodingTree) -> list[tuple[tuple[int, ...], int, int]]:
    """(path, position-within-module, node id) sorted by path then node id."""
    by_module: dict[tuple[int, ...], list[int]] = {}
    for u, path in enumerate(tree.node_path):
        by_module.setdefault(path, []).append(u)
    rows = []
    for path in sorted(by_module):
        for pos, u in enumerate(by_module[path]):
            rows.append((path, pos, u))
    return rows


def tree_to_text(tree: CodingTree, labels) -> str:
    """Render the tree in the line-per-node text format."""
    labels = list(labels)
    if len(labels) != tree.n:
        raise ValueError("one label per node required")
    lines = [f"# codelength {tree.codelength:.12g} bits"]
    for path, pos, u in _leaf_positions(tree):
        path_str = ":".join(str(c + 1) for c in path) + f":{pos + 1}"
        lines.append(f"{path_str} {tree.node_flow[u]:.12g} {labels[u]} {u + 1}")
    return "\n".join(lines) + "\n"


def tree_to_json(tree: CodingTree, labels) -> dict:
    """Render the tree as a JSON-ready mapping with module flow rates."""
    labels = list(labels)
    if len(labels) != tree.n:
        raise ValueError("one label per node required")
    if any(len(path) != 1 for path in tree.modules):
        raise ValueError("only two-level trees serialize to JSON")
    by_module: dict[tuple[int, ...], list[int]] = {}
    for u, path in enumerate(tree.node_path):
        by_module.setdefault(path, []).append(u)
    modules = []
    for path in sorted(by_module):
        mod = tree.modules[path]
        modules.append(
            {
                "id": path[0] + 1,
                "enter": mod.enter,
                "exit": mod.exit,
                "flow": mod.use,
                "nodes": [
                    {"id": u + 1, "label": str(labels[u]), "flow": float(tree.node_flow[u])}
                    for u in by_module[path]
                ],
            }
        )
    return {
        "codelength": tree.codelength,
        "modules": modules,
        "labels": [str(x) for x in labels],
    }


def tree_from_json(data: dict) -> tuple[CodingTree, list[str]]:
    """Rebuild a two-level tree (and its labels) from the JSON mapping."""
    labels = [str(x) for x in data["labels"]]
    n = len(labels)
    node_path: list[tuple[int, ...] | None] = [None] * n
    node_flow = np.zeros(n, dtype=np.float64)
    modules: dict[tuple[int, ...], TreeModule] = {}
    root_use = 0.0
    for mod in data["modules"]:
        path = (int(mod["id"]) - 1,)
        modules[path] = TreeModule(
            path=path,
            enter=float(mod["enter"]),
            exit=float(mod["exit"]),
            use=float(mod["flow"]),
        )
        root_use += float(mod["enter"])
        for entry in mod["nodes"]:
            u = int(entry["id"]) - 1
            if not 0 <= u < n:
                raise ValueError(f"node id {u + 1} out of range")
            if node_path[u] is not None:
                raise ValueError(f"node id {u + 1} assigned twice")
            node_path[u] = path
            node_flow[u] = float(entry["flow"])
    missing = [i + 1 for i, path in enumerate(node_path) if path is None]
    if missing:
        raise ValueError(f"nodes missing from tree: {missing[:5]}")
    tree = CodingTree(
        node_path=tuple(node_path),  # type: ignore[arg-type]
        node_flow=node_flow,
        modules=modules,
        root_use=root_use,
        codelength=float(data["codelength"]),
    )
    return tree, labels
