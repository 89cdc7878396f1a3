"""Method tags mapping names to regularization recipes.

A tag selects which weight overlay (if any) augments the observed network
and whether the factorized global prior is mixed in. "standard" is the
plain empirical walk; "none" is accepted as an alias.
"""

from __future__ import annotations

from .flow import FlowModel, build_flow_model, empirical_model, visit_rates
from .graph import Network
from .overlays import (
    common_neighbors_overlay,
    mixed_markov_overlay,
    variable_markov_overlay,
)

__all__ = ["METHODS", "canonical_method", "make_model"]

METHODS = (
    "standard",
    "global",
    "global+cn",
    "global+mmt",
    "global+vmt",
    "cn",
    "mmt",
    "vmt",
)


def canonical_method(name: str) -> str:
    tag = name.strip().lower()
    if tag == "none":
        tag = "standard"
    if tag not in METHODS:
        raise ValueError(f"unknown method {name!r}; expected one of {', '.join(METHODS)}")
    return tag


def make_model(
    net: Network,
    method: str,
    *,
    correction: float = 50.0,
    beta: float = 0.7,
    absorption: float = 0.5,
) -> FlowModel:
    """Build the regularized flow model for a method tag, with visit rates."""
    tag = canonical_method(method)
    parts = tag.split("+")
    use_global = "global" in parts
    local = [p for p in parts if p not in ("global", "standard")]
    overlay = None
    if local:
        kind = local[0]
        if kind == "cn":
            overlay = common_neighbors_overlay(net)
        elif kind == "mmt":
            overlay = mixed_markov_overlay(net, beta=beta)
        else:
            raw = empirical_model(net)
            visit_rates(raw)
            overlay = variable_markov_overlay(net, raw, absorption=absorption)
    fm = build_flow_model(
        net,
        correction=correction if use_global else None,
        extra=overlay,
    )
    visit_rates(fm)
    return fm
