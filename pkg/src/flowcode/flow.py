"""Random-walk transition models with an optional factorized Bayesian prior.

The regularized walk at node u follows a stored arc with probability
1 - alpha_u and otherwise teleports to a network-wide target distribution
built from in-strength over in-degree ratios. Because the prior weight of a
pair factorizes into a source part and a target part, the model never
materializes n^2 pair weights: row sums and the target distribution are
closed forms and every operation stays O(arcs + n).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .graph import Network

__all__ = [
    "DEFAULT_CORRECTION",
    "ConvergenceError",
    "FlowModel",
    "build_flow_model",
    "config_model_factor",
    "config_model_weight",
    "empirical_model",
    "prior_strength",
    "prior_weight",
    "regularized_transitions",
    "visit_rates",
]

# Finite-size correction added to the node count in the prior strength.
# Zero recovers the plain log(n)/n rate.
DEFAULT_CORRECTION = 50


class ConvergenceError(RuntimeError):
    """Power iteration failed to reach the requested residual."""

    def __init__(self, message: str, residual: float) -> None:
        super().__init__(message)
        self.residual = residual


def prior_strength(n: int, correction: int = DEFAULT_CORRECTION) -> float:
    """Connection rate of the prior: ln(n + C) / (n + C)."""
    if n <= 0:
        raise ValueError("prior strength needs a positive node count")
    m = n + correction
    if m <= 1:
        raise ValueError("node count plus correction must exceed 1")
    return math.log(m) / m


def config_model_factor(net: Network) -> float:
    """Global degree-to-strength ratio sum(k_in + k_out) / sum(s_in + s_out)."""
    ssum = float(net.s_in.sum() + net.s_out.sum())
    if ssum == 0:
        return 0.0
    return float(net.k_in.sum() + net.k_out.sum()) / ssum


def config_model_weight(net: Network, u: int, v: int) -> float:
    """Expected weight of arc u -> v under the continuous configuration model.

    Returns 0 when u has no out-links or v has no in-links; the prior never
    points at nodes the observed network cannot reach.
    """
    if net.k_out[u] == 0 or net.k_in[v] == 0:
        return 0.0
    return (
        config_model_factor(net)
        * float(net.s_out[u])
        * float(net.s_in[v])
        / (float(net.k_out[u]) * float(net.k_in[v]))
    )


def prior_weight(net: Network, u: int, v: int, correction: int = DEFAULT_CORRECTION) -> float:
    """Prior link weight: connection rate times the configuration-model weight."""
    return prior_strength(net.n, correction) * config_model_weight(net, u, v)


@dataclass(eq=False)
class FlowModel:
    """Row-stochastic transition model over n nodes.

    The transition row of node u mixes three parts:

      sparse_frac[u] * stored-arc transitions (row-normalized sparse matrix)
      prior_frac[u]  * prior_dist (teleport to the prior target distribution)
      dangling_frac[u] * dangling_dist (uniform fallback for rows with no mass)

    The three fractions sum to one per node. prior_frac is the per-node
    teleportation rate of the regularization; it is zero in unregularized
    models.
    """

    n: int
    sparse_part: sp.csr_matrix
    sparse_frac: np.ndarray
    prior_frac: np.ndarray
    dangling_frac: np.ndarray
    prior_dist: np.ndarray
    dangling_dist: np.ndarray
    prior_scale: float
    prior_row_sum: np.ndarray
    out_mass: np.ndarray
    total_weight: float
    p: np.ndarray | None = field(default=None)

    @property
    def alpha(self) -> np.ndarray:
        """Per-node probability of not following a stored arc."""
        return self.prior_frac + self.dangling_frac

    def transition(self, u: int, v: int) -> float:
        """Pointwise transition probability u -> v."""
        lo, hi = self.sparse_part.indptr[u], self.sparse_part.indptr[u + 1]
        idx = self.sparse_part.indices[lo:hi]
        j = int(np.searchsorted(idx, v))
        t = float(self.sparse_part.data[lo + j]) if j < idx.size and idx[j] == v else 0.0
        return (
            float(self.sparse_frac[u]) * t
            + float(self.prior_frac[u]) * float(self.prior_dist[v])
            + float(self.dangling_frac[u]) * float(self.dangling_dist[v])
        )

    def transition_row(self, u: int) -> np.ndarray:
        """Dense transition row of node u (test and small-n helper)."""
        row = np.zeros(self.n)
        lo, hi = self.sparse_part.indptr[u], self.sparse_part.indptr[u + 1]
        row[self.sparse_part.indices[lo:hi]] = self.sparse_part.data[lo:hi]
        row *= self.sparse_frac[u]
        row += self.prior_frac[u] * self.prior_dist
        row += self.dangling_frac[u] * self.dangling_dist
        return row

    def step(self, x: np.ndarray) -> np.ndarray:
        """One left-multiplication x @ T in O(arcs + n)."""
        y = np.asarray((x * self.sparse_frac) @ self.sparse_part).ravel()
        y = y + float(np.dot(x, self.prior_frac)) * self.prior_dist
        y = y + float(np.dot(x, self.dangling_frac)) * self.dangling_dist
        return y


def build_flow_model(net: Network, *, correction: int | None = None, extra=None) -> FlowModel:
    """Build a transition model from stored arcs plus optional regularization.

    correction=None disables the prior entirely; an integer enables the
    factorized prior with that finite-size correction. ``extra`` is an
    optional weight overlay (anything with src/dst/weight arrays on the same
    node ids) whose arcs are added to the observed ones before row
    normalization. The prior is always computed from the observed network,
    not from the overlay-augmented one.
    """
    n = net.n
    if n == 0:
        raise ValueError("cannot build a flow model for an empty network")
    src, dst, w = net.src, net.dst, net.weight
    if extra is not None:
        if getattr(extra, "n", n) != n:
            raise ValueError("overlay node count differs from network node count")
        src = np.concatenate([src, np.asarray(extra.src, dtype=np.int64)])
        dst = np.concatenate([dst, np.asarray(extra.dst, dtype=np.int64)])
        w = np.concatenate([w, np.asarray(extra.weight, dtype=np.float64)])
    weights = sp.csr_matrix((w, (src, dst)), shape=(n, n))
    weights.sum_duplicates()
    weights.sort_indices()
    row_mass = np.asarray(weights.sum(axis=1)).ravel()

    if correction is not None:
        scale = prior_strength(n, correction) * config_model_factor(net)
        with np.errstate(invalid="ignore", divide="ignore"):
            in_ratio = np.where(net.k_in > 0, net.s_in / np.maximum(net.k_in, 1), 0.0)
            out_ratio = np.where(net.k_out > 0, net.s_out / np.maximum(net.k_out, 1), 0.0)
        ratio_total = float(in_ratio.sum())
        prior_row_sum = scale * out_ratio * ratio_total
        prior_dist = in_ratio / ratio_total if ratio_total > 0 else np.zeros(n)
    else:
        scale = 0.0
        prior_row_sum = np.zeros(n)
        prior_dist = np.zeros(n)

    total = row_mass + prior_row_sum
    nz = total > 0
    sparse_frac = np.where(nz, row_mass / np.where(nz, total, 1.0), 0.0)
    prior_frac = np.where(nz, prior_row_sum / np.where(nz, total, 1.0), 0.0)
    dangling_frac = np.where(nz, 0.0, 1.0)

    in_mass = np.asarray(weights.sum(axis=0)).ravel()
    reachable = in_mass > 0
    if reachable.any():
        dangling_dist = reachable / float(reachable.sum())
    else:
        # no arcs at all: fall back to uniform so rows still sum to one
        dangling_dist = np.full(n, 1.0 / n)

    # row-normalize the stored-arc part
    trans = weights.copy()
    rows = np.repeat(np.arange(n), np.diff(trans.indptr))
    with np.errstate(invalid="ignore", divide="ignore"):
        trans.data = trans.data / row_mass[rows]

    return FlowModel(
        n=n,
        sparse_part=trans,
        sparse_frac=sparse_frac,
        prior_frac=prior_frac,
        dangling_frac=dangling_frac,
        prior_dist=prior_dist,
        dangling_dist=dangling_dist,
        prior_scale=scale,
        prior_row_sum=prior_row_sum,
        out_mass=total,
        total_weight=float(w.sum() + prior_row_sum.sum()),
    )


def empirical_model(net: Network) -> FlowModel:
    """Unregularized transitions: observed arcs plus the dangling fallback."""
    return build_flow_model(net)


def regularized_transitions(net: Network, correction: int = DEFAULT_CORRECTION) -> FlowModel:
    """Transitions of the observed network blended with the factorized prior."""
    return build_flow_model(net, correction=correction)


def visit_rates(fm: FlowModel, tol: float = 1e-12, max_iters: int = 10000) -> np.ndarray:
    """Stationary visit rates of the model, cached on fm.p.

    Uses power iteration on the half-lazy walk (x + xT)/2, which has the
    same fixed points as T but cannot oscillate on periodic structures. The
    residual is always measured against the true operator.
    """
    if fm.p is not None:
        return fm.p
    n = fm.n
    # starting from the out-mass distribution puts undirected unregularized
    # walks exactly at their fixed point
    mass = fm.out_mass
    x = mass / mass.sum() if mass.sum() > 0 else np.full(n, 1.0 / n)
    residual = math.inf
    for _ in range(max_iters):
        y = fm.step(x)
        residual = float(np.abs(y - x).sum())
        if residual < tol:
            x = y / y.sum()
            fm.p = x
            return x
        x = 0.5 * (x + y)
        x = x / x.sum()
    raise ConvergenceError(
        f"visit rates did not converge within {max_iters} iterations "
        f"(residual {residual:.3e}, tol {tol:.3e})",
        residual,
    )
