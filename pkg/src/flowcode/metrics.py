"""Ranking and partition-agreement metrics for the evaluation protocol."""

from __future__ import annotations

import math

import numpy as np

__all__ = ["adjusted_mutual_info", "auc_score", "bootstrap_ci", "mean_rank"]


def _average_ranks(values: np.ndarray) -> np.ndarray:
    """1-based ranks, ties averaged. Infinite values tie among themselves."""
    n = values.size
    order = np.argsort(values, kind="stable")
    sorted_vals = values[order]
    ranks = np.empty(n, dtype=np.float64)
    i = 0
    while i < n:
        j = i
        # != comparison instead of subtraction: exact and inf-safe
        while j + 1 < n and not (sorted_vals[j + 1] != sorted_vals[i]):
            j += 1
        ranks[order[i : j + 1]] = 0.5 * (i + j) + 1.0
        i = j + 1
    return ranks


def auc_score(pos_scores, neg_scores) -> float:
    """Mann-Whitney AUC: P(pos > neg) + 0.5 P(pos = neg), higher = better."""
    pos = np.asarray(pos_scores, dtype=np.float64)
    neg = np.asarray(neg_scores, dtype=np.float64)
    if pos.size == 0 or neg.size == 0:
        raise ValueError("both score lists must be nonempty")
    if np.isnan(pos).any() or np.isnan(neg).any():
        raise ValueError("scores must not contain NaN")
    ranks = _average_ranks(np.concatenate([pos, neg]))
    u_stat = ranks[: pos.size].sum() - pos.size * (pos.size + 1) / 2.0
    return float(u_stat / (pos.size * neg.size))


def _contingency(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    _, ai = np.unique(a, return_inverse=True)
    _, bi = np.unique(b, return_inverse=True)
    table = np.zeros((ai.max() + 1, bi.max() + 1), dtype=np.int64)
    np.add.at(table, (ai, bi), 1)
    return table


def _entropy_nats(counts: np.ndarray, total: int) -> float:
    probs = counts[counts > 0] / total
    return float(-(probs * np.log(probs)).sum())


def _expected_mi(row_sums: np.ndarray, col_sums: np.ndarray, total: int) -> float:
    """Expected mutual information under the hypergeometric null, in nats."""
    lg = math.lgamma
    emi = 0.0
    for a in row_sums.tolist():
        for b in col_sums.tolist():
            lo = max(1, a + b - total)
            hi = min(a, b)
            for nij in range(lo, hi + 1):
                log_term = (
                    lg(a + 1)
                    + lg(b + 1)
                    + lg(total - a + 1)
                    + lg(total - b + 1)
                    - lg(total + 1)
                    - lg(nij + 1)
                    - lg(a - nij + 1)
                    - lg(b - nij + 1)
                    - lg(total - a - b + nij + 1)
                )
                emi += (nij / total) * (math.log(total * nij) - math.log(a * b)) * math.exp(log_term)
    return emi


def adjusted_mutual_info(a, b) -> float:
    """AMI with the hypergeometric chance model and arithmetic-mean normalizer.

    Returns 0 when the normalizer degenerates (e.g. both partitions trivial).
    """
    a = np.asarray(a)
    b = np.asarray(b)
    if a.shape != b.shape or a.ndim != 1:
        raise ValueError("partitions must be equal-length 1-d label arrays")
    if a.size == 0:
        raise ValueError("partitions must be nonempty")
    table = _contingency(a, b)
    total = int(a.size)
    row = table.sum(axis=1)
    col = table.sum(axis=0)
    nz = table[table > 0]
    rows_nz, cols_nz = np.nonzero(table)
    mi = float(
        (
            (nz / total)
            * (np.log(total * nz.astype(np.float64)) - np.log(row[rows_nz] * col[cols_nz]))
        ).sum()
    )
    emi = _expected_mi(row, col, total)
    h_a = _entropy_nats(row, total)
    h_b = _entropy_nats(col, total)
    denom = 0.5 * (h_a + h_b) - emi
    if abs(denom) < 1e-15:
        return 0.0
    return float((mi - emi) / denom)


def bootstrap_ci(values, resamples: int = 1000, level: float = 0.95, seed=0) -> tuple[float, float]:
    """Percentile interval of the mean from seeded bootstrap resampling."""
    values = np.asarray(values, dtype=np.float64)
    if values.size == 0:
        raise ValueError("cannot bootstrap an empty list")
    if not 0.0 < level < 1.0:
        raise ValueError("confidence level must be in (0, 1)")
    rng = np.random.default_rng(seed)
    idx = rng.integers(0, values.size, size=(resamples, values.size))
    means = values[idx].mean(axis=1)
    tail = 100.0 * (1.0 - level) / 2.0
    lo, hi = np.percentile(means, [tail, 100.0 - tail])
    return float(lo), float(hi)


def mean_rank(auc_table: dict) -> dict:
    """Mean rank per method across networks; rank 1 is the highest AUC.

    auc_table maps network -> {method: auc}. Every network must cover the
    same methods. Ties within one network share the average rank.
    """
    if not auc_table:
        raise ValueError("empty AUC table")
    networks = list(auc_table)
    methods = sorted(auc_table[networks[0]])
    totals = {m: 0.0 for m in methods}
    for net in networks:
        row = auc_table[net]
        if sorted(row) != methods:
            missing = set(methods) ^ set(row)
            raise ValueError(f"AUC table is not a full grid: {net} differs on {sorted(missing)}")
        values = np.array([row[m] for m in methods], dtype=np.float64)
        ranks = _average_ranks(-values)
        for m, r in zip(methods, ranks):
            totals[m] += float(r)
    return {m: totals[m] / len(networks) for m in methods}
