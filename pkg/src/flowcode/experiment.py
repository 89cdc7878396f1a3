"""Link-removal evaluation protocol: splits, negatives, records, summaries.

One cell of the experiment grid is (network, fraction, repeat, method).
Splits and negative samples depend only on (network, fraction, repeat), so
every method is scored against the identical test set. All randomness
derives from stable per-cell seeds, making the whole grid order- and
parallelism-independent.
"""

from __future__ import annotations

import csv
import hashlib
import io
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from .graph import Network
from .metrics import adjusted_mutual_info, auc_score, bootstrap_ci, mean_rank
from .methods import METHODS, canonical_method, make_model
from .optimize import SearchConfig, optimize
from .similarity import score_pairs

__all__ = [
    "ExperimentRecord",
    "Split",
    "nontrivial_stats",
    "read_records_csv",
    "records_to_csv",
    "run_experiment",
    "sample_nonlinks",
    "split_links",
    "stable_seed",
    "summarize_records",
]

CSV_COLUMNS = (
    "network",
    "method",
    "fraction",
    "repeat",
    "auc",
    "modules",
    "trivial",
    "ami",
    "seconds",
    "total_weight",
)


def stable_seed(*parts) -> int:
    """Deterministic 64-bit seed from a tuple of hashable parts."""
    text = "\x1f".join(repr(p) for p in parts)
    digest = hashlib.sha256(text.encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "big")


@dataclass(frozen=True)
class Split:
    """A train network with held-out positives and sampled negatives."""

    train: Network
    positives: tuple[tuple[int, int], ...]
    negatives: tuple[tuple[int, int], ...]
    fraction: float
    repeat: int
    seed: int


def split_links(net: Network, fraction: float, seed, repeat: int = 0) -> Split:
    """Remove a fraction of links and sample matched negatives.

    Undirected links are removed as whole pairs and expanded to both
    directions in the positive and negative lists.
    """
    if not 0.0 < fraction < 1.0:
        raise ValueError(f"fraction must lie strictly between 0 and 1, got {fraction}")
    links = net.links()
    n_links = len(links)
    k = int(np.floor(fraction * n_links + 0.5))
    if k >= n_links:
        raise ValueError(f"removing {k} of {n_links} links would leave an empty network")
    rng = np.random.default_rng(seed)
    removed_idx = np.sort(rng.choice(n_links, size=k, replace=False))
    removed_set = set(removed_idx.tolist())
    kept = [link for i, link in enumerate(links) if i not in removed_set]
    train = Network.from_links(kept, directed=net.directed, n=net.n, labels=net.labels)
    positives: list[tuple[int, int]] = []
    for i in removed_idx.tolist():
        u, v, _w = links[i]
        positives.append((u, v))
        if not net.directed:
            positives.append((v, u))
    negatives = sample_nonlinks(net, len(positives), rng)
    seed_val = int(seed) if isinstance(seed, (int, np.integer)) else -1
    return Split(
        train=train,
        positives=tuple(positives),
        negatives=tuple(negatives),
        fraction=fraction,
        repeat=repeat,
        seed=seed_val,
    )


def _expand_pairs(pairs: list[tuple[int, int]], directed: bool) -> list[tuple[int, int]]:
    if directed:
        return pairs
    out = []
    for u, v in pairs:
        out.append((u, v))
        out.append((v, u))
    return out


def sample_nonlinks(net: Network, count: int, seed) -> list[tuple[int, int]]:
    """Uniformly sample node pairs absent from the network, no self-pairs.

    For undirected networks ``count`` must be even: count/2 unordered pairs
    are drawn and expanded to both directions.
    """
    if count < 0:
        raise ValueError("count must be non-negative")
    if count == 0:
        return []
    rng = np.random.default_rng(seed)
    n = net.n
    existing = set(net.arc_pairs())
    if net.directed:
        want = count
        population = n * (n - 1) - len(existing)
    else:
        if count % 2 != 0:
            raise ValueError("undirected nonlink count must be even (pairs expand to both directions)")
        want = count // 2
        population = n * (n - 1) // 2 - len(net.links())
    if want > population:
        raise ValueError(f"requested {want} nonlinks but only {population} exist")

    def is_link(u: int, v: int) -> bool:
        return (u, v) in existing

    if want > population // 2:
        # near-exhaustive: enumerate the population and subsample
        if net.directed:
            pool = [(u, v) for u in range(n) for v in range(n) if u != v and not is_link(u, v)]
        else:
            pool = [(u, v) for u in range(n) for v in range(u + 1, n) if not is_link(u, v)]
        if want == population:
            chosen = pool
        else:
            idx = np.sort(rng.choice(len(pool), size=want, replace=False))
            chosen = [pool[i] for i in idx.tolist()]
        return _expand_pairs(chosen, net.directed)

    picked: set[tuple[int, int]] = set()
    chosen = []
    while len(chosen) < want:
        u = int(rng.integers(0, n))
        v = int(rng.integers(0, n))
        if u == v:
            continue
        if not net.directed and u > v:
            u, v = v, u
        if (u, v) in picked or is_link(u, v):
            continue
        picked.add((u, v))
        chosen.append((u, v))
    return _expand_pairs(chosen, net.directed)


@dataclass(frozen=True)
class ExperimentRecord:
    network: str
    method: str
    fraction: float
    repeat: int
    auc: float
    modules: int
    trivial: bool
    ami: float | None
    seconds: float
    total_weight: float


def _method_sort_key(method: str) -> tuple[int, str]:
    try:
        return (METHODS.index(method), method)
    except ValueError:
        return (len(METHODS), method)


def _record_sort_key(rec: ExperimentRecord):
    return (rec.network, _method_sort_key(rec.method), rec.fraction, rec.repeat)


def _reference_job(args):
    name, method, net, trials, seed, beta, absorption, correction = args
    fm = make_model(net, method, correction=correction, beta=beta, absorption=absorption)
    tree = optimize(fm, SearchConfig(trials=trials, seed=seed))
    return name, method, tree.membership()


def _cell_job(args) -> ExperimentRecord:
    (
        name,
        method,
        fraction,
        repeat,
        train,
        positives,
        negatives,
        trials,
        seed,
        ref_member,
        beta,
        absorption,
        correction,
    ) = args
    try:
        started = time.perf_counter()
        fm = make_model(train, method, correction=correction, beta=beta, absorption=absorption)
        tree = optimize(fm, SearchConfig(trials=trials, seed=seed))
        pos_bits = score_pairs(tree, positives)
        neg_bits = score_pairs(tree, negatives)
        auc = auc_score(-pos_bits, -neg_bits)
        modules = tree.num_flow_modules
        trivial = modules == 1
        ami = None
        if not trivial and ref_member is not None:
            ami = adjusted_mutual_info(tree.membership(), ref_member)
        seconds = time.perf_counter() - started
        return ExperimentRecord(
            network=name,
            method=method,
            fraction=fraction,
            repeat=repeat,
            auc=auc,
            modules=modules,
            trivial=trivial,
            ami=ami,
            seconds=seconds,
            total_weight=float(fm.total_weight),
        )
    except Exception as exc:
        raise RuntimeError(
            f"experiment cell failed (network={name} method={method} "
            f"r={fraction} repeat={repeat}): {exc}"
        ) from exc


def run_experiment(
    nets: dict[str, Network],
    methods,
    fractions,
    repeats: int = 5,
    seed: int = 0,
    *,
    trials: int = 100,
    beta: float = 0.7,
    absorption: float = 0.5,
    correction: float = 50.0,
    jobs: int = 1,
    on_error: str = "raise",
) -> list[ExperimentRecord]:
    """Run the full grid and return records in canonical order.

    ``on_error="skip"`` drops failed cells with a stderr note instead of
    aborting the grid.
    """
    if on_error not in ("raise", "skip"):
        raise ValueError("on_error must be 'raise' or 'skip'")
    methods = [canonical_method(m) for m in methods]
    fractions = [round(float(f), 9) for f in fractions]
    if repeats < 1:
        raise ValueError("repeats must be at least 1")

    ref_args = [
        (
            name,
            method,
            net,
            trials,
            stable_seed(seed, "reference", name, method),
            beta,
            absorption,
            correction,
        )
        for name, net in nets.items()
        for method in methods
    ]
    cell_keys = [
        (name, fraction, repeat)
        for name in nets
        for fraction in fractions
        for repeat in range(repeats)
    ]

    def build_cell_args(references) -> list[tuple]:
        cell_args = []
        for name, fraction, repeat in cell_keys:
            split_seed = stable_seed(seed, "split", name, fraction, repeat)
            split = split_links(nets[name], fraction, split_seed, repeat)
            for method in methods:
                cell_args.append(
                    (
                        name,
                        method,
                        fraction,
                        repeat,
                        split.train,
                        split.positives,
                        split.negatives,
                        trials,
                        stable_seed(seed, "search", name, method, fraction, repeat),
                        references[(name, method)],
                        beta,
                        absorption,
                        correction,
                    )
                )
        return cell_args

    records: list[ExperimentRecord] = []
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            references = {
                (name, method): member
                for name, method, member in pool.map(_reference_job, ref_args)
            }
            futures = [pool.submit(_cell_job, args) for args in build_cell_args(references)]
            for future in futures:
                try:
                    records.append(future.result())
                except RuntimeError:
                    if on_error == "raise":
                        raise
                    print(f"warning: {sys.exc_info()[1]}", file=sys.stderr)
    else:
        references = {
            (name, method): member
            for name, method, member in map(_reference_job, ref_args)
        }
        for args in build_cell_args(references):
            try:
                records.append(_cell_job(args))
            except RuntimeError:
                if on_error == "raise":
                    raise
                print(f"warning: {sys.exc_info()[1]}", file=sys.stderr)
    return sorted(records, key=_record_sort_key)


def nontrivial_stats(records) -> dict:
    """Per (method, fraction): (non-trivial share, mean modules among them)."""
    cells: dict[tuple[str, float], list[ExperimentRecord]] = {}
    for rec in records:
        cells.setdefault((rec.method, rec.fraction), []).append(rec)
    out = {}
    for key, recs in sorted(cells.items(), key=lambda kv: (_method_sort_key(kv[0][0]), kv[0][1])):
        nontrivial = [r for r in recs if not r.trivial]
        share = len(nontrivial) / len(recs)
        mean_modules = (
            float(np.mean([r.modules for r in nontrivial])) if nontrivial else None
        )
        out[key] = (share, mean_modules)
    return out


def _format_float(x: float) -> str:
    return format(x, ".12g")


def records_to_csv(records) -> str:
    """Canonically ordered CSV, one row per record."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    for rec in sorted(records, key=_record_sort_key):
        writer.writerow(
            [
                rec.network,
                rec.method,
                _format_float(rec.fraction),
                rec.repeat,
                _format_float(rec.auc),
                rec.modules,
                "true" if rec.trivial else "false",
                "" if rec.ami is None else _format_float(rec.ami),
                format(rec.seconds, ".6f"),
                _format_float(rec.total_weight),
            ]
        )
    return buf.getvalue()


def read_records_csv(text: str) -> list[ExperimentRecord]:
    reader = csv.DictReader(io.StringIO(text))
    if reader.fieldnames is None or tuple(reader.fieldnames) != CSV_COLUMNS:
        raise ValueError(f"unexpected CSV columns: {reader.fieldnames}")
    records = []
    for row in reader:
        records.append(
            ExperimentRecord(
                network=row["network"],
                method=row["method"],
                fraction=round(float(row["fraction"]), 9),
                repeat=int(row["repeat"]),
                auc=float(row["auc"]),
                modules=int(row["modules"]),
                trivial=row["trivial"] == "true",
                ami=None if row["ami"] == "" else float(row["ami"]),
                seconds=float(row["seconds"]),
                total_weight=float(row["total_weight"]),
            )
        )
    return records


def _flip(value: float) -> float:
    return 1.0 - value if value < 0.5 else value


def _check_grid(records) -> None:
    networks = sorted({r.network for r in records})
    methods = sorted({r.method for r in records})
    fractions = sorted({r.fraction for r in records})
    repeats = sorted({r.repeat for r in records})
    present = {(r.network, r.method, r.fraction, r.repeat) for r in records}
    missing = [
        combo
        for combo in (
            (n, m, f, rep)
            for n in networks
            for m in methods
            for f in fractions
            for rep in repeats
        )
        if combo not in present
    ]
    if missing:
        shown = ", ".join(map(str, missing[:5]))
        raise ValueError(
            f"records do not form a full grid; {len(missing)} missing cells, e.g. {shown}"
        )


def summarize_records(
    records,
    *,
    flip_auc: bool = True,
    allow_missing: bool = False,
    seed: int = 0,
) -> dict:
    """Aggregate raw records into the four report tables.

    Returns {"auc": [...], "rank": [...], "nontrivial": [...], "ami": [...]}
    where every entry is a flat row dict ready for CSV writing. AUC and rank
    aggregate per-network means across networks (bootstrap CIs resample
    networks); AMI pools non-trivial cells.
    """
    records = list(records)
    if not records:
        raise ValueError("no records to summarize")
    if not allow_missing:
        _check_grid(records)
    methods = sorted({r.method for r in records}, key=_method_sort_key)
    fractions = sorted({r.fraction for r in records})
    networks = sorted({r.network for r in records})

    by_cell: dict[tuple[str, str, float], list[float]] = {}
    for rec in records:
        by_cell.setdefault((rec.network, rec.method, rec.fraction), []).append(rec.auc)

    def network_mean(network: str, method: str, fraction: float) -> float | None:
        values = by_cell.get((network, method, fraction))
        if not values:
            return None
        value = float(np.mean(values))
        return _flip(value) if flip_auc else value

    auc_rows = []
    for method in methods:
        for fraction in fractions:
            values = [network_mean(net, method, fraction) for net in networks]
            values = [v for v in values if v is not None]
            if not values:
                continue
            lo, hi = bootstrap_ci(values, seed=stable_seed(seed, "auc-ci", method, fraction))
            auc_rows.append(
                {
                    "method": method,
                    "fraction": fraction,
                    "networks": len(values),
                    "mean_auc": float(np.mean(values)),
                    "ci_lo": lo,
                    "ci_hi": hi,
                }
            )

    rank_rows = []
    for fraction in fractions:
        table = {}
        for net in networks:
            row = {m: network_mean(net, m, fraction) for m in methods}
            if any(v is None for v in row.values()):
                if allow_missing:
                    continue
                raise ValueError("rank table missing cells")
            table[net] = row
        if not table:
            continue
        per_network_ranks: dict[str, list[float]] = {m: [] for m in methods}
        for net in table:
            single = mean_rank({net: table[net]})
            for m in methods:
                per_network_ranks[m].append(single[m])
        means = mean_rank(table)
        for method in methods:
            lo, hi = bootstrap_ci(
                per_network_ranks[method],
                seed=stable_seed(seed, "rank-ci", method, fraction),
            )
            rank_rows.append(
                {
                    "method": method,
                    "fraction": fraction,
                    "mean_rank": means[method],
                    "ci_lo": lo,
                    "ci_hi": hi,
                }
            )

    stats = nontrivial_stats(records)
    nontrivial_rows = []
    for (method, fraction), (share, mean_modules) in stats.items():
        nontrivial_rows.append(
            {
                "method": method,
                "fraction": fraction,
                "nontrivial_share": share,
                "mean_modules": "" if mean_modules is None else mean_modules,
            }
        )

    ami_rows = []
    for method in methods:
        for fraction in fractions:
            values = [
                r.ami
                for r in records
                if r.method == method and r.fraction == fraction and r.ami is not None
            ]
            if not values:
                ami_rows.append(
                    {
                        "method": method,
                        "fraction": fraction,
                        "count": 0,
                        "mean_ami": "",
                        "ci_lo": "",
                        "ci_hi": "",
                    }
                )
                continue
            lo, hi = bootstrap_ci(values, seed=stable_seed(seed, "ami-ci", method, fraction))
            ami_rows.append(
                {
                    "method": method,
                    "fraction": fraction,
                    "count": len(values),
                    "mean_ami": float(np.mean(values)),
                    "ci_lo": lo,
                    "ci_hi": hi,
                }
            )

    return {"auc": auc_rows, "rank": rank_rows, "nontrivial": nontrivial_rows, "ami": ami_rows}
