"""Command line surface: partition, score, experiment, report."""

from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys
import tempfile
from pathlib import Path

from .experiment import (
    read_records_csv,
    records_to_csv,
    run_experiment,
    summarize_records,
)
from .graph import ParseError, parse_edge_list
from .methods import METHODS, canonical_method, make_model
from .optimize import SearchConfig, optimize
from .similarity import mapsim_bits
from .tree import tree_from_json, tree_to_json, tree_to_text

__all__ = ["main"]

DEFAULT_FRACTIONS = "0.1,0.2,0.3,0.4,0.5,0.6,0.7,0.8,0.9"


class CliError(Exception):
    pass


def _atomic_write(path: str | Path, text: str) -> None:
    path = Path(path)
    parent = path.parent if str(path.parent) else Path(".")
    fd, tmp = tempfile.mkstemp(dir=str(parent), prefix=path.name + ".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _load_network(path: str, directed: bool, weighted: bool):
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise CliError(f"cannot read {path}: {exc}") from exc
    try:
        return parse_edge_list(text, directed=directed, weighted=weighted)
    except ParseError as exc:
        raise CliError(f"{path}: {exc}") from exc


def _parse_fractions(text: str) -> list[float]:
    out = []
    for token in text.replace(",", " ").split():
        try:
            value = float(token)
        except ValueError as exc:
            raise CliError(f"bad fraction {token!r}") from exc
        if not 0.0 < value < 1.0:
            raise CliError(f"fractions must lie strictly between 0 and 1, got {token}")
        out.append(round(value, 9))
    if not out:
        raise CliError("no fractions given")
    return out


def _csv_text(columns, rows) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([_cell(row[c]) for c in columns])
    return buf.getvalue()


def _cell(value) -> str:
    if isinstance(value, float):
        return format(value, ".12g")
    return str(value)


def cmd_partition(args) -> int:
    net = _load_network(args.input, args.directed, args.weighted)
    if net.n == 0:
        raise CliError(f"{args.input}: network is empty")
    tag = canonical_method(args.method)
    fm = make_model(
        net, tag, correction=args.correction, beta=args.beta, absorption=args.delta
    )
    tree = optimize(fm, SearchConfig(trials=args.trials, seed=args.seed))
    base = args.output if args.output else Path(args.input).stem
    base = str(base)
    if base.endswith(".tree") or base.endswith(".json"):
        base = base.rsplit(".", 1)[0]
    _atomic_write(base + ".tree", tree_to_text(tree, net.labels))
    _atomic_write(
        base + ".json", json.dumps(tree_to_json(tree, net.labels), indent=2) + "\n"
    )
    print(f"codelength: {tree.codelength:.12g} bits")
    print(f"modules: {tree.num_flow_modules}")
    print(f"method: {tag}")
    return 0


def cmd_score(args) -> int:
    try:
        data = json.loads(Path(args.tree).read_text(encoding="utf-8"))
    except OSError as exc:
        raise CliError(f"cannot read {args.tree}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise CliError(f"{args.tree}: not a JSON tree file ({exc})") from exc
    try:
        tree, labels = tree_from_json(data)
    except (KeyError, ValueError) as exc:
        raise CliError(f"{args.tree}: malformed tree ({exc})") from exc
    index = {label: i for i, label in enumerate(labels)}
    try:
        pair_text = Path(args.pairs).read_text(encoding="utf-8")
    except OSError as exc:
        raise CliError(f"cannot read {args.pairs}: {exc}") from exc
    lines_out = []
    for lineno, raw in enumerate(pair_text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        tokens = line.split()
        if len(tokens) != 2:
            raise CliError(f"{args.pairs}:{lineno}: expected 'src dst', got {raw!r}")
        src, dst = tokens
        for token in (src, dst):
            if token not in index:
                raise CliError(f"{args.pairs}:{lineno}: unknown node label {token!r}")
        if src == dst:
            raise CliError(f"{args.pairs}:{lineno}: source and target must differ")
        bits = mapsim_bits(tree, index[src], index[dst])
        lines_out.append(f"{src} {dst} {bits:.12g} {-bits:.12g}")
    text = "\n".join(lines_out) + ("\n" if lines_out else "")
    if args.output:
        _atomic_write(args.output, text)
    else:
        sys.stdout.write(text)
    return 0


def cmd_experiment(args) -> int:
    nets = {}
    for path in args.inputs:
        name = Path(path).stem
        if name in nets:
            raise CliError(f"duplicate network name {name!r} (from {path})")
        nets[name] = _load_network(path, args.directed, args.weighted)
    methods = [canonical_method(m) for m in args.method.split(",") if m.strip()]
    if not methods:
        raise CliError("no methods given")
    fractions = _parse_fractions(args.fractions)
    records = run_experiment(
        nets,
        methods,
        fractions,
        repeats=args.repeats,
        seed=args.seed,
        trials=args.trials,
        beta=args.beta,
        absorption=args.delta,
        correction=args.correction,
        jobs=args.jobs,
    )
    out = args.output if args.output else "records.csv"
    _atomic_write(out, records_to_csv(records))
    print(f"wrote {len(records)} records to {out}")
    return 0


REPORT_TABLES = (
    ("auc", ("method", "fraction", "networks", "mean_auc", "ci_lo", "ci_hi")),
    ("rank", ("method", "fraction", "mean_rank", "ci_lo", "ci_hi")),
    ("nontrivial", ("method", "fraction", "nontrivial_share", "mean_modules")),
    ("ami", ("method", "fraction", "count", "mean_ami", "ci_lo", "ci_hi")),
)


def cmd_report(args) -> int:
    try:
        text = Path(args.records).read_text(encoding="utf-8")
    except OSError as exc:
        raise CliError(f"cannot read {args.records}: {exc}") from exc
    try:
        records = read_records_csv(text)
    except ValueError as exc:
        raise CliError(f"{args.records}: {exc}") from exc
    try:
        summary = summarize_records(
            records,
            flip_auc=args.flip_auc,
            allow_missing=args.allow_missing,
            seed=args.seed,
        )
    except ValueError as exc:
        raise CliError(str(exc)) from exc
    base = args.output if args.output else "report"
    base = str(base)
    if base.endswith(".csv"):
        base = base[: -len(".csv")]
    for key, columns in REPORT_TABLES:
        path = f"{base}_{key}.csv"
        _atomic_write(path, _csv_text(columns, summary[key]))
        print(f"wrote {path}")
    return 0


def _add_model_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--method", default="standard", help="method tag (see --help)")
    parser.add_argument("--trials", type=int, default=100, help="optimizer restarts")
    parser.add_argument("--seed", type=int, default=0, help="master random seed")
    parser.add_argument("--beta", type=float, default=0.7, help="one-step weight in mmt")
    parser.add_argument("--delta", type=float, default=0.5, help="stop probability in vmt")
    parser.add_argument(
        "--correction", type=float, default=50.0, help="prior strength offset constant"
    )


def _add_input_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--directed", action="store_true", help="treat links as directed")
    parser.add_argument("--weighted", action="store_true", help="read a third weight column")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="flowcode",
        description="Flow-based community detection and code-structure link prediction.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_part = sub.add_parser("partition", help="partition one network, write tree files")
    p_part.add_argument("input", help="edge list path")
    _add_input_flags(p_part)
    _add_model_flags(p_part)
    p_part.add_argument("-o", "--output", default=None, help="output base path")
    p_part.set_defaults(func=cmd_partition)

    p_score = sub.add_parser("score", help="score node pairs against a tree JSON file")
    p_score.add_argument("tree", help="tree JSON path (from partition)")
    p_score.add_argument("pairs", help="pair list path, 'src dst' per line")
    p_score.add_argument("-o", "--output", default=None, help="scores path (default stdout)")
    p_score.set_defaults(func=cmd_score)

    p_exp = sub.add_parser("experiment", help="run the link-removal grid, write records CSV")
    p_exp.add_argument("inputs", nargs="+", help="edge list paths (network = file stem)")
    _add_input_flags(p_exp)
    p_exp.add_argument(
        "--method",
        default=",".join(METHODS),
        help="comma-separated method tags (default: all)",
    )
    p_exp.add_argument("--trials", type=int, default=100, help="optimizer restarts")
    p_exp.add_argument("--seed", type=int, default=0, help="master random seed")
    p_exp.add_argument("--fractions", default=DEFAULT_FRACTIONS, help="removal fractions")
    p_exp.add_argument("--repeats", type=int, default=5, help="splits per fraction")
    p_exp.add_argument("--beta", type=float, default=0.7, help="one-step weight in mmt")
    p_exp.add_argument("--delta", type=float, default=0.5, help="stop probability in vmt")
    p_exp.add_argument(
        "--correction", type=float, default=50.0, help="prior strength offset constant"
    )
    p_exp.add_argument(
        "--jobs",
        type=int,
        default=max(1, os.cpu_count() or 1),
        help="concurrent experiment cells",
    )
    p_exp.add_argument("-o", "--output", default=None, help="records CSV path")
    p_exp.set_defaults(func=cmd_experiment)

    p_rep = sub.add_parser("report", help="aggregate a records CSV into summary tables")
    p_rep.add_argument("records", help="records CSV path")
    p_rep.add_argument(
        "--flip-auc",
        action=argparse.BooleanOptionalAction,
        default=True,
        help="flip sub-0.5 per-network AUC means to 1-AUC",
    )
    p_rep.add_argument(
        "--allow-missing", action="store_true", help="summarize incomplete grids"
    )
    p_rep.add_argument("--seed", type=int, default=0, help="bootstrap seed")
    p_rep.add_argument("-o", "--output", default=None, help="output base path")
    p_rep.set_defaults(func=cmd_report)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "seed", 0) < 0:
        parser.error("--seed must be non-negative")
    try:
        return args.func(args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
