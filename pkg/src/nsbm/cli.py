"""Command-line interface: generate, detect, estimate, simulate, analyze."""

from __future__ import annotations

import argparse
import json
import sys

import numpy as np

from .core import DataError, EstimationError, LabelVector
from .estimate import estimate_nsbm
from .generate import SimDesign, sample_from_design
from .harness import ExperimentConfig, run_sweep, write_csv, write_summary
from .pipeline import (
    analyze,
    load_edge_list,
    load_labels,
    load_scores,
    preprocess,
    write_edge_list,
    write_labels,
)
from .spectral import KMeansConfig, baseline_cluster, right_sc, right_smst

_DETECT_METHODS = ("right_sc", "right_smst", "left_sc", "left_ssc",
                   "symmetric_sc", "symmetric_ssc")


class _Parser(argparse.ArgumentParser):
    """argparse exits with 2 on usage errors; we reserve 2 for data errors."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _read_json(path, what: str) -> str:
    try:
        with open(path) as f:
            return f.read()
    except OSError as exc:
        raise DataError(f"cannot read {what}: {exc}") from exc


def _load_design(path) -> SimDesign:
    text = _read_json(path, "design")
    try:
        return SimDesign.from_json(text)
    except (json.JSONDecodeError, TypeError, ValueError) as exc:
        raise DataError(f"bad design file {path}: {exc}") from exc


def _cmd_generate(args) -> int:
    design = _load_design(args.design)
    seed = args.seed if args.seed is not None else design.seed
    _, graph = sample_from_design(design, seed)
    write_edge_list(graph, args.out)
    return 0


def _cmd_detect(args) -> int:
    edges = load_edge_list(args.in_path)
    graph = edges.to_graph()
    if args.method == "right_sc":
        labels = right_sc(graph, args.k, KMeansConfig(seed=args.seed))
    elif args.method == "right_smst":
        labels = right_smst(graph, args.k)
    else:
        labels = baseline_cluster(graph, args.k, args.method,
                                  KMeansConfig(seed=args.seed))
    write_labels(labels, args.out, edges.node_ids)
    return 0


def _cmd_estimate(args) -> int:
    edges = load_edge_list(args.in_path)
    graph = edges.to_graph()
    mapping = load_labels(args.labels)
    missing = [v for v in edges.node_ids if v not in mapping]
    if missing:
        raise DataError(f"labels file misses {len(missing)} node ids "
                        f"(first: {missing[0]!r})")
    raw = np.array([mapping[v] for v in edges.node_ids])
    values = np.unique(raw)
    compact = np.searchsorted(values, raw) + 1
    labels = LabelVector(compact, len(values))
    est = estimate_nsbm(graph, labels, psi_min_frac=args.psi_frac)
    out = est.to_dict()
    out["node_ids"] = list(edges.node_ids)
    out["community_values"] = [int(v) for v in values]
    with open(args.out, "w") as f:
        json.dump(out, f, indent=2)
    if len(est.failed_communities) == labels.K:
        print("estimation failed for every community", file=sys.stderr)
        return 3
    return 0


def _cmd_simulate(args) -> int:
    text = _read_json(args.config, "experiment config")
    try:
        config = ExperimentConfig.from_json(text)
    except (json.JSONDecodeError, TypeError, ValueError, KeyError) as exc:
        raise DataError(f"bad experiment config {args.config}: {exc}") from exc
    out = args.out or config.output
    if out is None:
        raise DataError("no output path: pass --out or set 'output' in the config")
    rows, summary = run_sweep(config, jobs=args.jobs)
    write_csv(rows, out, include_timing=args.timing)
    if args.summary:
        write_summary(summary, args.summary)
    return 0


def _cmd_analyze(args) -> int:
    edges = load_edge_list(args.in_path)
    graph = edges.to_graph()
    pre = preprocess(graph, min_degree=args.min_degree,
                     weight_cap=args.weight_cap, iterate=args.iterate_filter)
    kept_ids = tuple(edges.node_ids[i] for i in pre.kept)
    scores = load_scores(args.scores) if args.scores else None
    report = analyze(pre.graph, args.k, method=args.method, seed=args.seed,
                     node_ids=kept_ids, scores=scores)
    out = report.to_dict()
    out["preprocess"] = {
        "removed_nodes": [edges.node_ids[i] for i in pre.removed],
        "weights_capped": pre.weights_capped,
        "filter_passes": pre.passes,
        "self_loops_dropped": edges.self_loops_dropped,
    }
    with open(args.out, "w") as f:
        json.dump(out, f, indent=2)
    if len(report.failed_communities) == args.k:
        print("estimation failed for every community", file=sys.stderr)
        return 3
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="nsbm",
                     description="Community detection and model fitting for "
                                 "directed networks observed through edge "
                                 "nominations.")
    sub = parser.add_subparsers(dest="command", required=True,
                                parser_class=_Parser)

    p = sub.add_parser("generate", help="sample a network from a design")
    p.add_argument("--design", required=True, help="SimDesign JSON file")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", required=True, help="edge-list CSV to write")
    p.set_defaults(func=_cmd_generate)

    p = sub.add_parser("detect", help="cluster an edge list")
    p.add_argument("--in", dest="in_path", required=True)
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--method", choices=_DETECT_METHODS, default="right_sc")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", required=True, help="labels CSV to write")
    p.set_defaults(func=_cmd_detect)

    p = sub.add_parser("estimate", help="fit the nomination model given labels")
    p.add_argument("--in", dest="in_path", required=True)
    p.add_argument("--labels", required=True, help="labels CSV (id,community)")
    p.add_argument("--psi-frac", type=float, default=None,
                   help="relax the usable-block rule: fraction of positive "
                        "rows required (default: every row, as strict as it gets)")
    p.add_argument("--out", required=True, help="estimate JSON to write")
    p.set_defaults(func=_cmd_estimate)

    p = sub.add_parser("simulate", help="run a Monte Carlo sweep")
    p.add_argument("--config", required=True, help="ExperimentConfig JSON")
    p.add_argument("--out", default=None, help="results CSV")
    p.add_argument("--summary", default=None, help="summary JSON")
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--timing", action="store_true",
                   help="include wall times (breaks byte-reproducibility)")
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("analyze", help="end-to-end analysis of an edge list")
    p.add_argument("--in", dest="in_path", required=True)
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--method", choices=("right_sc", "right_smst"),
                   default="right_sc")
    p.add_argument("--min-degree", type=int, default=4)
    p.add_argument("--weight-cap", type=float, default=2.0)
    p.add_argument("--iterate-filter", action="store_true",
                   help="repeat the degree filter until stable")
    p.add_argument("--scores", default=None, help="optional id,score CSV")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", required=True, help="report JSON to write")
    p.set_defaults(func=_cmd_analyze)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except DataError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (EstimationError, np.linalg.LinAlgError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
