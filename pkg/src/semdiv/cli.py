"""Command-line entry points.

Every subcommand reads its inputs, validates them, and writes its result
atomically (temp file + rename), so a crashed run never leaves a partial
output behind. Outputs are deterministic: running the same command twice
with the same inputs and seed produces byte-identical files.

Exit codes: 0 on success, 1 for usage problems (unknown flags, bad flag
values), 2 for data problems (missing or malformed input files).
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path
from typing import Sequence

import numpy as np

from .clustering import (
    ClusterModel,
    assign,
    kmeans_fit,
    load_model,
    normalize_rows,
    save_model,
    semantic_distribution,
)
from .corpus_io import EmbeddingMatrix, atomic_write_text, load_responses, read_embeddings
from .dress import apply_nt_flags, compute_weights, head_clusters, write_weight_table
from .errors import DataError
from .lexical_metrics import build_vocab_counts, lexical_report
from .pairwise import bt_fit, likert_to_outcomes, pearson, read_annotations, spearman
from .sement import sem_ent
from .toy_trainer import (
    DEFAULT_SCENARIO,
    TrainConfig,
    evaluate_generations,
    head_mass,
    make_synthetic_dataset,
    make_world,
    train,
)

__all__ = ["main", "build_parser", "robustness_matrix"]


class _UsageError(Exception):
    """A problem with how the command was invoked (exit code 1)."""


class _Parser(argparse.ArgumentParser):
    def error(self, message: str) -> None:  # type: ignore[override]
        raise _UsageError(message)


def _parse_int_list(text: str, flag: str) -> list[int]:
    try:
        values = [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise _UsageError(f"{flag} expects comma-separated integers, got {text!r}") from None
    if not values:
        raise _UsageError(f"{flag} must list at least one integer")
    if min(values) < 1:
        raise _UsageError(f"{flag} values must be >= 1")
    if len(set(values)) != len(values):
        raise _UsageError(f"{flag} values must be distinct")
    return values


def _require(condition: bool, message: str) -> None:
    if not condition:
        raise _UsageError(message)


def _corpus_format(path: str, fmt: str | None) -> str:
    if fmt:
        return fmt
    suffix = Path(path).suffix.lower()
    if suffix in (".jsonl", ".json"):
        return "jsonl"
    if suffix == ".tsv":
        return "tsv"
    raise _UsageError(f"cannot infer corpus format from {path!r}; pass --format jsonl|tsv")


def _prep(matrix: EmbeddingMatrix, normalize: bool) -> EmbeddingMatrix | np.ndarray:
    return normalize_rows(matrix) if normalize else matrix


def _write_json(path: str, obj: object) -> None:
    atomic_write_text(path, json.dumps(obj, indent=2) + "\n")


def _load_json_map(path: str) -> dict[str, float]:
    p = Path(path)
    if not p.is_file():
        raise DataError(f"no such file: {p}")
    try:
        obj = json.loads(p.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise DataError(f"{p}: invalid JSON: {exc.msg}") from exc
    if not isinstance(obj, dict):
        raise DataError(f"{p}: expected a JSON object mapping names to numbers")
    out: dict[str, float] = {}
    for key, value in obj.items():
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise DataError(f"{p}: value for {key!r} is not a number")
        out[key] = float(value)
    return out


def _head_policy(args: argparse.Namespace) -> tuple[str, int | None]:
    policy = args.head_policy.replace("-", "_")
    if policy == "top_m":
        _require(args.top_m >= 1, "--top-m must be >= 1")
        return policy, args.top_m
    return policy, None


# ---------------------------------------------------------------------------
# plotting (self-contained SVG, no plotting dependency)


def _svg_bar_chart(probs: Sequence[float], title: str) -> str:
    """A bar chart of cluster probabilities, sorted descending, with a
    dashed line at the uniform level 1/k. Deterministic output."""
    values = sorted((float(v) for v in probs), reverse=True)
    k = len(values)
    uniform = 1.0 / k
    width, height = 640.0, 360.0
    left, right, top, bottom = 56.0, 12.0, 34.0, 30.0
    plot_w = width - left - right
    plot_h = height - top - bottom
    ymax = max(max(values), uniform) * 1.1 or 1.0

    def sx(v: float) -> str:
        return format(v, ".2f")

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{sx(width)}" height="{sx(height)}" '
        f'viewBox="0 0 {sx(width)} {sx(height)}">',
        f'<text x="{sx(left)}" y="20" font-family="sans-serif" font-size="14">{title}</text>',
        f'<line x1="{sx(left)}" y1="{sx(top)}" x2="{sx(left)}" y2="{sx(top + plot_h)}" stroke="black"/>',
        f'<line x1="{sx(left)}" y1="{sx(top + plot_h)}" x2="{sx(left + plot_w)}" y2="{sx(top + plot_h)}" stroke="black"/>',
        f'<text x="{sx(left - 6)}" y="{sx(top + 5)}" font-family="sans-serif" font-size="11" '
        f'text-anchor="end">{format(ymax, ".3f")}</text>',
        f'<text x="{sx(left - 6)}" y="{sx(top + plot_h + 4)}" font-family="sans-serif" font-size="11" '
        f'text-anchor="end">0</text>',
    ]
    slot = plot_w / k
    bar_w = slot * 0.8
    for i, v in enumerate(values):
        bar_h = plot_h * v / ymax
        x = left + i * slot + slot * 0.1
        y = top + plot_h - bar_h
        parts.append(f'<rect x="{sx(x)}" y="{sx(y)}" width="{sx(bar_w)}" height="{sx(bar_h)}" fill="#4878a8"/>')
    uy = top + plot_h - plot_h * uniform / ymax
    parts.append(
        f'<line x1="{sx(left)}" y1="{sx(uy)}" x2="{sx(left + plot_w)}" y2="{sx(uy)}" '
        f'stroke="#b04030" stroke-dasharray="6,4"/>'
    )
    parts.append(
        f'<text x="{sx(left + plot_w)}" y="{sx(uy - 4)}" font-family="sans-serif" font-size="11" '
        f'text-anchor="end" fill="#b04030">uniform {format(uniform, ".4f")}</text>'
    )
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


# ---------------------------------------------------------------------------
# subcommands


def _cmd_metrics(args: argparse.Namespace) -> int:
    ns = _parse_int_list(args.ngrams, "--ngrams")
    _require(args.lf_threshold >= 1, "--lf-threshold must be >= 1")
    corpus = load_responses(args.input, _corpus_format(args.input, args.format))
    train_counts = None
    if args.train:
        train_corpus = load_responses(args.train, _corpus_format(args.train, args.train_format))
        train_counts = build_vocab_counts(train_corpus)
    report = lexical_report(corpus, tuple(ns), train_counts, args.lf_threshold)
    out = {
        "dist": {str(n): report.dist[n] for n in ns},
        "ent": {str(n): report.ent[n] for n in ns},
        "lf": report.lf,
    }
    _write_json(args.out, out)
    print(f"wrote {args.out}")
    return 0


def _fit_args_ok(args: argparse.Namespace) -> None:
    _require(args.k >= 1, "--k must be >= 1")
    _require(args.seed >= 0, "--seed must be >= 0")
    _require(args.max_iter >= 1, "--max-iter must be >= 1")
    _require(args.tol >= 0, "--tol must be >= 0")


def _cmd_cluster_fit(args: argparse.Namespace) -> int:
    _fit_args_ok(args)
    X = _prep(read_embeddings(args.emb), args.normalize)
    model = kmeans_fit(X, k=args.k, seed=args.seed, max_iter=args.max_iter, tol=args.tol)
    save_model(model, args.out)
    print(f"k={model.k} dims={model.dims} iterations={model.iterations_run} inertia={model.inertia:.17g}")
    return 0


def _cmd_cluster_assign(args: argparse.Namespace) -> int:
    model = load_model(args.model)
    X = _prep(read_embeddings(args.emb), args.normalize)
    labels = assign(model, X)
    _write_json(args.out, {"k": model.k, "labels": labels.labels.tolist()})
    print(f"assigned {len(labels)} points to {model.k} clusters")
    return 0


def _sement_model(args: argparse.Namespace) -> ClusterModel:
    _require(bool(args.model) != bool(args.train_emb), "pass exactly one of --model or --train-emb")
    if args.model:
        return load_model(args.model)
    _fit_args_ok(args)
    X = _prep(read_embeddings(args.train_emb), args.normalize)
    return kmeans_fit(X, k=args.k, seed=args.seed, max_iter=args.max_iter, tol=args.tol)


def _cmd_sement(args: argparse.Namespace) -> int:
    model = _sement_model(args)
    test = _prep(read_embeddings(args.test_emb), args.normalize)
    labels = assign(model, test)
    dist = semantic_distribution(labels, model.k)
    score = sem_ent(dist)
    out = {
        "sem_ent": score.value,
        "normalized": score.normalized,
        "k": score.k,
        "n": dist.n,
        "cluster_probs": dist.probs.tolist(),
    }
    _write_json(args.out, out)
    if args.plot:
        atomic_write_text(args.plot, _svg_bar_chart(dist.probs, "cluster probabilities"))
    print(f"sem_ent={score.value:.17g} normalized={score.normalized:.17g} k={score.k}")
    return 0


def _cmd_dress_weights(args: argparse.Namespace) -> int:
    _require(args.gamma >= 0, "--gamma must be >= 0")
    corpus = load_responses(args.train, _corpus_format(args.train, args.format))
    X = _prep(read_embeddings(args.train_emb), args.normalize)
    rows = X.rows if isinstance(X, EmbeddingMatrix) else X.shape[0]
    if rows != len(corpus):
        raise DataError(f"{args.train} has {len(corpus)} records but {args.train_emb} has {rows} rows")
    if args.model:
        model = load_model(args.model)
    else:
        _fit_args_ok(args)
        model = kmeans_fit(X, k=args.k, seed=args.seed, max_iter=args.max_iter, tol=args.tol)
    labels = assign(model, X)
    dist = semantic_distribution(labels, model.k)
    table = compute_weights(corpus, labels, dist, args.gamma)
    if args.nt:
        _require(bool(args.generated_emb), "--nt requires --generated-emb")
        gen = _prep(read_embeddings(args.generated_emb), args.normalize)
        gen_rows = gen.rows if isinstance(gen, EmbeddingMatrix) else gen.shape[0]
        if gen_rows != len(corpus):
            raise DataError(
                f"{args.generated_emb} has {gen_rows} rows but the corpus has {len(corpus)} records"
            )
        policy, m = _head_policy(args)
        heads = head_clusters(dist, policy, m)
        table = apply_nt_flags(table, assign(model, gen), heads)
    write_weight_table(table, args.out, renormalize=args.renormalize)
    negatives = sum(1 for e in table.entries if e.nt)
    print(f"wrote {len(table)} weights ({negatives} negative) to {args.out}")
    return 0


def _cmd_simulate(args: argparse.Namespace) -> int:
    for flag, value in (
        ("--contexts", args.contexts),
        ("--templates", args.templates),
        ("--k", args.k),
        ("--size", args.size),
        ("--epochs", args.epochs),
    ):
        _require(value >= 1, f"{flag} must be >= 1")
    _require(args.k <= args.templates, "--k cannot exceed --templates")
    _require(args.skew >= 1.0, "--skew must be >= 1")
    _require(args.lr > 0, "--lr must be positive")
    _require(args.gamma >= 0, "--gamma must be >= 0")
    _require(args.seed >= 0, "--seed must be >= 0")
    policy, m = _head_policy(args)

    world = make_world(args.contexts, args.templates, args.k)
    dataset = make_synthetic_dataset(world, skew=args.skew, size=args.size, seed=args.seed)
    arms = {
        "vanilla": TrainConfig(epochs=args.epochs, lr=args.lr, gamma=0.0, nt_enabled=False,
                               head_policy=policy, top_m=m, seed=args.seed),
        "dress": TrainConfig(epochs=args.epochs, lr=args.lr, gamma=args.gamma, nt_enabled=True,
                             head_policy=policy, top_m=m, seed=args.seed),
    }
    heads = head_clusters(dataset.dist, policy, m)
    os.makedirs(args.out_dir, exist_ok=True)

    summary: dict[str, object] = {
        "dataset": {
            "sem_ent": sem_ent(dataset.dist).value,
            "cluster_probs": dataset.dist.probs.tolist(),
            "size": len(dataset),
        }
    }
    finals = {}
    for name, config in arms.items():
        model, history = train(world, dataset, config)
        rows = ["epoch,loss,sem_ent,head_mass"]
        for epoch in range(len(history)):
            rows.append(f"{epoch},{history.loss[epoch]!r},{history.sem_ent[epoch]!r},{history.head_mass[epoch]!r}")
        atomic_write_text(os.path.join(args.out_dir, f"{name}.csv"), "\n".join(rows) + "\n")
        final_score = evaluate_generations(model, world)
        finals[name] = final_score.value
        summary[name] = {
            "final_loss": history.loss[-1],
            "final_sem_ent": final_score.value,
            "final_head_mass": head_mass(model, world, heads),
        }
        if args.plot:
            gen = model.logits.argmax(axis=1)
            gen_dist = semantic_distribution(world.template_cluster[gen], world.k)
            atomic_write_text(
                os.path.join(args.out_dir, f"{name}.svg"),
                _svg_bar_chart(gen_dist.probs, f"{name}: generated cluster probabilities"),
            )
    _write_json(os.path.join(args.out_dir, "summary.json"), summary)
    print(f"vanilla sem_ent={finals['vanilla']:.6f} dress sem_ent={finals['dress']:.6f}")
    return 0


def _cmd_bt_fit(args: argparse.Namespace) -> int:
    _require(args.max_iter >= 1, "--max-iter must be >= 1")
    _require(args.tol > 0, "--tol must be positive")
    annotations = read_annotations(args.annotations)
    outcomes = likert_to_outcomes(annotations, ties=args.tie_policy)
    scores = bt_fit(outcomes, max_iter=args.max_iter, tol=args.tol)
    _write_json(args.out, {item: scores.theta[item] for item in sorted(scores.theta)})
    print(f"fitted {len(scores.theta)} items in {scores.iterations} iterations")
    return 0


def _cmd_correlate(args: argparse.Namespace) -> int:
    x_map = _load_json_map(args.x)
    y_map = _load_json_map(args.y)
    if set(x_map) != set(y_map):
        only_x = sorted(set(x_map) - set(y_map))[:5]
        only_y = sorted(set(y_map) - set(x_map))[:5]
        raise DataError(f"key sets differ: only in {args.x}: {only_x}; only in {args.y}: {only_y}")
    keys = sorted(x_map)
    if len(keys) < 3:
        raise DataError(f"need at least 3 shared keys, got {len(keys)}")
    x = [x_map[key] for key in keys]
    y = [y_map[key] for key in keys]
    pe = pearson(x, y)
    sp = spearman(x, y)
    out = {
        "pearson": {"r": pe.coefficient, "p": pe.p_value},
        "spearman": {"rho": sp.coefficient, "p": sp.p_value},
        "n": pe.n,
    }
    _write_json(args.out, out)
    print(f"pearson r={pe.coefficient:.6f} (p={pe.p_value:.3g}) spearman rho={sp.coefficient:.6f} (p={sp.p_value:.3g})")
    return 0


def robustness_matrix(
    train_points: EmbeddingMatrix | np.ndarray,
    system_points: Sequence[EmbeddingMatrix | np.ndarray],
    ks: Sequence[int],
    seed: int = 0,
    max_iter: int = 300,
    tol: float = 1e-6,
) -> dict[str, object]:
    """Score every system at every cluster count and cross-correlate.

    For each k, fits k-means on ``train_points`` and computes each
    system's entropy score. The Spearman matrix entry (a, b) rank-
    correlates the per-system score vectors at ks[a] and ks[b]; the
    diagonal is 1 by definition. Off-diagonal entries (and their average)
    need at least 3 systems and are None otherwise.
    """
    scores: dict[int, list[float]] = {}
    for k in ks:
        model = kmeans_fit(train_points, k=k, seed=seed, max_iter=max_iter, tol=tol)
        scores[k] = [
            sem_ent(semantic_distribution(assign(model, X), k)).value for X in system_points
        ]
    size = len(ks)
    enough = len(system_points) >= 3
    matrix: list[list[float | None]] = []
    for a in range(size):
        row: list[float | None] = []
        for b in range(size):
            if a == b:
                row.append(1.0)
            elif enough:
                row.append(spearman(scores[ks[a]], scores[ks[b]]).coefficient)
            else:
                row.append(None)
        matrix.append(row)
    upper = [matrix[a][b] for a in range(size) for b in range(size) if a < b]
    average = float(np.mean(upper)) if enough and upper else None
    return {"sem_ent": scores, "spearman": matrix, "average_spearman": average}


def _cmd_robustness(args: argparse.Namespace) -> int:
    ks = _parse_int_list(args.ks, "--ks")
    _require(args.seed >= 0, "--seed must be >= 0")
    paths = [p for p in args.emb.split(",") if p.strip()]
    _require(bool(paths), "--emb must list at least one embedding file")
    train_X = _prep(read_embeddings(args.train_emb), args.normalize)
    systems = [_prep(read_embeddings(p), args.normalize) for p in paths]
    result = robustness_matrix(train_X, systems, ks, seed=args.seed)
    out = {
        "ks": ks,
        "systems": [Path(p).name for p in paths],
        "sem_ent": {str(k): result["sem_ent"][k] for k in ks},  # type: ignore[index]
        "spearman": result["spearman"],
        "average_spearman": result["average_spearman"],
    }
    _write_json(args.out, out)
    avg = result["average_spearman"]
    print(f"average off-diagonal spearman: {'n/a' if avg is None else format(avg, '.6f')}")
    return 0


# ---------------------------------------------------------------------------
# parser


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="semdiv", description="Semantic diversity analysis for response corpora.")
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")

    def add_fit_flags(p: argparse.ArgumentParser, with_k: bool = True) -> None:
        if with_k:
            p.add_argument("--k", type=int, default=20, help="number of clusters (default 20)")
        p.add_argument("--seed", type=int, default=0, help="random seed (default 0)")
        p.add_argument("--max-iter", type=int, default=300, help="maximum Lloyd iterations (default 300)")
        p.add_argument("--tol", type=float, default=1e-6, help="centroid-shift stopping tolerance (default 1e-6)")
        p.add_argument("--normalize", action="store_true", help="L2-normalize embedding rows first")

    def add_head_flags(p: argparse.ArgumentParser) -> None:
        p.add_argument("--head-policy", choices=["above-uniform", "top-m"], default="above-uniform",
                       help="how head clusters are chosen (default above-uniform)")
        p.add_argument("--top-m", type=int, default=5, help="head cluster count for --head-policy top-m (default 5)")

    p = sub.add_parser("metrics", help="lexical diversity metrics for a response corpus")
    p.add_argument("--input", required=True, help="response corpus (JSONL or TSV)")
    p.add_argument("--format", choices=["jsonl", "tsv"], help="corpus format (default: infer from suffix)")
    p.add_argument("--ngrams", default="1,2,3", help="comma-separated n-gram orders (default 1,2,3)")
    p.add_argument("--train", help="training corpus for the low-frequency rate")
    p.add_argument("--train-format", choices=["jsonl", "tsv"], help="training corpus format")
    p.add_argument("--lf-threshold", type=int, default=100,
                   help="training count below which a token is rare (default 100)")
    p.add_argument("--out", required=True, help="output JSON path")
    p.set_defaults(func=_cmd_metrics)

    cluster = sub.add_parser("cluster", help="fit or apply a k-means model")
    csub = cluster.add_subparsers(dest="subcommand", required=True, metavar="SUBCOMMAND")

    p = csub.add_parser("fit", help="fit k-means on an embedding file")
    p.add_argument("--emb", required=True, help="embedding file (SEMB or text)")
    add_fit_flags(p)
    p.add_argument("--out", required=True, help="output model path (SKMC)")
    p.set_defaults(func=_cmd_cluster_fit)

    p = csub.add_parser("assign", help="assign embeddings to a fitted model's clusters")
    p.add_argument("--model", required=True, help="SKMC model path")
    p.add_argument("--emb", required=True, help="embedding file (SEMB or text)")
    p.add_argument("--normalize", action="store_true", help="L2-normalize embedding rows first")
    p.add_argument("--out", required=True, help="output JSON path")
    p.set_defaults(func=_cmd_cluster_assign)

    p = sub.add_parser("sement", help="cluster-entropy diversity score for a response set")
    p.add_argument("--test-emb", required=True, help="embeddings of the responses to score")
    p.add_argument("--train-emb", help="embeddings to fit the cluster model on")
    p.add_argument("--model", help="use an already fitted SKMC model instead of --train-emb")
    add_fit_flags(p)
    p.add_argument("--plot", help="also write an SVG bar chart of the cluster distribution here")
    p.add_argument("--out", required=True, help="output JSON path")
    p.set_defaults(func=_cmd_sement)

    p = sub.add_parser("dress-weights", help="focal training weights for a corpus")
    p.add_argument("--train", required=True, help="training corpus (JSONL or TSV)")
    p.add_argument("--format", choices=["jsonl", "tsv"], help="corpus format (default: infer from suffix)")
    p.add_argument("--train-emb", required=True, help="embeddings aligned with the corpus rows")
    p.add_argument("--model", help="use an already fitted SKMC model instead of fitting")
    add_fit_flags(p)
    p.add_argument("--gamma", type=float, default=30.0, help="focusing exponent (default 30)")
    p.add_argument("--nt", action="store_true", help="flag generated responses in head clusters for negative training")
    p.add_argument("--generated-emb", help="embeddings of one generated response per corpus record (required with --nt)")
    add_head_flags(p)
    p.add_argument("--renormalize", action="store_true", help="rescale positive weights to mean 1 in the output file")
    p.add_argument("--out", required=True, help="output JSONL weight file")
    p.set_defaults(func=_cmd_dress_weights)

    p = sub.add_parser("simulate", help="train vanilla and reweighted arms on a synthetic skewed dataset")
    p.add_argument("--contexts", type=int, default=DEFAULT_SCENARIO["num_contexts"])
    p.add_argument("--templates", type=int, default=DEFAULT_SCENARIO["num_templates"])
    p.add_argument("--k", type=int, default=DEFAULT_SCENARIO["k"])
    p.add_argument("--skew", type=float, default=DEFAULT_SCENARIO["skew"], help="Zipf exponent (default 1.5)")
    p.add_argument("--size", type=int, default=DEFAULT_SCENARIO["size"], help="training pairs to sample")
    p.add_argument("--epochs", type=int, default=DEFAULT_SCENARIO["epochs"])
    p.add_argument("--lr", type=float, default=DEFAULT_SCENARIO["lr"])
    p.add_argument("--gamma", type=float, default=30.0, help="focusing exponent for the reweighted arm (default 30)")
    add_head_flags(p)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--plot", action="store_true", help="also write SVG charts of final generation distributions")
    p.add_argument("--out-dir", required=True, help="directory for CSV traces and summary.json")
    p.set_defaults(func=_cmd_simulate)

    bt = sub.add_parser("bt", help="Bradley-Terry analysis of pairwise judgments")
    btsub = bt.add_subparsers(dest="subcommand", required=True, metavar="SUBCOMMAND")

    p = btsub.add_parser("fit", help="fit item strengths from likert annotations")
    p.add_argument("--annotations", required=True, help="JSONL annotations with fields a, b, likert")
    p.add_argument("--tie-policy", choices=["half", "drop"], default="half",
                   help="treat likert 3 as half a win each, or drop it (default half)")
    p.add_argument("--max-iter", type=int, default=10000)
    p.add_argument("--tol", type=float, default=1e-10)
    p.add_argument("--out", required=True, help="output JSON path ({item: theta})")
    p.set_defaults(func=_cmd_bt_fit)

    p = sub.add_parser("correlate", help="Pearson and Spearman correlation of two aligned JSON maps")
    p.add_argument("--x", required=True, help="JSON map {name: value}")
    p.add_argument("--y", required=True, help="JSON map {name: value} over the same names")
    p.add_argument("--out", required=True, help="output JSON path")
    p.set_defaults(func=_cmd_correlate)

    p = sub.add_parser("robustness", help="stability of entropy rankings across cluster counts")
    p.add_argument("--train-emb", required=True, help="embeddings to fit cluster models on")
    p.add_argument("--emb", required=True, help="comma-separated embedding files, one per system")
    p.add_argument("--ks", default="10,20,50,100", help="comma-separated cluster counts (default 10,20,50,100)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--normalize", action="store_true", help="L2-normalize embedding rows first")
    p.add_argument("--out", required=True, help="output JSON path")
    p.set_defaults(func=_cmd_robustness)

    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except _UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    except SystemExit as exc:  # --help
        return exc.code if isinstance(exc.code, int) else 0
    try:
        return args.func(args)
    except _UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 2
    except (ValueError, RuntimeError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
