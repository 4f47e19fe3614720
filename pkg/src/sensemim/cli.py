"""Command-line front end: every pipeline stage as its own subcommand.

The stage subcommands (synth, train-mim, embed, cluster, polysemy,
evaluate) operate on explicit files so any segment of the pipeline can be
run and inspected alone; ``pipeline`` and ``sweep-layers`` orchestrate
whole runs from a declarative JSON config with flag overrides. Stage
outputs chain: train-mim writes a checkpoint, embed turns a dump plus a
checkpoint into a dump of hidden-layer vectors, cluster turns a dump into
a key, and composing them reproduces the pipeline's canonical key for the
same seed. Reports carry exactly one timestamp line, so two identical
runs differ in at most that line.

Exit codes: 0 on success (for ``pipeline``: only if every word
completed), 1 if some words failed, 2 on a usage or data error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time

import numpy as np

from .datamodel import (
    DataError,
    SenseKey,
    VectorPair,
    VectorPairSet,
    parse_key,
    read_vector_dump,
    write_key,
    write_vector_dump,
)
from .metrics import score_rows
from .mim import MimConfig, embed, load_model, save_model, train
from .pipeline import (
    PipelineConfig,
    PipelineError,
    benchmark_specs,
    cluster_vectors,
    dump_path,
    metric_names,
    render_report,
    render_sweep,
    run_pipeline,
    score_key,
    sweep_layers,
    write_keys,
    write_synth_corpus,
)
from .polysemy import DEFAULT_CALIBRATION, clusters_from_score, polysemy_score

_CONFIG_FIELDS = (
    "dumps_dir",
    "out_dir",
    "gold_key",
    "words",
    "layer",
    "mode",
    "fixed_k",
    "calibration",
    "graded",
    "baseline",
    "missing",
    "workers",
    "seed",
    "hidden_dim",
    "num_classes",
    "epochs",
    "batch_size",
    "runs",
    "lr_init",
    "match_coeff",
)


def _timestamp() -> str:
    return time.strftime("%Y-%m-%d %H:%M:%S")


def _split_group(word: str) -> tuple[str, str]:
    parts = word.split(".")
    if len(parts) != 2:
        raise PipelineError(f"word must be <lemma>.<pos>, got {word!r}")
    return parts[0], parts[1]


# ---------------------------------------------------------------------------
# Config assembly (file + flag overrides)


def _load_config_file(path: str) -> dict:
    try:
        with open(path, encoding="utf-8") as fh:
            raw = json.load(fh)
    except json.JSONDecodeError as exc:
        raise PipelineError(f"config file {path}: invalid JSON ({exc})") from exc
    if not isinstance(raw, dict):
        raise PipelineError(f"config file {path}: expected a JSON object")
    unknown = sorted(set(raw) - set(_CONFIG_FIELDS))
    if unknown:
        raise PipelineError(f"config file {path}: unknown field {unknown[0]!r}")
    return raw


def _build_config(args: argparse.Namespace) -> PipelineConfig:
    """Config file values first, then any flag given on the command line."""
    merged: dict = {}
    if args.config:
        merged.update(_load_config_file(args.config))
    for name in _CONFIG_FIELDS:
        value = getattr(args, name, None)
        if value is not None:
            merged[name] = value
    if "words" in merged:
        merged["words"] = tuple(merged["words"])
    if "calibration" in merged:
        cal = merged["calibration"]
        if len(cal) != 2:
            raise PipelineError(f"calibration needs two numbers, got {cal!r}")
        merged["calibration"] = (float(cal[0]), float(cal[1]))
    missing = [f for f in ("dumps_dir", "out_dir") if f not in merged]
    if missing:
        raise PipelineError(f"missing required config field {missing[0]!r}")
    try:
        return PipelineConfig(**merged)
    except TypeError as exc:
        raise PipelineError(f"bad config: {exc}") from exc


def _add_config_flags(sub: argparse.ArgumentParser) -> None:
    sub.add_argument("--config", help="JSON config file; flags override its fields")
    sub.add_argument("--dumps", dest="dumps_dir", help="directory with .dump files")
    sub.add_argument("--out", dest="out_dir", help="output directory")
    sub.add_argument("--gold", dest="gold_key", help="gold key file to score against")
    sub.add_argument("--words", nargs="+", help="lemma.pos groups (default: discover)")
    sub.add_argument("--layer", type=int, help="encoder layer index (default 0)")
    sub.add_argument("--mode", choices=("fixed", "dynamic"), help="cluster-count mode")
    sub.add_argument("--fixed-k", dest="fixed_k", type=int, help="cluster count for fixed mode")
    sub.add_argument(
        "--calibration",
        nargs=2,
        type=float,
        metavar=("LOW", "HIGH"),
        help="dispersion-score endpoints mapped to 2 and 10 clusters",
    )
    sub.add_argument("--graded", action=argparse.BooleanOptionalAction, default=None)
    sub.add_argument(
        "--baseline",
        action=argparse.BooleanOptionalAction,
        default=None,
        help="skip training and cluster the raw vectors",
    )
    sub.add_argument("--missing", choices=("penalize", "drop"), help="missing-instance policy")
    sub.add_argument("--workers", type=int, help="parallel word workers")
    sub.add_argument("--seed", type=int, help="global seed")
    sub.add_argument("--hidden-dim", dest="hidden_dim", type=int)
    sub.add_argument("--num-classes", dest="num_classes", type=int)
    sub.add_argument("--epochs", type=int)
    sub.add_argument("--batch-size", dest="batch_size", type=int)
    sub.add_argument("--runs", type=int, help="independent training restarts")
    sub.add_argument("--lr-init", dest="lr_init", type=float)
    sub.add_argument("--match-coeff", dest="match_coeff", type=float)


# ---------------------------------------------------------------------------
# Stage subcommands


def cmd_synth(args: argparse.Namespace) -> int:
    specs = benchmark_specs(
        n_words=args.n_words,
        dim=args.dim,
        instances_per_sense=args.per_sense,
        cluster_spread=args.spread,
        paraphrase_jitter=args.jitter,
        separation=args.separation,
        seed=args.seed,
    )
    gold_path = write_synth_corpus(specs, args.out, layer=args.layer)
    print(f"wrote {len(specs)} words to {args.out}")
    print(f"gold key: {gold_path}")
    return 0


def _net_config(args: argparse.Namespace, input_dim: int) -> MimConfig:
    return MimConfig(
        input_dim=input_dim,
        hidden_dim=args.hidden_dim,
        num_classes=args.num_classes,
        epochs=args.epochs,
        batch_size=args.batch_size,
        runs=args.runs,
        lr_init=args.lr_init,
        match_coeff=args.match_coeff,
        seed=args.seed,
    )


def cmd_train_mim(args: argparse.Namespace) -> int:
    _split_group(args.word)
    train_set = read_vector_dump(dump_path(args.dumps, args.word, args.layer, "train"))
    val_set = read_vector_dump(dump_path(args.dumps, args.word, args.layer, "test"))
    model = train(train_set, val_set, _net_config(args, train_set.dim))
    save_model(model, args.out)
    print(
        f"{args.word}: best run {model.run_id} epoch {model.epoch_id} "
        f"val loss {model.best_val_loss:.6f}"
    )
    print(f"checkpoint: {args.out}")
    return 0


def cmd_embed(args: argparse.Namespace) -> int:
    model = load_model(args.model)
    pset = read_vector_dump(args.dump)
    emb = embed(model, pset)
    prime_vectors = {}
    with_prime = [p for p in pset.pairs if p.x_prime is not None]
    if with_prime:
        swapped = VectorPairSet(
            pset.lemma,
            pset.pos,
            pset.layer,
            pset.dim,
            "test",
            [VectorPair(p.id, p.x_prime) for p in with_prime],
        )
        emb_prime = embed(model, swapped)
        prime_vectors = dict(zip(swapped.ids(), emb_prime.vectors))
    pairs = [
        VectorPair(pid, vec, prime_vectors.get(pid))
        for pid, vec in zip(emb.ids, emb.vectors)
    ]
    out_set = VectorPairSet(pset.lemma, pset.pos, pset.layer, emb.dim, pset.split, pairs)
    write_vector_dump(out_set, args.out)
    print(f"{pset.lemma}.{pset.pos}: embedded {len(pairs)} instances ({emb.dim} dims)")
    print(f"dump: {args.out}")
    return 0


def cmd_cluster(args: argparse.Namespace) -> int:
    pset = read_vector_dump(args.dump)
    calibration = tuple(args.calibration) if args.calibration else DEFAULT_CALIBRATION
    k, key = cluster_vectors(
        pset.xs(),
        pset.lemma,
        pset.pos,
        pset.ids(),
        args.mode,
        args.k,
        calibration,
        args.graded,
    )
    write_key(key, args.out)
    print(f"{pset.lemma}.{pset.pos}: k={k}, {len(key.records)} instances")
    print(f"key: {args.out}")
    return 0


def cmd_polysemy(args: argparse.Namespace) -> int:
    pset = read_vector_dump(args.dump)
    calibration = tuple(args.calibration) if args.calibration else DEFAULT_CALIBRATION
    score = polysemy_score(pset.xs())
    k = clusters_from_score(score, calibration=calibration)
    print(f"{pset.lemma}.{pset.pos}: score={score:.4f} clusters={k}")
    return 0


def cmd_evaluate(args: argparse.Namespace) -> int:
    gold = parse_key(args.gold, graded=args.graded)
    name1, name2 = metric_names(args.graded)
    if len(args.sys) == 1:
        rows = score_rows(gold, parse_key(args.sys[0], graded=args.graded), args.graded, args.missing)
        for metric, group, value in rows:
            print(f"{metric:<12} {group:<16} {value:>7.2f}")
        return 0
    # several system keys: score each, report mean and std per metric
    triples = [
        score_key(gold, parse_key(path, graded=args.graded), args.graded, args.missing)
        for path in args.sys
    ]
    stacked = np.asarray(triples, dtype=np.float64)
    print(f"system keys: {len(args.sys)}")
    for name, column in zip((name1, name2, "AVG"), stacked.T):
        print(f"{name:<12} {'ALL':<16} {column.mean():>7.2f} ±{column.std():>6.2f}")
    return 0


# ---------------------------------------------------------------------------
# Orchestration subcommands


def cmd_pipeline(args: argparse.Namespace) -> int:
    config = _build_config(args)
    gold = None
    if config.gold_key:
        gold = parse_key(config.gold_key, graded=config.graded)
    result = run_pipeline(config, gold)
    os.makedirs(config.out_dir, exist_ok=True)
    write_keys(result)
    text, tsv = render_report(result, _timestamp())
    with open(os.path.join(config.out_dir, "report.txt"), "w", encoding="utf-8") as fh:
        fh.write(text)
    with open(os.path.join(config.out_dir, "report.tsv"), "w", encoding="utf-8") as fh:
        fh.write(tsv)
    print(text, end="")
    return 0 if result.all_ok() else 1


def cmd_sweep_layers(args: argparse.Namespace) -> int:
    config = _build_config(args)
    if not config.gold_key:
        raise PipelineError("sweep-layers needs a gold key (--gold or config gold_key)")
    gold = parse_key(config.gold_key, graded=config.graded)
    rows = sweep_layers(config, args.layers, gold)
    text, plot = render_sweep(rows, metric_names(config.graded), _timestamp())
    os.makedirs(config.out_dir, exist_ok=True)
    with open(os.path.join(config.out_dir, "sweep.txt"), "w", encoding="utf-8") as fh:
        fh.write(text)
    with open(os.path.join(config.out_dir, "sweep.tsv"), "w", encoding="utf-8") as fh:
        fh.write(plot)
    print(text, end="")
    return 0


# ---------------------------------------------------------------------------
# Parser


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sensemim",
        description="Word sense induction: train, embed, cluster, score.",
    )
    subs = parser.add_subparsers(dest="command", required=True)

    p = subs.add_parser("synth", help="generate a synthetic benchmark corpus")
    p.add_argument("--out", required=True, help="output directory for dumps and gold key")
    p.add_argument("--n-words", dest="n_words", type=int, default=10)
    p.add_argument("--dim", type=int, default=16)
    p.add_argument("--per-sense", dest="per_sense", type=int, default=60)
    p.add_argument("--spread", type=float, default=0.25)
    p.add_argument("--jitter", type=float, default=0.05)
    p.add_argument("--separation", type=float, default=0.8)
    p.add_argument("--seed", type=int, default=2026)
    p.add_argument("--layer", type=int, default=0)
    p.set_defaults(func=cmd_synth)

    p = subs.add_parser("train-mim", help="train the pair network for one word")
    p.add_argument("--dumps", required=True, help="directory with the word's dumps")
    p.add_argument("--word", required=True, help="lemma.pos group")
    p.add_argument("--layer", type=int, default=0)
    p.add_argument("--out", required=True, help="checkpoint output path")
    p.add_argument("--hidden-dim", dest="hidden_dim", type=int, default=2048)
    p.add_argument("--num-classes", dest="num_classes", type=int, default=7)
    p.add_argument("--epochs", type=int, default=5)
    p.add_argument("--batch-size", dest="batch_size", type=int, default=32)
    p.add_argument("--runs", type=int, default=8)
    p.add_argument("--lr-init", dest="lr_init", type=float, default=2e-5)
    p.add_argument("--match-coeff", dest="match_coeff", type=float, default=0.1)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_train_mim)

    p = subs.add_parser("embed", help="write hidden-layer vectors for a dump")
    p.add_argument("--model", required=True, help="checkpoint path")
    p.add_argument("--dump", required=True, help="input dump")
    p.add_argument("--out", required=True, help="output dump of embedded vectors")
    p.set_defaults(func=cmd_embed)

    p = subs.add_parser("cluster", help="cluster a dump's vectors into a key")
    p.add_argument("--dump", required=True)
    p.add_argument("--out", required=True, help="key output path")
    p.add_argument("--mode", choices=("fixed", "dynamic"), default="fixed")
    p.add_argument("--k", type=int, default=7, help="cluster count for fixed mode")
    p.add_argument("--calibration", nargs=2, type=float, metavar=("LOW", "HIGH"))
    p.add_argument("--graded", action="store_true")
    p.set_defaults(func=cmd_cluster)

    p = subs.add_parser("polysemy", help="dispersion score and cluster count for a dump")
    p.add_argument("--dump", required=True)
    p.add_argument("--calibration", nargs=2, type=float, metavar=("LOW", "HIGH"))
    p.set_defaults(func=cmd_polysemy)

    p = subs.add_parser("evaluate", help="score system key(s) against a gold key")
    p.add_argument("--gold", required=True)
    p.add_argument("--sys", required=True, nargs="+", help="one or more system keys")
    p.add_argument("--graded", action="store_true")
    p.add_argument("--missing", choices=("penalize", "drop"), default="penalize")
    p.set_defaults(func=cmd_evaluate)

    p = subs.add_parser("pipeline", help="run the full per-word pipeline")
    _add_config_flags(p)
    p.set_defaults(func=cmd_pipeline)

    p = subs.add_parser("sweep-layers", help="score each layer's dumps")
    _add_config_flags(p)
    p.add_argument("--layers", required=True, nargs="+", type=int)
    p.set_defaults(func=cmd_sweep_layers)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (DataError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
