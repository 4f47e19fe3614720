"""Per-word orchestration: train, embed, pick k, cluster, emit keys, report.

A pipeline run processes each target word independently: train the pair
network on the word's train dump (validation loss measured on the test
pairs), embed the test vectors with every run's best checkpoint, choose
the cluster count (fixed, or dynamic from the dispersion score of the
embeddings), cluster, and emit one system key per run plus a canonical
key from the globally best checkpoint. Baseline mode skips training and
clusters the raw test vectors.

Scores are reported per word as mean±std over runs; aggregate rows
macro-average each metric over words per run, take the geometric mean
per run, and then average over runs. All randomness derives from
(seed, lemma, pos, run index), so worker parallelism cannot change any
output byte.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .clustering import agglomerative, align_grades_to_labels, centroids, grade
from .datamodel import (
    ClusteringSolution,
    DataError,
    SenseKey,
    read_vector_dump,
    solution_to_key,
    write_key,
    write_vector_dump,
)
from .metrics import fuzzy_bcubed, fuzzy_nmi, geometric_avg, paired_f_score, v_measure
from .mim import MimConfig, embed, train_runs
from .polysemy import DEFAULT_CALIBRATION, clusters_from_score, polysemy_score
from .synthbench import SynthSpec, generate

_MODES = ("fixed", "dynamic")


class PipelineError(DataError):
    """A whole-run precondition failed (bad config, missing directories)."""


@dataclass(frozen=True)
class PipelineConfig:
    """Declarative description of one pipeline run."""

    dumps_dir: str
    out_dir: str
    gold_key: str | None = None
    words: tuple[str, ...] = ()  # "lemma.pos" groups; empty = discover from dumps
    layer: int = 0
    mode: str = "fixed"
    fixed_k: int = 7
    calibration: tuple[float, float] = DEFAULT_CALIBRATION
    graded: bool = False
    baseline: bool = False
    missing: str = "penalize"
    workers: int = 1
    seed: int = 0
    # network hyperparameters (input_dim comes from the dumps)
    hidden_dim: int = 2048
    num_classes: int = 7
    epochs: int = 5
    batch_size: int = 32
    runs: int = 8
    lr_init: float = 2e-5
    match_coeff: float = 0.1

    def __post_init__(self):
        if self.mode not in _MODES:
            raise PipelineError(f"mode must be one of {_MODES}, got {self.mode!r}")
        if self.fixed_k < 1:
            raise PipelineError(f"fixed_k must be >= 1, got {self.fixed_k}")
        if self.workers < 1:
            raise PipelineError(f"workers must be >= 1, got {self.workers}")
        if self.layer < 0:
            raise PipelineError(f"layer must be >= 0, got {self.layer}")


def dump_path(dumps_dir: str, group: str, layer: int, split: str) -> str:
    return os.path.join(dumps_dir, f"{group}.L{layer}.{split}.dump")


def discover_words(dumps_dir: str, layer: int) -> tuple[str, ...]:
    """lemma.pos groups that have a test dump for the layer, sorted."""
    suffix = f".L{layer}.test.dump"
    names = []
    for entry in os.listdir(dumps_dir):
        if entry.endswith(suffix):
            names.append(entry[: -len(suffix)])
    return tuple(sorted(names))


@dataclass
class WordResult:
    group: str
    status: str  # "ok" or "error"
    error: str = ""
    k_runs: list[int] = field(default_factory=list)
    keys_per_run: list[SenseKey] = field(default_factory=list)
    canonical_key: SenseKey | None = None
    best_run_id: int = -1
    # per run: (metric1, metric2, avg) on the percent scale; empty without gold
    scores: list[tuple[float, float, float]] = field(default_factory=list)


@dataclass
class PipelineResult:
    config: PipelineConfig
    words: list[WordResult]
    metric_names: tuple[str, str]

    def completed(self) -> list[WordResult]:
        return [w for w in self.words if w.status == "ok"]

    def all_ok(self) -> bool:
        return all(w.status == "ok" for w in self.words)


def cluster_vectors(
    vectors: np.ndarray,
    lemma: str,
    pos: str,
    ids,
    mode: str,
    fixed_k: int,
    calibration: tuple[float, float],
    graded: bool,
) -> tuple[int, SenseKey]:
    """Cluster one word's vectors and build its key. Returns (k, key).

    k is capped at the instance count; dynamic mode scores the vectors
    being clustered (embeddings or raw, matching the pipeline arm).
    """
    n = vectors.shape[0]
    if mode == "dynamic":
        k = clusters_from_score(polysemy_score(vectors), calibration=calibration)
    else:
        k = fixed_k
    k = min(k, n)
    labels = agglomerative(vectors, k)
    cents = centroids(vectors, labels)
    grades = align_grades_to_labels(labels, grade(vectors, cents))
    solution = ClusteringSolution(
        lemma,
        pos,
        k,
        {rid: int(labels[i]) for i, rid in enumerate(ids)},
        {rid: grades[i] for i, rid in enumerate(ids)},
    )
    solution.validate()
    return k, solution_to_key(solution, graded=graded)


def run_word(train_set, test_set, config: PipelineConfig) -> WordResult:
    """Full per-word pipeline; any stage error is captured in the result."""
    group = f"{test_set.lemma}.{test_set.pos}"
    result = WordResult(group=group, status="ok")
    try:
        if test_set.dim != train_set.dim:
            raise DataError(
                f"dimension mismatch: train dim {train_set.dim}, test dim {test_set.dim}"
            )
        if config.baseline:
            per_run_vectors = [test_set.xs()]
            best_index = 0
        else:
            mim_config = MimConfig(
                input_dim=train_set.dim,
                hidden_dim=config.hidden_dim,
                num_classes=config.num_classes,
                epochs=config.epochs,
                batch_size=config.batch_size,
                runs=config.runs,
                lr_init=config.lr_init,
                match_coeff=config.match_coeff,
                seed=config.seed,
            )
            models = train_runs(train_set, test_set, mim_config)
            best_index = 0
            for i, model in enumerate(models):
                if model.best_val_loss < models[best_index].best_val_loss:
                    best_index = i
            per_run_vectors = [embed(m, test_set).vectors for m in models]
        ids = test_set.ids()
        for vectors in per_run_vectors:
            k, key = cluster_vectors(
                vectors,
                test_set.lemma,
                test_set.pos,
                ids,
                config.mode,
                config.fixed_k,
                config.calibration,
                config.graded,
            )
            result.k_runs.append(k)
            result.keys_per_run.append(key)
        result.canonical_key = result.keys_per_run[best_index]
        result.best_run_id = best_index
    except (DataError, RuntimeError, OSError) as exc:
        result.status = "error"
        result.error = str(exc).splitlines()[0]
    return result


def _load_word(config: PipelineConfig, group: str) -> WordResult | tuple:
    """Read one word's dumps, or a WordResult carrying the error."""
    test_path = dump_path(config.dumps_dir, group, config.layer, "test")
    try:
        test_set = read_vector_dump(test_path)
        if config.baseline:
            return (test_set, test_set)
        train_set = read_vector_dump(dump_path(config.dumps_dir, group, config.layer, "train"))
        return (train_set, test_set)
    except (DataError, OSError) as exc:
        return WordResult(group=group, status="error", error=str(exc).splitlines()[0])


def score_key(gold: SenseKey, sys: SenseKey, graded: bool, missing: str) -> tuple[float, float, float]:
    """(metric1, metric2, geometric AVG) on the percent scale."""
    if graded:
        m1 = 100.0 * fuzzy_bcubed(gold, sys, missing)
        m2 = 100.0 * fuzzy_nmi(gold, sys, missing)
    else:
        m1 = 100.0 * v_measure(gold, sys, missing)
        m2 = 100.0 * paired_f_score(gold, sys, missing)
    return m1, m2, geometric_avg(m1, m2)


def metric_names(graded: bool) -> tuple[str, str]:
    return ("F-BC", "F-NMI") if graded else ("V-MEASURE", "PAIRED-F")


def run_pipeline(config: PipelineConfig, gold: SenseKey | None = None) -> PipelineResult:
    """Process every word; per-word failures never abort the others."""
    if not os.path.isdir(config.dumps_dir):
        raise PipelineError(f"dumps directory not found: {config.dumps_dir}")
    words = config.words or discover_words(config.dumps_dir, config.layer)
    if not words:
        raise PipelineError(f"no test dumps for layer {config.layer} in {config.dumps_dir}")

    def process(group: str) -> WordResult:
        loaded = _load_word(config, group)
        if isinstance(loaded, WordResult):
            return loaded
        train_set, test_set = loaded
        return run_word(train_set, test_set, config)

    if config.workers > 1:
        with ThreadPoolExecutor(max_workers=config.workers) as pool:
            results = list(pool.map(process, words))
    else:
        results = [process(g) for g in words]

    if gold is not None:
        gold_groups = {g: SenseKey(records) for g, records in gold.groups().items()}
        for word in results:
            if word.status != "ok":
                continue
            gold_word = gold_groups.get(word.group)
            if gold_word is None:
                word.status = "error"
                word.error = f"no gold records for {word.group}"
                continue
            try:
                word.scores = [
                    score_key(gold_word, key, config.graded, config.missing)
                    for key in word.keys_per_run
                ]
            except DataError as exc:
                word.status = "error"
                word.error = str(exc).splitlines()[0]
    return PipelineResult(config=config, words=results, metric_names=metric_names(config.graded))


def write_keys(result: PipelineResult) -> None:
    """Canonical per-word keys plus one combined key, in word order."""
    keys_dir = os.path.join(result.config.out_dir, "keys")
    os.makedirs(keys_dir, exist_ok=True)
    combined: list = []
    for word in result.words:
        if word.status != "ok" or word.canonical_key is None:
            continue
        write_key(word.canonical_key, os.path.join(keys_dir, f"{word.group}.key"))
        combined.extend(word.canonical_key.records)
    if combined:
        write_key(SenseKey(combined), os.path.join(result.config.out_dir, "system.key"))


def _mean_std(values: list[float]) -> tuple[float, float]:
    arr = np.asarray(values, dtype=np.float64)
    return float(arr.mean()), float(arr.std())


def _aggregate_rows(result: PipelineResult) -> tuple[list[float], list[float], list[float], list[float]]:
    """Per-run word-macro metric values and AVG; plus k means per word."""
    scored = [w for w in result.completed() if w.scores]
    if not scored:
        return [], [], [], []
    runs = len(scored[0].scores)
    m1_runs, m2_runs, avg_runs = [], [], []
    for r in range(runs):
        m1 = sum(w.scores[r][0] for w in scored) / len(scored)
        m2 = sum(w.scores[r][1] for w in scored) / len(scored)
        m1_runs.append(m1)
        m2_runs.append(m2)
        avg_runs.append(geometric_avg(m1, m2))
    k_all = [k for w in result.completed() for k in w.k_runs]
    return m1_runs, m2_runs, avg_runs, k_all


def render_report(result: PipelineResult, timestamp: str) -> tuple[str, str]:
    """(aligned text report, machine-readable TSV). TSV has no timestamp."""
    cfg = result.config
    name1, name2 = result.metric_names
    text_lines = [
        "# pipeline report",
        f"# generated: {timestamp}",
        (
            f"# mode={cfg.mode} fixed_k={cfg.fixed_k} graded={'yes' if cfg.graded else 'no'} "
            f"baseline={'yes' if cfg.baseline else 'no'} layer={cfg.layer} seed={cfg.seed} "
            f"runs={1 if cfg.baseline else cfg.runs} missing={cfg.missing}"
        ),
    ]
    tsv_lines = [
        "word\tstatus\truns\tk_mean\t"
        f"{name1.lower()}_mean\t{name1.lower()}_std\t{name2.lower()}_mean\t{name2.lower()}_std\t"
        "avg_mean\tavg_std\terror"
    ]
    header = (
        f"{'WORD':<16} {'STATUS':<7} {'K':>6} {name1 + ' (mean±std)':>22} "
        f"{name2 + ' (mean±std)':>22} {'AVG (mean±std)':>22}"
    )
    text_lines.append(header)

    def fmt_pair(mean: float, std: float) -> str:
        return f"{mean:7.2f} ±{std:6.2f}"

    for word in result.words:
        if word.status != "ok":
            text_lines.append(f"{word.group:<16} {'error':<7} {'-':>6} {word.error}")
            tsv_lines.append(
                f"{word.group}\terror\t0\t-\t-\t-\t-\t-\t-\t-\t{word.error}"
            )
            continue
        k_mean = sum(word.k_runs) / len(word.k_runs)
        if word.scores:
            m1m, m1s = _mean_std([s[0] for s in word.scores])
            m2m, m2s = _mean_std([s[1] for s in word.scores])
            avm, avs = _mean_std([s[2] for s in word.scores])
            text_lines.append(
                f"{word.group:<16} {'ok':<7} {k_mean:>6.2f} {fmt_pair(m1m, m1s):>22} "
                f"{fmt_pair(m2m, m2s):>22} {fmt_pair(avm, avs):>22}"
            )
            tsv_lines.append(
                f"{word.group}\tok\t{len(word.scores)}\t{k_mean:.4f}\t"
                f"{m1m:.4f}\t{m1s:.4f}\t{m2m:.4f}\t{m2s:.4f}\t{avm:.4f}\t{avs:.4f}\t"
            )
        else:
            text_lines.append(
                f"{word.group:<16} {'ok':<7} {k_mean:>6.2f} {'-':>22} {'-':>22} {'-':>22}"
            )
            tsv_lines.append(
                f"{word.group}\tok\t{len(word.k_runs)}\t{k_mean:.4f}\t-\t-\t-\t-\t-\t-\t"
            )

    m1_runs, m2_runs, avg_runs, k_all = _aggregate_rows(result)
    if avg_runs:
        m1m, m1s = _mean_std(m1_runs)
        m2m, m2s = _mean_std(m2_runs)
        avm, avs = _mean_std(avg_runs)
        k_mean = sum(k_all) / len(k_all)
        text_lines.append(
            f"{'ALL':<16} {'ok':<7} {k_mean:>6.2f} {fmt_pair(m1m, m1s):>22} "
            f"{fmt_pair(m2m, m2s):>22} {fmt_pair(avm, avs):>22}"
        )
        tsv_lines.append(
            f"ALL\tok\t{len(avg_runs)}\t{k_mean:.4f}\t"
            f"{m1m:.4f}\t{m1s:.4f}\t{m2m:.4f}\t{m2s:.4f}\t{avm:.4f}\t{avs:.4f}\t"
        )
    elif result.completed():
        k_all = [k for w in result.completed() for k in w.k_runs]
        k_mean = sum(k_all) / len(k_all)
        text_lines.append(
            f"{'ALL':<16} {'ok':<7} {k_mean:>6.2f} {'-':>22} {'-':>22} {'-':>22}"
        )
        tsv_lines.append(f"ALL\tok\t0\t{k_mean:.4f}\t-\t-\t-\t-\t-\t-\t")
    return "\n".join(text_lines) + "\n", "\n".join(tsv_lines) + "\n"


# ---------------------------------------------------------------------------
# Layer sweep


class SweepError(DataError):
    """A layer sweep precondition failed."""


def sweep_layers(
    config: PipelineConfig, layers: list[int], gold: SenseKey
) -> list[tuple[int, float, float, float]]:
    """Score each layer's dumps; rows are (layer, metric1, metric2, avg).

    Uses the configured pipeline arm per layer (baseline clusters raw
    vectors). Instance sets must agree across layers; a missing dump names
    its layer index.
    """
    if not layers:
        raise SweepError("no layers given")
    words = config.words or discover_words(config.dumps_dir, layers[0])
    if not words:
        raise SweepError(f"no test dumps for layer {layers[0]} in {config.dumps_dir}")
    reference_ids: dict[str, list] = {}
    rows = []
    for layer in layers:
        layer_config = replace(config, layer=layer, words=words)
        for group in words:
            path = dump_path(config.dumps_dir, group, layer, "test")
            if not os.path.exists(path):
                raise SweepError(f"layer {layer}: missing dump {path}")
            ids = read_vector_dump(path).ids()
            if group not in reference_ids:
                reference_ids[group] = ids
            elif reference_ids[group] != ids:
                raise SweepError(
                    f"layer {layer}: instance set for {group} differs from layer {layers[0]}"
                )
        result = run_pipeline(layer_config, gold)
        bad = [w for w in result.words if w.status != "ok"]
        if bad:
            raise SweepError(f"layer {layer}: {bad[0].group}: {bad[0].error}")
        m1_runs, m2_runs, avg_runs, _ = _aggregate_rows(result)
        rows.append(
            (
                layer,
                sum(m1_runs) / len(m1_runs),
                sum(m2_runs) / len(m2_runs),
                sum(avg_runs) / len(avg_runs),
            )
        )
    return rows


def render_sweep(rows, names: tuple[str, str], timestamp: str) -> tuple[str, str]:
    """(text table, plot-ready data file: layer and AVG columns)."""
    name1, name2 = names
    text = ["# layer sweep", f"# generated: {timestamp}"]
    text.append(f"{'LAYER':>5} {name1:>12} {name2:>12} {'AVG':>12}")
    plot = ["layer\tavg"]
    for layer, m1, m2, avg in rows:
        text.append(f"{layer:>5} {m1:>12.2f} {m2:>12.2f} {avg:>12.2f}")
        plot.append(f"{layer}\t{avg:.4f}")
    return "\n".join(text) + "\n", "\n".join(plot) + "\n"


# ---------------------------------------------------------------------------
# Synthetic benchmark corpus


def benchmark_specs(
    n_words: int = 10,
    dim: int = 16,
    instances_per_sense: int = 60,
    cluster_spread: float = 0.25,
    paraphrase_jitter: float = 0.05,
    separation: float = 0.8,
    seed: int = 2026,
):
    """Default benchmark: n words with true sense counts cycling 2..8."""
    specs = []
    for i in range(n_words):
        specs.append(
            SynthSpec(
                dim=dim,
                senses=2 + (i % 7),
                instances_per_sense=instances_per_sense,
                cluster_spread=cluster_spread,
                paraphrase_jitter=paraphrase_jitter,
                separation=separation,
                seed=seed + i,
                lemma=f"w{i:02d}",
                pos="n",
            )
        )
    return specs


def write_synth_corpus(specs, out_dir: str, layer: int = 0) -> str:
    """Write train/test dumps and a combined gold key; returns gold path."""
    os.makedirs(out_dir, exist_ok=True)
    gold_records: list = []
    for spec in specs:
        if spec.layer != layer:
            spec = replace(spec, layer=layer)
        train, test, gold = generate(spec)
        group = f"{spec.lemma}.{spec.pos}"
        write_vector_dump(train, dump_path(out_dir, group, layer, "train"))
        write_vector_dump(test, dump_path(out_dir, group, layer, "test"))
        gold_records.extend(gold.records)
    gold_path = os.path.join(out_dir, "gold.key")
    write_key(SenseKey(gold_records), gold_path)
    return gold_path


# ---------------------------------------------------------------------------
# Benefit experiment (trained embeddings vs raw vectors)

# Net sized for the 16-dim synthetic benchmark; the package defaults target
# pretrained-encoder dimensions and would under-train here. Width matters:
# the first-layer features must be wide enough that their cosine geometry
# tracks the input's, or the untrained projection already loses measurable
# V-measure against raw clustering.
BENCH_HIDDEN = 768
BENCH_EPOCHS = 4
BENCH_LR = 3e-3
BENCH_BATCH = 32


@dataclass
class BenefitWord:
    group: str
    v_raw: float
    v_mim_runs: list[float]


def mim_benefit_experiment(runs: int = 8, seed: int = 2026) -> list[BenefitWord]:
    """Cluster each benchmark word from raw vectors and from trained
    embeddings (one score per run), fixed k=7 in both arms."""
    out = []
    for spec in benchmark_specs(seed=seed):
        train_set, test_set, gold = generate(spec)
        ids = test_set.ids()
        _, raw_key = cluster_vectors(
            test_set.xs(), spec.lemma, spec.pos, ids, "fixed", 7, DEFAULT_CALIBRATION, False
        )
        v_raw = v_measure(gold, raw_key)
        mim_config = MimConfig(
            input_dim=spec.dim,
            hidden_dim=BENCH_HIDDEN,
            num_classes=7,
            epochs=BENCH_EPOCHS,
            batch_size=BENCH_BATCH,
            runs=runs,
            lr_init=BENCH_LR,
            match_coeff=0.1,
            seed=seed,
        )
        v_runs = []
        for model in train_runs(train_set, test_set, mim_config):
            vectors = embed(model, test_set).vectors
            _, key = cluster_vectors(
                vectors, spec.lemma, spec.pos, ids, "fixed", 7, DEFAULT_CALIBRATION, False
            )
            v_runs.append(v_measure(gold, key))
        out.append(BenefitWord(f"{spec.lemma}.{spec.pos}", v_raw, v_runs))
    return out
