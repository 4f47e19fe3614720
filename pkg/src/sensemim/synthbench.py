"""Synthetic sense-labeled benchmark data and brute-force reference oracles.

The oracles are deliberately naive (explicit loops, no shared code with the
production paths) so they can serve as independent ground truth in tests:
textbook average-linkage clustering, direct double-sum mutual information,
pair-enumeration F-score, and per-instance crisp B-Cubed / NMI.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .datamodel import DataError, InstanceId, SenseKey, VectorPair, VectorPairSet
from .seeding import rng_for


class GenerationError(DataError):
    """The synthetic spec is infeasible or produced a degenerate fixture."""


# ---------------------------------------------------------------------------
# Reference oracles
# ---------------------------------------------------------------------------


def oracle_hierarchical(vectors: np.ndarray, k: int) -> np.ndarray:
    """Textbook O(n^3) average-linkage clustering over cosine distances.

    Cluster distance is recomputed every step as the unweighted mean of all
    pairwise member distances (no Lance-Williams shortcut). Ties break to
    the lexicographically smallest pair of cluster indices, where a cluster
    is indexed by its minimum leaf. Labels are numbered by first-seen leaf.
    """
    x = np.asarray(vectors, dtype=np.float64)
    n = x.shape[0]
    if not 1 <= k <= n:
        raise ValueError(f"k must be in [1, {n}], got {k}")
    base = np.empty((n, n))
    for i in range(n):
        for j in range(n):
            ni = math.sqrt(float(np.dot(x[i], x[i])))
            nj = math.sqrt(float(np.dot(x[j], x[j])))
            if ni == 0.0 or nj == 0.0:
                sim = 0.0
            else:
                sim = float(np.dot(x[i], x[j])) / (ni * nj)
            base[i, j] = min(max(1.0 - sim, 0.0), 2.0)
        base[i, i] = 0.0
    clusters: dict[int, list[int]] = {i: [i] for i in range(n)}
    while len(clusters) > k:
        slots = sorted(clusters)
        best = None
        best_pair = None
        for a_pos, i in enumerate(slots):
            for j in slots[a_pos + 1 :]:
                total = 0.0
                for p in clusters[i]:
                    for q in clusters[j]:
                        total += base[p, q]
                d = total / (len(clusters[i]) * len(clusters[j]))
                if best is None or d < best:
                    best = d
                    best_pair = (i, j)
        i, j = best_pair
        clusters[i] = clusters[i] + clusters[j]
        del clusters[j]
    labels = np.empty(n, dtype=np.int64)
    assignment = {}
    for slot, members in clusters.items():
        for m in members:
            assignment[m] = slot
    next_label = 0
    label_of_slot: dict[int, int] = {}
    for leaf in range(n):
        slot = assignment[leaf]
        if slot not in label_of_slot:
            label_of_slot[slot] = next_label
            next_label += 1
        labels[leaf] = label_of_slot[slot]
    return labels


def oracle_iic_loss(phi_x: np.ndarray, phi_xp: np.ndarray, clamp: float = 1e-12) -> float:
    """Direct double-sum mutual-information loss over the joint matrix.

    Joint entries are clamped at ``clamp`` only inside the logarithms; exact
    zeros therefore contribute exactly zero to the sum.
    """
    phi_x = np.asarray(phi_x, dtype=np.float64)
    phi_xp = np.asarray(phi_xp, dtype=np.float64)
    n, c = phi_x.shape
    joint = np.zeros((c, c))
    for i in range(n):
        for a in range(c):
            for b in range(c):
                joint[a, b] += phi_x[i, a] * phi_xp[i, b]
    joint /= n
    sym = np.zeros((c, c))
    for a in range(c):
        for b in range(c):
            sym[a, b] = (joint[a, b] + joint[b, a]) / 2.0
    loss = 0.0
    for a in range(c):
        for b in range(c):
            row = 0.0
            col = 0.0
            for t in range(c):
                row += sym[a, t]
                col += sym[t, b]
            term = (
                math.log(max(sym[a, b], clamp))
                - math.log(max(row, clamp))
                - math.log(max(col, clamp))
            )
            loss -= sym[a, b] * term
    return loss


def oracle_paired_f(gold_labels, sys_labels) -> float:
    """Paired F-score by exhaustive enumeration of unordered instance pairs."""
    n = len(gold_labels)
    both = in_sys = in_gold = 0
    for i in range(n):
        for j in range(i + 1, n):
            same_gold = gold_labels[i] == gold_labels[j]
            same_sys = sys_labels[i] == sys_labels[j]
            if same_sys:
                in_sys += 1
            if same_gold:
                in_gold += 1
            if same_gold and same_sys:
                both += 1
    precision = both / in_sys if in_sys else 0.0
    recall = both / in_gold if in_gold else 0.0
    if precision + recall == 0.0:
        return 0.0
    return 2.0 * precision * recall / (precision + recall)


def oracle_crisp_bcubed(gold_labels, sys_labels) -> float:
    """Classic B-Cubed F1 per instance, averaged, via direct set scans."""
    n = len(gold_labels)
    total = 0.0
    for i in range(n):
        cluster = [j for j in range(n) if sys_labels[j] == sys_labels[i]]
        klass = [j for j in range(n) if gold_labels[j] == gold_labels[i]]
        correct_in_cluster = sum(1 for j in cluster if gold_labels[j] == gold_labels[i])
        correct_in_class = sum(1 for j in klass if sys_labels[j] == sys_labels[i])
        precision = correct_in_cluster / len(cluster)
        recall = correct_in_class / len(klass)
        if precision + recall > 0.0:
            total += 2.0 * precision * recall / (precision + recall)
    return total / n


def oracle_crisp_nmi(gold_labels, sys_labels) -> float:
    """Crisp NMI (max normalization) via explicit count tables."""
    n = len(gold_labels)
    gold_ids = sorted(set(gold_labels))
    sys_ids = sorted(set(sys_labels))
    counts = {(g, s): 0 for g in gold_ids for s in sys_ids}
    for g, s in zip(gold_labels, sys_labels):
        counts[(g, s)] += 1
    h_gold = 0.0
    for g in gold_ids:
        p = sum(counts[(g, s)] for s in sys_ids) / n
        if p > 0:
            h_gold -= p * math.log(p)
    h_sys = 0.0
    for s in sys_ids:
        p = sum(counts[(g, s)] for g in gold_ids) / n
        if p > 0:
            h_sys -= p * math.log(p)
    mi = 0.0
    for g in gold_ids:
        pg = sum(counts[(g, s)] for s in sys_ids) / n
        for s in sys_ids:
            ps = sum(counts[(g2, s)] for g2 in gold_ids) / n
            pj = counts[(g, s)] / n
            if pj > 0:
                mi += pj * math.log(pj / (pg * ps))
    denom = max(h_gold, h_sys)
    if denom == 0.0 or mi <= 0.0:
        return 0.0
    return min(mi / denom, 1.0)


def oracle_v_measure(gold_labels, sys_labels) -> float:
    """V-Measure by direct entropy summation (natural log)."""
    n = len(gold_labels)
    gold_ids = sorted(set(gold_labels))
    sys_ids = sorted(set(sys_labels))

    def h_cond(outer_labels, inner_labels, outer_ids, inner_ids):
        # H(inner | outer)
        total = 0.0
        for o in outer_ids:
            members = [i for i in range(n) if outer_labels[i] == o]
            for c in inner_ids:
                joint = sum(1 for i in members if inner_labels[i] == c)
                if joint > 0:
                    total -= (joint / n) * math.log(joint / len(members))
        return total

    def entropy(labels, ids):
        total = 0.0
        for v in ids:
            p = sum(1 for x in labels if x == v) / n
            if p > 0:
                total -= p * math.log(p)
        return total

    h_class = entropy(gold_labels, gold_ids)
    h_cluster = entropy(sys_labels, sys_ids)
    homogeneity = 1.0 if h_class == 0.0 else 1.0 - h_cond(sys_labels, gold_labels, sys_ids, gold_ids) / h_class
    completeness = 1.0 if h_cluster == 0.0 else 1.0 - h_cond(gold_labels, sys_labels, gold_ids, sys_ids) / h_cluster
    if homogeneity + completeness == 0.0:
        return 0.0
    return 2.0 * homogeneity * completeness / (homogeneity + completeness)


# ---------------------------------------------------------------------------
# Synthetic data generation
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SynthSpec:
    """Recipe for one synthetic target word with known sense structure."""

    dim: int
    senses: int
    instances_per_sense: int
    cluster_spread: float  # within-sense Gaussian sigma
    paraphrase_jitter: float  # pair-noise sigma, strictly below cluster_spread
    separation: float  # minimum Euclidean distance between sense centroids
    seed: int
    lemma: str = "synth"
    pos: str = "n"
    layer: int = 0

    def __post_init__(self):
        if self.dim < 1 or self.senses < 1 or self.instances_per_sense < 1:
            raise GenerationError("dim, senses and instances_per_sense must be >= 1")
        if not (0.0 <= self.paraphrase_jitter < self.cluster_spread < self.separation):
            raise GenerationError(
                "need paraphrase_jitter < cluster_spread < separation, got "
                f"{self.paraphrase_jitter}, {self.cluster_spread}, {self.separation}"
            )


_CENTROID_RETRY_BUDGET = 10_000


def _sample_centroids(spec: SynthSpec, rng: np.random.Generator) -> np.ndarray:
    cents: list[np.ndarray] = []
    for _ in range(_CENTROID_RETRY_BUDGET):
        if len(cents) == spec.senses:
            break
        v = rng.normal(size=spec.dim)
        norm = np.linalg.norm(v)
        if norm == 0.0:
            continue
        v = v / norm
        if all(np.linalg.norm(v - c) >= spec.separation for c in cents):
            cents.append(v)
    if len(cents) < spec.senses:
        raise GenerationError(
            f"could not place {spec.senses} centroids with separation "
            f"{spec.separation} in dim {spec.dim} within {_CENTROID_RETRY_BUDGET} draws"
        )
    return np.stack(cents)


def generate(spec: SynthSpec) -> tuple[VectorPairSet, VectorPairSet, SenseKey]:
    """Sample one synthetic word: (train set, test set, gold key over test).

    Each instance is a Gaussian draw around its sense centroid; its
    paraphrase vector adds smaller isotropic jitter on top. The split is
    stratified so every sense keeps test instances (gold covers the test
    split, which is what the pipeline scores against).
    """
    rng = rng_for(spec.seed, spec.lemma, spec.pos, 0)
    cents = _sample_centroids(spec, rng)
    train_pairs: list[VectorPair] = []
    test_pairs: list[VectorPair] = []
    gold_records = []
    counter = 0
    sense_of_x: list[tuple[np.ndarray, int]] = []
    for s in range(spec.senses):
        n_s = spec.instances_per_sense
        xs = cents[s] + spec.cluster_spread * rng.normal(size=(n_s, spec.dim))
        xps = xs + spec.paraphrase_jitter * rng.normal(size=(n_s, spec.dim))
        n_test = max(1, int(math.floor(0.2 * n_s + 0.5))) if n_s >= 2 else 1
        test_idx = set(rng.permutation(n_s)[:n_test].tolist())
        for i in range(n_s):
            rid = InstanceId(spec.lemma, spec.pos, f"i{counter}")
            counter += 1
            pair = VectorPair(rid, xs[i], xps[i])
            sense_of_x.append((xs[i], s))
            if i in test_idx:
                test_pairs.append(pair)
                gold_records.append((rid, [(f"{spec.lemma}.{spec.pos}.sense{s}", 1.0)]))
            else:
                train_pairs.append(pair)
    if not train_pairs:
        raise GenerationError("spec leaves the train split empty; increase instances_per_sense")
    train = VectorPairSet(spec.lemma, spec.pos, spec.layer, spec.dim, "train", train_pairs)
    test = VectorPairSet(spec.lemma, spec.pos, spec.layer, spec.dim, "test", test_pairs)
    gold = SenseKey(gold_records)
    gold.validate()
    _assert_fixture_quality(sense_of_x, spec)
    return train, test, gold


def _assert_fixture_quality(sense_of_x, spec: SynthSpec):
    """Within-sense cosine distances must average below between-sense ones."""
    if spec.senses < 2:
        return
    xs = np.stack([x for x, _ in sense_of_x])
    senses = np.array([s for _, s in sense_of_x])
    norms = np.linalg.norm(xs, axis=1)
    unit = xs / np.where(norms == 0, 1.0, norms)[:, None]
    dist = 1.0 - unit @ unit.T
    same = senses[:, None] == senses[None, :]
    off_diag = ~np.eye(len(senses), dtype=bool)
    within = dist[same & off_diag]
    between = dist[~same]
    if within.size and between.size and within.mean() >= between.mean():
        raise GenerationError(
            f"fixture degenerate: within-sense mean cosine distance {within.mean():.4f} "
            f">= between-sense {between.mean():.4f}; widen separation or lower spread"
        )
