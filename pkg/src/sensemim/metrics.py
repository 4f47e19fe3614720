"""Clustering evaluation metrics over sense keys.

Four scores are provided: V-Measure and paired F-Score for crisp keys,
fuzzy B-Cubed and fuzzy NMI for graded (or crisp) keys, plus the geometric
mean used to combine a pair of percent-scale scores and a token-level
perturbation percentage. Every clustering metric is computed per lemma.pos
group and macro-averaged with equal weight per group.

Gold instances missing from the system key are penalized by default: each
one is scored as if the system had put it in its own artificial singleton
cluster. Pass ``missing="drop"`` to restrict gold to the system's instances
instead. System instances absent from gold are always an error.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass

import numpy as np

from . import accel
from .datamodel import DataError, InstanceId, SenseKey

_MISSING_MODES = ("penalize", "drop")


class EvaluationError(DataError):
    """A metric precondition failed (mismatched keys, bad arguments)."""


# ---------------------------------------------------------------------------
# Key reconciliation


def reconcile_keys(gold: SenseKey, sys: SenseKey, missing: str = "penalize") -> tuple[SenseKey, SenseKey]:
    """Return (gold', sys') with identical instance sets.

    missing="penalize": gold instances absent from sys are appended to sys
    as singleton artificial senses, so every metric scores them as isolated
    clusters. missing="drop": gold is restricted to sys's instances.
    """
    if missing not in _MISSING_MODES:
        raise EvaluationError(f"unknown missing-instance mode {missing!r}; expected one of {_MISSING_MODES}")
    gold_ids = set(gold.ids())
    sys_ids = set(sys.ids())
    extra = sys_ids - gold_ids
    if extra:
        name = sorted(i.token for i in extra)[0]
        raise EvaluationError(f"system key has {len(extra)} instance(s) not in gold, e.g. {name}")
    lost = gold_ids - sys_ids
    if not lost:
        return gold, sys
    if missing == "drop":
        kept = [(rid, a) for rid, a in gold.records if rid in sys_ids]
        if not kept:
            raise EvaluationError("no instances in common between gold and system keys")
        return SenseKey(kept), sys
    filler = [(rid, [(f"__missing__{rid.uid}", 1.0)]) for rid, _ in gold.records if rid in lost]
    return gold, SenseKey(list(sys.records) + filler)


def _aligned_groups(
    gold: SenseKey, sys: SenseKey, missing: str
) -> dict[str, tuple[list[InstanceId], list[list[tuple[str, float]]], list[list[tuple[str, float]]]]]:
    """Per group: ids in gold order plus aligned gold/sys assignment lists."""
    gold, sys = reconcile_keys(gold, sys, missing)
    sys_by_id = sys.by_id()
    out = {}
    for group, records in gold.groups().items():
        ids = [rid for rid, _ in records]
        out[group] = (ids, [a for _, a in records], [sys_by_id[rid] for rid in ids])
    return out


def _require_crisp(key: SenseKey, role: str):
    if not key.is_crisp():
        raise EvaluationError(f"{role} key must be crisp for this metric")


def _crisp_labels(assignments: list[list[tuple[str, float]]]) -> list[int]:
    order = {}
    labels = []
    for a in assignments:
        sense = a[0][0]
        if sense not in order:
            order[sense] = len(order)
        labels.append(order[sense])
    return labels


def _weight_matrix(assignments: list[list[tuple[str, float]]]) -> np.ndarray:
    senses = sorted({s for a in assignments for s, _ in a})
    col = {s: i for i, s in enumerate(senses)}
    w = np.zeros((len(assignments), len(senses)))
    for i, a in enumerate(assignments):
        for s, weight in a:
            w[i, col[s]] += weight
    return w


def _macro(by_group: dict[str, float]) -> float:
    return float(sum(by_group[g] for g in sorted(by_group)) / len(by_group))


# ---------------------------------------------------------------------------
# Contingency counts (crisp metrics)


@dataclass(frozen=True)
class ContingencyTable:
    """Class-by-cluster co-occurrence counts for one lemma.pos group."""

    counts: np.ndarray  # shape (classes, clusters), int64

    def __post_init__(self):
        c = np.asarray(self.counts)
        if c.ndim != 2 or c.size == 0:
            raise EvaluationError("contingency table must be a non-empty matrix")
        if (c < 0).any():
            raise EvaluationError("contingency counts must be non-negative")
        object.__setattr__(self, "counts", c.astype(np.int64))

    @classmethod
    def from_labels(cls, gold_labels: list[int], sys_labels: list[int]) -> "ContingencyTable":
        n_c = max(gold_labels) + 1
        n_k = max(sys_labels) + 1
        counts = np.zeros((n_c, n_k), dtype=np.int64)
        for g, s in zip(gold_labels, sys_labels):
            counts[g, s] += 1
        return cls(counts)

    @property
    def row_marginals(self) -> np.ndarray:
        return self.counts.sum(axis=1)

    @property
    def col_marginals(self) -> np.ndarray:
        return self.counts.sum(axis=0)

    @property
    def n(self) -> int:
        return int(self.counts.sum())


def _entropy(counts: np.ndarray, n: int) -> float:
    total = 0.0
    for c in counts:
        if c > 0:
            p = c / n
            total -= p * math.log(p)
    return total


def _v_measure_from_table(table: ContingencyTable) -> float:
    n = table.n
    rows = table.row_marginals
    cols = table.col_marginals
    h_class = _entropy(rows, n)
    h_cluster = _entropy(cols, n)

    h_class_given_cluster = 0.0
    h_cluster_given_class = 0.0
    for a in range(table.counts.shape[0]):
        for b in range(table.counts.shape[1]):
            c = table.counts[a, b]
            if c > 0:
                h_class_given_cluster -= (c / n) * math.log(c / cols[b])
                h_cluster_given_class -= (c / n) * math.log(c / rows[a])

    h = 1.0 if h_class == 0.0 else 1.0 - h_class_given_cluster / h_class
    c = 1.0 if h_cluster == 0.0 else 1.0 - h_cluster_given_class / h_cluster
    if h + c == 0.0:
        return 0.0
    return 2.0 * h * c / (h + c)


def _paired_f_from_table(table: ContingencyTable) -> float:
    def pairs(x) -> int:
        x = int(x)
        return x * (x - 1) // 2

    both = sum(pairs(c) for c in table.counts.flat)
    in_sys = sum(pairs(c) for c in table.col_marginals)
    in_gold = sum(pairs(c) for c in table.row_marginals)
    p = both / in_sys if in_sys > 0 else 0.0
    r = both / in_gold if in_gold > 0 else 0.0
    if p + r == 0.0:
        return 0.0
    return 2.0 * p * r / (p + r)


# ---------------------------------------------------------------------------
# Public metrics


def v_measure_by_group(gold: SenseKey, sys: SenseKey, missing: str = "penalize") -> dict[str, float]:
    _require_crisp(gold, "gold")
    _require_crisp(sys, "system")
    out = {}
    for group, (_, g_asn, s_asn) in _aligned_groups(gold, sys, missing).items():
        table = ContingencyTable.from_labels(_crisp_labels(g_asn), _crisp_labels(s_asn))
        out[group] = _v_measure_from_table(table)
    return out


def v_measure(gold: SenseKey, sys: SenseKey, missing: str = "penalize") -> float:
    """Macro-averaged V-Measure over lemma.pos groups, in [0, 1]."""
    return _macro(v_measure_by_group(gold, sys, missing))


def paired_f_score_by_group(gold: SenseKey, sys: SenseKey, missing: str = "penalize") -> dict[str, float]:
    _require_crisp(gold, "gold")
    _require_crisp(sys, "system")
    out = {}
    for group, (_, g_asn, s_asn) in _aligned_groups(gold, sys, missing).items():
        table = ContingencyTable.from_labels(_crisp_labels(g_asn), _crisp_labels(s_asn))
        out[group] = _paired_f_from_table(table)
    return out


def paired_f_score(gold: SenseKey, sys: SenseKey, missing: str = "penalize") -> float:
    """Macro-averaged paired F-Score over lemma.pos groups, in [0, 1]."""
    return _macro(paired_f_score_by_group(gold, sys, missing))


def fuzzy_bcubed_by_group(gold: SenseKey, sys: SenseKey, missing: str = "penalize") -> dict[str, float]:
    out = {}
    for group, (_, g_asn, s_asn) in _aligned_groups(gold, sys, missing).items():
        w_gold = _weight_matrix(g_asn)
        w_sys = _weight_matrix(s_asn)
        sum_min, sum_k, sum_g = accel.bcubed_pair_sums(w_gold, w_sys)
        # each self-pair agreement is 1 (weights sum to 1), so denominators >= 1
        precision = sum_min / sum_k
        recall = sum_min / sum_g
        denom = precision + recall
        safe = np.where(denom > 0.0, denom, 1.0)
        f1 = np.where(denom > 0.0, 2.0 * precision * recall / safe, 0.0)
        out[group] = float(f1.mean())
    return out


def fuzzy_bcubed(gold: SenseKey, sys: SenseKey, missing: str = "penalize") -> float:
    """Macro-averaged fuzzy B-Cubed F1 over lemma.pos groups, in [0, 1]."""
    return _macro(fuzzy_bcubed_by_group(gold, sys, missing))


def fuzzy_nmi_by_group(gold: SenseKey, sys: SenseKey, missing: str = "penalize") -> dict[str, float]:
    out = {}
    for group, (ids, g_asn, s_asn) in _aligned_groups(gold, sys, missing).items():
        w_gold = _weight_matrix(g_asn)
        w_sys = _weight_matrix(s_asn)
        joint = (w_gold.T @ w_sys) / len(ids)
        p_g = joint.sum(axis=1)
        p_s = joint.sum(axis=0)
        mi = 0.0
        for a in range(joint.shape[0]):
            for b in range(joint.shape[1]):
                if joint[a, b] > 0.0:
                    mi += joint[a, b] * math.log(joint[a, b] / (p_g[a] * p_s[b]))
        h_g = _soft_entropy(p_g)
        h_s = _soft_entropy(p_s)
        denom = max(h_g, h_s)
        if denom <= 0.0 or mi <= 0.0:
            out[group] = 0.0
        else:
            out[group] = float(min(mi / denom, 1.0))
    return out


def _soft_entropy(p: np.ndarray) -> float:
    total = 0.0
    for v in p:
        if v > 0.0:
            total -= v * math.log(v)
    return total


def fuzzy_nmi(gold: SenseKey, sys: SenseKey, missing: str = "penalize") -> float:
    """Macro-averaged fuzzy NMI (max normalization) over groups, in [0, 1]."""
    return _macro(fuzzy_nmi_by_group(gold, sys, missing))


def geometric_avg(a: float, b: float) -> float:
    """Geometric mean of two non-negative scores (any common scale)."""
    if a < 0.0 or b < 0.0:
        raise EvaluationError(f"geometric_avg needs non-negative inputs, got ({a}, {b})")
    return math.sqrt(a * b)


def perturbation_percentage(original_tokens: list[str], paraphrase_tokens: list[str]) -> float:
    """Percent of unigrams changed between a sentence and its paraphrase."""
    if not original_tokens:
        raise EvaluationError("original token list is empty")
    shared = sum((Counter(original_tokens) & Counter(paraphrase_tokens)).values())
    longest = max(len(original_tokens), len(paraphrase_tokens))
    return 100.0 * (1.0 - shared / longest)


# ---------------------------------------------------------------------------
# Score reports


def score_rows(gold: SenseKey, sys: SenseKey, graded: bool, missing: str = "penalize") -> list[tuple[str, str, float]]:
    """(metric, group, percent) rows plus ALL aggregates, fixed order.

    Crisp keys are scored with V-Measure and paired F-Score, graded keys
    with fuzzy B-Cubed and fuzzy NMI; AVG is the geometric mean of the two
    aggregate scores. Groups are sorted; metric order is fixed.
    """
    if graded:
        per_metric = [("F-BC", fuzzy_bcubed_by_group), ("F-NMI", fuzzy_nmi_by_group)]
    else:
        per_metric = [("V-MEASURE", v_measure_by_group), ("PAIRED-F", paired_f_score_by_group)]
    rows = []
    aggregates = []
    for name, fn in per_metric:
        by_group = fn(gold, sys, missing)
        for group in sorted(by_group):
            rows.append((name, group, 100.0 * by_group[group]))
        aggregates.append(100.0 * _macro(by_group))
    for (name, _), value in zip(per_metric, aggregates):
        rows.append((name, "ALL", value))
    rows.append(("AVG", "ALL", geometric_avg(aggregates[0], aggregates[1])))
    return rows
