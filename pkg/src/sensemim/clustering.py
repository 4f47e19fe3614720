"""Agglomerative sense clustering: cosine distance, average linkage, grading.

The merge loop itself lives in :mod:`sensemim.accel`; this module owns the
distance geometry, the dendrogram bookkeeping, cluster cutting, centroid
computation and the softmax grading of instances against centroids.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import accel

# Average linkage is monotone in exact arithmetic; Lance-Williams rounding
# can dip a height below its predecessor by a few ulps, nothing more.
_MONOTONE_SLACK = 1e-9


class LinkageMonotonicityError(RuntimeError):
    """Merge heights decreased beyond float tolerance; indicates a bug."""


def cosine_distance_matrix(vectors: np.ndarray) -> np.ndarray:
    """Pairwise dissimilarity 1 - cos(a, b), with diagonal forced to 0.

    A zero vector has cosine similarity 0 to everything by convention
    (distance 1), keeping the function total when ReLU embeddings go dark.
    """
    x = np.asarray(vectors, dtype=np.float64)
    if x.ndim != 2 or x.shape[0] == 0:
        raise ValueError(f"expected a non-empty (n, m) matrix, got shape {x.shape}")
    norms = np.linalg.norm(x, axis=1)
    zero = norms == 0.0
    safe = np.where(zero, 1.0, norms)
    unit = x / safe[:, None]
    sim = unit @ unit.T
    sim[zero, :] = 0.0
    sim[:, zero] = 0.0
    dist = 1.0 - sim
    np.clip(dist, 0.0, 2.0, out=dist)
    np.fill_diagonal(dist, 0.0)
    return dist


@dataclass
class Dendrogram:
    """Full merge history of an average-linkage clustering.

    ``slot_merges[t] = (i, j)`` says the clusters whose minimum leaf indices
    are i and j (i < j) merged at step t; node ids follow the usual
    convention of leaves 0..n-1 and merge t producing node n+t.
    """

    n_leaves: int
    slot_merges: np.ndarray  # (n-1, 2) int64
    heights: np.ndarray  # (n-1,) float64
    sizes: np.ndarray  # (n-1,) int64 merged-cluster sizes

    def __post_init__(self):
        n = self.n_leaves
        if self.slot_merges.shape != (n - 1, 2) or self.heights.shape != (n - 1,):
            raise ValueError("merge arrays inconsistent with leaf count")
        drop = np.diff(self.heights) < -_MONOTONE_SLACK if n > 2 else np.array([])
        if np.any(drop):
            t = int(np.argmax(drop))
            raise LinkageMonotonicityError(
                f"merge height decreased at step {t + 1}: "
                f"{self.heights[t]} -> {self.heights[t + 1]}"
            )

    def merges(self) -> list[tuple[int, int, float]]:
        """(left node id, right node id, height) per merge step."""
        ids = list(range(self.n_leaves))
        out = []
        for t, (i, j) in enumerate(self.slot_merges):
            out.append((ids[i], ids[j], float(self.heights[t])))
            ids[i] = self.n_leaves + t
        return out

    def cut(self, k: int) -> np.ndarray:
        """Labels for the k-cluster partition, numbered by first-seen leaf."""
        n = self.n_leaves
        if not 1 <= k <= n:
            raise ValueError(f"k must be in [1, {n}], got {k}")
        comp = np.arange(n)
        for t in range(n - k):
            i, j = self.slot_merges[t]
            comp[comp == j] = i
        return _relabel_first_seen(comp)


def _relabel_first_seen(comp: np.ndarray) -> np.ndarray:
    labels = np.empty(comp.shape[0], dtype=np.int64)
    mapping: dict[int, int] = {}
    for idx, c in enumerate(comp):
        c = int(c)
        if c not in mapping:
            mapping[c] = len(mapping)
        labels[idx] = mapping[c]
    return labels


def build_dendrogram(vectors: np.ndarray) -> Dendrogram:
    """Complete average-linkage dendrogram over cosine distances."""
    dist = cosine_distance_matrix(vectors)
    mi, mj, mh, msz = accel.upgma_merge_sequence(dist)
    return Dendrogram(dist.shape[0], np.stack([mi, mj], axis=1), mh, msz)


def agglomerative(vectors: np.ndarray, k: int) -> np.ndarray:
    """Cluster rows of ``vectors`` into k groups.

    Ties on merge distance resolve to the lexicographically smallest pair of
    cluster indices (indexed by minimum leaf), so results are deterministic.
    Labels are invariant under global positive scaling of the input.
    """
    x = np.asarray(vectors, dtype=np.float64)
    if x.ndim != 2 or x.shape[0] == 0:
        raise ValueError(f"expected a non-empty (n, m) matrix, got shape {x.shape}")
    n = x.shape[0]
    if not 1 <= k <= n:
        raise ValueError(f"k must be in [1, {n}], got {k}")
    if n == 1:
        return np.zeros(1, dtype=np.int64)
    return build_dendrogram(x).cut(k)


def centroids(vectors: np.ndarray, labels: np.ndarray) -> np.ndarray:
    """Arithmetic-mean centroid per cluster, shape (k, m)."""
    x = np.asarray(vectors, dtype=np.float64)
    labels = np.asarray(labels)
    if labels.shape[0] != x.shape[0]:
        raise ValueError("labels and vectors disagree in length")
    k = int(labels.max()) + 1 if labels.size else 0
    used = set(int(v) for v in labels)
    if used != set(range(k)):
        raise ValueError(f"labels must cover [0, {k}) without gaps")
    out = np.empty((k, x.shape[1]))
    for c in range(k):
        out[c] = x[labels == c].mean(axis=0)
    return out


def grade(vectors: np.ndarray, cents: np.ndarray) -> np.ndarray:
    """Softmax over cosine similarities to each centroid, shape (n, k).

    Rows sum to 1. The argmax of a row is not guaranteed to match the
    agglomerative label of that instance; callers needing that property
    apply :func:`align_grades_to_labels`.
    """
    x = np.asarray(vectors, dtype=np.float64)
    c = np.asarray(cents, dtype=np.float64)
    if c.ndim != 2 or c.shape[0] < 1:
        raise ValueError("need at least one centroid")
    xn = np.linalg.norm(x, axis=1)
    cn = np.linalg.norm(c, axis=1)
    sim = (x @ c.T) / (np.where(xn == 0, 1.0, xn)[:, None] * np.where(cn == 0, 1.0, cn)[None, :])
    sim[xn == 0, :] = 0.0
    sim[:, cn == 0] = 0.0
    shifted = sim - sim.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=1, keepdims=True)


def align_grades_to_labels(labels: np.ndarray, grades: np.ndarray) -> np.ndarray:
    """Permute each grade row so its argmax lands on the crisp label.

    Swapping the label's weight with the row maximum preserves the
    distribution as a multiset. Exact ties get a 1e-9 weight transfer so the
    argmax is strict; row sums stay within validation tolerance.
    """
    labels = np.asarray(labels)
    out = np.array(grades, dtype=np.float64, copy=True)
    for i in range(out.shape[0]):
        lab = int(labels[i])
        top = int(np.argmax(out[i]))
        if top != lab:
            out[i, lab], out[i, top] = out[i, top], out[i, lab]
            top = int(np.argmax(out[i]))
        if top != lab:  # exact tie survived the swap
            eps = min(1e-9, out[i, top] / 2)
            out[i, top] -= eps
            out[i, lab] += eps
    return out
