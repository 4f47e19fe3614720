"""Loop-heavy kernels with numba-compiled and pure-numpy implementations.

Both implementations of each kernel perform the same IEEE-754 elementwise
arithmetic in the same order wherever results feed determinism contracts
(the merge sequence of the clustering kernel is bit-identical across paths).
Setting the environment variable ``SENSEMIM_NO_NUMBA`` to a non-empty value
before import forces the numpy path; the module attribute ``USE_NUMBA`` can
be flipped at runtime for benchmarking.
"""

from __future__ import annotations

import os

import numpy as np

try:
    from numba import njit

    HAS_NUMBA = True
except ImportError:  # pragma: no cover - environment without numba
    HAS_NUMBA = False

    def njit(*args, **kwargs):
        def wrap(fn):
            return fn

        if args and callable(args[0]):
            return args[0]
        return wrap


USE_NUMBA = HAS_NUMBA and not os.environ.get("SENSEMIM_NO_NUMBA")


def active_path() -> str:
    """Name of the kernel path the next call will take."""
    return "numba" if (USE_NUMBA and HAS_NUMBA) else "numpy"


# ---------------------------------------------------------------------------
# Average-linkage merge loop
# ---------------------------------------------------------------------------
#
# Clusters live in slots 0..n-1; a merge of slots (i, j), i < j, stores the
# union at slot i, so each slot index always equals the minimum leaf index of
# its cluster. Pair selection scans the upper triangle in row-major order
# with a strict '<', which makes ties resolve to the lowest (i, j) pair.


@njit(cache=True)
def _upgma_core_nb(d):  # pragma: no cover - exercised via dispatcher
    n = d.shape[0]
    active = np.ones(n, np.bool_)
    sizes = np.ones(n, np.int64)
    mi = np.empty(n - 1, np.int64)
    mj = np.empty(n - 1, np.int64)
    mh = np.empty(n - 1, np.float64)
    msz = np.empty(n - 1, np.int64)
    for t in range(n - 1):
        best = np.inf
        bi = -1
        bj = -1
        for i in range(n):
            if not active[i]:
                continue
            for j in range(i + 1, n):
                if active[j] and d[i, j] < best:
                    best = d[i, j]
                    bi = i
                    bj = j
        fni = float(sizes[bi])
        fnj = float(sizes[bj])
        tot = fni + fnj
        for k in range(n):
            if active[k] and k != bi and k != bj:
                dk = (fni * d[bi, k] + fnj * d[bj, k]) / tot
                d[bi, k] = dk
                d[k, bi] = dk
        active[bj] = False
        sizes[bi] = sizes[bi] + sizes[bj]
        mi[t] = bi
        mj[t] = bj
        mh[t] = best
        msz[t] = sizes[bi]
    return mi, mj, mh, msz


def _upgma_core_np(d):
    n = d.shape[0]
    active = np.ones(n, dtype=bool)
    sizes = np.ones(n, dtype=np.int64)
    mi = np.empty(n - 1, dtype=np.int64)
    mj = np.empty(n - 1, dtype=np.int64)
    mh = np.empty(n - 1, dtype=np.float64)
    msz = np.empty(n - 1, dtype=np.int64)
    upper = np.triu(np.ones((n, n), dtype=bool), 1)
    for t in range(n - 1):
        visible = upper & active[:, None] & active[None, :]
        masked = np.where(visible, d, np.inf)
        flat = int(np.argmin(masked))  # first minimum in row-major order
        bi, bj = divmod(flat, n)
        best = d[bi, bj]
        sel = active.copy()
        sel[bi] = False
        sel[bj] = False
        fni = float(sizes[bi])
        fnj = float(sizes[bj])
        dk = (fni * d[bi, sel] + fnj * d[bj, sel]) / (fni + fnj)
        d[bi, sel] = dk
        d[sel, bi] = dk
        active[bj] = False
        sizes[bi] += sizes[bj]
        mi[t] = bi
        mj[t] = bj
        mh[t] = best
        msz[t] = sizes[bi]
    return mi, mj, mh, msz


def upgma_merge_sequence(dist: np.ndarray):
    """Run the full average-linkage merge loop on a distance matrix.

    Parameters
    ----------
    dist : (n, n) ndarray
        Symmetric dissimilarity matrix; only the upper triangle is read.

    Returns
    -------
    (mi, mj, mh, msz) : tuple of ndarrays, each of length n-1
        Slot pair merged at each step (mi < mj), the merge height, and the
        size of the merged cluster. Slot indices equal minimum leaf indices.
    """
    work = np.array(dist, dtype=np.float64, copy=True)
    if work.ndim != 2 or work.shape[0] != work.shape[1]:
        raise ValueError(f"distance matrix must be square, got shape {work.shape}")
    if USE_NUMBA and HAS_NUMBA:
        return _upgma_core_nb(work)
    return _upgma_core_np(work)


# ---------------------------------------------------------------------------
# Fuzzy B-Cubed pair sums
# ---------------------------------------------------------------------------


@njit(cache=True)
def _bcubed_sums_nb(wg, ws):  # pragma: no cover - exercised via dispatcher
    n = wg.shape[0]
    sg = wg.shape[1]
    sc = ws.shape[1]
    out_min = np.zeros(n, np.float64)
    out_k = np.zeros(n, np.float64)
    out_g = np.zeros(n, np.float64)
    for i in range(n):
        acc_min = 0.0
        acc_k = 0.0
        acc_g = 0.0
        for j in range(n):
            g = 0.0
            for s in range(sg):
                a = wg[i, s]
                b = wg[j, s]
                g += a if a < b else b
            k = 0.0
            for s in range(sc):
                a = ws[i, s]
                b = ws[j, s]
                k += a if a < b else b
            acc_min += g if g < k else k
            acc_k += k
            acc_g += g
        out_min[i] = acc_min
        out_k[i] = acc_k
        out_g[i] = acc_g
    return out_min, out_k, out_g


def _bcubed_sums_np(wg, ws):
    n = wg.shape[0]
    out_min = np.zeros(n)
    out_k = np.zeros(n)
    out_g = np.zeros(n)
    for i in range(n):
        g = np.minimum(wg[i], wg).sum(axis=1)
        k = np.minimum(ws[i], ws).sum(axis=1)
        out_min[i] = np.minimum(g, k).sum()
        out_k[i] = k.sum()
        out_g[i] = g.sum()
    return out_min, out_k, out_g


def bcubed_pair_sums(w_gold: np.ndarray, w_sys: np.ndarray):
    """Per-instance pair-agreement sums for fuzzy B-Cubed.

    For each instance i, over all j (including j = i), with gold agreement
    g(i,j) and system agreement k(i,j) defined as summed min weights:
    returns (sum_j min(g, k), sum_j k, sum_j g).

    The two paths may differ by float summation order; callers treat results
    as equal within 1e-12.
    """
    wg = np.ascontiguousarray(w_gold, dtype=np.float64)
    ws = np.ascontiguousarray(w_sys, dtype=np.float64)
    if wg.ndim != 2 or ws.ndim != 2 or wg.shape[0] != ws.shape[0]:
        raise ValueError(f"weight matrices disagree: {wg.shape} vs {ws.shape}")
    if USE_NUMBA and HAS_NUMBA:
        return _bcubed_sums_nb(wg, ws)
    return _bcubed_sums_np(wg, ws)


# ---------------------------------------------------------------------------
# Grid-cell occupancy
# ---------------------------------------------------------------------------


@njit(cache=True)
def _count_distinct_nb(codes):  # pragma: no cover - exercised via dispatcher
    m = codes.shape[0]
    if m == 0:
        return 0
    s = np.sort(codes)
    count = 1
    for i in range(1, m):
        if s[i] != s[i - 1]:
            count += 1
    return count


def count_distinct(codes: np.ndarray) -> int:
    """Number of distinct int64 cell codes (occupied grid cells)."""
    codes = np.ascontiguousarray(codes, dtype=np.int64)
    if USE_NUMBA and HAS_NUMBA:
        return int(_count_distinct_nb(codes))
    return int(np.unique(codes).size)
