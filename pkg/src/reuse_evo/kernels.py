"""Hot numeric kernels.

Every kernel has a loop implementation compiled with numba and a numpy path
used when numba is disabled (see ``_accel``). Both are importable directly so
tests and the benchmark can compare them.
"""

import numpy as np

from ._accel import HAS_NUMBA, njit

_M1 = np.uint64(0x5555555555555555)
_M2 = np.uint64(0x3333333333333333)
_M4 = np.uint64(0x0F0F0F0F0F0F0F0F)
_H01 = np.uint64(0x0101010101010101)


def _popcount64(x):
    x = x - ((x >> np.uint64(1)) & _M1)
    x = (x & _M2) + ((x >> np.uint64(2)) & _M2)
    x = (x + (x >> np.uint64(4))) & _M4
    return (x * _H01) >> np.uint64(56)


_popcount64_jit = njit(_popcount64)


# ---------------------------------------------------------------------------
# Tanimoto distance matrix


def _tanimoto_matrix_loops(fps):
    n = fps.shape[0]
    out = np.zeros((n, n))
    for i in range(n):
        for j in range(i + 1, n):
            union = _popcount64_jit(fps[i] | fps[j])
            if union == 0:
                d = 0.0
            else:
                d = 1.0 - float(_popcount64_jit(fps[i] & fps[j])) / float(union)
            out[i, j] = d
            out[j, i] = d
    return out


def tanimoto_matrix_numpy(fps):
    fps = np.asarray(fps, dtype=np.uint64)
    inter = np.bitwise_count(fps[:, None] & fps[None, :]).astype(np.float64)
    union = np.bitwise_count(fps[:, None] | fps[None, :]).astype(np.float64)
    with np.errstate(invalid="ignore", divide="ignore"):
        out = np.where(union > 0, 1.0 - inter / union, 0.0)
    np.fill_diagonal(out, 0.0)
    return out


tanimoto_matrix_numba = njit(_tanimoto_matrix_loops)


def tanimoto_matrix(fps):
    """Pairwise Tanimoto distances of 64-bit fingerprints; empty-vs-empty is 0."""
    fps = np.ascontiguousarray(fps, dtype=np.uint64)
    if HAS_NUMBA:
        return tanimoto_matrix_numba(fps)
    return tanimoto_matrix_numpy(fps)


# ---------------------------------------------------------------------------
# Nearest-other distance (diversity term)


def _min_offdiag_loops(dist):
    n = dist.shape[0]
    out = np.zeros(n)
    if n < 2:
        return out
    for i in range(n):
        best = np.inf
        for j in range(n):
            if j != i and dist[i, j] < best:
                best = dist[i, j]
        out[i] = best
    return out


def min_offdiag_numpy(dist):
    dist = np.asarray(dist, dtype=np.float64)
    n = dist.shape[0]
    if n < 2:
        return np.zeros(n)
    masked = dist + np.diag(np.full(n, np.inf))
    return masked.min(axis=1)


min_offdiag_numba = njit(_min_offdiag_loops)


def min_offdiag(dist):
    """Row-wise minimum excluding the diagonal; zeros for a single row."""
    dist = np.ascontiguousarray(dist, dtype=np.float64)
    if HAS_NUMBA:
        return min_offdiag_numba(dist)
    return min_offdiag_numpy(dist)


# ---------------------------------------------------------------------------
# Exact diverse subset search (branch and bound)


def _ids_less(chosen, ids, best_sorted):
    n = chosen.shape[0]
    cur = np.empty(n, dtype=np.int64)
    for q in range(n):
        cur[q] = ids[chosen[q]]
    cur.sort()
    for q in range(n):
        if cur[q] < best_sorted[q]:
            return True
        if cur[q] > best_sorted[q]:
            return False
    return False


_ids_less_jit = njit(_ids_less)


def _best_subset_loops(values, dist, tau, n, ids, c_div, dmax):
    # values sorted descending; returns (indices, objective)
    m = values.shape[0]
    best = np.full(n, -1, dtype=np.int64)
    best_sorted = np.zeros(n, dtype=np.int64)
    best_val = -np.inf
    if n < 1 or m < n:
        return best, best_val
    cs = np.zeros(m + 1)
    for i in range(m):
        cs[i + 1] = cs[i] + values[i]
    chosen = np.full(n, -1, dtype=np.int64)
    pv = np.zeros(n + 1)
    pd = np.zeros(n + 1)
    depth = 0
    while depth >= 0:
        chosen[depth] += 1
        i = chosen[depth]
        if i > m - (n - depth):
            depth -= 1
            continue
        ok = True
        add = 0.0
        for q in range(depth):
            d = dist[chosen[q], i]
            if d < tau:
                ok = False
                break
            add += d
        if not ok:
            continue
        v = pv[depth] + values[i]
        dd = pd[depth] + add
        k = depth + 1
        rem = n - k
        if rem == 0:
            val = v / n + c_div * dd
            take = val > best_val
            if not take and val == best_val:
                take = _ids_less_jit(chosen, ids, best_sorted)
            if take:
                best_val = val
                for q in range(n):
                    best[q] = chosen[q]
                    best_sorted[q] = ids[chosen[q]]
                best_sorted.sort()
            continue
        bound = (v + cs[i + 1 + rem] - cs[i + 1]) / n + c_div * (
            dd + (rem * k + rem * (rem - 1) / 2.0) * dmax
        )
        if bound < best_val - 1e-12 * (1.0 + abs(best_val)):
            continue
        pv[k] = v
        pd[k] = dd
        chosen[k] = i
        depth = k
    return best, best_val


best_subset_numba = njit(_best_subset_loops)
best_subset_python = _best_subset_loops


def best_subset(values, dist, tau, n, ids, c_div, dmax=1.0):
    """Maximise ``mean(values[S]) + c_div * sum_{i<j in S} dist[i, j]`` over
    ``n``-subsets whose pairwise distances are all ``>= tau``.

    ``values`` must be sorted in descending order (the bound relies on it).
    Equal objectives resolve to the smallest sorted ``ids`` tuple. Returns the
    chosen row indices (``-1`` filled when no admissible subset exists) and the
    objective value (``-inf`` in that case).
    """
    values = np.ascontiguousarray(values, dtype=np.float64)
    dist = np.ascontiguousarray(dist, dtype=np.float64)
    ids = np.ascontiguousarray(ids, dtype=np.int64)
    fn = best_subset_numba if HAS_NUMBA else best_subset_python
    idx, val = fn(values, dist, float(tau), int(n), ids, float(c_div), float(dmax))
    return idx, float(val)


def _has_clique_loops(compat, n):
    m = compat.shape[0]
    if n < 1:
        return True
    if m < n:
        return False
    chosen = np.full(n, -1, dtype=np.int64)
    depth = 0
    while depth >= 0:
        chosen[depth] += 1
        i = chosen[depth]
        if i > m - (n - depth):
            depth -= 1
            continue
        ok = True
        for q in range(depth):
            if not compat[chosen[q], i]:
                ok = False
                break
        if not ok:
            continue
        if depth + 1 == n:
            return True
        chosen[depth + 1] = i
        depth += 1
    return False


has_clique_numba = njit(_has_clique_loops)
has_clique_python = _has_clique_loops


def has_clique(compat, n):
    """True iff the boolean adjacency matrix contains an ``n``-clique."""
    compat = np.ascontiguousarray(compat, dtype=np.bool_)
    fn = has_clique_numba if HAS_NUMBA else has_clique_python
    return bool(fn(compat, int(n)))


# ---------------------------------------------------------------------------
# k nearest neighbours (local consistency)


def _knn_loops(points, k):
    n = points.shape[0]
    out = np.empty((n, k), dtype=np.int64)
    d2 = np.empty(n)
    for i in range(n):
        for j in range(n):
            s = 0.0
            for c in range(points.shape[1]):
                diff = points[i, c] - points[j, c]
                s += diff * diff
            d2[j] = s
        d2[i] = np.inf
        order = np.argsort(d2, kind="mergesort")
        for q in range(k):
            out[i, q] = order[q]
    return out


def knn_numpy(points, k):
    points = np.asarray(points, dtype=np.float64)
    diff = points[:, None, :] - points[None, :, :]
    d2 = np.einsum("ijk,ijk->ij", diff, diff)
    np.fill_diagonal(d2, np.inf)
    return np.argsort(d2, axis=1, kind="stable")[:, :k].astype(np.int64)


knn_numba = njit(_knn_loops)


def knn(points, k):
    """Indices of the ``k`` nearest other rows (Euclidean); ties go to the lower index."""
    points = np.ascontiguousarray(points, dtype=np.float64)
    if HAS_NUMBA:
        return knn_numba(points, int(k))
    return knn_numpy(points, int(k))
