"""Hot numeric kernels, each in a numba and a pure-numpy variant.

The active variant is chosen at import time by :mod:`finvuln._accel`
(env flag ``FINVULN_DISABLE_NUMBA``).  Within one variant all results
are deterministic; across variants, integer-count kernels agree exactly
and float kernels agree to accumulation order (sequential in both).

Kernels here are the profiled inner loops: end-of-day balance
expansion, decision-tree split search, pairwise distances, and the
t-SNE gradient.  See benchmarks/bench_kernels.py for a comparison.
"""

from __future__ import annotations

import numpy as np

from ._accel import HAVE_NUMBA, njit, prange

NO_SPLIT = -1


# ---------------------------------------------------------------------------
# End-of-day balance expansion

def _eod_expand_np(days: np.ndarray, balances: np.ndarray) -> np.ndarray:
    """Balance at the end of each day from first to last transaction day.

    ``days`` is sorted ascending; the day's last transaction wins and
    days without transactions inherit the previous end-of-day balance.
    """
    first = int(days[0])
    last = int(days[-1])
    n_days = last - first + 1
    # last index per distinct day
    uniq, idx = np.unique(days, return_index=True)
    last_idx = np.append(idx[1:], len(days)) - 1
    day_bal = balances[last_idx]
    runs = np.diff(np.append(uniq, last + 1))
    return np.repeat(day_bal, runs)


@njit(cache=True)
def _eod_expand_nb(days, balances):  # pragma: no cover - exercised via dispatch
    first = days[0]
    out = np.empty(days[-1] - first + 1, dtype=np.int64)
    nxt = 0  # next unfilled slot
    for i in range(len(days)):
        d = days[i] - first
        while nxt < d:  # gap days inherit the previous end-of-day balance
            out[nxt] = out[nxt - 1]
            nxt += 1
        out[d] = balances[i]
        if nxt == d:
            nxt = d + 1
    return out


# ---------------------------------------------------------------------------
# Decision-tree split search (binary classification, gini)

def _best_split_cls_np(Xn: np.ndarray, y: np.ndarray, min_leaf: int):
    n, f = Xn.shape
    total_pos = int(y.sum())
    if total_pos == 0 or total_pos == n or n < 2 * min_leaf:
        return NO_SPLIT, 0.0, 0.0
    p = total_pos / n
    parent = 1.0 - p * p - (1.0 - p) * (1.0 - p)
    order = np.argsort(Xn, axis=0)
    xs = np.take_along_axis(Xn, order, axis=0)
    ys = y[order].astype(np.float64)
    cum_pos = np.cumsum(ys, axis=0)[:-1]  # positives in the left block of size i+1
    nl = np.arange(1, n, dtype=np.float64)[:, None]
    nr = n - nl
    pl = cum_pos / nl
    pr = (total_pos - cum_pos) / nr
    gl = 1.0 - pl * pl - (1.0 - pl) * (1.0 - pl)
    gr = 1.0 - pr * pr - (1.0 - pr) * (1.0 - pr)
    gain = parent - (nl * gl + nr * gr) / n
    valid = (xs[:-1] < xs[1:]) & (nl >= min_leaf) & (nr >= min_leaf)
    gain = np.where(valid, gain, -1.0)
    flat = gain.T.reshape(-1)  # feature-major: ties resolve to lowest feature, lowest threshold
    best = int(np.argmax(flat))
    best_gain = float(flat[best])
    if best_gain <= 0.0:
        return NO_SPLIT, 0.0, 0.0
    fbest, i = divmod(best, n - 1)
    lo = xs[i, fbest]
    hi = xs[i + 1, fbest]
    thr = lo + (hi - lo) / 2.0
    if thr >= hi:
        thr = lo
    return int(fbest), float(thr), best_gain


@njit(cache=True)
def _best_split_cls_nb(Xn, y, min_leaf):  # pragma: no cover
    n, f = Xn.shape
    total_pos = 0
    for i in range(n):
        total_pos += y[i]
    if total_pos == 0 or total_pos == n or n < 2 * min_leaf:
        return NO_SPLIT, 0.0, 0.0
    p = total_pos / n
    parent = 1.0 - p * p - (1.0 - p) * (1.0 - p)
    best_gain = 0.0
    best_f = NO_SPLIT
    best_thr = 0.0
    for j in range(f):
        col = Xn[:, j].copy()
        order = np.argsort(col)
        cum_pos = 0.0
        for i in range(1, n):
            cum_pos += y[order[i - 1]]
            lo = col[order[i - 1]]
            hi = col[order[i]]
            if lo == hi:
                continue
            if i < min_leaf or n - i < min_leaf:
                continue
            nl = float(i)
            nr = float(n - i)
            pl = cum_pos / nl
            pr = (total_pos - cum_pos) / nr
            gl = 1.0 - pl * pl - (1.0 - pl) * (1.0 - pl)
            gr = 1.0 - pr * pr - (1.0 - pr) * (1.0 - pr)
            gain = parent - (nl * gl + nr * gr) / n
            if gain > best_gain:
                thr = lo + (hi - lo) / 2.0
                if thr >= hi:
                    thr = lo
                best_gain = gain
                best_f = j
                best_thr = thr
    if best_f == NO_SPLIT or best_gain <= 0.0:
        return NO_SPLIT, 0.0, 0.0
    return best_f, best_thr, best_gain


# ---------------------------------------------------------------------------
# Decision-tree split search (regression on residuals, variance reduction)

def _best_split_reg_np(Xn: np.ndarray, r: np.ndarray, min_leaf: int):
    n, f = Xn.shape
    if n < 2 * min_leaf:
        return NO_SPLIT, 0.0, 0.0
    total = float(r.sum())
    total_sq = float((r * r).sum())
    parent = (total_sq - total * total / n) / n
    order = np.argsort(Xn, axis=0)
    xs = np.take_along_axis(Xn, order, axis=0)
    rs = r[order]
    cum = np.cumsum(rs, axis=0)[:-1]
    cum_sq = np.cumsum(rs * rs, axis=0)[:-1]
    nl = np.arange(1, n, dtype=np.float64)[:, None]
    nr = n - nl
    sse_l = cum_sq - cum * cum / nl
    sse_r = (total_sq - cum_sq) - (total - cum) * (total - cum) / nr
    gain = parent - (sse_l + sse_r) / n
    valid = (xs[:-1] < xs[1:]) & (nl >= min_leaf) & (nr >= min_leaf)
    gain = np.where(valid, gain, -1.0)
    flat = gain.T.reshape(-1)
    best = int(np.argmax(flat))
    best_gain = float(flat[best])
    if best_gain <= 1e-12:
        return NO_SPLIT, 0.0, 0.0
    fbest, i = divmod(best, n - 1)
    lo = xs[i, fbest]
    hi = xs[i + 1, fbest]
    thr = lo + (hi - lo) / 2.0
    if thr >= hi:
        thr = lo
    return int(fbest), float(thr), best_gain


@njit(cache=True)
def _best_split_reg_nb(Xn, r, min_leaf):  # pragma: no cover
    n, f = Xn.shape
    if n < 2 * min_leaf:
        return NO_SPLIT, 0.0, 0.0
    total = 0.0
    total_sq = 0.0
    for i in range(n):
        total += r[i]
        total_sq += r[i] * r[i]
    parent = (total_sq - total * total / n) / n
    best_gain = 1e-12
    best_f = NO_SPLIT
    best_thr = 0.0
    for j in range(f):
        col = Xn[:, j].copy()
        order = np.argsort(col)
        cum = 0.0
        cum_sq = 0.0
        for i in range(1, n):
            v = r[order[i - 1]]
            cum += v
            cum_sq += v * v
            lo = col[order[i - 1]]
            hi = col[order[i]]
            if lo == hi:
                continue
            if i < min_leaf or n - i < min_leaf:
                continue
            nl = float(i)
            nr = float(n - i)
            sse_l = cum_sq - cum * cum / nl
            sse_r = (total_sq - cum_sq) - (total - cum) * (total - cum) / nr
            gain = parent - (sse_l + sse_r) / n
            if gain > best_gain:
                thr = lo + (hi - lo) / 2.0
                if thr >= hi:
                    thr = lo
                best_gain = gain
                best_f = j
                best_thr = thr
    if best_f == NO_SPLIT:
        return NO_SPLIT, 0.0, 0.0
    return best_f, best_thr, best_gain


# ---------------------------------------------------------------------------
# Decision-tree traversal


def _tree_leaf_np(feature, threshold, left, right, X):
    n = X.shape[0]
    node = np.zeros(n, dtype=np.int64)
    active = np.flatnonzero(feature[node] >= 0)
    while len(active):
        cur = node[active]
        f = feature[cur]
        go_left = X[active, f] <= threshold[cur]
        node[active] = np.where(go_left, left[cur], right[cur])
        active = active[feature[node[active]] >= 0]
    return node


@njit(cache=True, parallel=True)
def _tree_leaf_nb(feature, threshold, left, right, X):  # pragma: no cover
    n = X.shape[0]
    out = np.empty(n, dtype=np.int64)
    for i in prange(n):
        node = 0
        while feature[node] >= 0:
            if X[i, feature[node]] <= threshold[node]:
                node = left[node]
            else:
                node = right[node]
        out[i] = node
    return out


# ---------------------------------------------------------------------------
# Pairwise squared euclidean distances

def _pairwise_sq_dists_np(A: np.ndarray, B: np.ndarray) -> np.ndarray:
    aa = (A * A).sum(axis=1)[:, None]
    bb = (B * B).sum(axis=1)[None, :]
    d = aa + bb - 2.0 * (A @ B.T)
    np.maximum(d, 0.0, out=d)
    return d


@njit(cache=True, parallel=True)
def _pairwise_sq_dists_nb(A, B):  # pragma: no cover
    n, d = A.shape
    m = B.shape[0]
    out = np.empty((n, m), dtype=np.float64)
    for i in prange(n):
        for j in range(m):
            s = 0.0
            for k in range(d):
                diff = A[i, k] - B[j, k]
                s += diff * diff
            out[i, j] = s
    return out


# ---------------------------------------------------------------------------
# t-SNE gradient (student-t kernel in the embedding)

def _tsne_grad_np(Y: np.ndarray, P: np.ndarray):
    D = _pairwise_sq_dists_np(Y, Y)
    num = 1.0 / (1.0 + D)
    np.fill_diagonal(num, 0.0)
    Z = num.sum()
    Q = np.maximum(num / Z, 1e-12)
    W = (P - Q) * num
    grad = 4.0 * (W.sum(axis=1)[:, None] * Y - W @ Y)
    mask = P > 0.0
    kl = float((P[mask] * np.log(P[mask] / Q[mask])).sum())
    return grad, kl


@njit(cache=True, parallel=True)
def _tsne_grad_nb(Y, P):  # pragma: no cover
    n = Y.shape[0]
    num = np.empty((n, n), dtype=np.float64)
    for i in prange(n):
        num[i, i] = 0.0
        for j in range(n):
            if i != j:
                dx = Y[i, 0] - Y[j, 0]
                dy = Y[i, 1] - Y[j, 1]
                num[i, j] = 1.0 / (1.0 + dx * dx + dy * dy)
    Z = 0.0
    for i in range(n):
        for j in range(n):
            Z += num[i, j]
    grad = np.zeros((n, 2), dtype=np.float64)
    kl_rows = np.zeros(n, dtype=np.float64)
    for i in prange(n):
        gx = 0.0
        gy = 0.0
        local_kl = 0.0
        for j in range(n):
            if i == j:
                continue
            q = num[i, j] / Z
            if q < 1e-12:
                q = 1e-12
            w = (P[i, j] - q) * num[i, j]
            gx += w * (Y[i, 0] - Y[j, 0])
            gy += w * (Y[i, 1] - Y[j, 1])
            if P[i, j] > 0.0:
                local_kl += P[i, j] * np.log(P[i, j] / q)
        grad[i, 0] = 4.0 * gx
        grad[i, 1] = 4.0 * gy
        kl_rows[i] = local_kl
    kl = 0.0
    for i in range(n):  # sequential sum keeps the value thread-count independent
        kl += kl_rows[i]
    return grad, kl


# ---------------------------------------------------------------------------
# dispatch

if HAVE_NUMBA:
    eod_expand = _eod_expand_nb
    best_split_cls = _best_split_cls_nb
    best_split_reg = _best_split_reg_nb
    tree_leaf = _tree_leaf_nb
    pairwise_sq_dists = _pairwise_sq_dists_nb
    tsne_grad = _tsne_grad_nb
else:
    eod_expand = _eod_expand_np
    best_split_cls = _best_split_cls_np
    best_split_reg = _best_split_reg_np
    tree_leaf = _tree_leaf_np
    pairwise_sq_dists = _pairwise_sq_dists_np
    tsne_grad = _tsne_grad_np

IMPLEMENTATIONS = {
    "eod_expand": (_eod_expand_nb, _eod_expand_np),
    "best_split_cls": (_best_split_cls_nb, _best_split_cls_np),
    "best_split_reg": (_best_split_reg_nb, _best_split_reg_np),
    "tree_leaf": (_tree_leaf_nb, _tree_leaf_np),
    "pairwise_sq_dists": (_pairwise_sq_dists_nb, _pairwise_sq_dists_np),
    "tsne_grad": (_tsne_grad_nb, _tsne_grad_np),
}
