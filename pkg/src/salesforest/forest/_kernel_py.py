"""Pure-numpy kernels for the hot loops of tree training and inference.

This module defines the reference semantics; the compiled extension
(`_kernel.pyx`) implements the same arithmetic in the same order, and the
two must agree bit for bit.  That works because every float64 operation
here maps onto the identical IEEE operation sequence: ``np.cumsum`` is a
sequential accumulation (node sums deliberately go through it instead of
``np.sum``, whose pairwise blocking rounds differently), elementwise
expressions round like their scalar C counterparts, stable argsort matches
a composite (value, position) sort, and ``np.argmax`` keeps the first
occurrence of the maximum exactly like a strictly-greater running max.
"""

from __future__ import annotations

import numpy as np

from ..rng import derive, sample_features

BACKEND = "python"


def scan_split(x: np.ndarray, y: np.ndarray, sse_parent: float, min_leaf: int):
    """Best threshold for one feature within one node.

    x, y are the node's rows (same order).  Thresholds sit at midpoints
    between consecutive distinct sorted values of x; a candidate is valid
    when both sides keep at least `min_leaf` rows.  Returns
    (reduction, threshold, n_left); reduction 0.0 means no valid split with
    a positive SSE decrease exists.  Ties prefer the smallest threshold.
    """
    m = x.shape[0]
    if m < 2 or m < 2 * min_leaf:
        return 0.0, 0.0, 0
    order = np.argsort(x, kind="stable")
    xs = x[order]
    ys = y[order]
    cs = np.cumsum(ys)
    cq = np.cumsum(ys * ys)
    s_tot = cs[m - 1]
    q_tot = cq[m - 1]

    n_left = np.arange(1, m)
    nl = n_left.astype(np.float64)
    nr = np.float64(m) - nl
    s_l = cs[:-1]
    q_l = cq[:-1]
    s_r = s_tot - s_l
    q_r = q_tot - q_l
    sse_l = q_l - (s_l * s_l) / nl
    sse_r = q_r - (s_r * s_r) / nr
    red = sse_parent - sse_l - sse_r

    valid = xs[:-1] < xs[1:]
    if min_leaf > 1:
        valid &= (n_left >= min_leaf) & (m - n_left >= min_leaf)
    red = np.where(valid, red, -np.inf)

    k = int(np.argmax(red))
    best = float(red[k])
    if not best > 0.0:
        return 0.0, 0.0, 0
    thr = (xs[k] + xs[k + 1]) * 0.5
    if not thr < xs[k + 1]:
        # adjacent floats: the midpoint rounded onto the right value; fall
        # back to the left value so `x <= thr` reproduces the scanned split
        thr = xs[k]
    return best, float(thr), k + 1


def best_split_node(X: np.ndarray, rows: np.ndarray, cand: np.ndarray,
                    y_node: np.ndarray, sse_parent: float, min_leaf: int):
    """Best (feature, threshold) over the candidate features of one node.

    Candidates are scanned in the given (ascending) order with a strictly-
    greater running max, realizing the lowest-feature-index tie-break.
    Returns (feature, threshold, reduction, n_left), feature -1 when no
    candidate yields a positive reduction.
    """
    best_f, best_thr, best_red, best_nl = -1, 0.0, 0.0, 0
    for f in cand:
        col = X[rows, f]
        red, thr, n_left = scan_split(col, y_node, sse_parent, min_leaf)
        if red > best_red:
            best_f, best_thr, best_red, best_nl = int(f), thr, red, n_left
    if best_f < 0:
        return -1, 0.0, 0.0, 0
    return best_f, best_thr, best_red, best_nl


def grow_tree(X: np.ndarray, y: np.ndarray, max_depth: int,
              min_samples_split: int, min_samples_leaf: int, k_cand: int,
              tree_seed: int):
    """Grow one CART tree; returns flat node arrays plus the reached depth.

    Nodes are appended in creation order (both children right after their
    parent's split); the stack processes the left subtree first.  Each
    node's candidate features come from its path-addressed stream: the root
    seed is derive(tree_seed, 1) and a node with seed s samples from
    derive(s, 0) and hands derive(s, 1) / derive(s, 2) to its children.
    Returns (feature, threshold, left, right, value, reduction, n_samples,
    depth).
    """
    n, n_features = X.shape
    if n < 1:
        raise ValueError("grow_tree needs at least one row")
    k_cand = min(k_cand, n_features)
    feature, threshold = [], []
    left, right = [], []
    value, reduction, n_samples = [], [], []

    def new_node() -> int:
        feature.append(-1)
        threshold.append(0.0)
        left.append(-1)
        right.append(-1)
        value.append(0.0)
        reduction.append(0.0)
        n_samples.append(0)
        return len(feature) - 1

    root = new_node()
    stack = [(np.arange(n, dtype=np.int64), 0, root, derive(tree_seed, 1))]
    max_depth_seen = 0

    while stack:
        rows, depth, slot, node_seed = stack.pop()
        y_node = np.ascontiguousarray(y[rows])
        m = rows.shape[0]
        # sequential sums (cumsum), to match the compiled accumulation
        s = float(np.cumsum(y_node)[-1])
        mean = s / m
        value[slot] = mean
        n_samples[slot] = m
        if depth > max_depth_seen:
            max_depth_seen = depth

        if depth >= max_depth or m < min_samples_split:
            continue
        if y_node.min() == y_node.max():
            continue  # constant targets: no split can reduce SSE
        q = float(np.cumsum(y_node * y_node)[-1])
        sse_parent = q - s * s / m
        if not sse_parent > 0.0:
            continue

        cand = sample_features(derive(node_seed, 0), n_features, k_cand)
        best_f, best_thr, best_red, best_nl = best_split_node(
            X, rows, cand, y_node, sse_parent, min_samples_leaf)
        if best_f < 0:
            continue

        go_left = X[rows, best_f] <= best_thr
        rows_left = rows[go_left]
        rows_right = rows[~go_left]
        if rows_left.shape[0] != best_nl:  # pragma: no cover - internal guard
            raise AssertionError("partition disagrees with the split scan")

        feature[slot] = best_f
        threshold[slot] = best_thr
        reduction[slot] = best_red
        left_slot = new_node()
        right_slot = new_node()
        left[slot] = left_slot
        right[slot] = right_slot
        stack.append((rows_right, depth + 1, right_slot, derive(node_seed, 2)))
        stack.append((rows_left, depth + 1, left_slot, derive(node_seed, 1)))

    return (np.array(feature, dtype=np.int32),
            np.array(threshold, dtype=np.float64),
            np.array(left, dtype=np.int32),
            np.array(right, dtype=np.int32),
            np.array(value, dtype=np.float64),
            np.array(reduction, dtype=np.float64),
            np.array(n_samples, dtype=np.int64),
            max_depth_seen)


def predict_tree(feature: np.ndarray, threshold: np.ndarray, left: np.ndarray,
                 right: np.ndarray, value: np.ndarray, X: np.ndarray,
                 out: np.ndarray) -> np.ndarray:
    """Route every row of X to a leaf; writes leaf values into `out`."""
    n = X.shape[0]
    if feature[0] < 0:
        out[:] = value[0]
        return out
    node = np.zeros(n, dtype=np.int32)
    idx = np.arange(n)
    while idx.size:
        nd = node[idx]
        f = feature[nd]
        go_left = X[idx, f] <= threshold[nd]
        nxt = np.where(go_left, left[nd], right[nd])
        node[idx] = nxt
        idx = idx[feature[nxt] >= 0]
    out[:] = value[node]
    return out
