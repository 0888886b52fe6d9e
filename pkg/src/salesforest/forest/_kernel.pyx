# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled kernels for the hot loops of tree training and inference.

`_kernel_py` defines the reference semantics; this module reimplements them
with the identical operation order so results match bit for bit: the sort is
a composite (value, position) quicksort (equivalent to a stable argsort),
every accumulation is sequential (matching the fallback's cumsum-based
sums), and the running max keeps the first strictly-greater candidate.
`grow_tree` runs a whole tree without the GIL, which is what makes
tree-level threading scale.
"""

from libc.stdlib cimport free, malloc
from libc.string cimport memcpy

import numpy as np

BACKEND = "compiled"

cdef unsigned long long _GAMMA = 0x9E3779B97F4A7C15u


cdef inline unsigned long long _mix64(unsigned long long z) noexcept nogil:
    z = (z ^ (z >> 30)) * <unsigned long long> 0xBF58476D1CE4E5B9u
    z = (z ^ (z >> 27)) * <unsigned long long> 0x94D049BB133111EBu
    return z ^ (z >> 31)


cdef inline unsigned long long _derive(unsigned long long seed,
                                       unsigned long long k) noexcept nogil:
    # keep in sync with salesforest.rng.derive
    return _mix64(seed + (k + 1) * _GAMMA)


cdef void _sample_sorted(unsigned long long seed, long n_features, long k,
                         long* pool, long* out) noexcept nogil:
    # keep in sync with salesforest.rng.sample_features
    cdef long i, j, r, tmp
    cdef unsigned long long state = seed
    if k == n_features:
        for i in range(k):
            out[i] = i
        return
    for i in range(n_features):
        pool[i] = i
    for j in range(k):
        state = state + _GAMMA
        r = j + <long> (_mix64(state) % <unsigned long long> (n_features - j))
        tmp = pool[j]; pool[j] = pool[r]; pool[r] = tmp
    for i in range(k):
        out[i] = pool[i]
    for i in range(1, k):  # ascending, like the fallback's sorted()
        tmp = out[i]
        j = i - 1
        while j >= 0 and out[j] > tmp:
            out[j + 1] = out[j]
            j -= 1
        out[j + 1] = tmp


cdef inline void _insertion_sort(double* v, long* p, long lo, long hi) noexcept nogil:
    cdef long i, j
    cdef double vk
    cdef long pk
    for i in range(lo + 1, hi + 1):
        vk = v[i]
        pk = p[i]
        j = i - 1
        while j >= lo and (v[j] > vk or (v[j] == vk and p[j] > pk)):
            v[j + 1] = v[j]
            p[j + 1] = p[j]
            j -= 1
        v[j + 1] = vk
        p[j + 1] = pk


cdef void _sort_pairs(double* v, long* p, long lo, long hi) noexcept nogil:
    # quicksort on the composite key (value, position); keys are distinct so
    # ties cannot degrade it, and the result equals a stable argsort
    cdef long i, j, mid
    cdef double pivot_v, tv
    cdef long pivot_p, tp
    while hi - lo > 15:
        mid = lo + (hi - lo) // 2
        # median of three on the composite key
        if v[mid] < v[lo] or (v[mid] == v[lo] and p[mid] < p[lo]):
            tv = v[lo]; v[lo] = v[mid]; v[mid] = tv
            tp = p[lo]; p[lo] = p[mid]; p[mid] = tp
        if v[hi] < v[lo] or (v[hi] == v[lo] and p[hi] < p[lo]):
            tv = v[lo]; v[lo] = v[hi]; v[hi] = tv
            tp = p[lo]; p[lo] = p[hi]; p[hi] = tp
        if v[hi] < v[mid] or (v[hi] == v[mid] and p[hi] < p[mid]):
            tv = v[mid]; v[mid] = v[hi]; v[hi] = tv
            tp = p[mid]; p[mid] = p[hi]; p[hi] = tp
        pivot_v = v[mid]
        pivot_p = p[mid]
        i = lo
        j = hi
        while i <= j:
            while v[i] < pivot_v or (v[i] == pivot_v and p[i] < pivot_p):
                i += 1
            while v[j] > pivot_v or (v[j] == pivot_v and p[j] > pivot_p):
                j -= 1
            if i <= j:
                tv = v[i]; v[i] = v[j]; v[j] = tv
                tp = p[i]; p[i] = p[j]; p[j] = tp
                i += 1
                j -= 1
        # recurse into the smaller side, loop on the larger
        if j - lo < hi - i:
            _sort_pairs(v, p, lo, j)
            lo = i
        else:
            _sort_pairs(v, p, i, hi)
            hi = j
    _insertion_sort(v, p, lo, hi)


cdef int _scan_core(double* vbuf, long* pbuf, double* y, long m,
                    double sse_parent, long min_leaf,
                    double* out_red, double* out_thr, long* out_nl) noexcept nogil:
    """Scan one feature buffer (node order, y indexed by pbuf); returns 1
    when a positive-reduction split exists.  vbuf/pbuf sort in place."""
    cdef long i, nl, nr, best_k = -1
    cdef double s_tot = 0.0, q_tot = 0.0, s = 0.0, q = 0.0
    cdef double yv, sse_l, sse_r, red, rs, rq
    cdef double best_red = 0.0, thr, v_hi

    _sort_pairs(vbuf, pbuf, 0, m - 1)
    for i in range(m):
        yv = y[pbuf[i]]
        s_tot += yv
        q_tot += yv * yv
    for i in range(m - 1):
        yv = y[pbuf[i]]
        s += yv
        q += yv * yv
        if vbuf[i] >= vbuf[i + 1]:
            continue
        nl = i + 1
        nr = m - nl
        if nl < min_leaf or nr < min_leaf:
            continue
        sse_l = q - (s * s) / (<double> nl)
        rs = s_tot - s
        rq = q_tot - q
        sse_r = rq - (rs * rs) / (<double> nr)
        red = sse_parent - sse_l - sse_r
        if red > best_red:
            best_red = red
            best_k = i
    if best_k < 0:
        return 0
    v_hi = vbuf[best_k + 1]
    thr = (vbuf[best_k] + v_hi) * 0.5
    if not thr < v_hi:
        # adjacent floats: the midpoint rounded onto the right value; fall
        # back to the left value so `x <= thr` reproduces the scanned split
        thr = vbuf[best_k]
    out_red[0] = best_red
    out_thr[0] = thr
    out_nl[0] = best_k + 1
    return 1


def scan_split(double[::1] x, double[::1] y, double sse_parent, long min_leaf):
    """Best threshold for one feature within one node; see _kernel_py."""
    cdef long m = x.shape[0]
    if m < 2 or m < 2 * min_leaf:
        return 0.0, 0.0, 0
    cdef double* vbuf = <double*> malloc(m * sizeof(double))
    cdef long* pbuf = <long*> malloc(m * sizeof(long))
    if vbuf == NULL or pbuf == NULL:
        free(vbuf)
        free(pbuf)
        raise MemoryError("scan_split buffers")
    cdef long i, nl = 0
    cdef double red = 0.0, thr = 0.0
    cdef int found
    with nogil:
        for i in range(m):
            vbuf[i] = x[i]
            pbuf[i] = i
        found = _scan_core(vbuf, pbuf, &y[0], m, sse_parent, min_leaf,
                           &red, &thr, &nl)
    free(vbuf)
    free(pbuf)
    if not found:
        return 0.0, 0.0, 0
    return red, thr, nl


def best_split_node(double[:, ::1] X, long[::1] rows, long[::1] cand,
                    double[::1] y_node, double sse_parent, long min_leaf):
    """Best (feature, threshold) over the candidate features of one node.

    Candidates are scanned in the given (ascending) order with a strictly-
    greater running max, realizing the lowest-feature-index tie-break.
    Returns (feature, threshold, reduction, n_left), feature -1 when no
    candidate yields a positive reduction.
    """
    cdef long m = rows.shape[0]
    cdef long k = cand.shape[0]
    if m < 2 or m < 2 * min_leaf or k == 0:
        return -1, 0.0, 0.0, 0
    cdef double* vbuf = <double*> malloc(m * sizeof(double))
    cdef long* pbuf = <long*> malloc(m * sizeof(long))
    if vbuf == NULL or pbuf == NULL:
        free(vbuf)
        free(pbuf)
        raise MemoryError("best_split_node buffers")
    cdef long i, j, f
    cdef long best_f = -1, best_nl = 0, nl = 0
    cdef double best_red = 0.0, best_thr = 0.0, red = 0.0, thr = 0.0
    cdef int found
    with nogil:
        for j in range(k):
            f = cand[j]
            for i in range(m):
                vbuf[i] = X[rows[i], f]
                pbuf[i] = i
            found = _scan_core(vbuf, pbuf, &y_node[0], m, sse_parent, min_leaf,
                               &red, &thr, &nl)
            if found and red > best_red:
                best_red = red
                best_f = f
                best_thr = thr
                best_nl = nl
    free(vbuf)
    free(pbuf)
    if best_f < 0:
        return -1, 0.0, 0.0, 0
    return best_f, best_thr, best_red, best_nl


cdef struct _StackItem:
    long start
    long end
    long depth
    long slot
    unsigned long long seed


def grow_tree(double[:, ::1] X, double[::1] y, long max_depth,
              long min_samples_split, long min_samples_leaf, long k_cand,
              unsigned long long tree_seed):
    """Grow one CART tree without the GIL; see _kernel_py.grow_tree for the
    reference semantics and the node/seed addressing contract."""
    cdef long n = X.shape[0]
    cdef long n_features = X.shape[1]
    if n < 1:
        raise ValueError("grow_tree needs at least one row")
    if k_cand > n_features:
        k_cand = n_features

    cdef long cap = 2 * n + 1
    feature_a = np.full(cap, -1, dtype=np.int32)
    threshold_a = np.zeros(cap, dtype=np.float64)
    left_a = np.full(cap, -1, dtype=np.int32)
    right_a = np.full(cap, -1, dtype=np.int32)
    value_a = np.zeros(cap, dtype=np.float64)
    reduction_a = np.zeros(cap, dtype=np.float64)
    n_samples_a = np.zeros(cap, dtype=np.int64)
    cdef int[::1] feature = feature_a
    cdef double[::1] threshold = threshold_a
    cdef int[::1] left = left_a
    cdef int[::1] right = right_a
    cdef double[::1] value = value_a
    cdef double[::1] reduction = reduction_a
    cdef long[::1] n_samples = n_samples_a

    cdef long* rows = <long*> malloc(n * sizeof(long))
    cdef long* rowtmp = <long*> malloc(n * sizeof(long))
    cdef double* vbuf = <double*> malloc(n * sizeof(double))
    cdef long* pbuf = <long*> malloc(n * sizeof(long))
    cdef double* ybuf = <double*> malloc(n * sizeof(double))
    cdef long* pool = <long*> malloc(n_features * sizeof(long))
    cdef long* cand = <long*> malloc(n_features * sizeof(long))
    cdef _StackItem* stack = <_StackItem*> malloc((n + 2) * sizeof(_StackItem))
    if (rows == NULL or rowtmp == NULL or vbuf == NULL or pbuf == NULL
            or ybuf == NULL or pool == NULL or cand == NULL or stack == NULL):
        free(rows); free(rowtmp); free(vbuf); free(pbuf); free(ybuf)
        free(pool); free(cand); free(stack)
        raise MemoryError("grow_tree buffers")

    cdef long node_count = 1, max_depth_seen = 0, sp = 0
    cdef long start, end, depth, slot, m, i, j, f, r, nl
    cdef unsigned long long node_seed
    cdef double s, q, yv, ymin, ymax, mean, sse_parent
    cdef double best_red, best_thr, red = 0.0, thr = 0.0
    cdef long best_f, best_nl, scan_nl = 0, left_slot, right_slot
    cdef int found, bad_partition = 0

    with nogil:
        for i in range(n):
            rows[i] = i
        stack[0].start = 0
        stack[0].end = n
        stack[0].depth = 0
        stack[0].slot = 0
        stack[0].seed = _derive(tree_seed, 1)
        sp = 1

        while sp > 0:
            sp -= 1
            start = stack[sp].start
            end = stack[sp].end
            depth = stack[sp].depth
            slot = stack[sp].slot
            node_seed = stack[sp].seed
            m = end - start

            s = 0.0
            ymin = y[rows[start]]
            ymax = ymin
            for i in range(m):
                yv = y[rows[start + i]]
                ybuf[i] = yv
                s += yv
                if yv < ymin:
                    ymin = yv
                elif yv > ymax:
                    ymax = yv
            mean = s / (<double> m)
            value[slot] = mean
            n_samples[slot] = m
            if depth > max_depth_seen:
                max_depth_seen = depth

            if depth >= max_depth or m < min_samples_split:
                continue
            if ymin == ymax:
                continue
            q = 0.0
            for i in range(m):
                q += ybuf[i] * ybuf[i]
            sse_parent = q - s * s / (<double> m)
            if not sse_parent > 0.0:
                continue

            _sample_sorted(_derive(node_seed, 0), n_features, k_cand, pool, cand)
            best_f = -1
            best_red = 0.0
            best_thr = 0.0
            best_nl = 0
            for j in range(k_cand):
                f = cand[j]
                for i in range(m):
                    vbuf[i] = X[rows[start + i], f]
                    pbuf[i] = i
                found = _scan_core(vbuf, pbuf, ybuf, m, sse_parent,
                                   min_samples_leaf, &red, &thr, &scan_nl)
                if found and red > best_red:
                    best_red = red
                    best_f = f
                    best_thr = thr
                    best_nl = scan_nl
            if best_f < 0:
                continue

            # stable partition, preserving node order on both sides
            nl = 0
            for i in range(m):
                r = rows[start + i]
                if X[r, best_f] <= best_thr:
                    rowtmp[nl] = r
                    nl += 1
            if nl != best_nl:
                bad_partition = 1
                break
            for i in range(m):
                r = rows[start + i]
                if not X[r, best_f] <= best_thr:
                    rowtmp[nl] = r
                    nl += 1
            memcpy(rows + start, rowtmp, m * sizeof(long))

            feature[slot] = <int> best_f
            threshold[slot] = best_thr
            reduction[slot] = best_red
            left_slot = node_count
            right_slot = node_count + 1
            node_count += 2
            left[slot] = <int> left_slot
            right[slot] = <int> right_slot
            stack[sp].start = start + best_nl
            stack[sp].end = end
            stack[sp].depth = depth + 1
            stack[sp].slot = right_slot
            stack[sp].seed = _derive(node_seed, 2)
            sp += 1
            stack[sp].start = start
            stack[sp].end = start + best_nl
            stack[sp].depth = depth + 1
            stack[sp].slot = left_slot
            stack[sp].seed = _derive(node_seed, 1)
            sp += 1

    free(rows); free(rowtmp); free(vbuf); free(pbuf); free(ybuf)
    free(pool); free(cand); free(stack)
    if bad_partition:
        raise AssertionError("partition disagrees with the split scan")

    return (feature_a[:node_count].copy(), threshold_a[:node_count].copy(),
            left_a[:node_count].copy(), right_a[:node_count].copy(),
            value_a[:node_count].copy(), reduction_a[:node_count].copy(),
            n_samples_a[:node_count].copy(), max_depth_seen)


def predict_tree(int[::1] feature, double[::1] threshold, int[::1] left,
                 int[::1] right, double[::1] value, double[:, ::1] X,
                 double[::1] out):
    """Route every row of X to a leaf; writes leaf values into `out`."""
    cdef long n = X.shape[0]
    cdef long i
    cdef int node
    with nogil:
        for i in range(n):
            node = 0
            while feature[node] >= 0:
                if X[i, feature[node]] <= threshold[node]:
                    node = left[node]
                else:
                    node = right[node]
            out[i] = value[node]
    return out
