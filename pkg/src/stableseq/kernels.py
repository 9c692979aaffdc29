"""Hot numeric kernels, each in a numba and a pure-numpy variant.

The two variants of every kernel perform the same floating-point operations in
the same order, so they produce bit-identical outputs. Dispatch is decided once
at import time (see :mod:`stableseq.accel`); both raw variants stay importable
for the equivalence tests and the backend benchmark.
"""

from __future__ import annotations

import numpy as np

from . import accel


# ---------------------------------------------------------------------------
# path cost matrix: pairwise dissimilarity between root-to-leaf path boxes
# ---------------------------------------------------------------------------

def _path_cost_matrix_loops(lo1, hi1, lab1, lo2, hi2, lab2, label_weight):
    n1 = lo1.shape[0]
    n2 = lo2.shape[0]
    p = lo1.shape[1]
    out = np.empty((n1, n2), dtype=np.float64)
    for i in range(n1):
        for j in range(n2):
            acc = 0.0
            for k in range(p):
                union = max(hi1[i, k], hi2[j, k]) - min(lo1[i, k], lo2[j, k])
                if union > 0.0:
                    inter = min(hi1[i, k], hi2[j, k]) - max(lo1[i, k], lo2[j, k])
                    if inter < 0.0:
                        inter = 0.0
                    acc += 1.0 - inter / union
                # zero-length union (degenerate bounds): dissimilarity 0
            c = acc / p
            if lab1[i] != lab2[j]:
                c += label_weight
            out[i, j] = c
    return out


def path_cost_matrix_numpy(lo1, hi1, lab1, lo2, hi2, lab2, label_weight):
    n1, p = lo1.shape
    n2 = lo2.shape[0]
    acc = np.zeros((n1, n2), dtype=np.float64)
    for k in range(p):  # sequential over features: same add order as the loops
        union = np.maximum(hi1[:, k, None], hi2[None, :, k]) - np.minimum(
            lo1[:, k, None], lo2[None, :, k]
        )
        inter = np.minimum(hi1[:, k, None], hi2[None, :, k]) - np.maximum(
            lo1[:, k, None], lo2[None, :, k]
        )
        inter = np.maximum(inter, 0.0)
        safe = np.where(union > 0.0, union, 1.0)
        acc += np.where(union > 0.0, 1.0 - inter / safe, 0.0)
    out = acc / p
    out[lab1[:, None] != lab2[None, :]] += label_weight
    return out


# ---------------------------------------------------------------------------
# pairwise squared euclidean distances between row vectors
# ---------------------------------------------------------------------------

def _pairwise_sq_dists_loops(A, B):
    m1 = A.shape[0]
    m2 = B.shape[0]
    p = A.shape[1]
    out = np.empty((m1, m2), dtype=np.float64)
    for i in range(m1):
        for j in range(m2):
            acc = 0.0
            for k in range(p):
                d = A[i, k] - B[j, k]
                acc += d * d
            out[i, j] = acc
    return out


def pairwise_sq_dists_numpy(A, B):
    m1, p = A.shape
    m2 = B.shape[0]
    acc = np.zeros((m1, m2), dtype=np.float64)
    for k in range(p):
        d = A[:, k, None] - B[None, :, k]
        acc += d * d
    return acc


# ---------------------------------------------------------------------------
# CART split scan for one feature column (binary labels, exact integer counts)
# ---------------------------------------------------------------------------

def _best_split_scan_loops(vals, labels, min_leaf):
    # vals ascending-sorted; labels 0/1 aligned with vals.
    n = vals.shape[0]
    total_pos = 0
    for i in range(n):
        total_pos += labels[i]
    nf = float(n)
    tp = float(total_pos)
    parent = 1.0 - (tp / nf) * (tp / nf) - ((nf - tp) / nf) * ((nf - tp) / nf)
    best_gain = -1.0
    best_thr = 0.0
    found = 0
    cum = 0
    for i in range(n - 1):
        cum += labels[i]
        nl = i + 1
        nr = n - nl
        if nl < min_leaf or nr < min_leaf:
            continue
        if not (vals[i] < vals[i + 1]):
            continue
        thr = vals[i] + (vals[i + 1] - vals[i]) * 0.5
        if not (vals[i] < thr and thr < vals[i + 1]):
            continue  # adjacent floats: midpoint would land on an endpoint
        nlf = float(nl)
        nrf = float(nr)
        pl = float(cum)
        pr = tp - pl
        gl = 1.0 - (pl / nlf) * (pl / nlf) - ((nlf - pl) / nlf) * ((nlf - pl) / nlf)
        gr = 1.0 - (pr / nrf) * (pr / nrf) - ((nrf - pr) / nrf) * ((nrf - pr) / nrf)
        child = (nlf * gl + nrf * gr) / nf
        gain = parent - child
        if gain > best_gain:
            best_gain = gain
            best_thr = thr
            found = 1
    if found == 0:
        return -1.0, 0.0, 0
    return best_gain, best_thr, 1


def best_split_scan_numpy(vals, labels, min_leaf):
    n = vals.shape[0]
    if n < 2:
        return -1.0, 0.0, 0
    nf = float(n)
    tp = float(labels.sum())
    parent = 1.0 - (tp / nf) * (tp / nf) - ((nf - tp) / nf) * ((nf - tp) / nf)
    nl = np.arange(1, n, dtype=np.float64)
    nr = nf - nl
    pl = np.cumsum(labels)[:-1].astype(np.float64)
    pr = tp - pl
    thr = vals[:-1] + (vals[1:] - vals[:-1]) * 0.5
    ok = (
        (nl >= min_leaf)
        & (nr >= min_leaf)
        & (vals[:-1] < vals[1:])
        & (vals[:-1] < thr)
        & (thr < vals[1:])
    )
    if not ok.any():
        return -1.0, 0.0, 0
    gl = 1.0 - (pl / nl) * (pl / nl) - ((nl - pl) / nl) * ((nl - pl) / nl)
    gr = 1.0 - (pr / nr) * (pr / nr) - ((nr - pr) / nr) * ((nr - pr) / nr)
    child = (nl * gl + nr * gr) / nf
    gain = parent - child
    gain = np.where(ok, gain, -np.inf)
    i = int(np.argmax(gain))  # first occurrence == lowest threshold on ties
    return float(gain[i]), float(thr[i]), 1


if accel.USE_NUMBA:
    from numba import njit

    path_cost_matrix_numba = njit(cache=True, nogil=True)(_path_cost_matrix_loops)
    pairwise_sq_dists_numba = njit(cache=True, nogil=True)(_pairwise_sq_dists_loops)
    best_split_scan_numba = njit(cache=True, nogil=True)(_best_split_scan_loops)

    path_cost_matrix = path_cost_matrix_numba
    pairwise_sq_dists = pairwise_sq_dists_numba
    best_split_scan = best_split_scan_numba
else:
    path_cost_matrix_numba = None
    pairwise_sq_dists_numba = None
    best_split_scan_numba = None

    path_cost_matrix = path_cost_matrix_numpy
    pairwise_sq_dists = pairwise_sq_dists_numpy
    best_split_scan = best_split_scan_numpy
