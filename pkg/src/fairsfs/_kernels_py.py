"""Numpy implementations of the hot kernels.

These are the reference versions. ``_kernels.pyx`` mirrors them loop for loop
and must return identical results (the test suite compares both backends).
"""

import numpy as np


def g2_from_codes(x, y, z, cx, cy, nz):
    """G2 statistic and degrees of freedom from integer-coded columns.

    ``x`` and ``y`` hold codes in ``[0, cx)`` and ``[0, cy)``, ``z`` holds a
    stratum code in ``[0, nz)`` for every row. Empty strata and all-zero
    rows/columns inside a stratum contribute nothing to either total.
    """
    idx = (z * cx + x) * cy + y
    counts = np.bincount(idx, minlength=nz * cx * cy).reshape(nz, cx, cy)
    return g2_from_counts(counts)


def g2_from_counts(counts):
    counts = np.asarray(counts, dtype=np.float64)
    if counts.ndim == 2:
        counts = counts[None]
    rows = counts.sum(axis=2)
    cols = counts.sum(axis=1)
    tot = rows.sum(axis=1)
    keep = tot > 0
    counts, rows, cols, tot = counts[keep], rows[keep], cols[keep], tot[keep]

    expected_den = rows[:, :, None] * cols[:, None, :]
    nz = counts > 0
    ratio = np.ones_like(counts)
    np.divide(counts * tot[:, None, None], expected_den, out=ratio, where=nz)
    g2 = 2.0 * float(np.sum(counts[nz] * np.log(ratio[nz])))

    r = (rows > 0).sum(axis=1)
    c = (cols > 0).sum(axis=1)
    dof = int(np.sum((r - 1) * (c - 1)))
    return max(g2, 0.0), dof


def knn_predict(train, labels, queries, k):
    """Majority vote of the ``k`` nearest rows under Hamming distance.

    Distance ties resolve toward the lower training-row index and vote ties
    toward class 0.
    """
    n, d = train.shape
    out = np.zeros(len(queries), dtype=np.int64)
    for qi, q in enumerate(queries):
        dist = (train != q).sum(axis=1) if d else np.zeros(n, dtype=np.int64)
        cum = np.cumsum(np.bincount(dist, minlength=d + 1))
        thr = int(np.searchsorted(cum, k))
        below = dist < thr
        n_below = int(cum[thr - 1]) if thr > 0 else 0
        ties = np.flatnonzero(dist == thr)[: k - n_below]
        ones = int(labels[below].sum()) + int(labels[ties].sum())
        out[qi] = 1 if 2 * ones > k else 0
    return out
