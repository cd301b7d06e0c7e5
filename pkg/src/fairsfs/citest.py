"""G2 conditional-independence testing on categorical data."""

import math
from dataclasses import dataclass
from itertools import combinations

import numpy as np

from . import kernels

DEFAULT_ALPHA = 0.01
DEFAULT_MAX_K = 3
# minimum rows per degree of freedom for a test to count as reliable
ROWS_PER_DOF = 10
# beyond this many syntactic strata the stratum codes are compacted first
_MAX_DENSE_STRATA = 1 << 20


@dataclass(frozen=True)
class CITestResult:
    g2: float
    dof: int
    p_value: float
    reliable: bool
    independent: bool


@dataclass(frozen=True)
class StratifiedCounts:
    """Per-stratum ``|X| x |Y|`` count matrices.

    ``strata[i]`` is the tuple of conditioning-set codes for ``counts[i]``.
    Only strata that occur in the data are present.
    """

    strata: list
    counts: np.ndarray

    @property
    def total(self):
        return int(self.counts.sum())


def _check_indices(table, x, y, cond):
    cond = tuple(cond)
    if x == y:
        raise ValueError(f"x and y are the same column ({x})")
    if len(set(cond)) != len(cond):
        raise ValueError(f"duplicate indices in conditioning set {cond}")
    if x in cond or y in cond:
        raise ValueError("x and y must not appear in the conditioning set")
    for i in (x, y, *cond):
        if not 0 <= i < table.n_columns:
            raise IndexError(f"column index {i} out of range")
    return cond


def contingency(table, x, y, cond=()):
    cond = _check_indices(table, x, y, cond)
    cx, cy = table.metas[x].cardinality, table.metas[y].cardinality
    xs, ys = table.column(x), table.column(y)
    if cond:
        keys, inv = np.unique(table.codes[list(cond)].T, axis=0, return_inverse=True)
        inv = inv.reshape(-1)
        strata = [tuple(int(v) for v in k) for k in keys]
    else:
        inv = np.zeros(table.n_rows, dtype=np.int64)
        strata = [()]
    nz = len(strata)
    counts = np.bincount((inv * cx + xs) * cy + ys, minlength=nz * cx * cy).reshape(nz, cx, cy)
    return StratifiedCounts(strata, counts)


def g2_statistic(counts):
    """G2 statistic and degrees of freedom for stratified counts.

    Accepts a :class:`StratifiedCounts`, a single 2-D table or a 3-D array of
    stratum tables. Zero cells add nothing; a stratum contributes
    ``(r - 1)(c - 1)`` degrees of freedom counting only its nonzero row and
    column margins. A zero total is floored to 1.
    """
    if isinstance(counts, StratifiedCounts):
        counts = counts.counts
    g2, dof = kernels.g2_from_counts(counts)
    return g2, max(dof, 1)


def _lower_series(a, x):
    term = 1.0 / a
    total = term
    ap = a
    for _ in range(100000):
        ap += 1.0
        term *= x / ap
        total += term
        if abs(term) < abs(total) * 1e-16:
            return total * math.exp(-x + a * math.log(x) - math.lgamma(a))
    raise ArithmeticError(f"incomplete gamma series did not converge (a={a}, x={x})")


def _upper_continued_fraction(a, x):
    # modified Lentz evaluation
    tiny = 1e-300
    b = x + 1.0 - a
    c = 1.0 / tiny
    d = 1.0 / b
    h = d
    for i in range(1, 100000):
        an = -i * (i - a)
        b += 2.0
        d = an * d + b
        if abs(d) < tiny:
            d = tiny
        c = b + an / c
        if abs(c) < tiny:
            c = tiny
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < 1e-16:
            return math.exp(-x + a * math.log(x) - math.lgamma(a)) * h
    raise ArithmeticError(f"incomplete gamma fraction did not converge (a={a}, x={x})")


def chi2_sf(x, dof):
    """Upper tail of the chi-square distribution, ``Q(dof/2, x/2)``."""
    if not x >= 0:
        raise ValueError(f"chi2_sf: x must be >= 0, got {x}")
    if dof < 1:
        raise ValueError(f"chi2_sf: dof must be >= 1, got {dof}")
    if x == 0:
        return 1.0
    if math.isinf(x):
        return 0.0
    a, h = dof / 2.0, x / 2.0
    if h == 0.0:
        # subnormal x underflows when halved
        return 1.0
    if h < a + 1.0:
        q = 1.0 - _lower_series(a, h)
    else:
        q = _upper_continued_fraction(a, h)
    return min(max(q, 0.0), 1.0)


def _stratum_codes(table, cond):
    if not cond:
        return np.zeros(table.n_rows, dtype=np.int64), 1
    z = np.zeros(table.n_rows, dtype=np.int64)
    nz = 1
    for i in cond:
        card = table.metas[i].cardinality
        z = z * card + table.column(i)
        nz *= card
        if nz > _MAX_DENSE_STRATA:
            _, z = np.unique(z, return_inverse=True)
            z = z.reshape(-1).astype(np.int64)
            nz = int(z.max()) + 1
    if nz > table.n_rows:
        _, z = np.unique(z, return_inverse=True)
        z = z.reshape(-1).astype(np.int64)
        nz = int(z.max()) + 1
    return z, nz


def ci_test(table, x, y, cond=(), alpha=DEFAULT_ALPHA):
    """G2 test of ``x`` independent of ``y`` given ``cond``.

    A test is reliable when there are at least ten rows per degree of
    freedom. Unreliable tests report ``independent=True``.
    """
    cond = _check_indices(table, x, y, cond)
    # canonical argument order makes the result bitwise symmetric in x, y
    a, b = (x, y) if x < y else (y, x)
    cond = tuple(sorted(cond))
    z, nz = _stratum_codes(table, cond)
    g2, dof = kernels.g2_from_codes(
        table.column(a), table.column(b), z,
        table.metas[a].cardinality, table.metas[b].cardinality, nz,
    )
    dof = max(dof, 1)
    p = chi2_sf(g2, dof)
    reliable = table.n_rows >= ROWS_PER_DOF * dof
    independent = (p > alpha) if reliable else True
    return CITestResult(g2, dof, p, reliable, independent)


class G2Tester:
    """Memoizing G2 tester bound to one table and significance level."""

    def __init__(self, table, alpha=DEFAULT_ALPHA):
        self.table = table
        self.alpha = alpha
        self._cache = {}
        self.calls = 0

    def test(self, x, y, cond=()):
        key = (min(x, y), max(x, y), tuple(sorted(cond)))
        res = self._cache.get(key)
        if res is None:
            self.calls += 1
            res = ci_test(self.table, x, y, cond, self.alpha)
            self._cache[key] = res
        return res


def candidate_subsets(condpool, max_k):
    """Conditioning subsets in search order: by size, then lexicographic.

    ``max_k=None`` means only the whole pool is tried.
    """
    pool = sorted(condpool)
    if max_k is None or (isinstance(max_k, float) and math.isinf(max_k)):
        yield tuple(pool)
        return
    for k in range(0, min(int(max_k), len(pool)) + 1):
        yield from combinations(pool, k)


def is_dep(table, x, y, condpool=(), max_k=DEFAULT_MAX_K, alpha=DEFAULT_ALPHA,
           tester=None, record=None):
    """True unless some subset of ``condpool`` makes ``x`` and ``y`` independent.

    Only reliable tests count as evidence of independence. The first
    independence in search order ends the search. Every test run is
    appended to ``record`` as ``(x, y, Z, result)`` when a list is given.
    """
    if x in condpool or y in condpool:
        raise ValueError("x and y must not be in the conditioning pool")
    run = tester.test if tester is not None else (lambda a, b, z: ci_test(table, a, b, z, alpha))
    for z in candidate_subsets(condpool, max_k):
        res = run(x, y, z)
        if record is not None:
            record.append((x, y, z, res))
        if res.reliable and res.independent:
            return False
    return True
