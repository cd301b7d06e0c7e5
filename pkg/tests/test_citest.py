import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate, stats

from fairsfs.citest import (
    G2Tester,
    candidate_subsets,
    chi2_sf,
    ci_test,
    contingency,
    g2_statistic,
    is_dep,
)
from fairsfs.oracle import d_separated, sample

from conftest import net, table_from_columns


def _hand_g2(table):
    # cell by cell: 2 * sum O ln(O / E) with E = row * col / total
    table = np.asarray(table, dtype=float)
    tot = table.sum()
    g = 0.0
    for i in range(table.shape[0]):
        for j in range(table.shape[1]):
            o = table[i, j]
            if o:
                g += o * math.log(o / (table[i].sum() * table[:, j].sum() / tot))
    return 2.0 * g


def test_contingency_four_rows():
    t = table_from_columns({"x": [0, 0, 1, 1], "y": [0, 1, 0, 1]})
    c = contingency(t, 0, 1)
    assert c.strata == [()]
    assert c.counts.tolist() == [[[1, 1], [1, 1]]]


def test_contingency_only_realized_strata():
    z = [0, 1] * 6
    t = table_from_columns({"x": [0, 1, 1] * 4, "y": [1, 0] * 6, "z": z})
    # declare z ternary with an unused state
    from fairsfs.dataset import ColumnMeta, DataTable
    t = DataTable(t.codes, list(t.metas[:2]) + [ColumnMeta("z", ("a", "b", "c"))])
    c = contingency(t, 0, 1, (2,))
    assert len(c.strata) == 2


def test_contingency_conserves_rows():
    rng = np.random.default_rng(0)
    t = table_from_columns({k: rng.integers(0, 3, 1000) for k in "xyzw"})
    assert contingency(t, 0, 1, (2, 3)).total == 1000


def test_g2_exact_independence():
    assert g2_statistic(np.array([[25, 25], [25, 25]])) == (0.0, 1)


def test_g2_hand_example():
    counts = [[30, 10], [10, 30]]
    g2, dof = g2_statistic(np.array(counts))
    assert dof == 1
    assert g2 == pytest.approx(_hand_g2(counts), rel=1e-12)
    assert g2 == pytest.approx(20.9299, abs=1e-4)
    # scipy's log-likelihood ratio statistic as a second oracle
    ref = stats.chi2_contingency(counts, correction=False, lambda_="log-likelihood")[0]
    assert g2 == pytest.approx(ref, rel=1e-12)


def test_g2_two_independent_strata():
    counts = np.array([[[25, 25], [25, 25]], [[4, 8], [6, 12]]])
    assert g2_statistic(counts) == (pytest.approx(0.0, abs=1e-12), 2)


def test_g2_dof_counts_nonzero_margins():
    # a zero row drops out of the degrees of freedom
    assert g2_statistic(np.array([[5, 5, 5], [0, 0, 0], [5, 2, 9]]))[1] == 2
    assert g2_statistic(np.zeros((2, 2)))[1] == 1


@settings(max_examples=50, deadline=None)
@given(st.lists(st.lists(st.integers(0, 40), min_size=2, max_size=4), min_size=2, max_size=4)
       .filter(lambda rows: len({len(r) for r in rows}) == 1))
def test_g2_matches_hand_formula(rows):
    counts = np.array(rows)
    assert g2_statistic(counts)[0] == pytest.approx(_hand_g2(counts), rel=1e-9, abs=1e-9)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_g2_is_additive_over_strata(seed):
    rng = np.random.default_rng(seed)
    a, b = rng.integers(1, 30, (2, 3)), rng.integers(1, 30, (2, 3))
    g_ab, d_ab = g2_statistic(np.stack([a, b]))
    assert g_ab == pytest.approx(g2_statistic(a)[0] + g2_statistic(b)[0])
    assert d_ab == g2_statistic(a)[1] + g2_statistic(b)[1]


def _quad_sf(x, k):
    dens = lambda u: u ** (k / 2 - 1) * math.exp(-u / 2) / (2 ** (k / 2) * math.gamma(k / 2))
    return 1.0 - integrate.quad(dens, 0, x, limit=200)[0]


def test_chi2_zero_statistic():
    for k in range(1, 30):
        assert chi2_sf(0.0, k) == 1.0


def test_chi2_five_percent_point():
    assert chi2_sf(3.841, 1) == pytest.approx(_quad_sf(3.841, 1), abs=1e-7)
    assert abs(chi2_sf(3.841, 1) - 0.05) <= 1e-3


@pytest.mark.parametrize("x", [0.1, 1.0, 10.0, 55.5])
def test_chi2_two_dof_closed_form(x):
    assert chi2_sf(x, 2) == pytest.approx(math.exp(-x / 2), abs=1e-12)


@pytest.mark.parametrize("k", [1, 2, 3, 7, 20, 64])
@pytest.mark.parametrize("x", [0.05, 0.9, 4.0, 15.0, 60.0])
def test_chi2_against_quadrature(x, k):
    assert chi2_sf(x, k) == pytest.approx(_quad_sf(x, k), abs=1e-8)


@settings(max_examples=200, deadline=None)
@given(st.floats(0, 2000), st.integers(1, 300))
def test_chi2_against_scipy(x, k):
    assert chi2_sf(x, k) == pytest.approx(stats.chi2.sf(x, k), rel=1e-9, abs=1e-14)


def test_chi2_rejects_bad_input():
    for args in ((-1.0, 1), (float("nan"), 1), (1.0, 0)):
        with pytest.raises(ValueError):
            chi2_sf(*args)
    assert chi2_sf(float("inf"), 3) == 0.0


def test_copied_column_is_dependent():
    x = np.random.default_rng(1).integers(0, 2, 1000)
    r = ci_test(table_from_columns({"x": x, "y": x}), 0, 1)
    assert not r.independent and r.reliable and r.p_value < 1e-10


def test_small_sample_is_unreliable():
    # 20 rows over all 8 strata of three binary variables; every stratum
    # realizes both values of x and y, so dof reaches 8 and 10 * 8 > 20
    z = np.array([[(s >> b) & 1 for b in range(3)] for s in range(8)])
    z = np.vstack([z, z, z[:4]])
    x = np.array([0] * 8 + [1] * 8 + [0, 1, 0, 1])
    y = np.array([0] * 8 + [1] * 8 + [1, 0, 1, 0])
    t = table_from_columns({"x": x, "y": y, "a": z[:, 0], "b": z[:, 1], "c": z[:, 2]})
    r = ci_test(t, 0, 1, (2, 3, 4))
    assert r.dof == 8
    assert not r.reliable
    assert r.independent


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(5, 120))
def test_reliability_rule(seed, n):
    rng = np.random.default_rng(seed)
    t = table_from_columns({k: rng.integers(0, 3, n) for k in "xyab"})
    r = ci_test(t, 0, 1, (2, 3))
    assert r.reliable == (n >= 10 * r.dof)
    if not r.reliable:
        assert r.independent
    else:
        assert r.independent == (r.p_value > 0.01)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_symmetry_and_relabelling(seed):
    rng = np.random.default_rng(seed)
    n = 300
    z = rng.integers(0, 3, n)
    x = (z + rng.integers(0, 2, n)) % 3
    y = (x + rng.integers(0, 3, n) * (rng.random(n) < 0.5)) % 3
    t = table_from_columns({"x": x, "y": y, "z": z})
    a, b = ci_test(t, 0, 1, (2,)), ci_test(t, 1, 0, (2,))
    assert a == b
    perm = rng.permutation(3)
    t2 = table_from_columns({"x": perm[x], "y": y, "z": perm[z]})
    c = ci_test(t2, 0, 1, (2,))
    assert c.g2 == pytest.approx(a.g2, rel=1e-9, abs=1e-9)
    assert c.dof == a.dof and c.independent == a.independent


def test_candidate_subsets_order():
    assert list(candidate_subsets([3, 1, 2], 2)) == [
        (), (1,), (2,), (3,), (1, 2), (1, 3), (2, 3)]
    assert list(candidate_subsets([], 3)) == [()]
    assert list(candidate_subsets([2, 1], None)) == [(1, 2)]


def test_empty_pool_is_marginal_test():
    rng = np.random.default_rng(4)
    x = rng.integers(0, 2, 500)
    y = np.where(rng.random(500) < 0.3, x, rng.integers(0, 2, 500))
    t = table_from_columns({"x": x, "y": y})
    rec = []
    assert is_dep(t, 0, 1, (), record=rec) == (not ci_test(t, 0, 1).independent)
    assert len(rec) == 1 and rec[0][2] == ()


def test_deterministic_function_stays_dependent():
    rng = np.random.default_rng(5)
    x = rng.integers(0, 3, 3000)
    noise = rng.integers(0, 2, (3, 3000))
    t = table_from_columns({"x": x, "y": (x * 2) % 3, "a": noise[0], "b": noise[1], "c": noise[2]})
    assert is_dep(t, 0, 1, (2, 3, 4), max_k=3)


def test_chain_is_blocked_by_middle_node():
    bn = net([
        ("x", [], [[0.5, 0.5]]),
        ("z", ["x"], [[0.85, 0.15], [0.2, 0.8]]),
        ("y", ["z"], [[0.8, 0.2], [0.3, 0.7]]),
    ])
    assert d_separated(bn, 0, 2, (1,)) and not d_separated(bn, 0, 2, ())
    t = sample(bn, 10000, seed=0)
    assert is_dep(t, 0, 2, (), max_k=3)
    assert not is_dep(t, 0, 2, (1,), max_k=1)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_increasing_max_k_never_creates_dependence(seed):
    rng = np.random.default_rng(seed)
    n = 400
    cols = {"x": rng.integers(0, 2, n)}
    for k in "abcd":
        cols[k] = np.where(rng.random(n) < 0.4, cols["x"], rng.integers(0, 2, n))
    cols["y"] = np.where(rng.random(n) < 0.5, cols["a"], rng.integers(0, 2, n))
    t = table_from_columns(cols)
    tester = G2Tester(t)
    results = [is_dep(t, 0, 5, (1, 2, 3, 4), k, tester=tester) for k in range(5)]
    for lo, hi in zip(results, results[1:]):
        assert lo or not hi


def test_tester_memoizes():
    rng = np.random.default_rng(6)
    t = table_from_columns({k: rng.integers(0, 2, 200) for k in "xyz"})
    tester = G2Tester(t)
    a = tester.test(0, 1, (2,))
    assert tester.test(1, 0, (2,)) is a
    assert tester.calls == 1
