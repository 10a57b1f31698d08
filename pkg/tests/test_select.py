import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from archmx.dgp import SimModel, simulate_model
from archmx.errors import EmptyInput, InvalidLevel, InvalidPValue
from archmx.select import (
    bonferroni_cutoffs,
    bonferroni_select,
    by_adjusted_pvalues,
    by_cutoffs,
    by_fdr_select,
    harmonic,
    select_variables,
)

pvectors = st.lists(st.floats(0.0, 1.0), min_size=1, max_size=30).map(np.array)
levels = st.floats(0.001, 0.5)


def brute_force_k(p, q):
    d = len(p)
    h = sum(1.0 / l for l in range(1, d + 1))
    ranked = sorted(p)
    return max([l for l in range(1, d + 1) if ranked[l - 1] <= l / d * q / h], default=0)


def test_by_examples():
    res = by_fdr_select([0.001, 0.2, 0.9], 0.05)
    np.testing.assert_allclose(res.cutoffs, [0.00909090909090909, 0.01818181818181818, 0.02727272727272727])
    assert res.k == 1 and res.selected == (0,)
    assert by_fdr_select([0.04], 0.05).selected == (0,)
    assert by_fdr_select([0.04], 0.05).cutoffs[0] == pytest.approx(0.05)
    assert by_fdr_select(np.ones(6), 0.05).selected == ()


def test_bonferroni_examples():
    res = bonferroni_select([0.009, 0.2, 0.011, 0.5, 0.9], 0.05)
    assert res.selected == (0,)
    np.testing.assert_allclose(res.cutoffs, 0.01)
    assert bonferroni_select([0.04], 0.05).selected == (0,)
    assert bonferroni_select([0.06], 0.05).selected == ()
    assert bonferroni_select([0.2, 0.3], 0.05).selected == ()


def test_adjusted_examples():
    np.testing.assert_allclose(by_adjusted_pvalues([0.001, 0.2, 0.9]), [0.0055, 0.55, 1.0])
    # equal p-values: the step-up minimum is attained at j = d, giving H_d * p
    np.testing.assert_allclose(by_adjusted_pvalues(np.full(4, 0.01)), 0.020833333333333332)
    np.testing.assert_allclose(by_adjusted_pvalues(np.full(3, 0.9)), 1.0)


def test_ties_at_boundary_all_selected():
    # both 0.005 values pass at rank 2 even though the first alone is under rank 1's cutoff
    res = by_fdr_select([0.005, 0.5, 0.005], 0.05)
    assert res.k == 2 and res.selected == (0, 2)


def test_errors():
    with pytest.raises(InvalidLevel):
        by_fdr_select([0.1], 0.0)
    with pytest.raises(InvalidLevel):
        by_fdr_select([0.1], 1.0)
    with pytest.raises(InvalidLevel):
        bonferroni_select([0.1], 1.5)
    with pytest.raises(InvalidPValue):
        by_fdr_select([0.1, 1.2], 0.05)
    with pytest.raises(InvalidPValue):
        by_adjusted_pvalues([np.nan])
    with pytest.raises(EmptyInput):
        by_fdr_select([], 0.05)


@given(pvectors, levels)
def test_step_up_soundness(p, q):
    res = by_fdr_select(p, q)
    assert res.k == brute_force_k(list(p), q)
    assert len(res.selected) == res.k
    assert set(res.selected) == set(int(i) for i in res.order[: res.k])
    if res.k:
        chosen = p[list(res.selected)]
        rest = np.delete(p, list(res.selected))
        assert rest.size == 0 or chosen.max() <= rest.min()
    assert np.all(np.diff(res.cutoffs) > 0)


def test_threshold_duality_random_vectors():
    rng = np.random.default_rng(2024)
    for _ in range(10_000):
        d = int(rng.integers(1, 20))
        # mix uniform noise with small p-values so both branches get exercised
        p = np.where(rng.random(d) < 0.4, rng.random(d) * 0.01, rng.random(d))
        q = float(rng.choice([0.01, 0.05, 0.1, 0.2]))
        adj = by_adjusted_pvalues(p)
        assert tuple(np.flatnonzero(adj <= q)) == by_fdr_select(p, q).selected


@given(pvectors, levels)
def test_threshold_duality(p, q):
    assert tuple(np.flatnonzero(by_adjusted_pvalues(p) <= q)) == by_fdr_select(p, q).selected


@given(pvectors, levels, st.data())
def test_monotone_in_single_pvalue(p, q, data):
    i = data.draw(st.integers(0, p.size - 1))
    lowered = p.copy()
    lowered[i] = data.draw(st.floats(0.0, float(p[i])))
    assert set(by_fdr_select(p, q).selected) <= set(by_fdr_select(lowered, q).selected)


@given(pvectors)
def test_adjusted_bounds_and_order(p):
    adj = by_adjusted_pvalues(p)
    assert np.all(adj >= p) and np.all(adj <= 1.0)
    order = np.argsort(p, kind="stable")
    assert np.all(np.diff(adj[order]) >= 0)


@pytest.mark.parametrize("d", [1, 2, 3, 5, 10, 11, 50])
def test_cutoff_comparison_per_rank(d):
    q = 0.05
    bon, by = bonferroni_cutoffs(d, q), by_cutoffs(d, q)
    ranks = np.arange(1, d + 1)
    np.testing.assert_array_equal(bon <= by * (1 + 1e-12), ranks >= harmonic(d) - 1e-12)


def test_select_variables_pipeline():
    series, panel = simulate_model(SimModel("select5", 1), 1500, 3)
    res = select_variables(series, panel, 1, 0.05)
    assert len(res.tests) == 5
    np.testing.assert_array_equal(res.p_values, [t.p_value for t in res.tests])
    assert res.selected == by_fdr_select(res.p_values, 0.05).selected
    assert {0, 2, 3} >= set(res.selected) >= {0}
    bon = select_variables(series, panel, 1, 0.05, method="bonferroni")
    assert bon.method == "bonferroni"
    with pytest.raises(ValueError):
        select_variables(series, panel, 1, 0.05, method="bh")
