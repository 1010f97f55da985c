import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from biasedselect.core import (
    Intersectional,
    NonIntersectional,
    build_structure,
    structure_from_matrix,
    structure_from_sizes,
)
from biasedselect.exceptions import (
    EnumerationTooLargeError,
    InfeasibleConstraintsError,
    UnsupportedGroupCountError,
    ValidationError,
    ZeroUtilityError,
)
from biasedselect.selection import (
    brute_force_select,
    select_biased,
    select_constrained,
    select_constrained_intersectional,
    select_constrained_nonintersectional,
    select_unconstrained,
    utility_ratio_single,
)
from biasedselect.verify import random_instance

from helpers import assert_top_k_per_cell


def test_unconstrained_sort():
    sel = select_unconstrained([0.1, 0.9, 0.5], 2)
    assert sel.chosen == (1, 2) and sel.latent_total == pytest.approx(1.4)
    assert select_unconstrained([0.3, 0.2], 2).chosen == (0, 1)


def test_ties_go_to_lower_index():
    assert select_unconstrained([0.5, 0.5, 0.5], 2).chosen == (0, 1)


def test_biased_worked_example():
    # item 0 sits in both groups with a compounded factor below 0.1
    s = build_structure(2, ["11", "00"])
    w = np.array([1.0, 0.1])
    w_hat = w * np.array([0.3 * 0.3, 1.0])
    sel = select_biased(w_hat, 1, s, latent=w)
    assert sel.chosen == (1,)
    star = select_unconstrained(w, 1, s)
    assert utility_ratio_single(w, sel, star) == pytest.approx(0.1)


def test_unbiased_matches_optimal(rng):
    w = rng.random(20)
    assert select_biased(w, 7).chosen == select_unconstrained(w, 7).chosen


def test_n_out_of_range():
    with pytest.raises(ValidationError):
        select_unconstrained([0.1, 0.2], 3)


def test_intersectional_zero_bounds_is_biased(rng):
    s = structure_from_matrix(rng.random((12, 2)) < 0.5)
    w_hat = rng.random(12)
    a = select_constrained_intersectional(w_hat, s, Intersectional({}), 5)
    assert a.chosen == select_biased(w_hat, 5, s).chosen


def test_intersectional_tight_bounds():
    s = structure_from_sizes({"11": 3, "10": 3, "01": 3, "00": 3})
    w_hat = np.array([0.9, 0.1, 0.5, 0.8, 0.7, 0.2, 0.3, 0.4, 0.6, 0.95, 0.05, 0.15])
    cons = Intersectional({"11": 1, "10": 2, "01": 1, "00": 1})
    sel = select_constrained_intersectional(w_hat, s, cons, 5)
    assert sel.counts == {"11": 1, "10": 2, "01": 1, "00": 1}
    assert_top_k_per_cell(sel, w_hat, s)


def test_nonintersectional_zero_bounds_is_biased(rng):
    s = structure_from_matrix(rng.random((12, 2)) < 0.5)
    w_hat = rng.random(12)
    a = select_constrained_nonintersectional(w_hat, s, NonIntersectional((0, 0)), 6)
    assert a.chosen == select_biased(w_hat, 6, s).chosen


def test_nonintersectional_pinned():
    s = structure_from_sizes({"11": 2, "10": 2, "01": 1, "00": 5})
    affected = sorted(set(s.group_members(0)) | set(s.group_members(1)))
    w_hat = np.full(10, 0.9)
    w_hat[affected] = 0.1
    sel = select_constrained_nonintersectional(w_hat, s, NonIntersectional((4, 3)), 5)
    assert list(sel.chosen) == affected


def test_nonintersectional_infeasible():
    s = structure_from_sizes({"10": 2, "01": 2, "00": 2}, 2)
    with pytest.raises(InfeasibleConstraintsError):
        select_constrained_nonintersectional(np.ones(6), s, NonIntersectional((2, 2)), 3)


def test_nonintersectional_p4_unsupported():
    s = structure_from_matrix(np.eye(4, dtype=bool))
    with pytest.raises(UnsupportedGroupCountError):
        select_constrained_nonintersectional(np.ones(4), s, NonIntersectional((1, 1, 1, 1)), 4)


def test_brute_force_examples():
    s = build_structure(4, ["1", "0", "1", "0"])
    assert brute_force_select([0.3, 0.9, 0.1, 0.5], s, None, 2).chosen == (1, 3)
    with pytest.raises(InfeasibleConstraintsError, match="no feasible subset"):
        brute_force_select([0.3, 0.9, 0.1, 0.5], s, NonIntersectional((3,)), 2)
    big = build_structure(40, ["1"] * 40)
    with pytest.raises(EnumerationTooLargeError):
        brute_force_select(np.ones(40), big, None, 20)


def test_zero_optimal_utility_signalled():
    s = build_structure(2, ["1", "0"])
    sel = select_unconstrained([0.0, 0.0], 1, s)
    with pytest.raises(ZeroUtilityError):
        utility_ratio_single([0.0, 0.0], sel, sel)


def test_random_ratio_in_unit_interval(rng):
    for _ in range(50):
        prob, w_hat, cons = random_instance(rng)
        w = rng.random(prob.m) + 1e-3
        sel = select_constrained(w_hat, prob.structure, cons, prob.n, latent=w)
        star = select_unconstrained(w, prob.n)
        brute = brute_force_select(w, prob.structure, None, prob.n)
        assert star.latent_total == brute.observed_total
        assert 0 < utility_ratio_single(w, sel, star) <= 1


@given(st.integers(0, 2**32 - 1))
def test_solvers_match_brute_force(seed):
    rng = np.random.default_rng(seed)
    prob, w_hat, cons = random_instance(rng)
    st_, n = prob.structure, prob.n
    fast = select_constrained(w_hat, st_, cons, n)
    slow = brute_force_select(w_hat, st_, cons, n)
    assert fast.observed_total == slow.observed_total
    assert_top_k_per_cell(fast, w_hat, st_)
    assert_top_k_per_cell(slow, w_hat, st_)
    biased = select_biased(w_hat, n, st_)
    assert fast.observed_total <= biased.observed_total
    assert biased.observed_total == brute_force_select(w_hat, st_, None, n).observed_total


@given(st.integers(0, 2**32 - 1))
def test_raising_a_bound_never_helps(seed):
    rng = np.random.default_rng(seed)
    prob, w_hat, cons = random_instance(rng)
    st_, n = prob.structure, prob.n
    base = select_constrained(w_hat, st_, cons, n).observed_total
    if isinstance(cons, NonIntersectional):
        ell = int(rng.integers(st_.p))
        raised = list(cons.bounds)
        raised[ell] += 1
        new = NonIntersectional(tuple(raised))
    else:
        sig = st_.signatures[int(rng.integers(len(st_.signatures)))]
        new = Intersectional({**cons.bounds, sig: cons.get(sig) + 1})
    try:
        after = select_constrained(w_hat, st_, new, n).observed_total
    except InfeasibleConstraintsError:
        return
    assert after <= base + 1e-12


@given(st.integers(0, 2**32 - 1), st.sampled_from([0.5, 3.0, 8.0, 1e-3]))
def test_scaling_leaves_choice_unchanged(seed, gamma):
    rng = np.random.default_rng(seed)
    prob, w_hat, cons = random_instance(rng)
    a = select_constrained(w_hat, prob.structure, cons, prob.n)
    b = select_constrained(w_hat * gamma, prob.structure, cons, prob.n)
    assert a.chosen == b.chosen


def test_p3_against_brute_force(rng):
    for _ in range(200):
        m = int(rng.integers(3, 11))
        s = structure_from_matrix(rng.random((m, 3)) < 0.5)
        n = int(rng.integers(1, m + 1))
        w_hat = rng.random(m)
        witness = rng.choice(m, n, replace=False)
        cons = NonIntersectional(tuple(int(v) for v in s.membership[witness].sum(axis=0)))
        assert math.isclose(
            select_constrained(w_hat, s, cons, n).observed_total,
            brute_force_select(w_hat, s, cons, n).observed_total,
            rel_tol=0,
            abs_tol=1e-12,
        )


def test_record_round_trip():
    s = build_structure(3, ["1", "0", "1"])
    sel = select_unconstrained([0.2, 0.5, 0.9], 2, s)
    rec = sel.to_record()
    assert rec["chosen"] == [1, 2] and rec["counts"] == {"1": 1, "0": 1}
    assert sel.mask(3).tolist() == [False, True, True]
