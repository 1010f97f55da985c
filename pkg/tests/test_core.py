from fractions import Fraction
import json

import numpy as np
import pytest
from hypothesis import given, strategies as st

from biasedselect.core import (
    Intersectional,
    NonIntersectional,
    SelectionProblem,
    all_signatures,
    build_structure,
    check_feasibility,
    constraints_from_dict,
    constraints_to_dict,
    design_intersectional,
    make_balanced_problem,
    problem_from_dict,
    problem_to_dict,
    proportional_nonintersectional,
    require_feasible,
    structure_from_matrix,
    structure_from_sizes,
)
from biasedselect.exceptions import InfeasibleConstraintsError, UnsupportedGroupCountError, ValidationError


def test_one_item_per_cell():
    s = build_structure(4, ["11", "10", "01", "00"])
    assert s.cell_sizes() == {"11": 1, "10": 1, "01": 1, "00": 1}
    assert s.cells["11"] == (0,)


def test_two_items_per_cell():
    s = build_structure(8, ["00", "01", "10", "11"] * 2)
    assert all(v == 2 for v in s.cell_sizes().values())
    assert sum(s.cell_sizes().values()) == 8
    assert s.cells["01"] == (1, 5)


def test_all_unaffected_items():
    s = build_structure(6, ["00"] * 6)
    assert s.cell_sizes() == {"00": 6}
    assert s.group_size(0) == 0 and s.group_size(1) == 0


def test_structure_errors():
    with pytest.raises(ValidationError):
        build_structure(0, [])
    with pytest.raises(ValidationError):
        structure_from_matrix(np.zeros((3, 0)))
    with pytest.raises(ValidationError):
        build_structure(2, ["1"])


def test_signature_order():
    assert all_signatures(2) == ["11", "10", "01", "00"]


@given(st.integers(1, 30), st.integers(1, 4), st.integers(0, 2**31 - 1))
def test_cells_partition_items(m, p, seed):
    X = np.random.default_rng(seed).random((m, p)) < 0.5
    s = structure_from_matrix(X)
    items = sorted(i for cell in s.cells.values() for i in cell)
    assert items == list(range(m))
    assert all(len(c) > 0 for c in s.cells.values())
    assert len(s.cells) <= min(2**p, m)


def test_balanced_problem_quarter_cells():
    prob = make_balanced_problem(200, 2, {s: Fraction(1, 4) for s in all_signatures(2)}, 100)
    assert all(v == 50 for v in prob.structure.cell_sizes().values())
    assert prob.eta == Fraction(1, 2) and prob.rho == Fraction(1, 4)


def test_balanced_problem_single_group():
    prob = make_balanced_problem(10, 1, {"1": 0.5, "0": 0.5}, 5)
    assert prob.structure.group_size(0) == 5


def test_balanced_problem_uneven():
    prob = make_balanced_problem(12, 2, {"11": "1/3", "10": "1/3", "01": "1/6", "00": "1/6"}, 6)
    assert prob.structure.cell_sizes() == {"11": 4, "10": 4, "01": 2, "00": 2}


def test_balanced_problem_errors():
    with pytest.raises(ValidationError):
        make_balanced_problem(10, 2, {s: 0.25 for s in all_signatures(2)}, 5)
    with pytest.raises(ValidationError):
        make_balanced_problem(8, 2, None, 9)


def test_design_balanced():
    prob = make_balanced_problem(200, 2, None, 100)
    cons = design_intersectional(prob, 0.1)
    assert cons.bounds == {s: 25 for s in all_signatures(2)}
    assert not cons.capped


def test_design_cap():
    prob = SelectionProblem(structure_from_sizes({"11": 1, "10": 1, "01": 1, "00": 97}), 100)
    cons = design_intersectional(prob, 0.5)
    assert [cons.get(s) for s in ("11", "10", "01")] == [1, 1, 1]
    assert cons.capped == frozenset({"11", "10", "01"})
    assert cons.get("00") == 61  # 48.5 + 12.5


def test_design_uneven_cells():
    prob = SelectionProblem(structure_from_sizes({"11": 40, "10": 40, "01": 160, "00": 160}), 100)
    cons = design_intersectional(prob, 0.2)
    assert [cons.get(s) for s in ("11", "10", "01", "00")] == [13, 13, 37, 37]
    assert cons.total() <= 100


def test_design_rejects_bad_epsilon():
    prob = make_balanced_problem(8, 2, None, 4)
    for eps in (0, 1, -0.1, 1.5):
        with pytest.raises(ValidationError):
            design_intersectional(prob, eps)


@given(
    st.lists(st.integers(1, 60), min_size=4, max_size=4),
    st.floats(0.01, 0.99),
    st.floats(0.05, 1.0),
)
def test_design_properties(sizes, eps, frac):
    st_ = structure_from_sizes(dict(zip(all_signatures(2), sizes)))
    n = max(1, int(frac * st_.m))
    prob = SelectionProblem(st_, n)
    cons = design_intersectional(prob, eps)
    assert cons.total() <= n
    e = Fraction(str(eps))
    for sig, size in st_.cell_sizes().items():
        assert cons.get(sig) <= size
        floor_prop = int((1 - e) * n * Fraction(size, st_.m))
        assert cons.get(sig) >= min(floor_prop, size)
    if not cons.capped:
        raw = sum(Fraction(s, st_.m) * n * (1 - e) + Fraction(n, 4) * e for s in sizes)
        assert raw == n


def test_proportional_bounds():
    prob = make_balanced_problem(200, 2, None, 100)
    assert proportional_nonintersectional(prob).bounds == (50, 50)
    prob = SelectionProblem(structure_from_sizes({"01": 3, "00": 3}, 2), 3)
    assert proportional_nonintersectional(prob).bounds[0] == 0
    prob = SelectionProblem(structure_from_sizes({"1": 7, "0": 3}), 3)
    assert proportional_nonintersectional(prob).bounds == (2,)


def test_feasibility_examples():
    prob = make_balanced_problem(8, 2, None, 4)
    assert check_feasibility(prob, Intersectional({s: 1 for s in all_signatures(2)}))
    big = SelectionProblem(structure_from_sizes({"11": 5, "10": 2, "01": 2, "00": 1}), 4)
    assert check_feasibility(big, NonIntersectional((4, 4)))
    no_shared = SelectionProblem(structure_from_sizes({"10": 4, "01": 4, "00": 2}, 2), 4)
    verdict = check_feasibility(no_shared, NonIntersectional((4, 4)))
    assert not verdict and verdict.reason
    with pytest.raises(InfeasibleConstraintsError):
        require_feasible(no_shared, NonIntersectional((4, 4)))


def test_feasibility_over_budget():
    prob = make_balanced_problem(8, 2, None, 3)
    assert not check_feasibility(prob, Intersectional({s: 1 for s in all_signatures(2)}))


def test_empty_group_needs_zero_bound():
    prob = SelectionProblem(structure_from_sizes({"01": 3, "00": 3}, 2), 3)
    assert not check_feasibility(prob, NonIntersectional((1, 0)))
    assert check_feasibility(prob, NonIntersectional((0, 2)))


def test_large_p_unsupported():
    prob = make_balanced_problem(16, 4, None, 4)
    with pytest.raises(UnsupportedGroupCountError):
        check_feasibility(prob, NonIntersectional((1, 1, 1, 1)))


def test_serialization_round_trip():
    prob = SelectionProblem(structure_from_sizes({"11": 2, "10": 3, "01": 1, "00": 4}), 5)
    cons = design_intersectional(prob, 0.5)
    for explicit in (False, True):
        doc = json.loads(json.dumps(problem_to_dict(prob, cons, explicit=explicit)))
        back, cons2 = problem_from_dict(doc)
        assert back.structure == prob.structure and back.n == prob.n and cons2 == cons
    nc = NonIntersectional((1, 2))
    assert constraints_from_dict(constraints_to_dict(nc)) == nc
