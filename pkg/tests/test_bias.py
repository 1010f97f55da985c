import numpy as np
import pytest
from hypothesis import given, strategies as st

from biasedselect.bias import (
    GeneralBias,
    MonotonePiecewiseLinear,
    MultiplicativeBias,
    PowerOfProduct,
    assumption2_check,
    from_dict,
    interaction_gap,
    observed_utilities,
)
from biasedselect.core import build_structure, make_balanced_problem, structure_from_matrix
from biasedselect.distributions import TruncatedNormal, TruncatedPowerLaw, Uniform
from biasedselect.exceptions import ValidationError

from helpers import ADDITIVE


def test_intersection_factor():
    s = build_structure(2, ["11", "00"])
    w_hat = observed_utilities([1.0, 1.0], s, MultiplicativeBias((0.9, 0.8)))
    assert w_hat[0] == pytest.approx(0.72, abs=1e-15) and w_hat[1] == 1.0


def test_no_bias_identity(rng):
    s = build_structure(5, ["11", "10", "01", "00", "11"])
    w = rng.random(5)
    assert np.array_equal(observed_utilities(w, s, MultiplicativeBias((1, 1))), w)


def test_power_of_product():
    s = build_structure(1, ["11"])
    bias = GeneralBias({"11": PowerOfProduct(2)}, beta=(0.5, 0.5))
    assert observed_utilities([1.0], s, bias)[0] == pytest.approx(0.0625)


def test_compounding_is_exact():
    b = MultiplicativeBias((0.3, 0.7))
    assert b.cell_factor("11") == 0.3 * 0.7 and b.cell_factor("00") == 1.0


def test_rejects_flat_piecewise():
    s = build_structure(1, ["10"])
    bias = GeneralBias({"10": MonotonePiecewiseLinear(((0, 0), (0.5, 0.5), (1, 0.5)))})
    with pytest.raises(ValidationError, match="not strictly increasing"):
        observed_utilities([0.2], s, bias)


def test_bias_width_checked():
    s = build_structure(2, ["1", "0"])
    with pytest.raises(ValidationError):
        observed_utilities([0.1, 0.2], s, MultiplicativeBias((0.5, 0.5)))
    with pytest.raises(ValidationError):
        MultiplicativeBias((0.0, 0.5))


@given(st.integers(0, 2**31 - 1), st.floats(0.01, 1.0), st.floats(0.01, 1.0))
def test_order_preserved_and_dominated(seed, b1, b2):
    rng = np.random.default_rng(seed)
    X = rng.random((30, 2)) < 0.5
    s = structure_from_matrix(X)
    w = rng.random(30)
    for bias in (MultiplicativeBias((b1, b2)), ADDITIVE):
        w_hat = observed_utilities(w, s, bias)
        for items in s.cells.values():
            idx = np.array(items)
            assert np.array_equal(np.argsort(w[idx]), np.argsort(w_hat[idx]))
    assert np.all(observed_utilities(w, s, MultiplicativeBias((b1, b2))) <= w)


def test_interaction_gap_multiplicative():
    prob = make_balanced_problem(8, 2, None, 4)
    assert interaction_gap(MultiplicativeBias((0.5, 0.5)), Uniform(), prob) == pytest.approx(0.125)
    assert interaction_gap(MultiplicativeBias((1.0, 0.3)), Uniform(), prob) == 0.0
    tn = TruncatedNormal()
    z = float(tn.quantile(0.5))
    assert interaction_gap(MultiplicativeBias((0.2, 0.6)), tn, prob) == pytest.approx(z * 0.8 * 0.4)


def test_interaction_gap_additive_is_zero():
    prob = make_balanced_problem(16, 2, None, 5)
    for dist in (Uniform(), TruncatedNormal()):
        assert abs(interaction_gap(ADDITIVE, dist, prob)) < 1e-15


def test_interaction_gap_needs_two_groups():
    with pytest.raises(ValidationError):
        interaction_gap(MultiplicativeBias((0.5,)), Uniform(), make_balanced_problem(4, 1, None, 2))


def test_assumption2_multiplicative():
    rep = assumption2_check(MultiplicativeBias((0.4, 0.5)), Uniform())
    assert rep.passed and rep.c == 1.0 and rep.d == pytest.approx(0.2)


def test_assumption2_decreasing_fails():
    bias = GeneralBias({"11": MonotonePiecewiseLinear(((0, 1), (1, 0)))})
    rep = assumption2_check(bias, Uniform())
    assert not rep.passed and rep.reasons


def test_assumption2_power_half():
    bias = GeneralBias({s: PowerOfProduct(0.5) for s in ("11", "10", "01", "00")}, beta=(0.25, 0.25))
    rep = assumption2_check(bias, Uniform())
    assert rep.passed
    assert rep.d == pytest.approx((0.25 * 0.25) ** 0.5)


def test_assumption2_unbounded_is_a_value():
    rep = assumption2_check(MultiplicativeBias((0.5, 0.5)), TruncatedPowerLaw(2.5, 1.0, float("inf")))
    assert not rep.passed


def test_from_dict_round_trip():
    for bias in (MultiplicativeBias((0.2, 0.9)), ADDITIVE, GeneralBias({"11": PowerOfProduct(2)}, beta=(0.5, 0.5))):
        assert from_dict(bias.to_dict()) == bias
    with pytest.raises(ValidationError):
        from_dict({"kind": "additive"})
