import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from biasedselect.estimator import ConstrainedSelector
from biasedselect.exceptions import InfeasibleConstraintsError, ValidationError
from biasedselect.selection import descending_order


@pytest.fixture
def memberships(rng):
    return (rng.random((40, 2)) < 0.5).astype(int)


def test_params_and_clone():
    sel = ConstrainedSelector(n=5, constraint="proportional")
    assert sel.get_params() == {"n": 5, "constraint": "proportional", "epsilon": 0.05, "bounds": None}
    twin = clone(sel)
    assert twin.get_params() == sel.get_params() and twin is not sel


def test_fit_predict_meets_design(memberships, rng):
    sel = ConstrainedSelector(n=20, epsilon=0.2).fit(memberships)
    mask = sel.predict(rng.random(40))
    assert mask.sum() == 20 and set(np.unique(mask)) <= {0, 1}
    sigs = sel.structure_.item_signatures()
    for sig, L in sel.constraints_.bounds.items():
        assert sum(mask[i] for i in range(40) if sigs[i] == sig) >= L


def test_none_is_top_n(memberships, rng):
    scores = rng.random(40)
    mask = ConstrainedSelector(n=7, constraint="none").fit(memberships).predict(scores)
    assert set(np.flatnonzero(mask)) == set(descending_order(scores)[:7].tolist())


def test_score_is_ratio(memberships, rng):
    w = rng.random(40)
    sel = ConstrainedSelector(n=10, constraint="proportional").fit(memberships)
    assert sel.score(w, w) == pytest.approx(1.0)
    assert 0 < sel.score(w * (1 - 0.9 * memberships[:, 0]), w) <= 1


def test_explicit_bounds(memberships):
    sel = ConstrainedSelector(n=10, bounds=[3, 2]).fit(memberships)
    assert sel.constraints_.bounds == (3, 2)
    with pytest.raises(InfeasibleConstraintsError):
        ConstrainedSelector(n=10, bounds={"11": 10_000}).fit(memberships)


def test_not_fitted_and_bad_kind(memberships):
    with pytest.raises(NotFittedError):
        ConstrainedSelector(n=3).predict(np.ones(40))
    with pytest.raises(ValidationError):
        ConstrainedSelector(n=3, constraint="quota").fit(memberships)
