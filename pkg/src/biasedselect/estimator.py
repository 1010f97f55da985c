"""Scikit-learn style wrapper around the constrained selectors."""

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.exceptions import NotFittedError

from .core import (
    Intersectional,
    NonIntersectional,
    SelectionProblem,
    design_intersectional,
    no_constraints,
    proportional_nonintersectional,
    structure_from_matrix,
)
from .exceptions import ValidationError
from .selection import select_constrained, select_unconstrained, utility_ratio_single
from .validation import check_memberships, check_utilities


class ConstrainedSelector(BaseEstimator):
    """Pick ``n`` items under lower-bound constraints.

    ``fit`` takes the ``(m, p)`` 0/1 group-membership matrix and fixes the
    constraints; ``predict`` takes one observed score per item and returns
    a 0/1 selection mask.

    Parameters
    ----------
    n : int
        Number of items to select.
    constraint : {"intersectional", "proportional", "none"}
        ``"intersectional"`` designs per-cell bounds from ``epsilon``;
        ``"proportional"`` uses per-group bounds ``floor(|G_l| n / m)``.
    epsilon : float
        Slack for the intersectional design, in ``(0, 1)``.
    bounds : sequence or dict, optional
        Explicit per-group (sequence) or per-cell (dict) bounds; overrides
        ``constraint``.
    """

    def __init__(self, n=1, constraint="intersectional", epsilon=0.05, bounds=None):
        self.n = n
        self.constraint = constraint
        self.epsilon = epsilon
        self.bounds = bounds

    def fit(self, X, y=None):
        X = check_memberships(X)
        self.structure_ = structure_from_matrix(X)
        self.problem_ = SelectionProblem(self.structure_, self.n)
        if self.bounds is not None:
            if isinstance(self.bounds, dict):
                cons = Intersectional(dict(self.bounds))
            else:
                cons = NonIntersectional(tuple(int(b) for b in self.bounds))
        elif self.constraint == "intersectional":
            cons = design_intersectional(self.problem_, self.epsilon)
        elif self.constraint == "proportional":
            cons = proportional_nonintersectional(self.problem_)
        elif self.constraint == "none":
            cons = no_constraints(self.problem_)
        else:
            raise ValidationError(f"unknown constraint kind {self.constraint!r}")
        cons.validate(self.problem_)
        self.constraints_ = cons
        self.n_features_in_ = X.shape[1]
        return self

    def _check_fitted(self):
        if not hasattr(self, "constraints_"):
            raise NotFittedError("ConstrainedSelector is not fitted yet; call fit first")

    def predict(self, scores):
        self._check_fitted()
        scores = check_utilities(scores, name="scores", nonnegative=False)
        sel = select_constrained(scores, self.structure_, self.constraints_, self.problem_.n)
        return sel.mask(self.structure_.m).astype(np.int64)

    def score(self, scores, latent):
        """Latent utility of ``predict(scores)`` relative to the latent optimum."""
        self._check_fitted()
        latent = check_utilities(latent, name="latent utilities")
        sel = select_constrained(scores, self.structure_, self.constraints_, self.problem_.n, latent=latent)
        return utility_ratio_single(latent, sel, select_unconstrained(latent, self.problem_.n))
