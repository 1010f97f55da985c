"""Subset selection under intersectional implicit bias.

Exact constrained selection solvers, bias models, a constraint designer for
per-intersection lower bounds, the large-market continuous programs and
seeded Monte Carlo estimates of the utility ratio.
"""

from .asymptotics import (
    AllocationVector,
    BoundReport,
    f_value,
    limit_utility_ratio,
    max_limit_ratio,
    prop89_bound,
    solve_program1,
    solve_program2,
    thm1_bound,
    thm3_bound,
)
from .bias import GeneralBias, MonotonePiecewiseLinear, MultiplicativeBias, PowerOfProduct, observed_utilities
from .core import (
    GroupStructure,
    Intersectional,
    NonIntersectional,
    SelectionProblem,
    build_structure,
    check_feasibility,
    design_intersectional,
    make_balanced_problem,
    proportional_nonintersectional,
    structure_from_sizes,
)
from .distributions import TruncatedNormal, TruncatedPowerLaw, Uniform
from .estimator import ConstrainedSelector
from .exceptions import BiasedSelectError, InfeasibleConstraintsError, ValidationError
from .montecarlo import RatioEstimate, estimate_utility_ratio, sweep_nonintersectional
from .selection import (
    Selection,
    brute_force_select,
    select_biased,
    select_constrained,
    select_unconstrained,
)

__version__ = "0.1.0"
