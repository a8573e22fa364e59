"""Rare-set entrance and finite-time ruin for discounted multivariate claims under renewal arrivals."""

__version__ = "0.1.0"

from .asymptotic import AsymptoticSpec, mrv_poisson_closed_form, rhs_detail, rhs_integral, uniformity_profile, x_for_level
from .claimvec import (
    FGM,
    ClaimVectorModel,
    Comonotone,
    GaussianCopula,
    Independent,
    RotationalSimplex,
    TailFunctional,
    fa_tail,
    sample_claim,
    weighted_sum_tail_check,
)
from .geometry import DirectionList, HalfSpaceSum, OrthantUnion, RuinSet, contains, ruin_to_rare, ya
from .marginals import ExponentialTail, LogPareto, Lognormal, Pareto, PointMass, WeibullHeavy
from .mc import (
    EstimatorResult,
    Scenario,
    estimate_entrance,
    estimate_entrance_is,
    estimate_ruin,
    ratio_table,
    ratio_table_at_level,
    simulate_discounted_claims,
)
from .renewal import Deterministic, Exponential, ShiftedExponential, UniformShifted, renewal_function, sample_arrivals
