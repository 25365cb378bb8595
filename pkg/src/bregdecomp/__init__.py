"""Bregman decomposition of constrained-forecast regret.

Regret against an ideal forecast ``p*`` under two constraint families
(order sensitivity ``eps`` and latency ``lam``) is bounded below by an order
penalty ``g2``, a latency penalty ``g1`` and an interaction ``g12``.  This
package computes those pieces exactly for convex sets (:mod:`.decomposition`),
estimates them from 2x2 toggle experiments (:mod:`.empirical`), fits graded
penalty curves (:mod:`.calibration`) and wires it all into a CLI
(:mod:`.harness`, :mod:`.cli`).
"""

from .calibration import GradedObservation, MonotoneCurve, fit_penalty_surfaces, isotonic_fit
from .decomposition import (
    DecompositionReport,
    NcxPenalty,
    convexified_decompose,
    decompose,
    hull_of_box_union,
    lb_safe,
    penalty_ratio,
    verify_master,
    zeta_upper_bound,
)
from .empirical import (
    ComponentEstimates,
    Convention,
    RegimeTable,
    WeightedSample,
    cluster_bootstrap,
    dr_mean,
    empirical_lower_bound,
    ess_guardrail,
    estimate_components,
    ipw_mean,
    sutva_interval,
    truncation_bias_bound,
)
from .errors import (
    AssumptionViolation,
    BoundaryClampWarning,
    ConfigError,
    ConvergenceError,
    DomainError,
    SamplingError,
    UndefinedDiagnosticError,
)
from .potentials import GaussianNatural, NegativeEntropy, SquaredEuclidean, divergence, geodesic
from .sets import (
    AffineEquality,
    Box,
    Halfspace,
    Intersection,
    ProjectionOptions,
    SimplexSubset,
    gconvexity_check,
    normal_alignment,
    project,
    project_intersection,
    pythagorean_gap,
)

__version__ = "0.1.0"
