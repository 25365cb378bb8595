"""Sequential lower-bound decomposition of constrained regret.

For a target ``p*`` and two constraint sets the decomposition is

* ``a = Pi_eps(p*)``           order penalty   ``g2 = D(p* || a)``
* ``b = Pi_lam(a)``            latency penalty ``g1 = D(a || b)``
* ``Pi_joint(b)``              interaction     ``g12 = D(b || Pi_joint(b))``

and ``g2 + g1 + g12 <= D(p* || q)`` for every ``q`` feasible for both sets.
The same machinery runs on convex relaxations of nonconvex sets, and a few
small helpers turn the components and nonconvexity allowances into a safe
reported bound.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

import numpy as np

from .errors import AssumptionViolation
from .potentials import NegativeEntropy, Potential
from .sets import (
    Box,
    ConstraintSet,
    ProjectionOptions,
    contains,
    is_feasible,
    is_mirror_convex,
    project,
    project_intersection,
)

ORTHOGONALITY_TOL = 1e-8
MASTER_TOL = 1e-7


@dataclass
class DecompositionReport:
    g2: float
    g1: float
    g12: float
    a: np.ndarray
    b: np.ndarray
    joint: np.ndarray
    interaction_point: np.ndarray
    orthogonality_residual: float
    p_star: np.ndarray
    warnings: list = field(default_factory=list)
    conservative: bool = False
    hull_is_exact: bool | None = None
    set_eps: ConstraintSet | None = field(default=None, repr=False)
    set_lam: ConstraintSet | None = field(default=None, repr=False)

    @property
    def total(self) -> float:
        return self.g2 + self.g1 + self.g12

    @property
    def orthogonal(self) -> bool:
        return self.orthogonality_residual <= ORTHOGONALITY_TOL

    def to_dict(self) -> dict:
        out = {
            "g2": self.g2,
            "g1": self.g1,
            "g12": self.g12,
            "total": self.total,
            "a": self.a.tolist(),
            "b": self.b.tolist(),
            "joint": self.joint.tolist(),
            "interaction_point": self.interaction_point.tolist(),
            "orthogonality_residual": self.orthogonality_residual,
            "orthogonal": self.orthogonal,
            "p_star": self.p_star.tolist(),
            "conservative": self.conservative,
            "warnings": list(self.warnings),
        }
        if self.hull_is_exact is not None:
            out["hull_is_exact"] = self.hull_is_exact
        return out


def _floor(v: float) -> float:
    # divergences are nonnegative; anything below is rounding
    return max(0.0, float(v))


def decompose(phi: Potential, set_eps: ConstraintSet, set_lam: ConstraintSet, p_star,
              opts: ProjectionOptions | None = None) -> DecompositionReport:
    """Order, latency and interaction penalties for ``p_star``.

    Raises:
        AssumptionViolation: the two sets do not intersect (on the simplex,
            for the entropy potential).
        ConvergenceError: an iterative projection ran out of budget.
    """
    p_star = phi.check(p_star)
    simplex = isinstance(phi, NegativeEntropy)
    if not is_feasible([set_eps, set_lam], simplex=simplex):
        raise AssumptionViolation("constraint sets have an empty intersection; the interaction term is undefined")
    notes = []
    for name, s in (("eps", set_eps), ("lam", set_lam)):
        if not is_mirror_convex(phi, s):
            notes.append(
                f"set_{name} is not certified convex in mirror coordinates; "
                "the lower-bound guarantee may fail (probe with gconvexity_check)"
            )

    a = project(phi, set_eps, p_star, opts)
    b = project(phi, set_lam, a, opts)
    both = [set_eps, set_lam]
    interaction_point = project_intersection(phi, both, b, opts)
    joint = project_intersection(phi, both, p_star, opts)
    return DecompositionReport(
        g2=_floor(phi.divergence(p_star, a)),
        g1=_floor(phi.divergence(a, b)),
        g12=_floor(phi.divergence(b, interaction_point)),
        a=a,
        b=b,
        joint=joint,
        interaction_point=interaction_point,
        orthogonality_residual=_floor(phi.divergence(b, joint)),
        p_star=p_star,
        warnings=notes,
        set_eps=set_eps,
        set_lam=set_lam,
    )


class MasterCheck(NamedTuple):
    min_slack: float
    violations: list


def verify_master(phi: Potential, report: DecompositionReport, feasible_samples: Sequence,
                  tol: float = MASTER_TOL, feas_tol: float = 1e-9) -> MasterCheck:
    """Check ``D(p*||q) >= g2 + g1 + D(b||q)`` on each sample ``q``.

    Returns the smallest slack and the indices of samples whose slack is
    below ``-tol``.  Samples must be feasible for both sets when the report
    carries them.
    """
    if len(feasible_samples) == 0:
        raise ValueError("need at least one sample")
    slacks = []
    for i, q in enumerate(feasible_samples):
        q = phi.check(q)
        for s in (report.set_eps, report.set_lam):
            if s is not None and not contains(s, q, feas_tol):
                raise ValueError(f"sample {i} is not feasible")
        slacks.append(phi.divergence(report.p_star, q) - (report.g2 + report.g1 + phi.divergence(report.b, q)))
    slacks = np.array(slacks)
    return MasterCheck(float(slacks.min()), [int(i) for i in np.flatnonzero(slacks < -tol)])


# -- nonconvex sets --------------------------------------------------------


def convexified_decompose(phi: Potential, hull_eps: ConstraintSet, hull_lam: ConstraintSet, p_star,
                          opts: ProjectionOptions | None = None, hull_is_exact: bool | None = None
                          ) -> DecompositionReport:
    """:func:`decompose` on convex relaxations of the true sets.

    The caller asserts the hulls contain the true sets.  The result is a
    valid lower bound on the regret of every point feasible for the true
    sets, and is flagged ``conservative``.
    """
    report = decompose(phi, hull_eps, hull_lam, p_star, opts)
    report.conservative = True
    report.hull_is_exact = hull_is_exact
    return report


def hull_of_box_union(boxes: Sequence[Box]) -> Box:
    """Smallest box containing every member box."""
    if not boxes:
        raise ValueError("need at least one box")
    lo = np.min([b.lo for b in boxes], axis=0)
    hi = np.max([b.hi for b in boxes], axis=0)
    return Box(lo, hi)


def box_hull_is_exact(boxes: Sequence[Box], max_dim: int = 16) -> bool:
    """True when the bounding box is the closed convex hull of the union.

    That happens exactly when every corner of the bounding box lies in some
    member box (corners at infinity compare in the extended reals).
    """
    hull = hull_of_box_union(boxes)
    if hull.dim > max_dim:
        raise ValueError(f"corner enumeration limited to dimension {max_dim}")
    for corner in itertools.product(*zip(hull.lo, hull.hi)):
        c = np.array(corner)
        if not any(np.all(b.lo <= c) and np.all(c <= b.hi) for b in boxes):
            return False
    return True


def box_union_oracle_regret(phi: Potential, boxes_eps: Sequence[Box], boxes_lam: Sequence[Box], p_star,
                            opts: ProjectionOptions | None = None) -> float:
    """Smallest ``D(p*||q)`` over ``q`` in (union eps) and (union lam).

    The feasible set is the union of pairwise box intersections, so the
    minimum is found by projecting onto each nonempty pair and keeping the
    best.
    """
    best = math.inf
    for be, bl in itertools.product(boxes_eps, boxes_lam):
        if not is_feasible([be, bl], simplex=isinstance(phi, NegativeEntropy)):
            continue
        q = project_intersection(phi, [be, bl], p_star, opts)
        best = min(best, phi.divergence(p_star, q))
    if math.isinf(best):
        raise AssumptionViolation("box unions do not intersect")
    return best


# -- robust reporting ------------------------------------------------------


@dataclass(frozen=True)
class NcxPenalty:
    delta_relax: float
    zeta: float
    delta_emp: float

    def __post_init__(self):
        for name in ("delta_relax", "zeta", "delta_emp"):
            v = getattr(self, name)
            if not (v >= 0 and math.isfinite(v)):
                raise ValueError(f"{name} must be finite and >= 0, got {v!r}")

    @property
    def total(self) -> float:
        return self.delta_relax + self.zeta + self.delta_emp


def delta_relax(original_total: float, convexified_total: float) -> float:
    """Bound lost to relaxation, floored at 0."""
    return max(0.0, original_total - convexified_total)


def zeta_upper_bound(rho: float, alpha: float, g2: float, g1: float, c_const: float, kappa_hat: float,
                     d_lam: float, d_eps: float) -> float:
    """``(rho/alpha)(g2 + g1) + c * kappa_hat * (d_lam * d_eps)**2``.

    ``rho`` is the prox-regularity modulus, ``alpha`` the strong-convexity
    constant of the potential.  ``c_const`` and ``kappa_hat`` have no
    defaults on purpose: both are problem-dependent.
    """
    if not alpha > 0:
        raise ValueError("alpha must be positive")
    for name, v in (("rho", rho), ("c_const", c_const), ("kappa_hat", kappa_hat)):
        if v < 0:
            raise ValueError(f"{name} must be >= 0")
    return (rho / alpha) * (g2 + g1) + c_const * kappa_hat * (d_lam * d_eps) ** 2


def lb_safe(g1: float, g2: float, g12: float, delta_ncx: float) -> float:
    if delta_ncx < 0:
        raise ValueError("delta_ncx must be >= 0")
    return max(0.0, g1 + g2 + g12 - delta_ncx)


class PenaltyRatio(NamedTuple):
    r: float
    verdict: str


def penalty_ratio(delta_ncx: float, g1: float, g2: float, g12: float, eps: float = 1e-9) -> PenaltyRatio:
    """``delta_ncx / (g1 + g2 + g12 + eps)`` with a verdict.

    ``r <= 0.5`` is informative, ``0.5 < r <= 1`` borderline, ``r > 1``
    vacuous.
    """
    if not eps > 0:
        raise ValueError("eps must be positive")
    if delta_ncx < 0:
        raise ValueError("delta_ncx must be >= 0")
    r = delta_ncx / (g1 + g2 + g12 + eps)
    if r <= 0.5:
        verdict = "informative"
    elif r <= 1.0:
        verdict = "borderline"
    else:
        verdict = "vacuous"
    return PenaltyRatio(r, verdict)
