"""Closed convex feasibility sets and Bregman projections onto them.

Projections follow the right-argument convention used for regret,
``Pi_C(x) = argmin_{q in C} D(x || q)``.  Under :class:`SquaredEuclidean`
the divergence is symmetric and the projections are the usual (weighted)
orthogonal ones.  Under :class:`NegativeEntropy` every set is implicitly
intersected with the open simplex and the projection is computed by
coordinate ascent on the dual of the homogenised linear program (one
scalar root per constraint per sweep).

The generalised Pythagorean inequality
``D(p || q) >= D(p || Pi(p)) + D(Pi(p) || q)`` is guaranteed for sets that
are convex in mirror coordinates.  Every convex set qualifies under the
quadratic potential; for the simplex see :func:`is_mirror_convex`.
"""

from __future__ import annotations

import itertools
import math
import warnings
from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np
from scipy.optimize import brentq, linprog

from .errors import (
    AssumptionViolation,
    BoundaryClampWarning,
    ConvergenceError,
    DomainError,
    SamplingError,
    UndefinedDiagnosticError,
)
from .potentials import GaussianNatural, NegativeEntropy, Potential, SquaredEuclidean, geodesic

__all__ = [
    "AffineEquality",
    "Box",
    "ConstraintSet",
    "GConvexityReport",
    "Halfspace",
    "Intersection",
    "ProjectionOptions",
    "SimplexSubset",
    "contains",
    "gconvexity_check",
    "is_feasible",
    "is_mirror_convex",
    "normal_alignment",
    "project",
    "project_intersection",
    "pythagorean_gap",
    "sample_feasible",
    "set_from_dict",
]


@dataclass(frozen=True)
class ProjectionOptions:
    max_iterations: int = 10_000
    tolerance: float = 1e-9
    interior_margin: float = 1e-12

    def __post_init__(self):
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")
        if not self.tolerance > 0:
            raise ValueError("tolerance must be positive")
        if self.interior_margin < 0:
            raise ValueError("interior_margin must be nonnegative")


DEFAULT_OPTIONS = ProjectionOptions()


class LinearForm(NamedTuple):
    """``G x <= h`` and ``A x == c``."""

    G: np.ndarray
    h: np.ndarray
    A: np.ndarray
    c: np.ndarray


class ConstraintSet:
    dim: int

    def linear_form(self) -> LinearForm:
        raise NotImplementedError

    def violation(self, x) -> float:
        """Largest constraint violation at ``x`` (0 when feasible)."""
        x = np.asarray(x, dtype=float)
        if x.shape != (self.dim,):
            raise DomainError(f"point has shape {x.shape}, set has dimension {self.dim}")
        G, h, A, c = self.linear_form()
        worst = 0.0
        if len(h):
            worst = max(worst, float(np.max(G @ x - h)))
        if len(c):
            worst = max(worst, float(np.max(np.abs(A @ x - c))))
        return worst

    def to_dict(self) -> dict:
        raise NotImplementedError


def _vec(v, name) -> np.ndarray:
    arr = np.atleast_1d(np.asarray(v, dtype=float))
    if arr.ndim != 1:
        raise ValueError(f"{name} must be a vector")
    return arr


def _empty_form(d):
    return LinearForm(np.zeros((0, d)), np.zeros(0), np.zeros((0, d)), np.zeros(0))


@dataclass(frozen=True, eq=False)
class Halfspace(ConstraintSet):
    """``<a, x> <= b``."""

    a: np.ndarray
    b: float

    def __post_init__(self):
        a = _vec(self.a, "a")
        if not np.all(np.isfinite(a)) or not np.any(a != 0):
            raise ValueError("halfspace normal must be finite and nonzero")
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", float(self.b))

    @property
    def dim(self):
        return self.a.size

    def linear_form(self):
        d = self.dim
        return LinearForm(self.a[None, :], np.array([self.b]), np.zeros((0, d)), np.zeros(0))

    def to_dict(self):
        return {"kind": "halfspace", "a": self.a.tolist(), "b": self.b}


@dataclass(frozen=True, eq=False)
class Box(ConstraintSet):
    """``lo <= x <= hi`` componentwise; infinite bounds allowed."""

    lo: np.ndarray
    hi: np.ndarray

    def __post_init__(self):
        lo, hi = _vec(self.lo, "lo"), _vec(self.hi, "hi")
        if lo.shape != hi.shape:
            raise ValueError("lo and hi must have the same length")
        if np.any(np.isnan(lo)) or np.any(np.isnan(hi)) or np.any(lo > hi):
            raise ValueError("box needs lo <= hi componentwise")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    @classmethod
    def everything(cls, dim: int) -> "Box":
        return cls(np.full(dim, -np.inf), np.full(dim, np.inf))

    @property
    def dim(self):
        return self.lo.size

    def linear_form(self):
        d = self.dim
        eye = np.eye(d)
        up = np.isfinite(self.hi)
        down = np.isfinite(self.lo)
        G = np.vstack([eye[up], -eye[down]])
        h = np.concatenate([self.hi[up], -self.lo[down]])
        return LinearForm(G, h, np.zeros((0, d)), np.zeros(0))

    def to_dict(self):
        return {"kind": "box", "lo": _json_bounds(self.lo), "hi": _json_bounds(self.hi)}


@dataclass(frozen=True, eq=False)
class AffineEquality(ConstraintSet):
    """``A x = c``; the system must be consistent."""

    A: np.ndarray
    c: np.ndarray

    def __post_init__(self):
        A = np.atleast_2d(np.asarray(self.A, dtype=float))
        c = _vec(self.c, "c")
        if A.shape[0] != c.size:
            raise ValueError("A and c disagree on the number of equations")
        sol, *_ = np.linalg.lstsq(A, c, rcond=None)
        if np.max(np.abs(A @ sol - c), initial=0.0) > 1e-9 * max(1.0, np.max(np.abs(c), initial=0.0)):
            raise ValueError("inconsistent affine system")
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "c", c)

    @property
    def dim(self):
        return self.A.shape[1]

    def linear_form(self):
        d = self.dim
        return LinearForm(np.zeros((0, d)), np.zeros(0), self.A, self.c)

    def to_dict(self):
        return {"kind": "affine", "A": self.A.tolist(), "c": self.c.tolist()}


@dataclass(frozen=True, eq=False)
class SimplexSubset(ConstraintSet):
    """Probability vectors with per-coordinate bounds ``lo <= x <= hi``."""

    lo: np.ndarray
    hi: np.ndarray

    def __post_init__(self):
        lo, hi = _vec(self.lo, "lo"), _vec(self.hi, "hi")
        if lo.shape != hi.shape:
            raise ValueError("lo and hi must have the same length")
        if np.any(lo < 0) or np.any(hi > 1) or np.any(lo > hi):
            raise ValueError("simplex bounds must satisfy 0 <= lo <= hi <= 1")
        if lo.sum() > 1 + 1e-12 or hi.sum() < 1 - 1e-12:
            raise ValueError("bounds exclude every probability vector")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    @property
    def dim(self):
        return self.lo.size

    def linear_form(self):
        d = self.dim
        eye = np.eye(d)
        up = self.hi < 1
        down = self.lo > 0
        G = np.vstack([eye[up], -eye[down]])
        h = np.concatenate([self.hi[up], -self.lo[down]])
        return LinearForm(G, h, np.ones((1, d)), np.ones(1))

    def to_dict(self):
        return {"kind": "simplex_subset", "lo": self.lo.tolist(), "hi": self.hi.tolist()}


@dataclass(frozen=True, eq=False)
class Intersection(ConstraintSet):
    """Intersection of member sets; nonemptiness is checked when built."""

    sets: tuple

    def __post_init__(self):
        members = []
        for s in self.sets:
            members.extend(s.sets if isinstance(s, Intersection) else [s])
        if not members:
            raise ValueError("intersection needs at least one set")
        dims = {s.dim for s in members}
        if len(dims) != 1:
            raise ValueError(f"member sets disagree on dimension: {sorted(dims)}")
        object.__setattr__(self, "sets", tuple(members))
        if not is_feasible(members):
            raise AssumptionViolation("constraint sets have an empty intersection; the interaction term is undefined")

    @property
    def dim(self):
        return self.sets[0].dim

    def linear_form(self):
        forms = [s.linear_form() for s in self.sets]
        return LinearForm(
            np.vstack([f.G for f in forms]),
            np.concatenate([f.h for f in forms]),
            np.vstack([f.A for f in forms]),
            np.concatenate([f.c for f in forms]),
        )

    def to_dict(self):
        return {"kind": "intersection", "sets": [s.to_dict() for s in self.sets]}


def _json_bounds(v):
    return [None if not np.isfinite(x) else float(x) for x in v]


def _from_json_bounds(v, fill):
    return np.array([fill if x is None else float(x) for x in v], dtype=float)


def set_from_dict(spec: dict) -> ConstraintSet:
    """Inverse of ``ConstraintSet.to_dict``."""
    kind = spec.get("kind")
    if kind == "halfspace":
        return Halfspace(spec["a"], spec["b"])
    if kind == "box":
        return Box(_from_json_bounds(spec["lo"], -np.inf), _from_json_bounds(spec["hi"], np.inf))
    if kind == "affine":
        return AffineEquality(spec["A"], spec["c"])
    if kind == "simplex_subset":
        return SimplexSubset(spec["lo"], spec["hi"])
    if kind == "everything":
        return Box.everything(int(spec["dim"]))
    if kind == "intersection":
        return Intersection(tuple(set_from_dict(s) for s in spec["sets"]))
    raise ValueError(f"unknown set kind {kind!r}")


def contains(cset: ConstraintSet, x, tol: float = 1e-9) -> bool:
    return cset.violation(x) <= tol


def _members(sets) -> list:
    if isinstance(sets, ConstraintSet):
        sets = [sets]
    out = []
    for s in sets:
        out.extend(s.sets if isinstance(s, Intersection) else [s])
    return out


def is_feasible(sets, simplex: bool = False, margin: float = 0.0) -> bool:
    """LP feasibility of the intersection (optionally with the simplex)."""
    members = _members(sets)
    d = members[0].dim
    forms = [s.linear_form() for s in members]
    G = np.vstack([f.G for f in forms])
    h = np.concatenate([f.h for f in forms])
    A = np.vstack([f.A for f in forms])
    c = np.concatenate([f.c for f in forms])
    if simplex:
        A = np.vstack([A, np.ones((1, d))])
        c = np.concatenate([c, [1.0]])
        bounds = [(margin, None)] * d
    else:
        bounds = [(None, None)] * d
    res = linprog(
        np.zeros(d),
        A_ub=G if len(h) else None,
        b_ub=h if len(h) else None,
        A_eq=A if len(c) else None,
        b_eq=c if len(c) else None,
        bounds=bounds,
        method="highs",
    )
    return res.status == 0


# -- single-set projections ------------------------------------------------


def _euclid_single(phi: SquaredEuclidean, cset: ConstraintSet, x: np.ndarray) -> np.ndarray:
    w = phi.w
    if isinstance(cset, Halfspace):
        viol = cset.a @ x - cset.b
        if viol <= 0:
            return x.copy()
        direction = cset.a / w
        return x - (viol / (cset.a @ direction)) * direction
    if isinstance(cset, Box):
        return np.clip(x, cset.lo, cset.hi)
    if isinstance(cset, AffineEquality):
        A = cset.A
        resid = A @ x - cset.c
        gram = (A / w) @ A.T
        lam, *_ = np.linalg.lstsq(gram, resid, rcond=None)
        return x - (A.T @ lam) / w
    if isinstance(cset, SimplexSubset):
        lo, hi = cset.lo, cset.hi

        def excess(tau):
            return np.clip(x - tau / w, lo, hi).sum() - 1.0

        t_lo = float(np.min(w * (x - hi))) - 1.0
        t_hi = float(np.max(w * (x - lo))) + 1.0
        tau = brentq(excess, t_lo, t_hi, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=500)
        return np.clip(x - tau / w, lo, hi)
    raise TypeError(f"unsupported set {type(cset).__name__}")


def _homogenised_rows(sets, d) -> tuple[list[np.ndarray], list[bool]]:
    """Linear rows rewritten as ``<c, q> <= 0`` / ``== 0`` on the simplex."""
    rows, is_eq = [], []
    for s in _members(sets):
        G, h, A, c = s.linear_form()
        for g, hj in zip(G, h):
            rows.append(g - hj)
            is_eq.append(False)
        for a, cj in zip(A, c):
            rows.append(a - cj)
            is_eq.append(True)
    keep = [i for i, r in enumerate(rows) if np.max(np.abs(r)) > 1e-15]
    return [rows[i] for i in keep], [is_eq[i] for i in keep]


def _kl_violation(sets, q) -> float:
    return max(s.violation(q) for s in _members(sets))


def _scalar_root(fn, lower, upper, lower_open, upper_open):
    """Root of a decreasing function on (lower, upper); endpoints may be +-inf
    or open poles where ``fn`` diverges."""
    # shrink towards the poles until the sign is right
    if math.isinf(lower):
        a = -1.0
        while fn(a) <= 0:
            a *= 2.0
            if a < -1e300:
                raise ConvergenceError("dual multiplier diverged", np.array([a]), float("inf"))
    elif lower_open:
        a, k = lower, 0
        span = (upper if math.isfinite(upper) else lower + 1.0) - lower
        while True:
            k += 1
            a = lower + span * 0.5**k
            if fn(a) > 0:
                break
            if k > 1100:
                raise ConvergenceError("cannot bracket dual multiplier", np.array([a]), float("inf"))
    else:
        a = lower
    if math.isinf(upper):
        b = 1.0 if a < 1.0 else 2.0 * a
        while fn(b) >= 0:
            b *= 2.0
            if b > 1e300:
                raise ConvergenceError("dual multiplier diverged (set may be empty)", np.array([b]), float("inf"))
    elif upper_open:
        b, k = upper, 0
        span = upper - a
        while True:
            k += 1
            b = upper - span * 0.5**k
            if fn(b) < 0:
                break
            if k > 1100:
                raise ConvergenceError("cannot bracket dual multiplier", np.array([b]), float("inf"))
    else:
        b = upper
    return brentq(fn, a, b, xtol=1e-300, rtol=4 * np.finfo(float).eps, maxiter=1000)


NEWTON_EVERY = 10


def _kl_dual_value(x, C, nu) -> float:
    z = 1.0 + nu @ C
    if np.any(z <= 0):
        return -math.inf
    return float(np.sum(x * np.log(z)))


def _kl_kkt_ok(q, C, is_eq, nu, tol) -> bool:
    g = C @ q
    feas = np.where(is_eq, np.abs(g), g)
    return bool(np.all(feas <= tol) and np.all(np.abs(nu * g) <= tol) and np.all(nu[~is_eq] >= 0)
                and abs(q.sum() - 1.0) <= tol)


def _kl_newton(x, C, is_eq, nu, max_steps: int = 50):
    """Projected Newton ascent on the same dual, from ``nu``.

    Coordinate ascent crawls when two active constraints are nearly
    parallel; a few Newton steps on the free multipliers finish the job.
    Inequality multipliers are kept ``>= 0`` by clipping, with a
    backtracking line search on the dual value.
    """
    nu = nu.copy()
    value = _kl_dual_value(x, C, nu)
    for _ in range(max_steps):
        z = 1.0 + nu @ C
        q = x / z
        g = C @ q
        free = is_eq | (nu > 0) | (g > 0)
        if not free.any():
            break
        Cf = C[free]
        H = (Cf * (q * q / x)) @ Cf.T
        step = np.linalg.lstsq(H, g[free], rcond=None)[0]
        direction = np.zeros_like(nu)
        direction[free] = step
        t, accepted = 1.0, False
        while t > 1e-12:
            trial = nu + t * direction
            trial[~is_eq] = np.maximum(trial[~is_eq], 0.0)
            v = _kl_dual_value(x, C, trial)
            if v >= value - 1e-15 * max(1.0, abs(value)):
                accepted = True
                break
            t *= 0.5
        if not accepted:
            break
        moved = float(np.max(np.abs(trial - nu)))
        nu, value = trial, v
        if moved <= 1e-15 * max(1.0, float(np.max(np.abs(nu)))):
            break
    return nu


def _kl_coordinate_ascent(x, rows, is_eq, sets, opts: ProjectionOptions, on_sweep=None):
    """Maximise ``sum x log(1 + C^T nu)`` over ``nu`` (>= 0 on inequality rows).

    The minimiser of the generalised KL divergence over the homogenised cone
    is ``q = x / (1 + C^T nu)``, which sums to one at the optimum, so the
    simplex constraint needs no multiplier of its own.  Every few sweeps a
    projected Newton polish is tried and kept if it satisfies the KKT
    conditions to the tolerance.
    """
    d = x.size
    C = np.array(rows)
    eq_mask = np.array(is_eq, dtype=bool)
    mult = np.zeros(len(rows))
    s = np.zeros(d)
    q = x.copy()
    for sweep in range(opts.max_iterations):
        if sweep % NEWTON_EVERY == NEWTON_EVERY - 1:
            polished = _kl_newton(x, C, eq_mask, mult)
            z = 1.0 + polished @ C
            if np.all(z > 0):
                qp = x / z
                if _kl_kkt_ok(qp, C, eq_mask, polished, opts.tolerance) and \
                        _kl_violation(sets, qp / qp.sum()) <= opts.tolerance:
                    if on_sweep is not None:
                        on_sweep(sweep, qp)
                    return qp / qp.sum()
        q_prev = q
        for j, (c, eq) in enumerate(zip(rows, is_eq)):
            base = 1.0 + s
            xc = x * c

            def slope(t, base=base, c=c, xc=xc):
                return float(np.sum(xc / (base + t * c)))

            pos, neg = c > 0, c < 0
            t_low = float(np.max(-base[pos] / c[pos])) if pos.any() else -math.inf
            t_high = float(np.min(-base[neg] / c[neg])) if neg.any() else math.inf
            g0 = slope(0.0)
            if g0 == 0.0:
                continue
            if not eq and -mult[j] > t_low and g0 < 0 and slope(-mult[j]) <= 0:
                t = -mult[j]
            elif g0 > 0:
                t = _scalar_root(slope, 0.0, t_high, False, True)
            elif eq or -mult[j] <= t_low:
                t = _scalar_root(slope, t_low, 0.0, True, False)
            else:
                t = _scalar_root(slope, -mult[j], 0.0, False, False)
            mult[j] += t
            s = s + t * c
        q = x / (1.0 + s)
        if on_sweep is not None:
            on_sweep(sweep, q)
        change = float(np.max(np.abs(q - q_prev)))
        qn = q / q.sum()
        resid = max(abs(q.sum() - 1.0), _kl_violation(sets, qn))
        if change <= opts.tolerance and resid <= opts.tolerance:
            return qn
    raise ConvergenceError("KL projection did not converge", q / q.sum(), max(change, resid))


def _clamp_interior(q, margin):
    if np.any(q < margin):
        warnings.warn(
            f"projection touched the simplex boundary; clamped to {margin:g} and renormalised",
            BoundaryClampWarning,
            stacklevel=3,
        )
        low = q < margin
        q = q.copy()
        q[~low] *= (1.0 - margin * low.sum()) / q[~low].sum()
        q[low] = margin
    return q


def _kl_project(phi: NegativeEntropy, sets, x, opts, on_sweep=None):
    members = _members(sets)
    if all(s.violation(x) <= 0.0 for s in members):
        return x.copy()
    if not is_feasible(members, simplex=True):
        raise AssumptionViolation("constraint sets do not meet the probability simplex")
    rows, is_eq = _homogenised_rows(members, x.size)
    q = _kl_coordinate_ascent(x, rows, is_eq, members, opts, on_sweep=on_sweep)
    return _clamp_interior(q, opts.interior_margin)


def _unsupported(phi):
    return NotImplementedError(
        f"projections are implemented for SquaredEuclidean and NegativeEntropy, not {phi!r}"
    )


def project(phi: Potential, cset: ConstraintSet, x, opts: ProjectionOptions | None = None) -> np.ndarray:
    """Bregman projection ``argmin_{q in cset} D(x || q)``.

    Returns ``x`` itself (a copy) when it is already feasible.
    """
    opts = opts or DEFAULT_OPTIONS
    x = phi.check(x)
    if isinstance(cset, Intersection):
        return project_intersection(phi, list(cset.sets), x, opts)
    if cset.dim != phi.dim:
        raise DomainError(f"set dimension {cset.dim} does not match potential dimension {phi.dim}")
    if isinstance(phi, SquaredEuclidean):
        if cset.violation(x) <= 0.0:
            return x.copy()
        return _euclid_single(phi, cset, x)
    if isinstance(phi, NegativeEntropy):
        return _kl_project(phi, [cset], x, opts)
    raise _unsupported(phi)


def project_intersection(phi: Potential, sets: Sequence[ConstraintSet], x, opts: ProjectionOptions | None = None,
                         on_sweep=None) -> np.ndarray:
    """Projection onto the intersection of ``sets``.

    Quadratic potential: cyclic Dykstra over the member sets, one additive
    correction per set.  Negative entropy: cyclic dual coordinate ascent over
    the members' linear constraints, where each multiplier plays the role of
    that constraint's correction term.  A single set is handed straight to
    :func:`project`.

    ``on_sweep(k, iterate)`` is called after every full sweep, if given.
    """
    opts = opts or DEFAULT_OPTIONS
    x = phi.check(x)
    members = _members(sets)
    if not members:
        return x.copy()
    for s in members:
        if s.dim != phi.dim:
            raise DomainError(f"set dimension {s.dim} does not match potential dimension {phi.dim}")
    if isinstance(phi, NegativeEntropy):
        return _kl_project(phi, members, x, opts, on_sweep=on_sweep)
    if not isinstance(phi, SquaredEuclidean):
        raise _unsupported(phi)
    if len(members) == 1:
        q = project(phi, members[0], x, opts)
        if on_sweep is not None:
            on_sweep(0, q)
        return q
    if not is_feasible(members):
        raise AssumptionViolation("constraint sets have an empty intersection; the interaction term is undefined")
    u = x.copy()
    corrections = [np.zeros_like(x) for _ in members]
    for sweep in range(opts.max_iterations):
        u_prev = u
        for i, s in enumerate(members):
            y = u + corrections[i]
            u = _euclid_single(phi, s, y) if s.violation(y) > 0 else y.copy()
            corrections[i] = y - u
        if on_sweep is not None:
            on_sweep(sweep, u)
        change = float(np.max(np.abs(u - u_prev)))
        resid = max(s.violation(u) for s in members)
        if change <= opts.tolerance and resid <= opts.tolerance:
            return u
    raise ConvergenceError("Dykstra iteration did not converge", u, max(change, resid))


def pythagorean_gap(phi: Potential, p, cset: ConstraintSet, q, opts: ProjectionOptions | None = None,
                    tol: float = 1e-9) -> float:
    """``D(p||q) - D(p||Pi(p)) - D(Pi(p)||q)`` for feasible ``q``."""
    q = phi.check(q)
    if not contains(cset, q, tol):
        raise ValueError("q is not in the set")
    proj = project(phi, cset, p, opts)
    return phi.divergence(p, q) - phi.divergence(p, proj) - phi.divergence(proj, q)


# -- mirror convexity ------------------------------------------------------


def is_mirror_convex(phi: Potential, cset: ConstraintSet) -> bool:
    """Sufficient structural test for convexity along mirror geodesics.

    Quadratic potentials: every convex set.  Negative entropy: the set is
    certified when every homogenised inequality ``<c, q> <= 0`` has at most
    one negative coefficient (ratio and lower-bound constraints) and every
    equality is a two-term ratio.  A ``False`` answer means "not certified",
    not "proved non-convex"; use :func:`gconvexity_check` to probe.
    """
    if isinstance(phi, SquaredEuclidean):
        return True
    if isinstance(phi, NegativeEntropy):
        if phi.dim == 2:
            return True
        rows, is_eq = _homogenised_rows(_members(cset), phi.dim)
        for c, eq in zip(rows, is_eq):
            negatives = int(np.sum(c < 0))
            positives = int(np.sum(c > 0))
            if eq and not (negatives <= 1 and positives <= 1):
                return False
            if not eq and negatives > 1:
                return False
        return True
    return False


class GConvexityReport(NamedTuple):
    fraction_feasible: float
    worst_violation: float


def _bounding_box(members, d):
    lo = np.full(d, -np.inf)
    hi = np.full(d, np.inf)
    for s in members:
        if isinstance(s, (Box, SimplexSubset)):
            lo = np.maximum(lo, s.lo)
            hi = np.minimum(hi, s.hi)
    return lo, hi


def _tight_box(G, h, A, c, lo, hi):
    """Shrink ``[lo, hi]`` to the extent of the polyhedron inside it (per-coordinate LPs)."""
    d = lo.size
    bounds = [(None if math.isinf(a) else a, None if math.isinf(b) else b) for a, b in zip(lo, hi)]
    lo, hi = lo.copy(), hi.copy()
    for i in range(d):
        for sign, target in ((1.0, lo), (-1.0, hi)):
            cost = np.zeros(d)
            cost[i] = sign
            res = linprog(cost, A_ub=G if len(h) else None, b_ub=h if len(h) else None,
                          A_eq=A if len(c) else None, b_eq=c if len(c) else None, bounds=bounds, method="highs")
            if res.status == 0:
                target[i] = res.x[i]
            elif res.status == 2:  # infeasible inside the box: leave it to rejection to report
                return lo, hi
    return lo, hi


def sample_feasible(phi: Potential, cset, n: int, rng: np.random.Generator, scale: float = 1.0,
                    box: tuple | None = None, max_attempts: int = 200, tol: float = 1e-9,
                    allow_projection: bool = True) -> np.ndarray:
    """Draw ``n`` feasible points by rejection, topping up with projections.

    Candidates come from Dirichlet(1) on the simplex (entropy potential, or
    any set containing a :class:`SimplexSubset`), otherwise uniformly from
    ``box`` (or the set's own finite bounding box), shrunk by linear
    programs to the set's extent, and from ``N(0, scale^2 I)`` on unbounded
    coordinates.  When the set has
    equality constraints, candidates are first moved orthogonally onto its
    affine hull.  Points still missing after ``max_attempts`` rounds are
    replaced by projections of fresh candidates when ``allow_projection`` is
    set.
    """
    members = _members(cset)
    d = phi.dim
    if box is None:
        box = _bounding_box(members, d)
    lo, hi = (np.asarray(box[0], dtype=float), np.asarray(box[1], dtype=float))
    finite = np.isfinite(lo) & np.isfinite(hi)
    G, h, A, c = _members_form(members)
    on_simplex = isinstance(phi, NegativeEntropy) or any(isinstance(s, SimplexSubset) for s in members)
    if isinstance(phi, NegativeEntropy):
        A = np.vstack([A, np.ones((1, d))])
        c = np.concatenate([c, [1.0]])
    A_pinv = np.linalg.pinv(A) if len(c) else None
    if not on_simplex and (len(h) or len(c)):
        lo, hi = _tight_box(G, h, A, c, lo, hi)
        finite = np.isfinite(lo) & np.isfinite(hi)

    def candidates(k):
        if on_simplex:
            z = rng.dirichlet(np.ones(d), size=k)
        else:
            z = rng.normal(scale=scale, size=(k, d))
            if finite.any():
                z[:, finite] = rng.uniform(lo[finite], hi[finite], size=(k, int(finite.sum())))
            if isinstance(phi, GaussianNatural):
                z[:, 1] = np.abs(z[:, 1]) + 1e-3
        if A_pinv is not None:
            z = z - (z @ A.T - c) @ A_pinv.T
        return z

    def feasible(z):
        ok = np.ones(len(z), dtype=bool)
        if len(h):
            ok &= np.all(z @ G.T - h <= tol, axis=1)
        if len(c):
            ok &= np.all(np.abs(z @ A.T - c) <= tol, axis=1)
        if isinstance(phi, NegativeEntropy):
            ok &= np.all(z > 1e-9, axis=1)
        return ok

    out = []
    for _ in range(max_attempts):
        z = candidates(max(4 * n, 16))
        good = z[feasible(z)]
        if isinstance(phi, NegativeEntropy):
            good = good / good.sum(axis=1, keepdims=True)
        out.extend(good[: n - len(out)])
        if len(out) >= n:
            return np.array(out)
    if not allow_projection:
        raise SamplingError(f"only {len(out)} of {n} feasible points after {max_attempts} rounds")
    try:
        target = Intersection(tuple(members)) if len(members) > 1 else members[0]
        while len(out) < n:
            z = candidates(1)[0]
            if isinstance(phi, NegativeEntropy) and not np.all(z > 1e-9):
                continue
            out.append(project(phi, target, z))
    except NotImplementedError as exc:
        raise SamplingError(f"only {len(out)} of {n} feasible points and projection is unavailable") from exc
    return np.array(out)


def gconvexity_check(phi: Potential, cset: ConstraintSet, n_pairs: int, n_t: int, rng_seed: int,
                     scale: float = 1.0, tol: float = 1e-9) -> GConvexityReport:
    """Sample feasible pairs and test whether mirror geodesics between them stay feasible."""
    if n_pairs < 1 or n_t < 1:
        raise ValueError("n_pairs and n_t must be >= 1")
    rng = np.random.default_rng(rng_seed)
    pts = sample_feasible(phi, cset, 2 * n_pairs, rng, scale=scale, tol=tol)
    ts = np.linspace(0.0, 1.0, n_t) if n_t > 1 else np.array([0.5])
    inside = 0
    worst = 0.0
    for x, y in zip(pts[:n_pairs], pts[n_pairs:]):
        for t in ts:
            v = cset.violation(geodesic(phi, x, y, float(t)))
            worst = max(worst, v)
            inside += v <= tol
    return GConvexityReport(inside / (n_pairs * ts.size), worst)


# -- normal alignment ------------------------------------------------------


def _active_normals(cset, x, tol):
    G, h, A, c = _members_form(cset)
    normals = [g for g, hj in zip(G, h) if abs(g @ x - hj) <= tol * max(1.0, abs(hj))]
    normals.extend(A)
    return normals


def _members_form(cset):
    forms = [s.linear_form() for s in _members(cset)]
    return (np.vstack([f.G for f in forms]), np.concatenate([f.h for f in forms]),
            np.vstack([f.A for f in forms]), np.concatenate([f.c for f in forms]))


def normal_alignment(phi: Potential, set_a: ConstraintSet, set_b: ConstraintSet, x, tol: float = 1e-7) -> float:
    """Largest |cosine| between active normals of the two sets at ``x``.

    Normals are compared in the inverse-Hessian metric (the Riemannian
    gradient of each constraint under ``G = Hess Phi(x)``); on the simplex
    they are first projected onto the tangent space, which makes the cosine
    the correlation of the two normals under ``x``.  0 means orthogonal,
    1 parallel.
    """
    x = phi.check(x)
    if isinstance(phi, NegativeEntropy):
        def inner(u, v):
            return float(np.sum(x * (u - x @ u) * (v - x @ v)))
    else:
        h_inv = np.linalg.inv(phi.hessian(x))

        def inner(u, v):
            return float(u @ h_inv @ v)

    def usable(normals):
        return [n for n in normals if inner(n, n) > 1e-24]

    na = usable(_active_normals(set_a, x, tol))
    nb = usable(_active_normals(set_b, x, tol))
    if not na or not nb:
        raise UndefinedDiagnosticError("no active constraint on one of the sets at this point")
    best = 0.0
    for u, v in itertools.product(na, nb):
        cos = abs(inner(u, v)) / math.sqrt(inner(u, u) * inner(v, v))
        best = max(best, cos)
    return min(best, 1.0)
