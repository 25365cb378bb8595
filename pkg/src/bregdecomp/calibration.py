"""Monotone penalty curves from graded experiments.

When the latency level ``lam`` and order sensitivity ``eps`` are varied in
steps, ``g1(lam)`` is fit on the ``eps = 0`` slice and ``g2(eps)`` on the
``lam = 0`` slice by weighted isotonic regression.  Whatever the two
marginal curves leave unexplained on the observed grid is reported as the
interaction residual, without clipping, so that it can be checked against
subadditivity bounds.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import Iterable, NamedTuple, Sequence

import numpy as np

SLICE_TOL = 1e-12


@dataclass(frozen=True)
class GradedObservation:
    lam: float
    eps: float
    loss: float
    weight: float = 1.0

    def __post_init__(self):
        if not (self.lam >= 0 and self.eps >= 0):
            raise ValueError("lam and eps must be >= 0")
        if not (self.weight > 0 and math.isfinite(self.weight)):
            raise ValueError("weight must be finite and > 0")
        if not math.isfinite(self.loss):
            raise ValueError("loss must be finite")


@dataclass(frozen=True, eq=False)
class MonotoneCurve:
    """Nondecreasing step function through ``(knots[i], values[i])``.

    Evaluation is right-continuous: ``curve(x)`` is the value at the largest
    knot ``<= x``, and the curve is flat beyond either end.
    """

    knots: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        k = np.asarray(self.knots, dtype=float)
        v = np.asarray(self.values, dtype=float)
        if k.ndim != 1 or k.shape != v.shape or k.size == 0:
            raise ValueError("knots and values must be equal-length, nonempty vectors")
        if np.any(np.diff(k) <= 0):
            raise ValueError("knots must be strictly increasing")
        object.__setattr__(self, "knots", k)
        object.__setattr__(self, "values", v)

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        i = np.clip(np.searchsorted(self.knots, x, side="right") - 1, 0, self.knots.size - 1)
        out = self.values[i]
        return float(out) if out.ndim == 0 else out

    def shifted(self, delta: float) -> "MonotoneCurve":
        return MonotoneCurve(self.knots, self.values - delta)

    def to_dict(self):
        return {"knots": self.knots.tolist(), "values": self.values.tolist()}


def pool_ties(xs, ys, weights):
    """Collapse repeated x values into one point with the weighted mean y."""
    xs = np.asarray(xs, dtype=float)
    ys = np.asarray(ys, dtype=float)
    w = np.asarray(weights, dtype=float)
    ux, inv = np.unique(xs, return_inverse=True)
    wsum = np.bincount(inv, weights=w)
    ymean = np.bincount(inv, weights=w * ys) / wsum
    return ux, ymean, wsum


def pav(ys, weights) -> np.ndarray:
    """Weighted least-squares nondecreasing fit of an ordered sequence."""
    means: list[float] = []
    wts: list[float] = []
    sizes: list[int] = []
    for y, w in zip(ys, weights):
        means.append(float(y))
        wts.append(float(w))
        sizes.append(1)
        while len(means) > 1 and means[-2] > means[-1]:
            w_new = wts[-2] + wts[-1]
            m_new = (wts[-2] * means[-2] + wts[-1] * means[-1]) / w_new
            sizes[-2] += sizes[-1]
            means[-2], wts[-2] = m_new, w_new
            del means[-1], wts[-1], sizes[-1]
    return np.repeat(means, sizes)


def isotonic_fit(xs: Sequence[float], ys: Sequence[float], weights: Sequence[float] | None = None,
                 direction: str = "nondecreasing") -> MonotoneCurve:
    """Pool-adjacent-violators fit; ties in ``xs`` are pooled first.

    Raises:
        ValueError: length mismatch, empty input or a nonpositive weight.
    """
    if direction != "nondecreasing":
        raise ValueError("only nondecreasing fits are supported")
    xs = np.asarray(xs, dtype=float)
    ys = np.asarray(ys, dtype=float)
    w = np.ones_like(xs) if weights is None else np.asarray(weights, dtype=float)
    if xs.ndim != 1 or xs.shape != ys.shape or xs.shape != w.shape:
        raise ValueError("xs, ys and weights must have equal lengths")
    if xs.size == 0:
        raise ValueError("need at least one point")
    if np.any(~(w > 0)) or not np.all(np.isfinite(w)):
        raise ValueError("weights must be finite and > 0")
    ux, uy, uw = pool_ties(xs, ys, w)
    return MonotoneCurve(ux, pav(uy, uw))


def weighted_sse(curve: MonotoneCurve, xs, ys, weights=None) -> float:
    ys = np.asarray(ys, dtype=float)
    w = np.ones_like(ys) if weights is None else np.asarray(weights, dtype=float)
    return float(np.sum(w * (ys - curve(xs)) ** 2))


# -- surfaces --------------------------------------------------------------


class ResidualGrid(NamedTuple):
    lams: np.ndarray
    epss: np.ndarray
    values: np.ndarray  # shape (len(lams), len(epss)); NaN where the cell was not observed

    def to_dict(self):
        return {
            "lams": self.lams.tolist(),
            "epss": self.epss.tolist(),
            "values": [[None if math.isnan(v) else float(v) for v in row] for row in self.values],
        }


class PenaltySurfaces(NamedTuple):
    g1_curve: MonotoneCurve
    g2_curve: MonotoneCurve
    interaction_residual: ResidualGrid


def _marginal(lam, eps, loss, w, on_slice, covariate, name, other):
    mask = np.abs(on_slice) <= SLICE_TOL
    if np.unique(covariate[mask]).size < 2:
        raise ValueError(
            f"cannot identify {name}: need at least two distinct {name[3:-1]} values "
            f"on the {other}=0 slice, found {np.unique(covariate[mask]).size}"
        )
    curve = isotonic_fit(covariate[mask], loss[mask], w[mask])
    if abs(curve.knots[0]) <= SLICE_TOL:
        curve = curve.shifted(curve.values[0])
    return curve


def fit_penalty_surfaces(obs: Iterable[GradedObservation]) -> PenaltySurfaces:
    """Fit ``g1(lam)`` and ``g2(eps)`` and the residual interaction grid.

    Both curves are shifted so that they vanish at the origin when the
    origin is observed.  The residual at each observed ``(lam, eps)`` cell
    is the weighted mean loss minus ``g1(lam) + g2(eps)`` minus the baseline
    loss, the mean loss of the origin cell (0 when the origin is not
    observed).
    """
    obs = list(obs)
    if not obs:
        raise ValueError("no observations")
    lam = np.array([o.lam for o in obs])
    eps = np.array([o.eps for o in obs])
    loss = np.array([o.loss for o in obs])
    w = np.array([o.weight for o in obs])
    g1 = _marginal(lam, eps, loss, w, eps, lam, "g1(lam)", "eps")
    g2 = _marginal(lam, eps, loss, w, lam, eps, "g2(eps)", "lam")

    lams = np.unique(lam)
    epss = np.unique(eps)
    i = np.searchsorted(lams, lam)
    j = np.searchsorted(epss, eps)
    shape = (lams.size, epss.size)
    wsum = np.zeros(shape)
    wloss = np.zeros(shape)
    np.add.at(wsum, (i, j), w)
    np.add.at(wloss, (i, j), w * loss)
    with np.errstate(invalid="ignore", divide="ignore"):
        mean = np.where(wsum > 0, wloss / wsum, np.nan)
    origin = abs(lams[0]) <= SLICE_TOL and abs(epss[0]) <= SLICE_TOL
    baseline = mean[0, 0] if origin else 0.0
    resid = mean - baseline - g1(lams)[:, None] - g2(epss)[None, :]
    return PenaltySurfaces(g1, g2, ResidualGrid(lams, epss, resid))


def read_graded_csv(path) -> list[GradedObservation]:
    """Read ``lam,eps,loss,weight``.

    ``weight`` may be blank (taken as 1).  A file with ``tau`` and ``Delta``
    columns instead of ``lam`` gets ``lam = tau / Delta``.
    """
    out = []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        fields = set(reader.fieldnames or ())
        ratio = "lam" not in fields and {"tau", "Delta"} <= fields
        needed = {"eps", "loss"} | ({"tau", "Delta"} if ratio else {"lam"})
        if needed - fields:
            raise ValueError(f"{path}: missing columns {sorted(needed - fields)}")
        for lineno, row in enumerate(reader, start=2):
            try:
                lam = float(row["tau"]) / float(row["Delta"]) if ratio else float(row["lam"])
                weight = (row.get("weight") or "").strip()
                out.append(GradedObservation(lam, float(row["eps"]), float(row["loss"]),
                                             float(weight) if weight else 1.0))
            except (TypeError, ValueError, ZeroDivisionError) as exc:
                raise ValueError(f"{path}, line {lineno}: {exc}") from None
    return out
