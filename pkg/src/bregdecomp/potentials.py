"""Legendre potentials, mirror maps and Bregman divergences.

Three potentials are provided:

* :class:`SquaredEuclidean` -- ``0.5 * sum(w * x**2)`` on R^d, optional
  positive diagonal metric ``w``.
* :class:`NegativeEntropy` -- ``sum(x * log x)`` on the open probability
  simplex; its divergence is the Kullback-Leibler divergence.
* :class:`GaussianNatural` -- negative differential entropy of N(m, v),
  written as a function of the mean coordinates ``(E[Y], E[Y^2])``.  Points
  are passed as ``(m, v)``; the divergence is the Gaussian KL.

The module-level functions (:func:`potential_value`, :func:`gradient`, ...)
are thin wrappers so call sites read the same regardless of the variant.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NewType

import numpy as np
from scipy.special import logsumexp, softmax

from .errors import DomainError

Point = NewType("Point", np.ndarray)
DualPoint = NewType("DualPoint", np.ndarray)

SIMPLEX_SUM_TOL = 1e-12
BOUNDARY_MARGIN = 1e-12


class Potential:
    """Base class.  Subclasses implement the primal/dual maps."""

    dim: int
    on_simplex: bool = False

    def check(self, x) -> np.ndarray:
        raise NotImplementedError

    def value(self, x) -> float:
        raise NotImplementedError

    def gradient(self, x) -> DualPoint:
        raise NotImplementedError

    def gradient_inverse(self, d) -> Point:
        raise NotImplementedError

    def hessian(self, x) -> np.ndarray:
        raise NotImplementedError

    def divergence(self, p, q) -> float:
        p = self.check(p)
        q = self.check(q)
        return float(self.value(p) - self.value(q) - self.gradient(q) @ (p - q))

    def random_point(self, rng: np.random.Generator) -> Point:
        raise NotImplementedError

    def _shape(self, x, name="x") -> np.ndarray:
        arr = np.asarray(x, dtype=float)
        if arr.shape != (self.dim,):
            raise DomainError(f"{name} has shape {arr.shape}, expected ({self.dim},)")
        if not np.all(np.isfinite(arr)):
            raise DomainError(f"{name} has non-finite entries")
        return arr


@dataclass(frozen=True, eq=False)
class SquaredEuclidean(Potential):
    """Half the (weighted) squared norm.  ``weights`` must be strictly positive."""

    dim: int
    weights: np.ndarray | None = None

    def __post_init__(self):
        if self.dim < 1:
            raise ValueError("dim must be >= 1")
        if self.weights is not None:
            w = np.asarray(self.weights, dtype=float)
            if w.shape != (self.dim,) or not np.all(np.isfinite(w)) or np.any(w <= 0):
                raise ValueError("metric weights must be finite, strictly positive, one per coordinate")
            object.__setattr__(self, "weights", w)

    @property
    def w(self) -> np.ndarray:
        return np.ones(self.dim) if self.weights is None else self.weights

    def check(self, x) -> np.ndarray:
        return self._shape(x)

    def value(self, x) -> float:
        x = self.check(x)
        return float(0.5 * np.sum(self.w * x * x))

    def gradient(self, x) -> DualPoint:
        return DualPoint(self.w * self.check(x))

    def gradient_inverse(self, d) -> Point:
        return Point(self._shape(d, "d") / self.w)

    def hessian(self, x) -> np.ndarray:
        self.check(x)
        return np.diag(self.w)

    def divergence(self, p, q) -> float:
        diff = self.check(p) - self.check(q)
        return float(0.5 * np.sum(self.w * diff * diff))

    def random_point(self, rng):
        return Point(rng.normal(size=self.dim))

    def __repr__(self):
        return f"SquaredEuclidean(dim={self.dim}, weights={None if self.weights is None else self.weights.tolist()})"


@dataclass(frozen=True, eq=False)
class NegativeEntropy(Potential):
    """``sum(x log x)`` on the open simplex.

    Dual points are defined up to an additive constant vector (the normal of
    the simplex's affine hull); :meth:`gradient` returns the representative
    ``log x + 1`` and :meth:`gradient_inverse` is the softmax.
    """

    dim: int
    on_simplex: bool = field(default=True, init=False)

    def __post_init__(self):
        if self.dim < 2:
            raise ValueError("NegativeEntropy needs dim >= 2")

    def check(self, x) -> np.ndarray:
        x = self._shape(x)
        if np.any(x <= BOUNDARY_MARGIN):
            raise DomainError("simplex point has a coordinate at or below the boundary margin")
        if abs(x.sum() - 1.0) > SIMPLEX_SUM_TOL:
            raise DomainError(f"simplex point sums to {x.sum()!r}, not 1")
        return x

    def value(self, x) -> float:
        x = self.check(x)
        return float(np.sum(x * np.log(x)))

    def gradient(self, x) -> DualPoint:
        return DualPoint(np.log(self.check(x)) + 1.0)

    def gradient_inverse(self, d) -> Point:
        d = self._shape(d, "d")
        x = softmax(d)
        if np.any(x <= BOUNDARY_MARGIN):
            raise DomainError("dual point maps onto the simplex boundary")
        return Point(x)

    def hessian(self, x) -> np.ndarray:
        return np.diag(1.0 / self.check(x))

    def divergence(self, p, q) -> float:
        p = self.check(p)
        q = self.check(q)
        return float(np.sum(p * (np.log(p) - np.log(q))))

    def random_point(self, rng):
        while True:
            x = rng.dirichlet(np.ones(self.dim))
            if np.all(x > 1e-9):
                return Point(x / x.sum())

    def __repr__(self):
        return f"NegativeEntropy(dim={self.dim})"


_HALF_LOG_2PI_E = 0.5 * (1.0 + math.log(2.0 * math.pi))


@dataclass(frozen=True, eq=False)
class GaussianNatural(Potential):
    """Log-loss potential of the univariate Gaussian family.

    Points are ``(m, v)`` with ``v > 0``.  Internally the potential is the
    negative entropy ``-0.5 log(2 pi e v)`` viewed as a function of the mean
    coordinates ``eta = (m, m**2 + v)``; the gradient with respect to ``eta``
    is the natural parameter ``(m / v, -1 / (2 v))``.  With that pairing the
    Bregman divergence between ``p = (mu, s2)`` and ``q = (m, v)`` is
    ``KL(N(mu, s2) || N(m, v))``.
    """

    dim: int = field(default=2, init=False)

    def check(self, x) -> np.ndarray:
        x = self._shape(x)
        if x[1] <= 0:
            raise DomainError("Gaussian point needs positive variance")
        return x

    @staticmethod
    def mean_coordinates(x) -> np.ndarray:
        m, v = np.asarray(x, dtype=float)
        return np.array([m, m * m + v])

    @staticmethod
    def from_mean_coordinates(eta) -> np.ndarray:
        e1, e2 = np.asarray(eta, dtype=float)
        return np.array([e1, e2 - e1 * e1])

    def value(self, x) -> float:
        x = self.check(x)
        return float(-0.5 * math.log(x[1]) - _HALF_LOG_2PI_E)

    def gradient(self, x) -> DualPoint:
        m, v = self.check(x)
        return DualPoint(np.array([m / v, -0.5 / v]))

    def gradient_inverse(self, d) -> Point:
        t1, t2 = self._shape(d, "d")
        if t2 >= 0:
            raise DomainError("natural parameter needs a negative second coordinate")
        v = -0.5 / t2
        return Point(np.array([t1 * v, v]))

    def hessian(self, x) -> np.ndarray:
        # in mean coordinates
        m, v = self.check(x)
        return np.array([[1.0 / v + 2.0 * m * m / v**2, -m / v**2],
                         [-m / v**2, 0.5 / v**2]])

    def divergence(self, p, q) -> float:
        mu, s2 = self.check(p)
        m, v = self.check(q)
        return gaussian_kl(m, v, mu, s2)

    def random_point(self, rng):
        return Point(np.array([rng.normal(), rng.uniform(0.2, 3.0)]))

    def __repr__(self):
        return "GaussianNatural()"


def potential_value(phi: Potential, x) -> float:
    return phi.value(x)


def gradient(phi: Potential, x) -> DualPoint:
    return phi.gradient(x)


def gradient_inverse(phi: Potential, d) -> Point:
    return phi.gradient_inverse(d)


def divergence(phi: Potential, p, q) -> float:
    """Bregman divergence ``Phi(p) - Phi(q) - <grad Phi(q), p - q>``."""
    return phi.divergence(p, q)


def gaussian_kl(m: float, v: float, mu: float, sigma2: float) -> float:
    """KL divergence from N(mu, sigma2) to the forecast N(m, v).

    This is the log-loss regret of forecasting N(m, v) when the outcome law
    is N(mu, sigma2).
    """
    if not (v > 0 and sigma2 > 0):
        raise DomainError("variances must be positive")
    ratio = sigma2 / v
    return float((m - mu) ** 2 / (2.0 * v) + 0.5 * (ratio - 1.0 - math.log(ratio)))


def gaussian_kl_array(m, v, mu, sigma2) -> np.ndarray:
    """Vectorised :func:`gaussian_kl` for simulation code."""
    m = np.asarray(m, dtype=float)
    v = np.asarray(v, dtype=float)
    if np.any(v <= 0) or np.any(np.asarray(sigma2) <= 0):
        raise DomainError("variances must be positive")
    ratio = sigma2 / v
    return (m - mu) ** 2 / (2.0 * v) + 0.5 * (ratio - 1.0 - np.log(ratio))


def geodesic(phi: Potential, x, y, t: float) -> Point:
    """Mirror geodesic ``grad Phi*((1 - t) grad Phi(x) + t grad Phi(y))``.

    Endpoints are returned exactly for ``t`` in ``{0, 1}``.
    """
    if not 0.0 <= t <= 1.0:
        raise ValueError("t must lie in [0, 1]")
    x = phi.check(x)
    y = phi.check(y)
    if t == 0.0:
        return Point(x.copy())
    if t == 1.0:
        return Point(y.copy())
    if isinstance(phi, NegativeEntropy):
        # stays on the simplex without the +1 offset; log-space for accuracy
        z = (1.0 - t) * np.log(x) + t * np.log(y)
        return Point(np.exp(z - logsumexp(z)))
    return phi.gradient_inverse((1.0 - t) * phi.gradient(x) + t * phi.gradient(y))
