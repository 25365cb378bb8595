"""Independent brute-force references used by the tests.

Nothing here calls the package's solvers: the grid oracle only evaluates
divergences and membership, the PAV oracle enumerates partitions.
"""

from __future__ import annotations

import itertools

import numpy as np

from bregdecomp.potentials import NegativeEntropy


def _feasible(sets, pts, tol=0.0):
    ok = np.ones(len(pts), dtype=bool)
    for s in sets:
        G, h, A, c = s.linear_form()
        if len(h):
            ok &= np.all(pts @ G.T - h <= tol, axis=1)
        if len(c):
            ok &= np.all(np.abs(pts @ A.T - c) <= 1e-12, axis=1)
    return ok


def _divergences(phi, x, pts):
    if isinstance(phi, NegativeEntropy):
        return np.sum(x * (np.log(x) - np.log(pts)), axis=1)
    w = phi.w
    return 0.5 * np.sum(w * (pts - x) ** 2, axis=1)


def _lift(phi, uv):
    """Grid coordinates -> points: R^2 itself, or the 3-simplex via (q1, q2)."""
    if isinstance(phi, NegativeEntropy):
        return np.column_stack([uv, 1.0 - uv.sum(axis=1)])
    return uv


def grid_projection(phi, sets, x, lo=-4.0, hi=4.0, coarse_points=801, zoom_levels=5, window_cells=8):
    """Minimise ``D(x || q)`` over feasible grid points, then zoom in.

    Works for ``SquaredEuclidean(2)`` on ``[lo, hi]^2`` and
    ``NegativeEntropy(3)`` (the simplex parametrised by its first two
    coordinates).  Each zoom level re-grids a window of ``window_cells``
    previous cells around the incumbent at a tenth of the spacing.
    Inequality constraints only.  Returns ``(value, point)``.
    """
    x = np.asarray(x, dtype=float)
    simplex = isinstance(phi, NegativeEntropy)
    if simplex:
        lo, hi = 0.0, 1.0
    h = (hi - lo) / (coarse_points - 1)
    axes = (np.linspace(lo, hi, coarse_points),) * 2
    best_val, best_pt = np.inf, None
    for _ in range(zoom_levels + 1):
        uu, vv = np.meshgrid(*axes, indexing="ij")
        uv = np.column_stack([uu.ravel(), vv.ravel()])
        pts = _lift(phi, uv)
        keep = _feasible(sets, pts)
        if simplex:
            keep &= np.all(pts > 1e-12, axis=1)
        if not keep.any():
            if best_pt is None:
                raise ValueError("grid found no feasible point")
            break
        vals = _divergences(phi, x, pts[keep])
        i = int(np.argmin(vals))
        if vals[i] < best_val:
            best_val, best_pt = float(vals[i]), pts[keep][i].copy()
        centre = uv[keep][i]
        half = window_cells * h
        h /= 10
        axes = tuple(np.arange(c - half, c + half + h / 2, h) for c in centre)
    return best_val, best_pt


def pav_bruteforce(ys, weights):
    """Best nondecreasing fit by enumerating all contiguous partitions.

    For each partition the optimal constant on a block is its weighted mean;
    partitions whose block means are not nondecreasing are skipped.  Every
    nondecreasing step fit is some partition with block means, so the
    minimum over admissible partitions is the optimum.
    """
    ys = np.asarray(ys, dtype=float)
    w = np.asarray(weights, dtype=float)
    n = ys.size
    best_sse, best_fit = np.inf, None
    for cuts in itertools.product((False, True), repeat=n - 1):
        bounds = [0] + [i + 1 for i, c in enumerate(cuts) if c] + [n]
        fit = np.empty(n)
        prev = -np.inf
        ok = True
        for a, b in zip(bounds[:-1], bounds[1:]):
            m = np.sum(w[a:b] * ys[a:b]) / np.sum(w[a:b])
            if m < prev - 1e-15:
                ok = False
                break
            fit[a:b] = m
            prev = m
        if not ok:
            continue
        sse = float(np.sum(w * (ys - fit) ** 2))
        if sse < best_sse:
            best_sse, best_fit = sse, fit
    return best_sse, best_fit
