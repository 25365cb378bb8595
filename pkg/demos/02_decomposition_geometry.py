#!/usr/bin/env python3
"""Sequential projections and the three penalty components.

Start from the unconstrained optimum p*, project onto the order-constraint
set (cost g2), then onto the latency set (cost g1); whatever is still needed
to reach the intersection is the interaction g12.

Four scenes:
  1. perpendicular constraints: the projections commute and g12 = 0;
  2. an oblique pair where the sequential point happens to be feasible
     (g12 = 0 although it is not the joint projection);
  3. an oblique pair with a genuine interaction;
  4. the probability simplex under KL, with the master inequality checked
     on random feasible points.

Usage:  python3 demos/02_decomposition_geometry.py
"""

import numpy as np

from bregdecomp import Halfspace, Intersection, NegativeEntropy, SimplexSubset, SquaredEuclidean
from bregdecomp.decomposition import decompose, verify_master
from bregdecomp.sets import normal_alignment, sample_feasible


def show(title, rep):
    print(f"\n{title}")
    print(f"  a (after order)   = {np.round(rep.a, 4)}")
    print(f"  b (then latency)  = {np.round(rep.b, 4)}")
    print(f"  joint projection  = {np.round(rep.joint, 4)}")
    print(f"  g2={rep.g2:.4f}  g1={rep.g1:.4f}  g12={rep.g12:.4f}  total={rep.total:.4f}")
    print(f"  D(b || joint) = {rep.orthogonality_residual:.4f}   orthogonal: {rep.orthogonal}")


def main():
    e2 = SquaredEuclidean(2)
    p = np.array([1.0, 1.0])

    rep = decompose(e2, Halfspace([1, 0], 0), Halfspace([0, 1], 0), p)
    show("1. x1 <= 0 and x2 <= 0", rep)
    print(f"  normal alignment at the joint point: {normal_alignment(e2, Halfspace([1, 0], 0), Halfspace([0, 1], 0), rep.joint):.1e}")

    show("2. x1 <= 0 and x1 + x2 <= -1", decompose(e2, Halfspace([1, 0], 0), Halfspace([1, 1], -1), p))
    show("3. x1 <= 0 and x2 - x1 <= -1", decompose(e2, Halfspace([1, 0], 0), Halfspace([-1, 1], -1), p))

    kl = NegativeEntropy(3)
    p3 = np.array([0.6, 0.3, 0.1])
    s_eps = Halfspace([1.0, -1.5, 0.0], 0.0)  # q1 <= 1.5 q2
    s_lam = SimplexSubset([0.0, 0.0, 0.3], [1.0, 1.0, 1.0])  # q3 >= 0.3
    rep = decompose(kl, s_eps, s_lam, p3)
    show("4. simplex, KL: q1 <= 1.5 q2 and q3 >= 0.3", rep)
    pts = sample_feasible(kl, Intersection((s_eps, s_lam)), 2000, np.random.default_rng(0))
    check = verify_master(kl, rep, pts)
    print(f"  master inequality on {len(pts)} feasible points: min slack {check.min_slack:.3e}, "
          f"violations {len(check.violations)}")


if __name__ == "__main__":
    main()
