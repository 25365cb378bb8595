#!/usr/bin/env python3
"""Nonconvex constraints: relax to a hull, then decompose.

An order constraint that allows one of two disjoint operating windows is a
union of boxes.  Replacing it by its bounding box makes the geometry convex;
the decomposition of the relaxed problem never claims more regret than the
best achievable point of the original union allows.

The script also shows why the comparison is made against the best
achievable regret: relaxing one convex constraint can move the sequential
path and *increase* the sequential total.

Usage:  python3 demos/05_convexification.py
"""

import numpy as np

from bregdecomp import Box, Halfspace, SquaredEuclidean
from bregdecomp.decomposition import (
    box_hull_is_exact,
    box_union_oracle_regret,
    convexified_decompose,
    decompose,
    delta_relax,
    zeta_upper_bound,
)


def main():
    e2 = SquaredEuclidean(2)
    p = np.array([0.5, 1.0])
    windows = [Box([-3, -3], [-2, 0]), Box([1, -3], [2, -2])]
    latency = [Box([-3, -3], [3, -1.5])]
    hull = Box([-3, -3], [2, 0])
    conv = convexified_decompose(e2, hull, latency[0], p, hull_is_exact=box_hull_is_exact(windows))
    best = box_union_oracle_regret(e2, windows, latency, p)
    print(f"bounding box exact hull of the windows? {box_hull_is_exact(windows)}")
    print(f"convexified total {conv.total:.4f}  <=  best achievable regret {best:.4f}")
    print(f"relaxation gap delta_relax = {delta_relax(best, conv.total):.4f}")

    print("\nrelaxing a convex set can raise the sequential total:")
    lam = Halfspace([1, 1], -1)
    tight = decompose(e2, Halfspace([1, 0], 0), lam, [1.0, 1.0])
    loose = decompose(e2, Halfspace([1, 0], 0.5), lam, [1.0, 1.0])
    print(f"  x1 <= 0   : total {tight.total:.4f}")
    print(f"  x1 <= 0.5 : total {loose.total:.4f}")
    print(f"  both below the best achievable regret {e2.divergence([1.0, 1.0], tight.joint):.4f}")

    z = zeta_upper_bound(rho=0.1, alpha=1.0, g2=0.3, g1=0.3, c_const=1.0, kappa_hat=0.2, d_lam=0.5, d_eps=1.0)
    print(f"\nweak-nonconvexity allowance zeta <= {z:.4f}")


if __name__ == "__main__":
    main()
