#!/usr/bin/env python3
"""Monotone penalty curves from a graded experiment.

We observe noisy excess losses on a (lam, eps) grid, fit g1(lam) on the
eps = 0 slice and g2(eps) on the lam = 0 slice by isotonic regression, and
look at what is left over: the interaction residual.

Usage:  python3 demos/04_calibration.py
"""

import numpy as np

from bregdecomp.calibration import GradedObservation, fit_penalty_surfaces


def main():
    rng = np.random.default_rng(3)
    lams = np.linspace(0, 2, 9)
    epss = np.linspace(0, 1, 5)
    obs = []
    for lam in lams:
        for eps in epss:
            truth = lam**2 / 2 + eps**2 / 2 + 0.5 * lam**2 * eps**2
            for _ in range(20):
                obs.append(GradedObservation(float(lam), float(eps), float(truth + rng.normal(scale=0.05))))

    surf = fit_penalty_surfaces(obs)
    print("lam     g1 fit   lam^2/2")
    for k, v in zip(surf.g1_curve.knots, surf.g1_curve.values):
        print(f"{k:4.2f}  {v:8.4f}  {k**2 / 2:8.4f}")
    print("\neps     g2 fit   eps^2/2")
    for k, v in zip(surf.g2_curve.knots, surf.g2_curve.values):
        print(f"{k:4.2f}  {v:8.4f}  {k**2 / 2:8.4f}")

    grid = surf.interaction_residual
    expected = 0.5 * grid.lams[:, None] ** 2 * grid.epss[None, :] ** 2
    print(f"\nresidual vs 0.5 lam^2 eps^2: max abs difference {np.nanmax(np.abs(grid.values - expected)):.4f}")
    print(f"negative residual cells (kept, not clipped): {int(np.sum(grid.values < 0))}")


if __name__ == "__main__":
    main()
