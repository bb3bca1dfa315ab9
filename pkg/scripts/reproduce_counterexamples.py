#!/usr/bin/env python3
"""Reproduce the three necessity examples at desk scale.

1. linear tail: log Pr(X >= x) is affine with slope -1, which no Lipschitz
   image of gamma can produce;
2. spike family: the isoperimetric density bound forces the Lipschitz
   constant above (16/17) e^{95 T^2/512};
3. capped-Gaussian sharpness family: the smoothed log-curvature at the
   origin grows like T^2, so no curvature bound survives at the
   propagation-domain boundary.
"""

import sys

import numpy as np

sys.path.insert(0, "src")

import heatflow as hf
from heatflow.diagnostics import (
    sharpness_curvature_check,
    tail_test,
    vt_counterexample_check,
)


def main():
    print("== linear tail ==")
    p = hf.normalize(hf.linear_tail())
    fit = tail_test(p, np.linspace(2, 6, 17))
    print(f"  log-tail slope {fit.linear_slope:+.4f}, quadratic coefficient "
          f"{fit.quad_coeff:+.2e}")
    print(f"  incompatible with any Gaussian pushforward: {fit.gaussian_incompatible}")

    print("== spike family ==")
    for T in (4.0, 5.0, 6.0):
        chk = vt_counterexample_check(T)
        print(f"  T={T}: c_T={chk.c_T:.2e}, mu([T,inf))={chk.mu_tail:.3e}, "
              f"iso lower bound L >= {chk.isoperimetric_lower_bound:8.2f}, "
              f"analytic threshold {chk.analytic_threshold:10.2f}")

    print("== sharpness family ==")
    t = 0.5 * np.log(2.0)
    for T in (5.0, 10.0, 20.0, 40.0):
        chk = sharpness_curvature_check(T, t)
        print(f"  T={T:5.1f}: (log f_t)''(0) = {chk.measured:10.2f}, "
              f"level T^2/(3(e^2t - 1)) = {chk.bound:10.2f}, "
              f"ratio {chk.ratio:.4f}")


if __name__ == "__main__":
    main()
