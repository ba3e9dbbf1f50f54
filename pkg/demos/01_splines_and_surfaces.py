"""Natural cubic splines in one and two dimensions.

The fitting primitives underneath every model in this package: a 1-D
natural spline through arbitrary knots, and a tensor-product bicubic
surface with analytic gradients and Hessians for the optimizer.
"""

import numpy as np

from xfertune import fit_bicubic_surface, fit_natural_spline


def main():
    print("== 1-D natural cubic spline ==")
    x = np.array([0.0, 1.0, 2.5, 4.0, 6.0])
    y = np.array([0.0, 1.0, -0.5, 2.0, 1.0])
    s = fit_natural_spline(x, y)
    print(f"knots x = {x.tolist()}")
    print(f"values y = {y.tolist()}")
    print(f"interpolates the knots: {np.allclose(s(x), y)}")
    print(f"natural ends: s''({x[0]:g}) = {s.deriv2(x[0]):.2e}, "
          f"s''({x[-1]:g}) = {s.deriv2(x[-1]):.2e}")

    t = np.linspace(0, 6, 7)
    print("\n  t      s(t)     s'(t)    s''(t)")
    for ti in t:
        print(f"  {ti:4.1f} {s(ti):8.3f} {s.deriv(ti):8.3f} {s.deriv2(ti):8.3f}")

    # per-cell coefficients are plain polynomials a0 + a1 x + a2 x^2 + a3 x^3
    print(f"\nfirst-cell coefficients: {np.round(s.coeffs[0], 4).tolist()}")

    print("\n== bicubic surface ==")
    xs = np.array([1.0, 2.0, 4.0, 8.0])
    ys = np.array([1200.0, 1800.0, 2300.0])
    # a smooth bump over the grid, peak near (4, 1800)
    grid = np.array([[np.exp(-((gx - 4) ** 2) / 8 - ((gy - 1800) / 600) ** 2)
                      for gy in ys] for gx in xs])
    f = fit_bicubic_surface(xs, ys, grid)
    print(f"grid {grid.shape[0]}x{grid.shape[1]} over x={xs.tolist()}, "
          f"y={ys.tolist()}")
    print(f"reproduces the grid: "
          f"{np.allclose([[f(gx, gy) for gy in ys] for gx in xs], grid)}")

    gx, gy = f.gradient(4.0, 1800.0)
    fxx, fxy, fyy = f.hessian(4.0, 1800.0)
    print(f"at the bump: grad = ({gx:.4f}, {gy:.6f}), "
          f"hessian diag = ({fxx:.4f}, {fyy:.2e})")
    print("negative curvature both ways marks a local maximum, which is")
    print("exactly what the optimizer's critical-point search looks for")


if __name__ == "__main__":
    main()
