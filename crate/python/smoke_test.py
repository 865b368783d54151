"""Smoke test for the nonlocal_fb extension: one call per entry point,
each checked against a closed form or a frozen value."""

import math

import nonlocal_fb as nf


def main():
    frac = nf.Kernel.fractional_laplacian(0.5)
    assert frac.order == 0.5 and frac.dim == 1
    r = frac.rescale(3.0)
    assert abs(r.density([0.7]) / (3.0**2 * frac.density([2.1])) - 1) < 1e-12

    x, u = nf.solve_dirichlet(frac, -1.0, 1.0, -2.0, 2.0, 2000)
    err = max(abs(ui - math.sqrt(1 - xi * xi)) for xi, ui in zip(x, u) if abs(xi) <= 0.9)
    assert err < 2e-2, err

    _, _, fb, residual = nf.solve_obstacle(frac, 4.0, 801)
    assert residual < 1e-8
    assert len(fb) == 2 and abs(fb[1] - 0.162522365666) < 1e-9 and abs(fb[0] + fb[1]) < 1e-12

    b = nf.halfspace_profile(frac, [0.25, 1.0], truncation=8.0, nodes_per_unit=32)
    assert abs(b[0] - 0.5) < 3e-2 and abs(b[1] - 1.0) < 3e-2, b

    assert abs(nf.beta0(1.0, 1.0, 0.3) - 0.3) < 1e-2
    assert abs(nf.beta0(1.0, 2.0, 0.5) - 0.4262170543) < 1e-6

    p, c, r2 = nf.fit_growth([(2.0**-k, 3.0 * 2.0 ** (-1.5 * k)) for k in range(6)])
    assert abs(p - 1.5) < 1e-10 and abs(c - 3.0) < 1e-9 and r2 > 0.999999

    assert nf.min_max_identity(3.0, 1.0, 0.0, 2.0) == (2.0, 2.0)

    osc = nf.Kernel.oscillating(0.5)
    assert "Oscillating" in repr(osc)
    try:
        nf.Kernel.fractional_laplacian(1.5)
    except ValueError:
        pass
    else:
        raise AssertionError("order 1.5 accepted")

    print(f"nonlocal_fb {nf.__version__}: smoke test passed")


if __name__ == "__main__":
    main()
