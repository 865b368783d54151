use proptest::prelude::*;

use nonlocal_fb::analysis::fit_growth;
use nonlocal_fb::dirichlet::solve_dirichlet;
use nonlocal_fb::kernels::KernelSpec;
use nonlocal_fb::mesh::{Exterior, Grid, GridFunction, Region};
use nonlocal_fb::nonlocal_op::Operator;
use nonlocal_fb::onephase::{min_max_cross, min_max_identity};

fn kernel(family: u8, s: f64, cap: f64) -> KernelSpec {
    match family % 3 {
        0 => KernelSpec::fractional_laplacian(1, s),
        1 => KernelSpec::oscillating(1, s, 1.0, cap, 2.0 * std::f64::consts::PI / std::f64::consts::LN_2),
        _ => KernelSpec::dyadic_piecewise(1, s, 1.0, cap),
    }
    .unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn lattice_identity_is_exact(a in -10.0..10.0f64, b in -10.0..10.0f64, c in -10.0..10.0f64, d in -10.0..10.0f64) {
        let (lhs, rhs) = min_max_identity(a, b, c, d);
        let scale = 1.0 + (a - c).powi(2) + (b - d).powi(2);
        prop_assert!((lhs - rhs).abs() <= 1e-12 * scale);
        prop_assert!(lhs <= (a - c).powi(2) + (b - d).powi(2) + 1e-12 * scale);
        prop_assert!(min_max_cross(a, b, c, d) >= 0.0);
    }

    #[test]
    fn exact_power_laws_are_fitted(p in 0.1..3.0f64, c in 0.01..100.0f64) {
        let samples: Vec<(f64, f64)> = (0..6).map(|k| {
            let r = 0.5f64.powi(k);
            (r, c * r.powf(p))
        }).collect();
        let fit = fit_growth(&samples).unwrap();
        prop_assert!((fit.exponent - p).abs() < 1e-10);
        prop_assert!((fit.coefficient / c - 1.0).abs() < 1e-9);
        prop_assert!(fit.r_squared > 1.0 - 1e-12);
    }

    #[test]
    fn rescaled_density_matches_definition(family in 0u8..3, s in 0.2..0.8f64, cap in 1.0..4.0f64, r in 0.1..10.0f64, h in 0.05..5.0f64) {
        let k = kernel(family, s, cap);
        let kr = k.rescale(r).unwrap();
        let want = r.powf(1.0 + 2.0 * s) * k.density(&[r * h]);
        prop_assert!((kr.density(&[h]) / want - 1.0).abs() < 1e-9);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn collocation_matrix_is_an_m_matrix(family in 0u8..3, s in 0.2..0.8f64, cap in 1.0..3.0f64, nodes in 12usize..40) {
        let k = kernel(family, s, cap);
        let grid = Grid::uniform(-1.0, 1.0, nodes).unwrap();
        let op = Operator::new(&k, &grid).unwrap();
        let omega: Vec<usize> = (1..nodes - 1).collect();
        let a = op.collocation_matrix(&omega).unwrap();
        for p in 0..omega.len() {
            prop_assert!(a[(p, p)] > 0.0);
            let mut row = a[(p, p)];
            for q in 0..omega.len() {
                if p != q {
                    prop_assert!(a[(p, q)] <= 0.0);
                    row += a[(p, q)];
                }
            }
            prop_assert!(row > 0.0);
        }
    }

    #[test]
    fn nonnegative_source_gives_nonnegative_solution(family in 0u8..3, s in 0.2..0.8f64, cap in 1.0..3.0f64, amp in 0.0..2.0f64, freq in 0.0..6.0f64) {
        let k = kernel(family, s, cap);
        let grid = Grid::uniform(-1.5, 1.5, 61).unwrap();
        let omega = Region::interval(&grid, -1.0, 1.0, false).unwrap();
        let f = GridFunction::from_fn(grid.clone(), Exterior::zero(), |x| amp * (freq * x).sin().powi(2)).unwrap();
        let g = GridFunction::from_fn(grid.clone(), Exterior::zero(), |_| 0.0).unwrap();
        let u = solve_dirichlet(&k, &omega, &f, &g).unwrap();
        prop_assert!(u.values.iter().all(|&v| v >= -1e-12));
    }
}
