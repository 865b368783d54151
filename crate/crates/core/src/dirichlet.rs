//! Dirichlet problems `L u = f` in `Omega`, `u = g` outside, harmonic
//! replacement and boundary diagnostics.

use faer::linalg::solvers::Solve;
use faer::{Mat, Side as FaerSide};
use serde::{Deserialize, Serialize};
use statrs::function::gamma::gamma;

use crate::analysis::{fit_growth, ExponentFit};
use crate::error::{invalid, Error, Result};
use crate::kernels::KernelSpec;
use crate::mesh::{GridFunction, Region};
use crate::nonlocal_op::Operator;

/// Solves `A x = b` for a symmetric positive definite `A`.
pub(crate) fn solve_spd(a: &Mat<f64>, rhs: &[f64]) -> Result<Vec<f64>> {
    let n = rhs.len();
    if n == 0 {
        return Ok(Vec::new());
    }
    let llt = a.llt(FaerSide::Lower).map_err(|e| Error::Singular(format!("Cholesky factorisation failed: {e:?}")))?;
    let mut b = Mat::from_fn(n, 1, |i, _| rhs[i]);
    llt.solve_in_place(&mut b);
    let x: Vec<f64> = (0..n).map(|i| b[(i, 0)]).collect();
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::Singular("non-finite solution".into()));
    }
    Ok(x)
}

/// `max |A x - b|` relative to `max(|b|, |diag(A)| |x|)`.
fn relative_residual(a: &Mat<f64>, x: &[f64], b: &[f64]) -> f64 {
    let n = x.len();
    let mut worst = 0.0f64;
    let mut scale = b.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    for i in 0..n {
        let mut r = -b[i];
        for j in 0..n {
            r += a[(i, j)] * x[j];
        }
        worst = worst.max(r.abs());
        scale = scale.max(a[(i, i)].abs() * x[i].abs());
    }
    if scale == 0.0 {
        worst
    } else {
        worst / scale
    }
}

/// Relative residual accepted from the dense solve before the assembly is
/// declared broken.
const SOLVE_TOL: f64 = 1e-9;

/// `u` with `L_h u = f` on `omega` and `u = g` elsewhere (grid values of `g`
/// off `omega` and its exterior data).
pub fn solve_dirichlet(kernel: &KernelSpec, omega: &Region, f: &GridFunction, g: &GridFunction) -> Result<GridFunction> {
    let op = Operator::new(kernel, &g.grid)?;
    solve_with(&op, omega, &f.values, g)
}

/// [`solve_dirichlet`] with a prebuilt operator and nodal source values.
pub fn solve_with(op: &Operator, omega: &Region, f: &[f64], g: &GridFunction) -> Result<GridFunction> {
    if f.len() != g.len() {
        return Err(invalid("source and data live on different grids"));
    }
    let rows = omega.indices();
    let mut u = g.clone();
    if rows.is_empty() {
        return Ok(u);
    }
    let a = op.collocation_matrix(&rows)?;
    let coupling = op.boundary_coupling(g, omega)?;
    let rhs: Vec<f64> = rows.iter().zip(&coupling).map(|(&i, c)| f[i] + c).collect();
    let x = solve_spd(&a, &rhs)?;
    let res = relative_residual(&a, &x, &rhs);
    if res > SOLVE_TOL {
        return Err(Error::Singular(format!("collocation residual {res:e} after the dense solve")));
    }
    for (&i, v) in rows.iter().zip(x) {
        u.values[i] = v;
    }
    Ok(u)
}

/// The `L`-harmonic function in `b` that agrees with `u` elsewhere.
pub fn harmonic_replacement(kernel: &KernelSpec, u: &GridFunction, b: &Region) -> Result<GridFunction> {
    let op = Operator::new(kernel, &u.grid)?;
    solve_with(&op, b, &vec![0.0; u.len()], u)
}

/// `Q = int_{B_r(z)} u b / int_{B_r(z)} b^2`, by the trapezoid rule on the
/// nodes of `u` inside the ball (plus the two ball ends).
pub fn project_on_barrier(u: &GridFunction, b: &GridFunction, z: f64, r: f64) -> Result<f64> {
    u.grid.require_1d()?;
    if !(r > 0.0) {
        return Err(invalid("projection radius must be positive"));
    }
    let (lo, hi) = (z - r, z + r);
    let mut xs = vec![lo];
    xs.extend(u.grid.coords().into_iter().filter(|&x| x > lo && x < hi));
    xs.push(hi);
    let (mut ub, mut bb) = (0.0, 0.0);
    for w in xs.windows(2) {
        let dx = w[1] - w[0];
        let (b0, b1) = (b.value_at(w[0]), b.value_at(w[1]));
        ub += 0.5 * dx * (u.value_at(w[0]) * b0 + u.value_at(w[1]) * b1);
        bb += 0.5 * dx * (b0 * b0 + b1 * b1);
    }
    if bb < 1e-14 {
        return Err(Error::Degenerate(format!("barrier is numerically zero on B_{r}({z})")));
    }
    Ok(ub / bb)
}

/// Distance of each node of `omega` to the complement, measured to the
/// midpoint between the node and the nearest node outside `omega`.
pub fn boundary_distance(u: &GridFunction, omega: &Region) -> Result<Vec<(usize, f64)>> {
    u.grid.require_1d()?;
    let g = &u.grid;
    let h = g.spacing();
    let outside = omega.complement(g).indices();
    let mut out = Vec::with_capacity(omega.len());
    for i in omega.indices() {
        let k = outside.partition_point(|&k| k < i);
        let mut d = f64::INFINITY;
        if k > 0 {
            d = d.min((i - outside[k - 1]) as f64 * h);
        }
        if k < outside.len() {
            d = d.min((outside[k] - i) as f64 * h);
        }
        // a domain covering the whole grid is bounded by the grid edges
        d = d.min((i as f64 + 1.0) * h).min((g.len() - i) as f64 * h);
        out.push((i, d - 0.5 * h));
    }
    Ok(out)
}

/// Closed form solution of `(-Delta)^s u = f` on `(a, b)` with `u = 0`
/// outside, in one dimension: `f c_s ((x - a)(b - x))_+^s` with
/// `c_s = Gamma(1/2) / (4^s Gamma(1 + s) Gamma(1/2 + s))`.
pub fn torsion_profile(s: f64, a: f64, b: f64, f: f64) -> Result<impl Fn(f64) -> f64> {
    if !(s > 0.0 && s < 1.0) || !(a < b) {
        return Err(invalid(format!("need 0 < s < 1 and a < b, got s = {s}, ({a}, {b})")));
    }
    let c = gamma(0.5) / (4f64.powf(s) * gamma(1.0 + s) * gamma(0.5 + s));
    Ok(move |x: f64| f * c * ((x - a) * (b - x)).max(0.0).powf(s))
}

/// Result of [`hopf_check`].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HopfReport {
    /// `min` over bands of `min u / d^s`.
    pub coefficient: f64,
    /// `(lower band edge, min u/d^s over the band)`
    pub bands: Vec<(f64, f64)>,
    /// Growth of the band minimum of `u` against the distance where it is
    /// attained.
    pub fit: ExponentFit,
}

impl HopfReport {
    pub fn passes(&self) -> bool {
        self.coefficient > 0.0 && self.fit.r_squared > 0.9
    }
}

/// Lower bound `u >= c d^s` over dyadic distance bands from `4h` to a
/// quarter of the diameter of `omega`.
pub fn hopf_check(u: &GridFunction, omega: &Region, s: f64) -> Result<HopfReport> {
    let h = u.grid.spacing();
    let dist = boundary_distance(u, omega)?;
    if dist.iter().any(|&(i, _)| u.values[i] < 0.0) {
        return Err(invalid("the Hopf check needs u >= 0"));
    }
    if dist.iter().all(|&(i, _)| u.values[i] <= 0.0) {
        return Err(Error::Degenerate("u vanishes identically in the domain".into()));
    }
    let (first, last) = (omega.first().unwrap(), omega.last().unwrap());
    let diam = (last - first + 1) as f64 * h;
    let mut bands = Vec::new();
    let mut fit_samples = Vec::new();
    let mut lo = 4.0 * h;
    while 2.0 * lo <= 0.25 * diam * (1.0 + 1e-12) {
        let hi = 2.0 * lo;
        let mut ratio = f64::INFINITY;
        let mut umin = (f64::INFINITY, lo);
        for &(i, d) in &dist {
            if d >= lo && d < hi {
                ratio = ratio.min(u.values[i] / d.powf(s));
                if u.values[i] < umin.0 {
                    umin = (u.values[i], d);
                }
            }
        }
        if ratio.is_finite() {
            bands.push((lo, ratio));
            fit_samples.push((umin.1, umin.0));
        }
        lo = hi;
    }
    let fit = fit_growth(&fit_samples)?;
    let coefficient = bands.iter().map(|b| b.1).fold(f64::INFINITY, f64::min);
    Ok(HopfReport { coefficient, bands, fit })
}

/// Result of [`boundary_expansion`].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Expansion {
    /// Projection coefficient `q` at the innermost radius.
    pub q: f64,
    /// `(r, sup_{B_r(z) cap Omega} |u - q b|)`
    pub remainder: Vec<(f64, f64)>,
    pub fit: ExponentFit,
}

/// Expansion `u ~ q b((x - z) e)` at a boundary point: `q` is the
/// projection on the smallest ball and the remainder growth is fitted over
/// `radii` (increasing).  `barrier` must already be positioned so that it
/// vanishes outside the domain near `z`.
pub fn boundary_expansion(u: &GridFunction, barrier: &GridFunction, omega: &Region, z: f64, radii: &[f64]) -> Result<Expansion> {
    let r0 = *radii.first().ok_or_else(|| invalid("need at least one radius"))?;
    let q = project_on_barrier(u, barrier, z, r0)?;
    let g = &u.grid;
    let remainder: Vec<(f64, f64)> = radii
        .iter()
        .map(|&r| {
            let mut best = 0.0f64;
            for i in omega.indices() {
                let x = g.x(i);
                if (x - z).abs() <= r {
                    best = best.max((u.values[i] - q * barrier.value_at(x)).abs());
                }
            }
            (r, best)
        })
        .collect();
    let fit = fit_growth(&remainder)?;
    Ok(Expansion { q, remainder, fit })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{Exterior, Grid};
    use crate::nonlocal_op::beta0;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn zero_fn(g: &Grid) -> GridFunction {
        GridFunction::new(g.clone(), vec![0.0; g.len()], Exterior::zero()).unwrap()
    }

    #[test]
    fn constants_are_harmonic() {
        let g = Grid::uniform(-2.0, 2.0, 161).unwrap();
        let k = KernelSpec::oscillating(1, 0.4, 1.0, 2.0, 3.0).unwrap();
        let omega = Region::interval(&g, -1.0, 1.0, false).unwrap();
        let data = GridFunction::new(g.clone(), vec![3.0; g.len()], Exterior::constant(3.0)).unwrap();
        let u = solve_dirichlet(&k, &omega, &zero_fn(&g), &data).unwrap();
        for v in &u.values {
            assert!((v - 3.0).abs() < 1e-10, "{v}");
        }
    }

    #[test]
    fn getoor_centre_value() {
        let g = Grid::uniform(-2.0, 2.0, 401).unwrap();
        let k = KernelSpec::fractional_laplacian(1, 0.5).unwrap();
        let omega = Region::interval(&g, -1.0, 1.0, false).unwrap();
        let f = GridFunction::new(g.clone(), vec![1.0; g.len()], Exterior::zero()).unwrap();
        let u = solve_dirichlet(&k, &omega, &f, &zero_fn(&g)).unwrap();
        let mid = g.nearest(0.0);
        assert!((u.values[mid] - 1.0).abs() < 2e-2, "{}", u.values[mid]);
    }

    #[test]
    fn torsion_profile_constants() {
        let half = torsion_profile(0.5, -1.0, 1.0, 1.0).unwrap();
        assert!((half(0.0) - 1.0).abs() < 1e-14);
        assert!((half(0.6) - 0.8).abs() < 1e-14);
        assert_eq!(half(1.5), 0.0);
        // s -> 1 limit (1 - x^2)/2 of -u'' = 1, approached continuously
        let near_one = torsion_profile(0.999, -1.0, 1.0, 1.0).unwrap();
        assert!((near_one(0.0) - 0.5).abs() < 2e-3);
        assert!(torsion_profile(0.5, 1.0, 1.0, 1.0).is_err());
    }

    #[test]
    fn comparison_and_maximum_principle() {
        let g = Grid::uniform(-2.0, 2.0, 121).unwrap();
        let k = KernelSpec::dyadic_piecewise(1, 0.6, 1.0, 3.0).unwrap();
        let omega = Region::interval(&g, -1.0, 1.0, false).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let g1v: Vec<f64> = (0..g.len()).map(|_| rng.gen_range(0.0..1.0)).collect();
        let g2v: Vec<f64> = g1v.iter().map(|v| v + rng.gen_range(0.0..0.5)).collect();
        let f1v: Vec<f64> = (0..g.len()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let f2v: Vec<f64> = f1v.iter().map(|v| v + rng.gen_range(0.0..0.5)).collect();
        let mk = |v: Vec<f64>, c: f64| GridFunction::new(g.clone(), v, Exterior::constant(c)).unwrap();
        let u1 = solve_dirichlet(&k, &omega, &mk(f1v, 0.0), &mk(g1v.clone(), 0.5)).unwrap();
        let u2 = solve_dirichlet(&k, &omega, &mk(f2v, 0.0), &mk(g2v, 1.0)).unwrap();
        for (a, b) in u1.values.iter().zip(&u2.values) {
            assert!(a <= b);
        }
        let h0 = solve_dirichlet(&k, &omega, &zero_fn(&g), &mk(g1v.clone(), 0.5)).unwrap();
        let lo = g1v.iter().cloned().fold(0.5, f64::min);
        let hi = g1v.iter().cloned().fold(0.5, f64::max);
        for v in &h0.values {
            assert!(*v >= lo - 1e-12 && *v <= hi + 1e-12);
        }
    }

    #[test]
    fn pythagorean_identity_and_minimality() {
        let g = Grid::uniform(-1.5, 1.5, 91).unwrap();
        let k = KernelSpec::oscillating(1, 0.5, 1.0, 2.0, 4.0).unwrap();
        let ball = Region::interval(&g, -0.7, 0.7, false).unwrap();
        let op = Operator::new(&k, &g).unwrap();
        let form = op.stiffness_form(&ball).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..5 {
            let vals: Vec<f64> = (0..g.len()).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let u = GridFunction::new(g.clone(), vals, Exterior::zero()).unwrap();
            let v = harmonic_replacement(&k, &u, &ball).unwrap();
            let w = GridFunction::new(g.clone(), u.values.iter().zip(&v.values).map(|(a, b)| a - b).collect(), Exterior::zero()).unwrap();
            let (eu, ev, ew) = (form.energy(&u).unwrap(), form.energy(&v).unwrap(), form.energy(&w).unwrap());
            assert!(((eu - ev) - ew).abs() <= 1e-10 * eu.abs(), "{eu} {ev} {ew}");
            for _ in 0..20 {
                let mut p = v.clone();
                for i in ball.indices() {
                    p.values[i] += rng.gen_range(-1e-2..1e-2);
                }
                assert!(form.energy(&p).unwrap() >= ev);
            }
        }
    }

    #[test]
    fn projection_examples() {
        let g = Grid::uniform(0.0, 1.0, 101).unwrap();
        let b = GridFunction::from_fn(g.clone(), Exterior::zero(), |x: f64| x.sqrt()).unwrap();
        let u = GridFunction::from_fn(g.clone(), Exterior::zero(), |x: f64| 3.0 * x.sqrt()).unwrap();
        assert!((project_on_barrier(&u, &b, 0.0, 0.5).unwrap() - 3.0).abs() < 1e-12);
        // orthogonal to b on (-0.5, 0.5) after Gram-Schmidt against a constant
        let one = GridFunction::from_fn(g.clone(), Exterior::zero(), |_| 1.0).unwrap();
        let c = project_on_barrier(&one, &b, 0.0, 0.5).unwrap();
        let orth = GridFunction::from_fn(g.clone(), Exterior::zero(), |x: f64| 1.0 - c * x.sqrt()).unwrap();
        assert!(project_on_barrier(&orth, &b, 0.0, 0.5).unwrap().abs() < 1e-12);
        let zero = zero_fn(&g);
        assert!(matches!(project_on_barrier(&u, &zero, 0.0, 0.5), Err(Error::Degenerate(_))));
    }

    #[test]
    fn projection_converges_with_rate() {
        let g = Grid::uniform(0.0, 1.0, 4001).unwrap();
        let b = GridFunction::from_fn(g.clone(), Exterior::zero(), |x: f64| x.sqrt()).unwrap();
        let u = GridFunction::from_fn(g.clone(), Exterior::zero(), |x: f64| x.sqrt() + x.powf(0.8)).unwrap();
        let errs: Vec<(f64, f64)> =
            [0.4, 0.2, 0.1, 0.05, 0.025].iter().map(|&r| (r, (project_on_barrier(&u, &b, 0.0, r).unwrap() - 1.0).abs())).collect();
        let fit = fit_growth(&errs).unwrap();
        assert!((fit.exponent - 0.3).abs() < 0.02, "{fit:?}");
    }

    #[test]
    fn hopf_examples() {
        let g = Grid::uniform(-0.5, 1.5, 801).unwrap();
        let omega = Region::interval(&g, 0.0, 1.0, false).unwrap();
        let zero = zero_fn(&g);
        let dist = boundary_distance(&zero, &omega).unwrap();
        let mut vals = vec![0.0; g.len()];
        for &(i, d) in &dist {
            vals[i] = d.sqrt();
        }
        let u = GridFunction::new(g.clone(), vals, Exterior::zero()).unwrap();
        let rep = hopf_check(&u, &omega, 0.5).unwrap();
        assert!((rep.coefficient - 1.0).abs() < 1e-12 && rep.passes());
        assert!((rep.fit.exponent - 0.5).abs() < 1e-12);
        assert!(matches!(hopf_check(&zero, &omega, 0.5), Err(Error::Degenerate(_))));
    }

    #[test]
    fn hopf_on_getoor_solution() {
        let g = Grid::uniform(-2.0, 2.0, 801).unwrap();
        let k = KernelSpec::fractional_laplacian(1, 0.5).unwrap();
        let omega = Region::interval(&g, -1.0, 1.0, false).unwrap();
        let f = GridFunction::new(g.clone(), vec![1.0; g.len()], Exterior::zero()).unwrap();
        let u = solve_dirichlet(&k, &omega, &f, &zero_fn(&g)).unwrap();
        let rep = hopf_check(&u, &omega, 0.5).unwrap();
        assert!(rep.passes(), "{rep:?}");
        // sqrt((1-x)(1+x)) ~ sqrt(2 d) near the boundary
        assert!(rep.coefficient > 1.0 && rep.coefficient < 2f64.sqrt() * 1.05, "{}", rep.coefficient);
    }

    #[test]
    fn annulus_profile_matches_beta0() {
        // v = 0 in B_R, harmonic in B_2R \ B_R, v = 1 outside B_2R
        let s = 0.5;
        let k = KernelSpec::fractional_laplacian(1, s).unwrap();
        let g = Grid::uniform(-2.5, 2.5, 1001).unwrap();
        let ring = Region::from_indices(
            Region::interval(&g, -2.0, 2.0, false).unwrap().indices().into_iter().filter(|&i| g.x(i).abs() > 1.0 + 1e-9).collect(),
        );
        let data = GridFunction::from_fn(g.clone(), Exterior::constant(1.0), |x: f64| if x.abs() >= 2.0 { 1.0 } else { 0.0 }).unwrap();
        let v = solve_dirichlet(&k, &ring, &zero_fn(&g), &data).unwrap();
        let h = g.spacing();
        let samples: Vec<(f64, f64)> = (0..6)
            .map(|j| {
                let d = 8.0 * h * 2f64.powi(j);
                (d, v.value_at(1.0 + d))
            })
            .collect();
        let fit = fit_growth(&samples).unwrap();
        let b0 = beta0(1.0, 1.0, s, 1e-4, 1e-3).unwrap().beta0;
        assert!((fit.exponent - b0).abs() < 0.1, "{fit:?} vs {b0}");
    }

    #[test]
    fn boundary_exponent_above_critical_for_oscillating_kernel() {
        let s = 0.75;
        let k = KernelSpec::oscillating(1, s, 1.0, 2.0, 2.0 * std::f64::consts::PI / std::f64::consts::LN_2).unwrap();
        let g = Grid::uniform(-0.5, 1.5, 1001).unwrap();
        let omega = Region::interval(&g, 0.0, 1.0, false).unwrap();
        let f = GridFunction::new(g.clone(), vec![1.0; g.len()], Exterior::zero()).unwrap();
        let u = solve_dirichlet(&k, &omega, &f, &zero_fn(&g)).unwrap();
        let h = g.spacing();
        let samples: Vec<(f64, f64)> = (0..5)
            .map(|j| {
                let d = 8.0 * h * 2f64.powi(j);
                (d, u.value_at(d))
            })
            .collect();
        let fit = fit_growth(&samples).unwrap();
        let b0 = beta0(1.0, 2.0, s, 1e-4, 1e-3).unwrap().beta0;
        assert!(fit.exponent > 2.0 * s - 1.0, "{fit:?}");
        assert!(fit.exponent >= b0 - 0.05, "{fit:?} vs beta0 {b0}");
    }
}
