//! Growth exponent fits and discrete Hölder seminorms.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::mesh::{GridFunction, Region};

/// Least squares fit of `value = coefficient * r^exponent` in log-log
/// coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExponentFit {
    pub exponent: f64,
    pub coefficient: f64,
    /// Coefficient of determination of the log-log regression.
    pub r_squared: f64,
    pub r_min: f64,
    pub r_max: f64,
    /// Samples used in the regression.
    pub samples: usize,
    /// Samples dropped because the value was (numerically) zero.
    pub dropped: usize,
}

impl ExponentFit {
    /// `coefficient * r^exponent`.
    pub fn predict(&self, r: f64) -> f64 {
        self.coefficient * r.powf(self.exponent)
    }

    pub fn within(&self, target: f64, tol: f64) -> bool {
        (self.exponent - target).abs() <= tol
    }
}

/// Fits `value ~ c r^p`.  Values below `10 eps` are dropped; at least four
/// usable samples are required.
pub fn fit_growth(samples: &[(f64, f64)]) -> Result<ExponentFit> {
    if samples.iter().any(|&(r, v)| !(r > 0.0) || !(v >= 0.0) || !r.is_finite() || !v.is_finite()) {
        return Err(invalid("fit samples need r > 0 and finite values >= 0"));
    }
    let floor = 10.0 * f64::EPSILON;
    let used: Vec<(f64, f64)> = samples.iter().filter(|s| s.1 > floor).map(|&(r, v)| (r.ln(), v.ln())).collect();
    let dropped = samples.len() - used.len();
    if used.len() < 4 {
        return Err(Error::InsufficientSamples(format!("{} usable samples out of {} (need 4)", used.len(), samples.len())));
    }
    let m = used.len() as f64;
    let mx = used.iter().map(|p| p.0).sum::<f64>() / m;
    let my = used.iter().map(|p| p.1).sum::<f64>() / m;
    let sxx: f64 = used.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = used.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = used.iter().map(|p| (p.1 - my).powi(2)).sum();
    if sxx <= 0.0 {
        return Err(Error::Degenerate("all fit radii coincide".into()));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let sse: f64 = used.iter().map(|p| (p.1 - intercept - slope * p.0).powi(2)).sum();
    let r_squared = if syy > 0.0 { (1.0 - sse / syy).clamp(0.0, 1.0) } else { 1.0 };
    let (r_min, r_max) = used.iter().fold((f64::INFINITY, 0.0f64), |(a, b), p| (a.min(p.0.exp()), b.max(p.0.exp())));
    Ok(ExponentFit { exponent: slope, coefficient: intercept.exp(), r_squared, r_min, r_max, samples: used.len(), dropped })
}

/// `count` radii `r_max, r_max/2, ...` in increasing order.
pub fn dyadic_radii(r_max: f64, count: usize) -> Vec<f64> {
    (0..count).rev().map(|k| r_max * 0.5f64.powi(k as i32)).collect()
}

/// Keeps the radii that are at least `4h`.
pub fn resolved_radii(radii: &[f64], h: f64) -> Vec<f64> {
    radii.iter().copied().filter(|&r| r >= 4.0 * h * (1.0 - 1e-12)).collect()
}

/// `max |f(x_i)|` over grid nodes with `|x_i - x0| <= r`.
pub fn sup_on_ball(u: &GridFunction, x0: f64, r: f64, f: impl Fn(usize, f64) -> f64) -> f64 {
    let g = &u.grid;
    let mut best = 0.0f64;
    for i in 0..g.len() {
        if (g.x(i) - x0).abs() <= r * (1.0 + 1e-12) {
            best = best.max(f(i, u.values[i]).abs());
        }
    }
    best
}

/// Largest possible number of pairs before subsampling kicks in.
const PAIR_BUDGET: usize = 1_000_000;
const SEED: u64 = 0x005e_ed0f_ce11;

/// `max |u(x) - u(y)| / |x - y|^alpha` over node pairs in `a`.  Beyond a
/// million pairs, all short range pairs are kept and the rest are sampled
/// with a fixed seed, stratified over dyadic classes of index distance.
pub fn holder_seminorm(u: &GridFunction, a: &Region, alpha: f64) -> Result<f64> {
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(invalid(format!("Hölder exponent must lie in (0, 1], got {alpha}")));
    }
    let idx = a.indices();
    let m = idx.len();
    if m < 2 {
        return Ok(0.0);
    }
    let pts: Vec<Vec<f64>> = idx.iter().map(|&i| u.grid.point(i)).collect();
    let q = |p: usize, r: usize| {
        let d: f64 = pts[p].iter().zip(&pts[r]).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt();
        (u.values[idx[p]] - u.values[idx[r]]).abs() / d.powf(alpha)
    };
    let total = m * (m - 1) / 2;
    let mut best = 0.0f64;
    if total <= PAIR_BUDGET {
        for p in 0..m {
            for r in p + 1..m {
                best = best.max(q(p, r));
            }
        }
        return Ok(best);
    }
    // exhaustive over small gaps
    let near_gap = (PAIR_BUDGET / 2 / m).max(1);
    for p in 0..m {
        for r in p + 1..(p + 1 + near_gap).min(m) {
            best = best.max(q(p, r));
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let mut classes = Vec::new();
    let mut lo = near_gap + 1;
    while lo < m {
        let hi = (2 * lo).min(m);
        classes.push((lo, hi));
        lo = hi;
    }
    let per_class = (PAIR_BUDGET / 2) / classes.len().max(1);
    for (lo, hi) in classes {
        for _ in 0..per_class {
            let gap = rng.gen_range(lo..hi);
            let p = rng.gen_range(0..m - gap);
            best = best.max(q(p, p + gap));
        }
    }
    Ok(best)
}

/// Modulus of continuity `rho -> max_{|x-y| <= rho} |v(x) - v(y)|` of
/// nodal data on a uniform 1D grid with spacing `h`, at the given radii.
pub fn modulus_of_continuity(v: &[f64], h: f64, radii: &[f64]) -> Vec<(f64, f64)> {
    radii
        .iter()
        .map(|&rho| {
            let k = ((rho / h) + 1e-9).floor() as usize;
            let mut best = 0.0f64;
            for gap in 1..=k.min(v.len().saturating_sub(1)) {
                for i in 0..v.len() - gap {
                    best = best.max((v[i + gap] - v[i]).abs());
                }
            }
            (rho, best)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{Exterior, Grid};

    #[test]
    fn exact_power_fits() {
        let s: Vec<_> = dyadic_radii(1.0, 8).into_iter().map(|r| (r, 3.0 * r.powf(1.5))).collect();
        let f = fit_growth(&s).unwrap();
        assert!((f.exponent - 1.5).abs() < 1e-12);
        assert!((f.coefficient - 3.0).abs() < 1e-12);
        assert!((f.r_squared - 1.0).abs() < 1e-12);
    }

    #[test]
    fn perturbed_power_fit() {
        let s = 0.4;
        let samples: Vec<_> = (0..40)
            .map(|k| {
                let r = (-(k as f64) * 0.25).exp();
                (r, r.powf(s) * (1.0 + 0.1 * r.ln().sin()))
            })
            .collect();
        let f = fit_growth(&samples).unwrap();
        assert!((f.exponent - s).abs() < 0.03, "{f:?}");
        assert!(f.r_squared < 1.0);
    }

    #[test]
    fn zero_values_are_dropped_and_counted() {
        let samples = [(0.1, 0.0), (0.2, 0.2), (0.4, 0.4), (0.8, 0.8), (1.6, 1.6)];
        let f = fit_growth(&samples).unwrap();
        assert_eq!(f.dropped, 1);
        assert!((f.exponent - 1.0).abs() < 1e-12);
        assert!(matches!(fit_growth(&samples[..4]), Err(Error::InsufficientSamples(_))));
    }

    #[test]
    fn fit_is_scale_covariant() {
        let base: Vec<_> = dyadic_radii(2.0, 6).into_iter().map(|r| (r, r.powf(0.7) * (2.0 + r.cos()))).collect();
        let f0 = fit_growth(&base).unwrap();
        let scaled: Vec<_> = base.iter().map(|&(r, v)| (r, 4.0 * v)).collect();
        let f1 = fit_growth(&scaled).unwrap();
        assert!((f0.exponent - f1.exponent).abs() < 1e-13);
        assert!((f1.coefficient / f0.coefficient - 4.0).abs() < 1e-12);
        let stretched: Vec<_> = base.iter().map(|&(r, v)| (8.0 * r, v)).collect();
        let f2 = fit_growth(&stretched).unwrap();
        assert!((f0.exponent - f2.exponent).abs() < 1e-12);
    }

    #[test]
    fn holder_examples() {
        let g = Grid::uniform(-1.0, 1.0, 201).unwrap();
        let c = GridFunction::from_fn(g.clone(), Exterior::zero(), |_| 2.0).unwrap();
        assert_eq!(holder_seminorm(&c, &Region::all(&g), 0.5).unwrap(), 0.0);
        let lin = GridFunction::from_fn(g.clone(), Exterior::zero(), |x| x).unwrap();
        let a = Region::interval(&g, 0.0, 1.0, true).unwrap();
        assert!((holder_seminorm(&lin, &a, 1.0).unwrap() - 1.0).abs() < 1e-12);
        let root = GridFunction::from_fn(g.clone(), Exterior::zero(), |x: f64| x.max(0.0).sqrt()).unwrap();
        let v = holder_seminorm(&root, &Region::all(&g), 0.5).unwrap();
        assert!((v - 1.0).abs() < 1e-12, "{v}");
    }

    #[test]
    fn holder_subsampling_is_deterministic_and_sees_the_cusp() {
        let g = Grid::uniform(-1.0, 1.0, 3001).unwrap();
        let root = GridFunction::from_fn(g.clone(), Exterior::zero(), |x: f64| x.max(0.0).sqrt()).unwrap();
        let all = Region::all(&g);
        let a = holder_seminorm(&root, &all, 0.5).unwrap();
        let b = holder_seminorm(&root, &all, 0.5).unwrap();
        assert_eq!(a, b);
        assert!((a - 1.0).abs() < 1e-12);
    }

    #[test]
    fn holder_monotone_in_set_and_exponent() {
        let g = Grid::uniform(0.0, 1.0, 101).unwrap();
        let u = GridFunction::from_fn(g.clone(), Exterior::zero(), |x: f64| (3.0 * x).sin().abs()).unwrap();
        let small = Region::interval(&g, 0.2, 0.6, true).unwrap();
        let big = Region::all(&g);
        for &al in &[0.3, 0.6, 0.9] {
            assert!(holder_seminorm(&u, &small, al).unwrap() <= holder_seminorm(&u, &big, al).unwrap());
        }
        assert!(holder_seminorm(&u, &big, 0.3).unwrap() <= holder_seminorm(&u, &big, 0.9).unwrap());
    }

    #[test]
    fn modulus_of_sqrt() {
        let h = 1e-3;
        let v: Vec<f64> = (0..=1000).map(|i| (i as f64 * h).sqrt()).collect();
        let m = modulus_of_continuity(&v, h, &[0.01, 0.04]);
        assert!((m[0].1 - 0.1).abs() < 1e-12);
        assert!((m[1].1 - 0.2).abs() < 1e-12);
    }
}
