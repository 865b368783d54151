//! Kernel descriptions.
//!
//! A kernel is a symmetric density `K(h)` with `lambda |h|^{-n-2s} <= K(h) <=
//! Lambda |h|^{-n-2s}`.  Radial families are stored through their envelope
//! ratio `phi(sigma |h|)` so that rescaling only touches `sigma`.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use statrs::function::gamma::gamma;

use crate::error::{invalid, Error, Result};
use crate::quadrature::{adaptive, gauss, graded, power_integral};

/// Tag describing where a kernel came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelFamily {
    FractionalLaplacian,
    Oscillating,
    DyadicPiecewise,
    Radial,
    General,
}

type RadialFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;
type GeneralFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;

#[derive(Clone)]
enum Profile {
    /// `coeff |h|^{-n-2s}`
    Power {
        coeff: f64,
    },
    /// `|h|^{-n-2s} (lo + (hi - lo) (1 + sin(freq ln(sigma |h|))) / 2)`
    Oscillating {
        lo: f64,
        hi: f64,
        freq: f64,
        sigma: f64,
    },
    /// `|h|^{-n-2s}` times `lo` on shells `2^k <= sigma |h| < 2^{k+1}` with k
    /// even and `hi` with k odd.
    Dyadic {
        lo: f64,
        hi: f64,
        sigma: f64,
    },
    /// Full density as a function of `|h|`.
    Radial(RadialFn),
    General(GeneralFn),
}

/// A symmetric kernel of order `2s` in dimension `n` with envelope constants.
#[derive(Clone)]
pub struct KernelSpec {
    dim: usize,
    order: f64,
    lower: f64,
    upper: f64,
    family: KernelFamily,
    period: Option<u32>,
    profile: Profile,
}

impl fmt::Debug for KernelSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("KernelSpec")
            .field("dim", &self.dim)
            .field("s", &self.order)
            .field("lambda", &self.lower)
            .field("Lambda", &self.upper)
            .field("family", &self.family)
            .finish()
    }
}

/// The constant `c_{n,s}` for which `c_{n,s}/2 |h|^{-n-2s}` yields the
/// fractional Laplacian `(-Delta)^s` under `Lu = 2 pv int (u(x)-u(x+h))K(h) dh`.
pub fn fractional_constant(n: usize, s: f64) -> f64 {
    let n = n as f64;
    // |Gamma(-s)| = Gamma(1-s)/s on (0,1)
    4f64.powf(s) * gamma(n / 2.0 + s) / (PI.powf(n / 2.0) * gamma(1.0 - s) / s)
}

fn check_order(n: usize, s: f64) -> Result<()> {
    if n == 0 || n > 3 {
        return Err(invalid(format!("dimension {n} is not supported")));
    }
    if !(s > 0.0 && s < 1.0) {
        return Err(invalid(format!("order s = {s} must lie in (0,1)")));
    }
    Ok(())
}

fn check_envelope(lambda: f64, cap: f64) -> Result<()> {
    if !(lambda > 0.0 && cap >= lambda && cap.is_finite()) {
        return Err(invalid(format!("envelope constants must satisfy 0 < lambda <= Lambda, got ({lambda}, {cap})")));
    }
    Ok(())
}

fn unit_sphere_area(k: usize) -> f64 {
    // surface measure of S^{k-1} in R^k
    let k = k as f64;
    2.0 * PI.powf(k / 2.0) / gamma(k / 2.0)
}

impl KernelSpec {
    /// Fractional Laplacian kernel `c_{n,s}/2 |h|^{-n-2s}`.
    pub fn fractional_laplacian(n: usize, s: f64) -> Result<Self> {
        check_order(n, s)?;
        let coeff = 0.5 * fractional_constant(n, s);
        Ok(Self::power(n, s, coeff, KernelFamily::FractionalLaplacian))
    }

    /// Pure power kernel `coeff |h|^{-n-2s}`.
    pub fn power_kernel(n: usize, s: f64, coeff: f64) -> Result<Self> {
        check_order(n, s)?;
        check_envelope(coeff, coeff)?;
        Ok(Self::power(n, s, coeff, KernelFamily::Radial))
    }

    fn power(n: usize, s: f64, coeff: f64, family: KernelFamily) -> Self {
        Self { dim: n, order: s, lower: coeff, upper: coeff, family, period: Some(1), profile: Profile::Power { coeff } }
    }

    /// Radial kernel whose envelope ratio oscillates in `log |h|` between
    /// `lambda` and `Lambda`.  When `log_frequency * ln 2` is a multiple of
    /// `2 pi / p` the kernel is invariant under rescaling by `2^p`.
    pub fn oscillating(n: usize, s: f64, lambda: f64, cap: f64, log_frequency: f64) -> Result<Self> {
        check_order(n, s)?;
        check_envelope(lambda, cap)?;
        if !log_frequency.is_finite() {
            return Err(invalid("log frequency must be finite"));
        }
        let period = if cap == lambda { Some(1) } else { oscillation_period(log_frequency) };
        Ok(Self {
            dim: n,
            order: s,
            lower: lambda,
            upper: cap,
            family: KernelFamily::Oscillating,
            period,
            profile: Profile::Oscillating { lo: lambda, hi: cap, freq: log_frequency, sigma: 1.0 },
        })
    }

    /// Kernel equal to `lambda |h|^{-n-2s}` on even dyadic shells and
    /// `Lambda |h|^{-n-2s}` on odd ones.
    pub fn dyadic_piecewise(n: usize, s: f64, lambda: f64, cap: f64) -> Result<Self> {
        check_order(n, s)?;
        check_envelope(lambda, cap)?;
        Ok(Self {
            dim: n,
            order: s,
            lower: lambda,
            upper: cap,
            family: KernelFamily::DyadicPiecewise,
            period: Some(if cap == lambda { 1 } else { 2 }),
            profile: Profile::Dyadic { lo: lambda, hi: cap, sigma: 1.0 },
        })
    }

    /// Radial kernel given by its density as a function of `|h|`.  The
    /// envelope is checked on a logarithmic sample of radii.
    pub fn radial(n: usize, s: f64, lambda: f64, cap: f64, density: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Result<Self> {
        check_order(n, s)?;
        check_envelope(lambda, cap)?;
        let k = Self {
            dim: n,
            order: s,
            lower: lambda,
            upper: cap,
            family: KernelFamily::Radial,
            period: None,
            profile: Profile::Radial(Arc::new(density)),
        };
        for i in 0..=240 {
            let r = 10f64.powf(-6.0 + 0.05 * i as f64);
            let ratio = k.envelope_ratio(r);
            if !(ratio >= lambda * (1.0 - 1e-12) && ratio <= cap * (1.0 + 1e-12)) {
                return Err(invalid(format!("kernel violates envelope at |h| = {r:e} (ratio {ratio})")));
            }
        }
        Ok(k)
    }

    /// Arbitrary (possibly anisotropic) kernel.  Symmetry and the envelope
    /// are checked on a deterministic sample of directions and radii.
    pub fn general(n: usize, s: f64, lambda: f64, cap: f64, density: impl Fn(&[f64]) -> f64 + Send + Sync + 'static) -> Result<Self> {
        check_order(n, s)?;
        check_envelope(lambda, cap)?;
        let k = Self {
            dim: n,
            order: s,
            lower: lambda,
            upper: cap,
            family: KernelFamily::General,
            period: None,
            profile: Profile::General(Arc::new(density)),
        };
        let mut h = vec![0.0; n];
        let mut mh = vec![0.0; n];
        for i in 0..=120 {
            let r = 10f64.powf(-6.0 + 0.1 * i as f64);
            for j in 0..16 {
                let theta = 2.0 * PI * (j as f64 + 0.37) / 16.0;
                let phi = 0.61 * (j as f64 + 0.5);
                let dir = [theta.cos() * phi.sin().abs().max(0.3), theta.sin(), phi.cos()];
                let norm: f64 = dir[..n].iter().map(|x| x * x).sum::<f64>().sqrt();
                for d in 0..n {
                    h[d] = r * dir[d] / norm;
                    mh[d] = -h[d];
                }
                let a = k.density(&h);
                let b = k.density(&mh);
                if (a - b).abs() > 1e-12 * a.abs().max(b.abs()) {
                    return Err(invalid(format!("kernel is not symmetric at h = {h:?}")));
                }
                let ratio = a * r.powf(n as f64 + 2.0 * s);
                if !(ratio >= lambda * (1.0 - 1e-12) && ratio <= cap * (1.0 + 1e-12)) {
                    return Err(invalid(format!("kernel violates envelope at h = {h:?} (ratio {ratio})")));
                }
            }
        }
        Ok(k)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }
    pub fn order(&self) -> f64 {
        self.order
    }
    pub fn lower(&self) -> f64 {
        self.lower
    }
    pub fn upper(&self) -> f64 {
        self.upper
    }
    pub fn family(&self) -> KernelFamily {
        self.family
    }

    /// Smallest `p >= 1` with `K_{2^p} = K`, when known.
    pub fn dyadic_period(&self) -> Option<u32> {
        self.period
    }

    /// True when the density is exactly a multiple of `|h|^{-n-2s}`.
    pub fn is_power(&self) -> bool {
        matches!(self.profile, Profile::Power { .. })
    }

    /// `phi(r) = K(r e) r^{n+2s}` for radial kernels (for `General` the first
    /// coordinate axis is used).
    pub fn envelope_ratio(&self, r: f64) -> f64 {
        let e = self.dim as f64 + 2.0 * self.order;
        match &self.profile {
            Profile::Power { coeff } => *coeff,
            Profile::Oscillating { lo, hi, freq, sigma } => lo + (hi - lo) * 0.5 * (1.0 + (freq * (sigma * r).ln()).sin()),
            Profile::Dyadic { lo, hi, sigma } => {
                let k = (sigma * r).log2().floor() as i64;
                if k.rem_euclid(2) == 0 {
                    *lo
                } else {
                    *hi
                }
            }
            Profile::Radial(f) => f(r) * r.powf(e),
            Profile::General(f) => {
                let mut h = vec![0.0; self.dim];
                h[0] = r;
                f(&h) * r.powf(e)
            }
        }
    }

    /// Density as a function of `|h|`; for `General` kernels in one
    /// dimension this is `K(r)`.
    #[inline]
    pub fn radial_density(&self, r: f64) -> f64 {
        let e = self.dim as f64 + 2.0 * self.order;
        match &self.profile {
            Profile::Power { coeff } => coeff * r.powf(-e),
            Profile::Radial(f) => f(r),
            Profile::General(f) => {
                let mut h = vec![0.0; self.dim];
                h[0] = r;
                f(&h)
            }
            _ => self.envelope_ratio(r) * r.powf(-e),
        }
    }

    /// Density at `h`.
    pub fn density(&self, h: &[f64]) -> f64 {
        match &self.profile {
            Profile::General(f) => f(h),
            _ => {
                let r = h.iter().map(|x| x * x).sum::<f64>().sqrt();
                self.radial_density(r)
            }
        }
    }

    /// `K_r(h) = r^{n+2s} K(r h)`.
    pub fn rescale(&self, r: f64) -> Result<Self> {
        if !(r > 0.0 && r.is_finite()) {
            return Err(invalid(format!("rescaling factor must be positive, got {r}")));
        }
        let e = self.dim as f64 + 2.0 * self.order;
        let factor = r.powf(e);
        let profile = match &self.profile {
            Profile::Power { coeff } => Profile::Power { coeff: *coeff },
            Profile::Oscillating { lo, hi, freq, sigma } => Profile::Oscillating { lo: *lo, hi: *hi, freq: *freq, sigma: sigma * r },
            Profile::Dyadic { lo, hi, sigma } => Profile::Dyadic { lo: *lo, hi: *hi, sigma: sigma * r },
            Profile::Radial(f) => {
                let f = f.clone();
                Profile::Radial(Arc::new(move |t| factor * f(r * t)))
            }
            Profile::General(f) => {
                let f = f.clone();
                Profile::General(Arc::new(move |h: &[f64]| {
                    let scaled: Vec<f64> = h.iter().map(|x| x * r).collect();
                    factor * f(&scaled)
                }))
            }
        };
        Ok(Self { profile, ..self.clone() })
    }

    /// Radii in (a, b) where the density jumps.
    pub fn breakpoints(&self, a: f64, b: f64) -> Vec<f64> {
        match &self.profile {
            Profile::Dyadic { sigma, .. } if b > a && a >= 0.0 => {
                let lo = if a > 0.0 { (sigma * a).log2().floor() as i64 } else { -1100 };
                let hi = (sigma * b).log2().ceil() as i64;
                (lo.max(-1100)..=hi).map(|k| 2f64.powi(k as i32) / sigma).filter(|&t| t > a && t < b).collect()
            }
            _ => Vec::new(),
        }
    }

    fn require_1d(&self) -> Result<()> {
        if self.dim != 1 {
            return Err(Error::Unsupported(format!("one dimensional kernel required (got dimension {}); reduce it first", self.dim)));
        }
        Ok(())
    }

    /// Integral of `t^p K(t)` over `[a, b]`, `0 <= a < b <= inf`, for a one
    /// dimensional kernel.  Requires `p > 2s` when `a = 0` and `p < 2s` when
    /// `b = inf`.
    pub fn moment(&self, a: f64, b: f64, p: f64) -> Result<f64> {
        self.require_1d()?;
        let s2 = 2.0 * self.order;
        if !(a >= 0.0 && b > a) {
            return Ok(0.0);
        }
        if a == 0.0 && p <= s2 {
            return Err(invalid("moment diverges at the origin"));
        }
        if b.is_infinite() && p >= s2 {
            return Err(invalid("moment diverges at infinity"));
        }
        if let Profile::Power { coeff } = self.profile {
            if a == 0.0 {
                return Ok(coeff * b.powf(p - s2) / (p - s2));
            }
            return Ok(coeff * power_integral(a, b, p - 1.0 - s2));
        }
        let mid = 0.5 * (self.lower + self.upper);
        let tol = 1e-15;
        let mut f = |t: f64| t.powf(p) * self.radial_density(t);
        let mut total = 0.0;
        // Near the origin: geometric pieces towards zero.
        let (start, end) = if a == 0.0 {
            let end = if b.is_infinite() { 1.0 } else { b };
            let mut hi = end;
            let mut acc = 0.0;
            loop {
                let lo = 0.5 * hi;
                acc += self.piece(&mut f, lo, hi);
                hi = lo;
                let rem = self.upper * hi.powf(p - s2) / (p - s2);
                if rem <= tol * acc.abs() {
                    acc += mid * hi.powf(p - s2) / (p - s2);
                    break;
                }
            }
            total += acc;
            (end, b)
        } else {
            (a, b)
        };
        if start < end {
            if end.is_infinite() {
                let mut lo = start;
                let mut acc = 0.0;
                loop {
                    let hi = 2.0 * lo;
                    acc += self.piece(&mut f, lo, hi);
                    lo = hi;
                    let rem = self.upper * lo.powf(p - s2) / (s2 - p);
                    if rem <= tol * (acc + total).abs() {
                        acc += mid * lo.powf(p - s2) / (s2 - p);
                        break;
                    }
                }
                total += acc;
            } else {
                let mut lo = start;
                while lo < end {
                    let hi = (2.0 * lo).min(end);
                    total += self.piece(&mut f, lo, hi);
                    lo = hi;
                }
            }
        }
        Ok(total)
    }

    /// `[lo, hi]` with `hi <= 2 lo`, split at jumps.
    fn piece(&self, f: &mut impl FnMut(f64) -> f64, lo: f64, hi: f64) -> f64 {
        let rule = gauss(20);
        let mut acc = 0.0;
        let mut x = lo;
        for bp in self.breakpoints(lo, hi) {
            acc += rule.integrate(x, bp, &mut *f);
            x = bp;
        }
        acc + rule.integrate(x, hi, &mut *f)
    }

    /// Weights of the two hat functions on the cell `[a, b]`, `0 < a < b`:
    /// `(int K(t)(b-t)/(b-a), int K(t)(t-a)/(b-a))`.
    pub fn linear_cell_moments(&self, a: f64, b: f64) -> Result<(f64, f64)> {
        self.require_1d()?;
        let len = b - a;
        if let Profile::Power { .. } = self.profile {
            if len < 0.5 * a {
                // Short cell far from the origin: quadrature avoids the
                // cancellation in the closed form.
                return Ok(self.cell_by_quadrature(a, b));
            }
            let m0 = self.moment(a, b, 0.0)?;
            let m1 = self.moment(a, b, 1.0)?;
            let wa = (b * m0 - m1) / len;
            let wb = (m1 - a * m0) / len;
            return Ok((wa, wb));
        }
        Ok(self.cell_by_quadrature(a, b))
    }

    fn cell_by_quadrature(&self, a: f64, b: f64) -> (f64, f64) {
        let len = b - a;
        let mut wa = 0.0;
        let mut wb = 0.0;
        let mut x = a;
        let mut bps = self.breakpoints(a, b);
        bps.push(b);
        for bp in bps {
            let mut fa = |t: f64| self.radial_density(t) * (b - t) / len;
            wa += graded(&mut fa, x, bp, x, true);
            let mut fb = |t: f64| self.radial_density(t) * (t - a) / len;
            wb += graded(&mut fb, x, bp, x, true);
            x = bp;
        }
        (wa, wb)
    }

    /// Integral of `K(t)` over `[a, inf)`.
    pub fn tail_mass(&self, a: f64) -> Result<f64> {
        self.moment(a, f64::INFINITY, 0.0)
    }

    /// One dimensional kernel `K~(t) = int_{e-perp} K(h' + t e) dh'`.  Power
    /// kernels reduce to `c0 |t|^{-1-2s}` times their coefficient; the
    /// constant `c0` is returned alongside and computed by quadrature.
    pub fn reduce_to_1d(&self, direction: &[f64]) -> Result<(KernelSpec, f64)> {
        let n = self.dim;
        if direction.len() != n {
            return Err(invalid("direction has the wrong dimension"));
        }
        let norm = direction.iter().map(|x| x * x).sum::<f64>().sqrt();
        if !(norm > 0.0) {
            return Err(invalid("direction must be nonzero"));
        }
        let e: Vec<f64> = direction.iter().map(|x| x / norm).collect();
        if n == 1 {
            return Ok((self.clone(), 1.0));
        }
        let s = self.order;
        let area = unit_sphere_area(n - 1);
        // c0 = |S^{n-2}| int_0^inf rho^{n-2} (1 + rho^2)^{-(n+2s)/2} d rho
        let ex = (n as f64 + 2.0 * s) / 2.0;
        let c0 = area * reduced_radial_integral(n, s, &|v| (1.0 + v * v).powf(-ex), 1.0, 1.0, 1e-14)?;
        let period = self.period;
        let reduced = match &self.profile {
            Profile::Power { coeff } => KernelSpec {
                dim: 1,
                order: s,
                lower: coeff * c0,
                upper: coeff * c0,
                family: self.family,
                period: Some(1),
                profile: Profile::Power { coeff: coeff * c0 },
            },
            Profile::General(f) => {
                if n != 2 {
                    return Err(Error::Unsupported("anisotropic reduction is implemented for n = 2".into()));
                }
                let f = f.clone();
                let perp = [-e[1], e[0]];
                let (lo, hi) = (self.lower, self.upper);
                let density = move |t: f64| {
                    let t = t.abs();
                    let g = |u: f64| {
                        let a = f(&[t * e[0] + u * perp[0], t * e[1] + u * perp[1]]);
                        let b = f(&[t * e[0] - u * perp[0], t * e[1] - u * perp[1]]);
                        a + b
                    };
                    // int_0^inf g(u) du with u = t v
                    t * reduced_radial_integral(2, s, &|v| g(t * v) * t.powf(2.0 + 2.0 * s) * 0.5, lo, hi, 1e-12).unwrap_or(f64::NAN)
                        * 2.0
                        * t.powf(-2.0 - 2.0 * s)
                };
                KernelSpec {
                    dim: 1,
                    order: s,
                    lower: lo * c0,
                    upper: hi * c0,
                    family: KernelFamily::General,
                    period,
                    profile: Profile::Radial(Arc::new(density)),
                }
            }
            _ => {
                let me = self.clone();
                let (lo, hi) = (self.lower, self.upper);
                let density = move |t: f64| {
                    let t = t.abs();
                    // |S^{n-2}| t^{n-1} int_0^inf v^{n-2} K(t sqrt(1+v^2)) dv
                    let g = |v: f64| {
                        let r = t * (1.0 + v * v).sqrt();
                        me.envelope_ratio(r) * (1.0 + v * v).powf(-ex)
                    };
                    area * t.powf(-1.0 - 2.0 * s) * reduced_radial_integral(n, s, &g, lo, hi, 1e-12).unwrap_or(f64::NAN)
                };
                KernelSpec {
                    dim: 1,
                    order: s,
                    lower: lo * c0,
                    upper: hi * c0,
                    family: self.family,
                    period,
                    profile: Profile::Radial(Arc::new(density)),
                }
            }
        };
        // Probe the reduced density once so quadrature failures surface here.
        let probe = reduced.radial_density(1.0);
        if !probe.is_finite() {
            return Err(Error::Quadrature { tolerance: 1e-12, estimate: f64::NAN });
        }
        Ok((reduced, c0))
    }
}

fn oscillation_period(freq: f64) -> Option<u32> {
    // phase shift per dyadic rescaling
    let shift = freq * std::f64::consts::LN_2 / (2.0 * PI);
    for p in 1..=8u32 {
        let x = shift * p as f64;
        if (x - x.round()).abs() < 1e-10 {
            return Some(p);
        }
    }
    None
}

/// `int_0^inf v^{n-2} g(v) dv` for `g(v) ~ envelope (1+v^2)^{-(n+2s)/2}`,
/// integrated over [0,1] and dyadic pieces beyond with a mid-envelope tail.
fn reduced_radial_integral(n: usize, s: f64, g: &dyn Fn(f64) -> f64, lo: f64, hi: f64, tol: f64) -> Result<f64> {
    let w = |v: f64| if n == 2 { 1.0 } else { v.powi(n as i32 - 2) };
    let mut f = |v: f64| w(v) * g(v);
    let (mut total, _) = adaptive(&mut f, 0.0, 1.0, tol * 1e-3, tol)?;
    let mut a = 1.0;
    let decay = 1.0 + 2.0 * s;
    loop {
        let b = 2.0 * a;
        total += adaptive(&mut f, a, b, tol * 1e-3 * total.abs(), tol)?.0;
        a = b;
        let rem = hi * a.powf(-decay) / decay;
        if rem <= tol * total.abs() {
            total += 0.5 * (lo + hi) * a.powf(-decay) / decay;
            return Ok(total);
        }
        if a > 1e300 {
            return Err(Error::Quadrature { tolerance: tol, estimate: rem });
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fractional_constant_known_values() {
        assert!((fractional_constant(1, 0.5) - 1.0 / PI).abs() < 1e-14);
        // n = 2, s = 1/2: c = 1/(2 pi)
        assert!((fractional_constant(2, 0.5) - 1.0 / (2.0 * PI)).abs() < 1e-14);
        // n = 1, s = 0.3, frozen from the formula with mpmath
        assert!((fractional_constant(1, 0.3) - 0.230_096_381_681_632_1).abs() < 1e-12);
    }

    #[test]
    fn envelope_is_respected() {
        let k = KernelSpec::oscillating(1, 0.4, 1.0, 3.0, 5.0).unwrap();
        for i in 0..2000 {
            let r = 10f64.powf(-8.0 + 0.008 * i as f64);
            let v = k.radial_density(r) * r.powf(1.8);
            assert!((1.0 - 1e-12..=3.0 + 1e-12).contains(&v));
        }
        assert!(KernelSpec::radial(1, 0.5, 1.0, 2.0, |r| 3.0 * r.powi(-2)).is_err());
        assert!(KernelSpec::oscillating(1, 1.2, 1.0, 2.0, 1.0).is_err());
        assert!(KernelSpec::oscillating(1, 0.5, 2.0, 1.0, 1.0).is_err());
    }

    #[test]
    fn rescaling_composes() {
        let k = KernelSpec::oscillating(1, 0.5, 1.0, 2.0, 3.0).unwrap();
        let a = k.rescale(2.0).unwrap().rescale(3.0).unwrap();
        let b = k.rescale(6.0).unwrap();
        for &t in &[0.01, 0.3, 1.0, 7.0] {
            assert!((a.radial_density(t) / b.radial_density(t) - 1.0).abs() < 1e-13);
        }
        let p = KernelSpec::fractional_laplacian(1, 0.3).unwrap();
        let q = p.rescale(5.0).unwrap();
        assert_eq!(p.radial_density(0.7), q.radial_density(0.7));
    }

    #[test]
    fn oscillation_phase_shift_under_rescaling() {
        let w = 2.3;
        let k = KernelSpec::oscillating(1, 0.5, 1.0, 2.0, w).unwrap();
        let k2 = k.rescale(2.0).unwrap();
        let t: f64 = 0.77;
        let expect = 1.0 + 0.5 * (1.0 + (w * t.ln() + w * 2f64.ln()).sin());
        assert!((k2.envelope_ratio(t) - expect).abs() < 1e-14);
    }

    #[test]
    fn dyadic_periods() {
        let w = 2.0 * PI / std::f64::consts::LN_2;
        assert_eq!(KernelSpec::oscillating(1, 0.5, 1.0, 2.0, w).unwrap().dyadic_period(), Some(1));
        assert_eq!(KernelSpec::oscillating(1, 0.5, 1.0, 2.0, w / 2.0).unwrap().dyadic_period(), Some(2));
        assert_eq!(KernelSpec::oscillating(1, 0.5, 1.0, 2.0, 1.0).unwrap().dyadic_period(), None);
        assert_eq!(KernelSpec::dyadic_piecewise(1, 0.5, 1.0, 2.0).unwrap().dyadic_period(), Some(2));
        let d = KernelSpec::dyadic_piecewise(1, 0.5, 1.0, 2.0).unwrap();
        let d4 = d.rescale(4.0).unwrap();
        for &t in &[0.013, 0.3, 1.5, 7.0] {
            assert!((d.radial_density(t) - d4.radial_density(t)).abs() <= 1e-12 * d.radial_density(t));
        }
    }

    #[test]
    fn moments_agree_with_adaptive_quadrature() {
        let kernels = [
            KernelSpec::fractional_laplacian(1, 0.3).unwrap(),
            KernelSpec::oscillating(1, 0.6, 1.0, 2.0, 4.0).unwrap(),
            KernelSpec::dyadic_piecewise(1, 0.5, 1.0, 4.0).unwrap(),
        ];
        for k in &kernels {
            for &(a, b, p) in &[(0.1, 0.2, 0.0), (1.0, 3.0, 1.0), (0.01, 5.0, 2.0), (3.0, 3.01, 0.0)] {
                let mut bps = vec![a];
                bps.extend(k.breakpoints(a, b));
                bps.push(b);
                let mut f = |t: f64| t.powf(p) * k.radial_density(t);
                let oracle = crate::quadrature::adaptive_pieces(&mut f, &bps, 0.0, 1e-13).unwrap();
                let m = k.moment(a, b, p).unwrap();
                assert!((m / oracle - 1.0).abs() < 1e-11, "{k:?} {a} {b} {p}: {m} vs {oracle}");
            }
            // tail mass against a substitution t = 1/u^2 style oracle
            let tail = k.tail_mass(0.5).unwrap();
            let mut g = |u: f64| {
                // t = 0.5 / u, dt = 0.5/u^2 du over u in (0,1]
                let t = 0.5 / u;
                k.radial_density(t) * 0.5 / (u * u)
            };
            let mut bps: Vec<f64> = k.breakpoints(0.5, 1e12).iter().map(|t| 0.5 / t).collect();
            bps.push(0.0);
            bps.push(1.0);
            bps.sort_by(f64::total_cmp);
            let oracle = crate::quadrature::adaptive_pieces(&mut g, &bps, 1e-15, 1e-13).unwrap();
            assert!((tail / oracle - 1.0).abs() < 1e-9, "{k:?}: {tail} vs {oracle}");
        }
    }

    #[test]
    fn near_moment_of_power_kernel() {
        let k = KernelSpec::power_kernel(1, 0.7, 1.0).unwrap();
        let m = k.moment(0.0, 0.5, 2.0).unwrap();
        assert!((m - 0.5f64.powf(0.6) / 0.6).abs() < 1e-14);
        let o = KernelSpec::oscillating(1, 0.7, 1.0, 1.0, 3.0).unwrap();
        assert!((o.moment(0.0, 0.5, 2.0).unwrap() / m - 1.0).abs() < 1e-12);
    }

    #[test]
    fn cell_moments_sum_to_mass() {
        let k = KernelSpec::oscillating(1, 0.5, 1.0, 2.0, 9.0).unwrap();
        for j in [1usize, 2, 5, 40, 3000] {
            let h = 0.01;
            let (a, b) = (j as f64 * h, (j + 1) as f64 * h);
            let (wa, wb) = k.linear_cell_moments(a, b).unwrap();
            let m0 = k.moment(a, b, 0.0).unwrap();
            let m1 = k.moment(a, b, 1.0).unwrap();
            assert!(((wa + wb) / m0 - 1.0).abs() < 1e-13);
            assert!(((a * wa + b * wb) / m1 - 1.0).abs() < 1e-12);
        }
        let p = KernelSpec::fractional_laplacian(1, 0.5).unwrap();
        let (wa, wb) = p.linear_cell_moments(1.0, 2.0).unwrap();
        // closed form: int_1^2 (2-t) t^{-2} dt / pi and int (t-1) t^{-2} dt / pi
        let c = 0.5 / PI;
        assert!((wa - c * (2.0 * 0.5 - 2f64.ln())).abs() < 1e-15);
        assert!((wb - c * (2f64.ln() - 0.5)).abs() < 1e-15);
    }

    #[test]
    fn reduction_of_planar_fractional_kernel() {
        let k = KernelSpec::fractional_laplacian(2, 0.5).unwrap();
        let (r, c0) = k.reduce_to_1d(&[1.0, 0.0]).unwrap();
        assert!((c0 - 2.0).abs() < 1e-10);
        let target = KernelSpec::fractional_laplacian(1, 0.5).unwrap();
        assert!((r.radial_density(0.37) / target.radial_density(0.37) - 1.0).abs() < 1e-10);
        for &s in &[0.2, 0.5, 0.8] {
            let k = KernelSpec::fractional_laplacian(2, s).unwrap();
            let (r, _) = k.reduce_to_1d(&[0.6, 0.8]).unwrap();
            let t = KernelSpec::fractional_laplacian(1, s).unwrap();
            assert!((r.radial_density(1.3) / t.radial_density(1.3) - 1.0).abs() < 1e-9, "s={s}");
        }
    }

    #[test]
    fn reduction_of_radial_and_general_kernels_agree() {
        let osc = KernelSpec::oscillating(2, 0.5, 1.0, 2.0, 3.0).unwrap();
        let (r1, _) = osc.reduce_to_1d(&[1.0, 0.0]).unwrap();
        let o2 = osc.clone();
        let gen = KernelSpec::general(2, 0.5, 1.0, 2.0, move |h| o2.density(h)).unwrap();
        let (r2, _) = gen.reduce_to_1d(&[0.0, 1.0]).unwrap();
        for &t in &[0.05, 0.5, 2.0] {
            let a = r1.radial_density(t);
            let b = r2.radial_density(t);
            assert!((a / b - 1.0).abs() < 1e-8, "t={t}: {a} {b}");
            let ratio = a * t * t;
            assert!((2.0 - 1e-9..=4.0 + 1e-9).contains(&ratio));
        }
    }
}
