//! Gauss rules and the adaptive integrators shared by the kernel moments,
//! the exterior tails and the function based operator route.

use std::sync::OnceLock;

use crate::error::{Error, Result};

/// Gauss-Legendre nodes and weights on [-1, 1].
#[derive(Debug, Clone)]
pub struct GaussRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussRule {
    pub fn new(n: usize) -> Self {
        assert!(n >= 1);
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        let m = n.div_ceil(2);
        for i in 0..m {
            let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, d) = legendre(n, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let (_, d) = legendre(n, x);
            if d != 0.0 {
                dp = d;
            }
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = -x;
            weights[i] = w;
            nodes[n - 1 - i] = x;
            weights[n - 1 - i] = w;
        }
        Self { nodes, weights }
    }

    /// Integral of `f` over [a, b].
    #[inline]
    pub fn integrate(&self, a: f64, b: f64, mut f: impl FnMut(f64) -> f64) -> f64 {
        let c = 0.5 * (a + b);
        let r = 0.5 * (b - a);
        let mut s = 0.0;
        for (x, w) in self.nodes.iter().zip(&self.weights) {
            s += w * f(c + r * x);
        }
        s * r
    }
}

fn legendre(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

const CACHED: [usize; 6] = [4, 6, 10, 20, 32, 48];

/// Cached rule with at least `n` points from a small fixed menu.
pub fn gauss(n: usize) -> &'static GaussRule {
    static RULES: OnceLock<Vec<GaussRule>> = OnceLock::new();
    let rules = RULES.get_or_init(|| CACHED.iter().map(|&k| GaussRule::new(k)).collect());
    let idx = CACHED.iter().position(|&k| k >= n).unwrap_or(CACHED.len() - 1);
    &rules[idx]
}

/// Integral over [a, b] where the integrand is analytic on the interval and
/// its nearest singularity sits at distance `dist` from the interval.  The
/// interval is cut into pieces no longer than their distance to the
/// singularity (growing geometrically away from it, towards `b` when
/// `near_left`) and a 20 point rule is applied on each.
pub fn graded(f: &mut impl FnMut(f64) -> f64, a: f64, b: f64, dist: f64, near_left: bool) -> f64 {
    if b <= a {
        return 0.0;
    }
    let len = b - a;
    let rule_for = |piece: f64, d: f64| -> &'static GaussRule {
        let ratio = piece / d.max(f64::MIN_POSITIVE);
        if ratio <= 0.1 {
            gauss(6)
        } else if ratio <= 0.4 {
            gauss(10)
        } else {
            gauss(20)
        }
    };
    if dist >= len {
        return rule_for(len, dist).integrate(a, b, &mut *f);
    }
    let mut total = 0.0;
    let mut d = dist.max(len * 1e-300);
    let mut pos = 0.0;
    while pos < len {
        let step = d.min(len - pos);
        let (lo, hi) = if near_left { (a + pos, a + pos + step) } else { (b - pos - step, b - pos) };
        total += rule_for(step, d).integrate(lo, hi, &mut *f);
        pos += step;
        d += step;
    }
    total
}

// Gauss-Kronrod 7/15 abscissae and weights.
#[allow(clippy::excessive_precision)]
const XGK: [f64; 8] = [
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144845693013,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.000000000000000000000000000000000,
];
#[allow(clippy::excessive_precision)]
const WGK: [f64; 8] = [
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
];
#[allow(clippy::excessive_precision)]
const WG: [f64; 4] = [
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
];

/// Kronrod estimate, error estimate and integral of `|f|`.
fn gk15(f: &mut impl FnMut(f64) -> f64, a: f64, b: f64) -> (f64, f64, f64) {
    let c = 0.5 * (a + b);
    let r = 0.5 * (b - a);
    let fc = f(c);
    let mut resk = fc * WGK[7];
    let mut resg = fc * WG[3];
    let mut resabs = fc.abs() * WGK[7];
    for j in 0..7 {
        let dx = r * XGK[j];
        let (f1, f2) = (f(c - dx), f(c + dx));
        resk += WGK[j] * (f1 + f2);
        resabs += WGK[j] * (f1.abs() + f2.abs());
        if j % 2 == 1 {
            resg += WG[j / 2] * (f1 + f2);
        }
    }
    (resk * r, ((resk - resg) * r).abs(), resabs * r.abs())
}

/// Globally adaptive Gauss-Kronrod integration on [a, b].  Stops when the
/// summed error estimate is below `max(abs_tol, rel_tol * |I|)`, or below
/// the roundoff level `100 eps int |f|` when cancellation makes the
/// requested accuracy unreachable.
pub fn adaptive(f: &mut impl FnMut(f64) -> f64, a: f64, b: f64, abs_tol: f64, rel_tol: f64) -> Result<(f64, f64)> {
    if b == a {
        return Ok((0.0, 0.0));
    }
    const MAX_INTERVALS: usize = 4000;
    let (v, e, va) = gk15(f, a, b);
    if !v.is_finite() {
        return Err(Error::Quadrature { tolerance: abs_tol, estimate: f64::NAN });
    }
    let mut parts = vec![(a, b, v, e, va)];
    let mut total = v;
    let mut err = e;
    let mut total_abs = va;
    let floor = |ta: f64| 100.0 * f64::EPSILON * ta;
    while err > abs_tol.max(rel_tol * total.abs()).max(floor(total_abs)) {
        if parts.len() >= MAX_INTERVALS {
            if std::env::var("NLFB_DEBUG_QUAD").is_ok() {
                let mut p = parts.clone();
                p.sort_by(|x, y| y.3.total_cmp(&x.3));
                eprintln!("adaptive failure on [{a}, {b}] total {total} err {err} abs {total_abs}: {:?}", &p[..5]);
            }
            return Err(Error::Quadrature { tolerance: abs_tol.max(rel_tol * total.abs()), estimate: err });
        }
        let (idx, _) = parts.iter().enumerate().max_by(|x, y| x.1 .3.total_cmp(&y.1 .3)).expect("non-empty");
        let (lo, hi, pv, pe, pa) = parts.swap_remove(idx);
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            // Interval exhausted at machine resolution; accept what we have.
            parts.push((lo, hi, pv, 0.0, pa));
            err -= pe;
            continue;
        }
        let (v1, e1, a1) = gk15(f, lo, mid);
        let (v2, e2, a2) = gk15(f, mid, hi);
        if !(v1.is_finite() && v2.is_finite()) {
            return Err(Error::Quadrature { tolerance: abs_tol, estimate: f64::NAN });
        }
        total += v1 + v2 - pv;
        err += e1 + e2 - pe;
        total_abs += a1 + a2 - pa;
        parts.push((lo, mid, v1, e1, a1));
        parts.push((mid, hi, v2, e2, a2));
        if err < 0.0 {
            err = parts.iter().map(|p| p.3).sum();
        }
    }
    Ok((total, err))
}

/// Adaptive integration over a list of consecutive breakpoints.
pub fn adaptive_pieces(f: &mut impl FnMut(f64) -> f64, breaks: &[f64], abs_tol: f64, rel_tol: f64) -> Result<f64> {
    let mut total = 0.0;
    let pieces = breaks.len().saturating_sub(1).max(1) as f64;
    for w in breaks.windows(2) {
        if w[1] > w[0] {
            total += adaptive(f, w[0], w[1], abs_tol / pieces, rel_tol)?.0;
        }
    }
    Ok(total)
}

/// Integral of `f` over [a, inf) for an integrand bounded by
/// `bound(T) >= |int_T^inf f|`.  Pieces double in length starting from `d0`
/// (the distance to the nearest singularity left of `a`).  Once the bound
/// drops under the tolerance, `correction(T)` (an asymptotic estimate of the
/// remainder, possibly zero) is added.
pub fn semi_infinite(
    f: &mut impl FnMut(f64) -> f64,
    a: f64,
    d0: f64,
    bound: impl Fn(f64) -> f64,
    correction: impl Fn(f64) -> f64,
    rel_tol: f64,
    abs_tol: f64,
) -> Result<f64> {
    let rule = gauss(20);
    let mut total = 0.0;
    let mut lo = a;
    let mut step = d0.max(f64::MIN_POSITIVE);
    for _ in 0..4000 {
        let hi = lo + step;
        total += rule.integrate(lo, hi, &mut *f);
        lo = hi;
        step = lo - a + d0;
        let b = bound(lo);
        if b <= abs_tol.max(rel_tol * total.abs()) {
            return Ok(total + correction(lo));
        }
    }
    Err(Error::Quadrature { tolerance: rel_tol, estimate: bound(lo) })
}

/// Integral over [a, inf) by adaptive quadrature on pieces whose lengths
/// double starting from `first`, stopped once `bound(T) >= |int_T^inf f|`
/// falls below `rel_tol * max(|I|, scale)`.
pub fn adaptive_to_infinity(f: &mut impl FnMut(f64) -> f64, a: f64, first: f64, bound: impl Fn(f64) -> f64, rel_tol: f64) -> Result<f64> {
    adaptive_to_infinity_scaled(f, a, first, bound, rel_tol, 0.0)
}

/// [`adaptive_to_infinity`] with an absolute reference `scale`, for
/// integrals that may vanish.
pub fn adaptive_to_infinity_scaled(
    f: &mut impl FnMut(f64) -> f64,
    a: f64,
    first: f64,
    bound: impl Fn(f64) -> f64,
    rel_tol: f64,
    scale: f64,
) -> Result<f64> {
    let mut total: f64 = 0.0;
    let mut lo = a;
    let mut len = first.max(f64::MIN_POSITIVE);
    while lo.is_finite() && lo < 1e250 {
        let hi = lo + len;
        let reference = total.abs().max(scale);
        total += adaptive(f, lo, hi, 1e-300_f64.max(rel_tol * 1e-2 * reference), rel_tol)?.0;
        lo = hi;
        len *= 2.0;
        let b = bound(lo);
        if b <= rel_tol * total.abs().max(scale) || b <= 1e-300 {
            return Ok(total);
        }
    }
    Err(Error::Quadrature { tolerance: rel_tol, estimate: bound(lo) })
}

/// Integral of `t^p` over [a, b] for `0 < a < b <= inf`, accurate when the
/// interval is short compared to `a`.
pub fn power_integral(a: f64, b: f64, p: f64) -> f64 {
    let q = p + 1.0;
    if b.is_infinite() {
        assert!(q < 0.0, "divergent power integral");
        return -a.powf(q) / q;
    }
    let l = ((b - a) / a).ln_1p();
    if q.abs() < 1e-14 {
        return l;
    }
    // a^q * ((b/a)^q - 1) / q with expm1 to avoid cancellation.
    a.powf(q) * (q * l).exp_m1() / q
}
