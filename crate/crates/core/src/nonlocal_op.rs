//! Collocation discretisation of `Lu(x) = 2 int_0^inf (2u(x) - u(x+t) - u(x-t)) K(t) dt`.
//!
//! On a uniform grid with spacing `h` the integrand is split into a near
//! part `[0, h]`, modelled by the second difference, and cells `[jh, (j+1)h]`
//! on which `u` is the linear interpolant.  This yields
//!
//! ```text
//! (L_h u)_i = sum_k a_ik (u_i - u_k) + 2 (u_i m_i - l_i)
//! ```
//!
//! where `m_i` is the kernel mass beyond the grid and `l_i` the exterior
//! load.  The weights are nonnegative, symmetric between interior nodes and
//! the rows of a translation invariant problem sum to zero, so the matrix
//! restricted to an interior set is a symmetric M-matrix.
//!
//! The energy used throughout is the quadratic form induced by the same
//! weights, so that its first variation is exactly `2h L_h`.

use std::f64::consts::PI;

use faer::Mat;

use crate::error::{invalid, Error, Result};
use crate::kernels::KernelSpec;
use crate::mesh::{Exterior, Grid, GridFunction, Region, SideExterior, Tail};
use crate::quadrature::{adaptive, adaptive_to_infinity, adaptive_to_infinity_scaled};

/// Precomputed weights of the collocation scheme on a fixed grid.
#[derive(Debug, Clone)]
pub struct Operator {
    kernel: KernelSpec,
    grid: Grid,
    h: f64,
    n: usize,
    /// `int_0^h t^2 K / h^2`
    near: f64,
    /// hat weight of cell `j` for its left node
    alpha: Vec<f64>,
    /// full interior weight at offset `m`
    toeplitz: Vec<f64>,
    /// `prefix[m] = sum_{1..=m} toeplitz`
    prefix: Vec<f64>,
    /// `int_{mh}^inf K`
    tail_mass: Vec<f64>,
}

impl Operator {
    pub fn new(kernel: &KernelSpec, grid: &Grid) -> Result<Self> {
        grid.require_1d()?;
        if kernel.dim() != 1 {
            return Err(Error::Unsupported("collocation needs a one dimensional kernel; reduce it first".into()));
        }
        let n = grid.len();
        if n < 3 {
            return Err(invalid("operator grids need at least three nodes"));
        }
        let h = grid.spacing();
        let near = kernel.moment(0.0, h, 2.0)? / (h * h);
        let mut alpha = vec![0.0; n + 1];
        let mut beta = vec![0.0; n + 1];
        for j in 1..=n {
            let (a, b) = kernel.linear_cell_moments(j as f64 * h, (j + 1) as f64 * h)?;
            alpha[j] = a;
            beta[j] = b;
        }
        let mut toeplitz = vec![0.0; n + 1];
        for m in 1..=n {
            let mut w = 2.0 * alpha[m];
            if m == 1 {
                w += 2.0 * near;
            } else {
                w += 2.0 * beta[m - 1];
            }
            toeplitz[m] = w;
        }
        let mut prefix = vec![0.0; n + 1];
        for m in 1..=n {
            prefix[m] = prefix[m - 1] + toeplitz[m];
        }
        let mut tail_mass = vec![0.0; n + 2];
        tail_mass[n + 1] = kernel.tail_mass((n + 1) as f64 * h)?;
        for m in (1..=n).rev() {
            tail_mass[m] = tail_mass[m + 1] + alpha[m] + beta[m];
        }
        Ok(Self { kernel: kernel.clone(), grid: grid.clone(), h, n, near, alpha, toeplitz, prefix, tail_mass })
    }

    pub fn kernel(&self) -> &KernelSpec {
        &self.kernel
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn spacing(&self) -> f64 {
        self.h
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    /// Weight of the near (second difference) part.
    pub fn near_weight(&self) -> f64 {
        self.near
    }

    /// Weight `a_ik` coupling row `i` to node `k`.
    #[inline]
    pub fn pair_weight(&self, i: usize, k: usize) -> f64 {
        if i == k {
            return 0.0;
        }
        let m = i.abs_diff(k);
        let mut w = self.toeplitz[m];
        let at_edge = (k == 0 && k < i) || (k == self.n - 1 && k > i);
        if at_edge {
            w -= 2.0 * self.alpha[m];
        }
        w
    }

    /// `sum_{k != i} a_ik` over the grid.
    pub fn row_weight_sum(&self, i: usize) -> f64 {
        let left = i;
        let right = self.n - 1 - i;
        let mut s = 0.0;
        if left > 0 {
            s += self.prefix[left] - 2.0 * self.alpha[left];
        }
        if right > 0 {
            s += self.prefix[right] - 2.0 * self.alpha[right];
        }
        s
    }

    /// Kernel mass seen from node `i` beyond both ends of the grid.
    pub fn exterior_mass(&self, i: usize) -> f64 {
        self.tail_mass[i.max(1)] * (i > 0) as u8 as f64 + self.tail_mass[(self.n - 1 - i).max(1)] * (i + 1 < self.n) as u8 as f64
    }

    /// Diagonal `d_i = sum_k a_ik + 2 m_i` of the collocation matrix.
    pub fn diagonal(&self, i: usize) -> f64 {
        self.row_weight_sum(i) + 2.0 * self.exterior_mass(i)
    }

    fn check_row(&self, i: usize) -> Result<()> {
        if i == 0 || i + 1 >= self.n {
            return Err(invalid(format!("node {i} is on the grid boundary; the operator is evaluated at nodes 1..{}", self.n - 2)));
        }
        Ok(())
    }

    fn check_function(&self, u: &GridFunction) -> Result<()> {
        if u.grid != self.grid {
            return Err(invalid("grid function lives on a different grid"));
        }
        u.exterior.validate(self.kernel.order())
    }

    /// `l_i = int_{outside the grid} g(y) K(y - x_i) dy` for the nodes given.
    pub fn exterior_loads(&self, ext: &Exterior, edge_values: (f64, f64), nodes: &[usize]) -> Result<Vec<f64>> {
        ext.validate(self.kernel.order())?;
        nodes
            .iter()
            .map(|&i| {
                self.check_row(i)?;
                let left = self.side_load(&ext.left, i, edge_values.0, -1.0)?;
                let right = self.side_load(&ext.right, self.n - 1 - i, edge_values.1, 1.0)?;
                Ok(left + right)
            })
            .collect()
    }

    fn side_load(&self, side: &SideExterior, cells: usize, edge_value: f64, sign: f64) -> Result<f64> {
        let dist = cells as f64 * self.h;
        let mut acc = 0.0;
        let mut prev = (0.0, edge_value);
        for &(d, v) in &side.samples {
            if d > prev.0 {
                let (wa, wb) = self.kernel.linear_cell_moments(dist + prev.0, dist + d)?;
                acc += prev.1 * wa + v * wb;
            }
            prev = (d, v);
        }
        let start = dist + prev.0;
        let mass = || -> Result<f64> {
            if side.samples.is_empty() {
                Ok(self.tail_mass[cells])
            } else {
                self.kernel.tail_mass(start)
            }
        };
        acc += match side.tail {
            Tail::Zero => 0.0,
            Tail::Constant { value } => value * mass()?,
            Tail::Power { amplitude, exponent, origin } => {
                let edge = if sign > 0.0 { self.grid.max() } else { self.grid.min() };
                let x = edge - sign * dist;
                amplitude * self.power_tail_load(x, sign, start, exponent, origin)?
            }
        };
        Ok(acc)
    }

    /// `int_start^inf |x + sign t - origin|^beta K(t) dt`.
    fn power_tail_load(&self, x: f64, sign: f64, start: f64, beta: f64, origin: f64) -> Result<f64> {
        let s2 = 2.0 * self.kernel.order();
        let k = &self.kernel;
        let mut f = |t: f64| (x + sign * t - origin).abs().powf(beta) * k.radial_density(t);
        let t_origin = sign * (origin - x);
        let mut acc = 0.0;
        let mut from = start;
        if t_origin > start {
            acc += adaptive(&mut f, start, t_origin, 0.0, 1e-13)?.0;
            from = t_origin;
        }
        let behind = if t_origin < from { t_origin.max(0.0) } else { 0.0 };
        let mut first = from - behind;
        if first <= 1e-12 * from {
            first = from;
        }
        let c = (x - origin).abs();
        let cap = k.upper();
        let bound = |t: f64| cap * (t + c).powf(beta) * t.powf(-s2) / (s2 - beta);
        acc += adaptive_to_infinity(&mut f, from, first, bound, 1e-13)?;
        Ok(acc)
    }

    /// `(L_h u)_i` for the given nodes (each in `1..n-1`).
    pub fn apply(&self, u: &GridFunction, nodes: &[usize]) -> Result<Vec<f64>> {
        self.check_function(u)?;
        let edge = (u.values[0], u.values[self.n - 1]);
        let loads = self.exterior_loads(&u.exterior, edge, nodes)?;
        Ok(nodes.iter().zip(loads).map(|(&i, l)| self.row_action(&u.values, i) + 2.0 * (u.values[i] * self.exterior_mass(i) - l)).collect())
    }

    /// `(L_h u)_i` at a single node.
    pub fn apply_at(&self, u: &GridFunction, i: usize) -> Result<f64> {
        Ok(self.apply(u, &[i])?[0])
    }

    /// `sum_k a_ik (u_i - u_k)`.
    fn row_action(&self, v: &[f64], i: usize) -> f64 {
        let ui = v[i];
        let mut s = 0.0;
        for (k, &uk) in v.iter().enumerate() {
            if k != i {
                s += self.pair_weight(i, k) * (ui - uk);
            }
        }
        s
    }

    /// Dense collocation matrix `A_{pq} = d_i [p = q] - a_{i k}` on the nodes
    /// `omega` (indices into the grid, each in `1..n-1`).
    pub fn collocation_matrix(&self, omega: &[usize]) -> Result<Mat<f64>> {
        for &i in omega {
            self.check_row(i)?;
        }
        let m = omega.len();
        Ok(Mat::from_fn(m, m, |p, q| if p == q { self.diagonal(omega[p]) } else { -self.pair_weight(omega[p], omega[q]) }))
    }

    /// Right hand side coupling: `sum_{k not in omega} a_ik g_k + 2 l_i` for
    /// rows in `omega`, where `g` supplies grid values off `omega`.
    pub fn boundary_coupling(&self, g: &GridFunction, omega: &Region) -> Result<Vec<f64>> {
        self.check_function(g)?;
        let rows = omega.indices();
        let loads = self.exterior_loads(&g.exterior, (g.values[0], g.values[self.n - 1]), &rows)?;
        let outside = omega.complement(&self.grid).indices();
        Ok(rows
            .iter()
            .zip(loads)
            .map(|(&i, l)| outside.iter().map(|&k| self.pair_weight(i, k) * g.values[k]).sum::<f64>() + 2.0 * l)
            .collect())
    }

    /// Energy form on `omega`.
    pub fn stiffness_form(&self, omega: &Region) -> Result<StiffnessForm> {
        let rows = omega.indices();
        for &i in &rows {
            self.check_row(i)?;
        }
        Ok(StiffnessForm { op: self.clone(), omega: omega.clone(), rows })
    }

    /// `int_{outside the grid} f(y) K(y - x_i) dy` for a generic integrand
    /// `f` with power growth `|f(y)| <= C |y|^growth`, used for the
    /// exterior self-interaction of the energy.
    fn exterior_integral(&self, i: usize, f: &dyn Fn(f64) -> f64, growth: f64, cuts: &[f64]) -> Result<f64> {
        let s2 = 2.0 * self.kernel.order();
        if growth >= s2 {
            return Err(Error::NonIntegrableTail { exponent: growth, limit: s2 });
        }
        let x = self.grid.x(i);
        let k = &self.kernel;
        let mut total = 0.0;
        for (edge, sign) in [(self.grid.min(), -1.0), (self.grid.max(), 1.0)] {
            let dist = sign * (edge - x);
            let mut g = |t: f64| f(x + sign * t) * k.radial_density(t);
            let mut pts: Vec<f64> = cuts.iter().map(|&d| dist + d).collect();
            pts.insert(0, dist);
            pts.sort_by(f64::total_cmp);
            pts.dedup();
            for w in pts.windows(2) {
                total += adaptive(&mut g, w[0], w[1], 0.0, 1e-12)?.0;
            }
            let from = *pts.last().unwrap();
            let cap = k.upper();
            let bound = |t: f64| 2.0 * cap * f(x + sign * t).abs() * t.powf(-s2) / (s2 - growth) + 1e-300;
            total += adaptive_to_infinity(&mut g, from, from, bound, 1e-12)?;
        }
        Ok(total)
    }
}

/// Quadratic energy on a set `Omega`:
///
/// ```text
/// E(u, v) = h [ sum_{i,k in Omega} a_ik/2 du dv + sum_{i in Omega, k notin Omega} a_ik du dv
///             + sum_{i in Omega} 2 int_ext (u_i - g_u)(v_i - g_v) K ]
/// ```
///
/// The purely exterior constant `int g_u g_v K` is included only when it
/// converges; otherwise it is dropped, which shifts all energies sharing the
/// same exterior data by the same (infinite) amount.
#[derive(Debug, Clone)]
pub struct StiffnessForm {
    op: Operator,
    omega: Region,
    rows: Vec<usize>,
}

impl StiffnessForm {
    pub fn operator(&self) -> &Operator {
        &self.op
    }

    pub fn omega(&self) -> &Region {
        &self.omega
    }

    /// Symmetric matrix of the grid part (all grid nodes).
    pub fn matrix(&self) -> Mat<f64> {
        let n = self.op.n;
        let h = self.op.h;
        let mut a = Mat::<f64>::zeros(n, n);
        for &i in &self.rows {
            for k in 0..n {
                if k == i {
                    continue;
                }
                let both = self.omega.contains(k);
                if both && k < i {
                    continue;
                }
                let w = h * self.op.pair_weight(i, k);
                a[(i, i)] += w;
                a[(k, k)] += w;
                a[(i, k)] -= w;
                a[(k, i)] -= w;
            }
            a[(i, i)] += 2.0 * h * self.op.exterior_mass(i);
        }
        a
    }

    /// Bilinear energy `E(u, v)`.
    pub fn energy_pair(&self, u: &GridFunction, v: &GridFunction) -> Result<f64> {
        self.op.check_function(u)?;
        self.op.check_function(v)?;
        let n = self.op.n;
        let h = self.op.h;
        let (uv, vv) = (&u.values, &v.values);
        let mut grid = 0.0;
        for &i in &self.rows {
            let mut row = 0.0;
            for k in 0..n {
                if k == i || (k < i && self.omega.contains(k)) {
                    continue;
                }
                row += self.op.pair_weight(i, k) * (uv[i] - uv[k]) * (vv[i] - vv[k]);
            }
            grid += row;
        }
        let lu = self.op.exterior_loads(&u.exterior, (uv[0], uv[n - 1]), &self.rows)?;
        let lv = self.op.exterior_loads(&v.exterior, (vv[0], vv[n - 1]), &self.rows)?;
        let mut ext = 0.0;
        for (r, &i) in self.rows.iter().enumerate() {
            ext += uv[i] * vv[i] * self.op.exterior_mass(i) - uv[i] * lv[r] - vv[i] * lu[r];
        }
        let constant = self.exterior_constant(u, v)?.unwrap_or(0.0);
        Ok(h * (grid + 2.0 * ext + 2.0 * constant))
    }

    /// `E(u, u)`.
    pub fn energy(&self, u: &GridFunction) -> Result<f64> {
        self.energy_pair(u, u)
    }

    /// `sum_{i in Omega} int_ext g_u g_v K`, or `None` when divergent.
    pub fn exterior_constant(&self, u: &GridFunction, v: &GridFunction) -> Result<Option<f64>> {
        let growth = u.exterior.growth() + v.exterior.growth();
        if growth >= 2.0 * self.op.kernel.order() {
            return Ok(None);
        }
        let zero = |e: &Exterior| e.uniform_value() == Some(0.0);
        if zero(&u.exterior) || zero(&v.exterior) {
            return Ok(Some(0.0));
        }
        let mut cuts: Vec<f64> = Vec::new();
        for e in [&u.exterior, &v.exterior] {
            for side in [&e.left, &e.right] {
                cuts.extend(side.samples.iter().map(|s| s.0));
            }
        }
        let f = |y: f64| u.value_at(y) * v.value_at(y);
        let mut total = 0.0;
        for &i in &self.rows {
            total += self.op.exterior_integral(i, &f, growth, &cuts)?;
        }
        Ok(Some(total))
    }
}

/// `(L_h u)` at every node of `region` using a freshly assembled operator.
pub fn apply_l(kernel: &KernelSpec, u: &GridFunction, region: &Region) -> Result<Vec<f64>> {
    let op = Operator::new(kernel, &u.grid)?;
    op.apply(u, &region.indices())
}

/// Fractional Sobolev seminorm `([u]_{H^s(A x B)})` computed with the
/// collocation weights of the kernel `|h|^{-1-2s}` (pairs with both nodes in
/// `A` and `B` are counted once from each side, as in the double integral).
pub fn hs_seminorm(u: &GridFunction, a: &Region, b: &Region, s: f64) -> Result<f64> {
    let k = KernelSpec::power_kernel(1, s, 1.0)?;
    let op = Operator::new(&k, &u.grid)?;
    let h = op.h;
    let bi = b.indices();
    let mut total = 0.0;
    for i in a.indices() {
        for &j in &bi {
            if i != j {
                let d = u.values[i] - u.values[j];
                total += 0.5 * op.pair_weight(i, j) * d * d;
            }
        }
    }
    Ok((h * total).sqrt())
}

/// A function of one variable that the quadrature route can evaluate.
pub trait Field {
    fn value(&self, y: f64) -> f64;
    /// Points in `[lo, hi]` where the function is not smooth.
    fn kinks(&self, lo: f64, hi: f64) -> Vec<f64>;
    /// `(C, beta)` with `|u(y)| <= C (1 + |y|)^beta`.
    fn growth(&self) -> (f64, f64);
}

impl Field for GridFunction {
    fn value(&self, y: f64) -> f64 {
        self.value_at(y)
    }

    fn kinks(&self, lo: f64, hi: f64) -> Vec<f64> {
        let g = &self.grid;
        let h = g.spacing();
        let mut out = Vec::new();
        let i0 = (((lo - g.min()) / h).floor().max(0.0)) as usize;
        let i1 = (((hi - g.min()) / h).ceil().max(0.0) as usize).min(g.len() - 1);
        for i in i0..=i1 {
            let x = g.x(i);
            if x >= lo && x <= hi {
                out.push(x);
            }
        }
        for (side, edge, sign) in [(&self.exterior.left, g.min(), -1.0), (&self.exterior.right, g.max(), 1.0)] {
            for &(d, _) in &side.samples {
                let y = edge + sign * d;
                if y >= lo && y <= hi {
                    out.push(y);
                }
            }
        }
        out
    }

    fn growth(&self) -> (f64, f64) {
        let gmax = self.values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let mut c = gmax;
        let mut beta: f64 = 0.0;
        for side in [&self.exterior.left, &self.exterior.right] {
            for &(_, v) in &side.samples {
                c = c.max(v.abs());
            }
            match side.tail {
                Tail::Zero => {}
                Tail::Constant { value } => c = c.max(value.abs()),
                Tail::Power { amplitude, exponent, origin } => {
                    beta = beta.max(exponent);
                    c = c.max(amplitude.abs() * (1.0 + origin.abs()).powf(exponent.max(0.0)));
                }
            }
        }
        (c, beta)
    }
}

/// Closure backed field for analytic test functions.
pub struct FnField<F: Fn(f64) -> f64> {
    pub f: F,
    pub kinks: Vec<f64>,
    pub bound: f64,
    pub exponent: f64,
}

impl<F: Fn(f64) -> f64> Field for FnField<F> {
    fn value(&self, y: f64) -> f64 {
        (self.f)(y)
    }
    fn kinks(&self, lo: f64, hi: f64) -> Vec<f64> {
        self.kinks.iter().copied().filter(|&k| k >= lo && k <= hi).collect()
    }
    fn growth(&self) -> (f64, f64) {
        (self.bound, self.exponent)
    }
}

/// How the kernel is chosen inside the quadrature route.
#[derive(Debug, Clone, Copy)]
enum Weighting<'a> {
    Kernel(&'a KernelSpec),
    /// `lambda |t|^{-1-2s}` where the second difference is positive and
    /// `Lambda |t|^{-1-2s}` where it is negative.
    Extremal {
        lambda: f64,
        cap: f64,
        s: f64,
    },
}

impl Weighting<'_> {
    fn weight(&self, t: f64, delta: f64) -> f64 {
        match *self {
            Weighting::Kernel(k) => k.radial_density(t),
            Weighting::Extremal { lambda, cap, s } => {
                let c = if delta > 0.0 { lambda } else { cap };
                c * t.powf(-1.0 - 2.0 * s)
            }
        }
    }
    fn order(&self) -> f64 {
        match *self {
            Weighting::Kernel(k) => k.order(),
            Weighting::Extremal { s, .. } => s,
        }
    }
    fn cap(&self) -> f64 {
        match *self {
            Weighting::Kernel(k) => k.upper(),
            Weighting::Extremal { cap, .. } => cap,
        }
    }
    fn near_moment(&self, eps: f64, delta: f64) -> Result<f64> {
        match *self {
            Weighting::Kernel(k) => k.moment(0.0, eps, 2.0),
            Weighting::Extremal { s, .. } => Ok(self.weight(1.0, delta) * eps.powf(2.0 - 2.0 * s) / (2.0 - 2.0 * s)),
        }
    }
    fn breakpoints(&self, a: f64, b: f64) -> Vec<f64> {
        match *self {
            Weighting::Kernel(k) => k.breakpoints(a, b),
            Weighting::Extremal { .. } => Vec::new(),
        }
    }
}

fn quadrature_route(w: Weighting<'_>, u: &dyn Field, x: f64, eps: f64, symmetric: bool) -> Result<f64> {
    if !(eps > 0.0) {
        return Err(invalid("near radius must be positive"));
    }
    let s2 = 2.0 * w.order();
    let (c, beta) = u.growth();
    if beta >= s2 {
        return Err(Error::NonIntegrableTail { exponent: beta, limit: s2 });
    }
    let ux = u.value(x);
    let delta = |t: f64| 2.0 * ux - u.value(x + t) - u.value(x - t);
    let d_eps = delta(eps);
    let near = 2.0 * d_eps / (eps * eps) * w.near_moment(eps, d_eps)?;
    // breakpoints in t from kinks on both sides, up to the last kink
    let span = {
        let ks = u.kinks(f64::NEG_INFINITY, f64::INFINITY);
        ks.iter().fold(2.0 * eps, |m, &k| m.max((k - x).abs()))
    };
    let mut pts: Vec<f64> = u.kinks(x - span, x + span).iter().map(|&k| (k - x).abs()).filter(|&t| t > eps).collect();
    pts.extend(w.breakpoints(eps, span));
    pts.push(eps);
    pts.push(span.max(2.0 * eps));
    pts.sort_by(f64::total_cmp);
    pts.dedup_by(|a, b| (*a - *b).abs() <= 1e-14 * b.abs());
    let cap = w.cap();
    // natural size of Lu, used as the absolute reference for cancellations
    let magnitude = cap * (c + ux.abs()) * eps.powf(-s2);
    let abs_tol = 1e-14 * magnitude / pts.len() as f64;
    let bound = |t: f64| 2.0 * cap * (2.0 * ux.abs() + 2.0 * c * (1.0 + x.abs() + t).powf(beta)) * t.powf(-s2) / (s2 - beta);
    let far = if symmetric {
        let mut f = |t: f64| {
            let d = delta(t);
            d * w.weight(t, d)
        };
        let mut acc = 0.0;
        for win in pts.windows(2) {
            acc += adaptive(&mut f, win[0], win[1], abs_tol, 1e-12)?.0;
        }
        let last = *pts.last().unwrap();
        let scale = acc.abs() + near.abs() + cap * c * last.powf(-s2);
        acc + adaptive_to_infinity_scaled(&mut f, last, last, bound, 1e-12, scale)?
    } else {
        let mut acc = 0.0;
        for sign in [1.0, -1.0] {
            let mut f = |t: f64| {
                let d = ux - u.value(x + sign * t);
                d * w.weight(t, d)
            };
            for win in pts.windows(2) {
                acc += adaptive(&mut f, win[0], win[1], abs_tol, 1e-12)?.0;
            }
            let last = *pts.last().unwrap();
            let scale = acc.abs() + near.abs() + cap * c * last.powf(-s2);
            acc += adaptive_to_infinity_scaled(&mut f, last, last, bound, 1e-12, scale)?;
        }
        acc
    };
    Ok(near + 2.0 * far)
}

/// `Lu(x)` by adaptive quadrature of the symmetrised second difference; the
/// ball of radius `eps` uses the second difference model.
pub fn apply_l_quadrature(kernel: &KernelSpec, u: &dyn Field, x: f64, eps: f64) -> Result<f64> {
    if kernel.dim() != 1 {
        return Err(Error::Unsupported("reduce the kernel to one dimension first".into()));
    }
    quadrature_route(Weighting::Kernel(kernel), u, x, eps, true)
}

/// Same as [`apply_l_quadrature`] but integrating `u(x) - u(x +- t)` on each
/// side separately.
pub fn apply_l_one_sided(kernel: &KernelSpec, u: &dyn Field, x: f64, eps: f64) -> Result<f64> {
    if kernel.dim() != 1 {
        return Err(Error::Unsupported("reduce the kernel to one dimension first".into()));
    }
    quadrature_route(Weighting::Kernel(kernel), u, x, eps, false)
}

/// Lower extremal operator `M^-(u)(x) = inf_K Lu(x)` over one dimensional
/// kernels with envelope `[lambda, Lambda] |t|^{-1-2s}`.
pub fn extremal_minus(lambda: f64, cap: f64, s: f64, u: &dyn Field, x: f64, eps: f64) -> Result<f64> {
    if !(lambda > 0.0 && cap >= lambda) {
        return Err(invalid("envelope constants must satisfy 0 < lambda <= Lambda"));
    }
    if !(s > 0.0 && s < 1.0) {
        return Err(invalid("order must lie in (0,1)"));
    }
    quadrature_route(Weighting::Extremal { lambda, cap, s }, u, x, eps, true)
}

/// `Lu(x)` for a planar kernel by quadrature in polar coordinates, for a
/// function `u` given on the plane.  The disc of radius `eps` uses the
/// second difference model along each ray; beyond `far` the ray integrals
/// are continued on doubling pieces.  The ray integral is a smooth
/// `pi`-periodic function of the angle for radial kernels, so the angular
/// integral uses the trapezoid rule with doubling until it settles.
pub fn apply_l_planar(kernel: &KernelSpec, u: &dyn Fn(f64, f64) -> f64, x: [f64; 2], eps: f64, far: f64) -> Result<f64> {
    if kernel.dim() != 2 {
        return Err(invalid("planar kernel expected"));
    }
    if !(eps > 0.0 && far > eps) {
        return Err(invalid("need 0 < eps < far"));
    }
    let s2 = 2.0 * kernel.order();
    let ux = u(x[0], x[1]);
    let cap = kernel.upper();
    // natural size of Lu, the absolute reference for rays along which u
    // barely varies
    let magnitude = cap * ux.abs().max(f64::MIN_POSITIVE) * eps.powf(-s2);
    let floor = 1e-16 * magnitude;
    let ray = |theta: f64| -> Result<f64> {
        let (c, sn) = (theta.cos(), theta.sin());
        let delta = |r: f64| 2.0 * ux - u(x[0] + r * c, x[1] + r * sn) - u(x[0] - r * c, x[1] - r * sn);
        let dens = |r: f64| kernel.density(&[r * c, r * sn]);
        // near: int_0^eps delta(eps) r^2/eps^2 K r dr
        let mut g = |r: f64| r * r * r * dens(r);
        let nearm = adaptive(&mut g, 0.0, eps, 1e-300, 1e-13)?.0;
        let mut f = |r: f64| delta(r) * dens(r) * r;
        let mut acc = delta(eps) / (eps * eps) * nearm;
        let mut lo = eps;
        while lo < far {
            let hi = (2.0 * lo).min(far);
            acc += adaptive(&mut f, lo, hi, floor, 1e-13)?.0;
            lo = hi;
        }
        // |delta| <= 4 sup|u| beyond `far` for bounded u
        let bound = |r: f64| 4.0 * cap * ux.abs().max(1.0) * r.powf(-s2) / s2;
        acc += adaptive_to_infinity_scaled(&mut f, far, far, bound, 1e-13, acc.abs().max(0.1 * magnitude))?;
        Ok(acc)
    };
    // Lu = 2 * int_0^pi int_0^inf delta K r dr dtheta. Fields varying along a
    // single direction give a |cos theta|^{2s} kink at the perpendicular, so
    // each half is mapped by theta = pi/2 -+ (pi/2) w^4 before integrating.
    let mut total = 0.0;
    for side in [-1.0, 1.0] {
        let mut failure = None;
        let mut g = |w: f64| {
            let w3 = w * w * w;
            match ray(0.5 * PI * (1.0 + side * w3 * w)) {
                Ok(v) => 2.0 * PI * w3 * v,
                Err(e) => {
                    failure.get_or_insert(e);
                    0.0
                }
            }
        };
        let (half, _) = adaptive(&mut g, 0.0, 1.0, 1e-12 * magnitude, 1e-10)?;
        if let Some(e) = failure {
            return Err(e);
        }
        total += half;
    }
    Ok(2.0 * total)
}

/// `delta(t) = 2 - (1+t)^beta - (1-t)_+^beta` with a series near `t = 0`.
fn second_difference_power(beta: f64, t: f64) -> f64 {
    if t < 0.05 {
        // -2 sum_{k even >= 2} C(beta, k) t^k
        let mut coef = 1.0;
        let mut acc = 0.0;
        let t2 = t * t;
        let mut tk = 1.0;
        for k in 1..=20u32 {
            coef *= (beta - (k - 1) as f64) / k as f64;
            if k % 2 == 0 {
                tk *= t2;
                acc += coef * tk;
            }
        }
        return -2.0 * acc;
    }
    let right = if t < 1.0 { (1.0 - t).powf(beta) } else { 0.0 };
    2.0 - (1.0 + t).powf(beta) - right
}

/// `c_beta = M^-(x_+^beta)(1)` for the envelope `[lambda, Lambda] |t|^{-1-2s}`,
/// so that `M^-(x_+^beta)(x) = c_beta x^{beta - 2s}` for `x > 0`.
pub fn extremal_power_constant(lambda: f64, cap: f64, s: f64, beta: f64) -> Result<f64> {
    if !(beta > 0.0 && beta < 2.0 * s && beta < 1.0) {
        return Err(invalid(format!("exponent {beta} must lie in (0, min(1, 2s))")));
    }
    let p = -1.0 - 2.0 * s;
    let tstar = 2f64.powf(1.0 / beta) - 1.0;
    let mut f = |t: f64| second_difference_power(beta, t) * t.powf(p);
    let (i01, _) = adaptive(&mut f, 0.0, 1.0, 1e-300, 1e-12)?;
    let (i1s, _) = adaptive(&mut f, 1.0, tstar, 1e-300, 1e-12)?;
    let mut neg = 0.0;
    let big = tstar.max(1e4) * 1e4;
    let mut lo = tstar;
    while lo < big {
        let hi = (2.0 * lo).min(big);
        neg += adaptive(&mut f, lo, hi, 1e-300, 1e-12)?.0;
        lo = hi;
    }
    // int_T^inf (2 - (1+t)^beta) t^p dt via the binomial series of (1+t)^beta
    let t = big;
    let mut tail = 2.0 * t.powf(-2.0 * s) / (2.0 * s);
    let mut coef = 1.0;
    for k in 0..8 {
        if k > 0 {
            coef *= (beta - (k - 1) as f64) / k as f64;
        }
        let e = beta - k as f64 - 2.0 * s;
        tail -= coef * t.powf(e) / (-e);
    }
    neg += tail;
    Ok(2.0 * (lambda * (i01 + i1s) + cap * neg))
}

/// Result of the bisection for the critical exponent.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Beta0 {
    pub beta0: f64,
    pub bracket: (f64, f64),
    pub iterations: usize,
}

/// Critical exponent `beta_0`: the sign change of `c_beta` on
/// `[max(0, 2s-1) + margin, min(1, 2s) - margin]`, found by bisection to
/// `tol`.
pub fn beta0(lambda: f64, cap: f64, s: f64, tol: f64, margin: f64) -> Result<Beta0> {
    if !(s > 0.0 && s < 1.0) {
        return Err(invalid("order must lie in (0,1)"));
    }
    if !(lambda > 0.0 && cap >= lambda) {
        return Err(invalid("envelope constants must satisfy 0 < lambda <= Lambda"));
    }
    if !(tol > 0.0 && margin > 0.0) {
        return Err(invalid("tolerance and margin must be positive"));
    }
    let mut lo = (2.0 * s - 1.0).max(0.0) + margin;
    let mut hi = (2.0 * s).min(1.0) - margin;
    if lo >= hi {
        return Err(invalid("bracket is empty"));
    }
    let bracket = (lo, hi);
    let flo = extremal_power_constant(lambda, cap, s, lo)?;
    let fhi = extremal_power_constant(lambda, cap, s, hi)?;
    if !(flo > 0.0 && fhi < 0.0) {
        return Err(Error::NoSignChange { lo, hi });
    }
    let mut iterations = 0;
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if extremal_power_constant(lambda, cap, s, mid)? > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        iterations += 1;
        if iterations > 200 {
            return Err(Error::IterationCap { cap: 200, context: "beta0 bisection".into() });
        }
    }
    Ok(Beta0 { beta0: 0.5 * (lo + hi), bracket, iterations })
}
