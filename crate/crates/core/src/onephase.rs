//! The one-phase functional `I(u) = E(u, u) + M |{u > 0} cap Omega|`, its
//! minimisation and the free boundary diagnostics built on minimisers.
//!
//! On the grid, with `A` the collocation matrix on `Omega` and `b` the
//! coupling to the data, the energy is the exact quadratic
//! `E(u) = E_0 - 2h b.u + h u.A.u`, so zeroing or releasing a single node
//! changes `I` by a closed form amount.  The alternating scheme combines
//! harmonic replacement on the positivity set, truncation and such single
//! node moves; every step is accepted only if it lowers `I`, which keeps the
//! energy trace monotone.

use faer::Mat;
use serde::{Deserialize, Serialize};

use crate::analysis::{fit_growth, sup_on_ball, ExponentFit};
use crate::dirichlet::{harmonic_replacement, solve_spd};
use crate::error::{invalid, Error, Result};
use crate::kernels::KernelSpec;
use crate::mesh::{Exterior, Grid, GridFunction, Region, Tail};
use crate::nonlocal_op::Operator;

/// Minimise `I` over `u = g` off `omega`.
#[derive(Debug, Clone)]
pub struct OnePhaseProblem {
    pub kernel: KernelSpec,
    pub omega: Region,
    pub m: f64,
    /// Data: grid values off `omega` and exterior beyond the grid.
    pub data: GridFunction,
}

impl OnePhaseProblem {
    pub fn new(kernel: KernelSpec, omega: Region, m: f64, data: GridFunction) -> Result<Self> {
        if !(m > 0.0 && m.is_finite()) {
            return Err(invalid(format!("M must be positive, got {m}")));
        }
        data.grid.require_1d()?;
        if omega.is_empty() {
            return Err(invalid("the domain is empty"));
        }
        if omega.first() == Some(0) || omega.last() == Some(data.len() - 1) {
            return Err(invalid("the domain must stay off the grid ends"));
        }
        let negative_tail = |t: Tail| match t {
            Tail::Zero => false,
            Tail::Constant { value } => value < 0.0,
            Tail::Power { amplitude, .. } => amplitude < 0.0,
        };
        let ext = &data.exterior;
        let bad = data.values.iter().enumerate().any(|(i, &v)| v < 0.0 && !omega.contains(i))
            || [&ext.left, &ext.right].iter().any(|s| negative_tail(s.tail) || s.samples.iter().any(|p| p.1 < 0.0));
        if bad {
            return Err(invalid("one-phase data must be nonnegative"));
        }
        ext.validate(kernel.order())?;
        Ok(Self { kernel, omega, m, data })
    }

    pub fn grid(&self) -> &Grid {
        &self.data.grid
    }

    /// Energy split of an admissible `u`.
    pub fn energy(&self, u: &GridFunction) -> Result<EnergySplit> {
        let op = Operator::new(&self.kernel, self.grid())?;
        let form = op.stiffness_form(&self.omega)?;
        let dirichlet = form.energy(u)?;
        let h = op.spacing();
        let count = self.omega.indices().into_iter().filter(|&i| u.values[i] > 0.0).count();
        Ok(EnergySplit { dirichlet, measure: self.m * h * count as f64 })
    }
}

/// `I = dirichlet + measure`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergySplit {
    pub dirichlet: f64,
    pub measure: f64,
}

impl EnergySplit {
    pub fn total(&self) -> f64 {
        self.dirichlet + self.measure
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MinimizerResult {
    pub u: GridFunction,
    /// `{u = 0} cap Omega`
    pub contact: Region,
    /// `{u > 0} cap Omega`
    pub positivity: Region,
    pub energy: EnergySplit,
    /// `I` after each sweep (starting with the initial state).
    pub trace: Vec<f64>,
    /// Whether an oracle search covered every candidate it was meant to.
    pub exhaustive: bool,
}

/// Quadratic model of `I` restricted to the domain nodes.
struct Model {
    rows: Vec<usize>,
    a: Mat<f64>,
    b: Vec<f64>,
    e0: f64,
    h: f64,
    m: f64,
    data: GridFunction,
}

impl Model {
    /// `offset = false` skips the energy of the zero extension, which only
    /// shifts `I` by a constant.
    fn new(p: &OnePhaseProblem, offset: bool) -> Result<Self> {
        let op = Operator::new(&p.kernel, p.grid())?;
        let rows = p.omega.indices();
        let a = op.collocation_matrix(&rows)?;
        let b = op.boundary_coupling(&p.data, &p.omega)?;
        let mut zero = p.data.clone();
        for &i in &rows {
            zero.values[i] = 0.0;
        }
        let e0 = if offset { op.stiffness_form(&p.omega)?.energy(&zero)? } else { 0.0 };
        Ok(Self { h: op.spacing(), rows, a, b, e0, m: p.m, data: zero })
    }

    fn dirichlet(&self, u: &[f64]) -> f64 {
        let n = u.len();
        let mut quad = 0.0;
        for j in 0..n {
            if u[j] == 0.0 {
                continue;
            }
            let mut col = 0.0;
            for i in 0..n {
                col += self.a[(i, j)] * u[i];
            }
            quad += col * u[j];
        }
        let lin: f64 = self.b.iter().zip(u).map(|(b, x)| b * x).sum();
        self.e0 - 2.0 * self.h * lin + self.h * quad
    }

    fn split(&self, u: &[f64]) -> EnergySplit {
        let count = u.iter().filter(|&&v| v > 0.0).count();
        EnergySplit { dirichlet: self.dirichlet(u), measure: self.m * self.h * count as f64 }
    }

    /// `A u - b`, i.e. `L_h u` on the domain nodes.
    fn residual(&self, u: &[f64]) -> Vec<f64> {
        let n = u.len();
        let mut r: Vec<f64> = self.b.iter().map(|b| -b).collect();
        for j in 0..n {
            if u[j] != 0.0 {
                for i in 0..n {
                    r[i] += self.a[(i, j)] * u[j];
                }
            }
        }
        r
    }

    /// Minimiser of the energy with `u = 0` on the contact mask.
    fn harmonic(&self, contact: &[bool]) -> Result<Vec<f64>> {
        let free: Vec<usize> = (0..contact.len()).filter(|&p| !contact[p]).collect();
        let mut u = vec![0.0; contact.len()];
        if free.is_empty() {
            return Ok(u);
        }
        let sub = Mat::from_fn(free.len(), free.len(), |p, q| self.a[(free[p], free[q])]);
        let rhs: Vec<f64> = free.iter().map(|&p| self.b[p]).collect();
        let x = solve_spd(&sub, &rhs)?;
        for (&p, v) in free.iter().zip(x) {
            u[p] = v;
        }
        Ok(u)
    }

    /// Energy of the truncated harmonic replacement for a contact mask.
    fn evaluate(&self, contact: &[bool]) -> Result<(Vec<f64>, f64)> {
        let mut v = self.harmonic(contact)?;
        for x in v.iter_mut() {
            *x = x.max(0.0);
        }
        let e = self.split(&v).total();
        Ok((v, e))
    }

    /// Best improving toggle of a node adjacent to the contact/positivity
    /// interface, each candidate evaluated with a full re-solve.
    #[allow(clippy::type_complexity)]
    fn best_interface_move(&self, contact: &[bool], current: f64, tol: f64) -> Result<Option<(Vec<bool>, Vec<f64>, f64)>> {
        let n = contact.len();
        let mut best: Option<(Vec<bool>, Vec<f64>, f64)> = None;
        for p in 0..n {
            let left = p > 0 && contact[p - 1] != contact[p];
            let right = p + 1 < n && contact[p + 1] != contact[p];
            if !(left || right) {
                continue;
            }
            let mut mask = contact.to_vec();
            mask[p] = !mask[p];
            let (v, e) = self.evaluate(&mask)?;
            for (q, x) in v.iter().enumerate() {
                mask[q] = *x == 0.0;
            }
            if e < current - tol && best.as_ref().is_none_or(|b| e < b.2) {
                best = Some((mask, v, e));
            }
        }
        Ok(best)
    }

    fn finish(&self, u: Vec<f64>, trace: Vec<f64>, exhaustive: bool) -> Result<MinimizerResult> {
        let mut full = self.data.clone();
        let mut contact = Vec::new();
        let mut positive = Vec::new();
        for (p, &i) in self.rows.iter().enumerate() {
            full.values[i] = u[p];
            if u[p] > 0.0 {
                positive.push(i);
            } else {
                contact.push(i);
            }
        }
        Ok(MinimizerResult {
            u: full,
            contact: Region::from_indices(contact),
            positivity: Region::from_indices(positive),
            energy: self.split(&u),
            trace,
            exhaustive,
        })
    }
}

/// Sweep cap of the alternating scheme.
pub const SWEEP_CAP: usize = 10_000;

/// Alternating minimisation starting from `init` (whose values on `omega`
/// are truncated at zero).
pub fn minimize_alternating(problem: &OnePhaseProblem, init: &GridFunction) -> Result<MinimizerResult> {
    alternating(problem, init, true)
}

/// Same minimiser, with the Dirichlet part of the reported energy measured
/// relative to the zero extension of the data.
pub(crate) fn alternating(problem: &OnePhaseProblem, init: &GridFunction, offset: bool) -> Result<MinimizerResult> {
    if init.grid != *problem.grid() {
        return Err(invalid("initial guess lives on a different grid"));
    }
    let model = Model::new(problem, offset)?;
    let n = model.rows.len();
    let mut u: Vec<f64> = model.rows.iter().map(|&i| init.values[i].max(0.0)).collect();
    let mut contact: Vec<bool> = u.iter().map(|&v| v == 0.0).collect();
    let mut current = model.split(&u).total();
    let mut trace = vec![current];
    let scale = |e: f64| 1e-13 * e.abs().max(model.m * model.h).max(1e-300);
    for _ in 0..SWEEP_CAP {
        let mut changed = false;
        // (a) harmonic replacement on the positivity set
        let v = model.harmonic(&contact)?;
        // (b) truncation
        let truncated: Vec<f64> = v.iter().map(|&x| x.max(0.0)).collect();
        let candidate = model.split(&truncated).total();
        if candidate <= current + scale(current) {
            for p in 0..n {
                if truncated[p] == 0.0 && !contact[p] {
                    contact[p] = true;
                    changed = true;
                }
            }
            u = truncated;
        }
        // (c) single node moves with exact energy changes
        let mut r = model.residual(&u);
        let (h, m) = (model.h, model.m);
        for p in 0..n {
            let app = model.a[(p, p)];
            let delta_u;
            let gain;
            if u[p] > 0.0 {
                gain = -2.0 * h * u[p] * r[p] + h * u[p] * u[p] * app - m * h;
                delta_u = -u[p];
            } else {
                let t = -r[p] / app;
                if !(t > 0.0) {
                    continue;
                }
                gain = -h * r[p] * r[p] / app + m * h;
                delta_u = t;
            }
            if gain < -scale(current) {
                u[p] += delta_u;
                if delta_u < 0.0 {
                    u[p] = 0.0;
                }
                contact[p] = u[p] == 0.0;
                for q in 0..n {
                    r[q] += model.a[(q, p)] * delta_u;
                }
                changed = true;
            }
        }
        let next = model.split(&u).total();
        let decrease = current - next;
        current = next;
        trace.push(current);
        if !changed && decrease.abs() < 1e-12 * current.abs().max(1.0) {
            // (d) moves of single free boundary nodes with re-solve: the
            // single node tests above freeze the neighbours, which can leave
            // the interface one cell off.
            match model.best_interface_move(&contact, current, scale(current))? {
                Some((mask, v, e)) => {
                    contact = mask;
                    u = v;
                    current = e;
                    if let Some(last) = trace.last_mut() {
                        *last = current;
                    }
                    continue;
                }
                None => {
                    let v = model.harmonic(&contact)?;
                    if v.iter().all(|&x| x >= 0.0) {
                        let e = model.split(&v).total();
                        if e <= current + scale(current) {
                            u = v;
                            current = e;
                        }
                    }
                    if let Some(last) = trace.last_mut() {
                        *last = current;
                    }
                    return model.finish(u, trace, true);
                }
            }
        }
    }
    Err(Error::IterationCap {
        cap: SWEEP_CAP,
        context: format!("alternating minimisation, energy trace tail {:?}", &trace[trace.len().saturating_sub(5)..]),
    })
}

/// Largest domain for which [`minimize_bruteforce_1d`] enumerates every
/// union of at most two contact intervals.
pub const EXHAUSTIVE_NODES: usize = 64;

/// Oracle: best contact set among unions of at most two node intervals of
/// the domain (exhaustive when the domain has at most
/// [`EXHAUSTIVE_NODES`] nodes, otherwise only left-anchored intervals).
pub fn minimize_bruteforce_1d(problem: &OnePhaseProblem) -> Result<MinimizerResult> {
    let model = Model::new(problem, true)?;
    let n = model.rows.len();
    if problem.omega.ranges().len() != 1 {
        return Err(invalid("the brute-force oracle needs an interval domain"));
    }
    let exhaustive = n <= EXHAUSTIVE_NODES;
    let mut best: Option<(f64, Vec<f64>)> = None;
    let mut mask = vec![false; n];
    let mut consider = |mask: &[bool]| -> Result<()> {
        let mut u = model.harmonic(mask)?;
        for v in u.iter_mut() {
            *v = v.max(0.0);
        }
        let e = model.split(&u).total();
        if best.as_ref().is_none_or(|b| e < b.0) {
            best = Some((e, u));
        }
        Ok(())
    };
    consider(&mask)?;
    if exhaustive {
        // contact = [a1, b1) or [a1, b1) u [a2, b2) with a gap between
        for a1 in 0..n {
            for b1 in a1 + 1..=n {
                mask.iter_mut().for_each(|m| *m = false);
                mask[a1..b1].iter_mut().for_each(|m| *m = true);
                consider(&mask)?;
                for a2 in b1 + 1..n {
                    for b2 in a2 + 1..=n {
                        mask[a2..b2].iter_mut().for_each(|m| *m = true);
                        consider(&mask)?;
                        mask[a2..b2].iter_mut().for_each(|m| *m = false);
                    }
                }
            }
        }
    } else {
        for b1 in 1..=n {
            mask.iter_mut().enumerate().for_each(|(p, m)| *m = p < b1);
            consider(&mask)?;
        }
    }
    let (e, u) = best.expect("at least one candidate");
    model.finish(u, vec![e], exhaustive)
}

/// The lattice identity behind the min/max competitor argument:
/// `(a v b - c v d)^2 + (a ^ b - c ^ d)^2` and
/// `(a - c)^2 + (b - d)^2 - 2 (a - b)_+ (c - d)_- - 2 (a - b)_- (c - d)_+`,
/// returned as a pair.  The second cross term vanishes unless `a < b` and
/// `c > d`; without it only the one-sided form, and in every case the
/// bound by `(a - c)^2 + (b - d)^2`, remains.
pub fn min_max_identity(a: f64, b: f64, c: f64, d: f64) -> (f64, f64) {
    let lhs = (a.max(b) - c.max(d)).powi(2) + (a.min(b) - c.min(d)).powi(2);
    let rhs = (a - c).powi(2) + (b - d).powi(2) - 2.0 * min_max_cross(a, b, c, d) - 2.0 * min_max_cross(c, d, a, b);
    (lhs, rhs)
}

/// `(a - b)_+ (c - d)_-`
pub fn min_max_cross(a: f64, b: f64, c: f64, d: f64) -> f64 {
    (a - b).max(0.0) * (d - c).max(0.0)
}

/// `(I(u ^ phi) + I(u v phi)) - 2 I(u)` for an admissible competitor `phi`
/// (nonnegative, equal to the data off the domain).
pub fn min_max_gap(problem: &OnePhaseProblem, u: &GridFunction, phi: &GridFunction) -> Result<f64> {
    let lo = GridFunction { values: u.values.iter().zip(&phi.values).map(|(a, b)| a.min(*b)).collect(), ..u.clone() };
    let hi = GridFunction { values: u.values.iter().zip(&phi.values).map(|(a, b)| a.max(*b)).collect(), ..u.clone() };
    let e = |w: &GridFunction| problem.energy(w).map(|s| s.total());
    Ok(e(&lo)? + e(&hi)? - 2.0 * e(u)?)
}

/// `(E_B(u - v, u - v), M |{u = 0} cap B|)` for the harmonic replacement
/// `v` of `u` in the ball `b`, with `E_B` the energy over pairs touching `b`.
/// For a minimiser the first never exceeds the second.
pub fn energy_comparison(problem: &OnePhaseProblem, u: &GridFunction, b: &Region) -> Result<(f64, f64)> {
    if b.indices().iter().any(|&i| !problem.omega.contains(i)) {
        return Err(invalid("the replacement ball must lie in the domain"));
    }
    let v = harmonic_replacement(&problem.kernel, u, b)?;
    let w = GridFunction { values: u.values.iter().zip(&v.values).map(|(a, c)| a - c).collect(), exterior: Exterior::zero(), ..u.clone() };
    let op = Operator::new(&problem.kernel, problem.grid())?;
    let lhs = op.stiffness_form(b)?.energy(&w)?;
    let zeros = b.indices().into_iter().filter(|&i| u.values[i] <= 0.0).count();
    Ok((lhs, problem.m * op.spacing() * zeros as f64))
}

/// Free boundary points `x` where the minimiser switches between contact
/// and positivity inside the domain.  The position is refined below the
/// grid scale by fitting `u^{1/s}` linearly on the first positive nodes.
pub fn free_boundary_points(result: &MinimizerResult, s: f64) -> Vec<f64> {
    let u = &result.u;
    let g = &u.grid;
    let h = g.spacing();
    let omega_nodes = result.contact.indices().into_iter().chain(result.positivity.indices()).collect::<Vec<_>>();
    let inside = Region::from_indices(omega_nodes);
    let mut out = Vec::new();
    for i in 0..g.len() - 1 {
        if !(inside.contains(i) && inside.contains(i + 1)) {
            continue;
        }
        let (a, b) = (u.values[i] > 0.0, u.values[i + 1] > 0.0);
        if a == b {
            continue;
        }
        let dir: isize = if b { 1 } else { -1 };
        let zero_node = if b { i } else { i + 1 };
        let mut pts = Vec::new();
        for k in 1..=4isize {
            let j = zero_node as isize + dir * k;
            if j < 0 || j as usize >= g.len() || !(u.values[j as usize] > 0.0) {
                break;
            }
            pts.push((k as f64, u.values[j as usize].powf(1.0 / s)));
        }
        // zero crossing of the line through the samples, in cells from the zero node
        let offset = if pts.len() >= 2 {
            let m = pts.len() as f64;
            let mx = pts.iter().map(|p| p.0).sum::<f64>() / m;
            let my = pts.iter().map(|p| p.1).sum::<f64>() / m;
            let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
            let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
            let slope = sxy / sxx;
            if slope > 0.0 {
                (mx - my / slope).clamp(0.0, 1.0)
            } else {
                0.5
            }
        } else {
            0.5
        };
        out.push(g.x(zero_node) + dir as f64 * offset * h);
    }
    out
}

/// One row of [`density_report`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DensityRow {
    pub r: f64,
    pub ratio: f64,
    /// `false` when `r < 4h`.
    pub resolved: bool,
}

/// `|{u > 0} cap B_r(x0)| / |B_r(x0)|`, measured by node counts.
pub fn density_report(result: &MinimizerResult, x0: f64, radii: &[f64]) -> Vec<DensityRow> {
    let u = &result.u;
    let g = &u.grid;
    let h = g.spacing();
    radii
        .iter()
        .map(|&r| {
            let (mut pos, mut all) = (0usize, 0usize);
            for i in 0..g.len() {
                if (g.x(i) - x0).abs() <= r {
                    all += 1;
                    if u.values[i] > 0.0 {
                        pos += 1;
                    }
                }
            }
            let ratio = if all == 0 { 0.0 } else { pos as f64 / all as f64 };
            DensityRow { r, ratio, resolved: r >= 4.0 * h * (1.0 - 1e-12) }
        })
        .collect()
}

/// `(r, sup_{B_r(x0)} u / r^s)` per radius.
pub fn nondegeneracy_report(result: &MinimizerResult, x0: f64, radii: &[f64], s: f64) -> Vec<(f64, f64)> {
    radii.iter().map(|&r| (r, sup_on_ball(&result.u, x0, r, |_, v| v) / r.powf(s))).collect()
}

/// `min u(x) / dist(x, {u = 0})^s` over positivity nodes of the domain at
/// least `4h` away from the contact set and from the domain boundary.
pub fn positivity_distance_bound(result: &MinimizerResult, s: f64) -> Option<f64> {
    let u = &result.u;
    let g = &u.grid;
    let h = g.spacing();
    let zeros: Vec<f64> = result.contact.indices().into_iter().map(|i| g.x(i)).collect();
    if zeros.is_empty() {
        return None;
    }
    let omega = Region::from_indices(result.contact.indices().into_iter().chain(result.positivity.indices()).collect());
    let (lo, hi) = (g.x(omega.first()?), g.x(omega.last()?));
    let mut best: Option<f64> = None;
    for i in result.positivity.indices() {
        let x = g.x(i);
        let d = zeros.iter().map(|z| (z - x).abs()).fold(f64::INFINITY, f64::min);
        if d < 4.0 * h || x - lo < d || hi - x < d {
            continue;
        }
        let q = u.values[i] / d.powf(s);
        best = Some(best.map_or(q, |b: f64| b.min(q)));
    }
    best
}

/// Log-log fit of `r -> sup_{B_r(x0)} u`.
pub fn optimal_regularity_report(result: &MinimizerResult, x0: f64, radii: &[f64]) -> Result<ExponentFit> {
    let samples: Vec<(f64, f64)> = radii.iter().map(|&r| (r, sup_on_ball(&result.u, x0, r, |_, v| v))).collect();
    fit_growth(&samples).map_err(|e| match e {
        Error::InsufficientSamples(m) => Error::Degenerate(format!("under-resolved regularity fit: {m}")),
        other => other,
    })
}

/// Largest `|L_h u|` over positivity nodes and largest `L_h u` over the
/// whole domain, the discrete form of the basic properties of minimisers.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResidualCertificate {
    pub min_value: f64,
    pub max_lu: f64,
    pub max_abs_lu_positive: f64,
}

impl ResidualCertificate {
    pub fn passes(&self, tol: f64) -> bool {
        self.min_value >= 0.0 && self.max_lu <= tol && self.max_abs_lu_positive <= tol
    }
}

pub fn residual_certificate(problem: &OnePhaseProblem, result: &MinimizerResult) -> Result<ResidualCertificate> {
    let op = Operator::new(&problem.kernel, problem.grid())?;
    let rows = problem.omega.indices();
    let lu = op.apply(&result.u, &rows)?;
    let mut cert = ResidualCertificate {
        min_value: result.u.values.iter().cloned().fold(f64::INFINITY, f64::min),
        max_lu: f64::NEG_INFINITY,
        max_abs_lu_positive: 0.0,
    };
    for (&i, l) in rows.iter().zip(lu) {
        cert.max_lu = cert.max_lu.max(l);
        if result.u.values[i] > 0.0 {
            cert.max_abs_lu_positive = cert.max_abs_lu_positive.max(l.abs());
        }
    }
    Ok(cert)
}

/// The problem behind the half-space construction: `Omega = (-1, 0)` on a
/// grid over `[-1.25, 0.25]`, data `1` on `(0, inf)` and `0` on
/// `(-inf, -1]`.
pub fn step_one_fixture(kernel: &KernelSpec, nodes: usize, m: f64) -> Result<OnePhaseProblem> {
    let grid = Grid::uniform(-1.25, 0.25, nodes)?;
    let omega = Region::interval(&grid, -1.0, 0.0, false)?;
    let ext = Exterior::sides(
        crate::mesh::SideExterior::analytic(Tail::Zero),
        crate::mesh::SideExterior::analytic(Tail::Constant { value: 1.0 }),
    );
    let data = GridFunction::from_fn(grid, ext, |x| if x > 0.0 { 1.0 } else { 0.0 })?;
    OnePhaseProblem::new(kernel.clone(), omega, m, data)
}

/// Smallest `M` in `candidates` (increasing) whose minimiser has both a
/// contact point and a positivity point in the domain.
pub fn sweep_m(kernel: &KernelSpec, nodes: usize, candidates: &[f64]) -> Result<(f64, OnePhaseProblem, MinimizerResult)> {
    for &m in candidates {
        let p = step_one_fixture(kernel, nodes, m)?;
        let r = minimize_alternating(&p, &p.data)?;
        if !r.contact.is_empty() && !r.positivity.is_empty() {
            return Ok((m, p, r));
        }
    }
    Err(Error::Degenerate(format!("no M in {candidates:?} produces a free boundary")))
}

/// `[2, 4, 8, ..., 2^k]`.
pub fn doubling_ladder(k: u32) -> Vec<f64> {
    (1..=k).map(|j| 2f64.powi(j as i32)).collect()
}
