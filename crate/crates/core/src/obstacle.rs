//! The obstacle problem `min{Lu, u - phi} = 0` with `u = 0` outside a
//! symmetric window, solved as a linear complementarity problem on the
//! collocation matrix, and the diagnostics run on its free boundary.

use faer::Mat;
use serde::{Deserialize, Serialize};

use crate::analysis::{fit_growth, modulus_of_continuity, ExponentFit};
use crate::dirichlet::solve_spd;
use crate::error::{invalid, Error, Result};
use crate::halfspace::HalfSpaceSolution;
use crate::kernels::KernelSpec;
use crate::mesh::{Exterior, GridFunction, Region};
use crate::nonlocal_op::Operator;

/// Complementarity tolerance at convergence.
pub const COMPLEMENTARITY_TOL: f64 = 1e-8;
/// Outer iteration cap shared by both solvers.
pub const OUTER_CAP: usize = 1000;

/// Obstacle `phi` sampled on a grid symmetric about the origin.  The
/// solution vanishes at the two end nodes and beyond.
#[derive(Debug, Clone)]
pub struct ObstacleProblem {
    pub kernel: KernelSpec,
    pub phi: GridFunction,
}

impl ObstacleProblem {
    pub fn new(kernel: KernelSpec, phi: GridFunction) -> Result<Self> {
        let g = &phi.grid;
        g.require_1d()?;
        let (lo, hi) = (g.min(), g.max());
        if (lo + hi).abs() > 1e-9 * hi.abs().max(1.0) {
            return Err(invalid(format!("window ({lo}, {hi}) is not symmetric")));
        }
        if phi.values.iter().any(|v| !v.is_finite()) {
            return Err(invalid("obstacle has non-finite values"));
        }
        // the contact region has to stay well away from the truncation
        let reach = 0.5 * hi;
        for (i, &v) in phi.values.iter().enumerate() {
            if v > 0.0 && g.x(i).abs() >= reach {
                return Err(invalid(format!("obstacle is positive at x = {}; keep its support inside (-{reach}, {reach})", g.x(i))));
            }
        }
        Ok(Self { kernel, phi })
    }

    /// Obstacle given by a closure on `nodes` points of `(-radius, radius)`.
    pub fn from_fn(kernel: KernelSpec, radius: f64, nodes: usize, phi: impl Fn(f64) -> f64) -> Result<Self> {
        let grid = crate::mesh::Grid::uniform(-radius, radius, nodes)?;
        Self::new(kernel, GridFunction::from_fn(grid, Exterior::zero(), phi)?)
    }
}

/// `(1 - 4x^2)_+^2`, the bump used in the reference runs.
pub fn bump(x: f64) -> f64 {
    let t = 1.0 - 4.0 * x * x;
    if t > 0.0 {
        t * t
    } else {
        0.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    ActiveSet,
    ProjectedGaussSeidel,
}

/// A boundary node of the contact set.  `orientation` points from the
/// contact set into `{u > phi}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FreeBoundaryPoint {
    /// Last contact node.
    pub index: usize,
    pub node: f64,
    /// Sub-cell location: zero of the line through `gap^{1/(1+s)}` on the
    /// first nodes of the positivity side, kept within the cell after
    /// `node`.
    pub x: f64,
    pub orientation: f64,
}

/// Nodes used by the sub-cell estimate.
const SUBCELL_NODES: usize = 4;

fn locate(gap: &[f64], h: f64, x_node: f64, index: usize, orientation: f64, s: f64) -> f64 {
    let pts: Vec<(f64, f64)> = (1..=SUBCELL_NODES)
        .filter_map(|k| {
            let i = index as isize + orientation as isize * k as isize;
            let v = *gap.get(usize::try_from(i).ok()?)?;
            Some((k as f64, v.max(0.0).powf(1.0 / (1.0 + s))))
        })
        .collect();
    if pts.len() < 2 {
        return x_node;
    }
    let m = pts.len() as f64;
    let (mx, my) = (pts.iter().map(|p| p.0).sum::<f64>() / m, pts.iter().map(|p| p.1).sum::<f64>() / m);
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    if !(sxy > 0.0) {
        return x_node;
    }
    let root = (mx - my * sxx / sxy).clamp(0.0, 1.0);
    x_node + orientation * root * h
}

#[derive(Debug, Clone)]
pub struct ObstacleResult {
    pub u: GridFunction,
    pub phi: GridFunction,
    pub s: f64,
    /// `L_h u` at the nodes, zero at the two end nodes.
    pub lu: Vec<f64>,
    pub contact: Region,
    /// `max_i |min(L_h u_i, u_i - phi_i)|`
    pub residual: f64,
    pub free_boundary: Vec<FreeBoundaryPoint>,
    pub iterations: usize,
    pub method: Method,
}

impl ObstacleResult {
    /// `u - phi` with zero exterior.
    pub fn gap(&self) -> GridFunction {
        let v = self.u.values.iter().zip(&self.phi.values).map(|(a, b)| a - b).collect();
        GridFunction { grid: self.u.grid.clone(), values: v, exterior: Exterior::zero() }
    }

    /// `max |u(x) - u(-x)|`.
    pub fn asymmetry(&self) -> f64 {
        let v = &self.u.values;
        let n = v.len();
        (0..n / 2).map(|i| (v[i] - v[n - 1 - i]).abs()).fold(0.0, f64::max)
    }

    /// `min_i (u_i - phi_i)`, nonnegative for an admissible solution.
    pub fn min_gap(&self) -> f64 {
        self.u.values.iter().zip(&self.phi.values).map(|(a, b)| a - b).fold(f64::INFINITY, f64::min)
    }

    /// Most negative `L_h u_i`.
    pub fn min_lu(&self) -> f64 {
        self.lu.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

/// Checks that the collocation matrix is a nonsingular M-matrix: positive
/// diagonal, nonpositive off-diagonal entries and nonnegative row sums with
/// strict dominance somewhere.
fn check_m_matrix(a: &Mat<f64>) -> Result<()> {
    let m = a.nrows();
    let mut strict = false;
    for p in 0..m {
        let d = a[(p, p)];
        if !(d > 0.0) {
            return Err(Error::Degenerate(format!("collocation diagonal {d} at row {p}")));
        }
        let mut sum = d;
        for q in 0..m {
            if q != p {
                let v = a[(p, q)];
                if v > 0.0 {
                    return Err(Error::Degenerate(format!("positive off-diagonal entry {v} at ({p}, {q})")));
                }
                sum += v;
            }
        }
        if sum < -1e-12 * d {
            return Err(Error::Degenerate(format!("collocation row {p} is not diagonally dominant")));
        }
        strict |= sum > 1e-12 * d;
    }
    if !strict {
        return Err(Error::Degenerate("collocation matrix has no strictly dominant row".into()));
    }
    Ok(())
}

fn residual_of(a: &Mat<f64>, x: &[f64], psi: &[f64]) -> (Vec<f64>, f64) {
    let m = x.len();
    let mut ax = vec![0.0; m];
    for q in 0..m {
        let xq = x[q];
        if xq != 0.0 {
            for p in 0..m {
                ax[p] += a[(p, q)] * xq;
            }
        }
    }
    let worst = (0..m).map(|p| ax[p].min(x[p] - psi[p]).abs()).fold(0.0, f64::max);
    (ax, worst)
}

/// Primal-dual active set iteration for `A x >= 0`, `x >= psi`,
/// `(A x) . (x - psi) = 0`.  Returns `None` when the active sets cycle.
fn active_set(a: &Mat<f64>, psi: &[f64]) -> Result<Option<(Vec<f64>, usize)>> {
    let m = psi.len();
    let scale = (0..m).map(|p| a[(p, p)]).fold(0.0, f64::max);
    let mut active: Vec<bool> = psi.iter().map(|&v| v > 0.0).collect();
    let mut seen = std::collections::HashSet::new();
    for it in 1..=OUTER_CAP {
        if !seen.insert(active.clone()) {
            return Ok(None);
        }
        let free: Vec<usize> = (0..m).filter(|&p| !active[p]).collect();
        let mut x: Vec<f64> = (0..m).map(|p| if active[p] { psi[p] } else { 0.0 }).collect();
        if !free.is_empty() {
            let sub = Mat::from_fn(free.len(), free.len(), |i, j| a[(free[i], free[j])]);
            let rhs: Vec<f64> = free.iter().map(|&p| -(0..m).filter(|&q| active[q]).map(|q| a[(p, q)] * psi[q]).sum::<f64>()).collect();
            for (&p, v) in free.iter().zip(solve_spd(&sub, &rhs)?) {
                x[p] = v;
            }
        }
        let (ax, _) = residual_of(a, &x, psi);
        let next: Vec<bool> = (0..m).map(|p| active[p] && ax[p] + scale * (psi[p] - x[p]) > 0.0 || !active[p] && x[p] < psi[p]).collect();
        if next == active {
            return Ok(Some((x, it)));
        }
        active = next;
    }
    Err(Error::IterationCap { cap: OUTER_CAP, context: "active set iteration".into() })
}

/// Projected Gauss-Seidel sweeps from `x`.
fn projected_gauss_seidel(a: &Mat<f64>, psi: &[f64], mut x: Vec<f64>) -> Result<(Vec<f64>, usize)> {
    let m = psi.len();
    for sweep in 1..=OUTER_CAP {
        for p in 0..m {
            let mut r = 0.0;
            for q in 0..m {
                if q != p {
                    r -= a[(p, q)] * x[q];
                }
            }
            x[p] = (r / a[(p, p)]).max(psi[p]);
        }
        if residual_of(a, &x, psi).1 <= COMPLEMENTARITY_TOL {
            return Ok((x, sweep));
        }
    }
    Err(Error::IterationCap { cap: OUTER_CAP, context: "projected Gauss-Seidel".into() })
}

/// Solves the discrete obstacle problem.  The active set iteration is tried
/// first; if its active sets cycle, projected Gauss-Seidel continues from
/// the obstacle.
pub fn solve_obstacle(problem: &ObstacleProblem) -> Result<ObstacleResult> {
    let phi = &problem.phi;
    let grid = &phi.grid;
    let n = grid.len();
    let op = Operator::new(&problem.kernel, grid)?;
    let rows: Vec<usize> = (1..n - 1).collect();
    let a = op.collocation_matrix(&rows)?;
    check_m_matrix(&a)?;
    let psi: Vec<f64> = rows.iter().map(|&i| phi.values[i]).collect();
    let (x, iterations, method) = match active_set(&a, &psi)? {
        Some((x, it)) => (x, it, Method::ActiveSet),
        None => {
            let start = psi.iter().map(|v| v.max(0.0)).collect();
            let (x, it) = projected_gauss_seidel(&a, &psi, start)?;
            (x, it, Method::ProjectedGaussSeidel)
        }
    };
    let mut values = vec![0.0; n];
    for (&i, v) in rows.iter().zip(&x) {
        values[i] = *v;
    }
    let u = GridFunction::new(grid.clone(), values, Exterior::zero())?;
    let mut lu = vec![0.0; n];
    for (&i, v) in rows.iter().zip(op.apply(&u, &rows)?) {
        lu[i] = v;
    }
    let residual = rows.iter().map(|&i| lu[i].min(u.values[i] - phi.values[i]).abs()).fold(0.0, f64::max);
    if residual > COMPLEMENTARITY_TOL {
        return Err(Error::Degenerate(format!("complementarity residual {residual:e} after convergence")));
    }
    // contact: gap at rounding level
    let tol = 1e-12 * phi.values.iter().fold(1.0f64, |m, v| m.max(v.abs()));
    let contact = Region::from_indices(rows.iter().copied().filter(|&i| u.values[i] - phi.values[i] <= tol).collect());
    let gap: Vec<f64> = u.values.iter().zip(&phi.values).map(|(a, b)| a - b).collect();
    let s = problem.kernel.order();
    let h = grid.spacing();
    let point = |index: usize, orientation: f64| {
        let node = grid.x(index);
        FreeBoundaryPoint { index, node, x: locate(&gap, h, node, index, orientation, s), orientation }
    };
    let mut free_boundary = Vec::new();
    for &(lo, end) in contact.ranges() {
        if lo > 1 {
            free_boundary.push(point(lo, -1.0));
        }
        if end + 1 < n {
            free_boundary.push(point(end - 1, 1.0));
        }
    }
    Ok(ObstacleResult { u, phi: phi.clone(), s, lu, contact, residual, free_boundary, iterations, method })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PointClass {
    Regular,
    Degenerate,
}

/// Exponent band around `1 + s` for a regular point.
pub const CLASS_BAND: f64 = 0.1;

/// `count` radii growing by about `sqrt 2` from `4h`, rounded to whole
/// cells so that every ball ends on a node.
pub fn classification_radii(h: f64, count: usize) -> Vec<f64> {
    (0..count).map(|k| h * (4.0 * 2f64.powf(0.5 * k as f64)).round()).collect()
}

/// `(rho, max f(x_i, v_i))` over the nodes in `B_r(x0)`, where `rho` is the
/// distance from `x0` of the node attaining the max (`r` when the max is
/// zero).  Fitting against `rho` rather than `r` removes the bias of up to a
/// cell at the small radii.
fn ball_sup(v: &GridFunction, x0: f64, r: f64, f: impl Fn(f64, f64) -> f64) -> (f64, f64) {
    let g = &v.grid;
    let (mut rho, mut sup) = (r, 0.0f64);
    for i in 0..g.len() {
        let d = (g.x(i) - x0).abs();
        if d <= r * (1.0 + 1e-12) {
            let y = f(g.x(i), v.values[i]);
            if y > sup {
                sup = y;
                rho = d;
            }
        }
    }
    (rho, sup)
}

/// Fit of `r -> sup_{B_r(x0)} gap` and the regular/degenerate call: regular
/// when the exponent is within [`CLASS_BAND`] of `1 + s` and the coefficient
/// clears `10 h^{1+s}`, degenerate when the exponent is above the band or
/// the coefficient is below the floor.  An exponent below the band means the
/// fit is not resolved.
pub fn classify_gap(gap: &GridFunction, s: f64, x0: f64, radii: &[f64]) -> Result<(PointClass, ExponentFit)> {
    let g = &gap.grid;
    let h = g.spacing();
    let samples: Vec<(f64, f64)> = radii.iter().map(|&r| ball_sup(gap, x0, r, |_, v| v)).collect();
    let fit = fit_growth(&samples)?;
    let target = 1.0 + s;
    let floor = 10.0 * h.powf(target);
    if fit.exponent >= target + CLASS_BAND {
        return Ok((PointClass::Degenerate, fit));
    }
    if fit.exponent < target - CLASS_BAND {
        return Err(Error::InsufficientSamples(format!(
            "gap grows like r^{:.3}, below the band around {target}; refine the grid",
            fit.exponent
        )));
    }
    let class = if fit.coefficient > floor { PointClass::Regular } else { PointClass::Degenerate };
    Ok((class, fit))
}

pub fn classify_free_boundary_point(result: &ObstacleResult, x0: f64, radii: &[f64]) -> Result<(PointClass, ExponentFit)> {
    classify_gap(&result.gap(), result.s, x0, radii)
}

/// Hölder fit of the derivative.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RegularityReport {
    /// Fit of the modulus of continuity of `u'`.
    pub holder: ExponentFit,
    /// The fitted exponent, or 1 when saturated.
    pub alpha: f64,
    /// The fit hit the Lipschitz cap.
    pub saturated: bool,
    /// Growth of `|D^2 u|` with the distance to each free boundary point,
    /// on the side where `u > phi`.  Negative exponents mean blow up.
    pub second_differences: Vec<(f64, ExponentFit)>,
}

impl RegularityReport {
    pub fn passes(&self, s: f64) -> bool {
        self.alpha >= s - 0.1
    }
}

/// Fitted exponents from here on are reported as Lipschitz: curvature of a
/// smooth derivative pulls the fit slightly below one.
pub const LIPSCHITZ_CUTOFF: f64 = 0.95;

/// Hölder exponent of nodal data `v` from its dyadic modulus of continuity
/// between `4h` and `r_max`.
pub fn holder_fit(v: &[f64], h: f64, r_max: f64) -> Result<(ExponentFit, f64, bool)> {
    let mut radii = Vec::new();
    let mut r = 4.0 * h;
    while r <= r_max * (1.0 + 1e-12) {
        radii.push(r);
        r *= 2.0;
    }
    let fit = fit_growth(&modulus_of_continuity(v, h, &radii))?;
    let saturated = fit.exponent >= LIPSCHITZ_CUTOFF;
    Ok((fit, if saturated { 1.0 } else { fit.exponent }, saturated))
}

/// Central differences `(v[i+1] - v[i-1]) / 2h` at the interior nodes.
fn derivative(v: &[f64], h: f64) -> Vec<f64> {
    v.windows(3).map(|w| (w[2] - w[0]) / (2.0 * h)).collect()
}

/// Modulus radii for [`obstacle_regularity_report`] stop at this fraction of
/// the window.
const MODULUS_REACH: f64 = 1.0 / 32.0;

pub fn obstacle_regularity_report(result: &ObstacleResult) -> Result<RegularityReport> {
    let g = &result.u.grid;
    let h = g.spacing();
    let du = derivative(&result.u.values, h);
    let (holder, alpha, saturated) = holder_fit(&du, h, MODULUS_REACH * (g.max() - g.min()))?;
    let gap = result.gap();
    let reach = MODULUS_REACH * (g.max() - g.min());
    let mut second_differences = Vec::new();
    for p in &result.free_boundary {
        let samples: Vec<(f64, f64)> = (1..)
            .map(|k| 1usize << k)
            .take_while(|&steps| steps as f64 * h <= reach)
            .map(|steps| {
                let i = (p.index as f64 + p.orientation * steps as f64) as usize;
                let d2 = (gap.values[i + 1] - 2.0 * gap.values[i] + gap.values[i - 1]) / (h * h);
                ((g.x(i) - p.x).abs(), d2.abs())
            })
            .collect();
        second_differences.push((p.x, fit_growth(&samples)?));
    }
    Ok(RegularityReport { holder, alpha, saturated, second_differences })
}

/// `B(x) = int_0^x b` tabulated on the profile nodes of a half-space
/// solution.  The first cell uses the `x^s` onset of `b` instead of the
/// trapezoid, which would bias every later value by `O(h^{1+s})`.
#[derive(Debug, Clone)]
pub struct Antiderivative {
    h: f64,
    s: f64,
    table: Vec<f64>,
}

impl Antiderivative {
    pub fn new(b: &HalfSpaceSolution) -> Result<Self> {
        let h = b.profile.grid.spacing();
        let s = b.order();
        let count = (b.extent() / h).floor() as usize;
        if count < 2 {
            return Err(Error::Coverage("half-space profile is shorter than two cells".into()));
        }
        let mut table = vec![0.0; count + 1];
        let mut prev = b.value(h);
        table[1] = prev * h / (1.0 + s);
        for k in 2..=count {
            let next = b.value(k as f64 * h);
            table[k] = table[k - 1] + 0.5 * h * (prev + next);
            prev = next;
        }
        Ok(Self { h, s, table })
    }

    pub fn extent(&self) -> f64 {
        (self.table.len() - 1) as f64 * self.h
    }

    pub fn value(&self, x: f64) -> f64 {
        if x <= 0.0 {
            return 0.0;
        }
        let t = x / self.h;
        if t < 1.0 {
            return self.table[1] * t.powf(1.0 + self.s);
        }
        let k = (t.floor() as usize).min(self.table.len() - 2);
        let w = t - k as f64;
        (1.0 - w) * self.table[k] + w * self.table[k + 1]
    }
}

/// Result of [`expansion_fit`].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExpansionFit {
    pub c: f64,
    /// `(rho, sup_{B_rho(x0)} |gap - c B((x - x0) e)|)`, `rho` the farthest node
    /// distance of the maximiser in each ball
    pub remainder: Vec<(f64, f64)>,
    /// `None` when the remainder vanishes to rounding.
    pub fit: Option<ExponentFit>,
    pub exponent: f64,
    pub saturated: bool,
}

impl ExpansionFit {
    pub fn passes(&self, s: f64) -> bool {
        self.c > 0.0 && self.exponent >= 1.0 + s + 0.05
    }
}

/// Reported remainder exponent when the remainder is zero to rounding.
pub const EXPANSION_CAP: f64 = 4.0;

/// Expansion `gap ~ c B((x - x0) e)`: `c` is the projection of the gap on
/// `B` over the smallest ball and the remainder growth is fitted over the
/// remaining radii (increasing).
pub fn expansion_fit_gap(gap: &GridFunction, x0: f64, orientation: f64, big_b: &Antiderivative, radii: &[f64]) -> Result<ExpansionFit> {
    let r0 = *radii.first().ok_or_else(|| invalid("need at least one radius"))?;
    if radii.last().copied().unwrap_or(0.0) > big_b.extent() {
        return Err(Error::Coverage(format!(
            "half-space profile ends at {} but the fit reaches {}",
            big_b.extent(),
            radii[radii.len() - 1]
        )));
    }
    let g = &gap.grid;
    let shape = |x: f64| big_b.value((x - x0) * orientation);
    let nodes: Vec<usize> = (0..g.len()).filter(|&i| (g.x(i) - x0).abs() <= r0 * (1.0 + 1e-12)).collect();
    let (mut ub, mut bb) = (0.0, 0.0);
    for w in nodes.windows(2) {
        let (xa, xb) = (g.x(w[0]), g.x(w[1]));
        let (ba, bv) = (shape(xa), shape(xb));
        let dx = xb - xa;
        ub += 0.5 * dx * (gap.values[w[0]] * ba + gap.values[w[1]] * bv);
        bb += 0.5 * dx * (ba * ba + bv * bv);
    }
    if bb < 1e-300 {
        return Err(Error::Degenerate(format!("B vanishes on B_{r0}({x0})")));
    }
    let c = ub / bb;
    let scale = gap.values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let remainder: Vec<(f64, f64)> = radii.iter().map(|&r| ball_sup(gap, x0, r, |x, v| (v - c * shape(x)).abs())).collect();
    if remainder.iter().all(|&(_, v)| v <= 1e-12 * scale.max(f64::MIN_POSITIVE)) {
        return Ok(ExpansionFit { c, remainder, fit: None, exponent: EXPANSION_CAP, saturated: true });
    }
    let fit = fit_growth(&remainder)?;
    let saturated = fit.exponent >= EXPANSION_CAP;
    Ok(ExpansionFit { c, remainder, exponent: fit.exponent.min(EXPANSION_CAP), fit: Some(fit), saturated })
}

pub fn expansion_fit(result: &ObstacleResult, point: &FreeBoundaryPoint, b: &HalfSpaceSolution, radii: &[f64]) -> Result<ExpansionFit> {
    if (b.order() - result.s).abs() > 1e-12 {
        return Err(invalid(format!("half-space solution has order {} but the obstacle kernel has {}", b.order(), result.s)));
    }
    expansion_fit_gap(&result.gap(), point.x, point.orientation, &Antiderivative::new(b)?, radii)
}
