//! Half-space solutions: the positive solution `b` of `Lb = 0` on `(0, inf)`
//! vanishing on `(-inf, 0]`, unique up to a multiplicative constant.
//!
//! Two independent routes produce it.  The pipeline zooms dyadically into a
//! one-phase minimiser at a free boundary point, re-minimising on a fixed
//! window at every level with the rescaled kernel, until consecutive window
//! profiles agree.  Blow-ups are centred at the last contact node and use
//! factor `1/2`, so even nodes of a level sit on nodes of the previous one
//! and the discrete free boundary does not drift through interpolation.
//! The truncated route solves the Dirichlet problem on `(0, R)` with the
//! power law `a x^s` prescribed beyond `R`.

use serde::{Deserialize, Serialize};

use crate::analysis::{fit_growth, ExponentFit};
use crate::dirichlet::solve_with;
use crate::error::{invalid, Error, Result};
use crate::kernels::KernelSpec;
use crate::mesh::{Exterior, Grid, GridFunction, Region, SideExterior, Tail};
use crate::nonlocal_op::{apply_l_planar, apply_l_quadrature, Field, Operator};
use crate::onephase::{alternating, doubling_ladder, free_boundary_points, sweep_m, OnePhaseProblem};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    Pipeline,
    TruncatedFixedPoint,
}

/// One zoom level of the pipeline.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Level {
    /// Total blow-up factor relative to the step-one coordinates.
    pub scale: f64,
    /// Sup distance on `[0, 1]` to the normalised profile one kernel period
    /// earlier (infinite for the first levels).
    pub cauchy: f64,
    /// Sub-cell free boundary position relative to the last contact node,
    /// in window units.
    pub fb_offset: f64,
    pub sweeps: usize,
}

#[derive(Debug, Clone)]
pub struct HalfSpaceSolution {
    /// `b` on `[0, R]` with `b(0) = 0`, `b(1) = 1`, zero on the left and
    /// exterior samples followed by `a x^s` on the right.
    pub profile: GridFunction,
    pub provenance: Provenance,
    pub kernel: KernelSpec,
    /// `min` and `max` of `b(x) / x^s` over the positive grid nodes.
    pub c1: f64,
    pub c2: f64,
    /// The free boundary constant of the step-one problem (pipeline only).
    pub m: Option<f64>,
    pub levels: Vec<Level>,
}

impl HalfSpaceSolution {
    fn assemble(profile: GridFunction, provenance: Provenance, kernel: &KernelSpec, m: Option<f64>, levels: Vec<Level>) -> Result<Self> {
        let s = kernel.order();
        let g = &profile.grid;
        let (mut c1, mut c2) = (f64::INFINITY, 0.0f64);
        for i in 1..g.len() {
            let q = profile.values[i] / g.x(i).powf(s);
            c1 = c1.min(q);
            c2 = c2.max(q);
        }
        if !(c1 > 0.0) {
            return Err(Error::Degenerate(format!("half-space profile is not positive (min b/x^s = {c1:e})")));
        }
        Ok(Self { profile, provenance, kernel: kernel.clone(), c1, c2, m, levels })
    }

    pub fn order(&self) -> f64 {
        self.kernel.order()
    }

    /// Right end of the grid part.
    pub fn window(&self) -> f64 {
        self.profile.grid.max()
    }

    /// `b(x)` (zero for `x <= 0`).
    pub fn value(&self, x: f64) -> f64 {
        if x <= 0.0 {
            0.0
        } else {
            self.profile.value_at(x)
        }
    }

    /// Largest `x` where `b` is known from data rather than the power tail.
    pub fn extent(&self) -> f64 {
        self.window() + self.profile.exterior.right.sampled_extent()
    }

    /// `max |L_h b|` over the grid nodes in `(0, 3R/4)`, relative to
    /// `max b` on that range.
    pub fn residual(&self) -> Result<f64> {
        let g = &self.profile.grid;
        let op = Operator::new(&self.kernel, g)?;
        let nodes = Region::interval(g, 0.0, 0.75 * g.max(), false)?.indices();
        let lu = op.apply(&self.profile, &nodes)?;
        let scale = nodes.iter().map(|&i| self.profile.values[i]).fold(0.0f64, f64::max);
        Ok(lu.iter().fold(0.0f64, |m, v| m.max(v.abs())) / scale)
    }

    /// `sup |b - other|` over the grid nodes of `self` in `[0, 1]`.
    pub fn distance_on_unit(&self, other: &dyn Fn(f64) -> f64) -> f64 {
        let g = &self.profile.grid;
        (0..g.len()).filter(|&i| g.x(i) <= 1.0 + 1e-12).map(|i| (self.profile.values[i] - other(g.x(i))).abs()).fold(0.0, f64::max)
    }

    /// Log-log fit of `b(r)` at dyadic `r` spanning `decades` decades from
    /// the smallest well resolved dyadic radius.
    pub fn growth_fit(&self, decades: f64) -> Result<ExponentFit> {
        let samples = self.dyadic_samples(decades)?;
        fit_growth(&samples.iter().map(|&(r, _)| (r, self.value(r))).collect::<Vec<_>>())
    }

    fn dyadic_samples(&self, decades: f64) -> Result<Vec<(f64, f64)>> {
        if !(decades > 0.0) {
            return Err(invalid("the number of decades must be positive"));
        }
        let h = self.profile.grid.spacing();
        let k0 = (16.0 * h).log2().ceil() as i32;
        let k1 = k0 + (decades * 10f64.log2()).ceil() as i32;
        let r_max = 2f64.powi(k1);
        if r_max > self.extent() {
            return Err(Error::Coverage(format!(
                "{decades} decades from 2^{k0} need data up to {r_max}, the profile reaches {}",
                self.extent()
            )));
        }
        let s = self.order();
        Ok((k0..=k1).map(|k| 2f64.powi(k)).map(|r| (r, self.value(r) / r.powf(s))).collect())
    }
}

/// Settings of [`build_halfspace_pipeline_with`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineOptions {
    /// Grid resolution of every zoom window.
    pub nodes_per_unit: usize,
    /// Window `[-1, window]` around the free boundary, in zoomed units.
    pub window: f64,
    /// Resolution of the step-one problem on `[-1.25, 0.25]`.
    pub step_one_nodes: usize,
    /// Increasing candidates for `M`.
    pub m_candidates: Vec<f64>,
    pub tolerance: f64,
    pub max_levels: usize,
}

impl Default for PipelineOptions {
    fn default() -> Self {
        Self { nodes_per_unit: 512, window: 4.0, step_one_nodes: 512, m_candidates: doubling_ladder(10), tolerance: 1e-3, max_levels: 12 }
    }
}

/// Last contact node followed by a positive node, closest to `near`.
fn contact_edge(u: &GridFunction, omega: &Region, near: f64) -> Option<usize> {
    let g = &u.grid;
    (0..g.len() - 1)
        .filter(|&i| omega.contains(i) && u.values[i] == 0.0 && u.values[i + 1] > 0.0)
        .min_by(|&a, &b| (g.x(a) - near).abs().total_cmp(&(g.x(b) - near).abs()))
}

/// Values on the nodes of `[z, z + 1]` divided by the value at `z + 1`.
fn normalised_window(u: &GridFunction, z: usize, per_unit: usize) -> Result<Vec<f64>> {
    let v = &u.values;
    if z + per_unit >= v.len() || !(v[z + per_unit] > 0.0) {
        return Err(Error::Degenerate("no positivity on the unit interval right of the free boundary".into()));
    }
    Ok((0..=per_unit).map(|k| v[z + k] / v[z + per_unit]).collect())
}

fn thin(e: &Exterior, h: f64) -> Exterior {
    Exterior { left: e.left.thinned(0.05, h), right: e.right.thinned(0.05, h) }
}

/// [`build_halfspace_pipeline_with`] with default options.
pub fn build_halfspace_pipeline(kernel: &KernelSpec) -> Result<HalfSpaceSolution> {
    build_halfspace_pipeline_with(kernel, &PipelineOptions::default())
}

pub fn build_halfspace_pipeline_with(kernel: &KernelSpec, opts: &PipelineOptions) -> Result<HalfSpaceSolution> {
    if kernel.dim() != 1 {
        return Err(Error::Unsupported("reduce the kernel to one dimension first".into()));
    }
    let w = opts.window;
    let npu = opts.nodes_per_unit;
    if !(w >= 2.0 && (w * npu as f64).fract() == 0.0) || npu < 16 || opts.max_levels == 0 || !(opts.tolerance > 0.0) {
        return Err(invalid("pipeline needs window >= 2 on whole nodes, at least 16 nodes per unit, a level and a positive tolerance"));
    }
    let s = kernel.order();
    let (m, step, first) = sweep_m(kernel, opts.step_one_nodes, &opts.m_candidates)?;
    let z = contact_edge(&first.u, &step.omega, 0.0)
        .ok_or_else(|| Error::Degenerate("step one has no contact point with positivity to its right".into()))?;
    let x0 = first.u.grid.x(z);
    let grid = Grid::uniform(-1.0, w, (w + 1.0) as usize * npu + 1)?;
    let h = grid.spacing();
    let omega = Region::interval(&grid, -1.0, w, false)?;
    let period = kernel.dyadic_period().unwrap_or(1) as usize;

    let mut source = first.u;
    let mut centre = x0;
    // position of the step-one data jump in the current coordinates
    let mut jump = 0.0;
    // dyadic first zoom so that periodic kernels come back to themselves
    let mut zoom = 2f64.powi(-((w / -x0).log2().ceil() as i32));
    let mut scale = zoom;
    let mut levels = Vec::new();
    let mut history: Vec<Vec<f64>> = Vec::new();
    for j in 0..opts.max_levels {
        let mut data = source.blow_up_onto(centre, zoom, s, &grid)?;
        jump = (jump - centre) / zoom;
        data.exterior = thin(&data.exterior, h);
        let problem = OnePhaseProblem::new(kernel.rescale(scale)?, omega.clone(), m, data.clone())?;
        let result = alternating(&problem, &data, false)?;
        let z = contact_edge(&result.u, &omega, 0.0)
            .ok_or_else(|| Error::Degenerate(format!("the free boundary left the window at level {j}")))?;
        let profile = normalised_window(&result.u, z, npu)?;
        let cauchy = if j >= period {
            history[j - period].iter().zip(&profile).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
        } else {
            f64::INFINITY
        };
        let fb = free_boundary_points(&result, s);
        let fb_offset = fb.iter().map(|x| x - grid.x(z)).min_by(|a, b| a.abs().total_cmp(&b.abs())).unwrap_or(f64::NAN);
        levels.push(Level { scale, cauchy, fb_offset, sweeps: result.trace.len() });
        history.push(profile);
        let aligned = (scale.log2().round() as i64).rem_euclid(period as i64) == 0;
        if cauchy < opts.tolerance && aligned {
            let final_kernel = kernel.rescale(scale)?;
            let out = finish_pipeline(&final_kernel, &result.u, z, jump, s)?;
            return HalfSpaceSolution::assemble(out, Provenance::Pipeline, &final_kernel, Some(m), levels);
        }
        source = result.u;
        centre = grid.x(z);
        zoom = 0.5;
        scale *= 0.5;
    }
    let trace: Vec<String> = levels.iter().map(|l| format!("{:.3e}", l.cauchy)).collect();
    Err(Error::IterationCap { cap: opts.max_levels, context: format!("half-space pipeline, Cauchy differences [{}]", trace.join(", ")) })
}

/// Turns the last window into the output profile: the contact node moves
/// to `0`, the exterior keeps the samples up to half way to the step-one
/// data jump (beyond which the data still reflects the step-one boundary
/// values) and continues with the power law, `Lb = 0` is re-solved against
/// that data, the last unit of the window becomes exterior samples and
/// `b(1) = 1`.
fn finish_pipeline(kernel: &KernelSpec, u: &GridFunction, z: usize, jump: f64, s: f64) -> Result<GridFunction> {
    let g = &u.grid;
    let shift = g.x(z);
    let npu = (1.0 / g.spacing()).round() as usize;
    let w = g.max() - shift;
    let grid = Grid::uniform(0.0, w, g.len() - z)?;
    let reach = 0.5 * (jump - shift) - w;
    let right = power_continuation(&u.exterior.right, w, u.values[g.len() - 1], reach, s);
    let data = GridFunction::new(grid.clone(), u.values[z..].to_vec(), Exterior::sides(SideExterior::analytic(Tail::Zero), right))?;
    let omega = Region::interval(&grid, 0.0, w, false)?;
    let b = solve_with(&Operator::new(kernel, &grid)?, &omega, &vec![0.0; grid.len()], &data)?;
    let trimmed = Grid::uniform(0.0, w - 1.0, grid.len() - npu)?;
    let b = b.blow_up_onto(0.0, 1.0, s, &trimmed)?;
    let norm = b.values[npu];
    Ok(rescaled(b, 1.0 / norm))
}

/// Keeps the samples of `side` up to distance `reach` beyond the edge at
/// `edge` and continues with `a |x|^s`, `a` fitted on the outermost decade.
fn power_continuation(side: &SideExterior, edge: f64, edge_value: f64, reach: f64, s: f64) -> SideExterior {
    let samples: Vec<(f64, f64)> = side.samples.iter().copied().filter(|p| p.0 <= reach * (1.0 + 1e-12)).collect();
    let pts: Vec<(f64, f64)> = std::iter::once((edge, edge_value)).chain(samples.iter().map(|&(d, v)| (edge + d, v))).collect();
    let outer = pts.last().map_or(edge, |p| p.0);
    let amplitude = power_amplitude(pts.iter().filter(|p| p.0 >= outer / 10.0), s);
    SideExterior { samples, tail: Tail::Power { amplitude, exponent: s, origin: 0.0 } }
}

/// `c b` including the exterior data.
fn rescaled(mut b: GridFunction, c: f64) -> GridFunction {
    b.values.iter_mut().for_each(|v| *v *= c);
    for side in [&mut b.exterior.left, &mut b.exterior.right] {
        side.samples.iter_mut().for_each(|p| p.1 *= c);
        side.tail = match side.tail {
            Tail::Zero => Tail::Zero,
            Tail::Constant { value } => Tail::Constant { value: c * value },
            Tail::Power { amplitude, exponent, origin } => Tail::Power { amplitude: c * amplitude, exponent, origin },
        };
    }
    b
}

/// Least squares `a` in `v = a x^s`.
fn power_amplitude<'a>(pts: impl Iterator<Item = &'a (f64, f64)>, s: f64) -> f64 {
    let (num, den) = pts.fold((0.0, 0.0), |(n, d), &(x, v)| (n + v * x.powf(s), d + x.powf(2.0 * s)));
    num / den
}

/// Iteration cap of the truncated route.
pub const TRUNCATED_CAP: usize = 50;

/// [`build_halfspace_truncated_with`] at 512 nodes per unit.
pub fn build_halfspace_truncated(kernel: &KernelSpec, r: f64) -> Result<HalfSpaceSolution> {
    build_halfspace_truncated_with(kernel, r, 512)
}

/// Solves `Lb = 0` on `(0, R)` with `b = 0` on `(-inf, 0]` and `b = a x^s`
/// on `[R, inf)`, normalises `b(1) = 1` and updates `a` to the least
/// squares power fit of `b` on `[3R/4, R]`.  The problem is linear in `a`,
/// so the normalised profile is already final after the first solve and the
/// iteration only settles the tail amplitude.
pub fn build_halfspace_truncated_with(kernel: &KernelSpec, r: f64, nodes_per_unit: usize) -> Result<HalfSpaceSolution> {
    if kernel.dim() != 1 {
        return Err(Error::Unsupported("reduce the kernel to one dimension first".into()));
    }
    if !(r >= 2.0) || nodes_per_unit < 16 || (r * nodes_per_unit as f64).fract() != 0.0 {
        return Err(invalid("truncation radius must be at least 2 and a whole number of cells"));
    }
    let s = kernel.order();
    let n = (r * nodes_per_unit as f64) as usize + 1;
    let grid = Grid::uniform(0.0, r, n)?;
    let omega = Region::interval(&grid, 0.0, r, false)?;
    let op = Operator::new(kernel, &grid)?;
    let zero = vec![0.0; n];
    let mut a = 1.0;
    for _ in 0..TRUNCATED_CAP {
        let ext = Exterior::sides(
            SideExterior::analytic(Tail::Zero),
            SideExterior::analytic(Tail::Power { amplitude: a, exponent: s, origin: 0.0 }),
        );
        let g = GridFunction::from_fn(grid.clone(), ext, |x| if x >= r { a * x.powf(s) } else { 0.0 })?;
        let b = solve_with(&op, &omega, &zero, &g)?;
        let norm = b.values[nodes_per_unit];
        if !(norm > 0.0) {
            return Err(Error::Degenerate("truncated solve is not positive at 1".into()));
        }
        let b = rescaled(b, 1.0 / norm);
        let fit: Vec<(f64, f64)> = (0..n).filter(|&i| grid.x(i) >= 0.75 * r).map(|i| (grid.x(i), b.values[i])).collect();
        let next = power_amplitude(fit.iter(), s);
        if (next - a).abs() <= 1e-12 * next.abs() {
            return HalfSpaceSolution::assemble(b, Provenance::TruncatedFixedPoint, kernel, None, Vec::new());
        }
        a = next;
    }
    Err(Error::IterationCap { cap: TRUNCATED_CAP, context: "truncated half-space tail amplitude".into() })
}

/// Bounds of `b'(x) x^{1-s}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DerivativeBounds {
    pub c1: f64,
    pub c2: f64,
    /// Smallest forward difference quotient over the whole grid.
    pub min_slope: f64,
}

impl DerivativeBounds {
    pub fn passes(&self) -> bool {
        self.c1 > 0.0 && self.c1 <= self.c2 && self.c2.is_finite() && self.min_slope >= 0.0
    }
}

/// Central differences of `b` on `(4h, R/2)`.
pub fn derivative_bounds_report(b: &HalfSpaceSolution) -> DerivativeBounds {
    let g = &b.profile.grid;
    let v = &b.profile.values;
    let h = g.spacing();
    let s = b.order();
    let (mut c1, mut c2) = (f64::INFINITY, f64::NEG_INFINITY);
    for i in 1..g.len() - 1 {
        let x = g.x(i);
        if x <= 4.0 * h || x >= 0.5 * g.max() {
            continue;
        }
        let q = (v[i + 1] - v[i - 1]) / (2.0 * h) * x.powf(1.0 - s);
        c1 = c1.min(q);
        c2 = c2.max(q);
    }
    let min_slope = v.windows(2).map(|p| (p[1] - p[0]) / h).fold(f64::INFINITY, f64::min);
    DerivativeBounds { c1, c2, min_slope }
}

/// `b(r) / r^s` at dyadic radii together with its relative oscillation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuotientProbe {
    pub samples: Vec<(f64, f64)>,
    /// `(max - min) / mean` of the quotient.
    pub amplitude: f64,
}

/// Exploratory: samples `b(r)/r^s` over `decades` decades of dyadic radii,
/// starting from the smallest dyadic radius above `16h`.
pub fn quotient_oscillation_probe(b: &HalfSpaceSolution, decades: f64) -> Result<QuotientProbe> {
    let samples = b.dyadic_samples(decades)?;
    let (lo, hi, sum) = samples.iter().fold((f64::INFINITY, f64::NEG_INFINITY, 0.0), |(l, u, t), p| (l.min(p.1), u.max(p.1), t + p.1));
    let mean = sum / samples.len() as f64;
    Ok(QuotientProbe { amplitude: (hi - lo) / mean, samples })
}

/// One test point of [`reduction_consistency`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReductionRow {
    pub t: f64,
    pub planar: f64,
    pub reduced: f64,
    pub relative: f64,
}

/// Compares `L(f(x . e))` for a planar kernel with `L~ f` for its one
/// dimensional reduction at the points `t e`.  `f` should be bounded and
/// smooth so that both quadratures are accurate.
pub fn reduction_consistency(kernel: &KernelSpec, direction: [f64; 2], f: &dyn Field, points: &[f64]) -> Result<Vec<ReductionRow>> {
    let (reduced, _) = kernel.reduce_to_1d(&direction)?;
    let norm = (direction[0] * direction[0] + direction[1] * direction[1]).sqrt();
    let e = [direction[0] / norm, direction[1] / norm];
    let lift = |x: f64, y: f64| f.value(x * e[0] + y * e[1]);
    points
        .iter()
        .map(|&t| {
            let planar = apply_l_planar(kernel, &lift, [t * e[0], t * e[1]], 1e-3, 64.0)?;
            let one = apply_l_quadrature(&reduced, f, t, 1e-3)?;
            let relative = (planar - one).abs() / one.abs().max(f64::MIN_POSITIVE);
            Ok(ReductionRow { t, planar, reduced: one, relative })
        })
        .collect()
}
