//! `half-space`: the half-line solution `b` by the blow-up pipeline and/or
//! the truncated fixed point, its growth and derivative reports, and the
//! exact-profile and dimensional-reduction consistency checks.

use anyhow::{bail, Result};
use serde::{Deserialize, Serialize};

use nonlocal_fb::halfspace::{
    build_halfspace_pipeline, build_halfspace_truncated, build_halfspace_truncated_with, derivative_bounds_report,
    quotient_oscillation_probe, HalfSpaceSolution,
};
use nonlocal_fb::nonlocal_op::{apply_l_quadrature, FnField};
use nonlocal_fb::{KernelFamily, KernelSpec};

use super::reduce::{reduction_report, ReductionCase};
use super::{execute, fmt_band, Options};
use crate::config::{self, KernelCfg, Subcommand, Tolerances};
use crate::report::{num, Report};
use crate::svg::{Plot, Series};

crate::experiment_config!(HalfSpaceConfig { kernel: KernelCfg, problem: HalfSpaceBlock });

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Route {
    #[default]
    Pipeline,
    Truncated,
    Both,
    /// Skip the construction (profile residual or reduction checks only).
    None,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HalfSpaceBlock {
    #[serde(default)]
    pub route: Route,
    /// Window `(0, R)` of the truncated route.
    #[serde(default = "eight")]
    pub truncation_radius: f64,
    /// Resolution of the truncated route (library default when absent).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nodes_per_unit: Option<usize>,
    /// Compare with `x^s` on `[0, 1]` (fractional Laplacian only).
    #[serde(default)]
    pub reference: bool,
    /// Decades of dyadic radii for the growth fit.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub growth_decades: Option<f64>,
    /// Check `b' >= 0` and `0 < c1 <= c2 < inf` for `b'(x) x^{1-s}`.
    #[serde(default)]
    pub derivative_bounds: bool,
    /// Decades for the (exploratory) oscillation of `b(r)/r^s`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub quotient_decades: Option<f64>,
    /// Further kernels run through the same battery.
    #[serde(default)]
    pub also: Vec<KernelCfg>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub profile_residual: Option<ProfileResidualCfg>,
    #[serde(default)]
    pub reduction: Vec<ReductionCase>,
}

fn eight() -> f64 {
    8.0
}

/// `L x_+^s` for the fractional Laplacian of each order, at `points`
/// equispaced midpoints of `range`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProfileResidualCfg {
    pub orders: Vec<f64>,
    #[serde(default = "twenty")]
    pub points: usize,
    #[serde(default = "range")]
    pub range: [f64; 2],
    /// Principal value cutoff relative to the evaluation point.
    #[serde(default = "cutoff")]
    pub cutoff: f64,
}

fn twenty() -> usize {
    20
}
fn range() -> [f64; 2] {
    [0.1, 4.0]
}
fn cutoff() -> f64 {
    1e-3
}

pub fn run(text: &str, opts: &Options) -> Result<bool> {
    let mut cfg: HalfSpaceConfig = config::parse(text)?;
    let mut kernels = vec![cfg.kernel.build()?];
    for k in cfg.problem.also.iter_mut() {
        kernels.push(k.build()?);
    }
    let mut reduction_kernels = Vec::new();
    for case in cfg.problem.reduction.iter_mut() {
        reduction_kernels.push(case.kernel.build()?);
    }
    let block = cfg.problem.clone();
    if block.route == Route::None
        && (block.reference || block.growth_decades.is_some() || block.derivative_bounds || block.quotient_decades.is_some())
    {
        bail!("problem.route = none leaves nothing for the profile checks");
    }
    if block.reference && kernels.iter().all(|k| k.family() != KernelFamily::FractionalLaplacian) {
        bail!("problem.reference needs a fractional Laplacian kernel");
    }
    for k in &kernels {
        if k.dim() != 1 && block.route != Route::None {
            bail!("half-space profiles are one dimensional; reduce planar kernels first");
        }
    }
    let dir = opts.output_dir(&cfg.output, Subcommand::HalfSpace);
    let tol = cfg.tolerances.clone();
    let description = cfg.description.clone();

    execute(Subcommand::HalfSpace, &description, &dir, opts, &mut cfg, |rep, _| {
        if block.route != Route::None {
            for (i, k) in kernels.iter().enumerate() {
                profile_report(rep, i, k, &block, &tol)?;
            }
        }
        if let Some(pr) = &block.profile_residual {
            profile_residual(rep, pr, &tol)?;
        }
        for (i, (case, k)) in block.reduction.iter().zip(&reduction_kernels).enumerate() {
            reduction_report(rep, &format!("r{i}"), k, case.direction, &case.points, case.expected_c0, &tol)?;
        }
        Ok(())
    })
}

fn build_truncated(k: &KernelSpec, block: &HalfSpaceBlock) -> Result<HalfSpaceSolution> {
    Ok(match block.nodes_per_unit {
        Some(n) => build_halfspace_truncated_with(k, block.truncation_radius, n)?,
        None => build_halfspace_truncated(k, block.truncation_radius)?,
    })
}

fn profile_csv(rep: &mut Report, name: &str, b: &HalfSpaceSolution) -> Result<()> {
    let g = &b.profile.grid;
    let rows = (0..g.len()).filter(|&j| g.x(j) >= 0.0).map(|j| vec![num(g.x(j)), num(b.profile.values[j])]);
    rep.csv(name, &["x", "b"], rows)
}

fn profile_report(rep: &mut Report, i: usize, k: &KernelSpec, block: &HalfSpaceBlock, tol: &Tolerances) -> Result<()> {
    let s = k.order();
    let label = format!("kernel {i} ({:?}, s = {s})", k.family());
    let tag = format!("k{i}");
    let (primary, second) = match block.route {
        Route::Pipeline => (build_halfspace_pipeline(k)?, None),
        Route::Truncated => (build_truncated(k, block)?, None),
        Route::Both => (build_halfspace_pipeline(k)?, Some(build_truncated(k, block)?)),
        Route::None => unreachable!(),
    };
    rep.note(format!("{tag}_provenance"), primary.provenance);
    rep.note(format!("{tag}_c1_c2"), (primary.c1, primary.c2));
    rep.note(format!("{tag}_levels"), &primary.levels);
    profile_csv(rep, &format!("{tag}_profile.csv"), &primary)?;

    let g = &primary.profile.grid;
    let unit: Vec<(f64, f64)> = (0..g.len()).map(|j| (g.x(j), primary.profile.values[j])).filter(|p| p.0 >= 0.0 && p.0 <= 2.0).collect();
    let mut plot = Plot::new(format!("half-space solution, {label}"), "x", "b").with(Series::line("b", unit.clone()));
    if block.reference && k.family() == KernelFamily::FractionalLaplacian {
        let d = primary.distance_on_unit(&|x| x.max(0.0).powf(s));
        rep.check(format!("{label} sup |b - x^s| on [0, 1]"), num(d), format!("<= {}", tol.reference_profile), d <= tol.reference_profile);
        plot = plot.with(Series::line("x^s", unit.iter().map(|p| (p.0, p.0.powf(s))).collect()));
    }
    if let Some(t) = &second {
        profile_csv(rep, &format!("{tag}_truncated.csv"), t)?;
        let d = t.distance_on_unit(&|x| primary.value(x));
        rep.check(format!("{label} routes agree on [0, 1]"), num(d), format!("<= {}", tol.route_agreement), d <= tol.route_agreement);
        let tg = &t.profile.grid;
        plot = plot.with(Series::line(
            "truncated route",
            (0..tg.len()).map(|j| (tg.x(j), t.profile.values[j])).filter(|p| p.0 >= 0.0 && p.0 <= 2.0).collect(),
        ));
    }
    rep.svg(&format!("{tag}_profile.svg"), &plot)?;

    if let Some(dec) = block.growth_decades {
        let fit = primary.growth_fit(dec)?;
        rep.note(format!("{tag}_growth_fit"), fit);
        rep.check(
            format!("{label} growth exponent"),
            format!("{:.4}", fit.exponent),
            fmt_band(s - tol.exponent, s + tol.exponent),
            fit.within(s, tol.exponent),
        );
        let lo = fit.r_min.log2().round() as i32;
        let hi = fit.r_max.log2().round() as i32;
        let samples: Vec<(f64, f64)> = (lo..=hi).map(|j| 2f64.powi(j)).map(|r| (r, primary.value(r))).collect();
        rep.svg(&format!("{tag}_growth.svg"), &Plot::fit(format!("growth of b, {label}"), &samples, fit.exponent, fit.coefficient))?;
    }
    if block.derivative_bounds {
        let d = derivative_bounds_report(&primary);
        rep.note(format!("{tag}_derivative_bounds"), d);
        rep.check(
            format!("{label} derivative bounds"),
            format!("min slope {:.4}, c1 {:.4}, c2 {:.4}", d.min_slope, d.c1, d.c2),
            "b' >= 0, 0 < c1 <= c2 < inf",
            d.passes(),
        );
    }
    if let Some(dec) = block.quotient_decades {
        let q = quotient_oscillation_probe(&primary, dec)?;
        rep.note(format!("{tag}_quotient_amplitude"), q.amplitude);
        rep.csv(&format!("{tag}_quotient.csv"), &["r", "b_over_r_s"], q.samples.iter().map(|&(r, v)| vec![num(r), num(v)]))?;
    }
    Ok(())
}

fn profile_residual(rep: &mut Report, cfg: &ProfileResidualCfg, tol: &Tolerances) -> Result<()> {
    let [lo, hi] = cfg.range;
    if !(lo > 0.0 && hi > lo) || cfg.points == 0 {
        bail!("problem.profile_residual: need 0 < range[0] < range[1] and at least one point");
    }
    let mut rows = Vec::new();
    let mut worst = 0.0f64;
    for &s in &cfg.orders {
        let k = KernelSpec::fractional_laplacian(1, s)?;
        let u = FnField { f: move |x: f64| x.max(0.0).powf(s), kinks: vec![0.0], bound: 1.0, exponent: s };
        for j in 0..cfg.points {
            let x = lo + (hi - lo) * (j as f64 + 0.5) / cfg.points as f64;
            let lu = apply_l_quadrature(&k, &u, x, cfg.cutoff * x)?;
            let scaled = lu.abs() * x.powf(s);
            worst = worst.max(scaled);
            rows.push(vec![num(s), num(x), num(lu), num(scaled)]);
        }
    }
    rep.check(
        format!("|L x_+^s| x^s over {} orders", cfg.orders.len()),
        num(worst),
        format!("<= {}", tol.profile_residual),
        worst <= tol.profile_residual,
    );
    rep.csv("profile_residual.csv", &["s", "x", "Lu", "scaled"], rows)
}
