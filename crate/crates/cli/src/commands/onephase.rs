//! `one-phase`: minimisers of the one-phase functional on step-one fixtures,
//! with oracle, certificate, density, non-degeneracy and regularity reports,
//! the harmonic replacement identities and the min/max competitor check.

use anyhow::{bail, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use nonlocal_fb::analysis::dyadic_radii;
use nonlocal_fb::dirichlet::harmonic_replacement;
use nonlocal_fb::mesh::{Exterior, Grid, GridFunction, Region};
use nonlocal_fb::nonlocal_op::Operator;
use nonlocal_fb::onephase::{
    density_report, doubling_ladder, energy_comparison, free_boundary_points, min_max_cross, min_max_gap, min_max_identity,
    minimize_alternating, minimize_bruteforce_1d, nondegeneracy_report, optimal_regularity_report, residual_certificate, step_one_fixture,
    sweep_m, MinimizerResult, OnePhaseProblem,
};
use nonlocal_fb::KernelSpec;

use super::{execute, fmt_band, Options};
use crate::config::{self, KernelCfg, Subcommand, Tolerances};
use crate::report::{num, Report};
use crate::svg::{Plot, Series};

crate::experiment_config!(OnePhaseConfig { problem: OnePhaseBlock });

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OnePhaseBlock {
    pub fixtures: Vec<Fixture>,
    #[serde(default)]
    pub radii: RadiiCfg,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pythagorean: Option<PythagoreanCfg>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub energy_comparison: Option<EnergyComparisonCfg>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub min_max: Option<MinMaxCfg>,
}

/// Step-one problem: `Omega = (-1, 0)` in a grid over `[-1.25, 0.25]`,
/// data `1` right of the domain and `0` left of it.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Fixture {
    pub kernel: KernelCfg,
    pub nodes: usize,
    /// Free boundary constant; when absent the smallest `M` of the doubling
    /// ladder that produces a free boundary is used.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub m: Option<f64>,
    #[serde(default = "eight")]
    pub ladder: u32,
    #[serde(default)]
    pub checks: Vec<FixtureCheck>,
}

fn eight() -> u32 {
    8
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FixtureCheck {
    /// Compare with the exhaustive search over at most two contact intervals.
    Oracle,
    /// Basic properties of minimisers: `L u <= 0`, `L u = 0` where positive.
    Certificate,
    Density,
    Nondegeneracy,
    /// Growth exponent of `sup_{B_r} u` at the free boundary.
    Regularity,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RadiiCfg {
    pub r_max: f64,
    pub count: usize,
}

impl Default for RadiiCfg {
    fn default() -> Self {
        Self { r_max: 0.25, count: 5 }
    }
}

/// Random grid functions on `(-window, window)` replaced in `(-ball, ball)`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PythagoreanCfg {
    pub kernel: KernelCfg,
    #[serde(default = "twenty")]
    pub samples: usize,
    #[serde(default = "nodes121")]
    pub nodes: usize,
    #[serde(default = "window")]
    pub window: f64,
    #[serde(default = "ball")]
    pub ball: f64,
}

fn twenty() -> usize {
    20
}
fn nodes121() -> usize {
    121
}
fn window() -> f64 {
    1.5
}
fn ball() -> f64 {
    0.7
}

/// Balls centred at each free boundary point with radius `fraction` times
/// the distance to the domain boundary.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnergyComparisonCfg {
    #[serde(default = "fractions")]
    pub fractions: Vec<f64>,
}

fn fractions() -> Vec<f64> {
    vec![0.25, 0.5, 0.9]
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MinMaxCfg {
    /// Random quadruples for the pointwise lattice identity.
    #[serde(default = "ten_thousand")]
    pub quadruples: usize,
    /// Random admissible competitors per fixture.
    #[serde(default = "twenty")]
    pub competitors: usize,
}

fn ten_thousand() -> usize {
    10_000
}

struct Solved {
    label: String,
    fixture: Fixture,
    problem: OnePhaseProblem,
    result: MinimizerResult,
}

pub fn run(text: &str, opts: &Options) -> Result<bool> {
    let mut cfg: OnePhaseConfig = config::parse(text)?;
    if cfg.problem.fixtures.is_empty() {
        bail!("problem.fixtures must not be empty");
    }
    let mut kernels = Vec::new();
    for (i, f) in cfg.problem.fixtures.iter_mut().enumerate() {
        kernels.push(f.kernel.build()?);
        if f.kernel.n != 1 {
            bail!("problem.fixtures[{i}].kernel: fixtures are one dimensional");
        }
    }
    let pyth_kernel = match cfg.problem.pythagorean.as_mut() {
        Some(p) => Some(p.kernel.build()?),
        None => None,
    };
    let dir = opts.output_dir(&cfg.output, Subcommand::OnePhase);
    let tol = cfg.tolerances.clone();
    let seed = cfg.seed;
    let block = cfg.problem.clone();
    let description = cfg.description.clone();

    execute(Subcommand::OnePhase, &description, &dir, opts, &mut cfg, |rep, resolved| {
        let mut solved = Vec::new();
        for (i, (f, k)) in block.fixtures.iter().zip(&kernels).enumerate() {
            let (m, problem, result) = match f.m {
                Some(m) => {
                    let p = step_one_fixture(k, f.nodes, m)?;
                    let r = minimize_alternating(&p, &p.data)?;
                    (m, p, r)
                }
                None => sweep_m(k, f.nodes, &doubling_ladder(f.ladder))?,
            };
            resolved.problem.fixtures[i].m = Some(m);
            let mut fixture = f.clone();
            fixture.m = Some(m);
            let label = format!("fixture {i} ({:?}, {} nodes, M = {m})", k.family(), f.nodes);
            solved.push(Solved { label, fixture, problem, result });
        }
        for (i, sv) in solved.iter().enumerate() {
            fixture_report(rep, i, sv, &tol, &block.radii)?;
        }
        if let (Some(p), Some(k)) = (&block.pythagorean, &pyth_kernel) {
            pythagorean(rep, p, k, seed, &tol)?;
        }
        if let Some(e) = &block.energy_comparison {
            comparison(rep, &solved, &e.fractions)?;
        }
        if let Some(mm) = &block.min_max {
            min_max(rep, &solved, mm, seed, &tol)?;
        }
        Ok(())
    })
}

fn fixture_report(rep: &mut Report, i: usize, sv: &Solved, tol: &Tolerances, radii: &RadiiCfg) -> Result<()> {
    let (p, r, f) = (&sv.problem, &sv.result, &sv.fixture);
    let s = p.kernel.order();
    let g = p.grid();
    let tag = format!("f{i}");
    rep.note(format!("{tag}_m"), f.m);
    rep.note(format!("{tag}_energy"), r.energy);
    rep.note(format!("{tag}_contact_nodes"), r.contact.len());
    rep.csv(&format!("{tag}_solution.csv"), &["x", "u"], (0..g.len()).map(|j| vec![num(g.x(j)), num(r.u.values[j])]))?;
    rep.csv(&format!("{tag}_trace.csv"), &["sweep", "energy"], r.trace.iter().enumerate().map(|(k, e)| vec![k.to_string(), num(*e)]))?;
    rep.svg(
        &format!("{tag}_profile.svg"),
        &Plot::new(format!("minimiser, {}", sv.label), "x", "u")
            .with(Series::line("u", (0..g.len()).map(|j| (g.x(j), r.u.values[j])).collect())),
    )?;
    let fb = free_boundary_points(r, s);
    rep.note(format!("{tag}_free_boundary"), &fb);

    if f.checks.contains(&FixtureCheck::Oracle) {
        let oracle = minimize_bruteforce_1d(p)?;
        let same = oracle.exhaustive && oracle.contact == r.contact;
        rep.check(format!("{} oracle contact set", sv.label), same.to_string(), "identical, exhaustive search", same);
        let gap = (r.energy.total() - oracle.energy.total()).abs();
        rep.check(format!("{} oracle energy gap", sv.label), num(gap), format!("<= {}", tol.oracle_energy), gap <= tol.oracle_energy);
    }
    if f.checks.contains(&FixtureCheck::Certificate) {
        let c = residual_certificate(p, r)?;
        rep.note(format!("{tag}_certificate"), c);
        rep.check(
            format!("{} residual certificate", sv.label),
            format!("min u {}, max Lu {}, max |Lu| on positivity {}", num(c.min_value), num(c.max_lu), num(c.max_abs_lu_positive)),
            format!("u >= 0, both <= {}", tol.certificate),
            c.passes(tol.certificate),
        );
    }
    let needs_point = f.checks.iter().any(|c| matches!(c, FixtureCheck::Density | FixtureCheck::Nondegeneracy | FixtureCheck::Regularity));
    if !needs_point {
        return Ok(());
    }
    let Some(&x0) = fb.first() else {
        rep.check(format!("{} free boundary point", sv.label), "none", "at least one", false);
        return Ok(());
    };
    let rs = dyadic_radii(radii.r_max, radii.count);
    if f.checks.contains(&FixtureCheck::Density) {
        let d = density_report(r, x0, &rs);
        let ok = d.iter().all(|row| row.ratio > tol.density_low && row.ratio < tol.density_high);
        let vals: Vec<String> = d.iter().map(|row| format!("{:.4}", row.ratio)).collect();
        rep.check(format!("{} density ratios", sv.label), vals.join(" "), format!("in ({}, {})", tol.density_low, tol.density_high), ok);
        rep.csv(
            &format!("{tag}_density.csv"),
            &["r", "ratio", "resolved"],
            d.iter().map(|row| vec![num(row.r), num(row.ratio), row.resolved.to_string()]),
        )?;
    }
    if f.checks.contains(&FixtureCheck::Nondegeneracy) {
        let nd = nondegeneracy_report(r, x0, &rs, s);
        let lo = nd.iter().map(|q| q.1).fold(f64::INFINITY, f64::min);
        rep.check(format!("{} non-degeneracy min sup u / r^s", sv.label), format!("{lo:.4}"), "> 0", lo > 0.0);
        rep.csv(&format!("{tag}_nondegeneracy.csv"), &["r", "ratio"], nd.iter().map(|&(a, b)| vec![num(a), num(b)]))?;
    }
    if f.checks.contains(&FixtureCheck::Regularity) {
        let fit = optimal_regularity_report(r, x0, &rs)?;
        rep.note(format!("{tag}_regularity_fit"), fit);
        rep.check(
            format!("{} optimal regularity exponent", sv.label),
            format!("{:.4}", fit.exponent),
            fmt_band(s - tol.exponent, s + tol.exponent),
            fit.within(s, tol.exponent),
        );
        let samples: Vec<(f64, f64)> = rs.iter().map(|&q| (q, fit.predict(q))).collect();
        let sup: Vec<(f64, f64)> = rs.iter().map(|&q| (q, nonlocal_fb::analysis::sup_on_ball(&r.u, x0, q, |_, v| v))).collect::<Vec<_>>();
        rep.csv(
            &format!("{tag}_regularity.csv"),
            &["r", "sup_u", "fit"],
            sup.iter().zip(&samples).map(|(a, b)| vec![num(a.0), num(a.1), num(b.1)]),
        )?;
        rep.svg(
            &format!("{tag}_regularity.svg"),
            &Plot::fit("sup of u on balls at the free boundary", &sup, fit.exponent, fit.coefficient),
        )?;
    }
    Ok(())
}

fn pythagorean(rep: &mut Report, cfg: &PythagoreanCfg, k: &KernelSpec, seed: u64, tol: &Tolerances) -> Result<()> {
    let g = Grid::uniform(-cfg.window, cfg.window, cfg.nodes)?;
    let ball = Region::interval(&g, -cfg.ball, cfg.ball, false)?;
    let form = Operator::new(k, &g)?.stiffness_form(&ball)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rows = Vec::new();
    let mut worst = 0.0f64;
    for j in 0..cfg.samples {
        let vals: Vec<f64> = (0..g.len()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let u = GridFunction::new(g.clone(), vals, Exterior::zero())?;
        let v = harmonic_replacement(k, &u, &ball)?;
        let w = GridFunction::new(g.clone(), u.values.iter().zip(&v.values).map(|(a, b)| a - b).collect(), Exterior::zero())?;
        let (eu, ev, ew) = (form.energy(&u)?, form.energy(&v)?, form.energy(&w)?);
        let defect = ((eu - ev) - ew).abs() / eu.abs();
        worst = worst.max(defect);
        rows.push(vec![j.to_string(), num(eu), num(ev), num(ew), num(defect)]);
    }
    rep.check("Pythagorean identity relative defect", num(worst), format!("<= {}", tol.pythagorean), worst <= tol.pythagorean);
    rep.csv("pythagorean.csv", &["sample", "energy_u", "energy_v", "energy_u_minus_v", "relative_defect"], rows)
}

fn comparison(rep: &mut Report, solved: &[Solved], fractions: &[f64]) -> Result<()> {
    let mut rows = Vec::new();
    let mut violations = 0;
    for sv in solved {
        let (p, r) = (&sv.problem, &sv.result);
        let g = p.grid();
        let (lo, hi) = (g.x(p.omega.first().unwrap()), g.x(p.omega.last().unwrap()));
        for x0 in free_boundary_points(r, p.kernel.order()) {
            let reach = (x0 - lo).min(hi - x0);
            for &frac in fractions {
                let rad = frac * reach;
                let ball = Region::interval(g, x0 - rad, x0 + rad, false)?;
                if ball.is_empty() {
                    continue;
                }
                let (lhs, rhs) = energy_comparison(p, &r.u, &ball)?;
                if lhs > rhs {
                    violations += 1;
                }
                rows.push(vec![sv.label.replace(',', ";"), num(x0), num(rad), num(lhs), num(rhs)]);
            }
        }
    }
    let n = rows.len();
    rep.check(
        "replacement energy bounded by M |{u = 0} in B|",
        format!("{violations} violations in {n} balls"),
        "none, at least one ball",
        violations == 0 && n > 0,
    );
    rep.csv("energy_comparison.csv", &["fixture", "x0", "radius", "energy_u_minus_v", "bound"], rows)
}

fn min_max(rep: &mut Report, solved: &[Solved], cfg: &MinMaxCfg, seed: u64, tol: &Tolerances) -> Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x6d69_6e6d_6178);
    let eps = tol.min_max_identity_eps * f64::EPSILON;
    let (mut exact, mut one_sided, mut above, mut one_sided_cases) = (0.0f64, 0.0f64, 0usize, 0usize);
    for _ in 0..cfg.quadruples {
        let [a, b, c, d]: [f64; 4] = std::array::from_fn(|_| rng.gen_range(-10.0..10.0));
        let scale = (a * a + b * b + c * c + d * d).max(1.0);
        let (lhs, rhs) = min_max_identity(a, b, c, d);
        exact = exact.max((lhs - rhs).abs() / scale);
        let plain = (a - c).powi(2) + (b - d).powi(2);
        if lhs > plain * (1.0 + eps) {
            above += 1;
        }
        if min_max_cross(c, d, a, b) == 0.0 {
            one_sided_cases += 1;
            one_sided = one_sided.max((lhs - (plain - 2.0 * min_max_cross(a, b, c, d))).abs() / scale);
        }
    }
    rep.check("lattice identity relative defect", num(exact), format!("<= {eps:e}"), exact <= eps);
    rep.check(
        "one-sided identity where the mirrored term vanishes",
        format!("{} on {one_sided_cases} quadruples", num(one_sided)),
        format!("<= {eps:e}"),
        one_sided <= eps,
    );
    rep.check("lattice bound by (a - c)^2 + (b - d)^2", format!("{above} exceed"), "none", above == 0);
    let (lhs, rhs) = min_max_identity(3.0, 1.0, 0.0, 2.0);
    let plain = 10.0;
    let cross = 2.0 * min_max_cross(3.0, 1.0, 0.0, 2.0);
    rep.check(
        "worked instance (3, 1, 0, 2)",
        format!("{lhs} = {rhs} = {plain} - {cross}"),
        "2 = 10 - 8",
        lhs == 2.0 && rhs == 2.0 && cross == 8.0,
    );

    let mut rows = Vec::new();
    let mut worst = f64::INFINITY;
    for sv in solved {
        let (p, r) = (&sv.problem, &sv.result);
        let top = r.u.values.iter().cloned().fold(0.0, f64::max).max(1.0);
        for j in 0..cfg.competitors {
            // alternate far competitors with perturbations of the minimiser
            let vals: Vec<f64> = (0..r.u.len())
                .map(|i| {
                    if !p.omega.contains(i) {
                        p.data.values[i]
                    } else if j % 2 == 0 {
                        rng.gen_range(0.0..1.5 * top)
                    } else {
                        (r.u.values[i] + rng.gen_range(-0.1..0.1) * top).max(0.0)
                    }
                })
                .collect();
            let phi = GridFunction { values: vals, ..r.u.clone() };
            let gap = min_max_gap(p, &r.u, &phi)?;
            worst = worst.min(gap);
            rows.push(vec![sv.label.replace(',', ";"), j.to_string(), num(gap)]);
        }
    }
    if !rows.is_empty() {
        rep.check(
            "min/max competitors I(u ^ phi) + I(u v phi) - 2 I(u)",
            num(worst),
            format!(">= -{}", tol.competitor),
            worst >= -tol.competitor,
        );
        rep.csv("competitors.csv", &["fixture", "competitor", "gap"], rows)?;
    }
    Ok(())
}
