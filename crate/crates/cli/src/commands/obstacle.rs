//! `obstacle`: the complementarity problem `min{Lu, u - phi} = 0` in a
//! symmetric window, with free boundary classification, expansion and
//! regularity reports.

use anyhow::{bail, Result};
use serde::{Deserialize, Serialize};

use nonlocal_fb::halfspace::build_halfspace_truncated_with;
use nonlocal_fb::obstacle::{
    classification_radii, classify_free_boundary_point, expansion_fit, obstacle_regularity_report, solve_obstacle, ObstacleProblem,
    PointClass,
};

use super::{execute, fmt_band, Options};
use crate::config::{self, GridCfg, KernelCfg, Subcommand};
use crate::report::num;
use crate::svg::{Plot, Series};

crate::experiment_config!(ObstacleConfig { kernel: KernelCfg, grid: GridCfg, problem: ObstacleBlock });

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObstacleBlock {
    #[serde(default)]
    pub obstacle: Shape,
    /// Classify every free boundary point.
    #[serde(default)]
    pub classify: bool,
    /// Number of radii in the `sqrt 2` ladder from `4h`.
    #[serde(default = "six")]
    pub radii: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub expansion: Option<ExpansionCfg>,
    /// Hölder fit of `u'`.
    #[serde(default)]
    pub regularity: bool,
}

fn six() -> usize {
    6
}

/// `height (1 - (x / width)^2)_+^2`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, tag = "shape", rename_all = "kebab-case")]
pub enum Shape {
    Bump {
        #[serde(default = "unit")]
        height: f64,
        #[serde(default = "half")]
        width: f64,
    },
}

impl Default for Shape {
    fn default() -> Self {
        Shape::Bump { height: 1.0, width: 0.5 }
    }
}

fn unit() -> f64 {
    1.0
}
fn half() -> f64 {
    0.5
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExpansionCfg {
    /// Window of the truncated half-space construction.
    #[serde(default = "four")]
    pub truncation: f64,
    /// Resolution of the half-space profile; defaults to the solution grid.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nodes_per_unit: Option<usize>,
}

fn four() -> f64 {
    4.0
}

pub fn run(text: &str, opts: &Options) -> Result<bool> {
    let mut cfg: ObstacleConfig = config::parse(text)?;
    let kernel = cfg.kernel.build()?;
    let GridCfg { min, max, nodes } = cfg.grid.clone();
    if (min + max).abs() > 1e-12 * max.abs() {
        bail!("grid: the obstacle window must be symmetric, got ({min}, {max})");
    }
    let Shape::Bump { height, width } = cfg.problem.obstacle.clone();
    if width.is_nan() || width <= 0.0 {
        bail!("problem.obstacle.width must be positive");
    }
    let problem = ObstacleProblem::from_fn(kernel.clone(), max, nodes, |x| height * (1.0 - (x / width).powi(2)).max(0.0).powi(2))?;
    let h = problem.phi.grid.spacing();
    if let Some(e) = cfg.problem.expansion.as_mut() {
        e.nodes_per_unit.get_or_insert((1.0 / h).round() as usize);
    }
    let block = cfg.problem.clone();
    let dir = opts.output_dir(&cfg.output, Subcommand::Obstacle);
    let tol = cfg.tolerances.clone();
    let s = kernel.order();
    let description = cfg.description.clone();

    execute(Subcommand::Obstacle, &description, &dir, opts, &mut cfg, |rep, _| {
        let r = solve_obstacle(&problem)?;
        let g = &r.u.grid;
        rep.note("method", format!("{:?}", r.method));
        rep.note("iterations", r.iterations);
        rep.note("min_lu", r.min_lu());
        rep.check("complementarity residual", num(r.residual), format!("<= {}", tol.complementarity), r.residual <= tol.complementarity);
        rep.check("u >= phi", num(r.min_gap()), ">= 0", r.min_gap() >= 0.0);
        rep.check("symmetry max |u(x) - u(-x)|", num(r.asymmetry()), format!("<= {}", tol.symmetry), r.asymmetry() <= tol.symmetry);
        rep.csv(
            "solution.csv",
            &["x", "u", "phi", "Lu"],
            (0..g.len()).map(|j| vec![num(g.x(j)), num(r.u.values[j]), num(r.phi.values[j]), num(r.lu[j])]),
        )?;
        rep.csv("contact.csv", &["index", "x"], r.contact.indices().into_iter().map(|j| vec![j.to_string(), num(g.x(j))]))?;
        let near: Vec<usize> = (0..g.len()).filter(|&j| g.x(j).abs() <= 2.0 * width).collect();
        rep.svg(
            "profile.svg",
            &Plot::new("obstacle problem", "x", "u")
                .with(Series::line("u", near.iter().map(|&j| (g.x(j), r.u.values[j])).collect()))
                .with(Series::line("phi", near.iter().map(|&j| (g.x(j), r.phi.values[j])).collect())),
        )?;
        rep.note("free_boundary", r.free_boundary.iter().map(|p| p.x).collect::<Vec<_>>());
        if (block.classify || block.expansion.is_some()) && r.free_boundary.is_empty() {
            rep.check("free boundary points", "none", "at least one", false);
        }

        let radii = classification_radii(h, block.radii);
        if block.classify {
            let mut rows = Vec::new();
            let mut plot = Plot::new("sup of u - phi on balls at the free boundary", "r", "sup").log_log();
            for p in &r.free_boundary {
                let (class, fit) = classify_free_boundary_point(&r, p.x, &radii)?;
                let ok = class == PointClass::Regular && fit.within(1.0 + s, tol.class_band);
                rep.check(
                    format!("free boundary point {:+.5} regular", p.x),
                    format!("{class:?}, exponent {:.4}", fit.exponent),
                    format!("regular, {}", fmt_band(1.0 + s - tol.class_band, 1.0 + s + tol.class_band)),
                    ok,
                );
                rows.push(vec![
                    num(p.x),
                    num(p.orientation),
                    format!("{class:?}").to_lowercase(),
                    num(fit.exponent),
                    num(fit.coefficient),
                    num(fit.r_squared),
                ]);
                plot = plot.with(Series::line(
                    format!("fit at {:+.4}, exponent {:.3}", p.x, fit.exponent),
                    radii.iter().map(|&q| (q, fit.predict(q))).collect(),
                ));
            }
            rep.csv("classification.csv", &["x0", "orientation", "class", "exponent", "coefficient", "r_squared"], rows)?;
            rep.svg("classification.svg", &plot)?;
        }

        if let Some(e) = &block.expansion {
            let npu = e.nodes_per_unit.unwrap_or((1.0 / h).round() as usize);
            let b = build_halfspace_truncated_with(&kernel, e.truncation, npu)?;
            let mut rows = Vec::new();
            let mut rem_rows = Vec::new();
            let floor = 1.0 + s + tol.expansion_margin;
            for p in &r.free_boundary {
                let ex = expansion_fit(&r, p, &b, &radii)?;
                rep.check(
                    format!("expansion at {:+.5}", p.x),
                    format!("c {:.4}, remainder exponent {:.4}{}", ex.c, ex.exponent, if ex.saturated { " (saturated)" } else { "" }),
                    format!("c > 0, exponent > {floor}"),
                    ex.c > 0.0 && ex.exponent > floor,
                );
                rows.push(vec![num(p.x), num(ex.c), num(ex.exponent), ex.saturated.to_string()]);
                rem_rows.extend(ex.remainder.iter().map(|&(q, v)| vec![num(p.x), num(q), num(v)]));
            }
            rep.csv("expansion.csv", &["x0", "c", "remainder_exponent", "saturated"], rows)?;
            rep.csv("expansion_remainder.csv", &["x0", "r", "remainder"], rem_rows)?;
        }

        if block.regularity {
            let reg = obstacle_regularity_report(&r)?;
            rep.note("holder_fit", reg.holder);
            let floor = s - tol.holder_margin;
            rep.check(
                "Hölder exponent of u'",
                format!("{:.4}{}", reg.alpha, if reg.saturated { " (saturated)" } else { "" }),
                format!(">= {floor}"),
                reg.alpha >= floor,
            );
            rep.csv(
                "second_differences.csv",
                &["x0", "exponent", "coefficient", "r_squared"],
                reg.second_differences.iter().map(|(x0, f)| vec![num(*x0), num(f.exponent), num(f.coefficient), num(f.r_squared)]),
            )?;
        }
        Ok(())
    })
}
