//! `solve-dirichlet`: `L u = f` in an interval, `u = g` outside, with
//! optional closed-form comparison, boundary expansion and Hopf bound.

use anyhow::{bail, Result};
use serde::{Deserialize, Serialize};

use nonlocal_fb::dirichlet::{boundary_distance, boundary_expansion, hopf_check, solve_dirichlet, torsion_profile};
use nonlocal_fb::halfspace::build_halfspace_truncated_with;
use nonlocal_fb::mesh::{Exterior, GridFunction, Region};
use nonlocal_fb::KernelFamily;

use super::{execute, Options};
use crate::config::{self, GridCfg, KernelCfg, Subcommand};
use crate::report::num;
use crate::svg::{Plot, Series};

crate::experiment_config!(DirichletConfig { kernel: KernelCfg, grid: GridCfg, problem: DirichletProblem });

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DirichletProblem {
    /// The interval `Omega = (a, b)`.
    pub domain: [f64; 2],
    /// Constant source `f`.
    #[serde(default = "unit")]
    pub source: f64,
    /// Constant data `g` outside the domain.
    #[serde(default)]
    pub data: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reference: Option<Reference>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub expansion: Option<ExpansionCfg>,
    /// Report the lower bound `u >= c d^s` over distance bands.
    #[serde(default)]
    pub hopf: bool,
}

fn unit() -> f64 {
    1.0
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Reference {
    /// `f c_s ((x - a)(b - x))^s`, exact for the fractional Laplacian.
    Torsion,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq, Eq, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Side {
    #[default]
    Left,
    Right,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExpansionCfg {
    /// Boundary point of the expansion.
    #[serde(default)]
    pub side: Side,
    /// Radii `4h 2^j` for `j < radii`.
    #[serde(default = "six")]
    pub radii: usize,
    /// Window of the truncated half-space construction.
    #[serde(default = "four")]
    pub truncation: f64,
    /// Resolution of the half-space profile; defaults to the solution grid.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nodes_per_unit: Option<usize>,
}

fn six() -> usize {
    6
}

fn four() -> f64 {
    4.0
}

pub fn run(text: &str, opts: &Options) -> Result<bool> {
    let mut cfg: DirichletConfig = config::parse(text)?;
    let kernel = cfg.kernel.build()?;
    let grid = cfg.grid.build()?;
    let p = cfg.problem.clone();
    let [a, b] = p.domain;
    let omega = Region::interval(&grid, a, b, false)?;
    if omega.is_empty() {
        bail!("problem.domain ({a}, {b}) contains no grid node");
    }
    let reference = match p.reference {
        Some(Reference::Torsion) => {
            if kernel.family() != KernelFamily::FractionalLaplacian || kernel.dim() != 1 || p.data != 0.0 {
                bail!("problem.reference = torsion needs the one dimensional fractional Laplacian and zero data");
            }
            Some(torsion_profile(kernel.order(), a, b, p.source)?)
        }
        None => None,
    };
    let h = grid.spacing();
    if let Some(e) = cfg.problem.expansion.as_mut() {
        e.nodes_per_unit.get_or_insert((1.0 / h).round() as usize);
    }
    let dir = opts.output_dir(&cfg.output, Subcommand::SolveDirichlet);
    let tol = cfg.tolerances.clone();
    let s = kernel.order();

    let description = cfg.description.clone();
    execute(Subcommand::SolveDirichlet, &description, &dir, opts, &mut cfg, |rep, _| {
        let f = GridFunction::from_fn(grid.clone(), Exterior::zero(), |_| p.source)?;
        let g = GridFunction::from_fn(grid.clone(), Exterior::constant(p.data), |_| p.data)?;
        let u = solve_dirichlet(&kernel, &omega, &f, &g)?;
        let centre = 0.5 * (a + b);
        rep.note("u_centre", u.value_at(centre));

        let xs: Vec<f64> = (0..grid.len()).map(|i| grid.x(i)).collect();
        if let Some(r) = &reference {
            let layer = tol.reference_layer_cells * h;
            let err = boundary_distance(&u, &omega)?
                .into_iter()
                .filter(|&(_, d)| d > layer)
                .map(|(i, _)| (u.values[i] - r(grid.x(i))).abs())
                .fold(0.0, f64::max);
            rep.check("reference max error", num(err), format!("<= {}", tol.reference_max_error), err <= tol.reference_max_error);
            let ce = (u.value_at(centre) - r(centre)).abs();
            rep.check("reference centre error", num(ce), format!("<= {}", tol.reference_centre), ce <= tol.reference_centre);
            rep.csv("solution.csv", &["x", "u", "reference"], xs.iter().zip(&u.values).map(|(&x, &v)| vec![num(x), num(v), num(r(x))]))?;
            let plot = Plot::new("solution", "x", "u")
                .with(Series::line("u", xs.iter().copied().zip(u.values.iter().copied()).collect()))
                .with(Series::line("closed form", xs.iter().map(|&x| (x, r(x))).collect()));
            rep.svg("profile.svg", &plot)?;
        } else {
            rep.csv("solution.csv", &["x", "u"], xs.iter().zip(&u.values).map(|(&x, &v)| vec![num(x), num(v)]))?;
            rep.svg(
                "profile.svg",
                &Plot::new("solution", "x", "u").with(Series::line("u", xs.iter().copied().zip(u.values.iter().copied()).collect())),
            )?;
        }

        if let Some(e) = &p.expansion {
            let npu = e.nodes_per_unit.unwrap_or((1.0 / h).round() as usize);
            let hs = build_halfspace_truncated_with(&kernel, e.truncation, npu)?;
            let (z, sign) = if e.side == Side::Left { (a, 1.0) } else { (b, -1.0) };
            let barrier = GridFunction::from_fn(grid.clone(), Exterior::zero(), |x| hs.value(sign * (x - z)))?;
            let radii: Vec<f64> = (0..e.radii).map(|j| 4.0 * h * 2f64.powi(j as i32)).collect();
            let ex = boundary_expansion(&u, &barrier, &omega, z, &radii)?;
            rep.note("expansion_q", ex.q);
            rep.note("expansion_fit", ex.fit);
            let t = tol.boundary_expansion_exponent;
            rep.check("boundary expansion remainder exponent", format!("{:.4}", ex.fit.exponent), format!(">= {t}"), ex.fit.exponent >= t);
            rep.csv("expansion.csv", &["r", "remainder"], ex.remainder.iter().map(|&(r, v)| vec![num(r), num(v)]))?;
            rep.svg("expansion.svg", &Plot::fit("remainder of u - q b", &ex.remainder, ex.fit.exponent, ex.fit.coefficient))?;
        }

        if p.hopf {
            let hopf = hopf_check(&u, &omega, s)?;
            rep.note("hopf_fit", hopf.fit);
            rep.check("Hopf coefficient", num(hopf.coefficient), "> 0", hopf.coefficient > 0.0);
            rep.csv("hopf.csv", &["band_lower", "min_ratio"], hopf.bands.iter().map(|&(d, q)| vec![num(d), num(q)]))?;
        }
        Ok(())
    })
}
