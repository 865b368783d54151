//! `reduce-kernel`: the one dimensional kernel seen by functions of
//! `x . e`, checked against direct planar quadrature of `f(x . e)` with
//! `f(t) = 1 / (1 + t^2)`.

use anyhow::{bail, Result};
use serde::{Deserialize, Serialize};

use nonlocal_fb::halfspace::reduction_consistency;
use nonlocal_fb::nonlocal_op::FnField;
use nonlocal_fb::KernelSpec;

use super::{execute, Options};
use crate::config::{self, KernelCfg, Subcommand, Tolerances};
use crate::report::{num, Report};

crate::experiment_config!(ReduceConfig { kernel: KernelCfg, problem: ReduceProblem });

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReduceProblem {
    #[serde(default = "diagonal")]
    pub direction: [f64; 2],
    #[serde(default = "points")]
    pub points: Vec<f64>,
    /// Expected reduction constant, checked when present.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub expected_c0: Option<f64>,
}

/// A reduction check embedded in another report.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReductionCase {
    pub kernel: KernelCfg,
    #[serde(default = "diagonal")]
    pub direction: [f64; 2],
    #[serde(default = "points")]
    pub points: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub expected_c0: Option<f64>,
}

fn diagonal() -> [f64; 2] {
    [1.0, 1.0]
}

fn points() -> Vec<f64> {
    vec![0.0, 0.3, 1.1]
}

pub fn run(text: &str, opts: &Options) -> Result<bool> {
    let mut cfg: ReduceConfig = config::parse(text)?;
    let k = cfg.kernel.build()?;
    if k.dim() != 2 {
        bail!("kernel.n: reduce-kernel takes a planar kernel");
    }
    let p = cfg.problem.clone();
    let dir = opts.output_dir(&cfg.output, Subcommand::ReduceKernel);
    let tol = cfg.tolerances.clone();
    let description = cfg.description.clone();
    execute(Subcommand::ReduceKernel, &description, &dir, opts, &mut cfg, |rep, _| {
        reduction_report(rep, "reduction", &k, p.direction, &p.points, p.expected_c0, &tol)
    })
}

/// Consistency rows in `<tag>.csv`, the constant and its check.
pub fn reduction_report(
    rep: &mut Report,
    tag: &str,
    k: &KernelSpec,
    direction: [f64; 2],
    points: &[f64],
    expected_c0: Option<f64>,
    tol: &Tolerances,
) -> Result<()> {
    if k.dim() != 2 {
        bail!("{tag}: reduction needs a planar kernel");
    }
    let label = format!("{tag} ({:?}, s = {})", k.family(), k.order());
    let (reduced, c0) = k.reduce_to_1d(&direction)?;
    rep.note(format!("{tag}_c0"), c0);
    rep.note(format!("{tag}_reduced_envelope"), (reduced.lower(), reduced.upper()));
    if let Some(e) = expected_c0 {
        let err = (c0 - e).abs();
        rep.check(
            format!("{label} constant c0"),
            format!("{c0:.10}"),
            format!("{e} +- {}", tol.reduction_constant),
            err <= tol.reduction_constant,
        );
    }
    let f = FnField { f: |t: f64| 1.0 / (1.0 + t * t), kinks: vec![], bound: 1.0, exponent: 0.0 };
    let rows = reduction_consistency(k, direction, &f, points)?;
    let worst = rows.iter().map(|r| r.relative).fold(0.0, f64::max);
    rep.check(format!("{label} planar versus reduced operator"), num(worst), format!("<= {}", tol.reduction), worst <= tol.reduction);
    rep.csv(
        &format!("{tag}.csv"),
        &["t", "planar", "reduced", "relative"],
        rows.iter().map(|r| vec![num(r.t), num(r.planar), num(r.reduced), num(r.relative)]),
    )
}
