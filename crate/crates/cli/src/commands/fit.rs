//! `fit-exponent`: log-log fit of `(r, value)` samples, given inline or as
//! a two column CSV.

use std::path::Path;

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};

use nonlocal_fb::analysis::fit_growth;

use super::{execute, fmt_band, Options};
use crate::config::{self, Subcommand};
use crate::report::num;
use crate::svg::Plot;

crate::experiment_config!(FitConfig { problem: FitBlock });

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitBlock {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub samples: Option<Vec<[f64; 2]>>,
    /// CSV with a header and columns `r,value`, relative to the config.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub csv: Option<String>,
    /// Expected exponent, checked when present.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target: Option<f64>,
}

fn read_samples(path: &Path) -> Result<Vec<(f64, f64)>> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading samples {}", path.display()))?;
    let mut out = Vec::new();
    for (ln, line) in text.lines().enumerate().skip(1) {
        if line.trim().is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.split(',').map(str::trim).collect();
        if cols.len() != 2 {
            bail!("{}:{}: expected two columns", path.display(), ln + 1);
        }
        let r: f64 = cols[0].parse().with_context(|| format!("{}:{}: r", path.display(), ln + 1))?;
        let v: f64 = cols[1].parse().with_context(|| format!("{}:{}: value", path.display(), ln + 1))?;
        out.push((r, v));
    }
    Ok(out)
}

pub fn run(text: &str, opts: &Options) -> Result<bool> {
    let mut cfg: FitConfig = config::parse(text)?;
    let block = cfg.problem.clone();
    let samples: Vec<(f64, f64)> = match (&block.samples, &block.csv) {
        (Some(s), None) => s.iter().map(|p| (p[0], p[1])).collect(),
        (None, Some(p)) => read_samples(&opts.base.join(p))?,
        _ => bail!("problem: give exactly one of `samples` and `csv`"),
    };
    let fit = fit_growth(&samples)?;
    let dir = opts.output_dir(&cfg.output, Subcommand::FitExponent);
    let tol = cfg.tolerances.clone();
    let description = cfg.description.clone();

    execute(Subcommand::FitExponent, &description, &dir, opts, &mut cfg, |rep, _| {
        rep.note("fit", fit);
        if let Some(t) = block.target {
            rep.check(
                "fitted exponent",
                format!("{:.6}", fit.exponent),
                fmt_band(t - tol.fit_exponent, t + tol.fit_exponent),
                fit.within(t, tol.fit_exponent),
            );
        }
        rep.csv("fit.csv", &["r", "value", "fit"], samples.iter().map(|&(r, v)| vec![num(r), num(v), num(fit.predict(r))]))?;
        rep.svg("fit.svg", &Plot::fit("log-log fit", &samples, fit.exponent, fit.coefficient))
    })
}
