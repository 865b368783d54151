//! `beta0`: the exponent annihilated by the extremal operator for each
//! envelope and order.

use anyhow::{bail, Result};
use serde::{Deserialize, Serialize};

use nonlocal_fb::nonlocal_op::beta0;

use super::{execute, fmt_band, Options};
use crate::config::{self, Subcommand};
use crate::report::num;
use crate::svg::{Plot, Series};

crate::experiment_config!(Beta0Config { problem: Beta0Block });

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Beta0Block {
    /// `[lambda, Lambda]` pairs.
    pub envelopes: Vec<[f64; 2]>,
    pub orders: Vec<f64>,
}

pub fn run(text: &str, opts: &Options) -> Result<bool> {
    let mut cfg: Beta0Config = config::parse(text)?;
    let block = cfg.problem.clone();
    if block.envelopes.is_empty() || block.orders.is_empty() {
        bail!("problem.envelopes and problem.orders must not be empty");
    }
    for &[l, c] in &block.envelopes {
        if !(l > 0.0 && c >= l && c.is_finite()) {
            bail!("problem.envelopes: need 0 < lambda <= Lambda, got [{l}, {c}]");
        }
    }
    let dir = opts.output_dir(&cfg.output, Subcommand::Beta0);
    let tol = cfg.tolerances.clone();
    let description = cfg.description.clone();

    execute(Subcommand::Beta0, &description, &dir, opts, &mut cfg, |rep, _| {
        let mut rows = Vec::new();
        let mut plot = Plot::new("critical exponent", "s", "beta_0");
        for &[lambda, cap] in &block.envelopes {
            let mut line = Vec::new();
            for &s in &block.orders {
                let b = beta0(lambda, cap, s, tol.beta0_bisection, tol.beta0_margin)?;
                let name = format!("beta_0(lambda {lambda}, Lambda {cap}, s {s})");
                if lambda == cap {
                    rep.check(
                        name,
                        format!("{:.6}", b.beta0),
                        format!("{s} +- {}", tol.beta0_tight),
                        (b.beta0 - s).abs() <= tol.beta0_tight,
                    );
                } else {
                    let lo = (2.0 * s - 1.0).max(0.0) + tol.beta0_margin;
                    let hi = (2.0 * s).min(1.0) - tol.beta0_margin;
                    let ok = b.beta0 > lo && b.beta0 < hi && b.beta0 <= s;
                    rep.check(name, format!("{:.6}", b.beta0), format!("{}, <= s", fmt_band(lo, hi)), ok);
                }
                rows.push(vec![num(lambda), num(cap), num(s), num(b.beta0), num(b.bracket.0), num(b.bracket.1), b.iterations.to_string()]);
                line.push((s, b.beta0));
            }
            plot = plot.with(Series::line(format!("lambda {lambda}, Lambda {cap}"), line));
        }
        rep.csv("beta0.csv", &["lambda", "Lambda", "s", "beta0", "bracket_lo", "bracket_hi", "iterations"], rows)?;
        rep.svg("beta0.svg", &plot)
    })
}
