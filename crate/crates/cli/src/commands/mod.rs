//! One module per subcommand.  Each parses its typed config, builds every
//! input before touching the output directory, then writes its artifacts.

pub mod beta0;
pub mod dirichlet;
pub mod fit;
pub mod halfspace;
pub mod obstacle;
pub mod onephase;
pub mod reduce;

use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::Result;
use serde::Serialize;

use crate::config::Subcommand;
use crate::report::Report;

/// Command line options that apply to every subcommand.
#[derive(Debug, Clone)]
pub struct Options {
    pub out: Option<PathBuf>,
    pub quiet: bool,
    /// Directory of the config file; relative input paths resolve here.
    pub base: PathBuf,
}

impl Options {
    pub fn output_dir(&self, configured: &Option<String>, sub: Subcommand) -> PathBuf {
        match (&self.out, configured) {
            (Some(p), _) => p.clone(),
            (None, Some(p)) => PathBuf::from(p),
            (None, None) => Path::new("out").join(sub.name()),
        }
    }
}

/// Opens the report, runs `body` and writes the manifest with `config`,
/// as left by `body`, as the resolved configuration.
pub fn execute<C: Serialize>(
    sub: Subcommand,
    description: &str,
    dir: &Path,
    opts: &Options,
    config: &mut C,
    body: impl FnOnce(&mut Report, &mut C) -> Result<()>,
) -> Result<bool> {
    let t = Instant::now();
    let mut report = Report::new(dir, opts.quiet)?;
    body(&mut report, config)?;
    let resolved = serde_json::to_value(&*config)?;
    report.finish(sub.name(), description, resolved, t.elapsed())
}

pub fn run(sub: Subcommand, text: &str, opts: &Options) -> Result<bool> {
    match sub {
        Subcommand::SolveDirichlet => dirichlet::run(text, opts),
        Subcommand::OnePhase => onephase::run(text, opts),
        Subcommand::HalfSpace => halfspace::run(text, opts),
        Subcommand::Obstacle => obstacle::run(text, opts),
        Subcommand::Beta0 => beta0::run(text, opts),
        Subcommand::FitExponent => fit::run(text, opts),
        Subcommand::ReduceKernel => reduce::run(text, opts),
    }
}

pub(crate) fn fmt_band(lo: f64, hi: f64) -> String {
    format!("in [{lo}, {hi}]")
}
