//! Run artifacts: CSV tables, SVG plots, pass predicates and the manifest.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Duration;

use anyhow::{Context, Result};
use serde::Serialize;
use serde_json::Value;

use crate::svg::Plot;

/// One pass predicate.
#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: String,
    pub value: String,
    pub threshold: String,
    pub pass: bool,
}

pub struct Report {
    dir: PathBuf,
    quiet: bool,
    checks: Vec<Check>,
    outputs: Vec<String>,
    summary: serde_json::Map<String, Value>,
}

/// `{:e}` keeps full round-trip precision and is stable across runs.
pub fn num(v: f64) -> String {
    format!("{v:e}")
}

impl Report {
    pub fn new(dir: &Path, quiet: bool) -> Result<Self> {
        fs::create_dir_all(dir).with_context(|| format!("creating output directory {}", dir.display()))?;
        Ok(Self { dir: dir.to_path_buf(), quiet, checks: Vec::new(), outputs: Vec::new(), summary: Default::default() })
    }

    /// Records a predicate and echoes it unless quiet.
    pub fn check(&mut self, name: impl Into<String>, value: impl Into<String>, threshold: impl Into<String>, pass: bool) -> bool {
        let c = Check { name: name.into(), value: value.into(), threshold: threshold.into(), pass };
        if !self.quiet {
            println!("{} {}: {} ({})", if pass { "PASS" } else { "FAIL" }, c.name, c.value, c.threshold);
        }
        self.checks.push(c);
        pass
    }

    /// Scalar results shown in the manifest summary.
    pub fn note(&mut self, key: impl Into<String>, value: impl Serialize) {
        self.summary.insert(key.into(), serde_json::to_value(value).unwrap_or(Value::Null));
    }

    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn csv(&mut self, name: &str, header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<()> {
        let mut out = header.join(",");
        out.push('\n');
        for row in rows {
            debug_assert_eq!(row.len(), header.len());
            out.push_str(&row.join(","));
            out.push('\n');
        }
        self.write(name, &out)
    }

    pub fn svg(&mut self, name: &str, plot: &Plot) -> Result<()> {
        self.write(name, &plot.render())
    }

    fn write(&mut self, name: &str, text: &str) -> Result<()> {
        let path = self.dir.join(name);
        fs::write(&path, text).with_context(|| format!("writing {}", path.display()))?;
        self.outputs.push(name.to_string());
        Ok(())
    }

    /// Writes `manifest.json` and returns whether every check passed.
    pub fn finish(mut self, subcommand: &str, description: &str, config: Value, wall: Duration) -> Result<bool> {
        let pass = self.passed();
        let manifest = serde_json::json!({
            "subcommand": subcommand,
            "description": description,
            "library_version": nonlocal_fb::VERSION,
            "runner_version": env!("CARGO_PKG_VERSION"),
            "config": config,
            "wall_time_seconds": wall.as_secs_f64(),
            "status": if pass { "pass" } else { "fail" },
            "checks": self.checks,
            "summary": self.summary,
            "outputs": self.outputs,
        });
        let text = serde_json::to_string_pretty(&manifest)?;
        self.outputs.push("manifest.json".into());
        fs::write(self.dir.join("manifest.json"), text + "\n")?;
        if !self.quiet {
            let failed = self.checks.iter().filter(|c| !c.pass).count();
            let mut line = String::new();
            let _ = write!(line, "{subcommand}: {} checks, {failed} failed, {:.2} s", self.checks.len(), wall.as_secs_f64());
            println!("{line}");
        }
        Ok(pass)
    }
}
