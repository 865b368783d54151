//! Declarative experiment configs.  One JSON file per run; every block
//! rejects unknown keys and the resolved form (defaults filled in) is
//! written to the manifest.

use std::f64::consts::{LN_2, PI};
use std::path::Path;

use anyhow::{anyhow, bail, Context, Result};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use nonlocal_fb::mesh::Grid;
use nonlocal_fb::KernelSpec;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Subcommand {
    SolveDirichlet,
    OnePhase,
    HalfSpace,
    Obstacle,
    Beta0,
    FitExponent,
    ReduceKernel,
}

impl Subcommand {
    pub fn name(self) -> &'static str {
        match self {
            Self::SolveDirichlet => "solve-dirichlet",
            Self::OnePhase => "one-phase",
            Self::HalfSpace => "half-space",
            Self::Obstacle => "obstacle",
            Self::Beta0 => "beta0",
            Self::FitExponent => "fit-exponent",
            Self::ReduceKernel => "reduce-kernel",
        }
    }
}

/// Default log frequency of the oscillating family: one oscillation per
/// dyadic shell.
pub fn dyadic_log_frequency() -> f64 {
    2.0 * PI / LN_2
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum KernelTag {
    FractionalLaplacian,
    Power,
    Oscillating,
    DyadicPiecewise,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelParams {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coeff: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub log_frequency: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelCfg {
    pub tag: KernelTag,
    #[serde(default = "one")]
    pub n: usize,
    pub s: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
    #[serde(rename = "Lambda", default, skip_serializing_if = "Option::is_none")]
    pub cap: Option<f64>,
    #[serde(default)]
    pub params: KernelParams,
}

fn one() -> usize {
    1
}

impl KernelCfg {
    /// Builds the kernel and fills in every default, so that the resolved
    /// block reproduces the same kernel.
    pub fn build(&mut self) -> Result<KernelSpec> {
        let (n, s) = (self.n, self.s);
        let k = match self.tag {
            KernelTag::FractionalLaplacian | KernelTag::Power => {
                if self.params.log_frequency.is_some() {
                    bail!("kernel: log_frequency is not a parameter of the {:?} family", self.tag);
                }
                let k = if self.tag == KernelTag::Power {
                    let c = *self.params.coeff.get_or_insert(1.0);
                    KernelSpec::power_kernel(n, s, c)?
                } else {
                    if self.params.coeff.is_some() {
                        bail!("kernel: the fractional Laplacian coefficient is fixed by n and s");
                    }
                    KernelSpec::fractional_laplacian(n, s)?
                };
                for (name, given) in [("lambda", self.lambda), ("Lambda", self.cap)] {
                    if let Some(v) = given {
                        if (v - k.lower()).abs() > 1e-12 * k.lower() {
                            bail!("kernel: {name} = {v} contradicts the power coefficient {}", k.lower());
                        }
                    }
                }
                k
            }
            KernelTag::Oscillating | KernelTag::DyadicPiecewise => {
                if self.params.coeff.is_some() {
                    bail!("kernel: coeff is not a parameter of the {:?} family", self.tag);
                }
                let lambda = *self.lambda.get_or_insert(1.0);
                let cap = *self.cap.get_or_insert(2.0);
                if self.tag == KernelTag::Oscillating {
                    let f = *self.params.log_frequency.get_or_insert_with(dyadic_log_frequency);
                    KernelSpec::oscillating(n, s, lambda, cap, f)?
                } else {
                    if self.params.log_frequency.is_some() {
                        bail!("kernel: log_frequency is not a parameter of the dyadic-piecewise family");
                    }
                    KernelSpec::dyadic_piecewise(n, s, lambda, cap)?
                }
            }
        };
        self.lambda = Some(k.lower());
        self.cap = Some(k.upper());
        Ok(k)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridCfg {
    pub min: f64,
    pub max: f64,
    pub nodes: usize,
}

impl GridCfg {
    pub fn build(&self) -> Result<Grid> {
        Ok(Grid::uniform(self.min, self.max, self.nodes)?)
    }
}

/// Every pass threshold used by the reports.  Any subset may be overridden.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Tolerances {
    /// Max nodal error against the closed form, outside the boundary layer.
    pub reference_max_error: f64,
    /// Error of the value at the domain centre.
    pub reference_centre: f64,
    /// Boundary layer excluded from the reference comparison, in cells.
    pub reference_layer_cells: f64,
    /// Remainder exponent of the boundary expansion.
    pub boundary_expansion_exponent: f64,
    /// `|L x_+^s| x^s` for the fractional Laplacian.
    pub profile_residual: f64,
    /// Relative defect of the Pythagorean identity.
    pub pythagorean: f64,
    /// `|beta_0 - s|` when the envelope is tight.
    pub beta0_tight: f64,
    /// Distance of `beta_0` from the ends of its admissible interval.
    pub beta0_margin: f64,
    /// Bisection tolerance for `beta_0`.
    pub beta0_bisection: f64,
    /// Energy gap between the minimiser and the exhaustive oracle.
    pub oracle_energy: f64,
    /// Bound on `L u` in the domain and `|L u|` on the positivity set.
    pub certificate: f64,
    pub density_low: f64,
    pub density_high: f64,
    /// Half width of the exponent band for growth fits.
    pub exponent: f64,
    /// Relative lattice identity defect, as a multiple of machine epsilon.
    pub min_max_identity_eps: f64,
    /// Slack allowed in `I(u ^ phi) + I(u v phi) >= 2 I(u)`.
    pub competitor: f64,
    /// Sup distance of the fractional half-space profile to `x^s` on `[0, 1]`.
    pub reference_profile: f64,
    /// Sup distance between the two half-space construction routes.
    pub route_agreement: f64,
    /// Relative defect of the planar versus reduced operator.
    pub reduction: f64,
    /// Error of the reduction constant.
    pub reduction_constant: f64,
    pub complementarity: f64,
    pub symmetry: f64,
    /// Half width of the regular exponent band around `1 + s`.
    pub class_band: f64,
    /// Remainder exponent margin above `1 + s`.
    pub expansion_margin: f64,
    /// `alpha >= s - holder_margin` for the derivative of the solution.
    pub holder_margin: f64,
    /// Half width of the target band of `fit-exponent`.
    pub fit_exponent: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            reference_max_error: 2e-2,
            reference_centre: 1e-2,
            reference_layer_cells: 4.0,
            boundary_expansion_exponent: 0.55,
            profile_residual: 1e-3,
            pythagorean: 1e-10,
            beta0_tight: 0.01,
            beta0_margin: 1e-3,
            beta0_bisection: 1e-8,
            oracle_energy: 1e-8,
            certificate: 1e-6,
            density_low: 0.05,
            density_high: 0.95,
            exponent: 0.05,
            min_max_identity_eps: 16.0,
            competitor: 1e-9,
            reference_profile: 3e-2,
            route_agreement: 2e-2,
            reduction: 1e-6,
            reduction_constant: 1e-6,
            complementarity: 1e-8,
            symmetry: 1e-8,
            class_band: 0.1,
            expansion_margin: 0.05,
            holder_margin: 0.1,
            fit_exponent: 0.05,
        }
    }
}

/// Declares a config struct carrying the fields shared by every
/// subcommand (`subcommand`, `description`, `output`, `seed`,
/// `tolerances`) followed by its own blocks.
#[macro_export]
macro_rules! experiment_config {
    ($name:ident { $($(#[$fm:meta])* $f:ident : $t:ty),* $(,)? }) => {
        #[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
        #[serde(deny_unknown_fields)]
        pub struct $name {
            pub subcommand: $crate::config::Subcommand,
            #[serde(default)]
            pub description: String,
            /// Output directory, relative to the working directory.
            #[serde(default)]
            pub output: Option<String>,
            #[serde(default)]
            pub seed: u64,
            #[serde(default)]
            pub tolerances: $crate::config::Tolerances,
            $($(#[$fm])* pub $f: $t,)*
        }
    };
}

#[derive(Deserialize)]
struct Head {
    subcommand: Subcommand,
}

fn located(e: serde_path_to_error::Error<serde_json::Error>) -> anyhow::Error {
    let path = e.path().to_string();
    let inner = e.into_inner();
    if path.is_empty() || path == "." {
        anyhow!("{inner}")
    } else {
        anyhow!("at key `{path}`: {inner}")
    }
}

/// Reads the `subcommand` of a config without validating the rest.
pub fn peek_subcommand(text: &str) -> Result<Subcommand> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let head: Head = serde_path_to_error::deserialize(de).map_err(located)?;
    Ok(head.subcommand)
}

/// Parses the whole config as `T`, reporting the line and key of the
/// first problem.
pub fn parse<T: DeserializeOwned>(text: &str) -> Result<T> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let v = serde_path_to_error::deserialize(de).map_err(located)?;
    Ok(v)
}

pub fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))
}
