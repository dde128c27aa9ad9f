//! TOML experiment configuration.

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use langinc_core::potential::PotentialSpec;
use langinc_core::{example_potential, PiecewisePotential1D, SamplerKind, SelectionRule};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::CliError;

pub const PAPER_EXAMPLE: &str = "paper_example";

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub potential: PotentialChoice,
    #[serde(default)]
    pub sampler: SamplerSection,
    #[serde(default)]
    pub gibbs: GibbsSection,
    #[serde(default)]
    pub fp: FpSection,
    #[serde(default)]
    pub jko: JkoSection,
    pub output: Option<PathBuf>,
}

/// A preset name or an inline piecewise table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PotentialChoice {
    Preset(String),
    Inline(PotentialSpec),
}

impl Default for PotentialChoice {
    fn default() -> Self {
        Self::Preset(PAPER_EXAMPLE.into())
    }
}

impl PotentialChoice {
    pub fn build(&self) -> Result<PiecewisePotential1D, CliError> {
        match self {
            Self::Preset(name) if name == PAPER_EXAMPLE => Ok(example_potential()),
            Self::Preset(name) => Err(CliError::Config(format!("unknown potential preset `{name}`"))),
            Self::Inline(spec) => PiecewisePotential1D::from_spec(spec).map_err(|e| CliError::Config(e.to_string())),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SamplerSection {
    pub kind: SamplerKind,
    pub epsilon: f64,
    pub sigma: f64,
    pub steps: u64,
    pub burn_in: u64,
    pub thin: u64,
    pub seed: u64,
    pub selection: SelectionRule,
    pub proposal_std: f64,
    pub init: f64,
    pub chains: usize,
}

impl Default for SamplerSection {
    fn default() -> Self {
        Self {
            kind: SamplerKind::Ula,
            epsilon: 1e-3,
            sigma: 1.0,
            steps: 10_000,
            burn_in: 0,
            thin: 1,
            seed: 42,
            selection: SelectionRule::MinNorm,
            proposal_std: 1.0,
            init: 0.0,
            chains: 1,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GibbsSection {
    pub sigma: f64,
    /// Plotting window for the pdf curve.
    pub plot_domain: [f64; 2],
    pub points: usize,
    /// Number of i.i.d. draws to write; 0 writes none.
    pub samples: usize,
}

impl Default for GibbsSection {
    fn default() -> Self {
        Self { sigma: 1.0, plot_domain: [-4.0, 4.0], points: 801, samples: 0 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FpSection {
    pub sigma: f64,
    pub domain: [f64; 2],
    pub n: usize,
    pub tol: f64,
    pub dt: f64,
    /// Snapshot times for the evolution from `init`; empty means steady state only.
    pub times: Vec<f64>,
    pub init: InitSpec,
}

impl Default for FpSection {
    fn default() -> Self {
        Self {
            sigma: 1.0,
            domain: [-8.0, 8.0],
            n: 1200,
            tol: 1e-10,
            dt: 0.01,
            times: Vec::new(),
            init: InitSpec::Gaussian { mean: 0.0, std: 0.5 },
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct JkoSection {
    pub sigma: f64,
    pub h: f64,
    pub steps: usize,
    pub m: usize,
    pub init: InitSpec,
    /// Times at which densities are written.
    pub times: Vec<f64>,
    /// Grid for the written densities.
    pub domain: [f64; 2],
    pub n: usize,
}

impl Default for JkoSection {
    fn default() -> Self {
        Self {
            sigma: 1.0,
            h: 0.01,
            steps: 500,
            m: 2000,
            init: InitSpec::Gaussian { mean: 0.0, std: 0.5 },
            times: Vec::new(),
            domain: [-8.0, 8.0],
            n: 1600,
        }
    }
}

/// Named initial law: `gaussian(mean, std)` or `uniform(a, b)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum InitSpec {
    Gaussian { mean: f64, std: f64 },
    Uniform { a: f64, b: f64 },
}

impl fmt::Display for InitSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Gaussian { mean, std } => write!(f, "gaussian({mean}, {std})"),
            Self::Uniform { a, b } => write!(f, "uniform({a}, {b})"),
        }
    }
}

impl FromStr for InitSpec {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        let open = s.find('(').ok_or_else(|| format!("expected name(a, b), got `{s}`"))?;
        let inner = s[open + 1..].strip_suffix(')').ok_or_else(|| format!("missing `)` in `{s}`"))?;
        let args: Vec<f64> = inner
            .split(',')
            .map(|a| a.trim().parse::<f64>().map_err(|e| format!("bad number `{}`: {e}", a.trim())))
            .collect::<Result<_, _>>()?;
        let [x, y] = args[..] else {
            return Err(format!("expected two arguments in `{s}`"));
        };
        match s[..open].trim() {
            "gaussian" if y > 0.0 => Ok(Self::Gaussian { mean: x, std: y }),
            "gaussian" => Err(format!("gaussian std must be positive, got {y}")),
            "uniform" if x < y => Ok(Self::Uniform { a: x, b: y }),
            "uniform" => Err(format!("uniform needs a < b, got ({x}, {y})")),
            other => Err(format!("unknown initial law `{other}`")),
        }
    }
}

impl Serialize for InitSpec {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for InitSpec {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

impl ExperimentConfig {
    /// Parses TOML, reporting the line and column of the first error.
    pub fn from_toml(src: &str) -> Result<Self, CliError> {
        toml::from_str(src).map_err(|e| {
            let msg = e.message().trim().to_string();
            match e.span() {
                Some(span) => {
                    let (line, col) = line_col(src, span.start);
                    CliError::Config(format!("line {line}, column {col}: {msg}"))
                }
                None => CliError::Config(msg),
            }
        })
    }
}

fn line_col(src: &str, offset: usize) -> (usize, usize) {
    let before = &src[..offset.min(src.len())];
    let line = before.matches('\n').count() + 1;
    let col = before.rfind('\n').map_or(before.len(), |i| before.len() - i - 1) + 1;
    (line, col)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_config_uses_defaults() {
        let cfg = ExperimentConfig::from_toml("").unwrap();
        assert_eq!(cfg, ExperimentConfig::default());
        assert!(cfg.potential.build().is_ok());
    }

    #[test]
    fn inline_potential_and_sections() {
        let src = r#"
potential = { breakpoints = [0.0], pieces = [[0.0, -1.0], [0.0, 1.0]] }
[sampler]
kind = "rwm"
selection = "left_limit"
steps = 500
[jko]
init = "uniform(-1, 2)"
"#;
        let cfg = ExperimentConfig::from_toml(src).unwrap();
        assert_eq!(cfg.sampler.kind, SamplerKind::Rwm);
        assert_eq!(cfg.sampler.selection, SelectionRule::LeftLimit);
        assert_eq!(cfg.jko.init, InitSpec::Uniform { a: -1.0, b: 2.0 });
        let p = cfg.potential.build().unwrap();
        assert_eq!(p.eval(-2.0), 2.0);
    }

    #[test]
    fn errors_carry_position() {
        let err = ExperimentConfig::from_toml("[sampler]\nsteps = 10\nbogus = 1\n").unwrap_err();
        let CliError::Config(msg) = err else { panic!("wrong error kind") };
        assert!(msg.starts_with("line 3, column 1"), "{msg}");

        let err = ExperimentConfig::from_toml("[fp]\nn = \"many\"\n").unwrap_err();
        let CliError::Config(msg) = err else { panic!("wrong error kind") };
        assert!(msg.starts_with("line 2"), "{msg}");

        let cfg = ExperimentConfig::from_toml("potential = \"nope\"").unwrap();
        assert!(matches!(cfg.potential.build(), Err(CliError::Config(_))));
    }

    #[test]
    fn init_spec_round_trip() {
        for s in ["gaussian(0, 0.5)", "uniform(-1, 1)"] {
            let spec: InitSpec = s.parse().unwrap();
            assert_eq!(spec.to_string(), s);
        }
        for bad in ["gaussian(0, 0)", "uniform(1, 1)", "cauchy(0, 1)", "gaussian(0)", "gaussian 0, 1"] {
            assert!(bad.parse::<InitSpec>().is_err(), "{bad}");
        }
    }
}
