//! TOML experiment configs.

use std::path::{Path, PathBuf};

use regdist_core::geometry::{FieldSpec, MeasureSpec};
use regdist_core::GeometryParams;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    #[default]
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum AlphaMode {
    #[default]
    Explicit,
    Magic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct GeometrySection {
    pub n: Option<usize>,
    pub d: Option<f64>,
    pub alpha: Option<f64>,
    #[serde(default)]
    pub alpha_mode: AlphaMode,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct SamplingSection {
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub points: Vec<Vec<f64>>,
    pub count: Option<usize>,
    /// Distance range for generated evaluation points.
    pub distance_range: Option<[f64; 2]>,
    pub radii: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct Tolerances {
    pub residual: Option<f64>,
    pub rel_err: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    pub format: Option<Format>,
    pub dir: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NewtonSection {
    pub weight: Option<FieldSpec>,
    pub bump_centre: Vec<f64>,
    pub bump_radius: f64,
    pub samples: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NtSection {
    pub y0: Vec<Vec<f64>>,
    pub etas: Vec<f64>,
    pub beta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpectrumSection {
    pub ns: Vec<usize>,
    pub ds: Vec<f64>,
    pub alphas: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FunctionalSection {
    pub phi: FieldSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PdeSection {
    pub density: String,
    pub dim: usize,
    pub limit: f64,
    pub core_radius: f64,
    pub bounds: [f64; 2],
    pub y0: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BmoSection {
    pub dim: usize,
    pub depth: u32,
    pub radius: f64,
    pub pairs: usize,
    pub points: usize,
    pub moment: u32,
    pub beta: f64,
    #[serde(default)]
    pub functions: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AcceptanceSection {
    #[serde(default = "all_criteria")]
    pub criteria: Vec<u32>,
    /// Multiplies every tolerance; `0` forces failures.
    #[serde(default = "one")]
    pub tolerance_scale: f64,
    #[serde(default = "million")]
    pub mc_samples: usize,
}

fn all_criteria() -> Vec<u32> {
    (1..=12).collect()
}

fn one() -> f64 {
    1.0
}

fn million() -> usize {
    1_000_000
}

impl Default for AcceptanceSection {
    fn default() -> Self {
        AcceptanceSection {
            criteria: all_criteria(),
            tolerance_scale: 1.0,
            mc_samples: million(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub geometry: GeometrySection,
    pub measure: Option<MeasureSpec>,
    #[serde(default)]
    pub sampling: SamplingSection,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default)]
    pub output: OutputSection,
    pub newton: Option<NewtonSection>,
    pub nt: Option<NtSection>,
    pub spectrum: Option<SpectrumSection>,
    pub functional: Option<FunctionalSection>,
    pub pde: Option<PdeSection>,
    pub bmo: Option<BmoSection>,
    pub acceptance: Option<AcceptanceSection>,
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Io(path.to_path_buf(), e))?;
        Self::parse(&text).map_err(|e| match e {
            CliError::Config { message, .. } => CliError::Config {
                path: path.to_path_buf(),
                message,
            },
            other => other,
        })
    }

    pub fn parse(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Config {
            path: PathBuf::from("<inline>"),
            message: e.message().to_string(),
        })
    }

    /// SHA-256 over every field except the output section.
    pub fn semantic_hash(&self) -> String {
        let mut semantic = self.clone();
        semantic.output = OutputSection::default();
        let bytes = serde_json::to_vec(&semantic).expect("config serializes");
        let digest = Sha256::digest(&bytes);
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn require_measure(&self) -> Result<&MeasureSpec, CliError> {
        self.measure.as_ref().ok_or(CliError::Missing("measure"))
    }

    /// Geometry from the `[geometry]` section, with `n` and `d` defaulting
    /// to those of the measure.
    pub fn params(&self, fallback: Option<(usize, f64)>) -> Result<GeometryParams, CliError> {
        let g = &self.geometry;
        let n = g.n.or(fallback.map(|f| f.0)).ok_or(CliError::Missing("geometry.n"))?;
        let d = g.d.or(fallback.map(|f| f.1)).ok_or(CliError::Missing("geometry.d"))?;
        let p = match g.alpha_mode {
            AlphaMode::Magic => GeometryParams::magic(n, d)?,
            AlphaMode::Explicit => GeometryParams::new(n, d, g.alpha.ok_or(CliError::Missing("geometry.alpha"))?)?,
        };
        Ok(p)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_key_is_named() {
        let err = ExperimentConfig::parse("[geometry]\nn = 5\nalpah = 1.0\n").unwrap_err();
        assert!(err.to_string().contains("alpah"), "{err}");
    }

    #[test]
    fn hash_ignores_output_and_tracks_semantics() {
        let a = ExperimentConfig::parse("[geometry]\nn = 5\nd = 1.0\nalpha = 1.0\n").unwrap();
        let mut b = a.clone();
        b.output.dir = Some(PathBuf::from("/tmp/x"));
        assert_eq!(a.semantic_hash(), b.semantic_hash());
        b.geometry.alpha = Some(1.5);
        assert_ne!(a.semantic_hash(), b.semantic_hash());
    }

    #[test]
    fn magic_mode_uses_measure_dimensions() {
        let c = ExperimentConfig::parse("[geometry]\nalpha_mode = \"magic\"\n").unwrap();
        let p = c.params(Some((3, 0.5))).unwrap();
        assert_eq!(p.alpha(), 0.5);
    }
}
