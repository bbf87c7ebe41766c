use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::dataset::{DatasetFormat, MnistGrouping};
use super::synth::SyntheticSpec;
use crate::clustering::SpectralVariant;
use crate::error::{GlrrError, Result};
use crate::solver::SolverConfig;

pub const DEFAULT_SUBSPACE_DIM: usize = 10;

/// Parameter profiles from the reported experiments.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Preset {
    /// Handwritten-digit image sets: λ = 0.3, p = 10.
    Mnist,
    /// Dynamic-texture clips: λ = 0.8.
    Dyntex,
}

impl Preset {
    pub fn lambda(self) -> f64 {
        match self {
            Preset::Mnist => 0.3,
            Preset::Dyntex => 0.8,
        }
    }

    pub fn subspace_dim(self) -> Option<usize> {
        match self {
            Preset::Mnist => Some(10),
            Preset::Dyntex => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum DataSource {
    /// Points generated directly on the Grassmannian.
    Synthetic(SyntheticSpec),
    /// Grouped image sets on disk.
    Directory { path: PathBuf, format: DatasetFormat },
    /// Random same-class subgroups cut from raw MNIST IDX files.
    Mnist(MnistGrouping),
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SpectralConfig {
    pub variant: SpectralVariant,
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: PathBuf,
    /// Put each run in a fresh `run-<unix-millis>` directory below `dir`.
    pub timestamped: bool,
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig {
            dir: PathBuf::from("runs"),
            timestamped: true,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    #[serde(default)]
    pub preset: Option<Preset>,
    /// Subspace dimension for sample matrices; preset or 10 when absent.
    #[serde(default)]
    pub p: Option<usize>,
    /// Overrides both the preset and `solver.lambda`.
    #[serde(default)]
    pub lambda: Option<f64>,
    pub k: usize,
    pub data: DataSource,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub spectral: SpectralConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

impl PipelineConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| GlrrError::Validation(format!("config: {e}")))
    }

    /// Parse a config file; relative paths inside it are taken relative to
    /// the file's directory.
    pub fn from_file(path: &Path) -> Result<(Self, String)> {
        let text = std::fs::read_to_string(path).map_err(|e| GlrrError::io(path, e))?;
        let mut config = Self::from_toml(&text)?;
        if let Some(base) = path.parent() {
            config.rebase(base);
        }
        config.validate()?;
        Ok((config, text))
    }

    fn rebase(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        match &mut self.data {
            DataSource::Synthetic(_) => {}
            DataSource::Directory { path, .. } => fix(path),
            DataSource::Mnist(m) => {
                fix(&mut m.images);
                fix(&mut m.labels);
            }
        }
        fix(&mut self.output.dir);
    }

    pub fn resolved_lambda(&self) -> f64 {
        self.lambda
            .or(self.preset.map(Preset::lambda))
            .unwrap_or(self.solver.lambda)
    }

    pub fn resolved_p(&self) -> usize {
        self.p
            .or(self.preset.and_then(Preset::subspace_dim))
            .unwrap_or(DEFAULT_SUBSPACE_DIM)
    }

    /// Solver settings with the resolved λ.
    pub fn solver_config(&self) -> SolverConfig {
        SolverConfig {
            lambda: self.resolved_lambda(),
            ..self.solver.clone()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.k < 2 {
            return Err(GlrrError::Validation(format!("k must be at least 2, got {}", self.k)));
        }
        if self.resolved_p() == 0 {
            return Err(GlrrError::Validation("p must be at least 1".to_string()));
        }
        if let DataSource::Synthetic(spec) = &self.data {
            spec.validate()?;
        }
        self.solver_config().validate()
    }
}
