//! Run configuration: one JSON document with `data`, `model`, `train`,
//! `analysis` and `output` sections. Missing keys take defaults; unknown keys
//! are rejected.

use std::path::{Path, PathBuf};

use hmvae_core::analysis::{DEFAULT_EDGE_CUT, DEFAULT_THRESHOLD_SD};
use hmvae_core::data::{Nonlinearity, SynthConfig};
use hmvae_core::optim::TrainConfig;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fsutil;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SyntheticSection {
    pub sources: usize,
    pub grid: Vec<usize>,
    pub subjects: usize,
    pub group_effect: Vec<f64>,
    pub noise_sd: f64,
    pub nonlinearity: Nonlinearity,
}

impl Default for SyntheticSection {
    fn default() -> Self {
        let s = SynthConfig::default();
        SyntheticSection {
            sources: s.sources,
            grid: s.grid,
            subjects: s.subjects,
            group_effect: s.group_effect,
            noise_sd: s.noise_sd,
            nonlinearity: s.nonlinearity,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DataSection {
    /// Subject matrix to analyse. Defaults to the QC output in the output
    /// directory if present, otherwise the generated data.
    pub input: Option<PathBuf>,
    pub synthetic: SyntheticSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelSection {
    pub latent_dim: usize,
    pub recognition_hidden: usize,
    pub generation_hidden: usize,
}

impl Default for ModelSection {
    fn default() -> Self {
        let t = TrainConfig::default();
        ModelSection {
            latent_dim: t.latent_dim,
            recognition_hidden: t.recognition_hidden,
            generation_hidden: t.generation_hidden,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainSection {
    pub learning_rate: f64,
    pub decay: f64,
    pub epsilon: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub mc_samples: usize,
    /// The one seed behind every random draw of a run.
    pub seed: u64,
}

impl Default for TrainSection {
    fn default() -> Self {
        let t = TrainConfig::default();
        TrainSection {
            learning_rate: t.learning_rate,
            decay: t.decay,
            epsilon: t.epsilon,
            batch_size: t.batch_size,
            epochs: t.epochs,
            mc_samples: t.mc_samples,
            seed: t.seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AnalysisSection {
    /// Cross-validation folds; `None` means `min(100, smallest class)`.
    pub folds: Option<usize>,
    pub l2: f64,
    pub threshold_sd: f64,
    pub edge_cut: f64,
    /// Monte-Carlo samples per subject for the `elbo` command.
    pub samples: usize,
}

impl Default for AnalysisSection {
    fn default() -> Self {
        AnalysisSection {
            folds: None,
            l2: 0.01,
            threshold_sd: DEFAULT_THRESHOLD_SD,
            edge_cut: DEFAULT_EDGE_CUT,
            samples: 100,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSection {
    pub dir: PathBuf,
    /// Pixels per voxel edge in montage images.
    pub image_scale: usize,
}

impl Default for OutputSection {
    fn default() -> Self {
        OutputSection {
            dir: PathBuf::from("out"),
            image_scale: 4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub data: DataSection,
    pub model: ModelSection,
    pub train: TrainSection,
    pub analysis: AnalysisSection,
    pub output: OutputSection,
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let c: RunConfig = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        c.validate()?;
        Ok(c)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = fsutil::read(path)?;
        let text = std::str::from_utf8(&bytes).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::from_json(text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn seed(&self) -> u64 {
        self.train.seed
    }

    pub fn synth_config(&self) -> SynthConfig {
        let s = &self.data.synthetic;
        SynthConfig {
            sources: s.sources,
            grid: s.grid.clone(),
            subjects: s.subjects,
            group_effect: s.group_effect.clone(),
            noise_sd: s.noise_sd,
            nonlinearity: s.nonlinearity,
            seed: self.seed(),
        }
    }

    pub fn train_config(&self) -> TrainConfig {
        let t = &self.train;
        TrainConfig {
            learning_rate: t.learning_rate,
            decay: t.decay,
            epsilon: t.epsilon,
            batch_size: t.batch_size,
            epochs: t.epochs,
            mc_samples: t.mc_samples,
            seed: t.seed,
            latent_dim: self.model.latent_dim,
            recognition_hidden: self.model.recognition_hidden,
            generation_hidden: self.model.generation_hidden,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.train_config().validate()?;
        let s = &self.data.synthetic;
        if s.group_effect.len() != s.sources {
            return Err(Error::Config(format!(
                "data.synthetic.group_effect has {} entries for {} sources",
                s.group_effect.len(),
                s.sources
            )));
        }
        if !matches!(s.grid.len(), 2 | 3) || s.grid.contains(&0) {
            return Err(Error::Config("data.synthetic.grid must list 2 or 3 positive sizes".into()));
        }
        let a = &self.analysis;
        if a.folds.is_some_and(|f| f < 2) {
            return Err(Error::Config("analysis.folds must be at least 2".into()));
        }
        if !(a.l2 >= 0.0 && a.l2.is_finite()) {
            return Err(Error::Config("analysis.l2 must be non-negative".into()));
        }
        if !(a.threshold_sd >= 0.0 && a.threshold_sd.is_finite()) {
            return Err(Error::Config("analysis.threshold_sd must be non-negative".into()));
        }
        if !(a.edge_cut >= 0.0 && a.edge_cut <= 1.0) {
            return Err(Error::Config("analysis.edge_cut must lie in [0, 1]".into()));
        }
        if a.samples == 0 {
            return Err(Error::Config("analysis.samples must be at least 1".into()));
        }
        if self.output.image_scale == 0 {
            return Err(Error::Config("output.image_scale must be at least 1".into()));
        }
        Ok(())
    }
}
