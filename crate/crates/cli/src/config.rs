//! TOML run configuration.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sswim_core::harness::{
    load_csv, make_windows, synth_dataset_with_noise, AblationGrid, ForecastDataset, SplitRatios, SynthKind,
};
use sswim_core::{Architecture, KernelFamily, NormalizerKind, SswimConfig, WeightCriterion};

use crate::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthSource {
    pub kind: SynthKind,
    pub variables: usize,
    pub steps: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_noise")]
    pub noise: f64,
}

fn default_noise() -> f64 {
    sswim_core::harness::dataset::DEFAULT_NOISE
}

fn default_stride() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataConfig {
    /// CSV file, one row per step; relative paths resolve against the config file.
    pub csv: Option<PathBuf>,
    /// Expected column count of `csv`.
    pub variables: Option<usize>,
    pub synth: Option<SynthSource>,
    pub observation: usize,
    pub horizon: usize,
    #[serde(default = "default_stride")]
    pub stride: usize,
    #[serde(default)]
    pub ratios: SplitRatios,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AblationConfig {
    pub kernels: Vec<KernelFamily>,
    pub criteria: Vec<WeightCriterion>,
    pub normalizers: Vec<NormalizerKind>,
    /// Widths of the last hidden layer; empty keeps the architecture's.
    pub neurons: Vec<usize>,
}

impl Default for AblationConfig {
    fn default() -> Self {
        Self {
            kernels: Vec::new(),
            criteria: vec![WeightCriterion::Dot, WeightCriterion::Random],
            normalizers: Vec::new(),
            neurons: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub data: DataConfig,
    #[serde(default)]
    pub architecture: Architecture,
    #[serde(default)]
    pub sswim: SswimConfig,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    pub out: Option<PathBuf>,
    #[serde(default)]
    pub ablation: AblationConfig,
    #[serde(skip)]
    pub base_dir: PathBuf,
}

fn default_seeds() -> Vec<u64> {
    vec![0]
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        let mut cfg: RunConfig =
            toml::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        cfg.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |m: String| Err(CliError::Config(m));
        match (&self.data.csv, &self.data.synth) {
            (Some(_), Some(_)) => return bad("data: set only one of `csv` and `synth`".into()),
            (None, None) => return bad("data: one of `csv` or `synth` is required".into()),
            (Some(p), None) => {
                let p = self.resolve(p);
                if !p.is_file() {
                    return bad(format!("data.csv: file {} does not exist", p.display()));
                }
            }
            (None, Some(s)) => {
                if s.variables == 0 || s.steps == 0 {
                    return bad("data.synth: variables and steps must be positive".into());
                }
            }
        }
        if self.data.observation == 0 || self.data.horizon == 0 || self.data.stride == 0 {
            return bad("data: observation, horizon and stride must be positive".into());
        }
        if self.seeds.is_empty() {
            return bad("seeds: at least one seed is required".into());
        }
        self.data.ratios.validate().map_err(|e| CliError::Config(format!("data.ratios: {e}")))?;
        self.architecture
            .validate()
            .map_err(|e| CliError::Config(format!("architecture: {e}")))?;
        self.sswim.validate().map_err(|e| CliError::Config(format!("sswim: {e}")))?;
        if self.ablation.neurons.contains(&0) {
            return bad("ablation.neurons: widths must be positive".into());
        }
        Ok(())
    }

    fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_relative() {
            self.base_dir.join(p)
        } else {
            p.to_path_buf()
        }
    }

    pub fn dataset(&self) -> Result<ForecastDataset, CliError> {
        let raw = match (&self.data.csv, &self.data.synth) {
            (Some(p), _) => load_csv(&self.resolve(p), self.data.variables)?,
            (None, Some(s)) => synth_dataset_with_noise(s.kind, s.variables, s.steps, s.noise, s.seed)?.series,
            (None, None) => unreachable!("validated"),
        };
        Ok(make_windows(
            &raw,
            self.data.observation,
            self.data.horizon,
            self.data.stride,
            self.data.ratios,
        )?)
    }

    /// Sweep grid; empty lists fall back to the single configured value.
    pub fn ablation_grid(&self) -> AblationGrid {
        let a = &self.ablation;
        AblationGrid {
            kernels: or_single(&a.kernels, self.architecture.pspk),
            criteria: or_single(&a.criteria, self.sswim.weight),
            normalizers: or_single(&a.normalizers, self.sswim.normalizer),
            neurons: if a.neurons.is_empty() {
                vec![*self.architecture.hidden.last().expect("validated")]
            } else {
                a.neurons.clone()
            },
            seeds: self.seeds.clone(),
        }
    }
}

fn or_single<T: Clone>(v: &[T], d: T) -> Vec<T> {
    if v.is_empty() {
        vec![d]
    } else {
        v.to_vec()
    }
}
