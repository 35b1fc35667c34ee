//! Hyperparameters and architecture.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::KernelFamily;
use crate::sampling::{EmbeddingSpec, DEFAULT_EMBEDDINGS};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WeightCriterion {
    Dist,
    Dot,
    Random,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NormalizerKind {
    Ms,
    Fl,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DelayAggregation {
    Median,
    Min,
}

macro_rules! named_enum {
    ($t:ty { $($v:ident => $s:literal),+ $(,)? }) => {
        impl $t {
            pub fn name(self) -> &'static str {
                match self { $(Self::$v => $s),+ }
            }
        }
        impl std::fmt::Display for $t {
            fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
                f.write_str(self.name())
            }
        }
        impl std::str::FromStr for $t {
            type Err = Error;
            fn from_str(s: &str) -> Result<Self> {
                match s.trim().to_ascii_lowercase().as_str() {
                    $($s => Ok(Self::$v),)+
                    other => Err(Error::param(format!(
                        concat!("unknown ", stringify!($t), " {:?}"), other
                    ))),
                }
            }
        }
    };
}

named_enum!(WeightCriterion { Dist => "dist", Dot => "dot", Random => "random" });
named_enum!(NormalizerKind { Ms => "ms", Fl => "fl" });
named_enum!(DelayAggregation { Median => "median", Min => "min" });

/// Layer widths and kernel choices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Architecture {
    pub hidden: Vec<usize>,
    pub pspk: KernelFamily,
    /// Output-layer PSP kernel; defaults to `pspk`.
    pub output_pspk: Option<KernelFamily>,
    pub rfk: KernelFamily,
}

impl Default for Architecture {
    fn default() -> Self {
        Self {
            hidden: vec![750],
            pspk: KernelFamily::Hat,
            output_pspk: None,
            rfk: KernelFamily::Exp,
        }
    }
}

impl Architecture {
    pub fn single(neurons: usize, pspk: KernelFamily) -> Self {
        Self {
            hidden: vec![neurons],
            pspk,
            ..Self::default()
        }
    }

    pub fn output_kernel(&self) -> KernelFamily {
        self.output_pspk.unwrap_or(self.pspk)
    }

    pub fn validate(&self) -> Result<()> {
        if self.hidden.is_empty() || self.hidden.contains(&0) {
            return Err(Error::param("architecture needs at least one nonempty hidden layer"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SswimConfig {
    /// Size of the initialisation batch drawn from the training split.
    pub init_batch: usize,
    pub hidden_support_min: f64,
    pub hidden_support_max: f64,
    pub hidden_support_cycle: usize,
    /// Candidates for the input pseudometric; one entry fixes it.
    pub input_metrics: Vec<EmbeddingSpec>,
    /// Candidates for the target pseudometric; one entry fixes it.
    pub output_metrics: Vec<EmbeddingSpec>,
    /// Samples used by the entropy criterion; `None` uses the whole batch.
    pub entropy_subset: Option<usize>,
    pub min_entropy: Option<f64>,
    pub pair_epsilon: f64,
    pub min_norm: f64,
    pub weight: WeightCriterion,
    pub normalizer: NormalizerKind,
    pub target_mean: f64,
    pub target_std: f64,
    pub fluctuation_z: f64,
    pub silence_epsilon: f64,
    pub std_floor: f64,
    pub max_resamples: usize,
    pub delay_aggregation: DelayAggregation,
    pub output_support_min: f64,
    /// Defaults to twice the horizon.
    pub output_support_max: Option<f64>,
    pub output_support_alpha: f64,
    pub output_support_count: usize,
    pub lambda_min: f64,
    pub lambda_max: f64,
    pub lambda_count: usize,
    pub batch_size: usize,
}

impl Default for SswimConfig {
    fn default() -> Self {
        Self {
            init_batch: 1000,
            hidden_support_min: 5.0,
            hidden_support_max: 50.0,
            hidden_support_cycle: 10,
            input_metrics: DEFAULT_EMBEDDINGS.to_vec(),
            output_metrics: DEFAULT_EMBEDDINGS.to_vec(),
            entropy_subset: None,
            min_entropy: None,
            pair_epsilon: 1e-6,
            min_norm: 1e-6,
            weight: WeightCriterion::Dot,
            normalizer: NormalizerKind::Ms,
            target_mean: 0.5,
            target_std: 0.5,
            fluctuation_z: 1.0,
            silence_epsilon: 1e-9,
            std_floor: 1e-12,
            max_resamples: 8,
            delay_aggregation: DelayAggregation::Median,
            output_support_min: 1.0,
            output_support_max: None,
            output_support_alpha: 1.5,
            output_support_count: 30,
            lambda_min: 1e-5,
            lambda_max: 0.5,
            lambda_count: 32,
            batch_size: 64,
        }
    }
}

impl SswimConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |m: &str| Err(Error::param(m.to_string()));
        if self.init_batch < 2 {
            return fail("init_batch must be at least 2");
        }
        if !(self.hidden_support_min > 0.0 && self.hidden_support_max >= self.hidden_support_min) {
            return fail("hidden supports need 0 < min <= max");
        }
        if self.hidden_support_cycle < 2 {
            return fail("hidden_support_cycle must be at least 2");
        }
        if self.input_metrics.is_empty() || self.output_metrics.is_empty() {
            return fail("metric candidate lists must be nonempty");
        }
        if self.entropy_subset.is_some_and(|s| s < 2) {
            return fail("entropy_subset must be at least 2");
        }
        if self.pair_epsilon < 0.0 || self.min_norm < 0.0 || self.silence_epsilon < 0.0 {
            return fail("pair_epsilon, min_norm and silence_epsilon must be nonnegative");
        }
        if !(self.target_std > 0.0) || !(self.target_mean < 1.0) {
            return fail("ms normalizer needs target_std > 0 and target_mean < 1");
        }
        if !(self.fluctuation_z > 0.0) {
            return fail("fluctuation_z must be positive");
        }
        if !(self.std_floor > 0.0) {
            return fail("std_floor must be positive");
        }
        if !(self.output_support_min >= 0.0) || self.output_support_max.is_some_and(|b| b <= self.output_support_min) {
            return fail("output supports need 0 <= min < max");
        }
        if !(self.output_support_alpha >= 1.0) || self.output_support_count == 0 {
            return fail("output support grid needs alpha >= 1 and count >= 1");
        }
        if !(self.lambda_min > 0.0 && self.lambda_max >= self.lambda_min) || self.lambda_count == 0 {
            return fail("lambda grid needs 0 < min <= max and count >= 1");
        }
        if self.batch_size == 0 {
            return fail("batch_size must be positive");
        }
        Ok(())
    }

    pub fn output_support_upper(&self, horizon: usize) -> f64 {
        self.output_support_max.unwrap_or(2.0 * horizon as f64)
    }

    /// Log-spaced regularisation candidates, ascending.
    pub fn lambda_grid(&self) -> Vec<f64> {
        log_grid(self.lambda_min, self.lambda_max, self.lambda_count)
    }
}

pub fn log_grid(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    if count == 1 {
        return vec![lo];
    }
    let (a, b) = (lo.ln(), hi.ln());
    (0..count)
        .map(|k| {
            if k + 1 == count {
                hi
            } else {
                (a + (b - a) * k as f64 / (count - 1) as f64).exp()
            }
        })
        .collect()
}
