//! CSV ingestion, sliding windows, scaling and synthetic series.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::signal::DiscreteSignal;

/// Reads one row per time step and one column per variable into a
/// `variables x steps` signal with `dt = 1`.
///
/// A first row that does not parse as numbers is treated as a header.
pub fn load_csv(path: &Path, variables: Option<usize>) -> Result<DiscreteSignal> {
    let text = std::fs::read_to_string(path)?;
    parse_csv(&text, path, variables)
}

pub(crate) fn parse_csv(text: &str, path: &Path, variables: Option<usize>) -> Result<DiscreteSignal> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let err = |line: usize, column: usize, msg: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        column,
        msg,
    };
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut width: Option<usize> = None;
    for (k, record) in reader.records().enumerate() {
        let record = record?;
        let line = record.position().map_or(k + 1, |p| p.line() as usize);
        if record.iter().all(|f| f.is_empty()) {
            continue;
        }
        let parsed: Vec<std::result::Result<f64, _>> = record.iter().map(str::parse::<f64>).collect();
        if rows.is_empty() && width.is_none() && parsed.iter().any(|p| p.is_err()) {
            width = Some(record.len());
            continue;
        }
        let w = *width.get_or_insert(record.len());
        if record.len() != w {
            return Err(err(line, record.len().min(w) + 1, format!("expected {w} fields, found {}", record.len())));
        }
        let mut row = Vec::with_capacity(w);
        for (c, (p, raw)) in parsed.into_iter().zip(record.iter()).enumerate() {
            match p {
                Ok(v) if v.is_finite() => row.push(v),
                Ok(_) => return Err(err(line, c + 1, format!("non-finite value {raw:?}"))),
                Err(_) => return Err(err(line, c + 1, format!("not a number: {raw:?}"))),
            }
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let vars = rows[0].len();
    if let Some(v) = variables {
        if v != vars {
            return Err(err(1, 1, format!("expected {v} variables, found {vars}")));
        }
    }
    let steps = rows.len();
    let mut values = vec![0.0; vars * steps];
    for (t, row) in rows.iter().enumerate() {
        for (c, v) in row.iter().enumerate() {
            values[c * steps + t] = *v;
        }
    }
    DiscreteSignal::from_values(vars, steps, 1.0, values)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SplitRatios {
    pub train: f64,
    pub valid: f64,
    pub test: f64,
}

impl Default for SplitRatios {
    fn default() -> Self {
        Self {
            train: 0.7,
            valid: 0.2,
            test: 0.1,
        }
    }
}

impl SplitRatios {
    pub fn validate(&self) -> Result<()> {
        let r = [self.train, self.valid, self.test];
        if r.iter().any(|x| !(*x >= 0.0)) || !(self.train > 0.0) || (r.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return Err(Error::param("split ratios must be nonnegative, sum to 1, with train > 0"));
        }
        Ok(())
    }

    /// Window counts per split: floor for train and valid, the rest to test.
    /// A split that would leave train empty puts everything in train.
    pub fn counts(&self, windows: usize) -> (usize, usize, usize) {
        let tr = (windows as f64 * self.train + 1e-9).floor() as usize;
        let va = (windows as f64 * self.valid + 1e-9).floor() as usize;
        if tr == 0 {
            return (windows, 0, 0);
        }
        let va = va.min(windows - tr);
        (tr, va, windows - tr - va)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Valid,
    Test,
}

impl std::str::FromStr for Split {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "train" => Ok(Split::Train),
            "valid" | "validation" => Ok(Split::Valid),
            "test" => Ok(Split::Test),
            other => Err(Error::param(format!("unknown split {other:?}"))),
        }
    }
}

impl std::fmt::Display for Split {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Split::Train => "train",
            Split::Valid => "valid",
            Split::Test => "test",
        })
    }
}

/// Per-variable affine map onto [0, 1].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MinMaxScaler {
    pub min: Vec<f64>,
    /// max - min, or 1 for a constant variable.
    pub scale: Vec<f64>,
}

impl MinMaxScaler {
    pub fn fit(series: &DiscreteSignal, steps: std::ops::Range<usize>) -> Result<Self> {
        if steps.is_empty() || steps.end > series.len() {
            return Err(Error::shape("scaler range outside the series"));
        }
        let mut min = Vec::with_capacity(series.channels());
        let mut scale = Vec::with_capacity(series.channels());
        for ch in series.iter_channels() {
            let part = &ch[steps.clone()];
            let lo = part.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = part.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            min.push(lo);
            scale.push(if hi > lo { hi - lo } else { 1.0 });
        }
        Ok(Self { min, scale })
    }

    pub fn transform(&self, series: &DiscreteSignal) -> Result<DiscreteSignal> {
        if series.channels() != self.min.len() {
            return Err(Error::shape("scaler fitted on a different variable count"));
        }
        let mut out = series.clone();
        for c in 0..out.channels() {
            let (lo, s) = (self.min[c], self.scale[c]);
            out.channel_mut(c).iter_mut().for_each(|v| *v = (*v - lo) / s);
        }
        Ok(out)
    }

    pub fn inverse(&self, series: &DiscreteSignal) -> Result<DiscreteSignal> {
        if series.channels() != self.min.len() {
            return Err(Error::shape("scaler fitted on a different variable count"));
        }
        let mut out = series.clone();
        for c in 0..out.channels() {
            let (lo, s) = (self.min[c], self.scale[c]);
            out.channel_mut(c).iter_mut().for_each(|v| *v = *v * s + lo);
        }
        Ok(out)
    }
}

/// Sliding forecast windows over one scaled multivariate series.
///
/// Window `s` has input steps `s..s+O` and target steps `s+O..s+O+H`.
#[derive(Debug, Clone)]
pub struct ForecastDataset {
    pub series: DiscreteSignal,
    pub scaler: MinMaxScaler,
    pub observation: usize,
    pub horizon: usize,
    pub stride: usize,
    pub train: Vec<usize>,
    pub valid: Vec<usize>,
    pub test: Vec<usize>,
}

/// Chronological windowing; the scaler sees only the steps covered by train windows.
pub fn make_windows(
    raw: &DiscreteSignal,
    observation: usize,
    horizon: usize,
    stride: usize,
    ratios: SplitRatios,
) -> Result<ForecastDataset> {
    if observation == 0 || horizon == 0 || stride == 0 {
        return Err(Error::param("observation, horizon and stride must be positive"));
    }
    ratios.validate()?;
    let span = observation + horizon;
    if raw.len() < span {
        return Err(Error::SeriesTooShort {
            steps: raw.len(),
            needed: span,
        });
    }
    let starts: Vec<usize> = (0..=raw.len() - span).step_by(stride).collect();
    let (tr, va, _) = ratios.counts(starts.len());
    let train = starts[..tr].to_vec();
    let valid = starts[tr..tr + va].to_vec();
    let test = starts[tr + va..].to_vec();
    let covered = 0..train.last().map_or(span, |s| s + span);
    let scaler = MinMaxScaler::fit(raw, covered)?;
    Ok(ForecastDataset {
        series: scaler.transform(raw)?,
        scaler,
        observation,
        horizon,
        stride,
        train,
        valid,
        test,
    })
}

impl ForecastDataset {
    pub fn variables(&self) -> usize {
        self.series.channels()
    }

    pub fn windows(&self, split: Split) -> &[usize] {
        match split {
            Split::Train => &self.train,
            Split::Valid => &self.valid,
            Split::Test => &self.test,
        }
    }

    pub fn input(&self, start: usize) -> Result<DiscreteSignal> {
        self.series.slice(start..start + self.observation)
    }

    pub fn target(&self, start: usize) -> Result<DiscreteSignal> {
        let t = start + self.observation;
        self.series.slice(t..t + self.horizon)
    }

    pub fn inputs(&self, split: Split) -> Result<Vec<DiscreteSignal>> {
        self.windows(split).iter().map(|&s| self.input(s)).collect()
    }

    pub fn targets(&self, split: Split) -> Result<Vec<DiscreteSignal>> {
        self.windows(split).iter().map(|&s| self.target(s)).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SynthKind {
    MultiSine,
    ArNoise,
}

impl std::str::FromStr for SynthKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "multisine" => Ok(SynthKind::MultiSine),
            "arnoise" => Ok(SynthKind::ArNoise),
            other => Err(Error::param(format!("unknown synthetic kind {other:?}"))),
        }
    }
}

pub const DEFAULT_NOISE: f64 = 0.05;

/// a * sin(2 pi t / period + phase)
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Sinusoid {
    pub amplitude: f64,
    pub period: f64,
    pub phase: f64,
}

impl Sinusoid {
    pub fn at(&self, t: f64) -> f64 {
        self.amplitude * (std::f64::consts::TAU * t / self.period + self.phase).sin()
    }
}

#[derive(Debug, Clone)]
pub struct SynthSeries {
    pub series: DiscreteSignal,
    /// Sinusoids of each variable (empty for autoregressive series).
    pub components: Vec<Vec<Sinusoid>>,
    /// Lag-1 and lag-2 coefficients of each variable (empty for sine series).
    pub ar_coefficients: Vec<[f64; 2]>,
}

pub fn synth_dataset(kind: SynthKind, variables: usize, steps: usize, seed: u64) -> Result<SynthSeries> {
    synth_dataset_with_noise(kind, variables, steps, DEFAULT_NOISE, seed)
}

/// Deterministic synthetic series. `noise` is the Gaussian noise std for
/// sine mixtures and the innovation std for the autoregressive kind.
pub fn synth_dataset_with_noise(
    kind: SynthKind,
    variables: usize,
    steps: usize,
    noise: f64,
    seed: u64,
) -> Result<SynthSeries> {
    if variables == 0 || steps == 0 {
        return Err(Error::param("synthetic series needs variables and steps"));
    }
    if !(noise >= 0.0 && noise.is_finite()) {
        return Err(Error::param("noise must be nonnegative"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let gauss = Normal::new(0.0, 1.0).expect("unit normal");
    let mut values = vec![0.0; variables * steps];
    let mut components = Vec::new();
    let mut ar_coefficients = Vec::new();
    match kind {
        SynthKind::MultiSine => {
            for v in 0..variables {
                let count = rng.random_range(2..=4);
                let sines: Vec<Sinusoid> = (0..count)
                    .map(|_| Sinusoid {
                        amplitude: rng.random_range(0.5..=1.5),
                        period: rng.random_range(8.0..=64.0),
                        phase: rng.random_range(0.0..std::f64::consts::TAU),
                    })
                    .collect();
                for t in 0..steps {
                    let clean: f64 = sines.iter().map(|s| s.at(t as f64)).sum();
                    values[v * steps + t] = clean + noise * gauss.sample(&mut rng);
                }
                components.push(sines);
            }
        }
        SynthKind::ArNoise => {
            const BURN_IN: usize = 200;
            for v in 0..variables {
                let r: f64 = rng.random_range(0.5..=0.95);
                let theta: f64 = rng.random_range(0.1..std::f64::consts::PI - 0.1);
                let a = [2.0 * r * theta.cos(), -r * r];
                let mut x1: f64 = gauss.sample(&mut rng);
                let mut x2: f64 = gauss.sample(&mut rng);
                for t in 0..BURN_IN + steps {
                    let x = a[0] * x1 + a[1] * x2 + noise * gauss.sample(&mut rng);
                    x2 = x1;
                    x1 = x;
                    if t >= BURN_IN {
                        values[v * steps + t - BURN_IN] = x;
                    }
                }
                ar_coefficients.push(a);
            }
        }
    }
    Ok(SynthSeries {
        series: DiscreteSignal::from_values(variables, steps, 1.0, values)?,
        components,
        ar_coefficients,
    })
}
