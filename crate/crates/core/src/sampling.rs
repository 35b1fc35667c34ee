//! Embedding pseudometrics, pair probabilities and the entropy criterion.

use std::fmt;
use std::ops::Range;
use std::str::FromStr;

use rand::Rng;
use rayon::prelude::*;
use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::PlacedKernel;
use crate::network::{psp_channels, LayerInput};
use crate::signal::DiscreteSignal;

/// Channels whose centred norm is at or below this are mapped to zero by `Cos`.
const COS_ZERO: f64 = 1e-12;
/// Fourier bins below this fraction of the channel norm have no defined phase.
const PHASE_ZERO: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum EmbeddingSpec {
    L2,
    Cos,
    Mag,
    Phase,
    /// Keeps DFT bins whose folded frequency min(k, n - k) lies in [lo, hi].
    Band { lo: usize, hi: usize },
}

pub const DEFAULT_EMBEDDINGS: [EmbeddingSpec; 5] = [
    EmbeddingSpec::L2,
    EmbeddingSpec::Cos,
    EmbeddingSpec::Mag,
    EmbeddingSpec::Phase,
    EmbeddingSpec::Band { lo: 3, hi: 64 },
];

impl fmt::Display for EmbeddingSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EmbeddingSpec::L2 => f.write_str("l2"),
            EmbeddingSpec::Cos => f.write_str("cos"),
            EmbeddingSpec::Mag => f.write_str("mag"),
            EmbeddingSpec::Phase => f.write_str("phase"),
            EmbeddingSpec::Band { lo, hi } => write!(f, "band:{lo}:{hi}"),
        }
    }
}

impl FromStr for EmbeddingSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim().to_ascii_lowercase();
        match s.as_str() {
            "l2" => return Ok(EmbeddingSpec::L2),
            "cos" => return Ok(EmbeddingSpec::Cos),
            "mag" => return Ok(EmbeddingSpec::Mag),
            "phase" => return Ok(EmbeddingSpec::Phase),
            _ => {}
        }
        let parts: Vec<&str> = s.split(':').collect();
        if let ["band", lo, hi] = parts.as_slice() {
            let lo: usize = lo
                .parse()
                .map_err(|_| Error::param(format!("bad band lower bin in {s:?}")))?;
            let hi: usize = hi
                .parse()
                .map_err(|_| Error::param(format!("bad band upper bin in {s:?}")))?;
            if lo > hi {
                return Err(Error::param(format!("empty band {s:?}")));
            }
            return Ok(EmbeddingSpec::Band { lo, hi });
        }
        Err(Error::param(format!(
            "unknown embedding {s:?} (expected l2, cos, mag, phase or band:lo:hi)"
        )))
    }
}

impl TryFrom<String> for EmbeddingSpec {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<EmbeddingSpec> for String {
    fn from(e: EmbeddingSpec) -> String {
        e.to_string()
    }
}

fn unitary_dft(planner: &mut FftPlanner<f64>, x: &[f64]) -> Vec<Complex64> {
    let mut buf: Vec<Complex64> = x.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    if buf.is_empty() {
        return buf;
    }
    planner.plan_fft_forward(buf.len()).process(&mut buf);
    let scale = 1.0 / (buf.len() as f64).sqrt();
    buf.iter_mut().for_each(|c| *c *= scale);
    buf
}

fn embed_with(spec: EmbeddingSpec, f: &DiscreteSignal, planner: &mut FftPlanner<f64>) -> Vec<Complex64> {
    let n = f.len();
    let mut out = Vec::with_capacity(f.channels() * n);
    for ch in f.iter_channels() {
        match spec {
            EmbeddingSpec::L2 => out.extend(ch.iter().map(|&v| Complex64::new(v, 0.0))),
            EmbeddingSpec::Cos => {
                let norm = (ch.iter().map(|v| v * v).sum::<f64>() * f.dt()).sqrt();
                if norm <= COS_ZERO {
                    out.extend(std::iter::repeat_n(Complex64::new(0.0, 0.0), n));
                } else {
                    out.extend(ch.iter().map(|&v| Complex64::new(v / norm, 0.0)));
                }
            }
            EmbeddingSpec::Mag => {
                out.extend(unitary_dft(planner, ch).into_iter().map(|c| Complex64::new(c.norm(), 0.0)))
            }
            EmbeddingSpec::Phase => {
                let norm = ch.iter().map(|v| v * v).sum::<f64>().sqrt();
                let floor = PHASE_ZERO * norm;
                out.extend(unitary_dft(planner, ch).into_iter().map(|c| {
                    let r = c.norm();
                    if r <= floor || r == 0.0 {
                        Complex64::new(0.0, 0.0)
                    } else {
                        c / r
                    }
                }))
            }
            EmbeddingSpec::Band { lo, hi } => {
                out.extend(unitary_dft(planner, ch).into_iter().enumerate().map(|(k, c)| {
                    let folded = k.min(n - k);
                    if folded >= lo && folded <= hi {
                        c
                    } else {
                        Complex64::new(0.0, 0.0)
                    }
                }))
            }
        }
    }
    out
}

/// Channel-wise embedding; Fourier variants use the unitary circular DFT.
pub fn embed(spec: EmbeddingSpec, f: &DiscreteSignal) -> Vec<Complex64> {
    embed_with(spec, f, &mut FftPlanner::new())
}

/// An embedding applied to a fixed window, with spike inputs lifted by a kernel first.
#[derive(Debug, Clone)]
pub struct Pseudometric {
    pub embedding: EmbeddingSpec,
    pub window: Range<usize>,
    /// Kernel convolved with spike trains before embedding.
    pub lift: Option<PlacedKernel>,
    pub dt: f64,
}

impl Pseudometric {
    pub fn new(embedding: EmbeddingSpec, window: Range<usize>, dt: f64) -> Self {
        Self {
            embedding,
            window,
            lift: None,
            dt,
        }
    }

    pub fn with_lift(mut self, kernel: PlacedKernel) -> Self {
        self.lift = Some(kernel);
        self
    }

    /// Centred real-valued representation of `x` on the window.
    pub fn representation(&self, x: LayerInput<'_>) -> Result<DiscreteSignal> {
        let sig = match x {
            LayerInput::Dense(s) => {
                let mut out = DiscreteSignal::zeros(s.channels(), self.window.len(), self.dt);
                for c in 0..s.channels() {
                    let src = s.channel(c);
                    for (k, t) in self.window.clone().enumerate() {
                        if t < src.len() {
                            out.set(c, k, src[t]);
                        }
                    }
                }
                out
            }
            LayerInput::Spikes(_) => {
                let lift = self
                    .lift
                    .ok_or_else(|| Error::param("spike input needs a lifting kernel"))?;
                psp_channels(&lift, x, self.dt, self.window.clone())?
            }
        };
        Ok(sig.centered())
    }

    pub fn embed(&self, x: LayerInput<'_>) -> Result<Vec<Complex64>> {
        Ok(embed(self.embedding, &self.representation(x)?))
    }

    pub fn distance(&self, a: LayerInput<'_>, b: LayerInput<'_>) -> Result<f64> {
        let ea = self.embed(a)?;
        let eb = self.embed(b)?;
        if ea.len() != eb.len() {
            return Err(Error::shape("pseudometric arguments differ in shape"));
        }
        Ok(embedded_distance(&ea, &eb, self.dt))
    }
}

#[inline]
pub fn embedded_distance(a: &[Complex64], b: &[Complex64], dt: f64) -> f64 {
    let s: f64 = a.iter().zip(b).map(|(x, y)| (x - y).norm_sqr()).sum();
    (s * dt).sqrt()
}

/// Embeddings of many samples plus the min-norm validity flags of their representations.
#[derive(Debug, Clone)]
pub struct EmbeddedSet {
    pub embeddings: Vec<Vec<Complex64>>,
    pub dt: f64,
}

/// Centred representations of every sample under `metric`'s window and lift.
pub fn representations(metric: &Pseudometric, xs: &[LayerInput<'_>]) -> Result<Vec<DiscreteSignal>> {
    xs.par_iter().map(|x| metric.representation(*x)).collect()
}

pub fn embed_all(spec: EmbeddingSpec, reps: &[DiscreteSignal]) -> EmbeddedSet {
    let embeddings = reps
        .par_iter()
        .map_init(FftPlanner::new, |p, r| embed_with(spec, r, p))
        .collect();
    EmbeddedSet {
        embeddings,
        dt: reps.first().map_or(1.0, |r| r.dt()),
    }
}

/// A sample is usable unless every channel's centred norm is below `min_norm`.
pub fn valid_samples(reps: &[DiscreteSignal], min_norm: f64) -> Vec<bool> {
    reps.iter()
        .map(|r| r.channel_norms().iter().any(|&n| n >= min_norm))
        .collect()
}

/// Position of pair (n, m), m < n, in the flattened strict lower triangle.
#[inline]
pub fn flat_index(n: usize, m: usize) -> usize {
    debug_assert!(m < n);
    n * (n - 1) / 2 + m
}

/// Inverse of `flat_index`.
pub fn unflatten(flat: usize) -> (usize, usize) {
    let mut n = ((1.0 + (1.0 + 8.0 * flat as f64).sqrt()) / 2.0).floor() as usize;
    while n * (n - 1) / 2 > flat {
        n -= 1;
    }
    while (n + 1) * n / 2 <= flat {
        n += 1;
    }
    (n, flat - n * (n - 1) / 2)
}

/// Pairwise distances over the strict lower triangle.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceMatrix {
    pub samples: usize,
    pub values: Vec<f64>,
}

impl DistanceMatrix {
    pub fn from_embeddings(set: &EmbeddedSet) -> Self {
        let e = &set.embeddings;
        let rows: Vec<Vec<f64>> = (0..e.len())
            .into_par_iter()
            .map(|n| (0..n).map(|m| embedded_distance(&e[n], &e[m], set.dt)).collect())
            .collect();
        Self {
            samples: e.len(),
            values: rows.concat(),
        }
    }

    pub fn get(&self, n: usize, m: usize) -> f64 {
        match n.cmp(&m) {
            std::cmp::Ordering::Equal => 0.0,
            std::cmp::Ordering::Greater => self.values[flat_index(n, m)],
            std::cmp::Ordering::Less => self.values[flat_index(m, n)],
        }
    }
}

/// Normalised sampling distribution over sample pairs.
#[derive(Debug, Clone)]
pub struct PairProbabilities {
    pub samples: usize,
    /// Normalised entries in flat lower-triangular order.
    pub probs: Vec<f64>,
    /// Sum of the raw ratios before normalisation.
    pub normalizer: f64,
    cumulative: Vec<f64>,
}

impl PairProbabilities {
    /// d_out / (d_in + eps) per pair, zeroed for pairs touching an invalid sample.
    pub fn new(d_in: &DistanceMatrix, d_out: &DistanceMatrix, valid: &[bool], eps: f64) -> Result<Self> {
        if d_in.samples != d_out.samples || valid.len() != d_in.samples {
            return Err(Error::shape("distance matrices and validity flags disagree in size"));
        }
        if d_in.samples < 2 {
            return Err(Error::param("need at least two samples to form a pair"));
        }
        if eps < 0.0 {
            return Err(Error::param("eps must be nonnegative"));
        }
        let mut raw = Vec::with_capacity(d_in.values.len());
        for n in 1..d_in.samples {
            for m in 0..n {
                let f = flat_index(n, m);
                let p = if valid[n] && valid[m] {
                    let denom = d_in.values[f] + eps;
                    if denom > 0.0 {
                        d_out.values[f] / denom
                    } else if d_out.values[f] > 0.0 {
                        f64::INFINITY
                    } else {
                        0.0
                    }
                } else {
                    0.0
                };
                raw.push(p);
            }
        }
        Self::from_raw(d_in.samples, raw)
    }

    /// Normalises nonnegative raw weights given in flat order.
    pub fn from_raw(samples: usize, mut raw: Vec<f64>) -> Result<Self> {
        if raw.len() != samples * samples.saturating_sub(1) / 2 {
            return Err(Error::shape("raw pair weights do not match the sample count"));
        }
        if raw.iter().any(|p| p.is_nan() || *p < 0.0) {
            return Err(Error::param("pair weights must be nonnegative"));
        }
        if raw.iter().any(|p| p.is_infinite()) {
            // Pairs with identical inputs but distinct targets dominate every finite ratio.
            raw.iter_mut().for_each(|p| *p = if p.is_infinite() { 1.0 } else { 0.0 });
        }
        let total: f64 = raw.iter().sum();
        if !(total > 0.0) {
            return Err(Error::DegenerateDistribution);
        }
        let mut cumulative = Vec::with_capacity(raw.len());
        let mut acc = 0.0;
        for p in &raw {
            acc += p;
            cumulative.push(acc);
        }
        let probs = raw.iter().map(|p| p / total).collect();
        Ok(Self {
            samples,
            probs,
            normalizer: total,
            cumulative,
        })
    }

    pub fn get(&self, n: usize, m: usize) -> f64 {
        if n > m {
            self.probs[flat_index(n, m)]
        } else if m > n {
            self.probs[flat_index(m, n)]
        } else {
            0.0
        }
    }

    /// Draws (n, m) with n > m proportionally to its entry.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> (usize, usize) {
        let total = *self.cumulative.last().expect("nonempty");
        let u = rng.random::<f64>() * total;
        let k = self.cumulative.partition_point(|&c| c <= u);
        let k = if k < self.cumulative.len() {
            k
        } else {
            self.probs.iter().rposition(|&p| p > 0.0).unwrap_or(0)
        };
        unflatten(k)
    }

    pub fn entropy(&self) -> f64 {
        shannon_entropy(&self.probs)
    }
}

pub fn sample_pair<R: Rng + ?Sized>(p: &PairProbabilities, rng: &mut R) -> (usize, usize) {
    p.sample(rng)
}

/// Natural-log entropy with 0 log 0 = 0.
pub fn shannon_entropy(p: &[f64]) -> f64 {
    let h: f64 = p
        .iter()
        .filter(|&&x| x > 0.0)
        .map(|&x| -x * x.ln())
        .sum();
    h.max(0.0)
}

/// Entropy of every (input, output) combination, row-major over inputs.
#[derive(Debug, Clone)]
pub struct MetricSelection {
    pub input: usize,
    pub output: usize,
    pub entropies: Vec<Vec<Option<f64>>>,
}

/// Picks the (input, output) pair minimising the pair-distribution entropy.
///
/// Combinations whose distribution is degenerate are skipped. With a floor,
/// combinations below it are ignored unless nothing else remains.
pub fn select_metrics(
    inputs: &[DistanceMatrix],
    outputs: &[DistanceMatrix],
    valid: &[bool],
    eps: f64,
    min_entropy: Option<f64>,
) -> Result<MetricSelection> {
    if inputs.is_empty() || outputs.is_empty() {
        return Err(Error::param("metric candidate lists must be nonempty"));
    }
    let mut entropies = vec![vec![None; outputs.len()]; inputs.len()];
    for (a, d_in) in inputs.iter().enumerate() {
        for (b, d_out) in outputs.iter().enumerate() {
            match PairProbabilities::new(d_in, d_out, valid, eps) {
                Ok(p) => entropies[a][b] = Some(p.entropy()),
                Err(Error::DegenerateDistribution) => {}
                Err(e) => return Err(e),
            }
        }
    }
    let pick = |floor: f64| -> Option<(usize, usize)> {
        let mut best: Option<(usize, usize, f64)> = None;
        for (a, row) in entropies.iter().enumerate() {
            for (b, h) in row.iter().enumerate() {
                if let Some(h) = *h {
                    if h >= floor && best.is_none_or(|(_, _, bh)| h < bh) {
                        best = Some((a, b, h));
                    }
                }
            }
        }
        best.map(|(a, b, _)| (a, b))
    };
    let chosen = min_entropy
        .and_then(pick)
        .or_else(|| pick(f64::NEG_INFINITY))
        .ok_or(Error::DegenerateDistribution)?;
    Ok(MetricSelection {
        input: chosen.0,
        output: chosen.1,
        entropies,
    })
}
