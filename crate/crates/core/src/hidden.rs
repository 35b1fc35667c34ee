//! Hidden-layer construction: temporal parameters, weight criteria and normalisers.

use nalgebra::DMatrix;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{NormalizerKind, SswimConfig, WeightCriterion};
use crate::error::{Error, Result};
use crate::kernels::{evaluate_kernel, KernelFamily, KernelSpec, PlacedKernel};
use crate::linalg::{canonical_sign, sym_eigen};
use crate::network::{psp_channels, weighted_drive, LayerInput, LayerParams, Refractory};
use crate::rng::stream;
use crate::sampling::PairProbabilities;
use crate::signal::DiscreteSignal;
use crate::stats::{VoltageStats, VoltageStatsAccumulator};

#[derive(Debug, Clone, PartialEq)]
pub struct TemporalAssignment {
    pub delay: Vec<f64>,
    pub support: Vec<f64>,
    pub refractory_support: Vec<f64>,
}

/// Delays spread linearly over [0, l tau_max / L), supports cycling between the bounds.
///
/// `layer` is 1-based.
#[allow(clippy::too_many_arguments)]
pub fn temporal_assignment(
    layer: usize,
    layers: usize,
    neurons: usize,
    observation: usize,
    horizon: usize,
    support_min: f64,
    support_max: f64,
    cycle: usize,
) -> Result<TemporalAssignment> {
    if layer == 0 || layer > layers {
        return Err(Error::param(format!("layer {layer} outside 1..={layers}")));
    }
    if !(support_min > 0.0 && support_max >= support_min) {
        return Err(Error::param("supports need 0 < min <= max"));
    }
    if cycle < 2 {
        return Err(Error::param("support cycle must be at least 2"));
    }
    let tau_max = if observation >= horizon {
        observation as f64 / 2.0
    } else {
        horizon as f64
    };
    let span = layer as f64 * tau_max / layers as f64;
    let delay = (0..neurons).map(|i| i as f64 / neurons as f64 * span).collect();
    let support = (0..neurons)
        .map(|i| (i % cycle) as f64 / (cycle - 1) as f64 * (support_max - support_min) + support_min)
        .collect();
    Ok(TemporalAssignment {
        delay,
        support,
        refractory_support: vec![support_min; neurons],
    })
}

fn difference_gram(psi1: &DiscreteSignal, psi2: &DiscreteSignal) -> Result<DMatrix<f64>> {
    check_pair(psi1, psi2)?;
    let d = psi1.channels();
    let diffs: Vec<Vec<f64>> = (0..d)
        .map(|j| psi1.channel(j).iter().zip(psi2.channel(j)).map(|(a, b)| a - b).collect())
        .collect();
    let dt = psi1.dt();
    Ok(DMatrix::from_fn(d, d, |r, c| {
        diffs[r].iter().zip(&diffs[c]).map(|(a, b)| a * b).sum::<f64>() * dt
    }))
}

fn cross_gram(psi1: &DiscreteSignal, psi2: &DiscreteSignal) -> Result<DMatrix<f64>> {
    check_pair(psi1, psi2)?;
    let d = psi1.channels();
    let dt = psi1.dt();
    let g = DMatrix::from_fn(d, d, |r, c| {
        psi1.channel(r).iter().zip(psi2.channel(c)).map(|(a, b)| a * b).sum::<f64>() * dt
    });
    Ok((&g + g.transpose()) * 0.5)
}

fn check_pair(a: &DiscreteSignal, b: &DiscreteSignal) -> Result<()> {
    if a.channels() != b.channels() || a.len() != b.len() {
        return Err(Error::shape("PSP pair differs in shape"));
    }
    Ok(())
}

/// A^dist = sum_t (psi1 - psi2)(psi1 - psi2)^T dt.
pub fn dist_matrix(psi1: &DiscreteSignal, psi2: &DiscreteSignal) -> Result<DMatrix<f64>> {
    difference_gram(psi1, psi2)
}

/// A^dot = 1/2 sum_t (psi1 psi2^T + psi2 psi1^T) dt.
pub fn dot_matrix(psi1: &DiscreteSignal, psi2: &DiscreteSignal) -> Result<DMatrix<f64>> {
    cross_gram(psi1, psi2)
}

fn extremal_eigenvector(a: &DMatrix<f64>, largest: bool) -> Result<Vec<f64>> {
    let e = sym_eigen(a).ok_or(Error::EigenNonConvergence(0))?;
    let k = if largest { a.nrows() - 1 } else { 0 };
    let mut v: Vec<f64> = e.vectors.column(k).iter().copied().collect();
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    v.iter_mut().for_each(|x| *x /= norm);
    canonical_sign(&mut v);
    Ok(v)
}

/// Unit direction maximising the separation of the two PSP traces.
pub fn weight_dist(psi1: &DiscreteSignal, psi2: &DiscreteSignal) -> Result<Vec<f64>> {
    let a = dist_matrix(psi1, psi2)?;
    if a.iter().all(|&x| x == 0.0) {
        return Err(Error::TrivialPair);
    }
    extremal_eigenvector(&a, true)
}

/// Unit direction minimising the inner product of the two voltage traces.
/// A vanishing cross-Gram yields e_1.
pub fn weight_dot(psi1: &DiscreteSignal, psi2: &DiscreteSignal) -> Result<Vec<f64>> {
    let a = dot_matrix(psi1, psi2)?;
    if a.iter().all(|&x| x == 0.0) {
        let mut e = vec![0.0; a.nrows()];
        e[0] = 1.0;
        return Ok(e);
    }
    extremal_eigenvector(&a, false)
}

/// Standard normal draw scaled to unit length.
pub fn weight_random<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 0.0 {
            return v.into_iter().map(|x| x / norm).collect();
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormalizerResult {
    pub alpha: f64,
    pub beta: f64,
    /// Spike-cost numerator; the layer stores gamma / q(0).
    pub gamma: f64,
    pub silence_shift: f64,
}

fn silence_shift(scaled_max: f64, eps: f64) -> f64 {
    if scaled_max < 1.0 {
        (1.0 + eps) - scaled_max
    } else {
        0.0
    }
}

/// Prescribes the expected temporal mean and std of the voltage.
pub fn normalize_ms(
    stats: &VoltageStats,
    target_mean: f64,
    target_std: f64,
    eps_sc: f64,
    std_floor: f64,
    neuron: usize,
) -> Result<NormalizerResult> {
    if !(stats.std >= std_floor) {
        return Err(Error::DegenerateNeuron {
            neuron,
            std: stats.std,
        });
    }
    let alpha = target_std / stats.std;
    let beta0 = target_mean - target_std * stats.mean / stats.std;
    let shift = silence_shift(alpha * stats.max + beta0, eps_sc);
    Ok(NormalizerResult {
        alpha,
        beta: beta0 + shift,
        gamma: -3.0 * target_std,
        silence_shift: shift,
    })
}

/// Places the expected mean `z` expected standard deviations below threshold.
pub fn normalize_fl(stats: &VoltageStats, z: f64, eps_sc: f64) -> NormalizerResult {
    let beta0 = 1.0 - z * stats.std - stats.mean;
    let shift = silence_shift(stats.max + beta0, eps_sc);
    NormalizerResult {
        alpha: 1.0,
        beta: beta0 + shift,
        gamma: -3.0 * stats.std,
        silence_shift: shift,
    }
}

/// How one neuron was constructed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NeuronRecord {
    pub pair: (usize, usize),
    pub attempts: usize,
    pub stats: VoltageStats,
    pub normalizer: NormalizerResult,
}

/// Everything `build_hidden_layer` needs besides the data.
#[derive(Debug, Clone)]
pub struct HiddenLayerSpec<'a> {
    /// 1-based layer index and total hidden layer count.
    pub layer: usize,
    pub layers: usize,
    pub neurons: usize,
    pub observation: usize,
    pub horizon: usize,
    pub dt: f64,
    pub pspk: KernelFamily,
    pub rfk: KernelFamily,
    pub config: &'a SswimConfig,
    pub seed: u64,
}

/// Voltage statistics of <w, psi(t)> over every batch sample for one neuron's kernel.
pub fn projected_stats(
    kernel: &PlacedKernel,
    w: &[f64],
    inputs: &[LayerInput<'_>],
    dt: f64,
    grid_len: usize,
) -> Result<VoltageStats> {
    let taps = kernel.taps(dt);
    let mut acc = VoltageStatsAccumulator::new();
    let mut buf = vec![0.0; grid_len];
    for x in inputs {
        buf.iter_mut().for_each(|v| *v = 0.0);
        weighted_drive(&taps, w, *x, dt, 0..grid_len, &mut buf);
        acc.push_trace(&buf);
    }
    acc.finish()
}

fn build_neuron(
    spec: &HiddenLayerSpec<'_>,
    i: usize,
    kernel: &PlacedKernel,
    inputs: &[LayerInput<'_>],
    pairs: &PairProbabilities,
) -> Result<(Vec<f64>, NeuronRecord)> {
    let cfg = spec.config;
    let grid = spec.observation + spec.horizon;
    let width = inputs[0].width();
    let mut rng: ChaCha8Rng = stream(spec.seed, i as u64);
    let mut last = None;
    for attempt in 1..=cfg.max_resamples + 1 {
        let (n, m) = pairs.sample(&mut rng);
        let w = match cfg.weight {
            WeightCriterion::Random => Ok(weight_random(width, &mut rng)),
            crit => {
                let p1 = psp_channels(kernel, inputs[n], spec.dt, 0..grid)?;
                let p2 = psp_channels(kernel, inputs[m], spec.dt, 0..grid)?;
                if crit == WeightCriterion::Dist {
                    weight_dist(&p1, &p2)
                } else {
                    weight_dot(&p1, &p2)
                }
            }
        };
        let w = match w {
            Ok(w) => w,
            Err(e @ (Error::TrivialPair | Error::EigenNonConvergence(_))) => {
                last = Some(e);
                continue;
            }
            Err(e) => return Err(e),
        };
        let stats = projected_stats(kernel, &w, inputs, spec.dt, grid)?;
        let norm = match cfg.normalizer {
            NormalizerKind::Ms => normalize_ms(
                &stats,
                cfg.target_mean,
                cfg.target_std,
                cfg.silence_epsilon,
                cfg.std_floor,
                i,
            ),
            NormalizerKind::Fl => Ok(normalize_fl(&stats, cfg.fluctuation_z, cfg.silence_epsilon)),
        };
        match norm {
            Ok(norm) => {
                let record = NeuronRecord {
                    pair: (n, m),
                    attempts: attempt,
                    stats,
                    normalizer: norm,
                };
                return Ok((w, record));
            }
            Err(e @ Error::DegenerateNeuron { .. }) => last = Some(e),
            Err(e) => return Err(e),
        }
    }
    Err(Error::ResampleExhausted {
        neuron: i,
        attempts: cfg.max_resamples + 1,
        last: Box::new(last.expect("at least one attempt")),
    })
}

/// Samples every neuron of one hidden layer from pairs of the initialisation batch.
pub fn build_hidden_layer(
    spec: &HiddenLayerSpec<'_>,
    inputs: &[LayerInput<'_>],
    pairs: &PairProbabilities,
) -> Result<(LayerParams, Vec<NeuronRecord>)> {
    if inputs.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if pairs.samples != inputs.len() {
        return Err(Error::shape("pair distribution does not match the batch"));
    }
    let cfg = spec.config;
    let ta = temporal_assignment(
        spec.layer,
        spec.layers,
        spec.neurons,
        spec.observation,
        spec.horizon,
        cfg.hidden_support_min,
        cfg.hidden_support_max,
        cfg.hidden_support_cycle,
    )?;
    let q0 = evaluate_kernel(spec.rfk, 0.0);
    if q0 == 0.0 {
        return Err(Error::param("refractory kernel vanishes at 0"));
    }
    let built: Vec<(Vec<f64>, NeuronRecord)> = (0..spec.neurons)
        .into_par_iter()
        .map(|i| {
            let kernel = KernelSpec::pspk(spec.pspk).place(ta.delay[i], ta.support[i])?;
            build_neuron(spec, i, &kernel, inputs, pairs)
        })
        .collect::<Result<_>>()?;
    let mut weights = Vec::with_capacity(spec.neurons);
    let mut bias = Vec::with_capacity(spec.neurons);
    let mut cost = Vec::with_capacity(spec.neurons);
    let mut records = Vec::with_capacity(spec.neurons);
    for (w, rec) in built {
        weights.push(w.iter().map(|x| rec.normalizer.alpha * x).collect());
        bias.push(rec.normalizer.beta);
        cost.push(rec.normalizer.gamma / q0);
        records.push(rec);
    }
    let layer = LayerParams {
        pspk: spec.pspk,
        weights,
        bias,
        delay: ta.delay,
        support: ta.support,
        refractory: Some(Refractory {
            kernel: spec.rfk,
            spike_cost: cost,
            support: ta.refractory_support,
        }),
    };
    layer.validate()?;
    Ok((layer, records))
}
