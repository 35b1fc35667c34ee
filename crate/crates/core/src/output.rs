//! Output-layer fitting: delays by cross-correlation, supports by QR residual
//! search, weights by batched ridge normal equations.

use std::ops::Range;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::DelayAggregation;
use crate::error::{Error, Result};
use crate::kernels::{kernel_peak_offset, KernelFamily, KernelSpec, Taps};
use crate::linalg::{gemm_tn_acc, qr_residuals, sym_eigen, syrk_acc, QrResiduals};
use crate::network::place_taps;
use crate::signal::{DiscreteSignal, SpikeTrainSet};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DelayEstimate {
    pub per_output: Vec<f64>,
    pub aggregate: f64,
    pub aggregation: DelayAggregation,
    /// Aggregated |C(tau)| for tau in [0, O), per output.
    pub correlation: Vec<Vec<f64>>,
}

fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

pub fn aggregate_delays(values: &[f64], how: DelayAggregation) -> f64 {
    match how {
        DelayAggregation::Median => median(values),
        DelayAggregation::Min => values.iter().copied().fold(f64::INFINITY, f64::min),
    }
}

/// Per-output delay maximising sum_n sum_j |sum_{t_f in T_j^n} y~_i^n(t_f + tau)|.
///
/// `targets[n]` holds output channels on the window starting at step `start`;
/// each channel is centred before correlating.
pub fn estimate_delays(
    spikes: &[&SpikeTrainSet],
    targets: &[DiscreteSignal],
    start: usize,
    observation: usize,
    pspk: KernelFamily,
    aggregation: DelayAggregation,
) -> Result<DelayEstimate> {
    if spikes.is_empty() || spikes.len() != targets.len() {
        return Err(Error::shape("delay estimation needs one target per spike set"));
    }
    if observation == 0 {
        return Err(Error::EmptyGrid);
    }
    if spikes.iter().all(|s| s.total_spikes() == 0) {
        return Err(Error::SilentNetwork);
    }
    let d_out = targets[0].channels();
    let h = targets[0].len();
    let partial: Vec<Vec<Vec<f64>>> = spikes
        .par_iter()
        .zip(targets.par_iter())
        .map(|(s, y)| {
            let y = y.centered();
            let mut agg = vec![vec![0.0; observation]; d_out];
            let mut c = vec![0.0; observation];
            for (i, acc) in agg.iter_mut().enumerate() {
                let yi = y.channel(i);
                for train in s.trains() {
                    if train.is_empty() {
                        continue;
                    }
                    c.iter_mut().for_each(|v| *v = 0.0);
                    for &tf in train {
                        // tau with start <= tf + tau < start + h, 0 <= tau < O
                        let lo = start.saturating_sub(tf);
                        let hi = (start + h).saturating_sub(tf).min(observation);
                        for tau in lo..hi {
                            c[tau] += yi[tf + tau - start];
                        }
                    }
                    for (a, v) in acc.iter_mut().zip(&c) {
                        *a += v.abs();
                    }
                }
            }
            agg
        })
        .collect();
    let mut correlation = vec![vec![0.0; observation]; d_out];
    for p in &partial {
        for (acc, v) in correlation.iter_mut().zip(p) {
            for (a, b) in acc.iter_mut().zip(v) {
                *a += b;
            }
        }
    }
    let peak = kernel_peak_offset(pspk);
    let per_output: Vec<f64> = correlation
        .iter()
        .map(|c| {
            let mut best = 0;
            for (k, &v) in c.iter().enumerate() {
                if v > c[best] {
                    best = k;
                }
            }
            (best as f64 - peak).clamp(0.0, (observation - 1) as f64)
        })
        .collect();
    let aggregate = aggregate_delays(&per_output, aggregation);
    Ok(DelayEstimate {
        per_output,
        aggregate,
        aggregation,
        correlation,
    })
}

/// Power-law spaced grid ((1 - (m-1)/N) a^(1/alpha) + ((m-1)/N) b^(1/alpha))^alpha, m = 1..N.
pub fn support_candidates(a: f64, b: f64, alpha: f64, count: usize) -> Result<Vec<f64>> {
    if !(a >= 0.0 && b > a && b.is_finite()) {
        return Err(Error::param(format!("support bounds need 0 <= a < b, got ({a}, {b})")));
    }
    if !(alpha >= 1.0) || count == 0 {
        return Err(Error::param("support grid needs alpha >= 1 and a positive count"));
    }
    let (ra, rb) = (a.powf(1.0 / alpha), b.powf(1.0 / alpha));
    Ok((0..count)
        .map(|k| {
            let f = k as f64 / count as f64;
            ((1.0 - f) * ra + f * rb).powf(alpha)
        })
        .collect())
}

/// Column-major augmented matrix [1 | PSP columns | targets] stacked over samples.
fn augmented_design(
    spikes: &[&SpikeTrainSet],
    targets: &[DiscreteSignal],
    window: &Range<usize>,
    taps: &Taps,
) -> DMatrix<f64> {
    let h = window.len();
    let n_hidden = spikes[0].neurons();
    let d_out = targets[0].channels();
    let rows = spikes.len() * h;
    let cols = 1 + n_hidden + d_out;
    let mut a = DMatrix::<f64>::zeros(rows, cols);
    a.column_mut(0).fill(1.0);
    {
        let data = a.as_mut_slice();
        for (n, (s, y)) in spikes.iter().zip(targets).enumerate() {
            let r0 = n * h;
            for j in 0..n_hidden {
                let col = &mut data[(1 + j) * rows + r0..(1 + j) * rows + r0 + h];
                for &tf in s.train(j) {
                    place_taps(col, window.start, taps, tf, 1.0);
                }
            }
            for c in 0..d_out {
                let col = &mut data[(1 + n_hidden + c) * rows + r0..(1 + n_hidden + c) * rows + r0 + h];
                col.copy_from_slice(y.channel(c));
            }
        }
    }
    a
}

/// Least-squares residuals of every output channel for one candidate support.
pub fn residual_for_candidate(
    spikes: &[&SpikeTrainSet],
    targets: &[DiscreteSignal],
    window: Range<usize>,
    delay: f64,
    support: f64,
    pspk: KernelFamily,
    dt: f64,
) -> Result<QrResiduals> {
    if spikes.is_empty() || spikes.len() != targets.len() {
        return Err(Error::shape("support search needs one target per spike set"));
    }
    if window.is_empty() {
        return Err(Error::EmptyGrid);
    }
    if targets.iter().any(|y| y.len() != window.len() || y.channels() != targets[0].channels()) {
        return Err(Error::shape("targets must cover the window with equal channel counts"));
    }
    let taps = KernelSpec::pspk(pspk).place(delay, support)?.taps(dt);
    let n_cols = 1 + spikes[0].neurons();
    Ok(qr_residuals(augmented_design(spikes, targets, &window, &taps), n_cols))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SupportSelection {
    pub candidates: Vec<f64>,
    pub chosen: Vec<f64>,
    pub chosen_index: Vec<usize>,
    /// residuals[c][i]: candidate c, output i.
    pub residuals: Vec<Vec<f64>>,
}

/// Per-output candidate with the smallest residual; near-ties go to the smaller support.
pub fn select_supports(
    spikes: &[&SpikeTrainSet],
    targets: &[DiscreteSignal],
    window: Range<usize>,
    delay: f64,
    candidates: &[f64],
    pspk: KernelFamily,
    dt: f64,
) -> Result<SupportSelection> {
    if candidates.is_empty() {
        return Err(Error::param("no support candidates"));
    }
    let results: Vec<QrResiduals> = candidates
        .par_iter()
        .map(|&s| residual_for_candidate(spikes, targets, window.clone(), delay, s, pspk, dt))
        .collect::<Result<_>>()?;
    let d_out = results[0].residual.len();
    let mut chosen_index = vec![0usize; d_out];
    for i in 0..d_out {
        let tol = 1e-12 * results[0].target_norm2[i].max(f64::MIN_POSITIVE);
        let mut best = results[0].residual[i];
        for (c, r) in results.iter().enumerate().skip(1) {
            if r.residual[i] < best - tol {
                best = r.residual[i];
                chosen_index[i] = c;
            }
        }
    }
    Ok(SupportSelection {
        candidates: candidates.to_vec(),
        chosen: chosen_index.iter().map(|&c| candidates[c]).collect(),
        chosen_index,
        residuals: results.into_iter().map(|r| r.residual).collect(),
    })
}

/// Running sums of D^T D, D^T y and ||y||^2 for outputs sharing one kernel.
#[derive(Debug, Clone, PartialEq)]
pub struct GramAccumulator {
    pub dim: usize,
    /// Output channels whose targets feed `rhs` columns, in order.
    pub outputs: Vec<usize>,
    /// dim x dim, row-major.
    pub gram: Vec<f64>,
    /// dim x outputs.len(), row-major.
    pub rhs: Vec<f64>,
    pub target_norm2: Vec<f64>,
    pub samples: usize,
}

impl GramAccumulator {
    pub fn new(dim: usize, outputs: Vec<usize>) -> Self {
        let k = outputs.len();
        Self {
            dim,
            outputs,
            gram: vec![0.0; dim * dim],
            rhs: vec![0.0; dim * k],
            target_norm2: vec![0.0; k],
            samples: 0,
        }
    }

    /// Adds `rows` design rows (row-major, width `dim`) with matching target rows (width k).
    pub fn add_rows(&mut self, design: &[f64], targets: &[f64], rows: usize) {
        let k = self.outputs.len();
        syrk_acc(&mut self.gram, design, rows, self.dim);
        gemm_tn_acc(&mut self.rhs, design, targets, rows, self.dim, k);
        for r in 0..rows {
            for c in 0..k {
                let v = targets[r * k + c];
                self.target_norm2[c] += v * v;
            }
        }
    }

    pub fn merge(&mut self, other: &GramAccumulator) {
        debug_assert_eq!(self.dim, other.dim);
        for (a, b) in self.gram.iter_mut().zip(&other.gram) {
            *a += b;
        }
        for (a, b) in self.rhs.iter_mut().zip(&other.rhs) {
            *a += b;
        }
        for (a, b) in self.target_norm2.iter_mut().zip(&other.target_norm2) {
            *a += b;
        }
        self.samples += other.samples;
    }

    pub fn gram_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.dim, self.dim, &self.gram)
    }

    pub fn rhs_column(&self, c: usize) -> DVector<f64> {
        let k = self.outputs.len();
        DVector::from_fn(self.dim, |r, _| self.rhs[r * k + c])
    }

    /// Largest |F - F^T| entry.
    pub fn asymmetry(&self) -> f64 {
        let n = self.dim;
        let mut worst: f64 = 0.0;
        for r in 0..n {
            for c in r + 1..n {
                worst = worst.max((self.gram[r * n + c] - self.gram[c * n + r]).abs());
            }
        }
        worst
    }
}

/// Output kernels grouped by identical (delay, support).
#[derive(Debug, Clone, PartialEq)]
pub struct KernelGroup {
    pub delay: f64,
    pub support: f64,
    pub outputs: Vec<usize>,
}

pub fn group_kernels(delays: &[f64], supports: &[f64]) -> Vec<KernelGroup> {
    let mut groups: Vec<KernelGroup> = Vec::new();
    for (i, (&d, &s)) in delays.iter().zip(supports).enumerate() {
        match groups.iter_mut().find(|g| g.delay == d && g.support == s) {
            Some(g) => g.outputs.push(i),
            None => groups.push(KernelGroup {
                delay: d,
                support: s,
                outputs: vec![i],
            }),
        }
    }
    groups
}

/// Streams samples through per-group accumulators in batches of `batch_size`.
///
/// `source(n)` yields the last hidden layer's spikes and the targets on `window`.
#[allow(clippy::too_many_arguments)]
pub fn accumulate_normal_equations<F>(
    count: usize,
    source: F,
    groups: &[KernelGroup],
    pspk: KernelFamily,
    hidden: usize,
    window: Range<usize>,
    dt: f64,
    batch_size: usize,
) -> Result<Vec<GramAccumulator>>
where
    F: Fn(usize) -> Result<(SpikeTrainSet, DiscreteSignal)> + Sync,
{
    if batch_size == 0 {
        return Err(Error::param("batch_size must be positive"));
    }
    let dim = hidden + 1;
    let h = window.len();
    let taps: Vec<Taps> = groups
        .iter()
        .map(|g| Ok(KernelSpec::pspk(pspk).place(g.delay, g.support)?.taps(dt)))
        .collect::<Result<_>>()?;
    let empty = || -> Vec<GramAccumulator> {
        groups.iter().map(|g| GramAccumulator::new(dim, g.outputs.clone())).collect()
    };
    let starts: Vec<usize> = (0..count).step_by(batch_size).collect();
    let partials: Vec<Vec<GramAccumulator>> = starts
        .par_iter()
        .map(|&b0| {
            let b1 = (b0 + batch_size).min(count);
            let mut accs = empty();
            let mut data = Vec::with_capacity(b1 - b0);
            for n in b0..b1 {
                let (s, y) = source(n)?;
                if s.neurons() != hidden {
                    return Err(Error::shape(format!("expected {hidden} hidden neurons, got {}", s.neurons())));
                }
                if y.len() != h {
                    return Err(Error::shape("targets do not cover the forecast window"));
                }
                data.push((s, y));
            }
            let rows = data.len() * h;
            let mut design = vec![0.0; rows * dim];
            let mut col = vec![0.0; h];
            for ((g, t), acc) in groups.iter().zip(&taps).zip(accs.iter_mut()) {
                design.iter_mut().for_each(|v| *v = 0.0);
                let k = g.outputs.len();
                let mut ys = vec![0.0; rows * k];
                for (n, (s, y)) in data.iter().enumerate() {
                    for r in 0..h {
                        design[(n * h + r) * dim] = 1.0;
                    }
                    for j in 0..hidden {
                        if s.train(j).is_empty() {
                            continue;
                        }
                        col.iter_mut().for_each(|v| *v = 0.0);
                        for &tf in s.train(j) {
                            place_taps(&mut col, window.start, t, tf, 1.0);
                        }
                        for (r, v) in col.iter().enumerate() {
                            design[(n * h + r) * dim + 1 + j] = *v;
                        }
                    }
                    for (c, &o) in g.outputs.iter().enumerate() {
                        for (r, v) in y.channel(o).iter().enumerate() {
                            ys[(n * h + r) * k + c] = *v;
                        }
                    }
                }
                acc.add_rows(&design, &ys, rows);
                acc.samples += data.len();
            }
            Ok(accs)
        })
        .collect::<Result<_>>()?;
    let mut total = empty();
    for p in &partials {
        for (t, a) in total.iter_mut().zip(p) {
            t.merge(a);
        }
    }
    Ok(total)
}

/// Fitted readout for one output channel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutputSolution {
    pub output: usize,
    pub bias: f64,
    pub weights: Vec<f64>,
    pub lambda: f64,
    pub validation_loss: Vec<f64>,
}

/// Ridge parameters (F + ridge I)^-1 rhs through an eigendecomposition of F.
pub fn spectral_solve(values: &DVector<f64>, vectors: &DMatrix<f64>, rhs: &DVector<f64>, ridge: f64) -> DVector<f64> {
    let z = vectors.tr_mul(rhs);
    let scaled = DVector::from_fn(z.len(), |k, _| z[k] / (values[k] + ridge));
    vectors * scaled
}

/// Quadratic loss p^T F p - 2 p^T r + yy of parameters on an accumulated split.
pub fn quadratic_loss(f: &DMatrix<f64>, r: &DVector<f64>, yy: f64, p: &DVector<f64>) -> f64 {
    (p.tr_mul(&(f * p)))[0] - 2.0 * p.dot(r) + yy
}

/// Chooses the ridge strength per output on the validation accumulator; weights
/// come from the training accumulator only. Ties prefer the larger lambda.
pub fn solve_with_lambda_search(
    train: &GramAccumulator,
    valid: &GramAccumulator,
    lambdas: &[f64],
) -> Result<Vec<OutputSolution>> {
    if train.samples == 0 {
        return Err(Error::EmptyDataset);
    }
    if lambdas.is_empty() || lambdas.iter().any(|&l| !(l >= 0.0)) {
        return Err(Error::param("lambda grid must be nonempty and nonnegative"));
    }
    if train.dim != valid.dim || train.outputs != valid.outputs {
        return Err(Error::shape("train and validation accumulators disagree"));
    }
    let eval = if valid.samples == 0 { train } else { valid };
    let f = train.gram_matrix();
    let eig = sym_eigen(&f).ok_or(Error::EigenNonConvergence(train.outputs[0]))?;
    let f_val = eval.gram_matrix();
    let m = train.samples as f64;
    let solutions = train
        .outputs
        .iter()
        .enumerate()
        .map(|(c, &o)| {
            let rhs = train.rhs_column(c);
            let r_val = eval.rhs_column(c);
            let mut losses = Vec::with_capacity(lambdas.len());
            let mut best: Option<(f64, DVector<f64>, f64)> = None;
            for &lam in lambdas {
                let p = spectral_solve(&eig.values, &eig.vectors, &rhs, m * lam);
                let loss = quadratic_loss(&f_val, &r_val, eval.target_norm2[c], &p);
                if !loss.is_finite() || p.iter().any(|v| !v.is_finite()) {
                    return Err(Error::EigenNonConvergence(o));
                }
                losses.push(loss);
                if best.as_ref().is_none_or(|(bl, _, _)| loss <= *bl) {
                    best = Some((loss, p, lam));
                }
            }
            let (_, p, lam) = best.expect("nonempty grid");
            Ok(OutputSolution {
                output: o,
                bias: p[0],
                weights: p.iter().skip(1).copied().collect(),
                lambda: lam,
                validation_loss: losses,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(solutions)
}

/// Upper bound 1 + H_D / lambda + ||Dk||^2 / (M lambda) * sum_n sum_j |T_j^n|^2
/// on the condition number of F_S + M lambda I.
pub fn condition_bound(
    lambda: f64,
    samples: usize,
    window_len: usize,
    kernel_norm2: f64,
    spike_count_sq_sum: f64,
) -> Result<f64> {
    if !(lambda > 0.0) {
        return Err(Error::param("condition bound needs lambda > 0"));
    }
    if samples == 0 {
        return Err(Error::EmptyDataset);
    }
    Ok(1.0 + window_len as f64 / lambda + kernel_norm2 / (samples as f64 * lambda) * spike_count_sq_sum)
}
