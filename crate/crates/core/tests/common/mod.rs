#![allow(dead_code)]

pub mod criteria;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand::SeedableRng;
use rand_distr::StandardNormal;
use sswim_core::harness::{make_windows, synth_dataset, ForecastDataset, SplitRatios, SynthKind};
use sswim_core::{DiscreteSignal, SpikeTrainSet};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn hat(x: f64) -> f64 {
    (1.0 - x.abs()).max(0.0)
}

/// Hat kernel placed at `tau` with width `sigma`, cut for t < 0.
pub fn placed_hat(t: f64, tau: f64, sigma: f64) -> f64 {
    if t < 0.0 {
        0.0
    } else {
        hat((t - tau) / sigma)
    }
}

pub fn gaussian_signal(r: &mut ChaCha8Rng, channels: usize, len: usize) -> DiscreteSignal {
    let v: Vec<f64> = (0..channels * len).map(|_| r.sample(StandardNormal)).collect();
    DiscreteSignal::from_values(channels, len, 1.0, v).unwrap()
}

/// Sorted distinct spike times, between `lo` and `hi` spikes per train.
pub fn random_spikes(r: &mut ChaCha8Rng, neurons: usize, len: usize, lo: usize, hi: usize) -> SpikeTrainSet {
    let trains = (0..neurons)
        .map(|_| {
            let k = r.random_range(lo..=hi).min(len);
            let mut t = rand::seq::index::sample(r, len, k).into_vec();
            t.sort_unstable();
            t
        })
        .collect();
    SpikeTrainSet::from_trains(trains, len).unwrap()
}

/// Stacked design [1 | sum_f hat((t - t_f - tau)/sigma)] over t in `window`, one block per sample.
pub fn dense_design(spikes: &[SpikeTrainSet], window: std::ops::Range<usize>, tau: f64, sigma: f64) -> DMatrix<f64> {
    let h = window.len();
    let n = spikes[0].neurons();
    let mut d = DMatrix::zeros(spikes.len() * h, n + 1);
    for (s, sp) in spikes.iter().enumerate() {
        for (r, t) in window.clone().enumerate() {
            d[(s * h + r, 0)] = 1.0;
            for j in 0..n {
                d[(s * h + r, j + 1)] = sp
                    .train(j)
                    .iter()
                    .map(|&tf| placed_hat(t as f64 - tf as f64, tau, sigma))
                    .sum();
            }
        }
    }
    d
}

/// Cyclic Jacobi eigensolver; eigenvalues ascending with matching columns.
pub fn jacobi_eigen(a: &DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let n = a.nrows();
    let mut a = a.clone();
    let mut v = DMatrix::<f64>::identity(n, n);
    for _sweep in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[(i, j)] * a[(i, j)])
            .sum();
        if off < 1e-30 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                if a[(p, q)].abs() < 1e-300 {
                    continue;
                }
                let theta = (a[(q, q)] - a[(p, p)]) / (2.0 * a[(p, q)]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[(k, p)];
                    let akq = a[(k, q)];
                    a[(k, p)] = c * akp - s * akq;
                    a[(k, q)] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[(p, k)];
                    let aqk = a[(q, k)];
                    a[(p, k)] = c * apk - s * aqk;
                    a[(q, k)] = s * apk + c * aqk;
                }
                for k in 0..n {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = c * vkp - s * vkq;
                    v[(k, q)] = s * vkp + c * vkq;
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[(i, i)].total_cmp(&a[(j, j)]));
    let values = order.iter().map(|&i| a[(i, i)]).collect();
    let vectors = DMatrix::from_fn(n, n, |r, c| v[(r, order[c])]);
    (values, vectors)
}

/// Residual of the least-squares fit through an SVD pseudo-inverse.
pub fn lstsq_residual(a: &DMatrix<f64>, y: &DVector<f64>) -> f64 {
    let svd = a.clone().svd(true, true);
    let p = svd.solve(y, 1e-12).unwrap();
    (a * p - y).norm_squared()
}

pub fn random_unit(r: &mut ChaCha8Rng, dim: usize) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..dim).map(|_| r.sample(StandardNormal)).collect();
        let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if n > 1e-12 {
            return v.into_iter().map(|x| x / n).collect();
        }
    }
}

pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1e-300)
}

/// The acceptance forecasting task: four sine mixtures, O=64, H=24, about 2000 train windows.
pub const DESK_STEPS: usize = 3000;
pub const DESK_DATA_SEED: u64 = 7;

pub fn desk_dataset() -> ForecastDataset {
    let raw = synth_dataset(SynthKind::MultiSine, 4, DESK_STEPS, DESK_DATA_SEED).unwrap();
    make_windows(&raw.series, 64, 24, 1, SplitRatios::default()).unwrap()
}
