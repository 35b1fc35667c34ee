//! Checks shared by the acceptance runner and the regular test files.
//!
//! Each returns a one-line summary on success and a description of the
//! first violation otherwise.

use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use sswim_core::hidden::{
    build_hidden_layer, dist_matrix, normalize_fl, normalize_ms, projected_stats, weight_dist, weight_dot,
    HiddenLayerSpec,
};
use sswim_core::linalg::qr_residuals;
use sswim_core::network::{simulate_hidden_layer, LayerInput};
use sswim_core::output::{
    accumulate_normal_equations, estimate_delays, select_supports, solve_with_lambda_search, spectral_solve,
    support_candidates, KernelGroup,
};
use sswim_core::sampling::{shannon_entropy, Pseudometric, DEFAULT_EMBEDDINGS};
use sswim_core::{
    DelayAggregation, DiscreteSignal, EmbeddingSpec, KernelFamily, KernelSpec, NormalizerKind, SpikeTrainSet,
    SswimConfig,
};

use super::*;

pub type Check = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

/// sum_t a(t) b(t)^T over channels, symmetrised, built from raw samples.
fn cross_gram(a: &DiscreteSignal, b: &DiscreteSignal) -> DMatrix<f64> {
    let d = a.channels();
    let mut g = DMatrix::zeros(d, d);
    for t in 0..a.len() {
        for r in 0..d {
            for c in 0..d {
                g[(r, c)] += 0.5 * (a.get(r, t) * b.get(c, t) + b.get(r, t) * a.get(c, t));
            }
        }
    }
    g
}

fn diff_gram(a: &DiscreteSignal, b: &DiscreteSignal) -> DMatrix<f64> {
    let d = a.channels();
    let mut g = DMatrix::zeros(d, d);
    for t in 0..a.len() {
        for r in 0..d {
            for c in 0..d {
                g[(r, c)] += (a.get(r, t) - b.get(r, t)) * (a.get(c, t) - b.get(c, t));
            }
        }
    }
    g
}

fn quad(a: &DMatrix<f64>, w: &[f64]) -> f64 {
    let v = DVector::from_column_slice(w);
    (v.transpose() * a * &v)[0]
}

fn sign_free_gap(w: &[f64], v: &[f64]) -> f64 {
    let plus = w.iter().zip(v).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    let minus = w.iter().zip(v).map(|(a, b)| (a + b).abs()).fold(0.0, f64::max);
    plus.min(minus)
}

pub const EIGEN_TOL: f64 = 1e-8;
pub const EIGEN_PROBES: usize = 100_000;
pub const EIGEN_SECONDS: f64 = 10.0;

/// Weight criteria beat random unit probes and match the Jacobi extremal eigenvectors.
pub fn eigencriterion(instances: usize, probes: usize) -> Check {
    let start = Instant::now();
    let mut r = rng(101);
    let mut worst: f64 = 0.0;
    for k in 0..instances {
        let len = r.random_range(8..40);
        let p1 = gaussian_signal(&mut r, 3, len);
        let p2 = gaussian_signal(&mut r, 3, len);
        let a_dist = diff_gram(&p1, &p2);
        let a_dot = cross_gram(&p1, &p2);
        let wd = weight_dist(&p1, &p2).map_err(|e| format!("instance {k}: {e}"))?;
        let wt = weight_dot(&p1, &p2).map_err(|e| format!("instance {k}: {e}"))?;
        let (vals_d, vecs_d) = jacobi_eigen(&a_dist);
        let (vals_t, vecs_t) = jacobi_eigen(&a_dot);
        let top: Vec<f64> = vecs_d.column(2).iter().copied().collect();
        let bottom: Vec<f64> = vecs_t.column(0).iter().copied().collect();
        let gd = sign_free_gap(&wd, &top);
        let gt = sign_free_gap(&wt, &bottom);
        worst = worst.max(gd).max(gt);
        ensure(gd <= EIGEN_TOL && gt <= EIGEN_TOL, || {
            format!("instance {k}: eigenvector gap dist {gd:.2e} dot {gt:.2e}")
        })?;
        let (od, ot) = (quad(&a_dist, &wd), quad(&a_dot, &wt));
        ensure((od - vals_d[2]).abs() <= 1e-9 * vals_d[2].abs().max(1.0), || {
            format!("instance {k}: dist objective {od} vs eigenvalue {}", vals_d[2])
        })?;
        ensure((ot - vals_t[0]).abs() <= 1e-9 * vals_t[0].abs().max(1.0), || {
            format!("instance {k}: dot objective {ot} vs eigenvalue {}", vals_t[0])
        })?;
        let slack = 1e-12 * (vals_d[2].abs() + vals_t[0].abs() + 1.0);
        for _ in 0..probes {
            let u = random_unit(&mut r, 3);
            ensure(quad(&a_dist, &u) <= od + slack, || format!("instance {k}: random probe beats dist"))?;
            ensure(quad(&a_dot, &u) >= ot - slack, || format!("instance {k}: random probe beats dot"))?;
        }
    }
    let secs = start.elapsed().as_secs_f64();
    ensure(secs < EIGEN_SECONDS, || format!("took {secs:.1}s"))?;
    Ok(format!("{instances} instances, max eigenvector gap {worst:.1e}, {secs:.2}s"))
}

pub const SPECTRUM_FLOOR: f64 = -1e-10;

/// The separation matrix is positive semidefinite, including rank-deficient cases.
pub fn dist_spectrum(instances: usize) -> Check {
    let mut r = rng(202);
    let mut lowest = f64::INFINITY;
    for k in 0..instances {
        let d = r.random_range(1..=8);
        let len = r.random_range(1..=12);
        let p1 = gaussian_signal(&mut r, d, len);
        let mut p2 = gaussian_signal(&mut r, d, len);
        if k % 4 == 0 {
            // shared channels make the difference rank-deficient
            for c in 0..d / 2 {
                let src = p1.channel(c).to_vec();
                p2.channel_mut(c).copy_from_slice(&src);
            }
        }
        let a = dist_matrix(&p1, &p2).map_err(|e| e.to_string())?;
        let (vals, _) = jacobi_eigen(&a);
        lowest = lowest.min(vals[0]);
        ensure(vals[0] >= SPECTRUM_FLOOR, || format!("instance {k}: eigenvalue {}", vals[0]))?;
    }
    Ok(format!("{instances} instances, smallest eigenvalue {lowest:.2e}"))
}

/// Causal dense convolution with a placed Hat kernel, written from the formula.
pub fn hat_conv(x: &[f64], tau: f64, sigma: f64, grid: usize) -> Vec<f64> {
    (0..grid)
        .map(|t| {
            x.iter()
                .enumerate()
                .filter(|&(s, _)| s <= t)
                .map(|(s, v)| v * placed_hat((t - s) as f64, tau, sigma))
                .sum()
        })
        .collect()
}

fn temporal_mean_std(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Expected temporal mean and std of alpha <w, psi> + beta, recomputed in two passes.
fn recomputed_stats(xs: &[DiscreteSignal], w: &[f64], tau: f64, sigma: f64, grid: usize, alpha: f64, beta: f64) -> (f64, f64) {
    let mut means = 0.0;
    let mut stds = 0.0;
    for x in xs {
        let mut v = vec![beta; grid];
        for (j, wj) in w.iter().enumerate() {
            for (a, c) in v.iter_mut().zip(hat_conv(x.channel(j), tau, sigma, grid)) {
                *a += alpha * wj * c;
            }
        }
        let (m, s) = temporal_mean_std(&v);
        means += m;
        stds += s;
    }
    (means / xs.len() as f64, stds / xs.len() as f64)
}

pub const NORMALIZER_TOL: f64 = 1e-9;

/// MS hits (0.5, 0.5) exactly and FL places the mean z stds below threshold.
pub fn normalization_exactness(instances: usize) -> Check {
    let mut r = rng(303);
    let (o, h) = (24, 8);
    let grid = o + h;
    let mut worst: f64 = 0.0;
    let mut k = 0;
    let mut tried = 0;
    while k < instances {
        tried += 1;
        if tried > 20 * instances {
            return Err(format!("only {k} instances without a silence shift"));
        }
        let xs: Vec<DiscreteSignal> = (0..12).map(|_| gaussian_signal(&mut r, 3, o)).collect();
        let w = random_unit(&mut r, 3);
        let tau = r.random_range(0.0..12.0);
        let sigma = r.random_range(2.0..10.0);
        let kernel = KernelSpec::pspk(KernelFamily::Hat).place(tau, sigma).unwrap();
        let inputs: Vec<LayerInput> = xs.iter().map(LayerInput::Dense).collect();
        let stats = projected_stats(&kernel, &w, &inputs, 1.0, grid).map_err(|e| e.to_string())?;
        let ms = normalize_ms(&stats, 0.5, 0.5, 0.0, 1e-12, 0).map_err(|e| e.to_string())?;
        let z = 1.0;
        let fl = normalize_fl(&stats, z, 0.0);
        if ms.silence_shift != 0.0 || fl.silence_shift != 0.0 {
            continue;
        }
        let (e, s) = recomputed_stats(&xs, &w, tau, sigma, grid, ms.alpha, ms.beta);
        worst = worst.max((e - 0.5).abs()).max((s - 0.5).abs());
        ensure((e - 0.5).abs() <= NORMALIZER_TOL && (s - 0.5).abs() <= NORMALIZER_TOL, || {
            format!("ms instance {k}: E {e} S {s}")
        })?;
        let (e, s) = recomputed_stats(&xs, &w, tau, sigma, grid, fl.alpha, fl.beta);
        let gap = (e - (1.0 - z * s)).abs();
        worst = worst.max(gap);
        ensure(gap <= NORMALIZER_TOL, || format!("fl instance {k}: E {e} S {s}"))?;
        k += 1;
    }
    Ok(format!("{instances} instances, max deviation {worst:.1e}"))
}

/// After building on X_I, every neuron's max pre-refractory voltage reaches threshold.
pub fn silence_correction() -> Check {
    let mut r = rng(404);
    let (o, h) = (20, 8);
    let grid = o + h;
    let mut shifted = 0;
    let mut total = 0;
    for (case, normalizer) in [NormalizerKind::Ms, NormalizerKind::Fl, NormalizerKind::Ms].into_iter().enumerate() {
        // case 2: near-constant inputs push most neurons below threshold before the shift
        let xs: Vec<DiscreteSignal> = (0..16)
            .map(|_| {
                let mut x = gaussian_signal(&mut r, 2, o);
                if case == 2 {
                    x.values_mut().iter_mut().for_each(|v| *v = 1.0 + 1e-3 * *v);
                }
                x
            })
            .collect();
        let inputs: Vec<LayerInput> = xs.iter().map(LayerInput::Dense).collect();
        let pairs = sswim_core::sampling::PairProbabilities::from_raw(16, vec![1.0; 16 * 15 / 2]).unwrap();
        let cfg = SswimConfig {
            normalizer,
            target_mean: if case == 2 { -3.0 } else { 0.5 },
            ..SswimConfig::default()
        };
        let spec = HiddenLayerSpec {
            layer: 1,
            layers: 1,
            neurons: 30,
            observation: o,
            horizon: h,
            dt: 1.0,
            pspk: KernelFamily::Hat,
            rfk: KernelFamily::Exp,
            config: &cfg,
            seed: 17 + case as u64,
        };
        let (layer, records) = build_hidden_layer(&spec, &inputs, &pairs).map_err(|e| e.to_string())?;
        for i in 0..layer.neurons() {
            total += 1;
            if records[i].normalizer.silence_shift > 0.0 {
                shifted += 1;
            }
            let mut vmax = f64::NEG_INFINITY;
            for x in &xs {
                let mut v = vec![layer.bias[i]; grid];
                for j in 0..x.channels() {
                    let c = hat_conv(x.channel(j), layer.delay[i], layer.support[i], grid);
                    for (a, b) in v.iter_mut().zip(c) {
                        *a += layer.weights[i][j] * b;
                    }
                }
                vmax = vmax.max(v.iter().copied().fold(f64::NEG_INFINITY, f64::max));
            }
            ensure(vmax >= 1.0, || format!("case {case} neuron {i}: max voltage {vmax}"))?;
            let fired = inputs.iter().any(|x| {
                simulate_hidden_layer(&layer, *x, 1.0, grid)
                    .map(|(s, _)| !s.train(i).is_empty())
                    .unwrap_or(false)
            });
            ensure(fired, || format!("case {case} neuron {i} never spikes"))?;
        }
    }
    ensure(shifted > 0, || "no neuron needed the shift; instance too easy".into())?;
    Ok(format!("{total} neurons reach threshold, {shifted} via the shift"))
}

pub const QR_TOL: f64 = 1e-8;

/// ||y||^2 - ||Q^T y||^2 against an SVD least-squares residual.
pub fn qr_identity(instances: usize) -> Check {
    let mut r = rng(505);
    let mut worst: f64 = 0.0;
    for k in 0..instances {
        let cols = match k % 4 {
            0 => r.random_range(1..5),
            1 => r.random_range(5..20),
            2 => r.random_range(33..48),
            _ => r.random_range(8..16),
        };
        let rows = r.random_range(2 * cols + 4..4 * cols + 40);
        let targets = r.random_range(1..=3);
        let mut a = DMatrix::from_fn(rows, cols + targets, |_, _| r.sample::<f64, _>(StandardNormal));
        if k % 4 == 3 {
            // duplicated and scaled columns
            let c0 = a.column(0).clone_owned();
            a.set_column(cols - 1, &(c0 * 2.0));
        }
        let design = a.columns(0, cols).clone_owned();
        let q = qr_residuals(a.clone(), cols);
        for c in 0..targets {
            let y = a.column(cols + c).clone_owned();
            let want = lstsq_residual(&design, &y);
            let err = rel_err(q.residual[c], want);
            worst = worst.max(err);
            ensure(err <= QR_TOL, || {
                format!("instance {k} target {c}: {} vs {want} ({err:.1e})", q.residual[c])
            })?;
        }
    }
    Ok(format!("{instances} instances, max relative error {worst:.1e}"))
}

pub struct RidgeInstance {
    pub spikes: Vec<SpikeTrainSet>,
    pub targets: Vec<DiscreteSignal>,
    pub window: std::ops::Range<usize>,
    pub delay: f64,
    pub support: f64,
}

pub fn ridge_instance(r: &mut rand_chacha::ChaCha8Rng) -> RidgeInstance {
    let m = r.random_range(2..=20);
    let n = r.random_range(1..=8);
    let h = r.random_range(2..=16);
    let o = r.random_range(4..=24);
    let grid = o + h;
    let spikes = (0..m).map(|_| random_spikes(r, n, grid, 0, 6)).collect();
    let targets = (0..m).map(|_| gaussian_signal(r, 2, h)).collect();
    RidgeInstance {
        spikes,
        targets,
        window: o..grid,
        delay: r.random_range(0..o) as f64,
        support: r.random_range(1.0..2.0 * h as f64),
    }
}

pub const RIDGE_TOL: f64 = 1e-6;
pub const SPECTRAL_TOL: f64 = 1e-8;

/// Streamed normal equations against a dense stacked solve, and spectral against direct per lambda.
pub fn batched_ridge(instances: usize) -> Check {
    let mut r = rng(606);
    let lambdas = SswimConfig::default().lambda_grid();
    let mut worst_ridge: f64 = 0.0;
    let mut worst_spec: f64 = 0.0;
    for k in 0..instances {
        let inst = ridge_instance(&mut r);
        let m = inst.spikes.len();
        let n = inst.spikes[0].neurons();
        let groups = [KernelGroup {
            delay: inst.delay,
            support: inst.support,
            outputs: vec![0, 1],
        }];
        let source = |i: usize| Ok((inst.spikes[i].clone(), inst.targets[i].clone()));
        let acc = accumulate_normal_equations(m, source, &groups, KernelFamily::Hat, n, inst.window.clone(), 1.0, 3)
            .map_err(|e| e.to_string())?
            .remove(0);
        let d = dense_design(&inst.spikes, inst.window.clone(), inst.delay, inst.support);
        let lam = lambdas[r.random_range(0..lambdas.len())];
        let sol = solve_with_lambda_search(&acc, &acc.clone_empty(), &[lam]).map_err(|e| e.to_string())?;
        let f = d.transpose() * &d;
        let sys = &f + DMatrix::identity(n + 1, n + 1) * (m as f64 * lam);
        for (c, s) in sol.iter().enumerate() {
            let y = DVector::from_iterator(
                m * inst.window.len(),
                inst.targets.iter().flat_map(|t| t.channel(c).to_vec()),
            );
            let want = sys.clone().lu().solve(&(d.transpose() * &y)).ok_or("singular oracle system")?;
            let mut got = vec![s.bias];
            got.extend(&s.weights);
            let got = DVector::from_vec(got);
            let err = (&got - &want).norm() / want.norm().max(1e-300);
            worst_ridge = worst_ridge.max(err);
            ensure(err <= RIDGE_TOL, || format!("instance {k} output {c}: relative error {err:.1e}"))?;
        }
        let fa = acc.gram_matrix();
        let eig = sswim_core::linalg::sym_eigen(&fa).ok_or("eigen failed")?;
        for &lam in &lambdas {
            let ridge = m as f64 * lam;
            let sys = &fa + DMatrix::identity(n + 1, n + 1) * ridge;
            let rhs = acc.rhs_column(0);
            let direct = sys.lu().solve(&rhs).ok_or("singular system")?;
            let spec = spectral_solve(&eig.values, &eig.vectors, &rhs, ridge);
            let err = (&spec - &direct).norm() / direct.norm().max(1e-300);
            worst_spec = worst_spec.max(err);
            ensure(err <= SPECTRAL_TOL, || format!("instance {k} lambda {lam:e}: spectral error {err:.1e}"))?;
        }
    }
    Ok(format!(
        "{instances} instances, ridge error {worst_ridge:.1e}, spectral error {worst_spec:.1e}"
    ))
}

/// Empty accumulator with the same shape, for a validation split with no samples.
pub trait CloneEmpty {
    fn clone_empty(&self) -> Self;
}

impl CloneEmpty for sswim_core::output::GramAccumulator {
    fn clone_empty(&self) -> Self {
        Self::new(self.dim, self.outputs.clone())
    }
}

/// Targets sum_j w_j sum_f hat((t - t_f - tau)/sigma) + b on `window`, one channel per (tau, sigma).
pub fn planted_targets(
    spikes: &[SpikeTrainSet],
    weights: &[Vec<f64>],
    bias: &[f64],
    kernels: &[(f64, f64)],
    window: std::ops::Range<usize>,
) -> Vec<DiscreteSignal> {
    spikes
        .iter()
        .map(|s| {
            let rows: Vec<Vec<f64>> = kernels
                .iter()
                .enumerate()
                .map(|(c, &(tau, sigma))| {
                    window
                        .clone()
                        .map(|t| {
                            bias[c]
                                + (0..s.neurons())
                                    .map(|j| {
                                        weights[c][j]
                                            * s.train(j)
                                                .iter()
                                                .map(|&tf| placed_hat(t as f64 - tf as f64, tau, sigma))
                                                .sum::<f64>()
                                    })
                                    .sum::<f64>()
                        })
                        .collect()
                })
                .collect();
            DiscreteSignal::from_rows(&rows, 1.0).unwrap()
        })
        .collect()
}

pub const DELAY_INSTANCES: usize = 50;
pub const DELAY_REQUIRED: usize = 45;

/// Delay estimation on planted Hat responses: N_L = 8, M = 20, O = 48, H = 16, sigma = 2.
pub fn planted_delay() -> Check {
    let mut r = rng(707);
    let (o, h, n, m) = (48, 16, 8, 20);
    let mut hits = 0;
    let mut misses = Vec::new();
    for k in 0..DELAY_INSTANCES {
        let tau = r.random_range(0..o - h) as f64;
        let spikes: Vec<SpikeTrainSet> = (0..m).map(|_| random_spikes(&mut r, n, o + h, 5, 10)).collect();
        let w: Vec<f64> = (0..n).map(|_| r.sample(StandardNormal)).collect();
        let y = planted_targets(&spikes, &[w], &[0.3], &[(tau, 2.0)], o..o + h);
        let refs: Vec<&SpikeTrainSet> = spikes.iter().collect();
        let est = estimate_delays(&refs, &y, o, o, KernelFamily::Hat, DelayAggregation::Median)
            .map_err(|e| e.to_string())?;
        if (est.per_output[0] - tau).abs() <= 1.0 {
            hits += 1;
        } else {
            misses.push(format!("{k}: {tau} -> {}", est.per_output[0]));
        }
    }
    ensure(hits >= DELAY_REQUIRED, || format!("{hits}/{DELAY_INSTANCES} recovered; misses {misses:?}"))?;
    Ok(format!("{hits}/{DELAY_INSTANCES} within one step"))
}

pub const SUPPORT_INSTANCES: usize = 10;
pub const SUPPORT_REQUIRED: usize = 8;

/// Support search with known delay on the default grid P_1.5(1, 2H, 30).
pub fn planted_support() -> Check {
    let mut r = rng(808);
    let (o, h, n, m) = (48, 16, 8, 20);
    let cfg = SswimConfig::default();
    let grid = support_candidates(
        cfg.output_support_min,
        cfg.output_support_upper(h),
        cfg.output_support_alpha,
        cfg.output_support_count,
    )
    .map_err(|e| e.to_string())?;
    let mut hits = 0;
    let mut misses = Vec::new();
    for k in 0..SUPPORT_INSTANCES {
        let cell = r.random_range(2..grid.len() - 3);
        let sigma = r.random_range(grid[cell]..grid[cell + 1]);
        let tau = r.random_range(0..o - h) as f64;
        let spikes: Vec<SpikeTrainSet> = (0..m).map(|_| random_spikes(&mut r, n, o + h, 5, 10)).collect();
        let w: Vec<f64> = (0..n).map(|_| r.sample(StandardNormal)).collect();
        let y = planted_targets(&spikes, &[w], &[0.1], &[(tau, sigma)], o..o + h);
        let refs: Vec<&SpikeTrainSet> = spikes.iter().collect();
        let sel = select_supports(&refs, &y, o..o + h, tau, &grid, KernelFamily::Hat, 1.0)
            .map_err(|e| e.to_string())?;
        let got = sel.chosen_index[0];
        if got + 1 >= cell && got <= cell + 2 {
            hits += 1;
        } else {
            misses.push(format!("{k}: cell {cell} sigma {sigma:.2} -> {got}"));
        }
    }
    ensure(hits >= SUPPORT_REQUIRED, || format!("{hits}/{SUPPORT_INSTANCES} recovered; misses {misses:?}"))?;
    Ok(format!("{hits}/{SUPPORT_INSTANCES} within one cell"))
}

pub const TRIANGLE_SLACK: f64 = 1e-9;

fn check_axioms<X>(name: &str, triples: &[(X, X, X)], d: impl Fn(&X, &X) -> f64) -> Result<(), String> {
    for (k, (x, y, z)) in triples.iter().enumerate() {
        let (xy, yx) = (d(x, y), d(y, x));
        ensure(xy == yx, || format!("{name} triple {k}: asymmetric {xy} vs {yx}"))?;
        ensure(d(x, x) == 0.0, || format!("{name} triple {k}: d(x,x) = {}", d(x, x)))?;
        ensure(xy >= 0.0, || format!("{name} triple {k}: negative distance"))?;
        let (xz, yz) = (d(x, z), d(y, z));
        ensure(xz <= xy + yz + TRIANGLE_SLACK, || {
            format!("{name} triple {k}: {xz} > {xy} + {yz}")
        })?;
    }
    Ok(())
}

/// Symmetry, identity and triangle inequality for every embedding and for lifted spike trains.
pub fn pseudometric_axioms(triples: usize) -> Check {
    let mut r = rng(909);
    let len = 32;
    let dense: Vec<(DiscreteSignal, DiscreteSignal, DiscreteSignal)> = (0..triples)
        .map(|k| {
            let mut t = (
                gaussian_signal(&mut r, 2, len),
                gaussian_signal(&mut r, 2, len),
                gaussian_signal(&mut r, 2, len),
            );
            if k % 10 == 0 {
                // constant channel: zero after centring
                t.1.channel_mut(0).iter_mut().for_each(|v| *v = 3.0);
            }
            t
        })
        .collect();
    for spec in DEFAULT_EMBEDDINGS {
        let pm = Pseudometric::new(spec, 0..len, 1.0);
        check_axioms(&spec.to_string(), &dense, |a, b| {
            pm.distance(LayerInput::Dense(a), LayerInput::Dense(b)).unwrap()
        })?;
    }
    let spikes: Vec<(SpikeTrainSet, SpikeTrainSet, SpikeTrainSet)> = (0..triples)
        .map(|_| {
            (
                random_spikes(&mut r, 3, len, 0, 6),
                random_spikes(&mut r, 3, len, 0, 6),
                random_spikes(&mut r, 3, len, 0, 6),
            )
        })
        .collect();
    let lift = KernelSpec::pspk(KernelFamily::Hat).place(0.0, 5.0).unwrap();
    for spec in [EmbeddingSpec::L2, EmbeddingSpec::Mag] {
        let pm = Pseudometric::new(spec, 0..len, 1.0).with_lift(lift);
        check_axioms(&format!("lifted {spec}"), &spikes, |a, b| {
            pm.distance(LayerInput::Spikes(a), LayerInput::Spikes(b)).unwrap()
        })?;
    }
    Ok(format!("{triples} triples, {} embeddings plus the lift", DEFAULT_EMBEDDINGS.len()))
}

/// 0 <= H <= ln K, attained by a point mass and the uniform distribution.
pub fn entropy_bounds() -> Check {
    use sswim_core::sampling::PairProbabilities;
    let mut r = rng(1010);
    for k in 0..200 {
        let n = r.random_range(2..12);
        let kk = n * (n - 1) / 2;
        let raw: Vec<f64> = (0..kk)
            .map(|_| if r.random_bool(0.3) { 0.0 } else { r.random::<f64>() })
            .collect();
        let Ok(p) = PairProbabilities::from_raw(n, raw) else { continue };
        let hp = p.entropy();
        ensure(hp >= 0.0 && hp <= (kk as f64).ln() + 1e-12, || {
            format!("instance {k}: H = {hp} outside [0, ln {kk}]")
        })?;
    }
    let mut point = vec![0.0; 10];
    point[7] = 2.5;
    let h0 = PairProbabilities::from_raw(5, point).unwrap().entropy();
    ensure(h0 == 0.0, || format!("point mass entropy {h0}"))?;
    let hu = PairProbabilities::from_raw(5, vec![0.4; 10]).unwrap().entropy();
    ensure((hu - 10f64.ln()).abs() <= 1e-14, || format!("uniform over 10: {hu}"))?;
    let h4 = PairProbabilities::from_raw(4, vec![1.0, 0.0, 1.0, 1.0, 0.0, 1.0]).unwrap().entropy();
    ensure(h4 == 4f64.ln(), || format!("uniform over 4: {h4} vs {}", 4f64.ln()))?;
    ensure(shannon_entropy(&[0.25; 4]) == 4f64.ln(), || "direct uniform over 4".into())?;
    Ok(format!("bounds hold; uniform over 4 gives {h4}"))
}
