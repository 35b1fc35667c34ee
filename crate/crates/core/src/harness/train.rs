//! End-to-end training: hidden layers, output delays, supports and readout weights.

use std::time::Instant;

use rand::seq::index;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{Architecture, SswimConfig};
use crate::error::{Error, Phase, PhaseExt, Result};
use crate::harness::dataset::{ForecastDataset, Split};
use crate::harness::metrics::rse;
use crate::hidden::{build_hidden_layer, HiddenLayerSpec};
use crate::kernels::{discrete_energy, KernelSpec};
use crate::network::{hidden_spikes, output_voltages, FitDiagnostics, LayerInput, LayerParams, SnnModel};
use crate::output::{
    accumulate_normal_equations, condition_bound, estimate_delays, group_kernels, select_supports,
    solve_with_lambda_search, support_candidates,
};
use crate::rng::{derive_seed, stream};
use crate::sampling::{
    embed_all, representations, select_metrics, valid_samples, DistanceMatrix, EmbeddingSpec, PairProbabilities,
    Pseudometric,
};
use crate::signal::{DiscreteSignal, SpikeTrainSet};

/// Wall-clock seconds per pipeline phase.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PhaseTimings {
    pub metric_selection: f64,
    pub hidden: f64,
    pub delays: f64,
    pub supports: f64,
    pub weights: f64,
    pub evaluation: f64,
    pub total: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitRse {
    pub train: f64,
    pub valid: Option<f64>,
    pub test: Option<f64>,
}

impl SplitRse {
    pub fn get(&self, split: Split) -> Option<f64> {
        match split {
            Split::Train => Some(self.train),
            Split::Valid => self.valid,
            Split::Test => self.test,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub seed: u64,
    pub init_batch: usize,
    pub input_metric: EmbeddingSpec,
    pub output_metric: EmbeddingSpec,
    /// entropies[a][b] for input candidate a and output candidate b; empty when fixed.
    pub metric_entropies: Vec<Vec<Option<f64>>>,
    /// Spikes per hidden neuron over the initialisation batch, one row per layer.
    pub spike_counts: Vec<Vec<usize>>,
    pub delays: Vec<f64>,
    pub delay_aggregate: f64,
    pub supports: Vec<f64>,
    pub lambda: Vec<f64>,
    pub condition_bound: Vec<f64>,
    pub rse: SplitRse,
    pub timings: PhaseTimings,
}

impl RunReport {
    /// One `key value` line per metric; wall-clock times live in `PhaseTimings::to_text`.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let mut line = |k: &str, v: String| {
            out.push_str(k);
            out.push(' ');
            out.push_str(&v);
            out.push('\n');
        };
        let opt = |v: Option<f64>| v.map_or("nan".to_string(), |x| x.to_string());
        let list = |v: &[f64]| v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",");
        line("seed", self.seed.to_string());
        line("rse_train", self.rse.train.to_string());
        line("rse_valid", opt(self.rse.valid));
        line("rse_test", opt(self.rse.test));
        line("init_batch", self.init_batch.to_string());
        line("input_metric", self.input_metric.to_string());
        line("output_metric", self.output_metric.to_string());
        line("delay_aggregate", self.delay_aggregate.to_string());
        line("delays", list(&self.delays));
        line("supports", list(&self.supports));
        line("lambda", list(&self.lambda));
        line("condition_bound", list(&self.condition_bound));
        for (l, c) in self.spike_counts.iter().enumerate() {
            let total: usize = c.iter().sum();
            let silent = c.iter().filter(|&&k| k == 0).count();
            line(&format!("spikes_layer{}_total", l + 1), total.to_string());
            line(&format!("spikes_layer{}_silent", l + 1), silent.to_string());
        }
        out
    }
}

impl PhaseTimings {
    pub fn to_text(&self) -> String {
        [
            ("metric_selection", self.metric_selection),
            ("hidden", self.hidden),
            ("delays", self.delays),
            ("supports", self.supports),
            ("weights", self.weights),
            ("evaluation", self.evaluation),
            ("total", self.total),
        ]
        .iter()
        .map(|(k, v)| format!("time_{k} {v}\n"))
        .collect()
    }
}

fn distance_matrices(specs: &[EmbeddingSpec], reps: &[DiscreteSignal]) -> Vec<DistanceMatrix> {
    specs
        .iter()
        .map(|&s| DistanceMatrix::from_embeddings(&embed_all(s, reps)))
        .collect()
}

struct ChosenMetrics {
    input: EmbeddingSpec,
    output: EmbeddingSpec,
    entropies: Vec<Vec<Option<f64>>>,
}

fn choose_metrics(
    cfg: &SswimConfig,
    in_reps: &[DiscreteSignal],
    out_reps: &[DiscreteSignal],
    valid: &[bool],
) -> Result<ChosenMetrics> {
    if cfg.input_metrics.len() == 1 && cfg.output_metrics.len() == 1 {
        return Ok(ChosenMetrics {
            input: cfg.input_metrics[0],
            output: cfg.output_metrics[0],
            entropies: Vec::new(),
        });
    }
    let s = cfg.entropy_subset.map_or(in_reps.len(), |s| s.min(in_reps.len()));
    let d_in = distance_matrices(&cfg.input_metrics, &in_reps[..s]);
    let d_out = distance_matrices(&cfg.output_metrics, &out_reps[..s]);
    let sel = select_metrics(&d_in, &d_out, &valid[..s], cfg.pair_epsilon, cfg.min_entropy)?;
    Ok(ChosenMetrics {
        input: cfg.input_metrics[sel.input],
        output: cfg.output_metrics[sel.output],
        entropies: sel.entropies,
    })
}

fn last_layer_spikes(layers: &[LayerParams], x: &DiscreteSignal, dt: f64, grid: usize) -> Result<SpikeTrainSet> {
    let mut prev: Option<SpikeTrainSet> = None;
    for layer in layers {
        let input = match &prev {
            None => LayerInput::Dense(x),
            Some(s) => LayerInput::Spikes(s),
        };
        prev = Some(hidden_spikes(layer, input, dt, grid)?);
    }
    prev.ok_or_else(|| Error::param("no hidden layers"))
}

fn split_spikes(
    ds: &ForecastDataset,
    split: Split,
    layers: &[LayerParams],
    dt: f64,
    grid: usize,
) -> Result<Vec<SpikeTrainSet>> {
    ds.windows(split)
        .par_iter()
        .map(|&s| last_layer_spikes(layers, &ds.input(s)?, dt, grid))
        .collect()
}

/// Trains a network on `ds` and evaluates it on every split.
pub fn train_sswim(
    ds: &ForecastDataset,
    arch: &Architecture,
    cfg: &SswimConfig,
    seed: u64,
) -> Result<(SnnModel, RunReport)> {
    let t_total = Instant::now();
    arch.validate()?;
    cfg.validate()?;
    if ds.train.is_empty() {
        return Err(Error::EmptyDataset.in_phase(Phase::Data));
    }
    let (o, h) = (ds.observation, ds.horizon);
    let grid = o + h;
    let dt = ds.series.dt();
    let d = ds.variables();
    let mut timings = PhaseTimings::default();

    let m_init = if cfg.init_batch > ds.train.len() {
        log::warn!(
            "init_batch {} exceeds {} training windows; using all of them",
            cfg.init_batch,
            ds.train.len()
        );
        ds.train.len()
    } else {
        cfg.init_batch
    };
    let mut rng = stream(derive_seed(seed, "init-batch"), 0);
    let picks = index::sample(&mut rng, ds.train.len(), m_init).into_vec();
    let starts: Vec<usize> = picks.iter().map(|&k| ds.train[k]).collect();
    let xs: Vec<DiscreteSignal> = starts.iter().map(|&s| ds.input(s)).collect::<Result<_>>().phase(Phase::Data)?;
    let ys: Vec<DiscreteSignal> = starts.iter().map(|&s| ds.target(s)).collect::<Result<_>>().phase(Phase::Data)?;

    let t = Instant::now();
    let dense_x: Vec<LayerInput<'_>> = xs.iter().map(LayerInput::Dense).collect();
    let dense_y: Vec<LayerInput<'_>> = ys.iter().map(LayerInput::Dense).collect();
    let in_reps = representations(&Pseudometric::new(cfg.input_metrics[0], 0..o, dt), &dense_x)
        .phase(Phase::MetricSelection)?;
    let out_reps = representations(&Pseudometric::new(cfg.output_metrics[0], 0..h, dt), &dense_y)
        .phase(Phase::MetricSelection)?;
    let valid_first = valid_samples(&in_reps, cfg.min_norm);
    let chosen = choose_metrics(cfg, &in_reps, &out_reps, &valid_first).phase(Phase::MetricSelection)?;
    let d_out = DistanceMatrix::from_embeddings(&embed_all(chosen.output, &out_reps));
    log::info!("metrics: input {}, output {}", chosen.input, chosen.output);
    timings.metric_selection = t.elapsed().as_secs_f64();

    let t = Instant::now();
    let n_layers = arch.hidden.len();
    let mut layers: Vec<LayerParams> = Vec::with_capacity(n_layers + 1);
    let mut spike_counts = Vec::with_capacity(n_layers);
    let mut batch_spikes: Vec<SpikeTrainSet> = Vec::new();
    for (l, &neurons) in arch.hidden.iter().enumerate() {
        let phase = Phase::Hidden(l + 1);
        let inputs: Vec<LayerInput<'_>> = if l == 0 {
            dense_x.clone()
        } else {
            batch_spikes.iter().map(LayerInput::Spikes).collect()
        };
        let pairs = if l == 0 {
            let d_in = DistanceMatrix::from_embeddings(&embed_all(chosen.input, &in_reps));
            PairProbabilities::new(&d_in, &d_out, &valid_first, cfg.pair_epsilon)
        } else {
            let lift = KernelSpec::pspk(arch.pspk).place(0.0, cfg.hidden_support_min).phase(phase)?;
            let metric = Pseudometric::new(chosen.input, 0..grid, dt).with_lift(lift);
            let reps = representations(&metric, &inputs).phase(phase)?;
            let valid = valid_samples(&reps, cfg.min_norm);
            let d_in = DistanceMatrix::from_embeddings(&embed_all(chosen.input, &reps));
            PairProbabilities::new(&d_in, &d_out, &valid, cfg.pair_epsilon)
        }
        .phase(phase)?;
        let spec = HiddenLayerSpec {
            layer: l + 1,
            layers: n_layers,
            neurons,
            observation: o,
            horizon: h,
            dt,
            pspk: arch.pspk,
            rfk: arch.rfk,
            config: cfg,
            seed: derive_seed(seed, &format!("hidden-{}", l + 1)),
        };
        let (layer, _records) = build_hidden_layer(&spec, &inputs, &pairs).phase(phase)?;
        let next: Vec<SpikeTrainSet> = inputs
            .par_iter()
            .map(|x| hidden_spikes(&layer, *x, dt, grid))
            .collect::<Result<_>>()
            .phase(phase)?;
        let mut counts = vec![0usize; neurons];
        for s in &next {
            for (c, k) in counts.iter_mut().zip(s.counts()) {
                *c += k;
            }
        }
        log::info!(
            "hidden layer {}: {} neurons, {} spikes on the initialisation batch",
            l + 1,
            neurons,
            counts.iter().sum::<usize>()
        );
        spike_counts.push(counts);
        layers.push(layer);
        drop(inputs);
        batch_spikes = next;
    }
    timings.hidden = t.elapsed().as_secs_f64();

    let out_pspk = arch.output_kernel();
    let window = o..grid;
    let spike_refs: Vec<&SpikeTrainSet> = batch_spikes.iter().collect();

    let t = Instant::now();
    let delays =
        estimate_delays(&spike_refs, &ys, o, o, out_pspk, cfg.delay_aggregation).phase(Phase::Delays)?;
    timings.delays = t.elapsed().as_secs_f64();

    let t = Instant::now();
    let candidates = support_candidates(
        cfg.output_support_min,
        cfg.output_support_upper(h),
        cfg.output_support_alpha,
        cfg.output_support_count,
    )
    .phase(Phase::Supports)?;
    let supports = select_supports(
        &spike_refs,
        &ys,
        window.clone(),
        delays.aggregate,
        &candidates,
        out_pspk,
        dt,
    )
    .phase(Phase::Supports)?;
    timings.supports = t.elapsed().as_secs_f64();
    drop(spike_refs);
    drop(batch_spikes);

    let t = Instant::now();
    let hidden_width = *arch.hidden.last().expect("validated");
    let train_spikes = split_spikes(ds, Split::Train, &layers, dt, grid).phase(Phase::Weights)?;
    let valid_spikes = split_spikes(ds, Split::Valid, &layers, dt, grid).phase(Phase::Weights)?;
    let groups = group_kernels(&delays.per_output, &supports.chosen);
    let accumulate = |split: Split, spikes: &[SpikeTrainSet]| {
        let starts = ds.windows(split);
        accumulate_normal_equations(
            starts.len(),
            |n| Ok((spikes[n].clone(), ds.target(starts[n])?)),
            &groups,
            out_pspk,
            hidden_width,
            window.clone(),
            dt,
            cfg.batch_size,
        )
    };
    let train_acc = accumulate(Split::Train, &train_spikes).phase(Phase::Weights)?;
    let valid_acc = accumulate(Split::Valid, &valid_spikes).phase(Phase::Weights)?;
    let lambdas = cfg.lambda_grid();
    let mut weights = vec![Vec::new(); d];
    let mut bias = vec![0.0; d];
    let mut lambda = vec![0.0; d];
    for (tr, va) in train_acc.iter().zip(&valid_acc) {
        for sol in solve_with_lambda_search(tr, va, &lambdas).phase(Phase::Weights)? {
            weights[sol.output] = sol.weights;
            bias[sol.output] = sol.bias;
            lambda[sol.output] = sol.lambda;
        }
    }
    let spike_sq: f64 = train_spikes
        .iter()
        .flat_map(|s| s.counts())
        .map(|c| (c * c) as f64)
        .sum();
    let condition = (0..d)
        .map(|i| {
            let taps = KernelSpec::pspk(out_pspk)
                .place(delays.per_output[i], supports.chosen[i])?
                .taps(dt);
            condition_bound(lambda[i], ds.train.len(), h, discrete_energy(&taps), spike_sq)
        })
        .collect::<Result<Vec<f64>>>()
        .phase(Phase::Weights)?;
    let output = LayerParams {
        pspk: out_pspk,
        weights,
        bias,
        delay: delays.per_output.clone(),
        support: supports.chosen.clone(),
        refractory: None,
    };
    layers.push(output);
    let model = SnnModel {
        d_in: d,
        d_out: d,
        observation: o,
        horizon: h,
        dt,
        layers,
        diagnostics: Some(FitDiagnostics {
            lambda: lambda.clone(),
            condition_bound: condition.clone(),
            input_metric: chosen.input.to_string(),
            output_metric: chosen.output.to_string(),
        }),
    };
    model.validate().phase(Phase::Weights)?;
    timings.weights = t.elapsed().as_secs_f64();

    let t = Instant::now();
    let eval = |split: Split, spikes: &[SpikeTrainSet]| -> Result<Option<f64>> {
        if ds.windows(split).is_empty() {
            return Ok(None);
        }
        let preds = spikes
            .par_iter()
            .map(|s| output_voltages(model.output_layer(), s, dt, window.clone()))
            .collect::<Result<Vec<_>>>()?;
        rse(&preds, &ds.targets(split)?).map(Some)
    };
    let test_spikes = split_spikes(ds, Split::Test, &model.layers[..n_layers], dt, grid).phase(Phase::Evaluation)?;
    let rse_train = eval(Split::Train, &train_spikes).phase(Phase::Evaluation)?.expect("nonempty");
    let rse = SplitRse {
        train: rse_train,
        valid: eval(Split::Valid, &valid_spikes).phase(Phase::Evaluation)?,
        test: eval(Split::Test, &test_spikes).phase(Phase::Evaluation)?,
    };
    timings.evaluation = t.elapsed().as_secs_f64();
    timings.total = t_total.elapsed().as_secs_f64();
    log::info!("seed {seed}: train RSE {:.4}, test RSE {:?}", rse.train, rse.test);

    let report = RunReport {
        seed,
        init_batch: m_init,
        input_metric: chosen.input,
        output_metric: chosen.output,
        metric_entropies: chosen.entropies,
        spike_counts,
        delays: delays.per_output,
        delay_aggregate: delays.aggregate,
        supports: supports.chosen,
        lambda,
        condition_bound: condition,
        rse,
        timings,
    };
    Ok((model, report))
}

/// Model predictions on every window of `split`, in window order.
pub fn predict_split(model: &SnnModel, ds: &ForecastDataset, split: Split) -> Result<Vec<DiscreteSignal>> {
    if model.d_in != ds.variables() || model.observation != ds.observation || model.horizon != ds.horizon {
        return Err(Error::shape(format!(
            "model expects {} variables with O={}, H={}; dataset has {} with O={}, H={}",
            model.d_in,
            model.observation,
            model.horizon,
            ds.variables(),
            ds.observation,
            ds.horizon
        )));
    }
    model.predict_batch(&ds.inputs(split)?)
}

pub fn evaluate(model: &SnnModel, ds: &ForecastDataset, split: Split) -> Result<f64> {
    let preds = predict_split(model, ds, split)?;
    rse(&preds, &ds.targets(split)?)
}

/// Long-format CSV: window start, step within the horizon, variable, prediction, target.
pub fn write_predictions<W: std::io::Write>(
    out: W,
    ds: &ForecastDataset,
    split: Split,
    predictions: &[DiscreteSignal],
) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["split", "window", "step", "variable", "prediction", "target"])?;
    let starts = ds.windows(split);
    if starts.len() != predictions.len() {
        return Err(Error::shape("one prediction per window expected"));
    }
    let name = split.to_string();
    for (&s, p) in starts.iter().zip(predictions) {
        let y = ds.target(s)?;
        for v in 0..p.channels() {
            for k in 0..p.len() {
                w.write_record([
                    name.clone(),
                    s.to_string(),
                    (ds.observation + k).to_string(),
                    v.to_string(),
                    p.get(v, k).to_string(),
                    y.get(v, k).to_string(),
                ])?;
            }
        }
    }
    w.flush()?;
    Ok(())
}
