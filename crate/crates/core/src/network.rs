//! Feed-forward spike response model: parameters and discrete-time simulation.

use std::ops::Range;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::{KernelFamily, KernelSpec, PlacedKernel, Taps};
use crate::signal::{DiscreteSignal, SpikeTrainSet};

/// Firing threshold shared by every hidden neuron.
pub const THRESHOLD: f64 = 1.0;

/// Refractory part of a hidden layer: c_i * q((t - t_f) / s_i) for past spikes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Refractory {
    pub kernel: KernelFamily,
    pub spike_cost: Vec<f64>,
    pub support: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerParams {
    pub pspk: KernelFamily,
    /// Row i holds the incoming weights of neuron i.
    pub weights: Vec<Vec<f64>>,
    pub bias: Vec<f64>,
    pub delay: Vec<f64>,
    pub support: Vec<f64>,
    /// Present on hidden layers only.
    pub refractory: Option<Refractory>,
}

impl LayerParams {
    pub fn neurons(&self) -> usize {
        self.bias.len()
    }

    pub fn inputs(&self) -> usize {
        self.weights.first().map_or(0, Vec::len)
    }

    pub fn is_hidden(&self) -> bool {
        self.refractory.is_some()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.neurons();
        if n == 0 {
            return Err(Error::shape("layer has no neurons"));
        }
        if self.weights.len() != n || self.delay.len() != n || self.support.len() != n {
            return Err(Error::shape(format!(
                "layer of {n} neurons has {} weight rows, {} delays, {} supports",
                self.weights.len(),
                self.delay.len(),
                self.support.len()
            )));
        }
        let width = self.inputs();
        if width == 0 || self.weights.iter().any(|r| r.len() != width) {
            return Err(Error::shape("weight rows must share a nonzero width"));
        }
        let finite = |v: &[f64]| v.iter().all(|x| x.is_finite());
        if !self.weights.iter().all(|r| finite(r)) || !finite(&self.bias) {
            return Err(Error::param("non-finite weight or bias"));
        }
        if let Some(i) = (0..n).find(|&i| !(self.delay[i] >= 0.0 && self.delay[i].is_finite())) {
            return Err(Error::param(format!("neuron {i}: delay {} < 0", self.delay[i])));
        }
        if let Some(i) = (0..n).find(|&i| !(self.support[i] > 0.0 && self.support[i].is_finite())) {
            return Err(Error::param(format!("neuron {i}: support {} <= 0", self.support[i])));
        }
        if let Some(r) = &self.refractory {
            if r.spike_cost.len() != n || r.support.len() != n {
                return Err(Error::shape("refractory vectors do not match layer width"));
            }
            if !finite(&r.spike_cost) || r.support.iter().any(|s| !(*s > 0.0 && s.is_finite())) {
                return Err(Error::param("refractory support must be positive and costs finite"));
            }
        }
        Ok(())
    }

    pub fn placed_kernel(&self, i: usize) -> PlacedKernel {
        PlacedKernel {
            spec: KernelSpec::pspk(self.pspk),
            delay: self.delay[i],
            support: self.support[i],
        }
    }

    fn refractory_kernel(&self, i: usize) -> Option<(f64, PlacedKernel)> {
        self.refractory.as_ref().map(|r| {
            (
                r.spike_cost[i],
                PlacedKernel {
                    spec: KernelSpec::rfk(r.kernel),
                    delay: 0.0,
                    support: r.support[i],
                },
            )
        })
    }
}

/// What a layer reads: the real-valued model input or the spikes of the layer below.
#[derive(Debug, Clone, Copy)]
pub enum LayerInput<'a> {
    Dense(&'a DiscreteSignal),
    Spikes(&'a SpikeTrainSet),
}

impl LayerInput<'_> {
    pub fn width(&self) -> usize {
        match self {
            LayerInput::Dense(s) => s.channels(),
            LayerInput::Spikes(s) => s.neurons(),
        }
    }
}

/// `buf[s - start] += scale * taps(s - spike)` for every step s with start <= s < start + buf.len().
#[inline]
pub(crate) fn place_taps(buf: &mut [f64], start: usize, taps: &Taps, spike: usize, scale: f64) {
    let first = spike + taps.offset;
    let end = start + buf.len();
    if first >= end || spike + taps.end() <= start {
        return;
    }
    let lo = first.max(start);
    let hi = (spike + taps.end()).min(end);
    let k0 = lo - first;
    for (b, v) in buf[lo - start..hi - start]
        .iter_mut()
        .zip(&taps.values[k0..k0 + (hi - lo)])
    {
        *b += scale * v;
    }
}

/// Causal discrete convolution dt * sum_k taps[k] x[t - k] written to `out[t - start]`.
/// `x` is zero beyond its length.
pub(crate) fn dense_conv(x: &[f64], taps: &Taps, dt: f64, start: usize, out: &mut [f64]) {
    for (t_rel, o) in out.iter_mut().enumerate() {
        let t = start + t_rel;
        if t < taps.offset {
            continue;
        }
        let kmax = (t - taps.offset + 1).min(taps.values.len());
        let mut acc = 0.0;
        for k in 0..kmax {
            let s = t - taps.offset - k;
            if s < x.len() {
                acc += taps.values[k] * x[s];
            }
        }
        *o += dt * acc;
    }
}

/// Per-channel PSP contributions of one placed kernel restricted to `window`.
pub fn psp_channels(
    kernel: &PlacedKernel,
    input: LayerInput<'_>,
    dt: f64,
    window: Range<usize>,
) -> Result<DiscreteSignal> {
    if window.is_empty() {
        return Err(Error::EmptyGrid);
    }
    let taps = kernel.taps(dt);
    let width = input.width();
    let mut out = DiscreteSignal::zeros(width, window.len(), dt);
    match input {
        LayerInput::Dense(x) => {
            for j in 0..width {
                dense_conv(x.channel(j), &taps, dt, window.start, out.channel_mut(j));
            }
        }
        LayerInput::Spikes(s) => {
            for j in 0..width {
                let ch = out.channel_mut(j);
                for &t in s.train(j) {
                    place_taps(ch, window.start, &taps, t, 1.0);
                }
            }
        }
    }
    Ok(out)
}

/// psi_ij for neuron `i` of `layer` over `window`, one channel per presynaptic input.
pub fn psp_contributions(
    layer: &LayerParams,
    neuron: usize,
    input: LayerInput<'_>,
    dt: f64,
    window: Range<usize>,
) -> Result<DiscreteSignal> {
    check_width(layer, input)?;
    if neuron >= layer.neurons() {
        return Err(Error::shape(format!("neuron {neuron} out of range")));
    }
    psp_channels(&layer.placed_kernel(neuron), input, dt, window)
}

/// sum_j w_j psi_j(t) for t in `window`, without materialising the channels.
pub fn weighted_drive(
    taps: &Taps,
    weights: &[f64],
    input: LayerInput<'_>,
    dt: f64,
    window: Range<usize>,
    out: &mut [f64],
) {
    debug_assert_eq!(out.len(), window.len());
    match input {
        LayerInput::Dense(x) => {
            let mut mixed = vec![0.0; x.len()];
            for (j, &w) in weights.iter().enumerate() {
                if w != 0.0 {
                    for (m, v) in mixed.iter_mut().zip(x.channel(j)) {
                        *m += w * v;
                    }
                }
            }
            dense_conv(&mixed, taps, dt, window.start, out);
        }
        LayerInput::Spikes(s) => {
            for (j, &w) in weights.iter().enumerate() {
                if w != 0.0 {
                    for &t in s.train(j) {
                        place_taps(out, window.start, taps, t, w);
                    }
                }
            }
        }
    }
}

fn check_width(layer: &LayerParams, input: LayerInput<'_>) -> Result<()> {
    if input.width() != layer.inputs() {
        return Err(Error::shape(format!(
            "layer expects {} inputs, got {}",
            layer.inputs(),
            input.width()
        )));
    }
    Ok(())
}

/// Runs a hidden layer over steps 0..grid_len, returning spikes and the full voltage trace.
pub fn simulate_hidden_layer(
    layer: &LayerParams,
    input: LayerInput<'_>,
    dt: f64,
    grid_len: usize,
) -> Result<(SpikeTrainSet, DiscreteSignal)> {
    check_width(layer, input)?;
    if !layer.is_hidden() {
        return Err(Error::shape("output layer cannot be simulated as a spiking layer"));
    }
    if grid_len == 0 {
        return Err(Error::EmptyGrid);
    }
    let n = layer.neurons();
    let mut spikes = SpikeTrainSet::empty(n, grid_len);
    let mut volts = DiscreteSignal::zeros(n, grid_len, dt);
    let mut refr = vec![0.0; grid_len];
    for i in 0..n {
        let v = volts.channel_mut(i);
        let taps = layer.placed_kernel(i).taps(dt);
        weighted_drive(&taps, &layer.weights[i], input, dt, 0..grid_len, v);
        let (cost, rk) = layer.refractory_kernel(i).expect("hidden layer");
        let rtaps = rk.taps(dt);
        debug_assert!(rtaps.values.is_empty() || rtaps.offset >= 1);
        refr.iter_mut().for_each(|r| *r = 0.0);
        let b = layer.bias[i];
        for t in 0..grid_len {
            v[t] += b + refr[t];
            if v[t] >= THRESHOLD {
                spikes.push(i, t);
                if cost != 0.0 {
                    place_taps(&mut refr, 0, &rtaps, t, cost);
                }
            }
        }
    }
    Ok((spikes, volts))
}

/// Spikes only; the voltage buffer is reused across neurons.
pub fn hidden_spikes(
    layer: &LayerParams,
    input: LayerInput<'_>,
    dt: f64,
    grid_len: usize,
) -> Result<SpikeTrainSet> {
    simulate_hidden_layer(layer, input, dt, grid_len).map(|(s, _)| s)
}

/// Affine, non-thresholded readout over `window`.
pub fn output_voltages(
    layer: &LayerParams,
    input: &SpikeTrainSet,
    dt: f64,
    window: Range<usize>,
) -> Result<DiscreteSignal> {
    let input = LayerInput::Spikes(input);
    check_width(layer, input)?;
    if window.is_empty() {
        return Err(Error::EmptyGrid);
    }
    let mut out = DiscreteSignal::zeros(layer.neurons(), window.len(), dt);
    for i in 0..layer.neurons() {
        let ch = out.channel_mut(i);
        ch.iter_mut().for_each(|v| *v = layer.bias[i]);
        let taps = layer.placed_kernel(i).taps(dt);
        weighted_drive(&taps, &layer.weights[i], input, dt, window.clone(), ch);
    }
    Ok(out)
}

/// Per-output diagnostics recorded by training.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitDiagnostics {
    pub lambda: Vec<f64>,
    pub condition_bound: Vec<f64>,
    pub input_metric: String,
    pub output_metric: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SnnModel {
    pub d_in: usize,
    pub d_out: usize,
    /// Input length O; the forecast window starts at T = O.
    pub observation: usize,
    pub horizon: usize,
    pub dt: f64,
    /// Hidden layers followed by the output layer.
    pub layers: Vec<LayerParams>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub diagnostics: Option<FitDiagnostics>,
}

/// Prediction on the forecast window plus every hidden layer's spikes.
#[derive(Debug, Clone)]
pub struct ForwardPass {
    pub prediction: DiscreteSignal,
    pub hidden: Vec<SpikeTrainSet>,
}

impl SnnModel {
    pub fn grid_len(&self) -> usize {
        self.observation + self.horizon
    }

    pub fn forecast_window(&self) -> Range<usize> {
        self.observation..self.grid_len()
    }

    pub fn hidden_layers(&self) -> &[LayerParams] {
        &self.layers[..self.layers.len().saturating_sub(1)]
    }

    pub fn output_layer(&self) -> &LayerParams {
        self.layers.last().expect("validated model has an output layer")
    }

    pub fn validate(&self) -> Result<()> {
        if self.layers.len() < 2 {
            return Err(Error::shape("model needs at least one hidden layer and an output layer"));
        }
        if self.observation == 0 || self.horizon == 0 {
            return Err(Error::EmptyGrid);
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::param("dt must be positive"));
        }
        let mut width = self.d_in;
        for (l, layer) in self.layers.iter().enumerate() {
            layer.validate()?;
            let last = l + 1 == self.layers.len();
            if layer.inputs() != width {
                return Err(Error::shape(format!(
                    "layer {l} expects {} inputs, previous width is {width}",
                    layer.inputs()
                )));
            }
            if layer.is_hidden() == last {
                return Err(Error::shape(format!(
                    "layer {l}: refractory terms belong to hidden layers only"
                )));
            }
            width = layer.neurons();
        }
        if width != self.d_out {
            return Err(Error::shape(format!("output width {width} != d_out {}", self.d_out)));
        }
        Ok(())
    }

    /// Spikes of every hidden layer for an input of `d_in` channels and length O.
    pub fn hidden_pass(&self, x: &DiscreteSignal) -> Result<Vec<SpikeTrainSet>> {
        if x.channels() != self.d_in || x.len() != self.observation {
            return Err(Error::shape(format!(
                "input is {}x{}, model expects {}x{}",
                x.channels(),
                x.len(),
                self.d_in,
                self.observation
            )));
        }
        let mut out: Vec<SpikeTrainSet> = Vec::with_capacity(self.layers.len() - 1);
        for layer in self.hidden_layers() {
            let input = match out.last() {
                None => LayerInput::Dense(x),
                Some(s) => LayerInput::Spikes(s),
            };
            let s = hidden_spikes(layer, input, self.dt, self.grid_len())?;
            out.push(s);
        }
        Ok(out)
    }

    pub fn forward(&self, x: &DiscreteSignal) -> Result<ForwardPass> {
        let hidden = self.hidden_pass(x)?;
        let prediction = output_voltages(
            self.output_layer(),
            hidden.last().expect("at least one hidden layer"),
            self.dt,
            self.forecast_window(),
        )?;
        Ok(ForwardPass { prediction, hidden })
    }

    /// Predictions for many inputs; order follows `xs`.
    pub fn predict_batch(&self, xs: &[DiscreteSignal]) -> Result<Vec<DiscreteSignal>> {
        xs.par_iter()
            .map(|x| self.forward(x).map(|f| f.prediction))
            .collect()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let model: SnnModel = serde_json::from_str(text)?;
        model.validate()?;
        Ok(model)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}
