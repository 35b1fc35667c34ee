//! Grid-sampled signals and spike trains.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Multichannel real signal on a uniform time grid, stored channel-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscreteSignal {
    channels: usize,
    len: usize,
    dt: f64,
    values: Vec<f64>,
}

impl DiscreteSignal {
    pub fn zeros(channels: usize, len: usize, dt: f64) -> Self {
        Self {
            channels,
            len,
            dt,
            values: vec![0.0; channels * len],
        }
    }

    /// Builds a signal from channel-major values.
    pub fn from_values(channels: usize, len: usize, dt: f64, values: Vec<f64>) -> Result<Self> {
        if channels == 0 {
            return Err(Error::shape("signal needs at least one channel"));
        }
        if values.len() != channels * len {
            return Err(Error::shape(format!(
                "{} values for {channels} channels x {len} steps",
                values.len()
            )));
        }
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::param(format!("dt must be positive, got {dt}")));
        }
        if let Some(bad) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::param(format!(
                "non-finite value at channel {}, step {}",
                bad / len.max(1),
                bad % len.max(1)
            )));
        }
        Ok(Self {
            channels,
            len,
            dt,
            values,
        })
    }

    /// One row per channel; all rows must have equal length.
    pub fn from_rows(rows: &[Vec<f64>], dt: f64) -> Result<Self> {
        let len = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != len) {
            return Err(Error::shape("ragged channel rows"));
        }
        Self::from_values(rows.len(), len, dt, rows.concat())
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn channel(&self, c: usize) -> &[f64] {
        &self.values[c * self.len..(c + 1) * self.len]
    }

    pub fn channel_mut(&mut self, c: usize) -> &mut [f64] {
        &mut self.values[c * self.len..(c + 1) * self.len]
    }

    pub fn get(&self, c: usize, t: usize) -> f64 {
        self.values[c * self.len + t]
    }

    pub fn set(&mut self, c: usize, t: usize, v: f64) {
        self.values[c * self.len + t] = v;
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn iter_channels(&self) -> impl Iterator<Item = &[f64]> {
        self.values.chunks_exact(self.len.max(1)).take(self.channels)
    }

    /// Copy of the steps in `window`, all channels.
    pub fn slice(&self, window: std::ops::Range<usize>) -> Result<Self> {
        if window.end > self.len || window.start > window.end {
            return Err(Error::shape(format!(
                "window {window:?} outside grid of length {}",
                self.len
            )));
        }
        let mut values = Vec::with_capacity(self.channels * window.len());
        for c in 0..self.channels {
            values.extend_from_slice(&self.channel(c)[window.clone()]);
        }
        Ok(Self {
            channels: self.channels,
            len: window.len(),
            dt: self.dt,
            values,
        })
    }

    /// Per-channel temporal mean subtracted.
    pub fn centered(&self) -> Self {
        let mut out = self.clone();
        if self.len == 0 {
            return out;
        }
        for c in 0..self.channels {
            let ch = out.channel_mut(c);
            let mean = ch.iter().sum::<f64>() / ch.len() as f64;
            ch.iter_mut().for_each(|v| *v -= mean);
        }
        out
    }

    /// L2 norm of each channel (dt-weighted).
    pub fn channel_norms(&self) -> Vec<f64> {
        self.iter_channels()
            .map(|ch| (ch.iter().map(|v| v * v).sum::<f64>() * self.dt).sqrt())
            .collect()
    }
}

/// Per-neuron spike step indices on a shared grid.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SpikeTrainSet {
    len: usize,
    trains: Vec<Vec<usize>>,
}

impl SpikeTrainSet {
    pub fn empty(neurons: usize, len: usize) -> Self {
        Self {
            len,
            trains: vec![Vec::new(); neurons],
        }
    }

    pub fn from_trains(trains: Vec<Vec<usize>>, len: usize) -> Result<Self> {
        for (j, train) in trains.iter().enumerate() {
            if train.windows(2).any(|w| w[0] >= w[1]) {
                return Err(Error::param(format!(
                    "spike train {j} is not strictly increasing"
                )));
            }
            if train.last().is_some_and(|&t| t >= len) {
                return Err(Error::param(format!(
                    "spike train {j} has a spike outside [0, {len})"
                )));
            }
        }
        Ok(Self { len, trains })
    }

    pub fn neurons(&self) -> usize {
        self.trains.len()
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn train(&self, j: usize) -> &[usize] {
        &self.trains[j]
    }

    pub fn trains(&self) -> &[Vec<usize>] {
        &self.trains
    }

    /// Appends a spike; steps must arrive in increasing order per neuron.
    pub(crate) fn push(&mut self, j: usize, t: usize) {
        debug_assert!(t < self.len);
        debug_assert!(self.trains[j].last().is_none_or(|&last| last < t));
        self.trains[j].push(t);
    }

    pub fn total_spikes(&self) -> usize {
        self.trains.iter().map(Vec::len).sum()
    }

    pub fn counts(&self) -> Vec<usize> {
        self.trains.iter().map(Vec::len).collect()
    }

    /// Dirac comb realisation: 1/dt at every spike step.
    pub fn to_dirac_comb(&self, dt: f64) -> DiscreteSignal {
        let mut out = DiscreteSignal::zeros(self.neurons().max(1), self.len, dt);
        for (j, train) in self.trains.iter().enumerate() {
            for &t in train {
                out.set(j, t, 1.0 / dt);
            }
        }
        out
    }
}
