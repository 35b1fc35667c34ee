//! Single-pass moments.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Welford accumulator for mean and variance.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct RunningMoments {
    count: u64,
    mean: f64,
    m2: f64,
}

impl RunningMoments {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn push(&mut self, x: f64) {
        self.count += 1;
        let delta = x - self.mean;
        self.mean += delta / self.count as f64;
        self.m2 += delta * (x - self.mean);
    }

    pub fn extend(&mut self, xs: &[f64]) {
        xs.iter().for_each(|&x| self.push(x));
    }

    /// Chan et al. pairwise combination.
    pub fn merge(&mut self, other: &RunningMoments) {
        if other.count == 0 {
            return;
        }
        if self.count == 0 {
            *self = *other;
            return;
        }
        let n = (self.count + other.count) as f64;
        let delta = other.mean - self.mean;
        self.mean += delta * other.count as f64 / n;
        self.m2 += other.m2 + delta * delta * self.count as f64 * other.count as f64 / n;
        self.count += other.count;
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    /// Population variance (divides by n).
    pub fn variance(&self) -> f64 {
        if self.count == 0 {
            0.0
        } else {
            (self.m2 / self.count as f64).max(0.0)
        }
    }

    pub fn std(&self) -> f64 {
        self.variance().sqrt()
    }
}

/// Expected temporal mean and std of a voltage contribution, plus its global max.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VoltageStats {
    pub mean: f64,
    pub std: f64,
    pub max: f64,
    pub samples: u64,
}

/// Streams per-sample traces; each trace is reduced to its temporal mean and std.
#[derive(Debug, Clone, Copy)]
pub struct VoltageStatsAccumulator {
    means: RunningMoments,
    stds: RunningMoments,
    max: f64,
}

impl Default for VoltageStatsAccumulator {
    fn default() -> Self {
        Self {
            means: RunningMoments::new(),
            stds: RunningMoments::new(),
            max: f64::NEG_INFINITY,
        }
    }
}

impl VoltageStatsAccumulator {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push_trace(&mut self, trace: &[f64]) {
        let mut m = RunningMoments::new();
        for &v in trace {
            m.push(v);
            if v > self.max {
                self.max = v;
            }
        }
        self.means.push(m.mean());
        self.stds.push(m.std());
    }

    pub fn finish(&self) -> Result<VoltageStats> {
        if self.means.count() == 0 {
            return Err(Error::EmptyStream);
        }
        Ok(VoltageStats {
            mean: self.means.mean(),
            std: self.stds.mean(),
            max: self.max,
            samples: self.means.count(),
        })
    }
}

/// Stats of <w, psi(t)> over a stream of traces already projected on w.
pub fn voltage_stats<'a, I>(traces: I) -> Result<VoltageStats>
where
    I: IntoIterator<Item = &'a [f64]>,
{
    let mut acc = VoltageStatsAccumulator::new();
    for t in traces {
        acc.push_trace(t);
    }
    acc.finish()
}
