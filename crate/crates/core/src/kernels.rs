//! Compactly supported 1-D kernels for PSP and refractory responses.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::signal::DiscreteSignal;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KernelFamily {
    Hat,
    Morlet,
    Exp,
}

impl KernelFamily {
    pub fn name(self) -> &'static str {
        match self {
            KernelFamily::Hat => "hat",
            KernelFamily::Morlet => "morlet",
            KernelFamily::Exp => "exp",
        }
    }
}

impl fmt::Display for KernelFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for KernelFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "hat" => Ok(KernelFamily::Hat),
            "morlet" => Ok(KernelFamily::Morlet),
            "exp" => Ok(KernelFamily::Exp),
            other => Err(Error::param(format!(
                "unknown kernel family {other:?} (expected hat, morlet or exp)"
            ))),
        }
    }
}

/// Which times are zeroed before the kernel is evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Rectification {
    /// Keep t >= 0.
    Inclusive,
    /// Keep t > 0.
    Exclusive,
    None,
}

impl Rectification {
    #[inline]
    pub fn keeps(self, t: f64) -> bool {
        match self {
            Rectification::Inclusive => t >= 0.0,
            Rectification::Exclusive => t > 0.0,
            Rectification::None => true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct KernelSpec {
    pub family: KernelFamily,
    pub rectification: Rectification,
}

impl KernelSpec {
    pub fn new(family: KernelFamily, rectification: Rectification) -> Self {
        Self {
            family,
            rectification,
        }
    }

    /// PSP kernel convention (t >= 0 kept).
    pub fn pspk(family: KernelFamily) -> Self {
        Self::new(family, Rectification::Inclusive)
    }

    /// Refractory kernel convention (t > 0 kept).
    pub fn rfk(family: KernelFamily) -> Self {
        Self::new(family, Rectification::Exclusive)
    }

    #[inline]
    pub fn evaluate(&self, x: f64) -> f64 {
        evaluate_kernel(self.family, x)
    }

    pub fn place(self, delay: f64, support: f64) -> Result<PlacedKernel> {
        PlacedKernel::new(self, delay, support)
    }
}

/// Analytic kernel value in unscaled coordinates; zero for |x| > 1.
#[inline]
pub fn evaluate_kernel(family: KernelFamily, x: f64) -> f64 {
    if !(x.abs() <= 1.0) {
        return 0.0;
    }
    match family {
        KernelFamily::Hat => 1.0 - x.abs(),
        KernelFamily::Morlet => (-3.0 * x * x).exp() * (2.0 * PI * x).cos(),
        KernelFamily::Exp => (-x).exp(),
    }
}

/// Location of the kernel maximum in unscaled coordinates.
///
/// `Exp` is only meaningful on its causal half, where it decays from x = 0.
pub fn kernel_peak_offset(family: KernelFamily) -> f64 {
    match family {
        KernelFamily::Hat | KernelFamily::Morlet | KernelFamily::Exp => 0.0,
    }
}

/// Squared L2 norm of the discretised kernel, used by the condition diagnostic.
pub fn discrete_energy(taps: &Taps) -> f64 {
    taps.values.iter().map(|v| v * v).sum()
}

/// Kernel shifted by `delay` and stretched by `support`: t -> k((t - delay) / support).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlacedKernel {
    pub spec: KernelSpec,
    pub delay: f64,
    pub support: f64,
}

/// Nonzero stretch of a discretised kernel: `values[k]` sits at step `offset + k`.
#[derive(Debug, Clone, PartialEq)]
pub struct Taps {
    pub offset: usize,
    pub values: Vec<f64>,
}

impl Taps {
    /// One past the last step carrying a tap.
    pub fn end(&self) -> usize {
        self.offset + self.values.len()
    }

    pub fn sum(&self) -> f64 {
        self.values.iter().sum()
    }
}

impl PlacedKernel {
    pub fn new(spec: KernelSpec, delay: f64, support: f64) -> Result<Self> {
        if !(support > 0.0 && support.is_finite()) {
            return Err(Error::param(format!("kernel support must be positive, got {support}")));
        }
        if !(delay >= 0.0 && delay.is_finite()) {
            return Err(Error::param(format!("kernel delay must be nonnegative, got {delay}")));
        }
        Ok(Self {
            spec,
            delay,
            support,
        })
    }

    #[inline]
    pub fn value_at(&self, t: f64) -> f64 {
        if !self.spec.rectification.keeps(t) {
            return 0.0;
        }
        self.spec.evaluate((t - self.delay) / self.support)
    }

    /// Samples at t = k*dt covering the whole support.
    pub fn taps(&self, dt: f64) -> Taps {
        let lo = ((self.delay - self.support) / dt).ceil().max(0.0) as usize;
        let hi = ((self.delay + self.support) / dt).floor().max(0.0) as usize;
        let mut values: Vec<f64> = (lo..=hi).map(|k| self.value_at(k as f64 * dt)).collect();
        let lead = values.iter().take_while(|v| **v == 0.0).count();
        if lead == values.len() {
            return Taps {
                offset: lo,
                values: Vec::new(),
            };
        }
        while values.last() == Some(&0.0) {
            values.pop();
        }
        values.drain(..lead);
        Taps {
            offset: lo + lead,
            values,
        }
    }

    pub fn discretize(&self, dt: f64, grid_len: usize) -> Result<DiscreteSignal> {
        discretize_placed_kernel(self, dt, grid_len)
    }
}

pub fn discretize_placed_kernel(
    pk: &PlacedKernel,
    dt: f64,
    grid_len: usize,
) -> Result<DiscreteSignal> {
    if grid_len == 0 {
        return Err(Error::EmptyGrid);
    }
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::param(format!("dt must be positive, got {dt}")));
    }
    let values = (0..grid_len).map(|k| pk.value_at(k as f64 * dt)).collect();
    DiscreteSignal::from_values(1, grid_len, dt, values)
}
