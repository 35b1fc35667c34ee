//! Cartesian sweeps over weight criteria, normalizers, kernels and widths.

use serde::{Deserialize, Serialize};

use crate::config::{Architecture, NormalizerKind, SswimConfig, WeightCriterion};
use crate::error::Result;
use crate::harness::dataset::ForecastDataset;
use crate::harness::train::train_sswim;
use crate::kernels::KernelFamily;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AblationGrid {
    pub kernels: Vec<KernelFamily>,
    pub criteria: Vec<WeightCriterion>,
    pub normalizers: Vec<NormalizerKind>,
    pub neurons: Vec<usize>,
    pub seeds: Vec<u64>,
}

/// One sweep cell for one seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct CellKey {
    pub kernel: KernelFamily,
    pub criterion: WeightCriterion,
    pub normalizer: NormalizerKind,
    pub neurons: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationRow {
    pub key: CellKey,
    pub rse_train: Option<f64>,
    pub rse_valid: Option<f64>,
    pub rse_test: Option<f64>,
    /// Failure message; the sweep continues past failed cells.
    pub error: Option<String>,
}

impl AblationGrid {
    pub fn cells(&self) -> Vec<CellKey> {
        let mut out = Vec::new();
        for &kernel in &self.kernels {
            for &criterion in &self.criteria {
                for &normalizer in &self.normalizers {
                    for &neurons in &self.neurons {
                        for &seed in &self.seeds {
                            out.push(CellKey {
                                kernel,
                                criterion,
                                normalizer,
                                neurons,
                                seed,
                            });
                        }
                    }
                }
            }
        }
        out
    }
}

pub fn run_cell(ds: &ForecastDataset, arch: &Architecture, cfg: &SswimConfig, key: CellKey) -> AblationRow {
    let mut arch = arch.clone();
    arch.pspk = key.kernel;
    if let Some(last) = arch.hidden.last_mut() {
        *last = key.neurons;
    }
    let cfg = SswimConfig {
        weight: key.criterion,
        normalizer: key.normalizer,
        ..cfg.clone()
    };
    match train_sswim(ds, &arch, &cfg, key.seed) {
        Ok((_, report)) => AblationRow {
            key,
            rse_train: Some(report.rse.train),
            rse_valid: report.rse.valid,
            rse_test: report.rse.test,
            error: None,
        },
        Err(e) => {
            log::warn!("cell {key:?} failed: {e}");
            AblationRow {
                key,
                rse_train: None,
                rse_valid: None,
                rse_test: None,
                error: Some(e.to_string()),
            }
        }
    }
}

/// Runs every cell not already in `completed`, calling `on_row` after each new one.
/// The width sweep replaces the last hidden layer's size.
pub fn run_ablation<F: FnMut(&AblationRow)>(
    ds: &ForecastDataset,
    grid: &AblationGrid,
    arch: &Architecture,
    cfg: &SswimConfig,
    completed: &[AblationRow],
    mut on_row: F,
) -> Vec<AblationRow> {
    grid.cells()
        .into_iter()
        .map(|key| match completed.iter().find(|r| r.key == key) {
            Some(r) => r.clone(),
            None => {
                let row = run_cell(ds, arch, cfg, key);
                on_row(&row);
                row
            }
        })
        .collect()
}

/// Mean test RSE over seeds of every (kernel, criterion, normalizer, neurons)
/// cell, ignoring failed runs.
pub fn mean_over_seeds(rows: &[AblationRow]) -> Vec<(CellKey, Option<f64>)> {
    let mut out: Vec<(CellKey, Vec<f64>)> = Vec::new();
    for r in rows {
        let key = CellKey { seed: 0, ..r.key };
        let slot = match out.iter().position(|(k, _)| *k == key) {
            Some(p) => p,
            None => {
                out.push((key, Vec::new()));
                out.len() - 1
            }
        };
        if let Some(v) = r.rse_test {
            out[slot].1.push(v);
        }
    }
    out.into_iter()
        .map(|(k, v)| {
            let mean = (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64);
            (k, mean)
        })
        .collect()
}

pub const CSV_HEADER: [&str; 10] = [
    "kernel",
    "criterion",
    "normalizer",
    "neurons",
    "seed",
    "status",
    "rse_train",
    "rse_valid",
    "rse_test",
    "error",
];

pub fn write_csv<W: std::io::Write>(out: W, rows: &[AblationRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CSV_HEADER)?;
    let opt = |v: Option<f64>| v.map_or(String::new(), |x| x.to_string());
    for r in rows {
        w.write_record([
            r.key.kernel.to_string(),
            r.key.criterion.to_string(),
            r.key.normalizer.to_string(),
            r.key.neurons.to_string(),
            r.key.seed.to_string(),
            if r.error.is_some() { "failed" } else { "ok" }.to_string(),
            opt(r.rse_train),
            opt(r.rse_valid),
            opt(r.rse_test),
            r.error.clone().unwrap_or_default(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
