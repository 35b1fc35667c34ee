use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use sswim_core::harness::ablation::{mean_over_seeds, write_csv};
use sswim_core::harness::{predict_split, rse, run_ablation, train_sswim, write_predictions, AblationRow, Split};
use sswim_core::SnnModel;

use crate::config::RunConfig;
use crate::CliError;

pub const OUT_ENV: &str = "SSWIM_OUT";
const DEFAULT_OUT: &str = "sswim-out";

fn out_dir(flag: Option<PathBuf>, cfg: Option<&RunConfig>) -> Result<PathBuf, CliError> {
    let dir = flag
        .or_else(|| std::env::var_os(OUT_ENV).map(PathBuf::from))
        .or_else(|| cfg.and_then(|c| c.out.as_ref().map(|p| c.base_dir.join(p))))
        .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT));
    fs::create_dir_all(&dir)?;
    Ok(dir)
}

fn load_config(path: &Path, seeds: &[u64]) -> Result<RunConfig, CliError> {
    let mut cfg = RunConfig::load(path)?;
    if !seeds.is_empty() {
        cfg.seeds = seeds.to_vec();
    }
    Ok(cfg)
}

fn opt(v: Option<f64>) -> String {
    v.map_or("nan".into(), |x| x.to_string())
}

pub fn train(config: &Path, seeds: &[u64], out: Option<PathBuf>) -> Result<(), CliError> {
    let cfg = load_config(config, seeds)?;
    let dir = out_dir(out, Some(&cfg))?;
    let ds = cfg.dataset()?;
    let mut tests = Vec::new();
    for &seed in &cfg.seeds {
        let (model, report) = train_sswim(&ds, &cfg.architecture, &cfg.sswim, seed)?;
        model.save(&dir.join(format!("model_seed{seed}.json")))?;
        fs::write(dir.join(format!("report_seed{seed}.txt")), report.to_text())?;
        fs::write(dir.join(format!("timings_seed{seed}.txt")), report.timings.to_text())?;
        let preds = predict_split(&model, &ds, Split::Test)?;
        let file = BufWriter::new(File::create(dir.join(format!("predictions_seed{seed}.csv")))?);
        write_predictions(file, &ds, Split::Test, &preds)?;
        println!(
            "seed {seed} rse_train {} rse_valid {} rse_test {}",
            report.rse.train,
            opt(report.rse.valid),
            opt(report.rse.test)
        );
        tests.extend(report.rse.test);
    }
    if cfg.seeds.len() > 1 && !tests.is_empty() {
        println!("mean rse_test {}", tests.iter().sum::<f64>() / tests.len() as f64);
    }
    Ok(())
}

pub fn eval(model: &Path, config: &Path, split: &str) -> Result<(), CliError> {
    let split: Split = split.parse().map_err(|e| CliError::Config(format!("--split: {e}")))?;
    let cfg = RunConfig::load(config)?;
    let model = SnnModel::load(model)?;
    let ds = cfg.dataset()?;
    let preds = predict_split(&model, &ds, split)?;
    println!("rse_{split} {}", rse(&preds, &ds.targets(split)?)?);
    Ok(())
}

const MANIFEST: &str = "ablation_manifest.jsonl";

fn read_manifest(path: &Path) -> Result<Vec<AblationRow>, CliError> {
    if !path.exists() {
        return Ok(Vec::new());
    }
    let mut rows = Vec::new();
    for (k, line) in BufReader::new(File::open(path)?).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let row = serde_json::from_str(&line)
            .map_err(|e| CliError::Config(format!("{} line {}: {e}", path.display(), k + 1)))?;
        rows.push(row);
    }
    Ok(rows)
}

pub fn ablate(config: &Path, seeds: &[u64], out: Option<PathBuf>) -> Result<(), CliError> {
    let cfg = load_config(config, seeds)?;
    let dir = out_dir(out, Some(&cfg))?;
    let ds = cfg.dataset()?;
    let grid = cfg.ablation_grid();
    let manifest_path = dir.join(MANIFEST);
    let done = read_manifest(&manifest_path)?;
    if !done.is_empty() {
        log::info!("resuming: {} cells already in {}", done.len(), manifest_path.display());
    }
    let mut manifest = OpenOptions::new().create(true).append(true).open(&manifest_path)?;
    let mut io_err = None;
    let rows = run_ablation(&ds, &grid, &cfg.architecture, &cfg.sswim, &done, |row| {
        let line = serde_json::to_string(row).expect("row serializes");
        if let Err(e) = writeln!(manifest, "{line}").and_then(|_| manifest.flush()) {
            io_err.get_or_insert(e);
        }
    });
    if let Some(e) = io_err {
        return Err(e.into());
    }
    write_csv(BufWriter::new(File::create(dir.join("ablation.csv"))?), &rows)?;
    for (key, mean) in mean_over_seeds(&rows) {
        println!(
            "kernel {} criterion {} normalizer {} neurons {} mean_rse_test {}",
            key.kernel,
            key.criterion,
            key.normalizer,
            key.neurons,
            opt(mean)
        );
    }
    let failed = rows.iter().filter(|r| r.error.is_some()).count();
    if failed > 0 {
        eprintln!("{failed} of {} cells failed; see ablation.csv", rows.len());
    }
    Ok(())
}

fn histogram(values: &[f64], bins: usize) -> Vec<(String, usize)> {
    if values.is_empty() {
        return Vec::new();
    }
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if hi == lo {
        return vec![(format!("[{lo},{hi}]"), values.len())];
    }
    let width = (hi - lo) / bins as f64;
    let mut counts = vec![0usize; bins];
    for &v in values {
        counts[(((v - lo) / width) as usize).min(bins - 1)] += 1;
    }
    counts
        .into_iter()
        .enumerate()
        .map(|(b, c)| {
            let a = lo + b as f64 * width;
            let close = if b + 1 == bins { ']' } else { ')' };
            (format!("[{a},{}{close}", a + width), c)
        })
        .collect()
}

/// Rows of section,layer,index,key,value describing `model`.
pub fn inspect_rows(model: &SnnModel) -> Vec<[String; 5]> {
    let mut rows: Vec<[String; 5]> = Vec::new();
    let mut push = |section: &str, layer: usize, index: String, key: &str, value: String| {
        rows.push([section.into(), layer.to_string(), index, key.into(), value]);
    };
    let n_layers = model.layers.len();
    for (l, layer) in model.layers.iter().enumerate() {
        let l1 = l + 1;
        let kind = if l + 1 == n_layers { "output" } else { "hidden" };
        push("layer", l1, String::new(), "kind", kind.into());
        push("layer", l1, String::new(), "neurons", layer.neurons().to_string());
        push("layer", l1, String::new(), "inputs", layer.inputs().to_string());
        push("layer", l1, String::new(), "pspk", layer.pspk.to_string());
        if let Some(r) = &layer.refractory {
            push("layer", l1, String::new(), "rfk", r.kernel.to_string());
            let c = &r.spike_cost;
            let mean = c.iter().sum::<f64>() / c.len() as f64;
            push("spike_cost", l1, String::new(), "mean", mean.to_string());
            push("spike_cost", l1, String::new(), "min", c.iter().copied().fold(f64::INFINITY, f64::min).to_string());
            push("spike_cost", l1, String::new(), "max", c.iter().copied().fold(f64::NEG_INFINITY, f64::max).to_string());
        }
        for (key, values) in [("delay_hist", &layer.delay), ("support_hist", &layer.support)] {
            for (bin, count) in histogram(values, 10) {
                push(key, l1, String::new(), &bin, count.to_string());
            }
        }
        for i in 0..layer.neurons() {
            let idx = i.to_string();
            push("neuron", l1, idx.clone(), "delay", layer.delay[i].to_string());
            push("neuron", l1, idx.clone(), "support", layer.support[i].to_string());
            push("neuron", l1, idx.clone(), "bias", layer.bias[i].to_string());
            let norm = layer.weights[i].iter().map(|w| w * w).sum::<f64>().sqrt();
            push("neuron", l1, idx.clone(), "weight_norm", norm.to_string());
            if let Some(r) = &layer.refractory {
                push("neuron", l1, idx, "spike_cost", r.spike_cost[i].to_string());
            }
        }
    }
    if let Some(d) = &model.diagnostics {
        push("diagnostics", n_layers, String::new(), "input_metric", d.input_metric.clone());
        push("diagnostics", n_layers, String::new(), "output_metric", d.output_metric.clone());
        for (i, (lam, cb)) in d.lambda.iter().zip(&d.condition_bound).enumerate() {
            push("diagnostics", n_layers, i.to_string(), "lambda", lam.to_string());
            push("diagnostics", n_layers, i.to_string(), "condition_bound", cb.to_string());
        }
    }
    rows
}

pub fn inspect(model: &Path, out: Option<PathBuf>) -> Result<(), CliError> {
    let model = SnnModel::load(model)?;
    let rows = inspect_rows(&model);
    let sink: Box<dyn Write> = match out {
        Some(dir) => {
            fs::create_dir_all(&dir)?;
            Box::new(BufWriter::new(File::create(dir.join("inspect.csv"))?))
        }
        None => Box::new(std::io::stdout().lock()),
    };
    let mut w = csv::Writer::from_writer(sink);
    w.write_record(["section", "layer", "index", "key", "value"])
        .map_err(sswim_core::Error::from)?;
    for r in &rows {
        w.write_record(r).map_err(sswim_core::Error::from)?;
    }
    w.flush()?;
    Ok(())
}
