//! Acceptance criteria, one PASS/FAIL line each.
//!
//! Exits 0 unless `SSWIM_ACCEPTANCE_STRICT=1` is set, in which case any
//! failing criterion makes the process exit 1.

mod common;

use std::time::Instant;

use common::criteria::{self, Check};
use sswim_core::harness::{train_sswim, ForecastDataset, RunReport};
use sswim_core::{Architecture, KernelFamily, SnnModel, SswimConfig, WeightCriterion};

const EIGEN_INSTANCES: usize = 20;
const SPECTRUM_INSTANCES: usize = 100;
const NORMALIZER_INSTANCES: usize = 20;
const QR_INSTANCES: usize = 20;
const RIDGE_INSTANCES: usize = 20;
const AXIOM_TRIPLES: usize = 1_000;

const DESK_NEURONS: usize = 250;
const SMALL_NEURONS: usize = 50;
const SEEDS: [u64; 3] = [0, 1, 2];
const RSE_BAR: f64 = 0.6;
const RSE_MEAN_PREDICTOR: f64 = 1.0;
/// Mean test RSE of the reference run on the desk task.
const RSE_REFERENCE: f64 = 0.625;
const RSE_REFERENCE_TOL: f64 = 0.05;
const DESK_SECONDS: f64 = 300.0;

struct Run {
    model: SnnModel,
    report: RunReport,
}

fn train(ds: &ForecastDataset, neurons: usize, weight: WeightCriterion, seed: u64) -> Result<Run, String> {
    let arch = Architecture::single(neurons, KernelFamily::Hat);
    let cfg = SswimConfig {
        weight,
        ..SswimConfig::default()
    };
    let (model, report) = train_sswim(ds, &arch, &cfg, seed).map_err(|e| format!("seed {seed}: {e}"))?;
    Ok(Run { model, report })
}

fn test_rse(run: &Run) -> f64 {
    run.report.rse.test.expect("desk task has a test split")
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

fn desk_end_to_end(dot: &[Run], seconds: f64) -> Check {
    let rses: Vec<f64> = dot.iter().map(test_rse).collect();
    let m = mean(&rses);
    let detail = format!("test RSE {rses:.4?}, mean {m:.4}, {seconds:.0}s");
    let mut problems = Vec::new();
    if !(m <= RSE_BAR) {
        problems.push(format!("mean above {RSE_BAR}"));
    }
    if !(m < RSE_MEAN_PREDICTOR) {
        problems.push("not below the mean predictor".to_string());
    }
    if (m - RSE_REFERENCE).abs() > RSE_REFERENCE_TOL {
        problems.push(format!("off the reference {RSE_REFERENCE} by more than {RSE_REFERENCE_TOL}"));
    }
    if seconds >= DESK_SECONDS {
        problems.push(format!("slower than {DESK_SECONDS}s"));
    }
    if problems.is_empty() {
        Ok(detail)
    } else {
        Err(format!("{detail}: {}", problems.join("; ")))
    }
}

fn ablation_echo(dot: &[Run], random: &[Run], small: &[Run]) -> Check {
    let d = mean(&dot.iter().map(test_rse).collect::<Vec<_>>());
    let r = mean(&random.iter().map(test_rse).collect::<Vec<_>>());
    let s = mean(&small.iter().map(test_rse).collect::<Vec<_>>());
    let detail = format!("dot {d:.4} random {r:.4}; {SMALL_NEURONS} neurons {s:.4} -> {DESK_NEURONS} neurons {d:.4}");
    if d <= r && d <= s {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn determinism(first: &Run, ds: &ForecastDataset) -> Check {
    let again = train(ds, DESK_NEURONS, WeightCriterion::Dot, SEEDS[0])?;
    let a = first.model.to_json().map_err(|e| e.to_string())?;
    let b = again.model.to_json().map_err(|e| e.to_string())?;
    if a == b {
        Ok(format!("seed {} serialises to the same {} bytes twice", SEEDS[0], a.len()))
    } else {
        Err("serialised models differ".into())
    }
}

fn report(id: usize, name: &str, start: Instant, check: Check, failures: &mut usize) {
    let secs = start.elapsed().as_secs_f64();
    match check {
        Ok(detail) => println!("PASS {id:>2} {name}: {detail} [{secs:.1}s]"),
        Err(detail) => {
            *failures += 1;
            println!("FAIL {id:>2} {name}: {detail} [{secs:.1}s]");
        }
    }
}

fn timed(f: impl FnOnce() -> Check) -> (Instant, Check) {
    let start = Instant::now();
    let c = f();
    (start, c)
}

fn main() {
    let mut failures = 0;
    let fast: [(&str, Box<dyn FnOnce() -> Check>); 10] = [
        ("eigencriterion oracle", Box::new(|| criteria::eigencriterion(EIGEN_INSTANCES, criteria::EIGEN_PROBES))),
        ("separation spectrum nonnegative", Box::new(|| criteria::dist_spectrum(SPECTRUM_INSTANCES))),
        ("normalisation exactness", Box::new(|| criteria::normalization_exactness(NORMALIZER_INSTANCES))),
        ("silence correction", Box::new(criteria::silence_correction)),
        ("QR residual identity", Box::new(|| criteria::qr_identity(QR_INSTANCES))),
        ("batched normal equations", Box::new(|| criteria::batched_ridge(RIDGE_INSTANCES))),
        ("planted delay recovery", Box::new(criteria::planted_delay)),
        ("planted support recovery", Box::new(criteria::planted_support)),
        ("pseudometric axioms", Box::new(|| criteria::pseudometric_axioms(AXIOM_TRIPLES))),
        ("entropy bounds", Box::new(criteria::entropy_bounds)),
    ];
    for (k, (name, f)) in fast.into_iter().enumerate() {
        let (start, check) = timed(f);
        report(k + 1, name, start, check, &mut failures);
    }

    let ds = common::desk_dataset();
    let runs = |neurons: usize, weight: WeightCriterion| -> Result<Vec<Run>, String> {
        SEEDS.iter().map(|&s| train(&ds, neurons, weight, s)).collect()
    };
    let start = Instant::now();
    let dot = runs(DESK_NEURONS, WeightCriterion::Dot);
    let desk_secs = start.elapsed().as_secs_f64();
    let check = dot.as_ref().map_err(Clone::clone).and_then(|d| desk_end_to_end(d, desk_secs));
    report(11, "desk end-to-end", start, check, &mut failures);

    let start = Instant::now();
    let check = dot.as_ref().map_err(Clone::clone).and_then(|d| {
        let random = runs(DESK_NEURONS, WeightCriterion::Random)?;
        let small = runs(SMALL_NEURONS, WeightCriterion::Dot)?;
        ablation_echo(d, &random, &small)
    });
    report(12, "ablation echo", start, check, &mut failures);

    let start = Instant::now();
    let check = dot.as_ref().map_err(Clone::clone).and_then(|d| determinism(&d[0], &ds));
    report(13, "determinism", start, check, &mut failures);

    println!("{} of 13 criteria pass", 13 - failures);
    let strict = std::env::var("SSWIM_ACCEPTANCE_STRICT").is_ok_and(|v| v == "1");
    if strict && failures > 0 {
        std::process::exit(1);
    }
}
