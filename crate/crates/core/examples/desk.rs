//! Trains on a synthetic sine mixture and prints the run report.
//!
//! cargo run --release --example desk -- [neurons] [seed] [criterion]

use sswim_core::harness::{make_windows, synth_dataset, train_sswim, SplitRatios, SynthKind};
use sswim_core::{Architecture, KernelFamily, SswimConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let args: Vec<String> = std::env::args().collect();
    let neurons = args.get(1).map_or(Ok(250), |s| s.parse())?;
    let seed = args.get(2).map_or(Ok(0), |s| s.parse())?;
    let mut cfg = SswimConfig::default();
    if let Some(c) = args.get(3) {
        cfg.weight = c.parse()?;
    }
    let raw = synth_dataset(SynthKind::MultiSine, 4, 3000, 7)?;
    let ds = make_windows(&raw.series, 64, 24, 1, SplitRatios::default())?;
    let arch = Architecture::single(neurons, KernelFamily::Hat);
    let (_, report) = train_sswim(&ds, &arch, &cfg, seed)?;
    print!("{}{}", report.to_text(), report.timings.to_text());
    Ok(())
}
