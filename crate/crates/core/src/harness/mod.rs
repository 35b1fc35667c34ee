//! Datasets, metrics and the end-to-end training driver.

pub mod ablation;
pub mod dataset;
pub mod metrics;
pub mod train;

pub use ablation::{run_ablation, AblationGrid, AblationRow, CellKey};
pub use dataset::{
    load_csv, make_windows, synth_dataset, synth_dataset_with_noise, ForecastDataset, MinMaxScaler, Split,
    SplitRatios, SynthKind, SynthSeries,
};
pub use metrics::rse;
pub use train::{evaluate, predict_split, train_sswim, write_predictions, PhaseTimings, RunReport, SplitRse};
