use std::fmt;
use std::path::PathBuf;

pub type Result<T> = std::result::Result<T, Error>;

/// Pipeline stage an error was raised in.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Phase {
    Data,
    MetricSelection,
    Hidden(usize),
    Delays,
    Supports,
    Weights,
    Evaluation,
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Phase::Data => f.write_str("data"),
            Phase::MetricSelection => f.write_str("metric-selection"),
            Phase::Hidden(l) => write!(f, "hidden-layer-{l}"),
            Phase::Delays => f.write_str("output-delays"),
            Phase::Supports => f.write_str("output-supports"),
            Phase::Weights => f.write_str("output-weights"),
            Phase::Evaluation => f.write_str("evaluation"),
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("empty grid")]
    EmptyGrid,
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("degenerate pair distribution: every pair has zero probability")]
    DegenerateDistribution,
    #[error("trivial pair: both samples produce identical PSP contributions")]
    TrivialPair,
    #[error("degenerate neuron {neuron}: voltage std {std:e} below floor")]
    DegenerateNeuron { neuron: usize, std: f64 },
    #[error("neuron {neuron}: no usable pair after {attempts} attempts ({last})")]
    ResampleExhausted {
        neuron: usize,
        attempts: usize,
        last: Box<Error>,
    },
    #[error("silent network: the last hidden layer emitted no spikes")]
    SilentNetwork,
    #[error("eigendecomposition did not converge for output neuron {0}")]
    EigenNonConvergence(usize),
    #[error("empty dataset")]
    EmptyDataset,
    #[error("empty stream")]
    EmptyStream,
    #[error("series too short: {steps} steps, need at least {needed}")]
    SeriesTooShort { steps: usize, needed: usize },
    #[error("RSE undefined: targets are constant over the evaluation set")]
    ConstantTargets,
    #[error("{}: line {line}, column {column}: {msg}", path.display())]
    Parse {
        path: PathBuf,
        line: usize,
        column: usize,
        msg: String,
    },
    #[error("{phase}: {source}")]
    Phase {
        phase: Phase,
        #[source]
        source: Box<Error>,
    },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn shape(msg: impl Into<String>) -> Self {
        Error::Shape(msg.into())
    }

    pub(crate) fn param(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }

    /// Wraps `self` with the pipeline phase it came from.
    pub fn in_phase(self, phase: Phase) -> Self {
        match self {
            e @ Error::Phase { .. } => e,
            other => Error::Phase {
                phase,
                source: Box::new(other),
            },
        }
    }

    pub fn phase(&self) -> Option<Phase> {
        match self {
            Error::Phase { phase, .. } => Some(*phase),
            _ => None,
        }
    }
}

pub(crate) trait PhaseExt<T> {
    fn phase(self, phase: Phase) -> Result<T>;
}

impl<T> PhaseExt<T> for Result<T> {
    fn phase(self, phase: Phase) -> Result<T> {
        self.map_err(|e| e.in_phase(phase))
    }
}
