//! A desk-scale laboratory for noisy sparse support recovery: complex
//! Gaussian measurement ensembles, an exhaustive joint-typicality decoder
//! with three success metrics, the matching analytic tail/union bounds and
//! measurement-count thresholds, and a seeded Monte Carlo harness that pits
//! the two against each other.

// Validation uses `!(x > 0.0)` so NaN parameters are rejected alongside
// non-positive ones.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bounds;
pub mod decoder;
pub mod experiments;
pub mod linalg;
pub mod signal;

pub use num_complex::Complex64;

pub use bounds::{BoundReport, BoundsError, ChiSquareTails, RegimePoint};
pub use decoder::{
    DecodeError, DecodePolicy, DecodeReport, MetricOutcome, ScanLimits, TypicalityParams,
};
pub use experiments::{AggregateRow, ExperimentConfig, ExperimentError, TailCheckRow, TrialResult};
pub use linalg::{CMatrix, CVector, LinalgError, OrthonormalBasis};
pub use signal::{
    MagnitudeProfile, MeasurementInstance, RegimeKind, Scaling, SeedRecord, SignalError,
    SignalRegime, SparseSignal,
};

/// Which success criterion a run is configured for.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Metric {
    /// Exact support recovery (0-1 loss).
    One,
    /// Recovery of more than a (1 - alpha) fraction of the support.
    Two,
    /// Recovery of more than (1 - gamma) of the signal energy.
    Three,
}

impl Metric {
    pub fn index(&self) -> usize {
        match self {
            Metric::One => 0,
            Metric::Two => 1,
            Metric::Three => 2,
        }
    }

    pub fn number(&self) -> u8 {
        self.index() as u8 + 1
    }
}

impl std::fmt::Display for Metric {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.number())
    }
}

impl std::str::FromStr for Metric {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "1" => Ok(Metric::One),
            "2" => Ok(Metric::Two),
            "3" => Ok(Metric::Three),
            other => Err(format!("metric must be 1, 2 or 3, got `{other}`")),
        }
    }
}

/// Sparsity scaling regime the analytic thresholds assume.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Regime {
    Linear,
    Sublinear,
}

impl std::fmt::Display for Regime {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Regime::Linear => write!(f, "linear"),
            Regime::Sublinear => write!(f, "sublinear"),
        }
    }
}

impl std::str::FromStr for Regime {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "linear" => Ok(Regime::Linear),
            "sublinear" => Ok(Regime::Sublinear),
            other => Err(format!("regime must be linear or sublinear, got `{other}`")),
        }
    }
}
