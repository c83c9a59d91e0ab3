//! BER sweeps, figure recipes, CSV output and model persistence.

mod config;
mod curve;
mod reproduce;
mod sweep;

use thiserror::Error;

pub use config::{Coding, Decoder, Demodulator, ExperimentConfig, MIN_BITS_PER_POINT};
pub use curve::{curve, ebn0_at_ber, parse_grid, theory_ebn0_at_ber};
pub use reproduce::{
    derive_seed, execute, plan, reproduce, train_plan, ExecuteOptions, Figure, Manifest, ReproduceSummary, Scale,
    TrainingPlan, MANIFEST_FILE,
};
pub use sweep::{
    count_bit_errors, read_records, run_sweep, run_sweep_with, write_records, BerRecord, ChunkLayout, SweepModels,
    CSV_HEADER,
};

use crate::channel::ChannelError;
use crate::demodnet::DemodNetError;
use crate::fec::FecError;
use crate::link::LinkError;
use crate::llr::LlrError;
use crate::modem::ModemError;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("config: {0}")]
    Config(String),
    #[error("invalid scenario combination: {0}")]
    Scenario(String),
    #[error("missing checkpoint: {0}")]
    MissingCheckpoint(String),
    #[error("{0}")]
    OutOfScope(String),
    #[error(transparent)]
    DemodNet(#[from] DemodNetError),
    #[error(transparent)]
    Channel(#[from] ChannelError),
    #[error(transparent)]
    Link(#[from] LinkError),
    #[error(transparent)]
    Llr(#[from] LlrError),
    #[error(transparent)]
    Fec(#[from] FecError),
    #[error(transparent)]
    Modem(#[from] ModemError),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

impl HarnessError {
    /// Short machine-readable category.
    pub fn kind(&self) -> &'static str {
        match self {
            HarnessError::Config(_) => "config",
            HarnessError::Scenario(_) => "scenario",
            HarnessError::MissingCheckpoint(_) => "missing-checkpoint",
            HarnessError::OutOfScope(_) => "out-of-scope",
            HarnessError::DemodNet(_) => "model",
            HarnessError::Channel(_) => "channel",
            HarnessError::Link(_) => "link",
            HarnessError::Llr(_) => "llr",
            HarnessError::Fec(_) => "fec",
            HarnessError::Modem(_) => "modem",
            HarnessError::Csv(_) => "csv",
            HarnessError::Io(_) => "io",
        }
    }
}
