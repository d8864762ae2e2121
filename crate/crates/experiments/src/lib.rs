//! Scenario registry and batch runner for the surface diffusion experiments.
//!
//! A run samples trial centers and collocation points, assembles the
//! collocation system, then computes its spectrum and/or integrates it in
//! time. Every artifact lands under `<out>/<scenario>/` and is written
//! atomically.

pub mod config;
pub mod plot;
pub mod run;
pub mod table;

pub use config::{preset, Grid, Layout, Mode, ScenarioConfig, Source, SCENARIOS};
pub use plot::{emit_plots, Series};
pub use run::{run_scenario, RunReport};
pub use table::{run_table, TableCell, TableReport};

#[derive(Debug, thiserror::Error)]
pub enum ExpError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("i/o error: {0}")]
    Io(String),
    #[error(transparent)]
    Core(#[from] rbfmol::Error),
}

impl From<std::io::Error> for ExpError {
    fn from(e: std::io::Error) -> Self {
        ExpError::Io(e.to_string())
    }
}

pub type ExpResult<T> = std::result::Result<T, ExpError>;

/// Process exit status of a batch.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Outcome {
    Success,
    /// Some table cells or runs recorded a failure.
    Partial,
}

impl Outcome {
    pub fn code(self) -> i32 {
        match self {
            Outcome::Success => 0,
            Outcome::Partial => 2,
        }
    }

    pub fn merge(self, other: Outcome) -> Outcome {
        if self == Outcome::Partial || other == Outcome::Partial {
            Outcome::Partial
        } else {
            Outcome::Success
        }
    }
}
