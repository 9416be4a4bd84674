//! Experiment driver for the `bratteli` crate.
//!
//! A JSON document selects a diagram family and an action; [`run`] dispatches
//! to the library and returns a CSV table plus a JSON summary. The golden
//! suite replays the fixture documents under `fixtures/` and compares their
//! verdicts and summaries with the recorded expectations.

pub mod config;
pub mod golden;
pub mod output;
pub mod run;

pub use config::{Action, DiagramDoc, ExperimentConfig, MeasureDoc, SeqDoc, SubDoc};
pub use output::{Outcome, Status, Table};
pub use run::run;

/// Process exit codes.
pub mod exit {
    pub const OK: i32 = 0;
    /// A computed invariant was violated, or a golden fixture failed.
    pub const CHECK_FAILED: i32 = 1;
    pub const CONFIG: i32 = 2;
    pub const IO: i32 = 3;
    /// Invalid diagram, subdiagram, measure or path parameters.
    pub const PARAMS: i32 = 4;
    /// A window, depth or integer-size cap was hit.
    pub const CAPACITY: i32 = 5;
    /// A numerical procedure failed (eigenvalues, brackets, search).
    pub const NUMERICAL: i32 = 6;
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config: {0}")]
    Config(String),
    #[error("i/o: {0}")]
    Io(String),
    #[error(transparent)]
    Library(#[from] bratteli::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        use bratteli::Error as E;
        match self {
            CliError::Config(_) => exit::CONFIG,
            CliError::Io(_) => exit::IO,
            CliError::Library(e) => match e {
                E::InvalidFamilyParams(_)
                | E::NonPositiveEntry(_)
                | E::VertexOutOfSet { .. }
                | E::LevelOutOfRange(_)
                | E::MissingBoundedSizeParams
                | E::EmptyCuts
                | E::OutsideSupport(_)
                | E::ParamOutOfRange(_)
                | E::NotAdmissible { .. }
                | E::EntryExceedsParent { .. }
                | E::NotSimple(_)
                | E::NotErs(_)
                | E::InvalidPath(_) => exit::PARAMS,
                E::WindowOverflow(_)
                | E::WindowTooSmall(_)
                | E::DepthCapExceeded { .. }
                | E::Overflow(_)
                | E::MissingTailDescriptor { .. }
                | E::UnknownTail(_)
                | E::SupNotComputable(_)
                | E::MatrixTooLarge(_) => exit::CAPACITY,
                E::NotIrreducible
                | E::NotAperiodic(_)
                | E::NoConvergence(_)
                | E::NoFiniteLambda(_)
                | E::BracketFailure(_)
                | E::NoSmallTower(_)
                | E::MaximalWithinDepth
                | E::MinimalWithinDepth => exit::NUMERICAL,
            },
        }
    }
}
