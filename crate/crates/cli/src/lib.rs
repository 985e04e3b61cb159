//! Experiment orchestration behind the `cfvae` binary.

pub mod config;
pub mod pipeline;

pub use config::{Arm, ExperimentConfig, LoadedConfig};

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error("invalid configuration: {0}")]
    Invalid(String),
    #[error(transparent)]
    Core(#[from] cfvae_core::Error),
}

impl RunError {
    /// 2 for problems with the inputs, 3 for failures while computing.
    pub fn exit_code(&self) -> i32 {
        use cfvae_core::Error as E;
        match self {
            RunError::Invalid(_) => 2,
            RunError::Core(E::Config(_) | E::Schema(_) | E::Graph(_) | E::Cycle(_)) => 2,
            RunError::Core(_) => 3,
        }
    }
}
