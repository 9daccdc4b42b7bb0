//! Tabular n-step double-Q agent, the MiniFreeway environment family and the
//! expert / zero-shot / finetune transfer harness.

pub mod agent;
pub mod checkpoint;
pub mod env;
pub mod harness;
pub mod replay;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum RlError {
    #[error(transparent)]
    Env(#[from] env::EnvError),
    #[error(transparent)]
    Agent(#[from] agent::AgentError),
    #[error(transparent)]
    Replay(#[from] replay::ReplayError),
    #[error(transparent)]
    Checkpoint(#[from] checkpoint::CheckpointError),
    #[error(transparent)]
    Scores(#[from] curricula_core::scores::ScoreError),
    #[error("worker pool: {0}")]
    Pool(String),
}
