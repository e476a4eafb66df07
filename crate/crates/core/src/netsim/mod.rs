//! Deterministic sampled-time world: exact plant advance, delayed channel,
//! logs and metrics.

mod channel;
mod metrics;
mod scenario;
mod world;

pub use channel::{round_delay, Channel, ChannelError, DelayModel, Delivery, InFlight};
pub use metrics::{events_in_window, metrics, MetricsReport};
pub use scenario::{continuous_baseline, run, synthesize, RunOutput, ScenarioConfig};
pub use world::{
    AgentDetail, DetailLog, EventRecord, FineLog, Logs, Policy, SimWorld, StepLog, WorldSetup,
};

use alloc::string::String;
use thiserror::Error;

use crate::agents::AgentError;
use crate::graph::GraphError;
use crate::matlib::MatError;
use crate::synthesis::SynthesisError;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error("invalid config: {0}")]
    Config(String),
    #[error(transparent)]
    Synthesis(#[from] SynthesisError),
    #[error(transparent)]
    Channel(#[from] ChannelError),
    #[error(transparent)]
    Agent(#[from] AgentError),
    #[error("state diverged at step {step}: agent {agent} has norm {norm:e}")]
    Divergence { step: u64, agent: usize, norm: f64 },
}

impl From<GraphError> for SimError {
    fn from(e: GraphError) -> Self {
        SimError::Synthesis(e.into())
    }
}

impl From<MatError> for SimError {
    fn from(e: MatError) -> Self {
        SimError::Synthesis(e.into())
    }
}
