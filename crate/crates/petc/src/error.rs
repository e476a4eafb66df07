use petc_core::netsim::{ChannelError, SimError};
use petc_core::synthesis::SynthesisError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("invalid config: {0}")]
    Config(String),
    #[error("infeasible design: {0}")]
    Infeasible(String),
    #[error("guarantee violated: {0}")]
    Guarantee(String),
    #[error("{0}")]
    Divergence(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Other(#[from] anyhow::Error),
}

impl CliError {
    /// 0 ok, 2 config, 3 infeasible, 4 guarantee violation, 5 divergence.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Infeasible(_) => 3,
            CliError::Guarantee(_) => 4,
            CliError::Divergence(_) => 5,
            CliError::Io(_) | CliError::Other(_) => 1,
        }
    }
}

impl From<SynthesisError> for CliError {
    fn from(e: SynthesisError) -> Self {
        use SynthesisError as S;
        let msg = e.to_string();
        match e {
            S::Infeasible { .. }
            | S::EtaDivergence { .. }
            | S::RiccatiInfeasible { .. }
            | S::KernelStructure { .. }
            | S::NotPositiveDefinite(_) => CliError::Infeasible(msg),
            S::Mat(petc_core::matlib::MatError::NoConvergence { .. }) => CliError::Infeasible(msg),
            _ => CliError::Config(msg),
        }
    }
}

impl From<SimError> for CliError {
    fn from(e: SimError) -> Self {
        match e {
            SimError::Synthesis(s) => s.into(),
            SimError::Divergence { .. } => CliError::Divergence(e.to_string()),
            SimError::Channel(ChannelError::ExceedsBound { .. }) | SimError::Config(_) | SimError::Channel(_) => {
                CliError::Config(e.to_string())
            }
            SimError::Agent(_) => CliError::Other(anyhow::anyhow!(e.to_string())),
        }
    }
}
