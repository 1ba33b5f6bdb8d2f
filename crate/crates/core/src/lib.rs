//! Natural-language querying over tables mapped to a shared conceptual
//! schema, with answers extended by derivation rules and verification tools.

pub mod frontend;
pub mod gateway;
pub mod knowledge;
pub mod par;
pub mod planner;
pub mod reasoner;
pub mod store;
pub mod system;

use thiserror::Error;

pub use system::{run_pipeline, Answer, System};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum Error {
    #[error(transparent)]
    Store(#[from] store::StoreError),
    #[error(transparent)]
    Knowledge(#[from] knowledge::KnowledgeError),
    #[error(transparent)]
    Gateway(#[from] gateway::GatewayError),
    #[error(transparent)]
    Frontend(#[from] frontend::FrontendError),
    #[error(transparent)]
    Plan(#[from] planner::PlanError),
    #[error(transparent)]
    Reasoner(#[from] reasoner::ReasonerError),
    #[error("{path}: {message}")]
    Io { path: String, message: String },
}

impl Error {
    /// Stable error kind, as reported by the CLI and the HTTP API.
    pub fn name(&self) -> &'static str {
        match self {
            Error::Store(e) => e.name(),
            Error::Knowledge(e) => e.name(),
            Error::Gateway(e) => e.name(),
            Error::Frontend(e) => e.name(),
            Error::Plan(e) => e.name(),
            Error::Reasoner(e) => e.name(),
            Error::Io { .. } => "Io",
        }
    }
}
