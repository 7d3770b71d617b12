use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid network spec: {0}")]
    InvalidSpec(String),

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("frame pooling requires non-contracting dims (m_in = {m_in}, m_out = {m_out})")]
    ContractingPooling { m_in: usize, m_out: usize },

    #[error("frame filters require q_out >= r*q_in (r = {r}, q_in = {q_in}, q_out = {q_out})")]
    FilterFrame { r: usize, q_in: usize, q_out: usize },

    #[error("cascade identity requires no pooling: {0}")]
    PoolingPresent(String),

    #[error(
        "input lies within the kink margin {margin:e} of a ReLU (min |pre-activation| = {found:e}); resample or perturb the point"
    )]
    KinkMargin { margin: f64, found: f64 },

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("training diverged at iteration {iteration}: loss {loss:e}")]
    Divergence { iteration: usize, loss: f64 },

    #[error("could not find a kink-free sample after {0} attempts")]
    Resample(usize),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
