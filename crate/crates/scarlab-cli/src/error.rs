use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("i/o error on {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error(transparent)]
    Channel(#[from] scarlab::rqc::ChannelError),
    #[error(transparent)]
    Lattice(#[from] scarlab::lattice::LatticeError),
    #[error(transparent)]
    Variational(#[from] scarlab::variational::VariationalError),
    #[error(transparent)]
    Dmrg(#[from] scarlab::dmrg::DmrgError),
    #[error(transparent)]
    Rg(#[from] scarlab::rg::RgError),
    #[error(transparent)]
    Eft(#[from] scarlab::eft::EftError),
    #[error(transparent)]
    Spin(#[from] scarlab::spin::SpinError),
    #[error(transparent)]
    Linalg(#[from] scarlab::linalg::LinalgError),
    #[error("non-finite value in column {column}, row {row}")]
    NonFinite { column: String, row: usize },
    #[error("{failed} of {total} validation checks failed")]
    ValidationFailed { failed: usize, total: usize },
}

impl CliError {
    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Config(_) => "ConfigError",
            CliError::Io { .. } => "IoError",
            CliError::Channel(_) => "ChannelError",
            CliError::Lattice(_) => "LatticeError",
            CliError::Variational(_) => "VariationalError",
            CliError::Dmrg(_) => "DmrgError",
            CliError::Rg(_) => "RgError",
            CliError::Eft(_) => "EftError",
            CliError::Spin(_) => "SpinError",
            CliError::Linalg(_) => "LinalgError",
            CliError::NonFinite { .. } => "NonFiniteOutput",
            CliError::ValidationFailed { .. } => "ValidationFailed",
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::ValidationFailed { .. } => 1,
            CliError::Config(_) => 2,
            CliError::Io { .. } => 4,
            CliError::NonFinite { .. } => 5,
            _ => 3,
        }
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({ "error": self.kind(), "message": self.to_string(), "exit_code": self.exit_code() })
    }
}
