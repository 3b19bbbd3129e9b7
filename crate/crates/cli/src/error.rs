use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    /// Bad scenario or input files; exit code 1.
    #[error("validation error:\n{0}")]
    Validation(String),

    /// A module failed while computing; exit code 2.
    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) => 1,
            CliError::Numerical(_) | CliError::Io(_) => 2,
        }
    }
}

impl From<penning::Error> for CliError {
    fn from(e: penning::Error) -> Self {
        use penning::Error as E;
        match e {
            E::Parse(_) | E::UnknownElectrode(_) | E::InvalidGeometry(_) => CliError::Validation(e.to_string()),
            other => CliError::Numerical(other.to_string()),
        }
    }
}
