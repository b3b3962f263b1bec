use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("singular system: {0}")]
    SingularSystem(String),

    #[error("degenerate pinning, reduced field system is singular: {0}")]
    SingularReducedSystem(String),

    #[error("iterative solve did not converge: {0}")]
    NonConvergence(String),

    #[error("no guided mode with index {requested} ({available} available)")]
    NoSuchMode { requested: usize, available: usize },

    #[error("periodic y-boundaries required: {0}")]
    RequiresPeriodic(String),

    #[error("port at column {0} overlaps the PML")]
    PortInPml(usize),

    #[error("measurement plane at column {0} overlaps the PML")]
    PlaneInPml(usize),

    #[error("target field is zero on the measurement plane")]
    ZeroTarget,

    #[error("invalid structure: {0}")]
    InvalidStructure(String),

    #[error("invalid objective: {0}")]
    InvalidObjective(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("file format error in {path}: {msg}")]
    Format { path: String, msg: String },

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("at design iteration {iteration}: {source}")]
    AtIteration {
        iteration: usize,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    /// True for errors caused by bad user input rather than a failed solve.
    pub fn is_input_error(&self) -> bool {
        matches!(
            self,
            Error::Config(_)
                | Error::Format { .. }
                | Error::Io(_)
                | Error::InvalidGrid(_)
                | Error::InvalidStructure(_)
                | Error::InvalidObjective(_)
                | Error::DimensionMismatch(_)
                | Error::RequiresPeriodic(_)
                | Error::PortInPml(_)
                | Error::PlaneInPml(_)
        )
    }
}
