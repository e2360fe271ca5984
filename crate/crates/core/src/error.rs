use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: expected {expected} qubits, got {found}")]
    Dimension { expected: usize, found: usize },

    #[error("qubit index {index} out of range for {n} qubits")]
    IndexOutOfRange { index: usize, n: usize },

    #[error("invalid qubit subset: {0}")]
    InvalidSubset(String),

    #[error("subset splits the support of a cycle gate: {0}")]
    UnsupportedSubset(String),

    #[error("invalid hard cycle: {0}")]
    InvalidCycle(String),

    #[error("invalid Pauli channel: {0}")]
    InvalidChannel(String),

    #[error("unreliable orbital eigenvalue: {0}")]
    UnreliableEstimate(String),

    #[error("dimension too large: {n} qubits exceeds the limit of {limit}")]
    DimensionTooLarge { n: usize, limit: usize },

    #[error("non-physical process: twirled probability {0} is negative")]
    NonPhysicalProcess(f64),

    #[error("unsatisfiable circuit: {0}")]
    Unsatisfiable(String),

    #[error("decay is not fittable: {0}")]
    Unfittable(String),

    #[error("missing eigenvalue for orbit {0}")]
    MissingOrbit(String),

    #[error("projection did not converge after {iterations} iterations (infeasibility {infeasibility:e})")]
    NonConvergence {
        iterations: usize,
        infeasibility: f64,
        best: Vec<f64>,
    },

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("inconsistent marginals: {0}")]
    InconsistentMarginals(String),

    #[error("error support outside the code qubits: qubit {0}")]
    OutsideCode(usize),

    #[error("enumeration cap of {cap} configurations reached (enumerated mass {mass})")]
    EnumerationCap { cap: usize, mass: f64 },

    #[error("invalid design: {0}")]
    InvalidDesign(String),

    #[error("parse error on line {line}: {msg}")]
    Parse { line: usize, msg: String },
}

impl Error {
    pub(crate) fn parse(line: usize, msg: impl Into<String>) -> Self {
        Error::Parse {
            line,
            msg: msg.into(),
        }
    }

    /// Whether the error reports numerical non-convergence rather than invalid input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::NonConvergence { .. } | Error::Unfittable(_) | Error::UnreliableEstimate(_)
        )
    }
}
