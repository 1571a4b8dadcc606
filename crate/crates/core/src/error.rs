use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum QuantumError {
    #[error("register of {0} qubits is outside the supported range 1..={max}", max = crate::qsim::MAX_QUBITS)]
    Capacity(usize),
    #[error("qubit index {index} out of range for a {n_qubits}-qubit register")]
    QubitIndex { index: usize, n_qubits: usize },
    #[error("CNOT control and target must differ (both {0})")]
    SameControlTarget(usize),
    #[error("shape error: {0}")]
    Shape(String),
    #[error("non-finite input component at position {0}")]
    NonFiniteInput(usize),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("unsupported combination: {0}")]
    Unsupported(String),
}

pub type Result<T, E = QuantumError> = std::result::Result<T, E>;
