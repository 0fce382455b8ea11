use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("register of {qubits} qubits exceeds the 3-qubit limit")]
    RegisterTooLarge { qubits: usize },
    #[error("{what} is not a power-of-two dimension: {dim}")]
    NotPowerOfTwo { what: &'static str, dim: usize },
    #[error("Kraus operators violate completeness (max deviation {deviation:e})")]
    Completeness { deviation: f64 },
    #[error("operator is not positive semidefinite (min eigenvalue {min_eigenvalue:e})")]
    NotPositive { min_eigenvalue: f64 },
    #[error("measurement effects do not sum to identity (max deviation {deviation:e})")]
    IncompleteMeasurement { deviation: f64 },
    #[error("matrix is not Hermitian (max deviation {deviation:e})")]
    NotHermitian { deviation: f64 },
    #[error("state is not normalized (norm or trace {value})")]
    NotNormalized { value: f64 },
    #[error("invalid qubit selection: {0}")]
    QubitSelection(String),
    #[error("parameter `{name}` = {value} is out of range {range}")]
    ParameterRange {
        name: &'static str,
        value: f64,
        range: &'static str,
    },
    #[error("not derived in source: {0}")]
    Unsupported(String),
    #[error("{0}")]
    Invalid(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_probability(name: &'static str, value: f64) -> Result<f64> {
    if (0.0..=1.0).contains(&value) {
        Ok(value)
    } else {
        Err(Error::ParameterRange {
            name,
            value,
            range: "[0, 1]",
        })
    }
}
