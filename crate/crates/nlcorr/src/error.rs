use thiserror::Error;

/// Errors raised by state construction, dynamics, and probability algorithms.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("tensor product dimension {0} exceeds the supported maximum 2^20")]
    DimensionOverflow(usize),

    #[error("matrix is not Hermitian (max asymmetry {0:.3e})")]
    NotHermitian(f64),

    #[error("matrix is not a density matrix: {0}")]
    NotDensity(String),

    #[error("state vector has norm {0:.6}, cannot normalize zero vector")]
    ZeroNorm(f64),

    #[error("state vector norm {0:.12} deviates from 1 beyond tolerance")]
    NotNormalized(f64),

    #[error("Bloch axis has non-unit norm {0:.12}")]
    NonUnitAxis(f64),

    #[error("expectation value has imaginary residue {0:.3e}")]
    ImaginaryResidue(f64),

    #[error("finite-difference step {0:.3e} outside [1e-8, 1e-3]")]
    BadGradStep(f64),

    #[error("time step {0} outside (0, 0.01]")]
    BadTimeStep(f64),

    #[error("integrator norm drift {drift:.3e} at t = {t} exceeds 1e-6; reduce dt")]
    NormDrift { t: f64, drift: f64 },

    #[error("propagator unitarity drift {drift:.3e} at t = {t} exceeds 1e-6; reduce dt")]
    UnitarityDrift { t: f64, drift: f64 },

    #[error("closed-form engine requires mean-field (Curie-Weiss) functionals on both particles")]
    ClosedFormUnavailable,

    #[error("probability {0:.6e} outside [0,1] beyond tolerance")]
    ProbabilityOutOfRange(f64),

    #[error("conditional probability undefined: condition has probability {0:.3e}")]
    UndefinedConditional(f64),

    #[error("inconsistent probability table: {0}")]
    InconsistentTable(String),

    #[error("detection time must be finite for measurements, got {0}")]
    NonFiniteDetection(f64),

    #[error("invalid config field `{field}`: {message}")]
    InvalidConfig { field: String, message: String },

    #[error("perturbation `{0}` touches the audited particle's own fields")]
    SelfPerturbation(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T> = std::result::Result<T, Error>;
