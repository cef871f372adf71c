use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("grid too small for mode {mode}: {reason}")]
    GridTooSmall { mode: usize, reason: String },

    #[error("fields live on different grids")]
    GridMismatch,

    #[error("inverse temperature must be positive, got {0}")]
    DegenerateTemperature(f64),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("truncation failure: {0}")]
    TruncationFailure(String),

    #[error("mask is not a pure phase: max | |mask| - 1 | = {0:e}")]
    NonUnitaryMask(f64),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("aliasing: {0}")]
    Aliasing(String),

    #[error("work distribution has imaginary residue {0:e}")]
    NonRealDistribution(f64),

    #[error("work distribution has negative probability {0:e}")]
    NegativeProbability(f64),

    #[error("focal length must be nonzero")]
    ZeroFocalLength,

    #[error("field leaked {0:e} of its energy into the guard band")]
    WrapAround(f64),

    #[error("field not representable in the first {n_basis} modes (relative residual {residual:e})")]
    BasisDeficit { n_basis: usize, residual: f64 },

    #[error("split-step phase excursion {0:.3} rad per step exceeds 0.1 rad")]
    StepTooCoarse(f64),

    #[error("normalization failure: {0}")]
    NormalizationFailure(String),

    #[error("Kraus completeness defect {0:e} exceeds tolerance")]
    CompletenessViolation(f64),

    #[error("fluctuation value has imaginary residue {0:e}")]
    NonRealGamma(f64),

    #[error("invalid density matrix: {0}")]
    InvalidDensityMatrix(String),

    #[error("non-finite result: {0}")]
    NonFinite(String),

    #[error("numerical gate failed: {0}")]
    GateFailure(String),

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// Short machine-readable tag, used by the CLI error line.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidGrid(_) => "invalid_grid",
            Error::GridTooSmall { .. } => "grid_too_small",
            Error::GridMismatch => "grid_mismatch",
            Error::DegenerateTemperature(_) => "degenerate_temperature",
            Error::InvalidArgument(_) => "invalid_argument",
            Error::TruncationFailure(_) => "truncation_failure",
            Error::NonUnitaryMask(_) => "non_unitary_mask",
            Error::DimensionMismatch(_) => "dimension_mismatch",
            Error::Aliasing(_) => "aliasing",
            Error::NonRealDistribution(_) => "non_real_distribution",
            Error::NegativeProbability(_) => "negative_probability",
            Error::ZeroFocalLength => "zero_focal_length",
            Error::WrapAround(_) => "wrap_around",
            Error::BasisDeficit { .. } => "basis_deficit",
            Error::StepTooCoarse(_) => "step_too_coarse",
            Error::NormalizationFailure(_) => "normalization_failure",
            Error::CompletenessViolation(_) => "completeness_violation",
            Error::NonRealGamma(_) => "non_real_gamma",
            Error::InvalidDensityMatrix(_) => "invalid_density_matrix",
            Error::NonFinite(_) => "non_finite",
            Error::GateFailure(_) => "gate_failure",
            Error::Config(_) => "config",
            Error::Io(_) => "io",
            Error::Csv(_) => "csv",
        }
    }

    /// True for failures caused by user input rather than a numerical gate.
    pub fn is_config_error(&self) -> bool {
        matches!(
            self,
            Error::Config(_) | Error::InvalidArgument(_) | Error::DegenerateTemperature(_)
        )
    }
}
