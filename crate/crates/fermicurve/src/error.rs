use thiserror::Error;

use crate::lattice::DualPoint;

/// Everything that can go wrong while building a model or evaluating the
/// reduced equations. Variants carry enough context to be printed as-is by
/// the command line front end.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("degenerate lattice: generators are (numerically) collinear, |det| = {det:.3e}")]
    DegenerateLattice { det: f64 },

    #[error("duplicate Fourier coefficient at b = {0}")]
    DuplicateCoefficient(DualPoint),

    #[error("vector potential must have zero mean (A(0) = {0}); apply a gauge shift first")]
    NonZeroMean(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("smallness hypothesis violated: ||(1+b^2)A||_l1 = {weighted:.6e} >= 2eps/63 = {limit:.6e}")]
    SmallnessViolated { weighted: f64, limit: f64 },

    #[error("three distinct tubes contain k: {0:?}")]
    TripleTube(Vec<DualPoint>),

    #[error("two exceptional lattice points found: {0} and {1}")]
    MultipleExceptional(DualPoint, DualPoint),

    #[error("order relation violated: {0}")]
    RelationViolated(String),

    #[error("singular denominator: |N_b(k)| = {modulus:.3e} at b = {b}")]
    SingularDenominator { b: DualPoint, modulus: f64 },

    #[error("Neumann certificate fails: ||R - I|| bound {bound:.6} >= 17/18")]
    CertificateFail { bound: f64 },

    #[error("dense solver reports a numerically singular matrix ({0})")]
    NumericallySingular(String),

    #[error("point outside the region where this equation applies: {0}")]
    RegionViolation(String),

    #[error("series does not contract: {0}")]
    NotContracting(String),

    #[error("finite-difference step too large: Richardson error {error:.3e} vs value {value:.3e}")]
    StepTooLarge { error: f64, value: f64 },

    #[error("Newton iteration diverged after {iters} steps (residual {residual:.3e})")]
    NewtonDiverged { iters: usize, residual: f64 },

    #[error("Newton iterate left the tube: {0}")]
    RegionExit(String),

    #[error("Morse lemma hypothesis fails: {0}")]
    HypothesisFail(String),

    #[error("normal form residual stalls at {residual:.3e} (degree {degree})")]
    NormalFormStall { residual: f64, degree: usize },

    #[error("handle constant routes disagree: Morse {morse}, product fit {fit}")]
    OracleMismatch { morse: String, fit: String },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("i/o error: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
