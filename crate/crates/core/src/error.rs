use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("degenerate input: x1 + x2 = {sum} (inverse demand 1/x is singular)")]
    DegenerateInput { sum: f64 },

    #[error("coefficient index {0} out of range 1..=5")]
    IndexOutOfRange(usize),

    #[error("angular diffusion q4 vanishes at theta = {theta} (|q4| = {value:e})")]
    DiffusionDegenerate { theta: f64, value: f64 },

    #[error("density normalization failed: integral = {integral}")]
    NormalizationFailure { integral: f64 },

    #[error("rotation-scaling diffusion requires beta != 0")]
    BetaZero,

    #[error("backward-difference recurrence is singular at index {index} (denominator {denominator:e})")]
    SingularRecurrence { index: usize, denominator: f64 },

    #[error("grid of {n} cells is too coarse (minimum {min})")]
    GridTooCoarse { n: usize, min: usize },

    #[error("diffusion matrix is not of rotation-scaling form [[a, -b], [b, a]]")]
    NotRotationScaling,

    #[error("step {h} too large for drift bound {bound} (h * bound = {product} > 0.5)")]
    StepTooLarge { h: f64, bound: f64, product: f64 },
}

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}
