use num_complex::Complex64;
use thiserror::Error;

/// Errors raised by evaluation, root finding, quadrature and the verification harnesses.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("pole at or near {0}")]
    Pole(Complex64),
    #[error("value overflows the floating range at {0}")]
    Overflow(Complex64),
    #[error("logarithmic derivative is singular near {0}")]
    Singular(Complex64),
    #[error("expression is divisor-opaque")]
    OpaqueExpr,
    #[error("root finder did not converge after {iterations} iterations (residual {residual:e})")]
    RootFindFailure { iterations: usize, residual: f64 },
    #[error("quadrature failed: error estimate {error:e} above tolerance {tol:e} after {panels} panels")]
    QuadratureFailure { error: f64, tol: f64, panels: usize },
    #[error("argument-principle integral {0} is not within 0.1 of an integer")]
    NonIntegerResidual(f64),
    #[error("divisor point within {distance:e} of the circle |z| = {r}")]
    CircleSingularity { r: f64, distance: f64 },
    #[error("characteristic never exceeds e on the grid")]
    InsufficientGrowth,
    #[error("sampled function is not nondecreasing at r = {0}")]
    NonMonotone(f64),
    #[error("f∘ω and f∘φ agree identically")]
    IdenticalComposition,
    #[error("polynomialization order {requested} does not match map order {map}")]
    OrderMismatch { requested: usize, map: usize },
    #[error("orbits collide near {0}")]
    OrbitCollision(Complex64),
    #[error("seed {0} is not classified as escaping")]
    NonEscapingSeed(Complex64),
    #[error("iterate {0} lies on the branch cut")]
    BranchAmbiguity(Complex64),
    #[error("invalid input: {0}")]
    InvalidInput(String),
}

pub type Result<T> = std::result::Result<T, Error>;
