//! Numerical value-distribution toolkit.
//!
//! Nevanlinna functionals for a closed family of meromorphic functions, fixed-branch
//! algebraic maps with forward-invariance censuses, verification harnesses for
//! explicit estimates, and builders for orbit-product functions.

pub mod algmap;
pub mod boundslab;
pub mod constructor;
pub mod divisor;
pub mod error;
pub mod expr;
pub mod nevanlinna;
pub mod par;
pub mod poly;
pub mod quad;

pub use num_complex::Complex64;

pub type ComplexValue = Complex64;

pub use divisor::{Divisor, DivisorEntry, Side};
pub use error::{Error, Result};
pub use expr::FunctionExpr;
pub use poly::Polynomial;
