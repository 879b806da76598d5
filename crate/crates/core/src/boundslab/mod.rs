//! Numerical harnesses for the explicit estimates and asymptotic statements about
//! meromorphic functions composed with polynomials.
//!
//! Every harness returns per-radius [`BoundReport`]s or a probe summary. None of
//! them assert anything on their own; callers decide what a failure means.

mod asymptotic;
mod growth;
mod lemma;

pub use asymptotic::{asym_ratio, growth_condition, smt_check, AsymSample, IDENTITY_PROBES};
pub use growth::{
    borel_closed_form, borel_probe, growth_lemma_probe, BorelReport, Dichotomy, GrowthProbe, GrowthReport,
    GROWTH_FIT_TOLERANCE, TAIL_CAUCHY_TOL,
};
pub use lemma::{
    k_constant, lemma1_check, lemma1_r0, pestimate_cases, pestimate_check, poisson_jensen_radius, PestimateCase,
};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::poly::Polynomial;

pub const DEFAULT_SLACK: f64 = 0.05;
pub const DEFAULT_SWEEP_POINTS: usize = 50;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundConfig {
    pub alpha: f64,
    pub delta: f64,
    /// Exponent in `ξ(x) = (log x)^(1+ε)`.
    pub epsilon: f64,
    pub tol: f64,
}

impl BoundConfig {
    pub fn new(alpha: f64, delta: f64, epsilon: f64, tol: f64) -> Result<Self> {
        if !(alpha > 1.0) {
            return Err(Error::InvalidInput(format!("alpha must exceed 1, got {alpha}")));
        }
        if !(delta > 0.0 && delta < 1.0) {
            return Err(Error::InvalidInput(format!("delta must lie in (0, 1), got {delta}")));
        }
        if !(epsilon > 0.0) {
            return Err(Error::InvalidInput(format!("epsilon must be positive, got {epsilon}")));
        }
        if !(tol > 0.0) {
            return Err(Error::InvalidInput(format!("tol must be positive, got {tol}")));
        }
        Ok(BoundConfig { alpha, delta, epsilon, tol })
    }
}

impl Default for BoundConfig {
    fn default() -> Self {
        BoundConfig { alpha: 2.0, delta: 0.5, epsilon: 1.0, tol: 1e-9 }
    }
}

/// Two polynomials of common degree `n` and common leading coefficient `c`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PolyPair {
    pub omega: Polynomial,
    pub phi: Polynomial,
    /// `c z^n`
    pub nu: Polynomial,
    #[serde(with = "crate::divisor::pair")]
    pub c: Complex64,
    pub n: usize,
}

impl PolyPair {
    pub fn new(omega: Polynomial, phi: Polynomial) -> Result<Self> {
        let n = omega.degree();
        if omega.is_constant() || phi.is_constant() {
            return Err(Error::InvalidInput("omega and phi must be non-constant".into()));
        }
        if phi.degree() != n {
            return Err(Error::InvalidInput(format!("degrees differ: {} and {}", n, phi.degree())));
        }
        let c = omega.leading();
        if (c - phi.leading()).norm() > 1e-12 * c.norm() {
            return Err(Error::InvalidInput("leading coefficients differ".into()));
        }
        Ok(PolyPair { nu: Polynomial::monomial(c, n), omega, phi, c, n })
    }

    /// Modulus of the subleading coefficients, `|p_{n-1}|` and `|q_{n-1}|`.
    pub fn subleading(&self) -> (f64, f64) {
        (self.omega.coeff(self.n - 1).norm(), self.phi.coeff(self.n - 1).norm())
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct BoundMeta {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub s: Option<f64>,
    #[serde(rename = "K", skip_serializing_if = "Option::is_none")]
    pub k: Option<f64>,
    pub exceptional: bool,
    /// Extra `m(r, (φ/ω)^k)` term added after moving a zero or pole off the origin.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub origin_term: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub r: f64,
    pub lhs: f64,
    pub rhs: f64,
    pub margin: f64,
    pub pass: bool,
    pub meta: BoundMeta,
}

impl BoundReport {
    pub fn new(r: f64, lhs: f64, rhs: f64, tol: f64, meta: BoundMeta) -> Self {
        let margin = rhs - lhs;
        BoundReport { r, lhs, rhs, margin, pass: margin >= -tol, meta }
    }
}

/// Logarithmic measure of the grid cell around each sorted radius.
///
/// A cell runs between the geometric midpoints to the neighbours, clipped to the
/// ends of the grid, so the cells tile `[r_first, r_last]`.
pub fn cell_logmeasures(rgrid: &[f64]) -> Vec<f64> {
    let k = rgrid.len();
    (0..k)
        .map(|i| {
            let lo = if i == 0 { rgrid[0] } else { (rgrid[i - 1] * rgrid[i]).sqrt() };
            let hi = if i + 1 == k { rgrid[k - 1] } else { (rgrid[i] * rgrid[i + 1]).sqrt() };
            (hi / lo).ln()
        })
        .collect()
}

/// `(flagged logmeasure, total logmeasure)` of the grid cells marked in `flags`.
pub fn flagged_logmeasure(rgrid: &[f64], flags: &[bool]) -> (f64, f64) {
    let cells = cell_logmeasures(rgrid);
    let flagged = cells.iter().zip(flags).filter(|(_, &f)| f).fold(0.0, |acc, (m, _)| acc + m);
    (flagged, cells.iter().fold(0.0, |acc, m| acc + m))
}

/// Exceptional-candidate measure of a report sweep.
pub fn exceptional_logmeasure(reports: &[BoundReport]) -> (f64, f64) {
    let rs: Vec<f64> = reports.iter().map(|b| b.r).collect();
    let flags: Vec<bool> = reports.iter().map(|b| b.meta.exceptional).collect();
    flagged_logmeasure(&rs, &flags)
}

fn check_grid(rgrid: &[f64]) -> Result<()> {
    if rgrid.is_empty() {
        return Err(Error::InvalidInput("empty radius grid".into()));
    }
    if rgrid.iter().any(|r| !(*r > 0.0)) || rgrid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidInput("radii must be positive and strictly increasing".into()));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nevanlinna::log_spaced;

    #[test]
    fn config_rejects_bad_parameters() {
        assert!(BoundConfig::new(1.0, 0.5, 1.0, 1e-9).is_err());
        assert!(BoundConfig::new(2.0, 1.0, 1.0, 1e-9).is_err());
        assert!(BoundConfig::new(2.0, 0.0, 1.0, 1e-9).is_err());
        assert!(BoundConfig::new(2.0, 0.5, 0.0, 1e-9).is_err());
        assert!(BoundConfig::new(2.0, 0.5, 1.0, 1e-9).is_ok());
    }

    #[test]
    fn pair_requires_matching_leading_terms() {
        let w = Polynomial::from_real(&[0.0, 1.0, 1.0]);
        let p = Polynomial::from_real(&[0.0, 0.0, 1.0]);
        let pair = PolyPair::new(w.clone(), p).unwrap();
        assert_eq!(pair.n, 2);
        assert_eq!(pair.nu, Polynomial::from_real(&[0.0, 0.0, 1.0]));
        assert_eq!(pair.subleading(), (1.0, 0.0));
        assert!(PolyPair::new(w.clone(), Polynomial::from_real(&[0.0, 0.0, 2.0])).is_err());
        assert!(PolyPair::new(w, Polynomial::from_real(&[0.0, 1.0])).is_err());
    }

    #[test]
    fn cells_tile_the_grid() {
        let g = log_spaced(1.0, 50.0, 17);
        let (flagged, total) = flagged_logmeasure(&g, &[true; 17]);
        assert!((total - 50f64.ln()).abs() < 1e-12);
        assert!((flagged - total).abs() < 1e-12);
        let (none, _) = flagged_logmeasure(&g, &[false; 17]);
        assert_eq!(none, 0.0);
    }

    #[test]
    fn pass_follows_margin() {
        let b = BoundReport::new(1.0, 2.0, 2.0 - 1e-10, 1e-9, BoundMeta::default());
        assert!(b.pass);
        let b = BoundReport::new(1.0, 2.0, 1.9, 1e-9, BoundMeta::default());
        assert!(!b.pass);
    }
}
