use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{check_grid, BoundMeta, BoundReport, PolyPair};
use crate::divisor::Side;
use crate::error::{Error, Result};
use crate::expr::FunctionExpr;
use crate::nevanlinna::{
    characteristic, characteristic_with_divisor, hyperorder_estimate, proximity_with_divisor, HyperOrderEstimate,
    SPLIT_BAND,
};
use crate::par::{try_map_ordered, Execution};
use crate::poly::Polynomial;

/// Random points used to rule out `f∘ω ≡ f∘φ`.
pub const IDENTITY_PROBES: usize = 20;
const IDENTITY_SEED: u64 = 0x5eed_0f_c0;
const IDENTITY_TOL: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AsymSample {
    pub r: f64,
    /// `T(r, f∘ω)`
    pub t_composed: f64,
    /// `T(|c| r^n, f)`
    pub t_scaled: f64,
    pub ratio: f64,
}

/// Checks that the hyper-order of `f`, sampled at `|c| r^n`, stays below `1/n²`.
///
/// Returns `None` when `T` never exceeds `e` on the grid; bounded growth satisfies
/// the condition trivially.
pub fn growth_condition(
    expr: &FunctionExpr,
    n: usize,
    c: Complex64,
    rgrid: &[f64],
    tol: f64,
    exec: Execution,
) -> Result<Option<HyperOrderEstimate>> {
    let scaled: Vec<f64> = rgrid.iter().map(|r| c.norm() * r.powi(n as i32)).collect();
    match hyperorder_estimate(expr, &scaled, tol, exec) {
        Ok(h) => {
            let limit = 1.0 / (n * n) as f64;
            if h.varsigma_hat >= limit {
                Err(Error::InvalidInput(format!(
                    "growth condition fails: hyper-order estimate {} is not below {}",
                    h.varsigma_hat, limit
                )))
            } else {
                Ok(Some(h))
            }
        }
        Err(Error::InsufficientGrowth) => Ok(None),
        Err(Error::InvalidInput(_)) if rgrid.len() < 5 => Ok(None),
        Err(e) => Err(e),
    }
}

/// `T(r, f∘ω) / T(|c| r^n, f)` per radius.
pub fn asym_ratio(
    expr: &FunctionExpr,
    omega: &Polynomial,
    rgrid: &[f64],
    tol: f64,
    exec: Execution,
) -> Result<Vec<AsymSample>> {
    check_grid(rgrid)?;
    if omega.is_constant() {
        return Err(Error::InvalidInput("omega must be non-constant".into()));
    }
    let (n, c) = (omega.degree(), omega.leading());
    growth_condition(expr, n, c, rgrid, tol, exec)?;
    let composed = FunctionExpr::compose(expr.clone(), omega.clone());
    try_map_ordered(rgrid, exec, |&r| {
        let t_composed = characteristic(&composed, r, tol)?.t;
        let t_scaled = characteristic(expr, c.norm() * r.powi(n as i32), tol)?.t;
        Ok(AsymSample { r, t_composed, t_scaled, ratio: t_composed / t_scaled })
    })
}

fn identical_on_probes(a: &FunctionExpr, b: &FunctionExpr) -> bool {
    let mut rng = ChaCha8Rng::seed_from_u64(IDENTITY_SEED);
    let mut compared = 0;
    for _ in 0..IDENTITY_PROBES {
        let z = Complex64::from_polar(rng.gen_range(0.5..2.0), rng.gen_range(-std::f64::consts::PI..std::f64::consts::PI));
        let (Ok(u), Ok(v)) = (a.eval(z), b.eval(z)) else { continue };
        compared += 1;
        if (u - v).norm() > IDENTITY_TOL * (u.norm() + v.norm()) {
            return false;
        }
    }
    compared > 0
}

/// Second-main-theorem comparison for `f∘φ` with the `N_ω` correction built from `f∘ω - f∘φ`.
///
/// Per radius, `lhs = m(r, f∘φ) + Σ m(r, 1/(f∘φ - a_k))` and
/// `rhs = 2T(r, f∘φ) - N_ω(r, f∘φ) + slack T(r, f∘φ)`. Failing radii are
/// flagged as exceptional candidates.
#[allow(clippy::too_many_arguments)]
pub fn smt_check(
    expr: &FunctionExpr,
    pair: &PolyPair,
    targets: &[Complex64],
    slack: f64,
    rgrid: &[f64],
    tol: f64,
    exec: Execution,
) -> Result<Vec<BoundReport>> {
    check_grid(rgrid)?;
    if targets.len() < 2 {
        return Err(Error::InvalidInput("at least two target values are needed".into()));
    }
    for (i, a) in targets.iter().enumerate() {
        if targets[..i].contains(a) {
            return Err(Error::InvalidInput(format!("target {a} is repeated")));
        }
    }
    let f_omega = FunctionExpr::compose(expr.clone(), pair.omega.clone());
    let f_phi = FunctionExpr::compose(expr.clone(), pair.phi.clone());
    if pair.omega == pair.phi || identical_on_probes(&f_omega, &f_phi) {
        return Err(Error::IdenticalComposition);
    }
    growth_condition(expr, pair.n, pair.c, rgrid, tol, exec)?;

    let cover = rgrid[rgrid.len() - 1] * (1.0 + SPLIT_BAND);
    let diff = FunctionExpr::difference(f_omega, f_phi.clone());
    let diff_div = diff.divisor_in_disc(cover)?;
    let phi_div = f_phi.divisor_in_disc(cover)?;
    let one = Complex64::new(1.0, 0.0);
    let recips = targets
        .iter()
        .map(|&a| {
            let g = FunctionExpr::quotient(
                FunctionExpr::constant(one),
                FunctionExpr::difference(f_phi.clone(), FunctionExpr::constant(a)),
            );
            let d = g.divisor_in_disc(cover)?;
            Ok((g, d))
        })
        .collect::<Result<Vec<_>>>()?;

    try_map_ordered(rgrid, exec, |&r| {
        let s = characteristic_with_divisor(&f_phi, &phi_div, r, tol)?;
        let mut lhs = s.m;
        for (g, d) in &recips {
            lhs += proximity_with_divisor(g, Some(d), r, tol)?.m;
        }
        let n_omega = 2.0 * s.n - diff_div.counting(s.r, Side::Poles) + diff_div.counting(s.r, Side::Zeros);
        let rhs = 2.0 * s.t - n_omega + slack * s.t;
        let mut b = BoundReport::new(s.r, lhs, rhs, tol, BoundMeta::default());
        b.meta.exceptional = !b.pass;
        Ok(b)
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::boundslab::exceptional_logmeasure;
    use crate::divisor::Divisor;
    use crate::nevanlinna::log_spaced;
    use std::f64::consts::PI;

    fn exp_z() -> FunctionExpr {
        FunctionExpr::exp_poly(Polynomial::identity())
    }

    #[test]
    fn identity_map_gives_unit_ratio() {
        let f = FunctionExpr::rational(
            Complex64::new(1.0, 0.0),
            Divisor::new([(Complex64::new(1.0, 0.0), 1), (Complex64::new(-1.0, 0.0), -1)], 0),
        );
        let s = asym_ratio(&f, &Polynomial::identity(), &[2.0, 5.0, 9.0], 1e-10, Execution::Sequential).unwrap();
        for x in s {
            assert!((x.ratio - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn quadratic_composition_of_exp() {
        let omega = Polynomial::from_real(&[0.0, 1.0, 1.0]);
        let s = asym_ratio(&exp_z(), &omega, &log_spaced(2.0, 20.0, 12), 1e-10, Execution::Parallel).unwrap();
        let last = s.last().unwrap();
        assert!((last.t_scaled - 400.0 / PI).abs() < 1e-6);
        assert!((last.ratio - 1.0).abs() < 0.1);
    }

    #[test]
    fn fast_growth_violates_condition() {
        let f = FunctionExpr::exp(exp_z()).unwrap();
        let omega = Polynomial::from_real(&[0.0, 1.0]);
        let err = asym_ratio(&f, &omega, &log_spaced(1.0, 6.0, 30), 1e-9, Execution::Sequential).unwrap_err();
        assert!(matches!(err, Error::InvalidInput(_)));
    }

    #[test]
    fn smt_rejects_identical_compositions() {
        let p = Polynomial::from_real(&[0.0, 0.0, 1.0]);
        let pair = PolyPair::new(p.clone(), p).unwrap();
        let one = Complex64::new(1.0, 0.0);
        let err = smt_check(&exp_z(), &pair, &[one, -one], 0.05, &[5.0], 1e-9, Execution::Sequential).unwrap_err();
        assert_eq!(err, Error::IdenticalComposition);
        // z² and (-z)² differ as polynomials but agree
        let pair = PolyPair::new(Polynomial::from_real(&[0.0, 0.0, 1.0]), Polynomial::from_real(&[1e-300, 0.0, 1.0])).unwrap();
        let err = smt_check(&exp_z(), &pair, &[one, -one], 0.05, &[5.0], 1e-9, Execution::Sequential).unwrap_err();
        assert_eq!(err, Error::IdenticalComposition);
    }

    #[test]
    fn smt_needs_two_distinct_targets() {
        let pair = PolyPair::new(Polynomial::from_real(&[0.0, 1.0, 1.0]), Polynomial::from_real(&[0.0, 0.0, 1.0])).unwrap();
        let one = Complex64::new(1.0, 0.0);
        assert!(smt_check(&exp_z(), &pair, &[one], 0.05, &[5.0], 1e-9, Execution::Sequential).is_err());
        assert!(smt_check(&exp_z(), &pair, &[one, one], 0.05, &[5.0], 1e-9, Execution::Sequential).is_err());
    }

    #[test]
    fn smt_exp_small_sweep() {
        let pair = PolyPair::new(Polynomial::from_real(&[0.0, 1.0, 1.0]), Polynomial::from_real(&[0.0, 0.0, 1.0])).unwrap();
        let one = Complex64::new(1.0, 0.0);
        let grid = log_spaced(5.0, 15.0, 6);
        let reps = smt_check(&exp_z(), &pair, &[one, -one], 0.05, &grid, 1e-9, Execution::Parallel).unwrap();
        for b in &reps {
            // m(r, e^{z²}) = r²/π dominates the left side
            assert!(b.lhs >= b.r * b.r / PI - 1e-6);
        }
        let (bad, total) = exceptional_logmeasure(&reps);
        assert!(bad < 0.1 * total, "{reps:?}");
    }
}
