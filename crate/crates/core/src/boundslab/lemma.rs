use std::f64::consts::PI;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{check_grid, BoundConfig, BoundMeta, BoundReport, PolyPair};
use crate::divisor::Divisor;
use crate::error::{Error, Result};
use crate::expr::FunctionExpr;
use crate::nevanlinna::{characteristic, proximity, SPLIT_BAND};
use crate::par::{try_map_ordered, Execution};
use crate::poly::{cluster_roots, poly_roots, Polynomial};
use crate::quad::{integrate_periodic, QuadConfig, Singularity};

/// `∮ dθ / |p(r e^{iθ})|^(γ/deg p)` against `2π / ((1-γ) |c_0|^(γ/deg p) r^γ)`.
pub fn pestimate_check(p: &Polynomial, gamma: f64, r: f64, tol: f64) -> Result<BoundReport> {
    if p.is_constant() {
        return Err(Error::InvalidInput("p must be non-constant".into()));
    }
    if !(gamma > 0.0 && gamma < 1.0) {
        return Err(Error::InvalidInput(format!("gamma must lie in (0, 1), got {gamma}")));
    }
    if !(r > 0.0) {
        return Err(Error::InvalidInput(format!("radius must be positive, got {r}")));
    }
    let d = p.degree() as f64;
    let e = gamma / d;
    let sing: Vec<Singularity> = cluster_roots(&poly_roots(p)?)
        .into_iter()
        .filter(|(z, _)| (z.norm() - r).abs() <= SPLIT_BAND * r)
        .map(|(z, k)| Singularity { angle: z.arg(), exponent: e * k as f64 })
        .collect();
    let lhs = integrate_periodic(
        |a, o| (-e * p.eval(Complex64::from_polar(r, a + o)).norm().ln()).exp(),
        &sing,
        QuadConfig::with_tol(tol),
    )?
    .value;
    let rhs = 2.0 * PI / ((1.0 - gamma) * p.leading().norm().powf(e) * r.powf(gamma));
    Ok(BoundReport::new(r, lhs, rhs, tol, BoundMeta::default()))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PestimateCase {
    pub p: Polynomial,
    pub gamma: f64,
    pub r: f64,
}

/// Seeded cases: degree 1 to 4, roots in `|z| <= 3`, `γ` in `{0.1, …, 0.9}`, `r` in `[0.5, 10]`.
pub fn pestimate_cases(seed: u64, trials: usize) -> Vec<PestimateCase> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..trials)
        .map(|_| {
            let deg = rng.gen_range(1..=4);
            let roots: Vec<Complex64> = (0..deg)
                .map(|_| Complex64::from_polar(3.0 * rng.gen::<f64>().sqrt(), rng.gen_range(-PI..PI)))
                .collect();
            let lead = Complex64::from_polar(rng.gen_range(0.5..2.0), rng.gen_range(-PI..PI));
            let gamma = rng.gen_range(1..=9) as f64 / 10.0;
            let r = rng.gen_range(0.5..10.0);
            PestimateCase { p: Polynomial::from_roots(&roots).scale(lead), gamma, r }
        })
        .collect()
}

/// `K = 8αC(δ(α+1) + n(6α+2)) / (δ(1-δ)|c|^(δ/n)(α-1))` with `C = 1 + |p_{n-1}| + |q_{n-1}|`.
pub fn k_constant(cfg: &BoundConfig, pair: &PolyPair) -> f64 {
    let (a, d, n) = (cfg.alpha, cfg.delta, pair.n as f64);
    let (p, q) = pair.subleading();
    let big_c = 1.0 + p + q;
    8.0 * a * big_c * (d * (a + 1.0) + n * (6.0 * a + 2.0))
        / (d * (1.0 - d) * pair.c.norm().powf(d / n) * (a - 1.0))
}

/// `s = (α+1)(|c|r^n + (|p_{n-1}|+1) r^{n-1} + ... + |p_0|) / 2`.
pub fn poisson_jensen_radius(cfg: &BoundConfig, pair: &PolyPair, r: f64) -> f64 {
    let n = pair.n;
    let mut sum = pair.c.norm() * r.powi(n as i32) + r.powi(n as i32 - 1);
    for j in 0..n {
        sum += pair.omega.coeff(j).norm() * r.powi(j as i32);
    }
    (cfg.alpha + 1.0) * sum / 2.0
}

/// Order of `f` at the origin: positive for a zero, negative for a pole.
fn origin_order(expr: &FunctionExpr) -> Result<i32> {
    match expr.eval(Complex64::new(0.0, 0.0)) {
        Ok(v) if v != Complex64::new(0.0, 0.0) => return Ok(0),
        Ok(_) | Err(Error::Pole(_)) | Err(Error::Overflow(_)) => {}
        Err(e) => return Err(e),
    }
    let d = expr.divisor_in_disc(1e-6)?;
    let near: i32 = d.entries().iter().filter(|e| e.point.norm() <= 1e-9).map(|e| e.mult).sum();
    Ok(d.origin_order() + near)
}

/// `log|w(0)|` for `w` analytic and nonzero at the origin, read just off it.
fn log_modulus_near_origin(w: &FunctionExpr, f: &FunctionExpr) -> Result<f64> {
    let nearest = f
        .divisor_in_disc(1.0)
        .map(|d| d.entries().iter().map(|e| e.point.norm()).filter(|&t| t > 1e-9).fold(1.0, f64::min))
        .unwrap_or(1.0);
    let z0 = Complex64::from_polar(1e-9 * nearest, 0.3);
    Ok(w.logmod_eval(z0)?.0)
}

struct Lemma1Setup {
    /// `f` itself, or `z^-k f` when the origin is a zero or pole of order `k`.
    w: FunctionExpr,
    ratio: FunctionExpr,
    log_plus_inv_w0: f64,
    /// `(ω/φ)^k`, present only after an origin reduction.
    correction: Option<FunctionExpr>,
    k: f64,
}

fn lemma1_setup(expr: &FunctionExpr, pair: &PolyPair, cfg: &BoundConfig) -> Result<Lemma1Setup> {
    let ratio = FunctionExpr::quotient(
        FunctionExpr::compose(expr.clone(), pair.omega.clone()),
        FunctionExpr::compose(expr.clone(), pair.phi.clone()),
    );
    let ord = origin_order(expr)?;
    let k = k_constant(cfg, pair);
    if ord == 0 {
        let f0 = expr.eval(Complex64::new(0.0, 0.0))?;
        return Ok(Lemma1Setup { w: expr.clone(), ratio, log_plus_inv_w0: (-f0.norm().ln()).max(0.0), correction: None, k });
    }
    let one = Complex64::new(1.0, 0.0);
    let w = FunctionExpr::product(FunctionExpr::rational(one, Divisor::new([], -ord)), expr.clone());
    let lw0 = log_modulus_near_origin(&w, expr)?;
    let mut raw: Vec<(Complex64, i32)> = Vec::new();
    for (z, m) in cluster_roots(&poly_roots(&pair.omega)?) {
        raw.push((z, ord * m as i32));
    }
    for (z, m) in cluster_roots(&poly_roots(&pair.phi)?) {
        raw.push((z, -ord * m as i32));
    }
    let correction = FunctionExpr::rational(one, Divisor::new(raw, 0));
    Ok(Lemma1Setup { w, ratio, log_plus_inv_w0: (-lw0).max(0.0), correction: Some(correction), k })
}

/// `m(r, f∘ω / f∘φ)` against `K r^(-δ/n) (T(α|c| r^n, f) + log⁺ 1/|f(0)|)` per radius.
///
/// When `f(0)` is zero or infinite the right side is taken for `w = z^-k f` and
/// the exact cost `m(r, (ω/φ)^k)` of that substitution is added and kept in the meta.
pub fn lemma1_check(
    expr: &FunctionExpr,
    pair: &PolyPair,
    cfg: &BoundConfig,
    rgrid: &[f64],
    exec: Execution,
) -> Result<Vec<BoundReport>> {
    check_grid(rgrid)?;
    let setup = lemma1_setup(expr, pair, cfg)?;
    let (a, d, n, cm) = (cfg.alpha, cfg.delta, pair.n as f64, pair.c.norm());
    try_map_ordered(rgrid, exec, |&r| {
        let lhs = proximity(&setup.ratio, r, cfg.tol)?.m;
        let t = characteristic(&setup.w, a * cm * r.powf(n), cfg.tol)?.t;
        let mut rhs = setup.k / r.powf(d / n) * (t + setup.log_plus_inv_w0);
        let origin_term = match &setup.correction {
            Some(c) => {
                let m = proximity(c, r, cfg.tol)?.m;
                rhs += m;
                Some(m)
            }
            None => None,
        };
        let meta = BoundMeta { s: Some(poisson_jensen_radius(cfg, pair, r)), k: Some(setup.k), exceptional: false, origin_term };
        let mut b = BoundReport::new(r, lhs, rhs, cfg.tol, meta);
        b.meta.exceptional = !b.pass;
        Ok(b)
    })
}

/// Smallest sampled radius beyond which every report passes.
pub fn lemma1_r0(reports: &[BoundReport]) -> Option<f64> {
    let first_good = reports.iter().rposition(|b| !b.pass).map_or(0, |i| i + 1);
    reports.get(first_good).map(|b| b.r)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nevanlinna::log_spaced;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    /// Midpoint rule on a fine grid, adequate for smooth integrands.
    fn brute(p: &Polynomial, gamma: f64, r: f64, n: usize) -> f64 {
        let e = gamma / p.degree() as f64;
        let h = 2.0 * PI / n as f64;
        (0..n).map(|k| p.eval(Complex64::from_polar(r, h * (k as f64 + 0.5))).norm().powf(-e) * h).sum()
    }

    #[test]
    fn pestimate_monomial_is_exact() {
        let b = pestimate_check(&Polynomial::identity(), 0.5, 4.0, 1e-10).unwrap();
        assert!((b.lhs - PI).abs() < 1e-12);
        assert!((b.rhs - 2.0 * PI).abs() < 1e-12);
        assert!(b.pass);
    }

    #[test]
    fn pestimate_shifted_linear_matches_brute_force() {
        let p = Polynomial::from_real(&[-1.0, 1.0]);
        let b = pestimate_check(&p, 0.5, 2.0, 1e-10).unwrap();
        assert!((b.rhs - 4.0 * PI / 2f64.sqrt()).abs() < 1e-12);
        assert!((b.lhs - brute(&p, 0.5, 2.0, 200_000)).abs() < 1e-8);
        assert!(b.pass);
    }

    #[test]
    fn pestimate_roots_on_circle() {
        // |e^{2iθ} - 1| = 2|sin θ|, and ∫_0^π sin^{-a} = √π Γ((1-a)/2) / Γ(1 - a/2)
        let p = Polynomial::from_real(&[-1.0, 0.0, 1.0]);
        let b = pestimate_check(&p, 0.9, 1.0, 1e-10).unwrap();
        let a = 0.45f64;
        let exact = 2.0 * 2f64.powf(-a) * PI.sqrt() * 3.2785352707977693 / 1.1935299627346616;
        // Γ(0.275) = 3.2785352707977693, Γ(0.775) = 1.1935299627346616
        assert!((b.lhs - exact).abs() < 1e-7 * exact, "{} vs {}", b.lhs, exact);
        assert!((b.rhs - 2.0 * PI / 0.1).abs() < 1e-9);
        assert!(b.pass);
    }

    #[test]
    fn k_constant_examples() {
        let cfg = BoundConfig::default();
        let shift = PolyPair::new(Polynomial::from_real(&[1.0, 1.0]), Polynomial::identity()).unwrap();
        assert_eq!(k_constant(&cfg, &shift), 1984.0);
        let same = PolyPair::new(Polynomial::identity(), Polynomial::identity()).unwrap();
        assert_eq!(k_constant(&cfg, &same), 992.0);
        let quad = PolyPair::new(Polynomial::from_real(&[0.0, 1.0, 1.0]), Polynomial::from_real(&[0.0, 0.0, 1.0])).unwrap();
        assert_eq!(k_constant(&cfg, &quad), 3776.0);
        let doubled = PolyPair::new(Polynomial::from_real(&[1.0, 2.0]), Polynomial::from_real(&[0.0, 2.0])).unwrap();
        let ratio = k_constant(&cfg, &doubled) / k_constant(&cfg, &shift);
        assert!((ratio - 2f64.powf(-0.5)).abs() < 1e-14);
    }

    #[test]
    fn poisson_jensen_radius_linear() {
        let cfg = BoundConfig::default();
        let pair = PolyPair::new(Polynomial::from_real(&[1.0, 1.0]), Polynomial::identity()).unwrap();
        // 3 (r + (1 + 1)) / 2
        assert!((poisson_jensen_radius(&cfg, &pair, 5.0) - 10.5).abs() < 1e-12);
    }

    #[test]
    fn lemma1_exp_shift() {
        let f = FunctionExpr::exp_poly(Polynomial::identity());
        let pair = PolyPair::new(Polynomial::from_real(&[1.0, 1.0]), Polynomial::identity()).unwrap();
        let grid = log_spaced(1.0, 30.0, 8);
        let reps = lemma1_check(&f, &pair, &BoundConfig::default(), &grid, Execution::Sequential).unwrap();
        for b in &reps {
            assert!((b.lhs - 1.0).abs() < 1e-9, "{b:?}");
            let expect = 1984.0 * (2.0 * b.r / PI) / b.r.sqrt();
            assert!((b.rhs - expect).abs() < 1e-6 * expect);
            assert_eq!(b.meta.k, Some(1984.0));
            assert!(b.pass);
        }
        assert_eq!(lemma1_r0(&reps), Some(1.0));
    }

    #[test]
    fn lemma1_origin_reduction_adds_correction() {
        // f = z (z - 2) has a zero at the origin
        let f = FunctionExpr::rational(c(1.0, 0.0), Divisor::new([(c(2.0, 0.0), 1)], 1));
        let pair = PolyPair::new(Polynomial::from_real(&[1.0, 1.0]), Polynomial::identity()).unwrap();
        let reps = lemma1_check(&f, &pair, &BoundConfig::default(), &[3.0, 10.0], Execution::Sequential).unwrap();
        for b in &reps {
            assert!(b.meta.origin_term.unwrap() >= 0.0);
            assert!(b.pass);
        }
    }

    #[test]
    fn r0_is_first_radius_of_passing_tail() {
        let mk = |r: f64, pass: bool| BoundReport::new(r, if pass { 0.0 } else { 1.0 }, 0.5, 1e-9, BoundMeta::default());
        let reps = vec![mk(1.0, false), mk(2.0, true), mk(3.0, false), mk(4.0, true), mk(5.0, true)];
        assert_eq!(lemma1_r0(&reps), Some(4.0));
        assert_eq!(lemma1_r0(&[mk(1.0, true), mk(2.0, false)]), None);
    }
}
