//! A closed family of meromorphic functions with known divisors.
//!
//! Every variant can be evaluated directly, through the log channel
//! `(log|f|, arg f)` and through its logarithmic derivative. All variants except
//! irreducible differences also expose their zeros and poles in any disc.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::divisor::{Divisor, Side};
use crate::error::{Error, Result};
use crate::poly::{cluster_roots, poly_roots, Polynomial};

/// Distance `POLE_TOL * (1 + |z|)` to a stored pole (or zero, for the log derivative) counts as hitting it.
pub const POLE_TOL: f64 = 1e-12;
/// Largest `log|f|` that still converts to a finite double.
pub const LOG_MAX: f64 = 709.78;
const LEVEL_MAX_ITERATIONS: usize = 1000;
const LEVEL_STEP_TOL: f64 = 1e-14;
const LEVEL_ACCEPT_TOL: f64 = 1e-9;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);

#[derive(Clone, Debug, PartialEq)]
pub enum FunctionExpr {
    Const(Complex64),
    /// `scale * z^k * prod (z - b)^m` read from the divisor.
    Rational { scale: Complex64, divisor: Divisor },
    ExpPoly(Polynomial),
    /// `exp(child)`; the child is checked to be entire.
    Exp(Arc<FunctionExpr>),
    Product(Arc<FunctionExpr>, Arc<FunctionExpr>),
    Quotient(Arc<FunctionExpr>, Arc<FunctionExpr>),
    Difference(Arc<FunctionExpr>, Arc<FunctionExpr>),
    /// `child(p(z))`
    ComposePoly(Arc<FunctionExpr>, Polynomial),
    /// `exp(p(z)) - a`
    ExpPolyMinusConst(Polynomial, Complex64),
}

use FunctionExpr::*;

/// Reduces an angle to `(-π, π]`.
pub fn wrap_angle(x: f64) -> f64 {
    let y = x.rem_euclid(2.0 * PI);
    if y > PI {
        y - 2.0 * PI
    } else {
        y
    }
}

/// `e^u - 1` without cancellation for small `u`.
fn expm1c(u: Complex64) -> Complex64 {
    let (x, y) = (u.re, u.im);
    let s = (0.5 * y).sin();
    Complex64::new(x.exp_m1() * y.cos() - 2.0 * s * s, x.exp() * y.sin())
}

fn from_log(lm: f64, arg: f64, z: Complex64) -> Result<Complex64> {
    if lm == f64::NEG_INFINITY {
        Ok(ZERO)
    } else if lm > LOG_MAX || lm.is_nan() {
        Err(Error::Overflow(z))
    } else {
        Ok(Complex64::from_polar(lm.exp(), arg))
    }
}

/// Log-channel subtraction `(lf, af) - (lg, ag)`, factoring out the larger modulus.
fn log_sub(f: (f64, f64), g: (f64, f64)) -> (f64, f64) {
    let ((lf, af), (lg, ag)) = (f, g);
    if lg == f64::NEG_INFINITY {
        return f;
    }
    if lf == f64::NEG_INFINITY {
        return (lg, wrap_angle(ag + PI));
    }
    let (big, small, flip) = if lf >= lg { ((lf, af), (lg, ag), false) } else { ((lg, ag), (lf, af), true) };
    let q = Complex64::from_polar((small.0 - big.0).exp(), small.1 - big.1);
    let u = ONE - q;
    if u == ZERO {
        return (f64::NEG_INFINITY, 0.0);
    }
    let arg = big.1 + u.arg() + if flip { PI } else { 0.0 };
    (big.0 + u.norm().ln(), wrap_angle(arg))
}

impl FunctionExpr {
    pub fn constant(c: Complex64) -> Self {
        Const(c)
    }

    pub fn rational(scale: Complex64, divisor: Divisor) -> Self {
        Rational { scale, divisor }
    }

    pub fn exp_poly(p: Polynomial) -> Self {
        ExpPoly(p)
    }

    /// `exp(child)`; rejects children that may have poles.
    pub fn exp(child: FunctionExpr) -> Result<Self> {
        if !child.is_entire() {
            return Err(Error::InvalidInput("exp needs an entire argument".into()));
        }
        Ok(Exp(Arc::new(child)))
    }

    pub fn product(a: FunctionExpr, b: FunctionExpr) -> Self {
        Product(Arc::new(a), Arc::new(b))
    }

    pub fn quotient(a: FunctionExpr, b: FunctionExpr) -> Self {
        Quotient(Arc::new(a), Arc::new(b))
    }

    pub fn difference(a: FunctionExpr, b: FunctionExpr) -> Self {
        Difference(Arc::new(a), Arc::new(b))
    }

    pub fn compose(child: FunctionExpr, p: Polynomial) -> Self {
        ComposePoly(Arc::new(child), p)
    }

    pub fn exp_poly_minus_const(p: Polynomial, a: Complex64) -> Self {
        ExpPolyMinusConst(p, a)
    }

    /// Structurally guaranteed to be pole-free.
    pub fn is_entire(&self) -> bool {
        match self {
            Const(_) | ExpPoly(_) | Exp(_) | ExpPolyMinusConst(..) => true,
            Rational { divisor, .. } => divisor.degree(Side::Poles) == 0,
            Product(a, b) | Difference(a, b) => a.is_entire() && b.is_entire(),
            Quotient(a, b) => a.is_entire() && b.is_zero_free(),
            ComposePoly(c, _) => c.is_entire(),
        }
    }

    /// Structurally guaranteed to have no zeros.
    pub fn is_zero_free(&self) -> bool {
        match self {
            Const(c) => *c != ZERO,
            ExpPoly(_) | Exp(_) => true,
            ExpPolyMinusConst(_, a) => *a == ZERO,
            Rational { scale, divisor } => *scale != ZERO && divisor.degree(Side::Zeros) == 0,
            Product(a, b) => a.is_zero_free() && b.is_zero_free(),
            Quotient(a, b) => a.is_zero_free() && b.is_entire(),
            Difference(..) => false,
            ComposePoly(c, _) => c.is_zero_free(),
        }
    }

    /// True unless the tree contains a difference that does not reduce to a known divisor.
    pub fn is_divisor_transparent(&self) -> bool {
        match self {
            Const(_) | Rational { .. } | ExpPoly(_) | ExpPolyMinusConst(..) => true,
            Exp(c) | ComposePoly(c, _) => c.is_divisor_transparent(),
            Product(a, b) | Quotient(a, b) => a.is_divisor_transparent() && b.is_divisor_transparent(),
            Difference(a, b) => match reduce_difference(a, b) {
                Some(Ok(r)) => r.is_divisor_transparent(),
                Some(Err(_)) | None => false,
            },
        }
    }

    /// Value at `z`, falling back to the log channel when direct evaluation overflows.
    pub fn eval(&self, z: Complex64) -> Result<Complex64> {
        let v = self.eval_direct(z)?;
        if v.is_finite() {
            return Ok(v);
        }
        let (lm, arg) = self.logmod_eval(z)?;
        from_log(lm, arg, z)
    }

    fn eval_direct(&self, z: Complex64) -> Result<Complex64> {
        Ok(match self {
            Const(c) => *c,
            Rational { scale, divisor } => {
                let mut v = *scale * z.powi(divisor.origin_order());
                if divisor.origin_order() < 0 && z.norm() <= POLE_TOL {
                    return Err(Error::Pole(z));
                }
                for e in divisor.entries() {
                    let d = z - e.point;
                    if e.mult < 0 && d.norm() <= POLE_TOL * (1.0 + z.norm()) {
                        return Err(Error::Pole(z));
                    }
                    v *= d.powi(e.mult);
                }
                if v == ZERO && divisor.entries().iter().all(|e| e.mult < 0 || z != e.point) && *scale != ZERO
                    && !(divisor.origin_order() > 0 && z == ZERO)
                {
                    // underflow rather than a true zero
                    return Ok(Complex64::new(f64::NAN, f64::NAN));
                }
                v
            }
            ExpPoly(p) => p.eval(z).exp(),
            Exp(c) => c.eval(z)?.exp(),
            Product(a, b) => a.eval(z)? * b.eval(z)?,
            Quotient(a, b) => {
                let den = b.eval(z)?;
                if den == ZERO {
                    return Err(Error::Pole(z));
                }
                a.eval(z)? / den
            }
            Difference(a, b) => a.eval(z)? - b.eval(z)?,
            ComposePoly(c, p) => c.eval(p.eval(z))?,
            ExpPolyMinusConst(p, a) => p.eval(z).exp() - a,
        })
    }

    /// `(log|f(z)|, arg f(z))` computed structurally; `log|f| = -∞` at an exact zero.
    pub fn logmod_eval(&self, z: Complex64) -> Result<(f64, f64)> {
        match self {
            Const(c) => Ok(if *c == ZERO { (f64::NEG_INFINITY, 0.0) } else { (c.norm().ln(), c.arg()) }),
            Rational { scale, divisor } => {
                if *scale == ZERO {
                    return Ok((f64::NEG_INFINITY, 0.0));
                }
                let k = divisor.origin_order();
                let mut lm = scale.norm().ln();
                let mut arg = scale.arg();
                if k != 0 {
                    if z == ZERO || (k < 0 && z.norm() <= POLE_TOL) {
                        return if k > 0 { Ok((f64::NEG_INFINITY, 0.0)) } else { Err(Error::Pole(z)) };
                    }
                    lm += k as f64 * z.norm().ln();
                    arg += k as f64 * z.arg();
                }
                let mut zero_hit = false;
                for e in divisor.entries() {
                    let d = z - e.point;
                    if e.mult < 0 && d.norm() <= POLE_TOL * (1.0 + z.norm()) {
                        return Err(Error::Pole(z));
                    }
                    if d == ZERO {
                        zero_hit = true;
                        continue;
                    }
                    lm += e.mult as f64 * d.norm().ln();
                    arg += e.mult as f64 * d.arg();
                }
                if zero_hit {
                    return Ok((f64::NEG_INFINITY, 0.0));
                }
                Ok((lm, wrap_angle(arg)))
            }
            ExpPoly(p) => {
                let w = p.eval(z);
                Ok((w.re, wrap_angle(w.im)))
            }
            Exp(c) => {
                let w = c.eval(z)?;
                Ok((w.re, wrap_angle(w.im)))
            }
            Product(a, b) => {
                let (la, aa) = a.logmod_eval(z)?;
                let (lb, ab) = b.logmod_eval(z)?;
                Ok((la + lb, wrap_angle(aa + ab)))
            }
            Quotient(a, b) => {
                let (lb, ab) = b.logmod_eval(z)?;
                if lb == f64::NEG_INFINITY {
                    return Err(Error::Pole(z));
                }
                let (la, aa) = a.logmod_eval(z)?;
                Ok((la - lb, wrap_angle(aa - ab)))
            }
            Difference(a, b) => Ok(log_sub(a.logmod_eval(z)?, b.logmod_eval(z)?)),
            ComposePoly(c, p) => c.logmod_eval(p.eval(z)),
            ExpPolyMinusConst(p, a) => {
                let w = p.eval(z);
                if *a == ZERO {
                    return Ok((w.re, wrap_angle(w.im)));
                }
                // e^w - a = a (e^u - 1), u = w - Log a reduced mod 2πi
                let mut u = w - a.ln();
                u.im -= 2.0 * PI * (u.im / (2.0 * PI)).round();
                let la = a.norm().ln();
                if u.re > 1.0 {
                    let t = ONE - (-u).exp();
                    Ok((la + u.re + t.norm().ln(), wrap_angle(a.arg() + u.im + t.arg())))
                } else {
                    let q = expm1c(u);
                    if q == ZERO {
                        return Ok((f64::NEG_INFINITY, 0.0));
                    }
                    Ok((la + q.norm().ln(), wrap_angle(a.arg() + q.arg())))
                }
            }
        }
    }

    /// `f'(z) / f(z)` by structural recursion.
    pub fn logderiv_eval(&self, z: Complex64) -> Result<Complex64> {
        match self {
            Const(_) => Ok(ZERO),
            Rational { divisor, .. } => {
                let tol = POLE_TOL * (1.0 + z.norm());
                let mut acc = ZERO;
                if divisor.origin_order() != 0 {
                    if z.norm() <= tol {
                        return Err(Error::Singular(z));
                    }
                    acc += divisor.origin_order() as f64 / z;
                }
                for e in divisor.entries() {
                    let d = z - e.point;
                    if d.norm() <= tol {
                        return Err(Error::Singular(z));
                    }
                    acc += e.mult as f64 / d;
                }
                Ok(acc)
            }
            ExpPoly(p) => Ok(p.derivative().eval(z)),
            Exp(c) => {
                let v = c.eval(z)?;
                if v == ZERO {
                    // c'(z) is still defined; use a symmetric difference
                    let h = 1e-6 * (1.0 + z.norm());
                    let dh = Complex64::new(h, 0.0);
                    return Ok((c.eval(z + dh)? - c.eval(z - dh)?) / (2.0 * h));
                }
                Ok(v * c.logderiv_eval(z)?)
            }
            Product(a, b) => Ok(a.logderiv_eval(z)? + b.logderiv_eval(z)?),
            Quotient(a, b) => Ok(a.logderiv_eval(z)? - b.logderiv_eval(z)?),
            Difference(a, b) => {
                let (la, aa) = a.logmod_eval(z)?;
                let (lb, ab) = b.logmod_eval(z)?;
                let top = la.max(lb);
                if top == f64::NEG_INFINITY {
                    return Err(Error::Singular(z));
                }
                // scale both terms by the larger modulus
                let fa = if la == f64::NEG_INFINITY { ZERO } else { Complex64::from_polar((la - top).exp(), aa) };
                let fb = if lb == f64::NEG_INFINITY { ZERO } else { Complex64::from_polar((lb - top).exp(), ab) };
                let den = fa - fb;
                if den.norm() <= 1e-13 {
                    return Err(Error::Singular(z));
                }
                let ta = if fa == ZERO { ZERO } else { fa * a.logderiv_eval(z)? };
                let tb = if fb == ZERO { ZERO } else { fb * b.logderiv_eval(z)? };
                Ok((ta - tb) / den)
            }
            ComposePoly(c, p) => {
                let (w, dw) = p.eval_with_derivative(z);
                if dw == ZERO {
                    return Ok(ZERO);
                }
                Ok(dw * c.logderiv_eval(w)?)
            }
            ExpPolyMinusConst(p, a) => {
                let dp = p.derivative().eval(z);
                if *a == ZERO {
                    return Ok(dp);
                }
                // p' e^p / (e^p - a) = p' / (1 - e^{-u})
                let mut u = p.eval(z) - a.ln();
                u.im -= 2.0 * PI * (u.im / (2.0 * PI)).round();
                let den = -expm1c(-u);
                if den.norm() <= 1e-14 {
                    return Err(Error::Singular(z));
                }
                Ok(dp / den)
            }
        }
    }

    /// All zeros and poles in `|z| <= r`, with multiplicity.
    pub fn divisor_in_disc(&self, r: f64) -> Result<Divisor> {
        match self {
            Const(c) => {
                if *c == ZERO {
                    Err(Error::InvalidInput("the zero function has no divisor".into()))
                } else {
                    Ok(Divisor::empty())
                }
            }
            Rational { scale, divisor } => {
                if *scale == ZERO {
                    return Err(Error::InvalidInput("the zero function has no divisor".into()));
                }
                Ok(divisor.within(r))
            }
            ExpPoly(_) | Exp(_) => Ok(Divisor::empty()),
            Product(a, b) => Ok(a.divisor_in_disc(r)?.plus(&b.divisor_in_disc(r)?)),
            Quotient(a, b) => Ok(a.divisor_in_disc(r)?.plus(&b.divisor_in_disc(r)?.negated())),
            Difference(a, b) => match reduce_difference(a, b) {
                Some(reduced) => reduced?.divisor_in_disc(r),
                None => Err(Error::OpaqueExpr),
            },
            ComposePoly(c, p) => {
                if p.is_constant() {
                    let v = c.eval(p.coeff(0))?;
                    return if v == ZERO {
                        Err(Error::InvalidInput("composition is identically zero".into()))
                    } else {
                        Ok(Divisor::empty())
                    };
                }
                let inner = c.divisor_in_disc(p.max_modulus_bound(r))?;
                let mut raw = Vec::new();
                let mut pull = |b: Complex64, mult: i32| -> Result<()> {
                    let level = p.sub(&Polynomial::constant(b));
                    for (rho, k) in cluster_roots(&poly_roots(&level)?) {
                        if rho.norm() <= r {
                            raw.push((rho, mult * k as i32));
                        }
                    }
                    Ok(())
                };
                if inner.origin_order() != 0 {
                    pull(ZERO, inner.origin_order())?;
                }
                for e in inner.entries() {
                    pull(e.point, e.mult)?;
                }
                Ok(Divisor::new(raw, 0))
            }
            ExpPolyMinusConst(p, a) => {
                if *a == ZERO {
                    return Ok(Divisor::empty());
                }
                if p.is_constant() {
                    return if p.coeff(0).exp() == *a {
                        Err(Error::InvalidInput("exp(p) - a is identically zero".into()))
                    } else {
                        Ok(Divisor::empty())
                    };
                }
                let log_a = a.ln();
                let bound = p.max_modulus_bound(r);
                let mut raw = Vec::new();
                if bound >= log_a.re.abs() {
                    let span = (bound * bound - log_a.re * log_a.re).sqrt();
                    let k_lo = ((-span - log_a.im) / (2.0 * PI)).ceil() as i64;
                    let k_hi = ((span - log_a.im) / (2.0 * PI)).floor() as i64;
                    for k in k_lo..=k_hi {
                        let target = log_a + Complex64::new(0.0, 2.0 * PI * k as f64);
                        let level = p.sub(&Polynomial::constant(target));
                        for (rho, m) in cluster_roots(&poly_roots(&level)?) {
                            if rho.norm() <= r {
                                raw.push((rho, m as i32));
                            }
                        }
                    }
                }
                Ok(Divisor::new(raw, 0))
            }
        }
    }

    /// Zeros of `f - a` in `|z| <= r` (poles of `f` for `a = None`, meaning ∞).
    pub fn preimage_divisor(&self, a: Option<Complex64>, r: f64) -> Result<Divisor> {
        let d = match a {
            None => self.divisor_in_disc(r)?.negated(),
            Some(a) if a == ZERO => self.divisor_in_disc(r)?,
            Some(a) => FunctionExpr::difference(self.clone(), Const(a)).divisor_in_disc(r)?,
        };
        Ok(Divisor::new(d.side(Side::Zeros).map(|(p, m)| (p, m as i32)), d.origin_order().max(0)))
    }

    /// Exponent polynomial when the expression is `exp(P)` in disguise.
    fn exp_form(&self) -> Option<Polynomial> {
        match self {
            ExpPoly(p) => Some(p.clone()),
            Const(c) if *c != ZERO => Some(Polynomial::constant(c.ln())),
            Product(a, b) => Some(a.exp_form()?.add(&b.exp_form()?)),
            Quotient(a, b) => Some(a.exp_form()?.sub(&b.exp_form()?)),
            ComposePoly(c, q) => Some(c.exp_form()?.compose(q)),
            _ => None,
        }
    }

    /// Canonical JSON tree.
    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("expression trees always serialize")
    }

    /// Stable short hash of the canonical JSON form.
    pub fn structure_hash(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("expression trees always serialize");
        hex::encode(&Sha256::digest(&bytes)[..8])
    }
}

/// Rewrites `a - b` into a divisor-transparent form when one is known.
///
/// `None` means no reduction applies; `Some(Err(IdenticalComposition))` means `a ≡ b`.
fn reduce_difference(a: &FunctionExpr, b: &FunctionExpr) -> Option<Result<FunctionExpr>> {
    if let Const(c) = b {
        if *c == ZERO {
            return Some(Ok(a.clone()));
        }
    }
    match (a.exp_form(), b.exp_form()) {
        (Some(p), Some(q)) => {
            let d = p.sub(&q);
            if d.is_constant() && (d.coeff(0).exp() - ONE).norm() <= 1e-15 {
                return Some(Err(Error::IdenticalComposition));
            }
            return Some(Ok(FunctionExpr::product(ExpPoly(q), ExpPolyMinusConst(d, ONE))));
        }
        (Some(p), None) => {
            if let Const(c) = b {
                return Some(Ok(ExpPolyMinusConst(p, *c)));
            }
        }
        (None, Some(q)) => {
            if let Const(c) = a {
                return Some(Ok(FunctionExpr::product(Const(-ONE), ExpPolyMinusConst(q, *c))));
            }
        }
        (None, None) => {}
    }
    if let (Rational { scale, divisor }, Const(c)) = (a, b) {
        return Some(rational_level_set(*scale, divisor, *c));
    }
    None
}

/// `scale * D - a` as a rational function, by solving `A - aB = 0` simultaneously.
///
/// The Newton ratio of `h = B (f - a)` is assembled from the log channel of `f`,
/// so high-degree products never form their coefficients.
fn rational_level_set(scale: Complex64, divisor: &Divisor, a: Complex64) -> Result<FunctionExpr> {
    let f = Rational { scale, divisor: divisor.clone() };
    let zeros = divisor.degree(Side::Zeros) as usize;
    let poles = divisor.degree(Side::Poles) as usize;
    let deg = zeros.max(poles);
    if zeros == poles && scale == a {
        return Err(Error::OpaqueExpr);
    }
    let pole_part = Divisor::new(divisor.side(Side::Poles).map(|(p, m)| (p, -(m as i32))), divisor.origin_order().min(0));
    if deg == 0 {
        let c = scale - a;
        return Ok(if c == ZERO { Const(ZERO) } else { Const(c) });
    }
    let newton = |z: Complex64| -> Result<Complex64> {
        // h'/h = B'/B + L_f / (1 - a/f)
        let mut dlog = ZERO;
        if pole_part.origin_order() != 0 {
            dlog += pole_part.origin_order().unsigned_abs() as f64 / z;
        }
        for (p, m) in pole_part.side(Side::Poles) {
            dlog += m as f64 / (z - p);
        }
        let (lm, arg) = f.logmod_eval(z)?;
        if lm != f64::NEG_INFINITY {
            let ratio = a * Complex64::from_polar((-lm).exp(), -arg);
            let lf = f.logderiv_eval(z)?;
            dlog += lf / (ONE - ratio);
        } else {
            return Ok(ZERO);
        }
        Ok(dlog)
    };
    let radius = 1.0 + 2.0 * divisor.entries().iter().map(|e| e.point.norm()).fold(0.0, f64::max);
    let mut z: Vec<Complex64> = (0..deg)
        .map(|k| Complex64::from_polar(radius * (1.0 + 0.01 * k as f64 / deg as f64), 2.0 * PI * k as f64 / deg as f64 + 0.4))
        .collect();
    let mut last_step = vec![f64::INFINITY; deg];
    let mut done = vec![false; deg];
    for _ in 0..LEVEL_MAX_ITERATIONS {
        let mut all = true;
        for i in 0..deg {
            if done[i] {
                continue;
            }
            let d = match newton(z[i]) {
                Ok(d) if d == ZERO => {
                    done[i] = true;
                    last_step[i] = 0.0;
                    continue;
                }
                Ok(d) => d,
                Err(_) => {
                    z[i] *= Complex64::new(1.0 + 1e-9, 1e-9);
                    all = false;
                    continue;
                }
            };
            let repulsion: Complex64 = (0..deg)
                .filter(|&j| j != i && z[j] != z[i])
                .map(|j| (z[i] - z[j]).inv())
                .sum();
            let step = (d - repulsion).inv();
            if !step.is_finite() {
                all = false;
                continue;
            }
            z[i] -= step;
            last_step[i] = step.norm() / (1.0 + z[i].norm());
            if last_step[i] <= LEVEL_STEP_TOL {
                done[i] = true;
            } else {
                all = false;
            }
        }
        if all {
            break;
        }
    }
    let worst = last_step.iter().copied().fold(0.0, f64::max);
    if !(worst <= LEVEL_ACCEPT_TOL) {
        return Err(Error::RootFindFailure { iterations: LEVEL_MAX_ITERATIONS, residual: worst });
    }
    let lead = if zeros > poles {
        scale
    } else if poles > zeros {
        -a
    } else {
        scale - a
    };
    let mut raw: Vec<(Complex64, i32)> = cluster_roots(&z).into_iter().map(|(p, m)| (p, m as i32)).collect();
    raw.extend(pole_part.side(Side::Poles).map(|(p, m)| (p, -(m as i32))));
    Ok(Rational { scale: lead, divisor: Divisor::new(raw, pole_part.origin_order()) })
}

impl fmt::Display for FunctionExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Const(c) => write!(f, "{c}"),
            Rational { scale, divisor } => write!(
                f,
                "rational[{scale}; {} zeros, {} poles]",
                divisor.degree(Side::Zeros),
                divisor.degree(Side::Poles)
            ),
            ExpPoly(p) => write!(f, "exp({p})"),
            Exp(c) => write!(f, "exp({c})"),
            Product(a, b) => write!(f, "({a})*({b})"),
            Quotient(a, b) => write!(f, "({a})/({b})"),
            Difference(a, b) => write!(f, "({a})-({b})"),
            ComposePoly(c, p) => write!(f, "({c})∘({p})"),
            ExpPolyMinusConst(p, a) => write!(f, "exp({p})-({a})"),
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
struct Node {
    variant: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    children: Vec<Node>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    coeffs: Option<Polynomial>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    value: Option<[f64; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    divisor: Option<Divisor>,
}

impl Node {
    fn leaf(variant: &str) -> Self {
        Node { variant: variant.into(), children: Vec::new(), coeffs: None, value: None, divisor: None }
    }
}

fn pair(c: Complex64) -> Option<[f64; 2]> {
    Some([c.re, c.im])
}

impl From<&FunctionExpr> for Node {
    fn from(e: &FunctionExpr) -> Self {
        match e {
            Const(c) => Node { value: pair(*c), ..Node::leaf("Const") },
            Rational { scale, divisor } => {
                Node { value: pair(*scale), divisor: Some(divisor.clone()), ..Node::leaf("RationalFromDivisor") }
            }
            ExpPoly(p) => Node { coeffs: Some(p.clone()), ..Node::leaf("ExpPoly") },
            Exp(c) => Node { children: vec![Node::from(&**c)], ..Node::leaf("Exp") },
            Product(a, b) => Node { children: vec![Node::from(&**a), Node::from(&**b)], ..Node::leaf("Product") },
            Quotient(a, b) => Node { children: vec![Node::from(&**a), Node::from(&**b)], ..Node::leaf("Quotient") },
            Difference(a, b) => {
                Node { children: vec![Node::from(&**a), Node::from(&**b)], ..Node::leaf("Difference") }
            }
            ComposePoly(c, p) => {
                Node { children: vec![Node::from(&**c)], coeffs: Some(p.clone()), ..Node::leaf("ComposePoly") }
            }
            ExpPolyMinusConst(p, a) => {
                Node { coeffs: Some(p.clone()), value: pair(*a), ..Node::leaf("ExpPolyMinusConst") }
            }
        }
    }
}

impl From<FunctionExpr> for Node {
    fn from(e: FunctionExpr) -> Self {
        Node::from(&e)
    }
}

impl TryFrom<Node> for FunctionExpr {
    type Error = String;

    fn try_from(n: Node) -> std::result::Result<Self, String> {
        let value = || -> std::result::Result<Complex64, String> {
            let [re, im] = n.value.ok_or_else(|| format!("{} needs `value`", n.variant))?;
            Ok(Complex64::new(re, im))
        };
        let coeffs = || n.coeffs.clone().ok_or_else(|| format!("{} needs `coeffs`", n.variant));
        let mut kids = n.children.clone().into_iter().map(FunctionExpr::try_from);
        let mut child = || kids.next().unwrap_or_else(|| Err(format!("{} is missing a child", n.variant)));
        let arity = match n.variant.as_str() {
            "Exp" | "ComposePoly" => 1,
            "Product" | "Quotient" | "Difference" => 2,
            _ => 0,
        };
        if n.children.len() != arity {
            return Err(format!("{} takes {arity} children, got {}", n.variant, n.children.len()));
        }
        Ok(match n.variant.as_str() {
            "Const" => Const(value()?),
            "RationalFromDivisor" => Rational {
                scale: value()?,
                divisor: n.divisor.clone().ok_or("RationalFromDivisor needs `divisor`")?,
            },
            "ExpPoly" => ExpPoly(coeffs()?),
            "Exp" => FunctionExpr::exp(child()?).map_err(|e| e.to_string())?,
            "Product" => FunctionExpr::product(child()?, child()?),
            "Quotient" => FunctionExpr::quotient(child()?, child()?),
            "Difference" => FunctionExpr::difference(child()?, child()?),
            "ComposePoly" => FunctionExpr::compose(child()?, coeffs()?),
            "ExpPolyMinusConst" => ExpPolyMinusConst(coeffs()?, value()?),
            other => return Err(format!("unknown variant `{other}`")),
        })
    }
}

impl Serialize for FunctionExpr {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        Node::from(self).serialize(s)
    }
}

impl<'de> Deserialize<'de> for FunctionExpr {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let node = Node::deserialize(d)?;
        FunctionExpr::try_from(node).map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn z_poly() -> Polynomial {
        Polynomial::identity()
    }

    #[test]
    fn exp_at_zero_and_i_pi() {
        let f = FunctionExpr::exp_poly(z_poly());
        assert_eq!(f.eval(ZERO).unwrap(), ONE);
        // Taylor series oracle for e^{iπ}
        let w = c(0.0, PI);
        let mut term = ONE;
        let mut sum = ONE;
        for k in 1..60 {
            term = term * w / k as f64;
            sum += term;
        }
        let v = f.eval(w).unwrap();
        assert!((v - sum).norm() < 1e-12);
        assert!((v + ONE).norm() < 1e-12);
    }

    #[test]
    fn rational_direct_value() {
        let d = Divisor::new([(ONE, 1), (c(2.0, 0.0), -1)], 0);
        let f = FunctionExpr::rational(ONE, d);
        assert!((f.eval(ZERO).unwrap() - c(0.5, 0.0)).norm() < 1e-15);
        assert!(matches!(f.eval(c(2.0, 0.0)), Err(Error::Pole(_))));
    }

    #[test]
    fn double_exponential_log_channel() {
        let g = FunctionExpr::exp(FunctionExpr::exp_poly(z_poly())).unwrap();
        let (lm, arg) = g.logmod_eval(c(30.0, 0.0)).unwrap();
        assert!((lm - 30f64.exp()).abs() <= 1e-12 * 30f64.exp());
        assert_eq!(arg, 0.0);
        assert!(matches!(g.eval(c(30.0, 0.0)), Err(Error::Overflow(_))));
    }

    #[test]
    fn exp_rejects_poles() {
        let d = Divisor::new([(ONE, -1)], 0);
        assert!(FunctionExpr::exp(FunctionExpr::rational(ONE, d)).is_err());
    }

    #[test]
    fn quotient_log_channel() {
        let f = FunctionExpr::exp_poly(Polynomial::from_real(&[0.0, 2.0]));
        let g = FunctionExpr::rational(ONE, Divisor::new([(c(1.0, 1.0), 1)], 0));
        let q = FunctionExpr::quotient(f.clone(), g.clone());
        let z = c(0.3, -1.7);
        let (lq, aq) = q.logmod_eval(z).unwrap();
        let (lf, af) = f.logmod_eval(z).unwrap();
        let (lg, ag) = g.logmod_eval(z).unwrap();
        assert!((lq - (lf - lg)).abs() < 1e-14);
        assert!((wrap_angle(aq - (af - ag))).abs() < 1e-14);
    }

    #[test]
    fn logderiv_examples() {
        let f = FunctionExpr::exp_poly(Polynomial::from_real(&[0.0, 0.0, 1.0]));
        let z = c(0.7, 0.2);
        assert!((f.logderiv_eval(z).unwrap() - 2.0 * z).norm() < 1e-15);
        let g = FunctionExpr::rational(ONE, Divisor::new([(ONE, 1)], 0));
        assert!((g.logderiv_eval(c(3.0, 0.0)).unwrap() - c(0.5, 0.0)).norm() < 1e-15);
        assert!(matches!(g.logderiv_eval(ONE), Err(Error::Singular(_))));
    }

    #[test]
    fn exp_minus_one_zeros() {
        let f = FunctionExpr::exp_poly_minus_const(z_poly(), ONE);
        let d = f.divisor_in_disc(7.0).unwrap();
        assert_eq!(d.origin_order(), 1);
        let pts: Vec<_> = d.side(Side::Zeros).collect();
        assert_eq!(pts.len(), 2);
        for (p, m) in pts {
            assert_eq!(m, 1);
            assert!((p.norm() - 2.0 * PI).abs() < 1e-12);
            assert!(p.re.abs() < 1e-12);
        }
        assert!(FunctionExpr::exp_poly(z_poly()).divisor_in_disc(10.0).unwrap().is_empty());
    }

    #[test]
    fn compose_pulls_back() {
        let f = FunctionExpr::compose(
            FunctionExpr::rational(ONE, Divisor::new([(ONE, 1)], 0)),
            Polynomial::from_real(&[0.0, 0.0, 1.0]),
        );
        let d = f.divisor_in_disc(2.0).unwrap();
        let mut pts: Vec<_> = d.side(Side::Zeros).map(|(p, _)| p.re).collect();
        pts.sort_by(f64::total_cmp);
        assert_eq!(pts.len(), 2);
        assert!((pts[0] + 1.0).abs() < 1e-14 && (pts[1] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn exp_difference_reduces() {
        // e^{z^2+z} - e^{z^2} = e^{z^2} (e^z - 1)
        let a = FunctionExpr::exp_poly(Polynomial::from_real(&[0.0, 1.0, 1.0]));
        let b = FunctionExpr::exp_poly(Polynomial::from_real(&[0.0, 0.0, 1.0]));
        let d = FunctionExpr::difference(a.clone(), b.clone());
        assert!(d.is_divisor_transparent());
        let div = d.divisor_in_disc(7.0).unwrap();
        assert_eq!(div.degree(Side::Zeros), 3);
        let z = c(1.3, 0.4);
        let direct = a.eval(z).unwrap() - b.eval(z).unwrap();
        assert!((d.eval(z).unwrap() - direct).norm() < 1e-12 * direct.norm());
        let same = FunctionExpr::difference(a.clone(), a);
        assert_eq!(same.divisor_in_disc(3.0), Err(Error::IdenticalComposition));
        assert!(!FunctionExpr::difference(FunctionExpr::exp_poly(z_poly()), FunctionExpr::rational(ONE, Divisor::new([(ONE, 1)], 0))).is_divisor_transparent());
    }

    #[test]
    fn rational_level_set_matches_quadratic() {
        // (z-1)/(z+1) = a  <=>  z = (1+a)/(1-a)
        let f = FunctionExpr::rational(ONE, Divisor::new([(ONE, 1), (-ONE, -1)], 0));
        let a = c(0.37, 0.21);
        let d = FunctionExpr::difference(f, Const(a)).divisor_in_disc(100.0).unwrap();
        let zeros: Vec<_> = d.side(Side::Zeros).collect();
        assert_eq!(zeros.len(), 1);
        let expected = (ONE + a) / (ONE - a);
        assert!((zeros[0].0 - expected).norm() < 1e-10);
        assert_eq!(d.degree(Side::Poles), 1);
    }

    #[test]
    fn json_round_trip() {
        let f = FunctionExpr::quotient(
            FunctionExpr::exp(FunctionExpr::exp_poly(z_poly())).unwrap(),
            FunctionExpr::compose(
                FunctionExpr::rational(c(2.0, 0.0), Divisor::new([(ONE, 1), (c(0.0, 0.0), -1)], 0)),
                Polynomial::from_real(&[1.0, 1.0]),
            ),
        );
        let s = serde_json::to_string(&f).unwrap();
        assert!(s.starts_with(r#"{"variant":"Quotient","children":[{"variant":"Exp""#));
        let back: FunctionExpr = serde_json::from_str(&s).unwrap();
        assert_eq!(back, f);
        assert_eq!(back.structure_hash(), f.structure_hash());
        let bad = r#"{"variant":"Exp","children":[{"variant":"RationalFromDivisor","value":[1,0],"divisor":[{"point":[1,0],"mult":-1}]}]}"#;
        assert!(serde_json::from_str::<FunctionExpr>(bad).is_err());
    }

    #[test]
    fn log_sub_handles_cancellation_scale() {
        let big = (800.0, 0.3);
        let small = (1.0, 0.0);
        let (lm, arg) = log_sub(big, small);
        assert!((lm - 800.0).abs() < 1e-12 && (arg - 0.3).abs() < 1e-12);
        let (lm, arg) = log_sub(small, big);
        assert!((lm - 800.0).abs() < 1e-12 && (wrap_angle(arg - 0.3 - PI)).abs() < 1e-12);
    }
}
