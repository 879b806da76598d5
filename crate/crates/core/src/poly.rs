//! Dense complex polynomials and an all-roots-at-once solver.
//!
//! Coefficients are stored lowest degree first. Root finding uses the
//! Aberth-Ehrlich simultaneous iteration from a deterministic perturbed circle;
//! degrees one and two are solved in closed form.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const ROOT_MAX_ITERATIONS: usize = 200;
/// Relative distance below which two roots are treated as one multiple root.
pub const ROOT_CLUSTER_TOL: f64 = 1e-5;
const ROOT_STEP_TOL: f64 = 1e-15;
/// Residual tolerance for accepting roots: |p(z)| <= tol (1+|z|)^deg |c_deg|.
pub const ROOT_RESIDUAL_TOL: f64 = 1e-8;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<[f64; 2]>", into = "Vec<[f64; 2]>")]
pub struct Polynomial {
    coeffs: Vec<Complex64>,
}

impl Polynomial {
    /// Builds a polynomial, trimming zero leading coefficients.
    pub fn new(mut coeffs: Vec<Complex64>) -> Self {
        while coeffs.len() > 1 && coeffs.last().is_some_and(|c| *c == Complex64::new(0.0, 0.0)) {
            coeffs.pop();
        }
        if coeffs.is_empty() {
            coeffs.push(Complex64::new(0.0, 0.0));
        }
        Polynomial { coeffs }
    }

    pub fn from_real(coeffs: &[f64]) -> Self {
        Self::new(coeffs.iter().map(|&c| Complex64::new(c, 0.0)).collect())
    }

    pub fn constant(c: Complex64) -> Self {
        Self::new(vec![c])
    }

    /// z
    pub fn identity() -> Self {
        Self::from_real(&[0.0, 1.0])
    }

    /// c z^n
    pub fn monomial(c: Complex64, n: usize) -> Self {
        let mut coeffs = vec![Complex64::new(0.0, 0.0); n + 1];
        coeffs[n] = c;
        Self::new(coeffs)
    }

    /// Monic polynomial with the given roots.
    pub fn from_roots(roots: &[Complex64]) -> Self {
        let mut p = Self::constant(Complex64::new(1.0, 0.0));
        for &r in roots {
            p = p.mul(&Self::new(vec![-r, Complex64::new(1.0, 0.0)]));
        }
        p
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.len() == 1 && self.coeffs[0] == Complex64::new(0.0, 0.0)
    }

    pub fn is_constant(&self) -> bool {
        self.coeffs.len() == 1
    }

    pub fn leading(&self) -> Complex64 {
        *self.coeffs.last().unwrap()
    }

    /// Coefficient of z^j, zero beyond the degree.
    pub fn coeff(&self, j: usize) -> Complex64 {
        self.coeffs.get(j).copied().unwrap_or_default()
    }

    pub fn eval(&self, z: Complex64) -> Complex64 {
        self.coeffs.iter().rev().fold(Complex64::new(0.0, 0.0), |acc, &c| acc * z + c)
    }

    /// Value and first derivative in one Horner pass.
    pub fn eval_with_derivative(&self, z: Complex64) -> (Complex64, Complex64) {
        let mut p = Complex64::new(0.0, 0.0);
        let mut dp = Complex64::new(0.0, 0.0);
        for &c in self.coeffs.iter().rev() {
            dp = dp * z + p;
            p = p * z + c;
        }
        (p, dp)
    }

    /// Upper bound for max_{|z|<=r} |p(z)| from the coefficient moduli.
    pub fn max_modulus_bound(&self, r: f64) -> f64 {
        self.coeffs.iter().rev().fold(0.0, |acc, c| acc * r + c.norm())
    }

    pub fn derivative(&self) -> Self {
        if self.degree() == 0 {
            return Self::constant(Complex64::new(0.0, 0.0));
        }
        Self::new(
            self.coeffs
                .iter()
                .enumerate()
                .skip(1)
                .map(|(j, &c)| c * j as f64)
                .collect(),
        )
    }

    pub fn add(&self, other: &Self) -> Self {
        let n = self.coeffs.len().max(other.coeffs.len());
        Self::new((0..n).map(|j| self.coeff(j) + other.coeff(j)).collect())
    }

    pub fn sub(&self, other: &Self) -> Self {
        let n = self.coeffs.len().max(other.coeffs.len());
        Self::new((0..n).map(|j| self.coeff(j) - other.coeff(j)).collect())
    }

    pub fn scale(&self, c: Complex64) -> Self {
        Self::new(self.coeffs.iter().map(|&a| a * c).collect())
    }

    pub fn mul(&self, other: &Self) -> Self {
        let mut out = vec![Complex64::new(0.0, 0.0); self.coeffs.len() + other.coeffs.len() - 1];
        for (i, &a) in self.coeffs.iter().enumerate() {
            for (j, &b) in other.coeffs.iter().enumerate() {
                out[i + j] += a * b;
            }
        }
        Self::new(out)
    }

    pub fn pow(&self, k: usize) -> Self {
        (0..k).fold(Self::constant(Complex64::new(1.0, 0.0)), |acc, _| acc.mul(self))
    }

    /// self ∘ inner
    pub fn compose(&self, inner: &Self) -> Self {
        self.coeffs
            .iter()
            .rev()
            .fold(Self::constant(Complex64::new(0.0, 0.0)), |acc, &c| {
                acc.mul(inner).add(&Self::constant(c))
            })
    }

    /// All complex roots with multiplicity.
    pub fn roots(&self) -> Result<Vec<Complex64>> {
        poly_roots(self)
    }
}

impl TryFrom<Vec<[f64; 2]>> for Polynomial {
    type Error = String;

    fn try_from(v: Vec<[f64; 2]>) -> std::result::Result<Self, String> {
        if v.iter().flatten().any(|x| !x.is_finite()) {
            return Err("polynomial coefficients must be finite".into());
        }
        Ok(Polynomial::new(v.into_iter().map(|[re, im]| Complex64::new(re, im)).collect()))
    }
}

impl From<Polynomial> for Vec<[f64; 2]> {
    fn from(p: Polynomial) -> Self {
        p.coeffs.iter().map(|c| [c.re, c.im]).collect()
    }
}

impl fmt::Display for Polynomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        for (j, c) in self.coeffs.iter().enumerate().rev() {
            if *c == Complex64::new(0.0, 0.0) && !(self.is_zero() && j == 0) {
                continue;
            }
            if !first {
                write!(f, " + ")?;
            }
            first = false;
            let coef = if c.im == 0.0 {
                format!("{}", c.re)
            } else {
                format!("({}{:+}i)", c.re, c.im)
            };
            match j {
                0 => write!(f, "{coef}")?,
                1 => write!(f, "{coef}*z")?,
                _ => write!(f, "{coef}*z^{j}")?,
            }
        }
        Ok(())
    }
}

/// Parses a complex literal such as `4`, `-i`, `0.5+0.2i` or `(2e-3-1i)`.
pub fn parse_complex(s: &str) -> std::result::Result<Complex64, String> {
    let t: String = s.chars().filter(|c| !c.is_whitespace()).collect();
    if t.is_empty() {
        return Err("empty complex literal".into());
    }
    let t = t.trim_start_matches('(').trim_end_matches(')');
    // split at the last sign that is not the leading one and not part of an exponent
    let bytes = t.as_bytes();
    let mut split = None;
    for i in (1..bytes.len()).rev() {
        if (bytes[i] == b'+' || bytes[i] == b'-') && !matches!(bytes[i - 1], b'e' | b'E') {
            split = Some(i);
            break;
        }
    }
    let parse_part = |p: &str| -> std::result::Result<Complex64, String> {
        if let Some(stripped) = p.strip_suffix('i').or_else(|| p.strip_suffix('j')) {
            let v = match stripped {
                "" | "+" => 1.0,
                "-" => -1.0,
                x => x.trim_end_matches('*').parse::<f64>().map_err(|e| format!("bad imaginary part `{p}`: {e}"))?,
            };
            Ok(Complex64::new(0.0, v))
        } else {
            let v = p.parse::<f64>().map_err(|e| format!("bad real part `{p}`: {e}"))?;
            Ok(Complex64::new(v, 0.0))
        }
    };
    match split {
        Some(i) => Ok(parse_part(&t[..i])? + parse_part(&t[i..])?),
        None => parse_part(t),
    }
}

impl FromStr for Polynomial {
    type Err = String;

    /// Parses sums of terms like `z^2+z`, `2*z^3 - 1` or `(0.5+0.2i)*z`.
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        let t: String = s.chars().filter(|c| !c.is_whitespace()).collect();
        if t.is_empty() {
            return Err("empty polynomial".into());
        }
        let mut terms = Vec::new();
        let mut depth = 0usize;
        let mut start = 0usize;
        let bytes = t.as_bytes();
        for i in 0..bytes.len() {
            match bytes[i] {
                b'(' => depth += 1,
                b')' => depth = depth.saturating_sub(1),
                b'+' | b'-' if depth == 0 && i > start && !matches!(bytes[i - 1], b'e' | b'E' | b'^') => {
                    terms.push(&t[start..i]);
                    start = i;
                }
                _ => {}
            }
        }
        terms.push(&t[start..]);

        let mut coeffs: Vec<Complex64> = Vec::new();
        for term in terms {
            let (sign, body) = match term.as_bytes()[0] {
                b'-' => (-1.0, &term[1..]),
                b'+' => (1.0, &term[1..]),
                _ => (1.0, term),
            };
            let (coef_str, power) = match body.find('z') {
                Some(pos) => {
                    let rest = &body[pos + 1..];
                    let power = if rest.is_empty() {
                        1
                    } else if let Some(e) = rest.strip_prefix('^') {
                        e.parse::<usize>().map_err(|e| format!("bad exponent in `{term}`: {e}"))?
                    } else {
                        return Err(format!("unexpected text after z in `{term}`"));
                    };
                    (body[..pos].trim_end_matches('*'), power)
                }
                None => (body, 0),
            };
            let coef = if coef_str.is_empty() {
                Complex64::new(1.0, 0.0)
            } else {
                parse_complex(coef_str)?
            };
            if coeffs.len() <= power {
                coeffs.resize(power + 1, Complex64::new(0.0, 0.0));
            }
            coeffs[power] += coef * sign;
        }
        Ok(Polynomial::new(coeffs))
    }
}

/// All complex roots of `p` with multiplicity.
///
/// Degree one and two use closed forms; higher degrees run Aberth-Ehrlich
/// iteration from a perturbed circle of radius `1 + max|c_j / c_deg|`.
pub fn poly_roots(p: &Polynomial) -> Result<Vec<Complex64>> {
    let deg = p.degree();
    if deg == 0 {
        return Err(Error::InvalidInput("poly_roots needs degree >= 1".into()));
    }
    // strip roots at the origin exactly
    let zeros_at_origin = p.coeffs.iter().take_while(|c| **c == Complex64::new(0.0, 0.0)).count();
    let mut roots = vec![Complex64::new(0.0, 0.0); zeros_at_origin];
    let reduced = Polynomial::new(p.coeffs[zeros_at_origin..].to_vec());
    let c = reduced.coeffs();
    match reduced.degree() {
        0 => {}
        1 => roots.push(-c[0] / c[1]),
        2 => {
            let (a, b, cc) = (c[2], c[1], c[0]);
            let disc = (b * b - a * cc * 4.0).sqrt();
            // choose the sign that avoids cancellation
            let q = if (b.conj() * disc).re >= 0.0 { -(b + disc) / 2.0 } else { -(b - disc) / 2.0 };
            if q == Complex64::new(0.0, 0.0) {
                roots.extend([Complex64::new(0.0, 0.0); 2]);
            } else {
                roots.push(q / a);
                roots.push(cc / q);
            }
        }
        _ => roots.extend(aberth(&reduced)?),
    }
    Ok(roots)
}

fn aberth(p: &Polynomial) -> Result<Vec<Complex64>> {
    let deg = p.degree();
    let lead = p.leading();
    let bound = 1.0
        + p.coeffs[..deg]
            .iter()
            .map(|c| (c / lead).norm())
            .fold(0.0, f64::max);
    let mut z: Vec<Complex64> = (0..deg)
        .map(|k| {
            let angle = 2.0 * PI * k as f64 / deg as f64 + 0.4;
            Complex64::from_polar(bound * (1.0 + 0.01 * k as f64 / deg as f64), angle)
        })
        .collect();
    let mut converged = vec![false; deg];
    for iter in 0..ROOT_MAX_ITERATIONS {
        let mut max_step: f64 = 0.0;
        for i in 0..deg {
            if converged[i] {
                continue;
            }
            let (v, dv) = p.eval_with_derivative(z[i]);
            if v.norm() == 0.0 {
                converged[i] = true;
                continue;
            }
            let ratio = v / dv;
            let repulsion: Complex64 = (0..deg)
                .filter(|&j| j != i)
                .map(|j| {
                    let d = z[i] - z[j];
                    if d == Complex64::new(0.0, 0.0) {
                        Complex64::new(0.0, 0.0)
                    } else {
                        d.inv()
                    }
                })
                .sum();
            let step = ratio / (Complex64::new(1.0, 0.0) - ratio * repulsion);
            if !step.is_finite() {
                continue;
            }
            z[i] -= step;
            let rel = step.norm() / (1.0 + z[i].norm());
            max_step = max_step.max(rel);
            if rel <= ROOT_STEP_TOL {
                converged[i] = true;
            }
        }
        if converged.iter().all(|&c| c) || max_step <= ROOT_STEP_TOL {
            return check_residuals(p, z, iter + 1);
        }
    }
    check_residuals(p, z, ROOT_MAX_ITERATIONS)
}

fn check_residuals(p: &Polynomial, z: Vec<Complex64>, iterations: usize) -> Result<Vec<Complex64>> {
    let deg = p.degree() as i32;
    let lead = p.leading().norm();
    let worst = z
        .iter()
        .map(|&r| p.eval(r).norm() / ((1.0 + r.norm()).powi(deg) * lead))
        .fold(0.0, f64::max);
    if worst.is_finite() && worst <= ROOT_RESIDUAL_TOL {
        Ok(z)
    } else {
        Err(Error::RootFindFailure { iterations, residual: worst })
    }
}

/// Groups roots closer than [`ROOT_CLUSTER_TOL`] (relative) into `(mean, multiplicity)` pairs.
pub fn cluster_roots(roots: &[Complex64]) -> Vec<(Complex64, u32)> {
    let mut used = vec![false; roots.len()];
    let mut out = Vec::new();
    for i in 0..roots.len() {
        if used[i] {
            continue;
        }
        used[i] = true;
        let mut members = vec![roots[i]];
        for j in i + 1..roots.len() {
            if !used[j] && (roots[j] - roots[i]).norm() <= ROOT_CLUSTER_TOL * (1.0 + roots[i].norm()) {
                used[j] = true;
                members.push(roots[j]);
            }
        }
        let mean = members.iter().sum::<Complex64>() / members.len() as f64;
        out.push((mean, members.len() as u32));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn sorted(mut v: Vec<Complex64>) -> Vec<Complex64> {
        v.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
        v
    }

    #[test]
    fn quadratic_roots() {
        let r = sorted(poly_roots(&Polynomial::from_real(&[-1.0, 0.0, 1.0])).unwrap());
        assert!((r[0] - c(-1.0, 0.0)).norm() < 1e-15);
        assert!((r[1] - c(1.0, 0.0)).norm() < 1e-15);
        let r = sorted(poly_roots(&Polynomial::from_real(&[1.0, 0.0, 1.0])).unwrap());
        assert!((r[0] - c(0.0, -1.0)).norm() < 1e-15);
        assert!((r[1] - c(0.0, 1.0)).norm() < 1e-15);
    }

    #[test]
    fn triple_root_clusters() {
        let p = Polynomial::from_roots(&[c(3.0, 0.0); 3]);
        let roots = poly_roots(&p).unwrap();
        assert_eq!(roots.len(), 3);
        for r in &roots {
            assert!((r - c(3.0, 0.0)).norm() < 1e-4, "{r}");
            assert!(p.eval(*r).norm() <= ROOT_RESIDUAL_TOL * (1.0 + r.norm()).powi(3));
        }
        let clusters = cluster_roots(&roots);
        assert_eq!(clusters.len(), 1);
        assert_eq!(clusters[0].1, 3);
    }

    #[test]
    fn roots_at_origin_are_exact() {
        let p = Polynomial::from_real(&[0.0, 0.0, -2.0, 0.0, 1.0]);
        let roots = poly_roots(&p).unwrap();
        assert_eq!(roots.iter().filter(|r| r.norm() == 0.0).count(), 2);
    }

    #[test]
    fn degree_zero_rejected() {
        assert!(poly_roots(&Polynomial::from_real(&[2.0])).is_err());
    }

    #[test]
    fn parse_polynomials() {
        let p: Polynomial = "z^2+z".parse().unwrap();
        assert_eq!(p, Polynomial::from_real(&[0.0, 1.0, 1.0]));
        let p: Polynomial = "(0.5+0.2i)*z - 3 + 2z^3".parse().unwrap();
        assert_eq!(p.coeffs(), &[c(-3.0, 0.0), c(0.5, 0.2), c(0.0, 0.0), c(2.0, 0.0)]);
        let p: Polynomial = "z".parse().unwrap();
        assert_eq!(p, Polynomial::identity());
        let p: Polynomial = "-z^2".parse().unwrap();
        assert_eq!(p, Polynomial::from_real(&[0.0, 0.0, -1.0]));
    }

    #[test]
    fn parse_complex_literals() {
        assert_eq!(parse_complex("4").unwrap(), c(4.0, 0.0));
        assert_eq!(parse_complex("-i").unwrap(), c(0.0, -1.0));
        assert_eq!(parse_complex("0.5+0.2i").unwrap(), c(0.5, 0.2));
        assert_eq!(parse_complex("1e-3-2e2i").unwrap(), c(1e-3, -200.0));
    }

    #[test]
    fn binomial_power_matches_compose() {
        let beta = c(0.5, 0.5);
        let lin = Polynomial::new(vec![beta, c(1.0, 0.0)]);
        let p = lin.pow(10);
        assert_eq!(p.degree(), 10);
        assert!((p.coeff(9) - beta * 10.0).norm() < 1e-14);
        assert!((p.coeff(0) - beta.powu(10)).norm() < 1e-14);
        let q = Polynomial::from_real(&[0.0, 1.0, 1.0]).compose(&Polynomial::from_real(&[1.0, 1.0]));
        // (z+1)^2 + (z+1) = z^2 + 3z + 2
        assert_eq!(q, Polynomial::from_real(&[2.0, 3.0, 1.0]));
    }
}
