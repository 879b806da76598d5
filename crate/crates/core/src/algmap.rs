//! Fixed-branch algebraic maps `τ(z) = z + α_{n-1} w^{n-1} + … + α_1 w + α_0`
//! with `w` a chosen branch of `z^{1/n}`, their orbits, polynomialization and
//! forward-invariance censuses of pre-image multisets.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::divisor::{pair, Side};
use crate::error::{Error, Result};
use crate::expr::FunctionExpr;
use crate::par::{try_map_ordered, Execution};
use crate::poly::{parse_complex, Polynomial};

/// Distance to the negative real axis treated as sitting on the cut in tracking mode.
pub const CUT_TOL: f64 = 1e-12;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BranchPolicy {
    /// Every evaluation uses `branch` relative to the principal argument in `(-π, π]`.
    #[default]
    FixedPrincipal,
    /// Follows the root continuously along an orbit.
    Tracking,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AlgebraicMap {
    pub n: usize,
    /// `α_0 … α_{n-1}`
    #[serde(with = "pairs")]
    pub alphas: Vec<Complex64>,
    pub branch: usize,
}

fn principal_arg(z: Complex64) -> f64 {
    if z.im == 0.0 && z.re < 0.0 {
        PI
    } else {
        z.arg()
    }
}

impl AlgebraicMap {
    pub fn new(n: usize, alphas: Vec<Complex64>, branch: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidInput("root order n must be positive".into()));
        }
        if alphas.len() != n {
            return Err(Error::InvalidInput(format!("expected {n} coefficients α_0..α_{}, got {}", n - 1, alphas.len())));
        }
        if branch >= n {
            return Err(Error::InvalidInput(format!("branch {branch} outside 0..{n}")));
        }
        Ok(AlgebraicMap { n, alphas, branch })
    }

    pub fn translation(shift: Complex64) -> Self {
        AlgebraicMap { n: 1, alphas: vec![shift], branch: 0 }
    }

    /// `τ(z) = z + (1/2 + i/5) √z`
    pub fn figure1_left() -> Self {
        AlgebraicMap { n: 2, alphas: vec![Complex64::new(0.0, 0.0), Complex64::new(0.5, 0.2)], branch: 0 }
    }

    /// `τ(z) = (z^{1/10} + 1/2 + i/2)^{10}`, expanded binomially in `w = z^{1/10}`.
    pub fn figure1_right() -> Self {
        Self::root_shift(10, Complex64::new(0.5, 0.5), 0)
    }

    /// `τ(z) = (z^{1/n} + β)^n` with the `z` term split off.
    pub fn root_shift(n: usize, beta: Complex64, branch: usize) -> Self {
        let expanded = Polynomial::new(vec![beta, Complex64::new(1.0, 0.0)]).pow(n);
        AlgebraicMap { n, alphas: (0..n).map(|j| expanded.coeff(j)).collect(), branch }
    }

    /// Branch `b` of `z^{1/n}`: `|z|^{1/n} exp(i (Arg z + 2π b) / n)`.
    pub fn root(&self, z: Complex64, b: usize) -> Complex64 {
        if self.n == 1 {
            return z;
        }
        if z.norm() == 0.0 {
            return Complex64::new(0.0, 0.0);
        }
        if self.n == 2 {
            // principal square root, exact on perfect squares
            let w = if z.im == 0.0 {
                if z.re >= 0.0 {
                    Complex64::new(z.re.sqrt(), 0.0)
                } else {
                    Complex64::new(0.0, (-z.re).sqrt())
                }
            } else {
                z.sqrt()
            };
            return if b.is_multiple_of(2) { w } else { -w };
        }
        let theta = (principal_arg(z) + 2.0 * PI * b as f64) / self.n as f64;
        Complex64::from_polar(z.norm().powf(1.0 / self.n as f64), theta)
    }

    fn apply_root(&self, z: Complex64, w: Complex64) -> Complex64 {
        z + self.alphas.iter().rev().fold(Complex64::new(0.0, 0.0), |acc, &a| acc * w + a)
    }

    /// `τ(z)` under the fixed branch.
    pub fn tau_eval(&self, z: Complex64) -> Complex64 {
        self.apply_root(z, self.root(z, self.branch))
    }

    /// `ω(z) = τ(z^n)` with `(z^n)^{1/n}` replaced formally by `z`.
    pub fn polynomialize(&self, n: usize) -> Result<Polynomial> {
        if n != self.n {
            return Err(Error::OrderMismatch { requested: n, map: self.n });
        }
        let mut coeffs = self.alphas.clone();
        coeffs.push(Complex64::new(1.0, 0.0));
        Ok(Polynomial::new(coeffs))
    }

    /// Forward orbit `τ^0(seed) … τ^k(seed)`.
    pub fn orbit(&self, seed: Complex64, k: usize, policy: BranchPolicy) -> Result<Orbit> {
        let mut points = Vec::with_capacity(k + 1);
        let mut cut_crossed = Vec::with_capacity(k + 1);
        points.push(seed);
        cut_crossed.push(false);
        let mut z = seed;
        let mut w_prev: Option<Complex64> = None;
        for _ in 0..k {
            let w = match policy {
                BranchPolicy::FixedPrincipal => self.root(z, self.branch),
                BranchPolicy::Tracking => {
                    if self.n > 1 && z.re < 0.0 && z.im.abs() <= CUT_TOL * (1.0 + z.norm()) {
                        return Err(Error::BranchAmbiguity(z));
                    }
                    match w_prev {
                        None => self.root(z, self.branch),
                        Some(wp) => (0..self.n)
                            .map(|b| self.root(z, b))
                            .min_by(|a, b| (a - wp).norm().total_cmp(&(b - wp).norm()))
                            .expect("n >= 1"),
                    }
                }
            };
            w_prev = Some(w);
            let next = self.apply_root(z, w);
            cut_crossed.push(crosses_cut(z, next));
            points.push(next);
            z = next;
        }
        let escape_flag = escape_window_increasing(&points);
        Ok(Orbit { seed, points, cut_crossed, escape_flag })
    }

    pub fn escape_probe(&self, seeds: &[Complex64], k: usize) -> Result<Vec<EscapeClass>> {
        if k < 10 {
            return Err(Error::InvalidInput("escape probe needs K >= 10".into()));
        }
        seeds
            .iter()
            .map(|&s| Ok(classify(&self.orbit(s, k, BranchPolicy::FixedPrincipal)?.points)))
            .collect()
    }
}

impl fmt::Display for AlgebraicMap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "z")?;
        for (j, a) in self.alphas.iter().enumerate().rev() {
            if a.norm() == 0.0 {
                continue;
            }
            match j {
                0 => write!(f, " + ({a})")?,
                _ if self.n == 1 => unreachable!(),
                1 => write!(f, " + ({a})·z^(1/{})", self.n)?,
                _ => write!(f, " + ({a})·z^({j}/{})", self.n)?,
            }
        }
        write!(f, " [branch {}]", self.branch)
    }
}

/// Whether the segment `a → b` meets the negative real axis.
pub fn crosses_cut(a: Complex64, b: Complex64) -> bool {
    if (a.im > 0.0 && b.im > 0.0) || (a.im < 0.0 && b.im < 0.0) {
        return false;
    }
    if a.im == b.im {
        return a.im == 0.0 && (a.re < 0.0 || b.re < 0.0);
    }
    let t = a.im / (a.im - b.im);
    a.re + t * (b.re - a.re) < 0.0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Orbit {
    #[serde(with = "pair")]
    pub seed: Complex64,
    #[serde(with = "pairs")]
    pub points: Vec<Complex64>,
    /// `cut_crossed[k]`: the step into `points[k]` crossed the negative real axis.
    pub cut_crossed: Vec<bool>,
    pub escape_flag: bool,
}

/// Length of the trailing window used for the escape test.
pub fn escape_window(k: usize) -> usize {
    (k / 4).max(5)
}

fn escape_window_increasing(points: &[Complex64]) -> bool {
    let k = points.len().saturating_sub(1);
    if k == 0 {
        return false;
    }
    let start = k.saturating_sub(escape_window(k));
    points[start..].windows(2).all(|w| w[1].norm() > w[0].norm())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EscapeClass {
    Escaped,
    Bounded,
    Undecided,
}

/// Escaped: strictly increasing modulus over the window. Bounded: the window sets no
/// new modulus record. Anything else is undecided.
pub fn classify(points: &[Complex64]) -> EscapeClass {
    if escape_window_increasing(points) {
        return EscapeClass::Escaped;
    }
    let k = points.len() - 1;
    let start = k.saturating_sub(escape_window(k));
    let before = points[..=start].iter().map(|z| z.norm()).fold(0.0, f64::max);
    let window = points[start..].iter().map(|z| z.norm()).fold(0.0, f64::max);
    if window <= before * (1.0 + 1e-12) {
        EscapeClass::Bounded
    } else {
        EscapeClass::Undecided
    }
}

/// A value whose pre-images are censused: a finite point or ∞ (the poles).
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum TargetValue {
    Finite(Complex64),
    Infinity,
}

impl TargetValue {
    pub fn as_option(self) -> Option<Complex64> {
        match self {
            TargetValue::Finite(a) => Some(a),
            TargetValue::Infinity => None,
        }
    }
}

impl fmt::Display for TargetValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TargetValue::Finite(a) if a.im == 0.0 => write!(f, "{}", a.re),
            TargetValue::Finite(a) => write!(f, "{}{:+}i", a.re, a.im),
            TargetValue::Infinity => write!(f, "inf"),
        }
    }
}

impl FromStr for TargetValue {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.trim() {
            "inf" | "infinity" | "∞" => Ok(TargetValue::Infinity),
            other => parse_complex(other).map(TargetValue::Finite),
        }
    }
}

impl Serialize for TargetValue {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for TargetValue {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Match {
    #[serde(with = "pair")]
    pub point: Complex64,
    #[serde(with = "pair")]
    pub image: Complex64,
    #[serde(with = "pair")]
    pub matched_point: Complex64,
    pub distance: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    #[serde(with = "pair")]
    pub point: Complex64,
    #[serde(with = "pair")]
    pub image: Complex64,
    pub nearest_distance: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PreimagePoint {
    #[serde(with = "pair")]
    pub point: Complex64,
    pub mult: u32,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InvarianceReport {
    pub value: TargetValue,
    pub radius: f64,
    pub tol: f64,
    pub preimage_points: Vec<PreimagePoint>,
    pub matched: Vec<Match>,
    pub violations: Vec<Violation>,
    /// Images outside the census disc, excluded from the verdict.
    pub boundary_leaks: usize,
    /// Some image had two candidate targets within 10 tol.
    pub ambiguous: bool,
    pub max_matched_distance: f64,
    pub verdict: bool,
}

fn point_order(a: &Complex64, b: &Complex64) -> std::cmp::Ordering {
    a.norm()
        .total_cmp(&b.norm())
        .then(a.arg().total_cmp(&b.arg()))
        .then(a.re.total_cmp(&b.re))
        .then(a.im.total_cmp(&b.im))
}

/// Census of an explicit pre-image multiset.
///
/// Each point whose image lies in `|z| <= radius` is matched greedily to the nearest
/// target with enough unconsumed multiplicity; a match counts when the distance is at
/// most `tol (1 + |image|)`.
pub fn census_points(
    value: TargetValue,
    points: &[(Complex64, u32)],
    map: &AlgebraicMap,
    radius: f64,
    tol: f64,
) -> InvarianceReport {
    let mut sorted: Vec<(Complex64, u32)> = points.to_vec();
    sorted.sort_by(|a, b| point_order(&a.0, &b.0).then(a.1.cmp(&b.1)));
    let mut remaining: Vec<u32> = sorted.iter().map(|p| p.1).collect();
    let mut matched = Vec::new();
    let mut violations = Vec::new();
    let mut leaks = 0;
    let mut ambiguous = false;
    for &(p, mult) in &sorted {
        let image = map.tau_eval(p);
        if !(image.norm() <= radius) {
            leaks += 1;
            continue;
        }
        let thresh = tol * (1.0 + image.norm());
        let mut best: Option<(usize, f64)> = None;
        let mut close = 0;
        for (j, &(q, _)) in sorted.iter().enumerate() {
            let d = (q - image).norm();
            if d <= 10.0 * thresh {
                close += 1;
            }
            if remaining[j] >= mult && best.is_none_or(|(_, bd)| d < bd) {
                best = Some((j, d));
            }
        }
        ambiguous |= close > 1;
        match best {
            Some((j, d)) if d <= thresh => {
                remaining[j] -= mult;
                matched.push(Match { point: p, image, matched_point: sorted[j].0, distance: d });
            }
            other => violations.push(Violation {
                point: p,
                image,
                nearest_distance: other.map_or(f64::INFINITY, |(_, d)| d),
            }),
        }
    }
    let max_matched_distance = matched.iter().map(|m| m.distance).fold(0.0, f64::max);
    InvarianceReport {
        value,
        radius,
        tol,
        preimage_points: sorted.iter().map(|&(point, mult)| PreimagePoint { point, mult }).collect(),
        verdict: violations.is_empty(),
        matched,
        violations,
        boundary_leaks: leaks,
        ambiguous,
        max_matched_distance,
    }
}

/// Pre-images of `value` in `|z| <= radius` as a point multiset.
pub fn preimages(expr: &FunctionExpr, value: TargetValue, radius: f64) -> Result<Vec<(Complex64, u32)>> {
    let d = expr.preimage_divisor(value.as_option(), radius)?;
    let mut pts: Vec<(Complex64, u32)> = d.side(Side::Zeros).collect();
    if d.origin_order() > 0 {
        pts.push((Complex64::new(0.0, 0.0), d.origin_order() as u32));
    }
    Ok(pts)
}

/// Checks `τ(f^{-1}(a)) ⊂ f^{-1}(a)` inside `|z| <= radius` for each value.
pub fn invariance_census(
    expr: &FunctionExpr,
    map: &AlgebraicMap,
    values: &[TargetValue],
    radius: f64,
    tol: f64,
    exec: Execution,
) -> Result<Vec<InvarianceReport>> {
    try_map_ordered(values, exec, |&v| Ok(census_points(v, &preimages(expr, v, radius)?, map, radius, tol)))
}

pub(crate) mod pairs {
    use num_complex::Complex64;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(v: &[Complex64], s: S) -> Result<S::Ok, S::Error> {
        v.iter().map(|z| [z.re, z.im]).collect::<Vec<_>>().serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<Complex64>, D::Error> {
        Ok(Vec::<[f64; 2]>::deserialize(d)?.into_iter().map(|[re, im]| Complex64::new(re, im)).collect())
    }
}
