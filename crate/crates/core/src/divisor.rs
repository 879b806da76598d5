//! Finite divisors: zeros (positive multiplicity) and poles (negative) of a
//! meromorphic function inside a disc, with the order at the origin kept apart.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

/// Relative distance under which two divisor points are merged.
pub const DIVISOR_MERGE_TOL: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Side {
    Zeros,
    Poles,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DivisorEntry {
    #[serde(with = "pair")]
    pub point: Complex64,
    pub mult: i32,
}

/// Sorted (by modulus) multiset of nonzero divisor points plus the signed order at `z = 0`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(from = "Vec<DivisorEntry>", into = "Vec<DivisorEntry>")]
pub struct Divisor {
    entries: Vec<DivisorEntry>,
    origin_order: i32,
}

impl Divisor {
    pub fn empty() -> Self {
        Self::default()
    }

    /// Normalizes raw `(point, mult)` pairs: points at the origin go to `origin_order`,
    /// near-coincident points merge, zero multiplicities vanish.
    pub fn new(raw: impl IntoIterator<Item = (Complex64, i32)>, origin_order: i32) -> Self {
        let mut origin = origin_order;
        let mut pts: Vec<DivisorEntry> = Vec::new();
        for (point, mult) in raw {
            if mult == 0 {
                continue;
            }
            if point.norm() == 0.0 {
                origin += mult;
            } else {
                pts.push(DivisorEntry { point, mult });
            }
        }
        pts.sort_by(|a, b| {
            a.point
                .norm()
                .total_cmp(&b.point.norm())
                .then(a.point.arg().total_cmp(&b.point.arg()))
        });
        let mut merged: Vec<DivisorEntry> = Vec::with_capacity(pts.len());
        let mut absorbed = vec![false; pts.len()];
        for i in 0..pts.len() {
            if absorbed[i] {
                continue;
            }
            let mut e = pts[i];
            let tol = DIVISOR_MERGE_TOL * (1.0 + e.point.norm());
            for j in i + 1..pts.len() {
                if pts[j].point.norm() - pts[i].point.norm() > tol {
                    break;
                }
                if !absorbed[j] && (pts[j].point - pts[i].point).norm() <= tol {
                    absorbed[j] = true;
                    e.mult += pts[j].mult;
                }
            }
            if e.mult != 0 {
                merged.push(e);
            }
        }
        Divisor { entries: merged, origin_order: origin }
    }

    pub fn entries(&self) -> &[DivisorEntry] {
        &self.entries
    }

    pub fn origin_order(&self) -> i32 {
        self.origin_order
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty() && self.origin_order == 0
    }

    /// Restriction to the closed disc `|z| <= r`.
    pub fn within(&self, r: f64) -> Self {
        Divisor {
            entries: self.entries.iter().copied().filter(|e| e.point.norm() <= r).collect(),
            origin_order: self.origin_order,
        }
    }

    /// Divisor of the product of the two functions.
    pub fn plus(&self, other: &Self) -> Self {
        Self::new(
            self.entries.iter().chain(other.entries.iter()).map(|e| (e.point, e.mult)),
            self.origin_order + other.origin_order,
        )
    }

    /// Divisor of the reciprocal.
    pub fn negated(&self) -> Self {
        Divisor {
            entries: self.entries.iter().map(|e| DivisorEntry { point: e.point, mult: -e.mult }).collect(),
            origin_order: -self.origin_order,
        }
    }

    /// One side of the divisor as `(point, positive multiplicity)`, origin excluded.
    pub fn side(&self, side: Side) -> impl Iterator<Item = (Complex64, u32)> + '_ {
        self.entries.iter().filter_map(move |e| match side {
            Side::Zeros if e.mult > 0 => Some((e.point, e.mult as u32)),
            Side::Poles if e.mult < 0 => Some((e.point, (-e.mult) as u32)),
            _ => None,
        })
    }

    fn origin_on(&self, side: Side) -> i32 {
        match side {
            Side::Zeros => self.origin_order.max(0),
            Side::Poles => (-self.origin_order).max(0),
        }
    }

    /// Unintegrated count n(r) of one side, origin included.
    pub fn count(&self, r: f64, side: Side) -> u32 {
        self.side(side).filter(|(p, _)| p.norm() <= r).map(|(_, m)| m).sum::<u32>()
            + self.origin_on(side) as u32
    }

    /// n(r, 1/f) - n(r, f).
    pub fn signed_count(&self, r: f64) -> i64 {
        self.count(r, Side::Zeros) as i64 - self.count(r, Side::Poles) as i64
    }

    /// Integrated counting function
    /// `N(r) = sum_{0<|b|<=r} mult log(r/|b|) + n(0) log r`.
    pub fn counting(&self, r: f64, side: Side) -> f64 {
        let body: f64 = self
            .side(side)
            .filter(|(p, _)| p.norm() <= r)
            .map(|(p, m)| m as f64 * (r / p.norm()).ln())
            .sum();
        // `+ 0.0` turns an empty -0.0 sum into 0.0
        body + self.origin_on(side) as f64 * r.ln() + 0.0
    }

    /// Distance from the nearest nonzero divisor point to the circle `|z| = r`.
    pub fn circle_gap(&self, r: f64) -> f64 {
        self.entries
            .iter()
            .map(|e| (e.point.norm() - r).abs())
            .fold(f64::INFINITY, f64::min)
    }

    /// Total multiplicity of each side, origin included.
    pub fn degree(&self, side: Side) -> u32 {
        self.side(side).map(|(_, m)| m).sum::<u32>() + self.origin_on(side) as u32
    }

    /// Whether every point of `self` (with multiplicity, per side) appears in `other`.
    pub fn is_sub_divisor_of(&self, other: &Divisor) -> bool {
        if self.origin_on(Side::Zeros) > other.origin_on(Side::Zeros)
            || self.origin_on(Side::Poles) > other.origin_on(Side::Poles)
        {
            return false;
        }
        self.entries.iter().all(|e| {
            let tol = DIVISOR_MERGE_TOL * (1.0 + e.point.norm());
            other.entries.iter().any(|o| {
                (o.point - e.point).norm() <= tol && o.mult.signum() == e.mult.signum() && o.mult.abs() >= e.mult.abs()
            })
        })
    }
}

impl From<Vec<DivisorEntry>> for Divisor {
    fn from(v: Vec<DivisorEntry>) -> Self {
        Divisor::new(v.into_iter().map(|e| (e.point, e.mult)), 0)
    }
}

impl From<Divisor> for Vec<DivisorEntry> {
    fn from(d: Divisor) -> Self {
        let mut out = Vec::with_capacity(d.entries.len() + 1);
        if d.origin_order != 0 {
            out.push(DivisorEntry { point: Complex64::new(0.0, 0.0), mult: d.origin_order });
        }
        out.extend(d.entries);
        out
    }
}

pub(crate) mod pair {
    use num_complex::Complex64;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(z: &Complex64, s: S) -> Result<S::Ok, S::Error> {
        [z.re, z.im].serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Complex64, D::Error> {
        let [re, im] = <[f64; 2]>::deserialize(d)?;
        Ok(Complex64::new(re, im))
    }
}
