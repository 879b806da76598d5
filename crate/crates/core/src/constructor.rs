//! Explicit objects: truncated orbit-product functions with two forward-invariant
//! values, the `exp(exp z)` counterexample kit and the verification corpus.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::algmap::{AlgebraicMap, BranchPolicy, EscapeClass};
use crate::divisor::{pair, Divisor, DIVISOR_MERGE_TOL};
use crate::error::{Error, Result};
use crate::expr::FunctionExpr;
use crate::poly::Polynomial;

const ONE: Complex64 = Complex64::new(1.0, 0.0);

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

/// Seeds `P1`, `P2` and their first `generations` iterates under a fixed-branch map.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OrbitFamily {
    pub map: crate::algmap::AlgebraicMap,
    #[serde(with = "crate::algmap::pairs")]
    pub p1: Vec<Complex64>,
    #[serde(with = "crate::algmap::pairs")]
    pub p2: Vec<Complex64>,
    pub generations: usize,
    /// `orbit_points_1[g][i] = τ^g(p1[i])`
    pub orbit_points_1: Vec<Vec<[f64; 2]>>,
    pub orbit_points_2: Vec<Vec<[f64; 2]>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FigureRow {
    pub set: String,
    pub generation: usize,
    pub re: f64,
    pub im: f64,
}

fn generation_table(map: &AlgebraicMap, seeds: &[Complex64], generations: usize) -> Result<Vec<Vec<Complex64>>> {
    let orbits = seeds
        .iter()
        .map(|&s| map.orbit(s, generations.saturating_sub(1), BranchPolicy::FixedPrincipal))
        .collect::<Result<Vec<_>>>()?;
    Ok((0..generations).map(|g| orbits.iter().map(|o| o.points[g]).collect()).collect())
}

fn to_pairs(rows: &[Vec<Complex64>]) -> Vec<Vec<[f64; 2]>> {
    rows.iter().map(|row| row.iter().map(|z| [z.re, z.im]).collect()).collect()
}

fn from_pairs(rows: &[Vec<[f64; 2]>]) -> impl Iterator<Item = (usize, Complex64)> + '_ {
    rows.iter()
        .enumerate()
        .flat_map(|(g, row)| row.iter().map(move |&[re, im]| (g, c(re, im))))
}

impl OrbitFamily {
    /// Iterates the seeds, then checks escape and pairwise separation of all orbit points.
    pub fn new(map: AlgebraicMap, p1: Vec<Complex64>, p2: Vec<Complex64>, generations: usize) -> Result<Self> {
        if generations == 0 {
            return Err(Error::InvalidInput("at least one generation is needed".into()));
        }
        let probe_k = (2 * generations).max(40);
        for (&seed, class) in p1.iter().chain(&p2).zip(map.escape_probe(&[p1.clone(), p2.clone()].concat(), probe_k)?) {
            if class != EscapeClass::Escaped {
                return Err(Error::NonEscapingSeed(seed));
            }
        }
        let g1 = generation_table(&map, &p1, generations)?;
        let g2 = generation_table(&map, &p2, generations)?;
        let all: Vec<Complex64> = g1.iter().chain(&g2).flatten().copied().collect();
        for i in 0..all.len() {
            for j in i + 1..all.len() {
                if (all[i] - all[j]).norm() <= DIVISOR_MERGE_TOL * (1.0 + all[i].norm()) {
                    return Err(Error::OrbitCollision(all[i]));
                }
            }
        }
        Ok(OrbitFamily { map, p1, p2, generations, orbit_points_1: to_pairs(&g1), orbit_points_2: to_pairs(&g2) })
    }

    /// Left panel of the figure: `τ(z) = z + (1/2 + i/5)√z`.
    pub fn figure1_left(generations: usize) -> Result<Self> {
        let s3 = 3f64.sqrt();
        let p1 = vec![c(4.0, 0.0), c(-4.0, 0.0), c(2.0, 2.0 * s3), c(2.0, -2.0 * s3), c(-2.0, 2.0 * s3), c(-2.0, -2.0 * s3)];
        let p2 = vec![c(0.0, 4.0), c(0.0, -4.0), c(2.0 * s3, 2.0), c(2.0 * s3, -2.0), c(-2.0 * s3, 2.0), c(-2.0 * s3, -2.0)];
        Self::new(AlgebraicMap::figure1_left(), p1, p2, generations)
    }

    /// Right panel of the figure: `τ(z) = (z^{1/10} + 1/2 + i/2)^{10}`.
    pub fn figure1_right(generations: usize) -> Result<Self> {
        let h = 2f64.sqrt() / 2.0;
        let p1 = vec![c(1.0, 0.0), c(-1.0, 0.0), c(0.0, 1.0), c(h, h), c(-h, h)];
        let p2 = vec![c(0.0, -1.0), c(h, -h), c(-h, -h)];
        Self::new(AlgebraicMap::figure1_right(), p1, p2, generations)
    }

    pub fn points_1(&self) -> impl Iterator<Item = (usize, Complex64)> + '_ {
        from_pairs(&self.orbit_points_1)
    }

    pub fn points_2(&self) -> impl Iterator<Item = (usize, Complex64)> + '_ {
        from_pairs(&self.orbit_points_2)
    }

    /// Largest radius below every first image outside the family (`τ^M` of each seed).
    ///
    /// Inside it the truncated divisor is closed under `τ` up to points whose image leaves the disc.
    pub fn census_radius(&self) -> f64 {
        let last = |rows: &Vec<Vec<[f64; 2]>>| -> Vec<Complex64> {
            rows.last().map(|r| r.iter().map(|&[re, im]| c(re, im)).collect()).unwrap_or_default()
        };
        last(&self.orbit_points_1)
            .into_iter()
            .chain(last(&self.orbit_points_2))
            .map(|z| self.map.tau_eval(z).norm())
            .fold(f64::INFINITY, f64::min)
            * (1.0 - 1e-9)
    }

    /// Number of family points inside `|z| <= r`.
    pub fn points_within(&self, r: f64) -> usize {
        self.points_1().chain(self.points_2()).filter(|(_, z)| z.norm() <= r).count()
    }

    pub fn figure_rows(&self) -> Vec<FigureRow> {
        let row = |set: &'static str| move |(generation, z): (usize, Complex64)| FigureRow {
            set: set.into(),
            generation,
            re: z.re,
            im: z.im,
        };
        self.points_1().map(row("P1")).chain(self.points_2().map(row("P2"))).collect()
    }
}

/// `f` with simple zeros on the `P1` orbits and simple poles on the `P2` orbits.
pub fn build_orbit_function(family: &OrbitFamily) -> Result<FunctionExpr> {
    build_orbit_function_scaled(family, ONE)
}

/// Same divisor with a leading constant; distinct scales give distinct functions.
pub fn build_orbit_function_scaled(family: &OrbitFamily, scale: Complex64) -> Result<FunctionExpr> {
    if scale == Complex64::new(0.0, 0.0) {
        return Err(Error::InvalidInput("scale must be nonzero".into()));
    }
    let raw: Vec<(Complex64, i32)> =
        family.points_1().map(|(_, z)| (z, 1)).chain(family.points_2().map(|(_, z)| (z, -1))).collect();
    let expected = raw.len();
    let divisor = Divisor::new(raw, 0);
    let stored = divisor.entries().len() + divisor.origin_order().unsigned_abs() as usize;
    if stored != expected {
        // two orbit points merged or cancelled
        let z = divisor.entries().first().map_or(Complex64::new(0.0, 0.0), |e| e.point);
        return Err(Error::OrbitCollision(z));
    }
    Ok(FunctionExpr::rational(scale, divisor))
}

/// `g = exp(exp z)` with the translation `z + log(k+1)` and the k-th roots of unity.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CounterexampleKit {
    pub k: u32,
    pub g: FunctionExpr,
    pub shift: f64,
    /// `ξ_j = exp(2πi j / k)` for `j = 1..=k`
    #[serde(with = "crate::algmap::pairs")]
    pub targets: Vec<Complex64>,
}

/// `exp(2πi j / k)`, exact on the axes.
fn root_of_unity(j: u32, k: u32) -> Complex64 {
    match (4 * (j % k)) as f64 / k as f64 {
        q if q == 0.0 => c(1.0, 0.0),
        q if q == 1.0 => c(0.0, 1.0),
        q if q == 2.0 => c(-1.0, 0.0),
        q if q == 3.0 => c(0.0, -1.0),
        _ => Complex64::from_polar(1.0, 2.0 * PI * j as f64 / k as f64),
    }
}

pub fn counterexample_kit(k: u32) -> Result<CounterexampleKit> {
    if k == 0 {
        return Err(Error::InvalidInput("k must be at least 1".into()));
    }
    let g = FunctionExpr::exp(FunctionExpr::exp_poly(Polynomial::identity()))?;
    let targets = (1..=k).map(|j| root_of_unity(j, k)).collect();
    Ok(CounterexampleKit { k, g, shift: ((k + 1) as f64).ln(), targets })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Preimage {
    #[serde(with = "pair")]
    pub z: Complex64,
    pub branch: i64,
    /// `|g(z) - ξ|`
    pub residual: f64,
    /// `|g(z + log(k+1)) - ξ|`
    pub shifted_residual: f64,
}

impl CounterexampleKit {
    pub fn translation(&self) -> AlgebraicMap {
        AlgebraicMap::translation(c(self.shift, 0.0))
    }

    /// Relative error of `g(z + log(k+1)) = g(z)^{k+1}`.
    pub fn identity_error(&self, z: Complex64) -> Result<f64> {
        let lhs = self.g.eval(z + self.shift)?;
        let rhs = self.g.eval(z)?.powu(self.k + 1);
        Ok((lhs - rhs).norm() / rhs.norm())
    }

    /// Seeded probe points in `-2 <= Re z <= 1`, `|Im z| <= π`, where both sides stay in range.
    pub fn identity_probes(&self, seed: u64, count: usize) -> Vec<Complex64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..count).map(|_| c(rng.gen_range(-2.0..1.0), rng.gen_range(-PI..PI))).collect()
    }

    /// Largest relative identity error over the seeded probes.
    pub fn max_identity_error(&self, seed: u64, count: usize) -> Result<f64> {
        self.identity_probes(seed, count).into_iter().try_fold(0.0f64, |acc, z| Ok(acc.max(self.identity_error(z)?)))
    }

    /// Solutions of `g(z) = ξ_j` from `z = Log(Log ξ_j + 2πi m)`, `m = 0, 1, -1, 2, …`.
    pub fn preimages(&self, j: u32, count: usize) -> Result<Vec<Preimage>> {
        if j == 0 || j > self.k {
            return Err(Error::InvalidInput(format!("target index {j} outside 1..={}", self.k)));
        }
        let xi = self.targets[(j - 1) as usize];
        let log_xi = xi.ln();
        let mut out = Vec::with_capacity(count);
        let mut step = 0i64;
        while out.len() < count {
            let m = if step % 2 == 1 { (step + 1) / 2 } else { -step / 2 };
            step += 1;
            let w = log_xi + c(0.0, 2.0 * PI * m as f64);
            if w.norm() < 1e-12 {
                continue;
            }
            let z = w.ln();
            let residual = (self.g.eval(z)? - xi).norm();
            let shifted_residual = (self.g.eval(z + self.shift)? - xi).norm();
            out.push(Preimage { z, branch: m, residual, shifted_residual });
        }
        Ok(out)
    }
}

pub fn counterexample_preimages(kit: &CounterexampleKit, j: u32, count: usize) -> Result<Vec<Preimage>> {
    kit.preimages(j, count)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CorpusEntry {
    pub id: String,
    pub expr: FunctionExpr,
    /// Known hyper-order; `None` for constants.
    pub hyper_order: Option<f64>,
    pub transparent: bool,
    /// Radius range used for sweeps over this member.
    pub radii: (f64, f64),
    pub hash: String,
}

pub const FIGURE1_LEFT_GENERATIONS: usize = 30;
pub const FIGURE1_RIGHT_GENERATIONS: usize = 20;

fn entry(id: &str, expr: FunctionExpr, hyper_order: Option<f64>, radii: (f64, f64)) -> CorpusEntry {
    CorpusEntry {
        id: id.into(),
        transparent: expr.is_divisor_transparent(),
        hash: expr.structure_hash(),
        expr,
        hyper_order,
        radii,
    }
}

fn rational(scale: Complex64, pts: &[(Complex64, i32)], origin: i32) -> FunctionExpr {
    FunctionExpr::rational(scale, Divisor::new(pts.iter().copied(), origin))
}

/// The deterministic verification corpus, sorted by id.
pub fn corpus() -> Vec<CorpusEntry> {
    let z = Polynomial::identity();
    let z2 = Polynomial::from_real(&[0.0, 0.0, 1.0]);
    let z3 = Polynomial::from_real(&[0.0, 0.0, 0.0, 1.0]);
    let left = OrbitFamily::figure1_left(FIGURE1_LEFT_GENERATIONS).expect("figure data is valid");
    let right = OrbitFamily::figure1_right(FIGURE1_RIGHT_GENERATIONS).expect("figure data is valid");
    let mut out = vec![
        entry("const_5", FunctionExpr::constant(c(5.0, 0.0)), None, (1.0, 30.0)),
        entry("exp_exp_z", FunctionExpr::exp(FunctionExpr::exp_poly(z.clone())).expect("entire"), Some(1.0), (0.5, 5.0)),
        entry("exp_z", FunctionExpr::exp_poly(z.clone()), Some(0.0), (1.0, 30.0)),
        entry("exp_z2", FunctionExpr::exp_poly(z2.clone()), Some(0.0), (1.0, 10.0)),
        entry("exp_z3", FunctionExpr::exp_poly(z3), Some(0.0), (1.0, 6.0)),
        entry("expm1_z", FunctionExpr::exp_poly_minus_const(z.clone(), ONE), Some(0.0), (0.5, 30.0)),
        entry("exp_z2_minus_i", FunctionExpr::exp_poly_minus_const(z2, c(0.0, 1.0)), Some(0.0), (0.5, 6.0)),
        entry(
            "fig1_left",
            build_orbit_function(&left).expect("figure orbits are disjoint"),
            Some(0.0),
            (1.0, left.census_radius()),
        ),
        entry(
            "fig1_right",
            build_orbit_function(&right).expect("figure orbits are disjoint"),
            Some(0.0),
            (0.5, right.census_radius()),
        ),
        entry("rat_inv_z", rational(ONE, &[], -1), Some(0.0), (0.5, 30.0)),
        entry("rat_mixed", rational(c(2.0, -1.0), &[(c(1.0, 1.0), 1), (c(-2.0, 0.0), 2), (c(0.0, 0.5), -2), (c(3.0, -1.0), -1)], 1), Some(0.0), (0.5, 30.0)),
        entry("rat_one_minus_one", rational(ONE, &[(c(1.0, 0.0), 1), (c(-1.0, 0.0), -1)], 0), Some(0.0), (0.5, 30.0)),
        entry("rat_one_two", rational(ONE, &[(c(1.0, 0.0), 1), (c(2.0, 0.0), -1)], 0), Some(0.0), (0.5, 30.0)),
    ];
    out.sort_by(|a, b| a.id.cmp(&b.id));
    out
}

pub fn corpus_entry(id: &str) -> Option<CorpusEntry> {
    corpus().into_iter().find(|e| e.id == id)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algmap::{invariance_census, TargetValue};
    use crate::divisor::Side;
    use crate::par::Execution;

    #[test]
    fn single_generation_is_plain_rational() {
        let fam = OrbitFamily::figure1_left(1).unwrap();
        let f = build_orbit_function(&fam).unwrap();
        let d = f.divisor_in_disc(10.0).unwrap();
        assert_eq!(d.degree(Side::Zeros), 6);
        assert_eq!(d.degree(Side::Poles), 6);
        assert!(d.entries().iter().all(|e| (e.point.norm() - 4.0).abs() < 1e-12));
    }

    #[test]
    fn left_family_census() {
        let fam = OrbitFamily::figure1_left(FIGURE1_LEFT_GENERATIONS).unwrap();
        let f = build_orbit_function(&fam).unwrap();
        let d = f.divisor_in_disc(f64::INFINITY).unwrap();
        assert_eq!(d.degree(Side::Zeros), 180);
        assert_eq!(d.degree(Side::Poles), 180);
        let r = fam.census_radius();
        let reps = invariance_census(
            &f,
            &fam.map,
            &[TargetValue::Finite(Complex64::new(0.0, 0.0)), TargetValue::Infinity],
            r,
            1e-9,
            Execution::Sequential,
        )
        .unwrap();
        for rep in &reps {
            assert!(rep.verdict, "{:?}", rep.violations.first());
            assert!(rep.max_matched_distance <= 1e-9);
            assert!(!rep.matched.is_empty());
        }
    }

    #[test]
    fn counterexample_identity_and_preimages() {
        let kit = counterexample_kit(1).unwrap();
        let e2 = kit.g.eval(Complex64::new(2f64.ln(), 0.0)).unwrap();
        assert!((e2.re - 7.38905609893065).abs() < 1e-12);
        assert!(kit.identity_error(Complex64::new(0.3, -1.1)).unwrap() < 1e-12);
        let pre = kit.preimages(1, 3).unwrap();
        // ξ = 1: m = 0 is skipped, m = 1 gives Log(2πi)
        assert_eq!(pre[0].branch, 1);
        assert!((pre[0].z - Complex64::new((2.0 * PI).ln(), PI / 2.0)).norm() < 1e-12);
        assert!(pre.iter().all(|p| p.residual <= 1e-9 && p.shifted_residual <= 1e-9));
    }

    #[test]
    fn cube_roots_for_k2() {
        // the kit uses the square roots of unity; ξ = e^{2πi/3} still satisfies g(z + log 3) = ξ^3
        let kit = counterexample_kit(2).unwrap();
        assert!((kit.targets[0] + ONE).norm() < 1e-15);
        let xi = Complex64::from_polar(1.0, 2.0 * PI / 3.0);
        let z = (xi.ln() + Complex64::new(0.0, 2.0 * PI)).ln();
        assert!((kit.g.eval(z).unwrap() - xi).norm() <= 1e-10);
        assert!((kit.g.eval(z + kit.shift).unwrap() - ONE).norm() <= 1e-9);
    }

    #[test]
    fn corpus_is_stable() {
        let a = corpus();
        let b = corpus();
        assert_eq!(a.iter().map(|e| &e.hash).collect::<Vec<_>>(), b.iter().map(|e| &e.hash).collect::<Vec<_>>());
        assert_eq!(corpus_entry("exp_z").unwrap().hyper_order, Some(0.0));
        assert_eq!(corpus_entry("exp_exp_z").unwrap().hyper_order, Some(1.0));
        assert!(a.iter().all(|e| e.transparent));
    }
}
