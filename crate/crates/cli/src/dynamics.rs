use std::fs;
use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::Args;
use nevlab::algmap::{invariance_census, AlgebraicMap, BranchPolicy};
use nevlab::constructor::{build_orbit_function, counterexample_kit, OrbitFamily};
use nevlab::par::Execution;
use nevlab::Complex64;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::inputs::{complex_list, targets, Figure, DEFAULT_TOL};
use crate::output::Sink;
use crate::Outcome;

// ---------------------------------------------------------------- orbit

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Policy {
    FixedPrincipal,
    Tracking,
}

impl From<Policy> for BranchPolicy {
    fn from(p: Policy) -> Self {
        match p {
            Policy::FixedPrincipal => BranchPolicy::FixedPrincipal,
            Policy::Tracking => BranchPolicy::Tracking,
        }
    }
}

#[derive(Args, Clone, Debug, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OrbitArgs {
    /// Use the map of a built-in panel
    #[arg(long, value_enum)]
    pub figure1: Option<Figure>,
    /// α_0..α_{n-1}, comma-separated; the root order n is their count
    #[arg(long)]
    pub alphas: Option<String>,
    #[arg(long)]
    pub branch: Option<usize>,
    /// Comma-separated seeds; defaults to the panel's P1 and P2
    #[arg(long)]
    pub seed: Option<String>,
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long, value_enum)]
    pub policy: Option<Policy>,
}

impl OrbitArgs {
    pub fn resolve(mut self) -> Result<Self> {
        match (self.figure1, &self.alphas) {
            (Some(_), Some(_)) => bail!("give either --figure1 or --alphas"),
            (None, None) => bail!("--figure1 or --alphas is required"),
            (None, Some(_)) => {
                self.branch.get_or_insert(0);
                if self.seed.is_none() {
                    bail!("--seed is required with --alphas");
                }
            }
            (Some(_), None) => {
                if self.branch.is_some() {
                    bail!("--branch only applies with --alphas");
                }
            }
        }
        self.k.get_or_insert(10);
        self.policy.get_or_insert(Policy::FixedPrincipal);
        Ok(self)
    }
}

#[derive(Serialize)]
struct OrbitRow {
    seed_re: f64,
    seed_im: f64,
    k: usize,
    z_re: f64,
    z_im: f64,
    modulus: f64,
    cut_crossed: u8,
}

pub fn run_orbit(a: &OrbitArgs, exec: Execution, sink: &Sink) -> Result<Outcome> {
    let (map, default_seeds) = match (a.figure1, &a.alphas) {
        (Some(fig), _) => {
            let fam = fig.family(1)?;
            let seeds: Vec<Complex64> = fam.p1.iter().chain(&fam.p2).copied().collect();
            (fam.map, seeds)
        }
        (None, Some(al)) => {
            let alphas = complex_list(al)?;
            (AlgebraicMap::new(alphas.len(), alphas, a.branch.unwrap_or(0))?, Vec::new())
        }
        (None, None) => bail!("--figure1 or --alphas is required"),
    };
    let seeds = match &a.seed {
        Some(s) => complex_list(s)?,
        None => default_seeds,
    };
    let (k, policy) = (a.k.unwrap_or(10), a.policy.unwrap_or(Policy::FixedPrincipal).into());
    let orbits = nevlab::par::try_map_ordered(&seeds, exec, |&s| map.orbit(s, k, policy))?;
    let mut table = Vec::new();
    for o in &orbits {
        for (i, (z, crossed)) in o.points.iter().zip(&o.cut_crossed).enumerate() {
            table.push(OrbitRow {
                seed_re: o.seed.re,
                seed_im: o.seed.im,
                k: i,
                z_re: z.re,
                z_im: z.im,
                modulus: z.norm(),
                cut_crossed: *crossed as u8,
            });
        }
    }
    let escapes: Vec<bool> = orbits.iter().map(|o| o.escape_flag).collect();
    sink.emit(&table, json!({ "map": map, "orbits": orbits, "escape_flags": escapes }))?;
    Ok(Outcome::Pass)
}

// ---------------------------------------------------------------- construct

#[derive(Args, Clone, Debug, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConstructArgs {
    #[arg(long, value_enum)]
    pub figure1: Option<Figure>,
    #[arg(long)]
    pub generations: Option<usize>,
}

impl ConstructArgs {
    pub fn resolve(mut self) -> Result<Self> {
        let fig = *self.figure1.get_or_insert(Figure::Right);
        self.generations.get_or_insert(fig.default_generations());
        Ok(self)
    }

    fn family(&self) -> Result<OrbitFamily> {
        let fig = self.figure1.unwrap_or(Figure::Right);
        fig.family(self.generations.unwrap_or(fig.default_generations()))
    }
}

pub fn run_construct(a: &ConstructArgs, sink: &Sink) -> Result<Outcome> {
    let fam = a.family()?;
    let f = build_orbit_function(&fam)?;
    let rows = fam.figure_rows();
    let meta = json!({
        "zeros": fam.points_1().count(),
        "poles": fam.points_2().count(),
        "census_radius": fam.census_radius(),
        "expr_hash": f.structure_hash(),
    });
    sink.emit(&rows, json!({ "meta": meta, "family": fam }))?;
    Ok(Outcome::Pass)
}

// ---------------------------------------------------------------- census

#[derive(Args, Clone, Debug, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CensusArgs {
    /// Built-in panel to rebuild (default right)
    #[arg(long, value_enum)]
    pub figure1: Option<Figure>,
    /// JSON written by `construct --format json`; replaces --figure1
    #[arg(long)]
    pub family: Option<PathBuf>,
    #[arg(long)]
    pub generations: Option<usize>,
    /// Comma-separated values; `inf` stands for the poles
    #[arg(long)]
    pub values: Option<String>,
    #[arg(long)]
    pub radius: Option<f64>,
    #[arg(long)]
    pub tol: Option<f64>,
}

impl CensusArgs {
    pub fn resolve(mut self) -> Result<Self> {
        if self.family.is_some() {
            if self.figure1.is_some() || self.generations.is_some() {
                bail!("--family replaces --figure1 and --generations");
            }
        } else {
            let fig = *self.figure1.get_or_insert(Figure::Right);
            self.generations.get_or_insert(fig.default_generations());
        }
        self.values.get_or_insert_with(|| "0,inf".into());
        self.tol.get_or_insert(DEFAULT_TOL);
        let r = match self.radius {
            Some(r) => r,
            None => self.family()?.census_radius(),
        };
        self.radius = Some(r);
        Ok(self)
    }

    fn family(&self) -> Result<OrbitFamily> {
        if let Some(p) = &self.family {
            let text = fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            let doc: Value = serde_json::from_str(&text).with_context(|| format!("parsing {}", p.display()))?;
            let fam = doc.get("family").cloned().unwrap_or(doc);
            let fam: OrbitFamily = serde_json::from_value(fam).context("family JSON")?;
            // rebuild so the stored points are re-validated
            return Ok(OrbitFamily::new(fam.map, fam.p1, fam.p2, fam.generations)?);
        }
        let fig = self.figure1.unwrap_or(Figure::Right);
        fig.family(self.generations.unwrap_or(fig.default_generations()))
    }
}

#[derive(Serialize)]
struct CensusRow {
    value: String,
    preimages: usize,
    matched: usize,
    violations: usize,
    boundary_leaks: usize,
    ambiguous: u8,
    max_matched_distance: f64,
    verdict: u8,
}

pub fn run_census(a: &CensusArgs, exec: Execution, sink: &Sink) -> Result<Outcome> {
    let fam = a.family()?;
    let f = build_orbit_function(&fam)?;
    let values = targets(a.values.as_deref().unwrap_or("0,inf"))?;
    let radius = a.radius.unwrap_or_else(|| fam.census_radius());
    let reports = invariance_census(&f, &fam.map, &values, radius, a.tol.unwrap_or(DEFAULT_TOL), exec)?;
    let table: Vec<CensusRow> = reports
        .iter()
        .map(|r| CensusRow {
            value: r.value.to_string(),
            preimages: r.preimage_points.len(),
            matched: r.matched.len(),
            violations: r.violations.len(),
            boundary_leaks: r.boundary_leaks,
            ambiguous: r.ambiguous as u8,
            max_matched_distance: r.max_matched_distance,
            verdict: r.verdict as u8,
        })
        .collect();
    let failed: Vec<String> = reports.iter().filter(|r| !r.verdict).map(|r| r.value.to_string()).collect();
    let verdict = json!({ "pass": failed.is_empty(), "failed_values": failed });
    sink.emit(&table, json!({ "reports": reports, "verdict": verdict }))?;
    Ok(if failed.is_empty() {
        Outcome::Pass
    } else {
        Outcome::Fail(format!("invariance fails for values {failed:?}"))
    })
}

// ---------------------------------------------------------------- counterexample

#[derive(Args, Clone, Debug, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CounterexampleArgs {
    #[arg(long)]
    pub k: Option<u32>,
    /// Number of random points for the functional identity
    #[arg(long)]
    pub probes: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Pre-images listed per target
    #[arg(long)]
    pub preimages: Option<usize>,
}

impl CounterexampleArgs {
    pub fn resolve(mut self) -> Result<Self> {
        self.k.get_or_insert(1);
        self.probes.get_or_insert(100);
        self.seed.get_or_insert(7);
        self.preimages.get_or_insert(5);
        Ok(self)
    }
}

pub const IDENTITY_TOL: f64 = 1e-12;
pub const RESIDUAL_TOL: f64 = 1e-9;

#[derive(Serialize)]
struct PreimageRow {
    target: usize,
    branch: i64,
    z_re: f64,
    z_im: f64,
    residual: f64,
    shifted_residual: f64,
}

pub fn run_counterexample(a: &CounterexampleArgs, sink: &Sink) -> Result<Outcome> {
    let kit = counterexample_kit(a.k.unwrap_or(1))?;
    let max_err = kit.max_identity_error(a.seed.unwrap_or(7), a.probes.unwrap_or(100))?;
    let mut table = Vec::new();
    for j in 1..=kit.k {
        for p in kit.preimages(j, a.preimages.unwrap_or(5))? {
            table.push(PreimageRow {
                target: j as usize,
                branch: p.branch,
                z_re: p.z.re,
                z_im: p.z.im,
                residual: p.residual,
                shifted_residual: p.shifted_residual,
            });
        }
    }
    let worst = table.iter().map(|r| r.residual).fold(0.0, f64::max);
    let pass = max_err <= IDENTITY_TOL && worst <= RESIDUAL_TOL;
    let verdict = json!({ "pass": pass, "max_identity_error": max_err, "max_residual": worst });
    sink.emit(&table, json!({ "kit": kit, "verdict": verdict }))?;
    Ok(if pass {
        Outcome::Pass
    } else {
        Outcome::Fail(format!("identity error {max_err:e}, worst pre-image residual {worst:e}"))
    })
}
