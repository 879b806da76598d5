use anyhow::{bail, Result};
use clap::{Args, Subcommand, ValueEnum};
use nevlab::boundslab::{
    asym_ratio, borel_probe, exceptional_logmeasure, growth_lemma_probe, k_constant, lemma1_check, lemma1_r0,
    pestimate_cases, pestimate_check, smt_check, BoundConfig, BoundReport, Dichotomy, GrowthProbe, PolyPair,
    DEFAULT_SLACK,
};
use nevlab::nevanlinna::characteristic_sweep;
use nevlab::par::{try_map_ordered, Execution};
use nevlab::Error;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::inputs::{complex, complex_list, grid, member, members, poly, DEFAULT_COUNT, DEFAULT_TOL};
use crate::output::Sink;
use crate::Outcome;

/// Cases checked by `verify lemma1` when no function is given: (id, ω, φ).
pub const LEMMA1_TRIPLES: [(&str, &str, &str); 3] =
    [("exp_z", "z+1", "z"), ("rat_one_minus_one", "z^2+z", "z^2"), ("exp_z2", "z+1", "z")];

#[derive(Subcommand, Clone, Debug, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Which {
    /// Integral of 1/|p|^(γ/deg p) over a circle against its explicit bound
    Pest(PestArgs),
    /// Proximity of f∘ω/f∘φ against the constant-K bound
    Lemma1(Lemma1Args),
    /// T(r, f∘ω) / T(|c| r^n, f) tending to 1
    Asym(AsymArgs),
    /// Second-main-theorem inequality with the N_ω correction
    Smt(SmtArgs),
    /// Borel-type exceptional set against its closed-form bound
    Borel(BorelArgs),
    /// Growth dichotomy for a sampled nondecreasing function
    Growth(GrowthArgs),
}

impl Which {
    pub fn name(&self) -> &'static str {
        match self {
            Which::Pest(_) => "pest",
            Which::Lemma1(_) => "lemma1",
            Which::Asym(_) => "asym",
            Which::Smt(_) => "smt",
            Which::Borel(_) => "borel",
            Which::Growth(_) => "growth",
        }
    }
}

#[derive(Serialize)]
struct ReportRow<'a> {
    case: &'a str,
    r: f64,
    lhs: f64,
    rhs: f64,
    margin: f64,
    pass: u8,
    exceptional: u8,
    s: Option<f64>,
    #[serde(rename = "K")]
    k: Option<f64>,
}

fn rows<'a>(case: &'a str, reports: &[BoundReport]) -> Vec<ReportRow<'a>> {
    reports
        .iter()
        .map(|b| ReportRow {
            case,
            r: b.r,
            lhs: b.lhs,
            rhs: b.rhs,
            margin: b.margin,
            pass: b.pass as u8,
            exceptional: b.meta.exceptional as u8,
            s: b.meta.s,
            k: b.meta.k,
        })
        .collect()
}

fn failing_radii(reports: &[BoundReport]) -> Vec<f64> {
    reports.iter().filter(|b| !b.pass).map(|b| b.r).collect()
}

// ---------------------------------------------------------------- pest

#[derive(Args, Clone, Debug, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PestArgs {
    #[arg(long)]
    pub trials: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub tol: Option<f64>,
}

impl PestArgs {
    pub fn resolve(mut self) -> Result<Self> {
        self.trials.get_or_insert(100);
        self.seed.get_or_insert(7);
        self.tol.get_or_insert(1e-8);
        Ok(self)
    }
}

fn run_pest(a: &PestArgs, exec: Execution, sink: &Sink) -> Result<Outcome> {
    let cases = pestimate_cases(a.seed.unwrap_or(7), a.trials.unwrap_or(100));
    let tol = a.tol.unwrap_or(1e-8);
    let reports = try_map_ordered(&cases, exec, |c| pestimate_check(&c.p, c.gamma, c.r, tol))?;
    let labels: Vec<String> = (0..cases.len()).map(|i| format!("trial-{i}")).collect();
    let table: Vec<ReportRow> =
        labels.iter().zip(&reports).flat_map(|(l, b)| rows(l, std::slice::from_ref(b))).collect();
    let failed: Vec<&String> = labels.iter().zip(&reports).filter(|(_, b)| !b.pass).map(|(l, _)| l).collect();
    let verdict = json!({ "pass": failed.is_empty(), "trials": cases.len(), "violations": failed });
    sink.emit(&table, json!({ "cases": cases, "verdict": verdict }))?;
    Ok(if failed.is_empty() { Outcome::Pass } else { Outcome::Fail(format!("violations in {failed:?}")) })
}

// ---------------------------------------------------------------- lemma1

#[derive(Args, Clone, Debug, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Lemma1Args {
    /// Corpus function id; without it the three documented triples run
    #[arg(long = "fn")]
    #[serde(rename = "fn")]
    pub func: Option<String>,
    #[arg(long)]
    pub omega: Option<String>,
    #[arg(long)]
    pub phi: Option<String>,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub delta: Option<f64>,
    #[arg(long)]
    pub rmin: Option<f64>,
    #[arg(long)]
    pub rmax: Option<f64>,
    #[arg(long)]
    pub count: Option<usize>,
    #[arg(long)]
    pub radii: Option<String>,
    #[arg(long)]
    pub tol: Option<f64>,
}

impl Lemma1Args {
    pub fn resolve(mut self) -> Result<Self> {
        if self.func.is_some() != (self.omega.is_some() && self.phi.is_some()) {
            bail!("--fn needs both --omega and --phi, and they need --fn");
        }
        self.alpha.get_or_insert(2.0);
        self.delta.get_or_insert(0.5);
        if self.radii.is_none() {
            self.rmin.get_or_insert(1.0);
            self.rmax.get_or_insert(30.0);
            self.count.get_or_insert(DEFAULT_COUNT);
        }
        self.tol.get_or_insert(DEFAULT_TOL);
        Ok(self)
    }
}

fn run_lemma1(a: &Lemma1Args, exec: Execution, sink: &Sink) -> Result<Outcome> {
    let tol = a.tol.unwrap_or(DEFAULT_TOL);
    let cfg = BoundConfig::new(a.alpha.unwrap_or(2.0), a.delta.unwrap_or(0.5), 1.0, tol)?;
    let rs = grid(a.radii.as_deref(), a.rmin.unwrap_or(1.0), a.rmax.unwrap_or(30.0), a.count.unwrap_or(DEFAULT_COUNT))?;
    let cases: Vec<(String, String, String)> = match (&a.func, &a.omega, &a.phi) {
        (Some(f), Some(w), Some(p)) => vec![(f.clone(), w.clone(), p.clone())],
        _ => LEMMA1_TRIPLES.iter().map(|(f, w, p)| (f.to_string(), w.to_string(), p.to_string())).collect(),
    };
    let mut labels = Vec::new();
    let mut all = Vec::new();
    let mut verdicts = Vec::new();
    let mut failed = Vec::new();
    for (id, w, p) in &cases {
        let pair = PolyPair::new(poly(w)?, poly(p)?)?;
        let reports = lemma1_check(&member(id)?.expr, &pair, &cfg, &rs, exec)?;
        let label = format!("{id}|{w}|{p}");
        let r0 = lemma1_r0(&reports);
        if r0.is_none() {
            failed.push(label.clone());
        }
        verdicts.push(json!({
            "case": label, "K": k_constant(&cfg, &pair), "r0": r0, "failing_radii": failing_radii(&reports),
        }));
        labels.push(label);
        all.push(reports);
    }
    let table: Vec<ReportRow> = labels.iter().zip(&all).flat_map(|(l, r)| rows(l, r)).collect();
    let verdict = json!({ "pass": failed.is_empty(), "cases": verdicts });
    sink.emit(&table, json!({ "verdict": verdict }))?;
    Ok(if failed.is_empty() {
        Outcome::Pass
    } else {
        Outcome::Fail(format!("largest sampled radius fails for {failed:?}"))
    })
}

// ---------------------------------------------------------------- asym

#[derive(Args, Clone, Debug, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AsymArgs {
    #[arg(long = "fn")]
    #[serde(rename = "fn")]
    pub func: Option<String>,
    #[arg(long)]
    pub omega: Option<String>,
    #[arg(long)]
    pub rmin: Option<f64>,
    #[arg(long)]
    pub rmax: Option<f64>,
    #[arg(long)]
    pub count: Option<usize>,
    #[arg(long)]
    pub radii: Option<String>,
    #[arg(long)]
    pub tol: Option<f64>,
}

impl AsymArgs {
    pub fn resolve(mut self) -> Result<Self> {
        self.func.get_or_insert_with(|| "exp_z".into());
        self.omega.get_or_insert_with(|| "z^2+z".into());
        if self.radii.is_none() {
            self.rmin.get_or_insert(2.0);
            self.rmax.get_or_insert(20.0);
            self.count.get_or_insert(DEFAULT_COUNT);
        }
        self.tol.get_or_insert(DEFAULT_TOL);
        Ok(self)
    }
}

#[derive(Serialize)]
struct AsymRow<'a> {
    case: &'a str,
    r: f64,
    t_composed: f64,
    t_scaled: f64,
    ratio: f64,
}

fn run_asym(a: &AsymArgs, exec: Execution, sink: &Sink) -> Result<Outcome> {
    let id = a.func.as_deref().unwrap_or("exp_z");
    let w = a.omega.as_deref().unwrap_or("z^2+z");
    let rs = grid(a.radii.as_deref(), a.rmin.unwrap_or(2.0), a.rmax.unwrap_or(20.0), a.count.unwrap_or(DEFAULT_COUNT))?;
    let samples = asym_ratio(&member(id)?.expr, &poly(w)?, &rs, a.tol.unwrap_or(DEFAULT_TOL), exec)?;
    let label = format!("{id}|{w}");
    let table: Vec<AsymRow> = samples
        .iter()
        .map(|s| AsymRow { case: &label, r: s.r, t_composed: s.t_composed, t_scaled: s.t_scaled, ratio: s.ratio })
        .collect();
    let top = (samples[samples.len() - 1].ratio - 1.0).abs();
    let median = (samples[samples.len() / 2].ratio - 1.0).abs();
    let pass = top < 0.1 && top <= median + 1e-12;
    let verdict = json!({ "pass": pass, "top_deviation": top, "median_deviation": median });
    sink.emit(&table, json!({ "verdict": verdict }))?;
    Ok(if pass {
        Outcome::Pass
    } else {
        Outcome::Fail(format!("|ratio - 1| is {top} at the top radius and {median} at the median"))
    })
}

// ---------------------------------------------------------------- smt

#[derive(Args, Clone, Debug, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SmtArgs {
    #[arg(long = "fn")]
    #[serde(rename = "fn")]
    pub func: Option<String>,
    #[arg(long)]
    pub phi: Option<String>,
    #[arg(long)]
    pub omega: Option<String>,
    /// Comma-separated distinct target values
    #[arg(long)]
    pub targets: Option<String>,
    #[arg(long)]
    pub slack: Option<f64>,
    #[arg(long)]
    pub rmin: Option<f64>,
    #[arg(long)]
    pub rmax: Option<f64>,
    #[arg(long)]
    pub count: Option<usize>,
    #[arg(long)]
    pub radii: Option<String>,
    #[arg(long)]
    pub tol: Option<f64>,
}

impl SmtArgs {
    pub fn resolve(mut self) -> Result<Self> {
        self.func.get_or_insert_with(|| "exp_z".into());
        self.phi.get_or_insert_with(|| "z^2".into());
        self.omega.get_or_insert_with(|| "z^2+z".into());
        self.targets.get_or_insert_with(|| "1,-1".into());
        self.slack.get_or_insert(DEFAULT_SLACK);
        if self.radii.is_none() {
            self.rmin.get_or_insert(5.0);
            self.rmax.get_or_insert(40.0);
            self.count.get_or_insert(DEFAULT_COUNT);
        }
        self.tol.get_or_insert(DEFAULT_TOL);
        Ok(self)
    }
}

/// Largest share of the sweep's logarithmic measure that failing radii may take.
pub const SMT_EXCEPTIONAL_SHARE: f64 = 0.1;

fn run_smt(a: &SmtArgs, exec: Execution, sink: &Sink) -> Result<Outcome> {
    let id = a.func.as_deref().unwrap_or("exp_z");
    let (w, p) = (a.omega.as_deref().unwrap_or("z^2+z"), a.phi.as_deref().unwrap_or("z^2"));
    let pair = PolyPair::new(poly(w)?, poly(p)?)?;
    let targets = complex_list(a.targets.as_deref().unwrap_or("1,-1"))?;
    let rs = grid(a.radii.as_deref(), a.rmin.unwrap_or(5.0), a.rmax.unwrap_or(40.0), a.count.unwrap_or(DEFAULT_COUNT))?;
    let reports = smt_check(
        &member(id)?.expr,
        &pair,
        &targets,
        a.slack.unwrap_or(DEFAULT_SLACK),
        &rs,
        a.tol.unwrap_or(DEFAULT_TOL),
        exec,
    )?;
    let (bad, total) = exceptional_logmeasure(&reports);
    let pass = bad < SMT_EXCEPTIONAL_SHARE * total;
    let label = format!("{id}|{w}|{p}");
    let verdict = json!({
        "pass": pass, "exceptional_logmeasure": bad, "total_logmeasure": total, "failing_radii": failing_radii(&reports),
    });
    sink.emit(&rows(&label, &reports), json!({ "verdict": verdict }))?;
    Ok(if pass {
        Outcome::Pass
    } else {
        Outcome::Fail(format!("failing radii {:?} carry logmeasure {bad} of {total}", failing_radii(&reports)))
    })
}

// ---------------------------------------------------------------- borel

#[derive(Args, Clone, Debug, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BorelArgs {
    /// `all` or comma-separated corpus ids
    #[arg(long = "fn")]
    #[serde(rename = "fn")]
    pub func: Option<String>,
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub c: Option<String>,
    #[arg(long)]
    pub epsilon: Option<f64>,
    /// Overrides each member's own radius range
    #[arg(long)]
    pub rmin: Option<f64>,
    #[arg(long)]
    pub rmax: Option<f64>,
    #[arg(long)]
    pub count: Option<usize>,
    #[arg(long)]
    pub tol: Option<f64>,
}

impl BorelArgs {
    pub fn resolve(mut self) -> Result<Self> {
        self.func.get_or_insert_with(|| "all".into());
        self.n.get_or_insert(1);
        self.c.get_or_insert_with(|| "1".into());
        self.epsilon.get_or_insert(1.0);
        self.count.get_or_insert(DEFAULT_COUNT);
        self.tol.get_or_insert(DEFAULT_TOL);
        Ok(self)
    }
}

#[derive(Serialize)]
struct BorelRow {
    case: String,
    r0: Option<f64>,
    exceptional_logmeasure: Option<f64>,
    closed_form_bound: Option<f64>,
    g_at_rmax: Option<f64>,
    pass: u8,
    note: &'static str,
}

fn run_borel(a: &BorelArgs, exec: Execution, sink: &Sink) -> Result<Outcome> {
    let c = complex(a.c.as_deref().unwrap_or("1"))?;
    let (n, eps, count) = (a.n.unwrap_or(1), a.epsilon.unwrap_or(1.0), a.count.unwrap_or(DEFAULT_COUNT));
    let mut table = Vec::new();
    let mut reports = Vec::new();
    for e in members(a.func.as_deref().unwrap_or("all"))? {
        let rs = grid(None, a.rmin.unwrap_or(e.radii.0), a.rmax.unwrap_or(e.radii.1), count)?;
        match borel_probe(&e.expr, n, c, eps, &rs, a.tol.unwrap_or(DEFAULT_TOL), exec) {
            Ok(b) => {
                table.push(BorelRow {
                    case: e.id.clone(),
                    r0: Some(b.r0),
                    exceptional_logmeasure: Some(b.exceptional_logmeasure),
                    closed_form_bound: Some(b.closed_form_bound),
                    g_at_rmax: Some(b.g_at_rmax),
                    pass: b.pass as u8,
                    note: "",
                });
                reports.push(json!({ "case": e.id, "report": b }));
            }
            Err(Error::InsufficientGrowth) => {
                table.push(BorelRow {
                    case: e.id.clone(),
                    r0: None,
                    exceptional_logmeasure: None,
                    closed_form_bound: None,
                    g_at_rmax: None,
                    pass: 1,
                    note: "g stays below e; vacuous",
                });
                reports.push(json!({ "case": e.id, "report": Value::Null, "note": "insufficient growth" }));
            }
            Err(err) => return Err(err.into()),
        }
    }
    let failed: Vec<&str> = table.iter().filter(|r| r.pass == 0).map(|r| r.case.as_str()).collect();
    let verdict = json!({ "pass": failed.is_empty(), "failed": failed });
    sink.emit(&table, json!({ "reports": reports, "verdict": verdict }))?;
    Ok(if failed.is_empty() {
        Outcome::Pass
    } else {
        Outcome::Fail(format!("measured exceptional set exceeds the closed-form bound for {failed:?}"))
    })
}

// ---------------------------------------------------------------- growth

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Model {
    /// T(r) = exp(√r)
    ExpSqrt,
    /// T(r) = exp(r)
    Exp,
    /// T(r) = e
    Const,
    /// T(r, f) for the corpus member given by --fn
    Fn,
}

#[derive(Args, Clone, Debug, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GrowthArgs {
    #[arg(long, value_enum)]
    pub model: Option<Model>,
    #[arg(long = "fn")]
    #[serde(rename = "fn")]
    pub func: Option<String>,
    /// s(r) = k r^mu
    #[arg(long)]
    pub k: Option<f64>,
    #[arg(long)]
    pub mu: Option<f64>,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub rmin: Option<f64>,
    #[arg(long)]
    pub rmax: Option<f64>,
    /// Number of linearly spaced samples
    #[arg(long)]
    pub count: Option<usize>,
    #[arg(long)]
    pub tol: Option<f64>,
}

impl GrowthArgs {
    pub fn resolve(mut self) -> Result<Self> {
        let model = *self.model.get_or_insert(if self.func.is_some() { Model::Fn } else { Model::ExpSqrt });
        if model == Model::Fn && self.func.is_none() {
            bail!("--model fn needs --fn");
        }
        self.k.get_or_insert(1.0);
        self.mu.get_or_insert(0.25);
        self.alpha.get_or_insert(0.9);
        self.rmin.get_or_insert(1.0);
        self.rmax.get_or_insert(if model == Model::Exp { 600.0 } else { 20000.0 });
        self.count.get_or_insert(40000);
        self.tol.get_or_insert(DEFAULT_TOL);
        Ok(self)
    }
}

#[derive(Serialize)]
struct WindowRow {
    window_end: f64,
    logmeasure: f64,
}

fn run_growth(a: &GrowthArgs, exec: Execution, sink: &Sink) -> Result<Outcome> {
    let (rmin, rmax, count) = (a.rmin.unwrap_or(1.0), a.rmax.unwrap_or(20000.0), a.count.unwrap_or(40000));
    if count < 2 || !(rmax > rmin) {
        bail!("need count >= 2 and rmax > rmin");
    }
    let rs: Vec<f64> = (0..count).map(|i| rmin + (rmax - rmin) * i as f64 / (count - 1) as f64).collect();
    let values: Vec<f64> = match a.model.unwrap_or(Model::ExpSqrt) {
        Model::ExpSqrt => rs.iter().map(|r| r.sqrt().exp()).collect(),
        Model::Exp => rs.iter().map(|r| r.exp()).collect(),
        Model::Const => vec![std::f64::consts::E; rs.len()],
        Model::Fn => {
            let f = member(a.func.as_deref().unwrap_or_default())?.expr;
            characteristic_sweep(&f, &rs, a.tol.unwrap_or(DEFAULT_TOL), exec)?.iter().map(|s| s.t).collect()
        }
    };
    let probe = GrowthProbe::new(rs, values, a.k.unwrap_or(1.0), a.mu.unwrap_or(0.25), a.alpha.unwrap_or(0.9))?;
    let rep = growth_lemma_probe(&probe)?;
    let table: Vec<WindowRow> = rep.windows.iter().map(|&(w, m)| WindowRow { window_end: w, logmeasure: m }).collect();
    let pass = rep.verdict != Dichotomy::Inconsistent;
    let verdict = json!({
        "pass": pass, "dichotomy": rep.verdict, "tail_cauchy": rep.tail_cauchy, "tail_increment": rep.tail_increment,
        "hyper_slope": rep.hyper_slope, "threshold": rep.threshold,
    });
    sink.emit(&table, json!({ "report": rep, "verdict": verdict }))?;
    Ok(if pass {
        Outcome::Pass
    } else {
        Outcome::Fail(format!(
            "detected set keeps growing (last increment {}) while the hyper-slope {} stays below {}",
            rep.tail_increment, rep.hyper_slope, rep.threshold
        ))
    })
}

impl Which {
    pub fn run(&self, exec: Execution, sink: &Sink) -> Result<Outcome> {
        match self {
            Which::Pest(a) => run_pest(a, exec, sink),
            Which::Lemma1(a) => run_lemma1(a, exec, sink),
            Which::Asym(a) => run_asym(a, exec, sink),
            Which::Smt(a) => run_smt(a, exec, sink),
            Which::Borel(a) => run_borel(a, exec, sink),
            Which::Growth(a) => run_growth(a, exec, sink),
        }
    }
}
