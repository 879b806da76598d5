use anyhow::{bail, Result};
use clap::Args;
use nevlab::nevanlinna::{characteristic_sweep, hyperorder_estimate};
use nevlab::par::Execution;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::inputs::{function, grid, member, DEFAULT_COUNT, DEFAULT_TOL};
use crate::output::Sink;
use crate::Outcome;

#[derive(Args, Clone, Debug, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CharArgs {
    /// Corpus function id, e.g. exp_z
    #[arg(long = "fn")]
    #[serde(rename = "fn")]
    pub func: Option<String>,
    /// Compose the function with this polynomial, e.g. "z^2+z"
    #[arg(long)]
    pub compose: Option<String>,
    #[arg(long)]
    pub rmin: Option<f64>,
    #[arg(long)]
    pub rmax: Option<f64>,
    #[arg(long)]
    pub count: Option<usize>,
    /// Comma-separated radii; replaces the log-spaced grid
    #[arg(long)]
    pub radii: Option<String>,
    #[arg(long)]
    pub tol: Option<f64>,
}

impl CharArgs {
    pub fn resolve(mut self) -> Result<Self> {
        let Some(id) = &self.func else { bail!("--fn is required") };
        let e = member(id)?;
        if self.radii.is_none() {
            self.rmin.get_or_insert(e.radii.0);
            self.rmax.get_or_insert(e.radii.1);
            self.count.get_or_insert(DEFAULT_COUNT);
        }
        self.tol.get_or_insert(DEFAULT_TOL);
        Ok(self)
    }

    fn radii(&self) -> Result<Vec<f64>> {
        grid(self.radii.as_deref(), self.rmin.unwrap_or(0.0), self.rmax.unwrap_or(0.0), self.count.unwrap_or(0))
    }
}

pub fn run_char(a: &CharArgs, exec: Execution, sink: &Sink) -> Result<Outcome> {
    let (f, _) = function(a.func.as_deref().unwrap_or_default(), a.compose.as_deref())?;
    let tol = a.tol.unwrap_or(DEFAULT_TOL);
    let samples = characteristic_sweep(&f, &a.radii()?, tol, exec)?;
    sink.emit(&samples, json!({ "expr_hash": f.structure_hash(), "tol": tol }))?;
    Ok(Outcome::Pass)
}

#[derive(Args, Clone, Debug, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct HyperorderArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub sweep: CharArgs,
    /// Exit with status 2 when the estimate exceeds this value
    #[arg(long)]
    pub max: Option<f64>,
}

#[derive(Serialize)]
struct HyperRow {
    varsigma_hat: f64,
    fit_rmin: f64,
    fit_rmax: f64,
    residual: f64,
    loglog_slope: f64,
    clamped: u8,
    points_used: usize,
}

pub fn run_hyperorder(a: &HyperorderArgs, exec: Execution, sink: &Sink) -> Result<Outcome> {
    let s = &a.sweep;
    let (f, _) = function(s.func.as_deref().unwrap_or_default(), s.compose.as_deref())?;
    let h = hyperorder_estimate(&f, &s.radii()?, s.tol.unwrap_or(DEFAULT_TOL), exec)?;
    let row = HyperRow {
        varsigma_hat: h.varsigma_hat,
        fit_rmin: h.fit_window.0,
        fit_rmax: h.fit_window.1,
        residual: h.residual,
        loglog_slope: h.loglog_slope,
        clamped: h.clamped as u8,
        points_used: h.points_used,
    };
    let pass = a.max.is_none_or(|m| h.varsigma_hat <= m);
    sink.emit(&[row], json!({ "expr_hash": f.structure_hash(), "estimate": h, "verdict": { "pass": pass } }))?;
    Ok(if pass {
        Outcome::Pass
    } else {
        Outcome::Fail(format!("hyper-order estimate {} exceeds {}", h.varsigma_hat, a.max.unwrap_or_default()))
    })
}
