use std::f64::consts::{E, LN_2};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::{cell_logmeasures, check_grid};
use crate::error::{Error, Result};
use crate::expr::FunctionExpr;
use crate::nevanlinna::{characteristic, characteristic_sweep};
use crate::par::{try_map_ordered, Execution};

/// A detected-set measure whose last window increment is below this counts as convergent.
pub const TAIL_CAUCHY_TOL: f64 = 0.01;
/// Relative slack on the `1 - μ` hyper-slope threshold.
pub const GROWTH_FIT_TOLERANCE: f64 = 0.1;
const MONOTONE_SLACK: f64 = 1e-9;

/// Sampled nondecreasing `T` with a step bound `s(r) = K r^μ` and a ratio `α < 1`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GrowthProbe {
    pub grid: Vec<f64>,
    pub values: Vec<f64>,
    pub k: f64,
    pub mu: f64,
    pub alpha: f64,
}

impl GrowthProbe {
    pub fn new(grid: Vec<f64>, values: Vec<f64>, k: f64, mu: f64, alpha: f64) -> Result<Self> {
        check_grid(&grid)?;
        if grid.len() != values.len() {
            return Err(Error::InvalidInput("grid and values differ in length".into()));
        }
        if !(k > 0.0) || !(0.0..1.0).contains(&mu) {
            return Err(Error::InvalidInput(format!("need K > 0 and 0 <= mu < 1, got K = {k}, mu = {mu}")));
        }
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(Error::InvalidInput(format!("alpha must lie in (0, 1), got {alpha}")));
        }
        Ok(GrowthProbe { grid, values, k, mu, alpha })
    }

    pub fn from_fn(grid: Vec<f64>, t: impl Fn(f64) -> f64, k: f64, mu: f64, alpha: f64) -> Result<Self> {
        let values = grid.iter().map(|&r| t(r)).collect();
        Self::new(grid, values, k, mu, alpha)
    }

    pub fn step(&self, r: f64) -> f64 {
        self.k * r.powf(self.mu)
    }

    /// `T` between grid points, linear in `log T` where both ends are positive.
    fn interpolate(&self, r: f64) -> f64 {
        let i = self.grid.partition_point(|&g| g <= r).clamp(1, self.grid.len() - 1);
        let (r0, r1) = (self.grid[i - 1], self.grid[i]);
        let (t0, t1) = (self.values[i - 1], self.values[i]);
        let w = (r - r0) / (r1 - r0);
        if t0 > 0.0 && t1 > 0.0 {
            (t0.ln() + w * (t1.ln() - t0.ln())).exp()
        } else {
            t0 + w * (t1 - t0)
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Dichotomy {
    Consistent,
    Inconsistent,
    /// `T` is constant or never exceeds `e`; the slope carries no information.
    Degenerate,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GrowthReport {
    /// Maximal runs of grid cells where `T(r) <= α T(r + s(r))`.
    pub f_intervals: Vec<(f64, f64)>,
    pub logmeasure_f: f64,
    /// `(R, logmeasure of F ∩ [1, R])` over doubling windows.
    pub windows: Vec<(f64, f64)>,
    pub tail_increment: f64,
    pub tail_cauchy: bool,
    pub hyper_slope: f64,
    pub threshold: f64,
    pub verdict: Dichotomy,
}

fn clip_log(lo: f64, hi: f64, upper: f64) -> f64 {
    let (lo, hi) = (lo.max(1.0), hi.min(upper).max(1.0));
    if hi > lo {
        (hi / lo).ln()
    } else {
        0.0
    }
}

fn loglog_slope(rs: &[f64], ts: &[f64]) -> Option<f64> {
    let pts: Vec<(f64, f64)> =
        rs.iter().zip(ts).filter(|(&r, &t)| r > 1.0 && t > E).map(|(r, t)| (r.ln(), t.ln().ln())).collect();
    if pts.len() < 3 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    Some(sxy / sxx)
}

/// Detects `F = {r : T(r) <= α T(r + s(r))}` on the grid and checks the growth dichotomy:
/// either `F ∩ [1, ∞)` has finite logarithmic measure or the hyper-slope reaches `1 - μ`.
pub fn growth_lemma_probe(probe: &GrowthProbe) -> Result<GrowthReport> {
    let (g, t) = (&probe.grid, &probe.values);
    for i in 1..t.len() {
        if t[i] < t[i - 1] - MONOTONE_SLACK * t[i - 1].abs() {
            return Err(Error::NonMonotone(g[i]));
        }
    }
    let last = g[g.len() - 1];
    let usable = g.iter().take_while(|&&r| r + probe.step(r) <= last).count();
    let rs = &g[..usable];
    let flags: Vec<bool> = rs.iter().zip(t).map(|(&r, &v)| v <= probe.alpha * probe.interpolate(r + probe.step(r))).collect();

    let mut bounds = Vec::with_capacity(usable);
    if usable > 0 {
        let cells = cell_logmeasures(rs);
        let mut lo = rs[0];
        for c in cells {
            let hi = lo * c.exp();
            bounds.push((lo, hi));
            lo = hi;
        }
    }
    let mut f_intervals: Vec<(f64, f64)> = Vec::new();
    for (&(lo, hi), &f) in bounds.iter().zip(&flags) {
        if !f {
            continue;
        }
        match f_intervals.last_mut() {
            Some(iv) if (iv.1 - lo).abs() <= 1e-12 * lo => iv.1 = hi,
            _ => f_intervals.push((lo, hi)),
        }
    }
    let measure_to = |upper: f64| f_intervals.iter().fold(0.0, |acc, &(lo, hi)| acc + clip_log(lo, hi, upper));
    let logmeasure_f = measure_to(f64::INFINITY);

    let end = rs.last().copied().unwrap_or(g[0]);
    let mut windows = Vec::new();
    let mut upper = rs.first().copied().unwrap_or(1.0).max(1.0) * 2.0;
    while upper < end {
        windows.push((upper, measure_to(upper)));
        upper *= 2.0;
    }
    windows.push((end, measure_to(end)));
    let tail_increment = match windows.len() {
        0 | 1 => f64::INFINITY,
        k => windows[k - 1].1 - windows[k - 2].1,
    };
    let tail_cauchy = tail_increment < TAIL_CAUCHY_TOL;

    let threshold = 1.0 - probe.mu;
    let constant = t.iter().all(|&v| v == t[0]);
    let (hyper_slope, verdict) = match loglog_slope(g, t) {
        Some(s) if !constant => {
            let ok = tail_cauchy || s >= threshold * (1.0 - GROWTH_FIT_TOLERANCE);
            (s, if ok { Dichotomy::Consistent } else { Dichotomy::Inconsistent })
        }
        _ => (0.0, Dichotomy::Degenerate),
    };
    Ok(GrowthReport { f_intervals, logmeasure_f, windows, tail_increment, tail_cauchy, hyper_slope, threshold, verdict })
}

/// `1/ξ(e) + (1/log 2) ∫_e^G dx / (x ξ(x))` with `ξ(x) = (log x)^(1+ε)`, in closed form.
pub fn borel_closed_form(epsilon: f64, g_at_rmax: f64) -> f64 {
    let l = g_at_rmax.ln().max(1.0);
    1.0 + (1.0 - l.powf(-epsilon)) / (epsilon * LN_2)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BorelReport {
    /// First grid radius from which `g >= e` holds on the rest of the grid.
    pub r0: f64,
    pub flagged: Vec<f64>,
    pub exceptional_logmeasure: f64,
    pub closed_form_bound: f64,
    pub g_at_rmax: f64,
    pub pass: bool,
}

/// Scans `g(r) = T(|c| r^n, f)` for radii with `g(βr) > 2 g(r)`, `β = 1 + (log g(r))^-(1+ε)`.
pub fn borel_probe(
    expr: &FunctionExpr,
    n: usize,
    c: Complex64,
    epsilon: f64,
    rgrid: &[f64],
    tol: f64,
    exec: Execution,
) -> Result<BorelReport> {
    check_grid(rgrid)?;
    if n == 0 || c.norm() == 0.0 {
        return Err(Error::InvalidInput("need n >= 1 and c != 0".into()));
    }
    if !(epsilon > 0.0) {
        return Err(Error::InvalidInput(format!("epsilon must be positive, got {epsilon}")));
    }
    let scale = |r: f64| c.norm() * r.powi(n as i32);
    let scaled: Vec<f64> = rgrid.iter().map(|&r| scale(r)).collect();
    let gs: Vec<f64> = characteristic_sweep(expr, &scaled, tol, exec)?.iter().map(|s| s.t).collect();
    let start = gs.iter().rposition(|&v| v < E).map_or(0, |i| i + 1);
    if start >= gs.len() {
        return Err(Error::InsufficientGrowth);
    }
    let rs = &rgrid[start..];
    let idx: Vec<usize> = (start..rgrid.len()).collect();
    let flags = try_map_ordered(&idx, exec, |&i| {
        let beta = 1.0 + gs[i].ln().powf(-(1.0 + epsilon));
        Ok::<bool, Error>(characteristic(expr, scale(beta * rgrid[i]), tol)?.t > 2.0 * gs[i])
    })?;
    let cells = cell_logmeasures(rs);
    let exceptional_logmeasure = cells.iter().zip(&flags).filter(|(_, &f)| f).fold(0.0, |acc, (m, _)| acc + m);
    let g_at_rmax = gs[gs.len() - 1];
    let closed_form_bound = borel_closed_form(epsilon, g_at_rmax);
    Ok(BorelReport {
        r0: rs[0],
        flagged: rs.iter().zip(&flags).filter(|(_, &f)| f).map(|(&r, _)| r).collect(),
        exceptional_logmeasure,
        closed_form_bound,
        g_at_rmax,
        pass: exceptional_logmeasure <= closed_form_bound,
    })
}
