//! Proximity, counting and characteristic functions, first-main-theorem deltas,
//! hyper-order estimation and an argument-principle oracle.

use std::cell::RefCell;
use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize, Serializer};

use crate::divisor::{Divisor, Side};
use crate::error::{Error, Result};
use crate::expr::FunctionExpr;
use crate::par::{try_map_ordered, Execution};
use crate::quad::{integrate_periodic, QuadConfig, Singularity};

/// A divisor point closer than `NUDGE_TRIGGER * r` to the circle moves the radius.
pub const NUDGE_TRIGGER: f64 = 1e-9;
pub const NUDGE_FACTOR: f64 = 1e-7;
/// Divisor points within this fraction of `r` from the circle become panel breakpoints.
pub const SPLIT_BAND: f64 = 0.1;
/// Fraction of the smallest radii dropped before fitting the hyper-order.
pub const HYPER_DROP_FRACTION: f64 = 0.2;
pub const ARG_PRINCIPLE_GAP: f64 = 1e-6;
const ARG_PRINCIPLE_TOL: f64 = 1e-9;

fn as_flag<S: Serializer>(b: &bool, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.serialize_u8(*b as u8)
}

fn from_flag<'de, D: serde::Deserializer<'de>>(d: D) -> std::result::Result<bool, D::Error> {
    Ok(u8::deserialize(d)? != 0)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CharacteristicSample {
    /// Radius actually used (after any nudge).
    pub r: f64,
    pub m: f64,
    #[serde(rename = "N")]
    pub n: f64,
    #[serde(rename = "T")]
    pub t: f64,
    pub quad_err: f64,
    #[serde(serialize_with = "as_flag", deserialize_with = "from_flag")]
    pub nudged: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Proximity {
    pub r: f64,
    pub m: f64,
    pub quad_err: f64,
    pub nudged: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HyperOrderEstimate {
    pub varsigma_hat: f64,
    pub fit_window: (f64, f64),
    pub residual: f64,
    /// Plain least-squares slope of `log log T` against `log r` over the same window.
    pub loglog_slope: f64,
    pub clamped: bool,
    pub points_used: usize,
}

/// `count` log-spaced radii from `rmin` to `rmax` inclusive.
pub fn log_spaced(rmin: f64, rmax: f64, count: usize) -> Vec<f64> {
    match count {
        0 => Vec::new(),
        1 => vec![rmin],
        _ => {
            let (a, b) = (rmin.ln(), rmax.ln());
            (0..count)
                .map(|i| {
                    if i + 1 == count {
                        rmax
                    } else {
                        (a + (b - a) * i as f64 / (count - 1) as f64).exp()
                    }
                })
                .collect()
        }
    }
}

/// Moves `r` outward until no divisor point sits within `NUDGE_TRIGGER * r` of the circle.
pub fn nudge_radius(divisor: &Divisor, r: f64) -> (f64, bool) {
    let mut r_used = r;
    let mut nudged = false;
    for _ in 0..64 {
        if divisor.circle_gap(r_used) > NUDGE_TRIGGER * r_used {
            break;
        }
        r_used *= 1.0 + NUDGE_FACTOR;
        nudged = true;
    }
    (r_used, nudged)
}

fn singular_angles(divisor: &Divisor, r: f64) -> Vec<Singularity> {
    divisor
        .entries()
        .iter()
        .filter(|e| (e.point.norm() - r).abs() <= SPLIT_BAND * r)
        .map(|e| Singularity::log(e.point.arg()))
        .collect()
}

/// `(1/2π) ∫ h(r e^{iθ}) dθ` with breakpoints at the divisor's near-circle angles.
fn circle_mean<H>(h: H, divisor: Option<&Divisor>, r: f64, tol: f64) -> Result<(f64, f64)>
where
    H: Fn(Complex64) -> Result<f64>,
{
    let sing = divisor.map(|d| singular_angles(d, r)).unwrap_or_default();
    let failure: RefCell<Option<Error>> = RefCell::new(None);
    let res = integrate_periodic(
        |a, o| {
            if failure.borrow().is_some() {
                return 0.0;
            }
            match h(Complex64::from_polar(r, a + o)) {
                Ok(v) => v,
                Err(e) => {
                    *failure.borrow_mut() = Some(e);
                    0.0
                }
            }
        },
        &sing,
        QuadConfig::with_tol(tol),
    );
    if let Some(e) = failure.into_inner() {
        return Err(e);
    }
    let res = res?;
    Ok((res.value / (2.0 * PI), res.error / (2.0 * PI)))
}

/// Divisor used for nudging and panel splitting, or `None` for opaque expressions.
fn guide_divisor(expr: &FunctionExpr, r: f64) -> Result<Option<Divisor>> {
    match expr.divisor_in_disc(r * (1.0 + SPLIT_BAND)) {
        Ok(d) => Ok(Some(d)),
        Err(Error::OpaqueExpr) => Ok(None),
        Err(e) => Err(e),
    }
}

/// `m(r, f)`; `divisor` (covering `|z| <= 1.1 r`) drives nudging and panel splits.
pub fn proximity_with_divisor(
    expr: &FunctionExpr,
    divisor: Option<&Divisor>,
    r: f64,
    tol: f64,
) -> Result<Proximity> {
    if !(r > 0.0) {
        return Err(Error::InvalidInput(format!("radius must be positive, got {r}")));
    }
    let (r_used, nudged) = divisor.map(|d| nudge_radius(d, r)).unwrap_or((r, false));
    let (m, quad_err) = circle_mean(|z| Ok(expr.logmod_eval(z)?.0.max(0.0)), divisor, r_used, tol)?;
    Ok(Proximity { r: r_used, m, quad_err, nudged })
}

/// `m(r, f) = (1/2π) ∮ log⁺|f(r e^{iθ})| dθ`.
pub fn proximity(expr: &FunctionExpr, r: f64, tol: f64) -> Result<Proximity> {
    let guide = guide_divisor(expr, r)?;
    proximity_with_divisor(expr, guide.as_ref(), r, tol)
}

/// Integrated counting function of one side of the divisor.
pub fn counting(divisor: &Divisor, r: f64, side: Side) -> f64 {
    divisor.counting(r, side)
}

/// `T(r, f)` from a divisor that covers `|z| <= 1.1 r`.
pub fn characteristic_with_divisor(
    expr: &FunctionExpr,
    divisor: &Divisor,
    r: f64,
    tol: f64,
) -> Result<CharacteristicSample> {
    let p = proximity_with_divisor(expr, Some(divisor), r, tol)?;
    let n = divisor.counting(p.r, Side::Poles);
    Ok(CharacteristicSample { r: p.r, m: p.m, n, t: p.m + n, quad_err: p.quad_err, nudged: p.nudged })
}

/// `T(r, f) = m(r, f) + N(r, f)`.
pub fn characteristic(expr: &FunctionExpr, r: f64, tol: f64) -> Result<CharacteristicSample> {
    let divisor = expr.divisor_in_disc(r * (1.0 + SPLIT_BAND))?;
    characteristic_with_divisor(expr, &divisor, r, tol)
}

/// Characteristic over a grid; the divisor is computed once for the largest radius.
pub fn characteristic_sweep(
    expr: &FunctionExpr,
    rgrid: &[f64],
    tol: f64,
    exec: Execution,
) -> Result<Vec<CharacteristicSample>> {
    let rmax = rgrid.iter().copied().fold(0.0, f64::max);
    let divisor = expr.divisor_in_disc(rmax * (1.0 + SPLIT_BAND))?;
    try_map_ordered(rgrid, exec, |&r| characteristic_with_divisor(expr, &divisor, r, tol))
}

/// `|T(r, 1/(f-a)) - T(r, f)|` per radius.
pub fn fmt_delta(expr: &FunctionExpr, a: Complex64, rgrid: &[f64], tol: f64, exec: Execution) -> Result<Vec<f64>> {
    let shifted = FunctionExpr::quotient(
        FunctionExpr::constant(Complex64::new(1.0, 0.0)),
        FunctionExpr::difference(expr.clone(), FunctionExpr::constant(a)),
    );
    let t_f = characteristic_sweep(expr, rgrid, tol, exec)?;
    let t_a = characteristic_sweep(&shifted, rgrid, tol, exec)?;
    Ok(t_f.iter().zip(&t_a).map(|(f, g)| (g.t - f.t).abs()).collect())
}

fn least_squares(xs: &[f64], ys: &[f64]) -> (f64, f64, f64) {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let icept = my - slope * mx;
    let rss: f64 = xs.iter().zip(ys).map(|(x, y)| (y - icept - slope * x).powi(2)).sum();
    (slope, icept, (rss / n).sqrt())
}

/// Hyper-order from sampled `(r, T(r))`, sorted by radius.
///
/// The slope of `log(d log T / d log r)` against `log r` is fitted over the grid
/// after dropping the smallest fifth of the radii. For `log T ~ r^ς` that slope
/// tends to `ς` without the `log ς` offset that slows the plain
/// `log log T / log r` quotient.
pub fn hyperorder_from_samples(rs: &[f64], ts: &[f64]) -> Result<HyperOrderEstimate> {
    if rs.len() < 5 || rs.len() != ts.len() {
        return Err(Error::InvalidInput("hyper-order needs at least 5 samples".into()));
    }
    if !ts.iter().any(|&t| t > std::f64::consts::E) {
        return Err(Error::InsufficientGrowth);
    }
    let start = ((rs.len() as f64) * HYPER_DROP_FRACTION).floor() as usize;
    let lr: Vec<f64> = rs.iter().map(|r| r.ln()).collect();
    let lt: Vec<f64> = ts.iter().map(|t| if *t > 0.0 { t.ln() } else { f64::NAN }).collect();
    let last = rs.len() - 1;
    let (mut xs, mut ys) = (Vec::new(), Vec::new());
    let (mut lx, mut ly) = (Vec::new(), Vec::new());
    for i in start..rs.len() {
        let (lo, hi) = (i.saturating_sub(1), (i + 1).min(last));
        let d = (lt[hi] - lt[lo]) / (lr[hi] - lr[lo]);
        if d.is_finite() && d > 0.0 {
            xs.push(lr[i]);
            ys.push(d.ln());
        }
        if ts[i] > std::f64::consts::E {
            lx.push(lr[i]);
            ly.push(lt[i].ln());
        }
    }
    let loglog_slope = if lx.len() >= 2 { least_squares(&lx, &ly).0 } else { 0.0 };
    if xs.len() < 2 {
        return Ok(HyperOrderEstimate {
            varsigma_hat: 0.0,
            fit_window: (rs[start], rs[last]),
            residual: 0.0,
            loglog_slope,
            clamped: true,
            points_used: xs.len(),
        });
    }
    let (slope, _, residual) = least_squares(&xs, &ys);
    Ok(HyperOrderEstimate {
        varsigma_hat: slope.max(0.0),
        fit_window: (rs[start], rs[last]),
        residual,
        loglog_slope,
        clamped: slope < 0.0,
        points_used: xs.len(),
    })
}

pub fn hyperorder_estimate(expr: &FunctionExpr, rgrid: &[f64], tol: f64, exec: Execution) -> Result<HyperOrderEstimate> {
    let mut grid = rgrid.to_vec();
    grid.sort_by(f64::total_cmp);
    let samples = characteristic_sweep(expr, &grid, tol, exec)?;
    let rs: Vec<f64> = samples.iter().map(|s| s.r).collect();
    let ts: Vec<f64> = samples.iter().map(|s| s.t).collect();
    hyperorder_from_samples(&rs, &ts)
}

/// Raw value of `(1/2πi) ∮ f'/f dz` over `|z| = r`.
pub fn argument_principle_integral(expr: &FunctionExpr, r: f64) -> Result<f64> {
    let guide = guide_divisor(expr, r)?;
    if let Some(d) = &guide {
        let gap = d.circle_gap(r);
        if gap <= ARG_PRINCIPLE_GAP * r {
            return Err(Error::CircleSingularity { r, distance: gap });
        }
    }
    // dz = i z dθ, so the integrand is z f'/f / 2π; its real part carries the count
    let (v, _) = circle_mean(|z| Ok((z * expr.logderiv_eval(z)?).re), guide.as_ref(), r, ARG_PRINCIPLE_TOL)?;
    Ok(v)
}

/// Number of zeros minus number of poles in `|z| < r`, by the argument principle.
pub fn argument_principle_count(expr: &FunctionExpr, r: f64) -> Result<i64> {
    let v = argument_principle_integral(expr, r)?;
    let k = v.round();
    if (v - k).abs() > 0.1 {
        return Err(Error::NonIntegerResidual(v));
    }
    Ok(k as i64)
}
