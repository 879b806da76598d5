//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit if any criterion fails.

use std::f64::consts::PI;
use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use nevlab::algmap::{invariance_census, TargetValue};
use nevlab::boundslab::{
    asym_ratio, borel_closed_form, borel_probe, exceptional_logmeasure, growth_lemma_probe, k_constant, lemma1_check,
    lemma1_r0, pestimate_cases, pestimate_check, smt_check, BoundConfig, GrowthProbe, PolyPair, TAIL_CAUCHY_TOL,
};
use nevlab::constructor::{build_orbit_function, corpus, corpus_entry, counterexample_kit, OrbitFamily};
use nevlab::nevanlinna::{argument_principle_count, hyperorder_estimate, log_spaced, proximity};
use nevlab::par::Execution;
use nevlab::{Complex64, Error, FunctionExpr, Polynomial, Side};

const EXEC: Execution = Execution::Parallel;

type Check = Result<(bool, String), String>;

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn poly(s: &str) -> Polynomial {
    s.parse().expect("polynomial literal")
}

fn expr(id: &str) -> FunctionExpr {
    corpus_entry(id).expect("corpus id").expr
}

fn e<E: std::fmt::Display>(err: E) -> String {
    err.to_string()
}

fn closed_form_proximity() -> Check {
    let m_exp = proximity(&expr("exp_z"), PI, 1e-12).map_err(e)?.m;
    let mut ok = (m_exp - 1.0).abs() <= 1e-6;
    let mut detail = format!("m(pi, e^z) = {m_exp:.12}");
    let inv_z = expr("rat_inv_z");
    for r in [2.0f64, 10.0] {
        let m = proximity(&inv_z, r, 1e-12).map_err(e)?.m;
        ok &= (m - r.ln()).abs() <= 1e-9;
        detail += &format!("; m({r}, 1/z) = {m} against log r = {:.9}", r.ln());
    }
    Ok((ok, detail))
}

fn inverse_power_sweep() -> Check {
    let cases = pestimate_cases(7, 100);
    let mut violations = 0;
    let mut worst = f64::INFINITY;
    for p in &cases {
        let rep = pestimate_check(&p.p, p.gamma, p.r, 1e-8).map_err(e)?;
        violations += usize::from(!rep.pass);
        worst = worst.min(rep.margin / rep.rhs);
    }
    Ok((violations == 0, format!("{} cases, {violations} violations, smallest relative margin {worst:.4}", cases.len())))
}

fn lemma1_triples() -> Check {
    let cfg = BoundConfig::new(2.0, 0.5, 1.0, 1e-9).map_err(e)?;
    let rs = log_spaced(1.0, 30.0, 50);
    let mut ok = true;
    let mut parts = Vec::new();
    for (id, w, p) in [("exp_z", "z+1", "z"), ("rat_one_minus_one", "z^2+z", "z^2"), ("exp_z2", "z+1", "z")] {
        let pair = PolyPair::new(poly(w), poly(p)).map_err(e)?;
        let reports = lemma1_check(&expr(id), &pair, &cfg, &rs, EXEC).map_err(e)?;
        let r0 = lemma1_r0(&reports);
        let k = k_constant(&cfg, &pair);
        ok &= r0.is_some() && reports.iter().all(|b| b.meta.k == Some(k));
        parts.push(format!("{id}: r0 = {r0:?}, K = {k}"));
    }
    let k_doc = k_constant(&cfg, &PolyPair::new(poly("z+1"), poly("z")).map_err(e)?);
    ok &= k_doc == 1984.0;
    Ok((ok, parts.join("; ")))
}

fn composition_asymptotics() -> Check {
    let s = asym_ratio(&expr("exp_z"), &poly("z^2+z"), &log_spaced(2.0, 20.0, 50), 1e-9, EXEC).map_err(e)?;
    let dev: Vec<f64> = s.iter().map(|x| (x.ratio - 1.0).abs()).collect();
    let top = dev[dev.len() - 1];
    let quartile = &dev[dev.len() - dev.len() / 4..];
    let monotone = quartile.windows(2).all(|w| w[1] <= w[0]);
    Ok((top <= 0.1 && monotone, format!("|ratio - 1| at r = 20 is {top:.3e}; top quartile monotone: {monotone}")))
}

fn second_main_theorem() -> Check {
    let pair = PolyPair::new(poly("z^2+z"), poly("z^2")).map_err(e)?;
    let rs = log_spaced(5.0, 40.0, 50);
    let reports = smt_check(&expr("exp_z"), &pair, &[c(1.0, 0.0), c(-1.0, 0.0)], 0.05, &rs, 1e-9, EXEC).map_err(e)?;
    let (bad, total) = exceptional_logmeasure(&reports);
    let measure_ok = bad < 0.1 * total;

    // e^(z^2+z) - e^(z^2) = e^(z^2) (e^z - 1): simple zeros exactly at 2 pi i k
    let radius = 40.0 * 1.1;
    let d = FunctionExpr::difference(
        FunctionExpr::compose(expr("exp_z"), pair.omega.clone()),
        FunctionExpr::compose(expr("exp_z"), pair.phi.clone()),
    )
    .divisor_in_disc(radius)
    .map_err(e)?;
    let kmax = (radius / (2.0 * PI)).floor() as i64;
    let closed: Vec<Complex64> = (-kmax..=kmax).filter(|&k| k != 0).map(|k| c(0.0, 2.0 * PI * k as f64)).collect();
    let mut found: Vec<Complex64> = d.side(Side::Zeros).map(|(p, _)| p).collect();
    found.sort_by(|a, b| a.im.total_cmp(&b.im));
    let simple = d.side(Side::Zeros).all(|(_, m)| m == 1) && d.origin_order() == 1 && d.degree(Side::Poles) == 0;
    let points_equal = found == closed;
    // N_omega = 2 N(r, f o phi) - N(r, D) + N(r, 1/D); f o phi has no poles, D has none either
    let mut n_ok = true;
    for &r in &rs {
        let closed_n: f64 = closed.iter().filter(|p| p.norm() <= r).map(|p| (r / p.norm()).ln()).sum::<f64>() + r.ln();
        let toolkit = d.counting(r, Side::Zeros) - d.counting(r, Side::Poles);
        n_ok &= (closed_n - toolkit).abs() <= 1e-12 * closed_n.abs().max(1.0);
    }
    Ok((
        measure_ok && simple && points_equal && n_ok,
        format!(
            "exceptional logmeasure {bad:.4} of {total:.4}; divisor of D: {} zeros plus the origin, equal to 2 pi i k: {points_equal}; N_omega agrees to 1e-12 at every radius: {n_ok}",
            found.len()
        ),
    ))
}

fn borel_bound() -> Check {
    let limit = 1.0 + 1.0 / 2f64.ln();
    let mut ok = true;
    let mut worst = 0.0f64;
    let mut vacuous = Vec::new();
    for entry in corpus() {
        let rs = log_spaced(entry.radii.0, entry.radii.1, 50);
        match borel_probe(&entry.expr, 1, c(1.0, 0.0), 1.0, &rs, 1e-9, EXEC) {
            Ok(b) => {
                ok &= b.exceptional_logmeasure <= b.closed_form_bound && b.closed_form_bound <= limit;
                worst = worst.max(b.exceptional_logmeasure);
            }
            Err(Error::InsufficientGrowth) => vacuous.push(entry.id),
            Err(err) => return Err(format!("{}: {err}", entry.id)),
        }
    }
    ok &= borel_closed_form(1.0, 1e300) <= limit;
    Ok((ok, format!("largest measured logmeasure {worst:.4} against limit {limit:.6}; vacuous (T below e): {vacuous:?}")))
}

fn growth_dichotomy() -> Check {
    let grid: Vec<f64> = (0..40000).map(|i| 1.0 + 19999.0 * i as f64 / 39999.0).collect();
    let probe = GrowthProbe::from_fn(grid, |r| r.sqrt().exp(), 1.0, 0.25, 0.9).map_err(e)?;
    let rep = growth_lemma_probe(&probe).map_err(e)?;
    Ok((
        rep.tail_cauchy && rep.tail_increment < TAIL_CAUCHY_TOL,
        format!("last-window increment {:.3e}, F logmeasure {:.4}", rep.tail_increment, rep.logmeasure_f),
    ))
}

fn hyper_orders() -> Check {
    let rs = log_spaced(5.0, 30.0, 50);
    let single = hyperorder_estimate(&expr("exp_z"), &rs, 1e-9, EXEC).map_err(e)?.varsigma_hat;
    let double = hyperorder_estimate(&expr("exp_exp_z"), &rs, 1e-9, EXEC).map_err(e)?.varsigma_hat;
    Ok((
        single <= 0.1 && (0.85..=1.15).contains(&double),
        format!("estimate for e^z is {single:.4}; for exp(exp z) it is {double:.4}"),
    ))
}

fn figure_one() -> Check {
    let out = Command::new(env!("CARGO_BIN_EXE_nevlab"))
        .args(["orbit", "--figure1", "left", "--seed", "4", "--k", "2"])
        .output()
        .map_err(e)?;
    if !out.status.success() {
        return Err(String::from_utf8_lossy(&out.stderr).into_owned());
    }
    let text = String::from_utf8(out.stdout).map_err(e)?;
    let rows: Vec<Vec<f64>> =
        text.lines().skip(1).map(|l| l.split(',').map(|x| x.parse().unwrap_or(f64::NAN)).collect()).collect();
    let first = (rows[1][3], rows[1][4]) == (5.0, 0.4);
    // second step from its definition z + (1/2 + i/5) sqrt z
    let z1 = c(5.0, 0.4);
    let want = z1 + c(0.5, 0.2) * Complex64::from_polar(z1.norm().sqrt(), z1.arg() / 2.0);
    let second = (rows[2][3] - want.re).abs() <= 1e-5 && (rows[2][4] - want.im).abs() <= 1e-5;
    let mut ok = first && second;
    let mut parts = vec![format!("tau(4) = {}+{}i, tau^2(4) = {:.5}+{:.5}i", rows[1][3], rows[1][4], rows[2][3], rows[2][4])];

    let generic = [TargetValue::Finite(c(0.37, 0.81)), TargetValue::Finite(c(-1.3, 0.2)), TargetValue::Finite(c(2.1, -0.6))];
    for (name, fam) in [("left", OrbitFamily::figure1_left(30)), ("right", OrbitFamily::figure1_right(20))] {
        let fam = fam.map_err(e)?;
        let f = build_orbit_function(&fam).map_err(e)?;
        let designed = invariance_census(&f, &fam.map, &[TargetValue::Finite(c(0.0, 0.0)), TargetValue::Infinity], fam.census_radius(), 1e-9, EXEC)
            .map_err(e)?;
        let tight = designed.iter().all(|r| r.matched.iter().all(|m| m.distance <= 1e-9 * (1.0 + m.matched_point.norm())));
        let third = invariance_census(&f, &fam.map, &generic, fam.census_radius(), 1e-9, EXEC).map_err(e)?;
        let designed_ok = designed.iter().all(|r| r.verdict) && tight;
        let third_fails = third.iter().all(|r| !r.verdict);
        ok &= designed_ok && third_fails;
        parts.push(format!("{name}: 0 and inf hold {designed_ok}, generic values all fail {third_fails}"));
    }
    Ok((ok, parts.join("; ")))
}

fn counterexample() -> Check {
    let mut ok = true;
    let mut parts = Vec::new();
    for k in [1u32, 2, 5] {
        let kit = counterexample_kit(k).map_err(e)?;
        let err = kit.max_identity_error(7, 100).map_err(e)?;
        let mut worst = 0.0f64;
        for j in 1..=k {
            for p in kit.preimages(j, 5).map_err(e)? {
                worst = worst.max(p.residual).max(p.shifted_residual);
            }
        }
        ok &= err <= 1e-12 && worst <= 1e-9;
        parts.push(format!("k = {k}: identity error {err:.1e}, residual {worst:.1e}"));
    }
    Ok((ok, parts.join("; ")))
}

fn argument_principle() -> Check {
    let mut ok = true;
    let mut checked = 0;
    let mut skipped = Vec::new();
    for entry in corpus() {
        if !entry.transparent {
            skipped.push(entry.id);
            continue;
        }
        for r in log_spaced(entry.radii.0, entry.radii.1, 20) {
            let d = entry.expr.divisor_in_disc(r * 1.1).map_err(e)?;
            let r = if d.circle_gap(r) < 1e-3 * r { r * (1.0 + 2e-3) } else { r };
            let direct = d.count(r, Side::Zeros) as i64 - d.count(r, Side::Poles) as i64;
            ok &= argument_principle_count(&entry.expr, r).map_err(|err| format!("{} at {r}: {err}", entry.id))? == direct;
            checked += 1;
        }
    }
    Ok((ok, format!("{checked} circles compared; opaque members skipped: {skipped:?}")))
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Check, Option<u64>); 11] = [
        ("closed-form proximity", closed_form_proximity, Some(1)),
        ("inverse-power sweep", inverse_power_sweep, Some(30)),
        ("exact-constant proximity bound", lemma1_triples, Some(120)),
        ("composition asymptotics", composition_asymptotics, Some(120)),
        ("second main theorem", second_main_theorem, Some(180)),
        ("Borel exceptional set", borel_bound, None),
        ("growth dichotomy", growth_dichotomy, None),
        ("hyper-order estimates", hyper_orders, None),
        ("two-panel orbit reproduction", figure_one, None),
        ("counterexample identity", counterexample, None),
        ("argument principle", argument_principle, None),
    ];
    let mut failed = 0;
    for (i, (name, run, limit)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let result = run();
        let took = start.elapsed();
        let in_time = limit.is_none_or(|s| took <= Duration::from_secs(s));
        let (pass, detail) = match result {
            Ok((ok, d)) => (ok && in_time, d),
            Err(err) => (false, format!("error: {err}")),
        };
        let budget = limit.map_or(String::new(), |s| format!(" of {s} s"));
        println!("{} {:>2} {name}: {detail} [{:.2} s{budget}]", if pass { "PASS" } else { "FAIL" }, i + 1, took.as_secs_f64());
        failed += usize::from(!pass);
    }
    println!("{} of {} criteria pass", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
