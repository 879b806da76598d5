//! Parsing of function ids, polynomials, complex lists and radius grids.

use anyhow::{anyhow, bail, Result};
use clap::ValueEnum;
use nevlab::algmap::TargetValue;
use nevlab::constructor::{
    corpus, corpus_entry, CorpusEntry, OrbitFamily, FIGURE1_LEFT_GENERATIONS, FIGURE1_RIGHT_GENERATIONS,
};
use nevlab::nevanlinna::log_spaced;
use nevlab::poly::parse_complex;
use nevlab::{Complex64, FunctionExpr, Polynomial};
use serde::{Deserialize, Serialize};

pub const DEFAULT_COUNT: usize = 50;
pub const DEFAULT_TOL: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Figure {
    Left,
    Right,
}

impl Figure {
    pub fn default_generations(self) -> usize {
        match self {
            Figure::Left => FIGURE1_LEFT_GENERATIONS,
            Figure::Right => FIGURE1_RIGHT_GENERATIONS,
        }
    }

    pub fn family(self, generations: usize) -> Result<OrbitFamily> {
        Ok(match self {
            Figure::Left => OrbitFamily::figure1_left(generations)?,
            Figure::Right => OrbitFamily::figure1_right(generations)?,
        })
    }
}

pub fn member(id: &str) -> Result<CorpusEntry> {
    corpus_entry(id).ok_or_else(|| {
        let ids: Vec<String> = corpus().into_iter().map(|e| e.id).collect();
        anyhow!("unknown function id `{id}`; known ids: {}", ids.join(", "))
    })
}

/// `all` or a comma-separated list of corpus ids.
pub fn members(spec: &str) -> Result<Vec<CorpusEntry>> {
    if spec.trim() == "all" {
        return Ok(corpus());
    }
    spec.split(',').map(|s| member(s.trim())).collect()
}

/// A corpus member, optionally composed with a polynomial.
pub fn function(id: &str, compose: Option<&str>) -> Result<(FunctionExpr, CorpusEntry)> {
    let e = member(id)?;
    let f = match compose {
        Some(p) => FunctionExpr::compose(e.expr.clone(), poly(p)?),
        None => e.expr.clone(),
    };
    Ok((f, e))
}

pub fn poly(s: &str) -> Result<Polynomial> {
    s.parse::<Polynomial>().map_err(|e| anyhow!("bad polynomial `{s}`: {e}"))
}

pub fn complex(s: &str) -> Result<Complex64> {
    parse_complex(s.trim()).map_err(|e| anyhow!("bad complex number `{s}`: {e}"))
}

pub fn complex_list(s: &str) -> Result<Vec<Complex64>> {
    s.split(',').map(complex).collect()
}

pub fn targets(s: &str) -> Result<Vec<TargetValue>> {
    s.split(',').map(|t| t.trim().parse::<TargetValue>().map_err(|e| anyhow!("bad value `{t}`: {e}"))).collect()
}

/// Explicit radii if given, otherwise `count` log-spaced radii on `[rmin, rmax]`.
pub fn grid(radii: Option<&str>, rmin: f64, rmax: f64, count: usize) -> Result<Vec<f64>> {
    if let Some(list) = radii {
        let rs = list
            .split(',')
            .map(|t| t.trim().parse::<f64>().map_err(|e| anyhow!("bad radius `{t}`: {e}")))
            .collect::<Result<Vec<_>>>()?;
        if rs.is_empty() || rs.iter().any(|r| !(*r > 0.0)) {
            bail!("radii must be positive");
        }
        return Ok(rs);
    }
    if !(rmin > 0.0 && rmax >= rmin) || count == 0 {
        bail!("need 0 < rmin <= rmax and count >= 1");
    }
    Ok(log_spaced(rmin, rmax, count))
}
