//! Projection accuracy benchmark over dataset families and methods.

use std::fmt::Write as _;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::datasets::DatasetSpec;
use crate::densemat::{eig_project, rel_error_against, GemmCounter, PrecisionMode, SymmetricMatrix};
use crate::design::CompositeFilter;
use crate::error::{Error, Result};
use crate::golden;
use crate::projection::{gemm_count_of, newton_schulz_filter, project_psd, ProjectionConfig};

/// A projection method under test.
#[derive(Debug, Clone, PartialEq)]
pub enum Method {
    /// Refined half filter in emulated binary16 with half-style rescaling.
    CompositeHalf,
    /// Refined single filter in binary32 with single-style rescaling.
    CompositeSingle,
    /// `k` Newton-Schulz steps in binary32.
    NewtonSchulz(usize),
    /// f64 eigendecomposition; the reference itself.
    EigOracle,
}

impl Method {
    pub fn name(&self) -> String {
        match self {
            Method::CompositeHalf => "composite-half".into(),
            Method::CompositeSingle => "composite-single".into(),
            Method::NewtonSchulz(k) => format!("newton-schulz-{k}"),
            Method::EigOracle => "eig-oracle".into(),
        }
    }

    /// Projection settings, or `None` for the oracle.
    pub fn config(&self) -> Result<Option<ProjectionConfig>> {
        Ok(match self {
            Method::CompositeHalf => Some(ProjectionConfig::half(golden::half_refined())),
            Method::CompositeSingle => Some(ProjectionConfig::single(golden::single_refined())),
            Method::NewtonSchulz(k) => Some(
                ProjectionConfig::new(newton_schulz_filter(*k)?, PrecisionMode::F32)
                    .with_stabilization(crate::projection::Stabilization::None),
            ),
            Method::EigOracle => None,
        })
    }

    pub fn filter(&self) -> Result<Option<CompositeFilter>> {
        Ok(self.config()?.map(|c| c.filter))
    }
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "composite-half" => Ok(Method::CompositeHalf),
            "composite-single" => Ok(Method::CompositeSingle),
            "eig-oracle" => Ok(Method::EigOracle),
            other => other
                .strip_prefix("newton-schulz-")
                .and_then(|k| k.parse().ok())
                .filter(|k: &usize| *k > 0)
                .map(Method::NewtonSchulz)
                .ok_or_else(|| Error::InvalidArgument(format!("unknown method '{other}'"))),
        }
    }
}

impl Serialize for Method {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.name())
    }
}

impl<'de> Deserialize<'de> for Method {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkRow {
    pub dataset: String,
    pub n: usize,
    pub method: String,
    pub rel_error: f64,
    pub gemm_count: usize,
    /// Mean over the suite's runs; informational only.
    pub wall_ms: f64,
    pub seed: u64,
}

/// Datasets crossed with methods. When `seeds` is given every dataset is
/// repeated once per seed, overriding its own.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchSuite {
    pub datasets: Vec<DatasetSpec>,
    pub methods: Vec<Method>,
    #[serde(default)]
    pub seeds: Option<Vec<u64>>,
    #[serde(default = "default_runs")]
    pub runs: usize,
}

fn default_runs() -> usize {
    5
}

impl BenchSuite {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    fn expanded(&self) -> Vec<DatasetSpec> {
        match &self.seeds {
            None => self.datasets.clone(),
            Some(seeds) => self
                .datasets
                .iter()
                .flat_map(|d| seeds.iter().map(move |&seed| DatasetSpec { seed, ..d.clone() }))
                .collect(),
        }
    }
}

/// One row: relative error against the eigendecomposition reference.
pub fn bench_one(spec: &DatasetSpec, method: &Method, runs: usize) -> Result<BenchmarkRow> {
    let x = spec.generate()?;
    let reference = eig_project(&x)?;
    bench_matrix(&spec.label(), spec.seed, &x, &reference, method, runs)
}

fn bench_matrix(
    dataset: &str,
    seed: u64,
    x: &SymmetricMatrix,
    reference: &SymmetricMatrix,
    method: &Method,
    runs: usize,
) -> Result<BenchmarkRow> {
    let runs = runs.max(1);
    let config = method.config()?;
    let mut out = None;
    let mut gemms = 0;
    let start = Instant::now();
    for _ in 0..runs {
        let counter = GemmCounter::new();
        let guard = counter.install();
        let p = match &config {
            Some(cfg) => project_psd(x, cfg)?.0,
            None => eig_project(x)?,
        };
        drop(guard);
        gemms = counter.count();
        out = Some(p);
    }
    let wall_ms = start.elapsed().as_secs_f64() * 1e3 / runs as f64;
    let p = out.expect("at least one run");
    if let Some(cfg) = &config {
        debug_assert!(gemms == gemm_count_of(&cfg.filter) || x.frobenius_norm() == 0.0);
    }
    Ok(BenchmarkRow {
        dataset: dataset.to_string(),
        n: x.n(),
        method: method.name(),
        rel_error: rel_error_against(&p, reference)?,
        gemm_count: gemms,
        wall_ms,
        seed,
    })
}

/// Runs the suite across the rayon pool. Rows come back ordered by
/// (dataset, method, seed) regardless of scheduling.
pub fn run_suite(suite: &BenchSuite) -> Result<Vec<BenchmarkRow>> {
    let datasets = suite.expanded();
    let prepared = datasets
        .par_iter()
        .map(|d| {
            let x = d.generate()?;
            let r = eig_project(&x)?;
            Ok((d, x, r))
        })
        .collect::<Result<Vec<_>>>()?;
    let tasks: Vec<(usize, &Method)> = (0..prepared.len())
        .flat_map(|i| suite.methods.iter().map(move |m| (i, m)))
        .collect();
    let mut rows = tasks
        .par_iter()
        .map(|&(i, m)| {
            let (d, x, r) = &prepared[i];
            bench_matrix(&d.label(), d.seed, x, r, m, suite.runs)
        })
        .collect::<Result<Vec<_>>>()?;
    rows.sort_by(|a, b| {
        (a.dataset.as_str(), a.method.as_str(), a.seed).cmp(&(b.dataset.as_str(), b.method.as_str(), b.seed))
    });
    Ok(rows)
}

pub fn rows_to_csv(rows: &[BenchmarkRow]) -> String {
    let mut out = String::from("dataset,n,method,rel_error,gemm_count,wall_ms,seed\n");
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{:e},{},{:.3},{}",
            r.dataset, r.n, r.method, r.rel_error, r.gemm_count, r.wall_ms, r.seed
        );
    }
    out
}

/// Median of a non-empty slice.
pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let k = v.len();
    if k % 2 == 1 {
        v[k / 2]
    } else {
        0.5 * (v[k / 2 - 1] + v[k / 2])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn method_names_roundtrip() {
        for m in [
            Method::CompositeHalf,
            Method::CompositeSingle,
            Method::NewtonSchulz(15),
            Method::EigOracle,
        ] {
            assert_eq!(m.name().parse::<Method>().unwrap(), m);
        }
        assert!("newton-schulz-0".parse::<Method>().is_err());
    }

    #[test]
    fn median_even_and_odd() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), 2.5);
    }
}
