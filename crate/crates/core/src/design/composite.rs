use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::poly::{Interval, OddPolynomial};
use super::remez::{osculating_limit, remez, RemezResult, DEFAULT_MAX_ITER, DEFAULT_TOL};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    MinimaxStage1,
    Refined,
    NewtonSchulz,
    UserSupplied,
}

impl Provenance {
    pub fn as_str(&self) -> &'static str {
        match self {
            Provenance::MinimaxStage1 => "minimax_stage1",
            Provenance::Refined => "refined",
            Provenance::NewtonSchulz => "newton_schulz",
            Provenance::UserSupplied => "user_supplied",
        }
    }
}

impl FromStr for Provenance {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "minimax_stage1" | "minimaxstage1" | "stage1" => Ok(Provenance::MinimaxStage1),
            "refined" => Ok(Provenance::Refined),
            "newton_schulz" | "newtonschulz" => Ok(Provenance::NewtonSchulz),
            "user_supplied" | "usersupplied" | "user" => Ok(Provenance::UserSupplied),
            other => Err(Error::Format(format!("unknown provenance '{other}'"))),
        }
    }
}

/// `f_T o ... o f_1`, applied in order `stages[0]` first.
#[derive(Debug, Clone, PartialEq)]
pub struct CompositeFilter {
    pub stages: Vec<OddPolynomial>,
    pub epsilon: f64,
    /// One interval per stage; empty when unknown (third-party coefficients).
    pub design_intervals: Vec<Interval>,
    pub provenance: Provenance,
}

impl CompositeFilter {
    pub fn new(stages: Vec<OddPolynomial>, epsilon: f64, provenance: Provenance) -> Result<Self> {
        if stages.is_empty() {
            return Err(Error::InvalidArgument("a composite filter needs T >= 1 stages".into()));
        }
        if !(epsilon > 0.0 && epsilon < 1.0) {
            return Err(Error::InvalidArgument(format!(
                "epsilon must lie in (0, 1), got {epsilon}"
            )));
        }
        Ok(CompositeFilter {
            stages,
            epsilon,
            design_intervals: Vec::new(),
            provenance,
        })
    }

    pub fn from_coefficients(stages: &[Vec<f64>], epsilon: f64, provenance: Provenance) -> Result<Self> {
        let polys = stages
            .iter()
            .map(|c| OddPolynomial::new(c.clone()))
            .collect::<Result<Vec<_>>>()?;
        Self::new(polys, epsilon, provenance)
    }

    pub fn len(&self) -> usize {
        self.stages.len()
    }

    pub fn is_empty(&self) -> bool {
        self.stages.is_empty()
    }

    pub fn degrees(&self) -> Vec<usize> {
        self.stages.iter().map(OddPolynomial::degree).collect()
    }

    pub fn num_coefficients(&self) -> usize {
        self.stages.iter().map(|s| s.coeffs().len()).sum()
    }

    /// Stage coefficients concatenated stage-major.
    pub fn flat_coefficients(&self) -> Vec<f64> {
        self.stages.iter().flat_map(|s| s.coeffs().iter().copied()).collect()
    }

    pub fn set_flat_coefficients(&mut self, flat: &[f64]) {
        assert_eq!(flat.len(), self.num_coefficients(), "coefficient count");
        let mut it = flat.iter();
        for stage in &mut self.stages {
            for c in stage.coeffs_mut() {
                *c = *it.next().expect("length checked");
            }
        }
    }

    /// The inner chain `f_T(...f_1(x))`.
    #[inline]
    pub fn sign_chain(&self, x: f64) -> f64 {
        self.stages.iter().fold(x, |y, f| f.eval(y))
    }

    pub fn coefficient_rows(&self) -> Vec<Vec<f64>> {
        self.stages.iter().map(|s| s.coeffs().to_vec()).collect()
    }

    pub fn to_json(&self) -> String {
        let mut out = String::from("{\n");
        let _ = writeln!(out, "  \"epsilon\": {},", fmt17(self.epsilon));
        let _ = writeln!(out, "  \"T\": {},", self.stages.len());
        let degrees: Vec<String> = self.degrees().iter().map(usize::to_string).collect();
        let _ = writeln!(out, "  \"degrees\": [{}],", degrees.join(", "));
        out.push_str("  \"stages\": [\n");
        for (i, s) in self.stages.iter().enumerate() {
            let cs: Vec<String> = s.coeffs().iter().map(|&c| fmt17(c)).collect();
            let sep = if i + 1 == self.stages.len() { "" } else { "," };
            let _ = writeln!(out, "    [{}]{}", cs.join(", "), sep);
        }
        out.push_str("  ],\n");
        if !self.design_intervals.is_empty() {
            out.push_str("  \"design_intervals\": [\n");
            for (i, iv) in self.design_intervals.iter().enumerate() {
                let sep = if i + 1 == self.design_intervals.len() { "" } else { "," };
                let _ = writeln!(out, "    [{}, {}]{}", fmt17(iv.lo), fmt17(iv.hi), sep);
            }
            out.push_str("  ],\n");
        }
        let _ = writeln!(out, "  \"provenance\": \"{}\"", self.provenance.as_str());
        out.push_str("}\n");
        out
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: CoefficientFile = serde_json::from_str(text)?;
        file.into_filter()
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_json())?;
        Ok(())
    }
}

/// 17 significant digits: enough to round-trip any f64.
fn fmt17(v: f64) -> String {
    format!("{v:.16e}")
}

#[derive(Debug, Deserialize)]
struct CoefficientFile {
    epsilon: f64,
    #[serde(rename = "T")]
    t: usize,
    degrees: Vec<usize>,
    stages: Vec<Vec<f64>>,
    #[serde(default)]
    provenance: Option<String>,
    #[serde(default)]
    design_intervals: Option<Vec<[f64; 2]>>,
}

impl CoefficientFile {
    fn into_filter(self) -> Result<CompositeFilter> {
        if self.t != self.stages.len() || self.t != self.degrees.len() {
            return Err(Error::Format(format!(
                "T = {} but {} stages and {} degrees",
                self.t,
                self.stages.len(),
                self.degrees.len()
            )));
        }
        for (i, (d, s)) in self.degrees.iter().zip(&self.stages).enumerate() {
            if d % 2 == 0 || d.div_ceil(2) != s.len() {
                return Err(Error::Format(format!(
                    "stage {i}: degree {d} does not match {} coefficients",
                    s.len()
                )));
            }
        }
        let provenance = match self.provenance {
            Some(p) => p.parse()?,
            None => Provenance::UserSupplied,
        };
        let mut filter = CompositeFilter::from_coefficients(&self.stages, self.epsilon, provenance)?;
        if let Some(ivs) = self.design_intervals {
            filter.design_intervals = ivs
                .iter()
                .map(|[lo, hi]| Interval::new(*lo, *hi))
                .collect::<Result<_>>()?;
        }
        Ok(filter)
    }
}

/// Range of `poly` over `interval`: endpoints plus interior critical points.
pub fn interval_image(poly: &OddPolynomial, interval: Interval) -> Interval {
    let mut lo = poly.eval(interval.lo).min(poly.eval(interval.hi));
    let mut hi = poly.eval(interval.lo).max(poly.eval(interval.hi));
    for x in critical_points(poly, interval) {
        let v = poly.eval(x);
        lo = lo.min(v);
        hi = hi.max(v);
    }
    Interval { lo, hi }
}

fn critical_points(poly: &OddPolynomial, interval: Interval) -> Vec<f64> {
    let c = poly.coeffs();
    let inside = |x: f64| x > interval.lo && x < interval.hi;
    let from_u = |us: Vec<f64>| -> Vec<f64> {
        us.into_iter()
            .filter(|u| *u > 0.0 && u.is_finite())
            .map(f64::sqrt)
            .filter(|x| inside(*x))
            .collect()
    };
    match c.len() {
        1 => Vec::new(),
        2 => {
            // c1 + 3 c3 u = 0
            if c[1] == 0.0 {
                Vec::new()
            } else {
                from_u(vec![-c[0] / (3.0 * c[1])])
            }
        }
        3 => {
            // 5 c5 u^2 + 3 c3 u + c1 = 0
            let (a, b, cc) = (5.0 * c[2], 3.0 * c[1], c[0]);
            if a == 0.0 {
                return if b == 0.0 { Vec::new() } else { from_u(vec![-cc / b]) };
            }
            let disc = b * b - 4.0 * a * cc;
            if disc < 0.0 {
                return Vec::new();
            }
            let q = -0.5 * (b + b.signum() * disc.sqrt());
            let mut us = Vec::new();
            if q != 0.0 {
                us.push(q / a);
                us.push(cc / q);
            } else {
                us.push(0.0);
            }
            from_u(us)
        }
        _ => derivative_roots(poly, interval),
    }
}

fn derivative_roots(poly: &OddPolynomial, interval: Interval) -> Vec<f64> {
    const SCAN: usize = 512;
    let step = interval.width() / SCAN as f64;
    let mut roots = Vec::new();
    if step == 0.0 {
        return roots;
    }
    let mut a = interval.lo;
    let mut da = poly.derivative(a);
    for i in 1..=SCAN {
        let b = if i == SCAN {
            interval.hi
        } else {
            interval.lo + step * i as f64
        };
        let db = poly.derivative(b);
        if da == 0.0 {
            roots.push(a);
        } else if da.signum() != db.signum() && db != 0.0 {
            let (mut lo, mut hi, mut dlo) = (a, b, da);
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if mid <= lo || mid >= hi {
                    break;
                }
                let dm = poly.derivative(mid);
                if dm.signum() == dlo.signum() {
                    lo = mid;
                    dlo = dm;
                } else {
                    hi = mid;
                }
            }
            roots.push(0.5 * (lo + hi));
        }
        a = b;
        da = db;
    }
    roots
}

/// Everything produced by a sequential design run.
#[derive(Debug, Clone)]
pub struct SequentialDesign {
    pub filter: CompositeFilter,
    pub results: Vec<RemezResult>,
    /// `T + 1` intervals: the design interval of each stage and the final image.
    pub intervals: Vec<Interval>,
    /// `1 - a_{T+1}`.
    pub sign_error: f64,
}

/// Greedy stage-by-stage minimax design starting from `[epsilon, 1]`.
pub fn sequential_remez(t: usize, degrees: &[usize], epsilon: f64) -> Result<CompositeFilter> {
    Ok(sequential_remez_report(t, degrees, epsilon)?.filter)
}

pub fn sequential_remez_report(t: usize, degrees: &[usize], epsilon: f64) -> Result<SequentialDesign> {
    if t == 0 {
        return Err(Error::InvalidArgument("T must be at least 1".into()));
    }
    if degrees.len() != t {
        return Err(Error::InvalidArgument(format!(
            "{} degrees given for T = {t}",
            degrees.len()
        )));
    }
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "epsilon must lie in (0, 1), got {epsilon}"
        )));
    }
    let mut interval = Interval::new(epsilon, 1.0)?;
    let mut intervals = vec![interval];
    let mut results = Vec::with_capacity(t);
    for (stage, &d) in degrees.iter().enumerate() {
        // A shrunken interval can collapse to a single float; the minimax
        // problem then degenerates to its osculating limit.
        let result = if interval.lo == interval.hi {
            osculating_limit(interval.lo, d)
        } else {
            remez(interval, d, DEFAULT_TOL, DEFAULT_MAX_ITER)
        }
        .map_err(|e| e.at_stage(stage))?;
        let image = interval_image(&result.poly, interval);
        interval = Interval::new(image.lo, image.hi).map_err(|e| e.at_stage(stage))?;
        intervals.push(interval);
        results.push(result);
    }
    let stages = results.iter().map(|r| r.poly.clone()).collect();
    let mut filter = CompositeFilter::new(stages, epsilon, Provenance::MinimaxStage1)?;
    filter.design_intervals = intervals[..t].to_vec();
    Ok(SequentialDesign {
        filter,
        results,
        sign_error: 1.0 - intervals[t].lo,
        intervals,
    })
}
