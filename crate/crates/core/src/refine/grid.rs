use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GridScheme {
    Uniform,
    Chebyshev,
    Mixed,
}

/// Sorted sample abscissae in `[-1, 1]`, always containing `-1`, `0` and `1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleGrid {
    points: Vec<f64>,
    scheme: GridScheme,
}

/// Smallest magnitude of the log-spaced part of a mixed grid. Below this the
/// ReLU error is bounded by `|x|` and no longer informative.
pub const MIXED_LOG_FLOOR: f64 = 1e-7;

impl SampleGrid {
    pub fn new(points: Vec<f64>, scheme: GridScheme) -> Result<Self> {
        if points.iter().any(|x| !x.is_finite() || x.abs() > 1.0) {
            return Err(Error::InvalidArgument("grid points must lie in [-1, 1]".into()));
        }
        let mut points = points;
        points.extend_from_slice(&[-1.0, 0.0, 1.0]);
        points.sort_by(f64::total_cmp);
        points.dedup();
        // -0.0 and 0.0 compare equal under total_cmp only by bits; keep one
        points.dedup_by(|a, b| a == b);
        Ok(SampleGrid { points, scheme })
    }

    /// `n` equispaced points on `[-1, 1]`.
    pub fn uniform(n: usize) -> Result<Self> {
        check_size(n)?;
        Self::new(linspace(n), GridScheme::Uniform)
    }

    /// `n` Chebyshev extrema `cos(pi k / (n-1))`, clustered at the ends.
    pub fn chebyshev(n: usize) -> Result<Self> {
        check_size(n)?;
        Self::new(chebyshev_points(n), GridScheme::Chebyshev)
    }

    /// Equal thirds of equispaced points, Chebyshev extrema and log-spaced
    /// magnitudes in `[1e-7, 1]` of both signs.
    ///
    /// The log-spaced third resolves the transition region around the
    /// design epsilon, where the error of a minimax filter peaks but where a
    /// purely uniform or Chebyshev grid places only a handful of points.
    pub fn mixed(n: usize) -> Result<Self> {
        check_size(n)?;
        let third = (n / 3).max(2);
        let mut pts = linspace(third);
        pts.extend(chebyshev_points(third));
        let half = ((n - 2 * third) / 2).max(1);
        let (lo, hi) = (MIXED_LOG_FLOOR.ln(), 0.0_f64);
        for i in 0..half {
            let t = if half == 1 { 1.0 } else { i as f64 / (half - 1) as f64 };
            let x = (lo + (hi - lo) * t).exp();
            pts.push(x);
            pts.push(-x);
        }
        Self::new(pts, GridScheme::Mixed)
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn scheme(&self) -> GridScheme {
        self.scheme
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

fn check_size(n: usize) -> Result<()> {
    if n < 2 {
        return Err(Error::InvalidArgument(format!("grid size must be at least 2, got {n}")));
    }
    Ok(())
}

fn linspace(n: usize) -> Vec<f64> {
    (0..n).map(|i| -1.0 + 2.0 * i as f64 / (n - 1) as f64).collect()
}

fn chebyshev_points(n: usize) -> Vec<f64> {
    (0..n)
        .map(|k| (std::f64::consts::PI * k as f64 / (n - 1) as f64).cos())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grids_contain_anchors() {
        for g in [
            SampleGrid::uniform(10).unwrap(),
            SampleGrid::chebyshev(10).unwrap(),
            SampleGrid::mixed(100).unwrap(),
        ] {
            let p = g.points();
            assert!(p.contains(&-1.0) && p.contains(&0.0) && p.contains(&1.0));
            assert!(p.windows(2).all(|w| w[0] < w[1]));
        }
        assert!(SampleGrid::uniform(1).is_err());
        assert!(SampleGrid::new(vec![1.5], GridScheme::Uniform).is_err());
    }

    #[test]
    fn mixed_reaches_small_magnitudes() {
        let g = SampleGrid::mixed(3000).unwrap();
        let small = g.points().iter().filter(|x| x.abs() > 0.0 && x.abs() < 1e-3).count();
        assert!(small > 500);
    }
}
