//! Remez exchange for the best odd-polynomial approximation of the constant 1
//! on a positive interval.
//!
//! The alternation system is not assembled in the raw monomial basis. Writing
//! `x = m + h s` with `m` the interval centre and `h` the half-width, the
//! residual `p(x) - 1` becomes a polynomial in `s in [-1, 1]` whose low Taylor
//! coefficients are the unknowns and whose high coefficients follow from the
//! odd structure through a fixed binomial map scaled by `rho = h / m`. The
//! system stays well conditioned even when the interval has shrunk to a few
//! ulps around 1, which is exactly where the late stages of a sequential
//! design live.

use serde::{Deserialize, Serialize};

use super::poly::{Interval, OddPolynomial, MAX_DEGREE};
use crate::error::{Error, Result};
use crate::small;

pub const DEFAULT_TOL: f64 = 1e-13;
pub const DEFAULT_MAX_ITER: usize = 100;

const SCAN_POINTS: usize = 64;
const GOLDEN_ITERS: usize = 60;
const BISECT_ITERS: usize = 200;

/// Residual `p(m + h s) - 1` expanded in powers of `s`.
///
/// `base` records the coefficients the expansion was computed from, so a
/// caller holding a modified polynomial can add the exact difference.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocalResidual {
    pub center: f64,
    pub half_width: f64,
    pub base: Vec<f64>,
    pub coeffs: Vec<f64>,
    /// Extremal points in the local coordinate; exact even when the interval
    /// is too narrow for the `x` values to resolve them.
    pub points: Vec<f64>,
}

impl LocalResidual {
    #[inline]
    pub fn eval(&self, s: f64) -> f64 {
        horner(&self.coeffs, s)
    }

    /// Residual of `poly` (not necessarily `base`) at local coordinate `s`.
    pub fn eval_for(&self, poly: &OddPolynomial, s: f64) -> f64 {
        let delta: Vec<f64> = poly
            .coeffs()
            .iter()
            .zip(self.base.iter().chain(std::iter::repeat(&0.0)))
            .map(|(c, b)| c - b)
            .collect();
        if delta.iter().all(|d| *d == 0.0) {
            return self.eval(s);
        }
        let shift = taylor_shift(&delta, self.center, self.half_width);
        self.eval(s) + horner(&shift, s)
    }

    /// Maps `x` to the local coordinate.
    #[inline]
    pub fn to_local(&self, x: f64) -> f64 {
        if self.half_width == 0.0 {
            0.0
        } else {
            (x - self.center) / self.half_width
        }
    }
}

/// Coefficients in `s` of `sum_j c_j (m + h s)^(2j+1)`.
fn taylor_shift(c: &[f64], m: f64, h: f64) -> Vec<f64> {
    let d = 2 * c.len() - 1;
    let mut out = vec![0.0; d + 1];
    for (j, &cj) in c.iter().enumerate() {
        let p = 2 * j + 1;
        for (kk, slot) in out.iter_mut().enumerate().take(p + 1) {
            *slot += cj * binomial(p, kk) * m.powi((p - kk) as i32) * h.powi(kk as i32);
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RemezResult {
    pub poly: OddPolynomial,
    /// Ascending, in `[lo, hi]`.
    pub extremal_points: Vec<f64>,
    pub levelled_error: f64,
    pub iterations: usize,
    pub local: LocalResidual,
}

#[inline]
fn horner(coeffs: &[f64], s: f64) -> f64 {
    coeffs.iter().rev().fold(0.0, |acc, &c| acc * s + c)
}

#[inline]
fn horner_derivative(coeffs: &[f64], s: f64) -> f64 {
    coeffs
        .iter()
        .enumerate()
        .skip(1)
        .rev()
        .fold(0.0, |acc, (k, &c)| acc * s + k as f64 * c)
}

fn binomial(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    let mut r = 1.0;
    for i in 0..k {
        r = r * (n - i) as f64 / (i + 1) as f64;
    }
    r
}

/// Binomial structure shared by every interval for a given degree.
struct OddTaylorMap {
    k: usize,
    /// `k x k`: high Taylor coefficients from low ones at unit centre.
    high_from_low: Vec<f64>,
    /// `k x k`: odd coefficients from low Taylor coefficients at unit centre.
    coeffs_from_low: Vec<f64>,
}

impl OddTaylorMap {
    fn new(degree: usize) -> Result<Self> {
        let k = degree.div_ceil(2);
        let b = |row: usize, j: usize| binomial(2 * j + 1, row);
        let lo: Vec<f64> = (0..k).flat_map(|r| (0..k).map(move |j| b(r, j))).collect();
        let mut lo_inv = small::invert(&lo, k)
            .ok_or_else(|| Error::InvalidArgument(format!("degree {degree} Taylor map is singular")))?;
        // Newton-Schulz refinement of the inverse, so that e.g. the degree-5
        // limit (15/8, -5/4, 3/8) comes out exact
        for _ in 0..2 {
            let mut resid = vec![0.0; k * k];
            for i in 0..k {
                for j in 0..k {
                    let bx: f64 = (0..k).map(|p| lo[i * k + p] * lo_inv[p * k + j]).sum();
                    resid[i * k + j] = if i == j { 1.0 - bx } else { -bx };
                }
            }
            let corr: Vec<f64> = (0..k * k)
                .map(|ij| (0..k).map(|p| lo_inv[(ij / k) * k + p] * resid[p * k + ij % k]).sum())
                .collect();
            for (x, c) in lo_inv.iter_mut().zip(corr) {
                *x += c;
            }
        }
        let mut high = vec![0.0; k * k];
        for r in 0..k {
            for q in 0..k {
                high[r * k + q] = (0..k).map(|j| b(k + r, j) * lo_inv[j * k + q]).sum();
            }
        }
        Ok(OddTaylorMap {
            k,
            high_from_low: high,
            coeffs_from_low: lo_inv,
        })
    }

    /// Full residual coefficients in `s` from the unknowns `w`.
    fn residual(&self, w: &[f64], rho: f64) -> Vec<f64> {
        let k = self.k;
        let mut a = vec![0.0; 2 * k];
        a[..k].copy_from_slice(w);
        for r in 0..k {
            let kk = k + r;
            let mut v = self.high_from_low[r * k] * rho.powi(kk as i32) * (1.0 + w[0]);
            for q in 1..k {
                v += self.high_from_low[r * k + q] * rho.powi((kk - q) as i32) * w[q];
            }
            a[kk] = v;
        }
        a
    }

    /// Basis value of unknown `q` at `s`, and the constant part.
    fn row(&self, s: f64, rho: f64) -> (Vec<f64>, f64) {
        let k = self.k;
        let mut psi = vec![0.0; k];
        let mut rest = 0.0;
        for r in 0..k {
            let kk = k + r;
            let sk = s.powi(kk as i32);
            rest += self.high_from_low[r * k] * rho.powi(kk as i32) * sk;
        }
        psi[0] = 1.0 + rest;
        for (q, slot) in psi.iter_mut().enumerate().skip(1) {
            let mut v = s.powi(q as i32);
            for r in 0..k {
                let kk = k + r;
                v += self.high_from_low[r * k + q] * rho.powi((kk - q) as i32) * s.powi(kk as i32);
            }
            *slot = v;
        }
        (psi, rest)
    }

    fn coefficients(&self, w: &[f64], m: f64, rho: f64) -> Vec<f64> {
        let k = self.k;
        (0..k)
            .map(|j| {
                let mut v = 0.0;
                for q in 0..k {
                    let wq = if q == 0 { 1.0 + w[0] } else { w[q] };
                    v += self.coeffs_from_low[j * k + q] * wq / rho.powi(q as i32);
                }
                v / m.powi((2 * j + 1) as i32)
            })
            .collect()
    }

    /// Odd polynomial with `p(m) = 1` and vanishing derivatives of order
    /// `1..k`, the limit of the minimax solution as the interval shrinks to a
    /// point.
    fn osculating(&self, m: f64) -> Vec<f64> {
        (0..self.k)
            .map(|j| self.coeffs_from_low[j * self.k] / m.powi((2 * j + 1) as i32))
            .collect()
    }
}

fn validate_degree(degree: usize) -> Result<()> {
    if degree % 2 == 0 || degree == 0 || degree > MAX_DEGREE {
        return Err(Error::InvalidArgument(format!(
            "degree must be odd and at most {MAX_DEGREE}, got {degree}"
        )));
    }
    Ok(())
}

/// Minimax odd polynomial of the given degree for the constant 1 on `interval`.
pub fn remez(interval: Interval, degree: usize, tol: f64, max_iter: usize) -> Result<RemezResult> {
    validate_degree(degree)?;
    if !(tol > 0.0) || max_iter == 0 {
        return Err(Error::InvalidArgument("remez needs tol > 0 and max_iter >= 1".into()));
    }
    let m = interval.center();
    let h = interval.half_width();
    if !(h > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "degenerate interval [{}, {}]: the alternation system is singular",
            interval.lo, interval.hi
        )));
    }
    let rho = h / m;
    let map = OddTaylorMap::new(degree)?;
    let k = map.k;

    let mut pts: Vec<f64> = (0..=k)
        .map(|i| -(std::f64::consts::PI * i as f64 / k as f64).cos())
        .collect();
    pts[0] = -1.0;
    pts[k] = 1.0;

    let mut last_movement = f64::INFINITY;
    let mut last_e = f64::NAN;
    for iter in 1..=max_iter {
        let (w, e) = solve_alternation(&map, &pts, rho, iter)?;
        let resid = map.residual(&w, rho);
        last_e = e.abs();

        let roots = sign_change_roots(&resid, &pts)?;
        let new_pts = locate_extrema(&resid, &roots);
        let movement = pts
            .iter()
            .zip(&new_pts)
            .fold(0.0_f64, |acc, (a, b)| acc.max((a - b).abs()));
        last_movement = movement;

        // Either the points have stopped moving, or the residual is already
        // levelled to rounding precision and further exchanges only chase noise.
        let peak = new_pts.iter().fold(0.0_f64, |acc, &s| acc.max(horner(&resid, s).abs()));
        let converged = movement < 2.0 * tol || peak <= e.abs() * (1.0 + 1e-14);
        let levelled = iter == max_iter && is_levelled(&resid, &new_pts, e.abs());
        if converged || levelled {
            let result_pts = if converged { &pts } else { &new_pts };
            let (w, e) = if converged {
                (w, e)
            } else {
                solve_alternation(&map, &new_pts, rho, iter)?
            };
            let resid = map.residual(&w, rho);
            let coeffs = map.coefficients(&w, m, rho);
            let poly = OddPolynomial::new(coeffs.clone())?;
            return Ok(RemezResult {
                poly,
                extremal_points: result_pts
                    .iter()
                    .map(|s| (m + h * s).clamp(interval.lo, interval.hi))
                    .collect(),
                levelled_error: e.abs(),
                iterations: iter,
                local: LocalResidual {
                    center: m,
                    half_width: h,
                    base: coeffs,
                    coeffs: resid,
                    points: result_pts.clone(),
                },
            });
        }
        pts = new_pts;
    }
    Err(Error::RemezNoConvergence {
        iterations: max_iter,
        movement: last_movement / 2.0,
        levelled_error: last_e,
    })
}

/// The limiting result on a point interval `[m, m]`: zero levelled error.
pub fn osculating_limit(center: f64, degree: usize) -> Result<RemezResult> {
    validate_degree(degree)?;
    if !(center > 0.0) || !center.is_finite() {
        return Err(Error::InvalidArgument(format!("centre must be positive, got {center}")));
    }
    let map = OddTaylorMap::new(degree)?;
    let coeffs = map.osculating(center);
    Ok(RemezResult {
        poly: OddPolynomial::new(coeffs.clone())?,
        extremal_points: vec![center; map.k + 1],
        levelled_error: 0.0,
        iterations: 0,
        local: LocalResidual {
            center,
            half_width: 0.0,
            base: coeffs,
            coeffs: vec![0.0; 2 * map.k],
            points: vec![0.0; map.k + 1],
        },
    })
}

fn solve_alternation(map: &OddTaylorMap, pts: &[f64], rho: f64, iteration: usize) -> Result<(Vec<f64>, f64)> {
    let k = map.k;
    let n = k + 1;
    let mut a = vec![0.0; n * n];
    let mut b = vec![0.0; n];
    for (i, &s) in pts.iter().enumerate() {
        let (psi, rest) = map.row(s, rho);
        a[i * n..i * n + k].copy_from_slice(&psi);
        a[i * n + k] = if i % 2 == 0 { -1.0 } else { 1.0 };
        // psi[0] already contains `rest` for the (1 + w0) factor; move the 1 over
        b[i] = -rest;
    }
    let x = small::solve(a, b, n).ok_or(Error::SingularSystem { iteration })?;
    Ok((x[..k].to_vec(), x[k]))
}

fn sign_change_roots(resid: &[f64], pts: &[f64]) -> Result<Vec<f64>> {
    let mut roots = Vec::with_capacity(pts.len() - 1);
    for pair in pts.windows(2) {
        let (mut lo, mut hi) = (pair[0], pair[1]);
        let mut flo = horner(resid, lo);
        let fhi = horner(resid, hi);
        if flo == 0.0 {
            roots.push(lo);
            continue;
        }
        if fhi == 0.0 {
            roots.push(hi);
            continue;
        }
        if flo.signum() == fhi.signum() {
            return Err(Error::NoSignChange { lo, hi });
        }
        for _ in 0..BISECT_ITERS {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            let fm = horner(resid, mid);
            if fm == 0.0 {
                lo = mid;
                hi = mid;
                break;
            }
            if fm.signum() == flo.signum() {
                lo = mid;
                flo = fm;
            } else {
                hi = mid;
            }
        }
        roots.push(0.5 * (lo + hi));
    }
    Ok(roots)
}

fn locate_extrema(resid: &[f64], roots: &[f64]) -> Vec<f64> {
    let mut bounds = Vec::with_capacity(roots.len() + 2);
    bounds.push(-1.0);
    bounds.extend_from_slice(roots);
    bounds.push(1.0);
    bounds.windows(2).map(|w| subinterval_max(resid, w[0], w[1])).collect()
}

/// Point of maximal |residual| on `[lo, hi]`: 64-point scan, golden-section
/// refinement around the best sample, then bisection on the derivative sign
/// when the refined bracket contains a stationary point.
fn subinterval_max(resid: &[f64], lo: f64, hi: f64) -> f64 {
    let abs_at = |s: f64| horner(resid, s).abs();
    if hi <= lo {
        return lo;
    }
    let step = (hi - lo) / (SCAN_POINTS - 1) as f64;
    let sample = |i: usize| if i == SCAN_POINTS - 1 { hi } else { lo + step * i as f64 };
    let (best_i, _) = (0..SCAN_POINTS)
        .map(|i| (i, abs_at(sample(i))))
        .fold(
            (0, f64::NEG_INFINITY),
            |acc, (i, v)| if v > acc.1 { (i, v) } else { acc },
        );

    let mut a = sample(best_i.saturating_sub(1));
    let mut b = sample((best_i + 1).min(SCAN_POINTS - 1));
    let mut best = sample(best_i);

    let invphi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - invphi * (b - a);
    let mut d = a + invphi * (b - a);
    let (mut fc, mut fd) = (abs_at(c), abs_at(d));
    for _ in 0..GOLDEN_ITERS {
        if b - a <= 4.0 * f64::EPSILON * (1.0 + a.abs().max(b.abs())) {
            break;
        }
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - invphi * (b - a);
            fc = abs_at(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + invphi * (b - a);
            fd = abs_at(d);
        }
    }
    let golden = if fc >= fd { c } else { d };
    if abs_at(golden) > abs_at(best) {
        best = golden;
    }

    // Polish with the derivative: the golden bracket is only sqrt(eps) sharp.
    let width = (b - a).max(step * 1e-3);
    let (mut pa, mut pb) = ((best - width).max(lo), (best + width).min(hi));
    let mut da = horner_derivative(resid, pa);
    let db = horner_derivative(resid, pb);
    if da.signum() != db.signum() && da != 0.0 && db != 0.0 {
        for _ in 0..BISECT_ITERS {
            let mid = 0.5 * (pa + pb);
            if mid <= pa || mid >= pb {
                break;
            }
            let dm = horner_derivative(resid, mid);
            if dm == 0.0 {
                pa = mid;
                pb = mid;
                break;
            }
            if dm.signum() == da.signum() {
                pa = mid;
                da = dm;
            } else {
                pb = mid;
            }
        }
        let polished = 0.5 * (pa + pb);
        if abs_at(polished) >= abs_at(best) {
            best = polished;
        }
    }
    for edge in [lo, hi] {
        if abs_at(edge) > abs_at(best) {
            best = edge;
        }
    }
    best
}

fn is_levelled(resid: &[f64], pts: &[f64], e: f64) -> bool {
    pts.iter().all(|&s| (horner(resid, s).abs() - e).abs() <= 1e-8 * e)
}

/// Outcome of re-verifying a Remez solution on a dense grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EquioscillationReport {
    pub pass: bool,
    pub levelled_error: f64,
    pub max_grid_error: f64,
    /// Largest excess of the grid maximum over `E`, never negative.
    pub worst_violation: f64,
    /// Largest `| |e(x_i)| - E |` over the extremal points.
    pub extremal_deviation: f64,
    pub alternates: bool,
    pub grid_points: usize,
}

pub const CHECK_GRID_POINTS: usize = 10_000;
const CHECK_REL_TOL: f64 = 1e-8;

/// Re-evaluates the residual of `result.poly` on a 10^4-point grid over
/// `interval` and at the extremal points.
pub fn equioscillation_check(result: &RemezResult, interval: Interval) -> EquioscillationReport {
    let local = &result.local;
    let e = result.levelled_error;
    let tol = CHECK_REL_TOL * e;
    let eval = |s: f64| local.eval_for(&result.poly, s);

    let (s_lo, s_span) = if local.half_width == 0.0 {
        (0.0, 0.0)
    } else {
        // The local model lives on [m - h, m + h], which can differ from the
        // stored endpoints by the rounding of m. Snap when that is all it is.
        let snap = 4.0 * f64::EPSILON * local.center.abs().max(1.0) / local.half_width;
        let mut s_lo = local.to_local(interval.lo);
        let mut s_hi = local.to_local(interval.hi);
        if (s_lo + 1.0).abs() <= snap {
            s_lo = -1.0;
        }
        if (s_hi - 1.0).abs() <= snap {
            s_hi = 1.0;
        }
        (s_lo, s_hi - s_lo)
    };
    let n = CHECK_GRID_POINTS;
    let mut max_grid = 0.0_f64;
    for i in 0..n {
        let s = s_lo + s_span * i as f64 / (n - 1) as f64;
        max_grid = max_grid.max(eval(s).abs());
    }

    let values: Vec<f64> = if local.points.len() == result.extremal_points.len() {
        local.points.iter().map(|&s| eval(s)).collect()
    } else {
        result
            .extremal_points
            .iter()
            .map(|&x| eval(local.to_local(x)))
            .collect()
    };
    let extremal_deviation = values.iter().fold(0.0_f64, |m, v| m.max((v.abs() - e).abs()));
    let alternates = e == 0.0
        || values
            .windows(2)
            .all(|w| w[0].signum() != w[1].signum() && w[0] != 0.0 && w[1] != 0.0);
    let worst_violation = (max_grid - e).max(0.0);
    EquioscillationReport {
        pass: worst_violation <= tol && extremal_deviation <= tol && alternates,
        levelled_error: e,
        max_grid_error: max_grid,
        worst_violation,
        extremal_deviation,
        alternates,
        grid_points: n,
    }
}
