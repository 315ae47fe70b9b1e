//! Adam on the flattened coefficient vector against the minimax ReLU loss.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::eval::relu_loss;
use super::grid::SampleGrid;
use super::kernel::{self, Trace};
use crate::design::{CompositeFilter, Provenance};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Smoothing {
    /// `p`-norm surrogate; `p` doubles from `p_start` to `p_end` in equal
    /// phases over the iterations preceding the hard-max tail.
    PNorm { p_start: f64, p_end: f64 },
    /// Subgradient at the current argmax throughout.
    HardMaxSubgradient,
}

impl Default for Smoothing {
    fn default() -> Self {
        Smoothing::PNorm {
            p_start: 8.0,
            p_end: 512.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RefineConfig {
    pub grid: SampleGrid,
    pub max_iters: usize,
    /// Initial Adam step; decays geometrically to `step_size * final_step_ratio`.
    pub step_size: f64,
    pub final_step_ratio: f64,
    pub smoothing: Smoothing,
    /// Iterations at the end that always use the hard-max subgradient.
    pub hard_max_tail: usize,
    /// Seeds the per-iteration jitter of the training points.
    pub seed: u64,
    /// Relative jitter applied to each grid point every iteration, as a
    /// fraction of its distance to the neighbouring point. Zero disables it.
    pub jitter: f64,
    /// Adam denominator offset.
    pub adam_eps: f64,
    /// Share one second-moment estimate across all coefficients, so steps
    /// follow the gradient direction instead of its per-coordinate sign.
    pub shared_second_moment: bool,
}

pub const DEFAULT_GRID_SIZE: usize = 65_536;
pub const DEFAULT_MAX_ITERS: usize = 100_000;
pub const DEFAULT_STEP: f64 = 1e-5;

/// Iterations between full passes over the grid. In between, only points
/// whose error was within reach of the peak are evaluated.
const ACTIVE_REFRESH: usize = 16;
/// Points are kept active down to this fraction of the weight cut-off, so
/// errors that grow between refreshes are still seen.
const ACTIVE_MARGIN: f64 = 1.0;
/// A peak error this many times the best loss so far means the chain has
/// left its basin; the run steps back to the best iterate.
const BLOWUP: f64 = 100.0;
/// Step halvings allowed before the run is declared diverged.
const MAX_RESTARTS: usize = 20;
/// Evenly spaced grid points evaluated on every iteration regardless, as a
/// tripwire for errors that grow from nothing (a chain leaving its basin of
/// attraction near `|x| = 1`, say).
const TRIPWIRE_POINTS: usize = 512;

impl RefineConfig {
    pub fn new(grid: SampleGrid) -> Self {
        RefineConfig {
            grid,
            max_iters: DEFAULT_MAX_ITERS,
            step_size: DEFAULT_STEP,
            final_step_ratio: 0.1,
            smoothing: Smoothing::default(),
            hard_max_tail: 1_000,
            seed: 0,
            jitter: 0.0,
            adam_eps: 1e-30,
            shared_second_moment: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.step_size > 0.0) || !self.step_size.is_finite() {
            return Err(Error::InvalidArgument("step_size must be positive".into()));
        }
        if !(self.final_step_ratio > 0.0 && self.final_step_ratio <= 1.0) {
            return Err(Error::InvalidArgument("final_step_ratio must lie in (0, 1]".into()));
        }
        if let Smoothing::PNorm { p_start, p_end } = self.smoothing {
            if !(p_start >= 1.0 && p_end >= p_start) {
                return Err(Error::InvalidArgument("p schedule needs 1 <= p_start <= p_end".into()));
            }
        }
        if !(0.0..=0.5).contains(&self.jitter) {
            return Err(Error::InvalidArgument("jitter must lie in [0, 0.5]".into()));
        }
        Ok(())
    }
}

impl Default for RefineConfig {
    fn default() -> Self {
        Self::new(SampleGrid::mixed(DEFAULT_GRID_SIZE).expect("default grid"))
    }
}

#[derive(Debug, Clone)]
pub struct RefineOutcome {
    pub filter: CompositeFilter,
    pub initial_loss: f64,
    pub final_loss: f64,
    pub final_argmax: f64,
    pub iterations: usize,
    /// Iteration at which the returned coefficients were seen (0 = input).
    pub best_iteration: usize,
    /// A non-finite loss stopped the run early.
    pub diverged: bool,
}

/// Refines `filter` and returns the coefficients with the smallest grid loss
/// seen, which is never worse than the input.
pub fn refine(filter: &CompositeFilter, config: &RefineConfig) -> Result<CompositeFilter> {
    Ok(refine_with_report(filter, config)?.filter)
}

pub fn refine_with_report(filter: &CompositeFilter, config: &RefineConfig) -> Result<RefineOutcome> {
    config.validate()?;
    if config.max_iters == 0 {
        let (loss, arg) = relu_loss(filter, &config.grid);
        return Ok(RefineOutcome {
            filter: filter.clone(),
            initial_loss: loss,
            final_loss: loss,
            final_argmax: arg,
            iterations: 0,
            best_iteration: 0,
            diverged: false,
        });
    }
    let points = config.grid.points();
    let n_params = filter.num_coefficients();

    let mut work = filter.clone();
    let mut theta = filter.flat_coefficients();
    let (initial_loss, initial_arg) = relu_loss(filter, &config.grid);
    let mut best = (initial_loss, initial_arg, theta.clone(), 0usize);

    let mut m = vec![0.0; n_params];
    let mut v = vec![0.0; n_params];
    let (beta1, beta2, adam_eps): (f64, f64, f64) = (0.9, 0.999, config.adam_eps);
    let mut grad = vec![0.0; n_params];
    let mut full_errs = vec![0.0; points.len()];
    let mut active: Vec<usize> = Vec::new();
    let mut sample: Vec<f64> = Vec::new();
    let mut errs: Vec<f64> = Vec::new();
    let mut trace = Trace::default();
    let mut rows = work.coefficient_rows();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);

    let tail_start = config.max_iters.saturating_sub(config.hard_max_tail);
    let schedule = match config.smoothing {
        Smoothing::PNorm { p_start, p_end } => Some(p_schedule(p_start, p_end)),
        Smoothing::HardMaxSubgradient => None,
    };
    let decay = config.final_step_ratio.powf(1.0 / config.max_iters.max(1) as f64);

    let mut diverged = false;
    let mut iterations = 0;
    let mut step = config.step_size;
    let mut last_p = None;
    let mut refresh_peak = 0.0_f64;
    let mut force_refresh = false;
    let mut adam_t = 0u32;
    let mut restarts = 0;
    // Back to the best iterate with fresh moments and half the step.
    macro_rules! restart {
        () => {
            restarts += 1;
            log::debug!("iter {iterations}: error blew up, restarting from the best iterate");
            theta.copy_from_slice(&best.2);
            m.fill(0.0);
            v.fill(0.0);
            adam_t = 0;
            step *= 0.5;
            work.set_flat_coefficients(&theta);
            rows = work.coefficient_rows();
            force_refresh = true;
        };
    }
    for it in 0..config.max_iters {
        iterations = it + 1;
        let p = match (&schedule, it >= tail_start) {
            (Some(phases), false) => Some(phases[(it * phases.len()) / tail_start.max(1)]),
            _ => None,
        };

        // Full pass over the grid: tracks the best iterate and picks the
        // points that can carry gradient weight until the next refresh.
        if it % ACTIVE_REFRESH == 0 || p != last_p || force_refresh {
            kernel::errors(&rows, points, &mut full_errs);
            let peak = full_errs.iter().fold(0.0_f64, |a, e| a.max(e.abs()));
            if !(peak <= BLOWUP * best.0) {
                if restarts == MAX_RESTARTS {
                    diverged = true;
                    break;
                }
                restart!();
                continue;
            }
            if it > 0 {
                let (loss, arg) = relu_loss_from(points, &full_errs);
                if loss < best.0 {
                    best = (loss, arg, theta.clone(), it);
                }
                if it % 5_000 == 0 {
                    log::debug!("iter {it} loss {loss:e} best {:e} active {}", best.0, active.len());
                }
            }
            let keep = active_threshold(p) * ACTIVE_MARGIN;
            active.clear();
            let last = points.len() - 1;
            let stride = (points.len() / TRIPWIRE_POINTS).max(1);
            active.extend(
                (0..points.len()).filter(|&i| i % stride == 0 || i == last || full_errs[i].abs() >= keep * peak),
            );
            last_p = p;
            refresh_peak = peak;
        }

        sample.clear();
        sample.extend(active.iter().map(|&i| points[i]));
        if config.jitter > 0.0 {
            for (s, &i) in sample.iter_mut().zip(&active) {
                *s = jitter_point(points, i, config.jitter, &mut rng);
            }
        }
        trace.forward(&rows, &sample, &mut errs);
        let peak = errs.iter().fold(0.0_f64, |a, e| a.max(e.abs()));
        if !(peak <= BLOWUP * best.0) {
            if restarts == MAX_RESTARTS {
                diverged = true;
                break;
            }
            restart!();
            continue;
        }
        // a fast-growing error elsewhere may be hiding between the strided points
        force_refresh = peak > 2.0 * refresh_peak;

        match p {
            Some(p) => {
                // weights (|e_i| / peak)^(p-1); negligible ones are skipped
                let r_min = active_threshold(Some(p));
                let errs = &errs;
                let pow = |r: f64| {
                    if p.fract() == 0.0 && p < 1025.0 {
                        r.powi(p as i32 - 1)
                    } else {
                        r.powf(p - 1.0)
                    }
                };
                trace.gradient(
                    &rows,
                    &sample,
                    |k| {
                        let r = errs[k].abs() / peak;
                        if r < r_min {
                            0.0
                        } else {
                            pow(r) * errs[k].signum()
                        }
                    },
                    &mut grad,
                );
            }
            None => {
                let (i, e) =
                    errs.iter().enumerate().fold(
                        (0, 0.0_f64),
                        |acc, (i, e)| if e.abs() > acc.1.abs() { (i, *e) } else { acc },
                    );
                trace.gradient(&rows, &sample, |k| if k == i { e.signum() } else { 0.0 }, &mut grad);
            }
        }

        adam_t += 1;
        let bc1 = 1.0 - beta1.powi(adam_t as i32);
        let bc2 = 1.0 - beta2.powi(adam_t as i32);
        let g2_shared = grad.iter().map(|g| g * g).sum::<f64>() / n_params as f64;
        for k in 0..n_params {
            m[k] = beta1 * m[k] + (1.0 - beta1) * grad[k];
            let g2 = if config.shared_second_moment {
                g2_shared
            } else {
                grad[k] * grad[k]
            };
            v[k] = beta2 * v[k] + (1.0 - beta2) * g2;
            let mhat = m[k] / bc1;
            let vhat = v[k] / bc2;
            theta[k] -= step * mhat / (vhat.sqrt() + adam_eps);
        }
        step *= decay;
        if theta.iter().any(|c| !c.is_finite()) {
            if restarts == MAX_RESTARTS {
                diverged = true;
                break;
            }
            restart!();
            continue;
        }
        work.set_flat_coefficients(&theta);
        rows = work.coefficient_rows();
    }
    if !diverged {
        let (loss, arg) = relu_loss(&work, &config.grid);
        if loss < best.0 {
            best = (loss, arg, theta.clone(), iterations);
        }
    }

    let mut out = filter.clone();
    out.set_flat_coefficients(&best.2);
    out.provenance = Provenance::Refined;
    out.design_intervals.clear();
    if diverged {
        log::warn!("refinement hit a non-finite loss; returning the best iterate seen");
    }
    Ok(RefineOutcome {
        filter: out,
        initial_loss,
        final_loss: best.0,
        final_argmax: best.1,
        iterations,
        best_iteration: best.3,
        diverged,
    })
}

fn relu_loss_from(points: &[f64], errs: &[f64]) -> (f64, f64) {
    let mut best = (f64::NEG_INFINITY, 0.0);
    for (&x, e) in points.iter().zip(errs) {
        let e = if e.is_nan() { f64::INFINITY } else { e.abs() };
        if super::eval::better(e, x, best.0, best.1) {
            best = (e, x);
        }
    }
    best
}

fn p_schedule(p_start: f64, p_end: f64) -> Vec<f64> {
    let mut ps = vec![p_start];
    while *ps.last().expect("non-empty") * 2.0 <= p_end {
        ps.push(ps.last().expect("non-empty") * 2.0);
    }
    ps
}

/// Relative error below which a point's p-norm weight is under 1e-6.
fn active_threshold(p: Option<f64>) -> f64 {
    match p {
        Some(p) => 1e-6_f64.powf(1.0 / (p - 1.0).max(1.0)),
        // the hard-max step only looks at the top of the error profile
        None => 0.5,
    }
}

/// Moves point `i` by up to `amount` of the gap to its neighbour.
fn jitter_point(points: &[f64], i: usize, amount: f64, rng: &mut ChaCha8Rng) -> f64 {
    let x = points[i];
    // anchors stay put so the contract grid is always covered
    if x == 0.0 || x.abs() == 1.0 {
        return x;
    }
    let left = if i > 0 { x - points[i - 1] } else { 0.0 };
    let right = if i + 1 < points.len() { points[i + 1] - x } else { 0.0 };
    let u: f64 = rng.random_range(-1.0..1.0);
    let d = if u < 0.0 { left } else { right };
    (x + u * amount * d).clamp(-1.0, 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn schedule_doubles() {
        assert_eq!(p_schedule(8.0, 512.0), vec![8.0, 16.0, 32.0, 64.0, 128.0, 256.0, 512.0]);
    }

    #[test]
    fn zero_iterations_returns_input() {
        let f = crate::golden::half_refined();
        let mut cfg = RefineConfig::new(SampleGrid::uniform(257).unwrap());
        cfg.max_iters = 0;
        let out = refine_with_report(&f, &cfg).unwrap();
        assert_eq!(out.filter.flat_coefficients(), f.flat_coefficients());
        assert_eq!(out.final_loss, out.initial_loss);
    }

    #[test]
    fn one_iteration_never_worse() {
        let f = crate::golden::half_refined();
        let mut cfg = RefineConfig::new(SampleGrid::uniform(1025).unwrap());
        cfg.max_iters = 1;
        let out = refine_with_report(&f, &cfg).unwrap();
        assert!(out.final_loss <= out.initial_loss);
    }
}
