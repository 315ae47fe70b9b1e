use super::grid::SampleGrid;
use crate::design::CompositeFilter;

/// `0.5 x (1 + f_T(...f_1(x)))`, the ReLU surrogate in f64.
#[inline]
pub fn composite_eval_scalar(filter: &CompositeFilter, x: f64) -> f64 {
    0.5 * x * (1.0 + filter.sign_chain(x))
}

/// Only the inner sign approximation `f_T(...f_1(x))`.
#[inline]
pub fn sign_chain_scalar(filter: &CompositeFilter, x: f64) -> f64 {
    filter.sign_chain(x)
}

/// Signed ReLU approximation error at `x`.
#[inline]
pub fn relu_error(filter: &CompositeFilter, x: f64) -> f64 {
    composite_eval_scalar(filter, x) - x.max(0.0)
}

/// Orders candidate maxima: larger error first, then smaller `|x|`, then
/// positive `x`. Used wherever a deterministic argmax is needed.
#[inline]
pub(crate) fn better(e: f64, x: f64, best_e: f64, best_x: f64) -> bool {
    if e != best_e {
        return e > best_e;
    }
    if x.abs() != best_x.abs() {
        return x.abs() < best_x.abs();
    }
    x > best_x
}

/// Max over the grid of the absolute ReLU error, with its abscissa.
pub fn relu_loss(filter: &CompositeFilter, grid: &SampleGrid) -> (f64, f64) {
    let mut best = (f64::NEG_INFINITY, 0.0);
    for &x in grid.points() {
        let e = relu_error(filter, x).abs();
        let e = if e.is_nan() { f64::INFINITY } else { e };
        if better(e, x, best.0, best.1) {
            best = (e, x);
        }
    }
    best
}

/// Partial derivatives of the signed error at `x` with respect to every
/// coefficient, stage-major (the layout of `flat_coefficients`).
pub fn loss_gradient(filter: &CompositeFilter, x: f64) -> Vec<f64> {
    let mut grad = vec![0.0; filter.num_coefficients()];
    let mut scratch = ChainScratch::new(filter);
    scratch.forward(filter, x);
    scratch.backward(filter, x, 1.0, &mut grad);
    grad
}

/// Per-point workspace for the chain rule: stage inputs and derivatives.
pub(crate) struct ChainScratch {
    inputs: Vec<f64>,
    derivs: Vec<f64>,
}

impl ChainScratch {
    pub(crate) fn new(filter: &CompositeFilter) -> Self {
        ChainScratch {
            inputs: vec![0.0; filter.len()],
            derivs: vec![0.0; filter.len()],
        }
    }

    /// Runs the chain, returning the sign approximation.
    #[inline]
    pub(crate) fn forward(&mut self, filter: &CompositeFilter, x: f64) -> f64 {
        let mut y = x;
        for (t, f) in filter.stages.iter().enumerate() {
            self.inputs[t] = y;
            let (v, d) = f.eval_with_derivative(y);
            self.derivs[t] = d;
            y = v;
        }
        y
    }

    /// Adds `weight * d(error)/d(c)` into `grad`; call after `forward(x)`.
    #[inline]
    pub(crate) fn backward(&self, filter: &CompositeFilter, x: f64, weight: f64, grad: &mut [f64]) {
        let mut suffix = 0.5 * x * weight;
        let mut end = grad.len();
        for t in (0..filter.len()).rev() {
            let n = filter.stages[t].coeffs().len();
            let start = end - n;
            let y = self.inputs[t];
            let y2 = y * y;
            let mut pow = y;
            for g in &mut grad[start..end] {
                *g += suffix * pow;
                pow *= y2;
            }
            suffix *= self.derivs[t];
            end = start;
        }
    }
}
