//! Batched chain evaluation for the certificate and the optimizer.
//!
//! Work is split into fixed-size chunks whose partial results are combined
//! in chunk order, so sums do not depend on the number of threads.

use rayon::prelude::*;

const CHUNK: usize = 1024;

/// Applies one odd stage `y -> y * p(y^2)` in place.
#[inline]
pub(crate) fn apply_stage(c: &[f64], ys: &mut [f64]) {
    match *c {
        [c1] => ys.iter_mut().for_each(|y| *y *= c1),
        [c1, c3] => ys.iter_mut().for_each(|y| {
            let y2 = *y * *y;
            *y *= c3 * y2 + c1;
        }),
        [c1, c3, c5] => ys.iter_mut().for_each(|y| {
            let y2 = *y * *y;
            *y *= (c5 * y2 + c3) * y2 + c1;
        }),
        _ => ys.iter_mut().for_each(|y| {
            let y2 = *y * *y;
            let mut acc = 0.0;
            for &cj in c.iter().rev() {
                acc = acc * y2 + cj;
            }
            *y *= acc;
        }),
    }
}

#[inline]
fn relu_residual(x: f64, y: f64) -> f64 {
    0.5 * x * (1.0 + y) - x.max(0.0)
}

/// Signed ReLU errors at `xs`, written to `out`.
pub(crate) fn errors(rows: &[Vec<f64>], xs: &[f64], out: &mut [f64]) {
    out.par_chunks_mut(CHUNK)
        .zip(xs.par_chunks(CHUNK))
        .for_each(|(out, xs)| {
            out.copy_from_slice(xs);
            for stage in rows {
                apply_stage(stage, out);
            }
            for (e, &x) in out.iter_mut().zip(xs) {
                *e = relu_residual(x, *e);
            }
        });
}

/// Stage inputs and derivatives of every point in a batch, point-major.
#[derive(Default)]
pub(crate) struct Trace {
    stages: usize,
    inputs: Vec<f64>,
    derivs: Vec<f64>,
}

impl Trace {
    /// Evaluates the chain at `xs`, keeping what the backward pass needs,
    /// and writes the signed errors to `errs`.
    pub(crate) fn forward(&mut self, rows: &[Vec<f64>], xs: &[f64], errs: &mut Vec<f64>) {
        let t = rows.len();
        self.stages = t;
        self.inputs.resize(xs.len() * t, 0.0);
        self.derivs.resize(xs.len() * t, 0.0);
        errs.resize(xs.len(), 0.0);
        errs.par_chunks_mut(CHUNK)
            .zip(xs.par_chunks(CHUNK))
            .zip(
                self.inputs
                    .par_chunks_mut(CHUNK * t)
                    .zip(self.derivs.par_chunks_mut(CHUNK * t)),
            )
            .for_each(|((errs, xs), (inputs, derivs))| {
                for (k, (&x, e)) in xs.iter().zip(errs.iter_mut()).enumerate() {
                    let mut y = x;
                    for (s, c) in rows.iter().enumerate() {
                        inputs[k * t + s] = y;
                        let z = y * y;
                        let (mut acc, mut dacc) = (0.0, 0.0);
                        for &cj in c.iter().rev() {
                            dacc = dacc * z + acc;
                            acc = acc * z + cj;
                        }
                        derivs[k * t + s] = acc + 2.0 * z * dacc;
                        y *= acc;
                    }
                    *e = relu_residual(x, y);
                }
            });
    }

    /// Sum over points of `weight(k) * d(error_k)/d(coefficients)`, in the
    /// stage-major layout of `flat_coefficients`. Points with zero weight
    /// are skipped.
    pub(crate) fn gradient<W>(&self, rows: &[Vec<f64>], xs: &[f64], weight: W, grad: &mut [f64])
    where
        W: Fn(usize) -> f64 + Sync,
    {
        let t = self.stages;
        let n = grad.len();
        let partials: Vec<Vec<f64>> = xs
            .par_chunks(CHUNK)
            .enumerate()
            .map(|(c, xs)| {
                let mut g = vec![0.0; n];
                for (j, &x) in xs.iter().enumerate() {
                    let k = c * CHUNK + j;
                    let w = weight(k);
                    if w == 0.0 {
                        continue;
                    }
                    let mut suffix = 0.5 * x * w;
                    let mut end = n;
                    for s in (0..t).rev() {
                        let start = end - rows[s].len();
                        let y = self.inputs[k * t + s];
                        let y2 = y * y;
                        let mut pow = y;
                        for gi in &mut g[start..end] {
                            *gi += suffix * pow;
                            pow *= y2;
                        }
                        suffix *= self.derivs[k * t + s];
                        end = start;
                    }
                }
                g
            })
            .collect();
        grad.iter_mut().for_each(|g| *g = 0.0);
        for part in partials {
            for (g, p) in grad.iter_mut().zip(part) {
                *g += p;
            }
        }
    }
}
