//! Three-step ADMM for standard-form SDPs with a swappable PSD projection.
//!
//! ```text
//! min <C, X>  s.t.  A X = b, X psd        max b'y  s.t.  A* y + S = C, S psd
//! ```
//!
//! The warm phase projects with a composite filter and watches only the
//! eigenvalue-free part of the KKT residual; once that drops below the switch
//! threshold the solver moves to exact eigendecomposition for good.

use std::fmt::Write as _;
use std::path::Path;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::densemat::{eig_project, sym_eigenvalues, Matrix, SymmetricMatrix};
use crate::error::{Error, Result};
use crate::projection::{project_psd, ProjectionConfig};

/// Largest accepted condition number of the constraint Gram matrix.
pub const GRAM_CONDITION_LIMIT: f64 = 1e10;
/// Surrogate residual above which the run is declared divergent.
pub const DIVERGENCE_LIMIT: f64 = 1e6;

#[derive(Debug, Clone)]
pub struct SdpProblem {
    pub n: usize,
    pub m: usize,
    pub c: SymmetricMatrix,
    pub a: Vec<SymmetricMatrix>,
    pub b: Vec<f64>,
    /// Nonzeros of each `A_i` as (flat index, value).
    a_sparse: Vec<Vec<(usize, f64)>>,
    /// Lower Cholesky factor of the Gram matrix `A A*`, row-major `m x m`.
    gram_chol: Vec<f64>,
}

impl SdpProblem {
    /// Validates shapes and factors `A A*`, rejecting dependent constraints.
    pub fn new(c: SymmetricMatrix, a: Vec<SymmetricMatrix>, b: Vec<f64>) -> Result<Self> {
        let n = c.n();
        let m = a.len();
        if m == 0 {
            return Err(Error::InvalidArgument("an SDP needs at least one constraint".into()));
        }
        if b.len() != m {
            return Err(Error::DimensionMismatch(format!(
                "{m} constraint matrices but b has {} entries",
                b.len()
            )));
        }
        if let Some(i) = a.iter().position(|ai| ai.n() != n) {
            return Err(Error::DimensionMismatch(format!(
                "A_{i} is {0}x{0}, C is {n}x{n}",
                a[i].n()
            )));
        }
        if b.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("b".into()));
        }
        let a_sparse: Vec<Vec<(usize, f64)>> = a
            .iter()
            .map(|ai| {
                ai.as_matrix()
                    .as_slice()
                    .iter()
                    .enumerate()
                    .filter(|(_, v)| **v != 0.0)
                    .map(|(k, v)| (k, *v))
                    .collect()
            })
            .collect();
        let mut gram = vec![vec![0.0; m]; m];
        for i in 0..m {
            for j in 0..=i {
                let g = sparse_dot(&a_sparse[i], a[j].as_matrix().as_slice());
                gram[i][j] = g;
                gram[j][i] = g;
            }
        }
        let eig = sym_eigenvalues(&SymmetricMatrix::from_rows(&gram)?)?;
        let (hi, lo) = (eig[0], eig[m - 1]);
        if !(lo > 0.0 && hi / lo <= GRAM_CONDITION_LIMIT) {
            return Err(Error::SingularConstraints(format!(
                "Gram matrix eigenvalues span [{lo:e}, {hi:e}]"
            )));
        }
        let gram_chol = cholesky(&gram).ok_or_else(|| Error::SingularConstraints("Cholesky failed".into()))?;
        Ok(SdpProblem {
            n,
            m,
            c,
            a,
            b,
            a_sparse,
            gram_chol,
        })
    }

    /// `(<A_1, X>, ..., <A_m, X>)`.
    pub fn apply_a(&self, x: &Matrix) -> Vec<f64> {
        self.a_sparse.iter().map(|ai| sparse_dot(ai, x.as_slice())).collect()
    }

    /// `sum_i y_i A_i`.
    pub fn apply_adjoint(&self, y: &[f64]) -> SymmetricMatrix {
        let mut out = Matrix::zeros(self.n, self.n);
        let data = out.as_mut_slice();
        for (ai, &yi) in self.a_sparse.iter().zip(y) {
            for &(k, v) in ai {
                data[k] += yi * v;
            }
        }
        SymmetricMatrix::new(out).expect("sum of symmetric matrices")
    }

    /// Solves `(A A*) y = r` with the cached factor.
    pub fn solve_gram(&self, r: &[f64]) -> Vec<f64> {
        let m = self.m;
        let l = &self.gram_chol;
        let mut z = r.to_vec();
        for i in 0..m {
            let s: f64 = (0..i).map(|k| l[i * m + k] * z[k]).sum();
            z[i] = (z[i] - s) / l[i * m + i];
        }
        for i in (0..m).rev() {
            let s: f64 = (i + 1..m).map(|k| l[k * m + i] * z[k]).sum();
            z[i] = (z[i] - s) / l[i * m + i];
        }
        z
    }

    pub fn objective(&self, x: &SymmetricMatrix) -> f64 {
        self.c.dot(x)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let f: SdpFile = serde_json::from_str(text)?;
        let sq = |name: &str, v: Vec<f64>| -> Result<SymmetricMatrix> {
            if v.len() != f.n * f.n {
                return Err(Error::Format(format!(
                    "{name} has {} entries, expected {}",
                    v.len(),
                    f.n * f.n
                )));
            }
            SymmetricMatrix::new(Matrix::from_vec(f.n, f.n, v)?)
        };
        if f.a.len() != f.m {
            return Err(Error::Format(format!(
                "m = {} but {} constraint matrices",
                f.m,
                f.a.len()
            )));
        }
        let c = sq("C", f.c)?;
        let a =
            f.a.into_iter()
                .enumerate()
                .map(|(i, ai)| sq(&format!("A[{i}]"), ai))
                .collect::<Result<Vec<_>>>()?;
        SdpProblem::new(c, a, f.b)
    }

    pub fn to_json(&self) -> String {
        let file = SdpFile {
            n: self.n,
            m: self.m,
            c: self.c.as_matrix().as_slice().to_vec(),
            a: self.a.iter().map(|ai| ai.as_matrix().as_slice().to_vec()).collect(),
            b: self.b.clone(),
        };
        serde_json::to_string(&file).expect("problem serializes")
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

#[derive(Serialize, Deserialize)]
struct SdpFile {
    n: usize,
    m: usize,
    #[serde(rename = "C")]
    c: Vec<f64>,
    #[serde(rename = "A")]
    a: Vec<Vec<f64>>,
    b: Vec<f64>,
}

fn sparse_dot(a: &[(usize, f64)], dense: &[f64]) -> f64 {
    a.iter().map(|&(k, v)| v * dense[k]).sum()
}

fn cholesky(g: &[Vec<f64>]) -> Option<Vec<f64>> {
    let m = g.len();
    let mut l = vec![0.0; m * m];
    for i in 0..m {
        for j in 0..=i {
            let s: f64 = (0..j).map(|k| l[i * m + k] * l[j * m + k]).sum();
            if i == j {
                let d = g[i][i] - s;
                if !(d > 0.0) {
                    return None;
                }
                l[i * m + i] = d.sqrt();
            } else {
                l[i * m + j] = (g[i][j] - s) / l[j * m + j];
            }
        }
    }
    Some(l)
}

/// Max-cut relaxation of a weighted graph in minimization form:
/// `C = -L/4`, `A_i = e_i e_i'`, `b = 1`.
pub fn maxcut_sdp(weights: &SymmetricMatrix) -> Result<SdpProblem> {
    let n = weights.n();
    for i in 0..n {
        if weights[(i, i)] != 0.0 {
            return Err(Error::InvalidArgument(format!(
                "weight matrix has nonzero diagonal at {i}"
            )));
        }
        for j in 0..n {
            if weights[(i, j)] < 0.0 {
                return Err(Error::InvalidArgument(format!("negative weight at ({i}, {j})")));
            }
        }
    }
    let mut c = Matrix::zeros(n, n);
    for i in 0..n {
        let degree: f64 = (0..n).map(|j| weights[(i, j)]).sum();
        for j in 0..n {
            c[(i, j)] = if i == j { -degree / 4.0 } else { weights[(i, j)] / 4.0 };
        }
    }
    let a = (0..n)
        .map(|i| {
            let mut d = vec![0.0; n];
            d[i] = 1.0;
            SymmetricMatrix::from_diag(&d)
        })
        .collect();
    SdpProblem::new(SymmetricMatrix::new(c)?, a, vec![1.0; n])
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdmmState {
    pub x: SymmetricMatrix,
    pub s: SymmetricMatrix,
    pub y: Vec<f64>,
    pub sigma_penalty: f64,
    pub iteration: usize,
}

impl AdmmState {
    /// All-zero start.
    pub fn zeros(problem: &SdpProblem, sigma_penalty: f64) -> Self {
        AdmmState {
            x: SymmetricMatrix::zeros(problem.n),
            s: SymmetricMatrix::zeros(problem.n),
            y: vec![0.0; problem.m],
            sigma_penalty,
            iteration: 0,
        }
    }
}

/// PSD projection used for the `S` update.
#[derive(Debug, Clone)]
pub enum Projector {
    /// Eigendecomposition in f64.
    Exact,
    /// Composite polynomial filter.
    Filter(Box<ProjectionConfig>),
}

impl Projector {
    pub fn project(&self, w: &SymmetricMatrix) -> Result<SymmetricMatrix> {
        match self {
            Projector::Exact => eig_project(w),
            Projector::Filter(cfg) => Ok(project_psd(w, cfg)?.0),
        }
    }

    pub fn name(&self) -> String {
        match self {
            Projector::Exact => "exact".into(),
            Projector::Filter(cfg) => format!("filter_{:?}", cfg.mode.tag()).to_lowercase(),
        }
    }
}

/// One pass of the y, S, X updates.
pub fn admm_step(problem: &SdpProblem, state: &AdmmState, projector: &Projector) -> Result<AdmmState> {
    let sigma = state.sigma_penalty;
    let inv = 1.0 / sigma;
    // y = (AA*)^{-1} (b/sigma - A(X/sigma + S - C))
    let mut inner = state.x.as_matrix().scale(inv);
    inner.axpy(1.0, state.s.as_matrix());
    inner.axpy(-1.0, problem.c.as_matrix());
    let ax = problem.apply_a(&inner);
    let rhs: Vec<f64> = problem.b.iter().zip(&ax).map(|(b, a)| b * inv - a).collect();
    let y = problem.solve_gram(&rhs);
    let aty = problem.apply_adjoint(&y);

    // S = P(C - A*y - X/sigma)
    let mut w = problem.c.as_matrix().clone();
    w.axpy(-1.0, aty.as_matrix());
    w.axpy(-inv, state.x.as_matrix());
    let s = projector.project(&SymmetricMatrix::new(w)?)?;

    // X += sigma (S + A*y - C)
    let mut step = s.as_matrix().clone();
    step.axpy(1.0, aty.as_matrix());
    step.axpy(-1.0, problem.c.as_matrix());
    let mut x = state.x.as_matrix().clone();
    x.axpy(sigma, &step);
    Ok(AdmmState {
        x: SymmetricMatrix::new(x)?,
        s,
        y,
        sigma_penalty: sigma,
        iteration: state.iteration + 1,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KktResidual {
    pub primal: f64,
    pub dual: f64,
    pub gap: f64,
    pub x_cone: f64,
    pub s_cone: f64,
    pub eta: f64,
    pub surrogate: f64,
}

/// The three eigenvalue-free terms: primal and dual infeasibility and the
/// relative duality gap.
pub fn surrogate_terms(problem: &SdpProblem, state: &AdmmState) -> (f64, f64, f64) {
    let nb = norm(&problem.b);
    let ax = problem.apply_a(state.x.as_matrix());
    let primal = norm(&ax.iter().zip(&problem.b).map(|(a, b)| a - b).collect::<Vec<_>>()) / (1.0 + nb);
    let mut r = problem.apply_adjoint(&state.y).into_matrix();
    r.axpy(1.0, state.s.as_matrix());
    r.axpy(-1.0, problem.c.as_matrix());
    let nc = problem.c.frobenius_norm();
    let dual = r.frobenius_norm() / (1.0 + nc);
    let pobj = problem.objective(&state.x);
    let dobj: f64 = problem.b.iter().zip(&state.y).map(|(b, y)| b * y).sum();
    let gap = (pobj - dobj).abs() / (1.0 + pobj.abs() + dobj.abs());
    (primal, dual, gap)
}

/// Full five-term residual; the cone terms use the magnitude of any negative
/// smallest eigenvalue.
pub fn kkt_residual(problem: &SdpProblem, state: &AdmmState) -> Result<KktResidual> {
    let (primal, dual, gap) = surrogate_terms(problem, state);
    let nb = norm(&problem.b);
    let nc = problem.c.frobenius_norm();
    let lx = *sym_eigenvalues(&state.x)?.last().expect("n >= 1");
    let ls = *sym_eigenvalues(&state.s)?.last().expect("n >= 1");
    let x_cone = (-lx).max(0.0) / (1.0 + nb);
    let s_cone = (-ls).max(0.0) / (1.0 + nc);
    let surrogate = primal.max(dual).max(gap);
    Ok(KktResidual {
        primal,
        dual,
        gap,
        x_cone,
        s_cone,
        eta: surrogate.max(x_cone).max(s_cone),
        surrogate,
    })
}

#[derive(Debug, Clone)]
pub struct SolveSchedule {
    /// Projection for the warm phase; `None` runs exact from the start.
    pub warm_projector: Option<Projector>,
    /// Switch to exact projection once the surrogate drops below this. A
    /// non-finite value means never switch.
    pub warm_threshold: f64,
    pub final_tol: f64,
    pub max_iters: usize,
    pub sigma_penalty: f64,
}

impl Default for SolveSchedule {
    fn default() -> Self {
        SolveSchedule {
            warm_projector: None,
            warm_threshold: 1e-2,
            final_tol: 1e-4,
            max_iters: 5_000,
            sigma_penalty: 1.0,
        }
    }
}

impl SolveSchedule {
    pub fn warm(projector: Projector) -> Self {
        SolveSchedule {
            warm_projector: Some(projector),
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub iteration: usize,
    pub surrogate: f64,
    /// Full residual; NaN while the warm backend is active.
    pub eta: f64,
    pub backend: String,
    pub wallclock_s: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct SolveTrace {
    pub rows: Vec<TraceRow>,
    /// Iteration whose update first used the exact backend after a warm phase.
    pub switched_at: Option<usize>,
    pub converged: bool,
}

impl SolveTrace {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("iteration,surrogate,eta,backend,wallclock\n");
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{:e},{:e},{},{:.6}",
                r.iteration, r.surrogate, r.eta, r.backend, r.wallclock_s
            );
        }
        out
    }
}

/// Runs ADMM from zero under `schedule`.
pub fn solve(problem: &SdpProblem, schedule: &SolveSchedule) -> Result<(AdmmState, SolveTrace)> {
    if !(schedule.sigma_penalty > 0.0) {
        return Err(Error::InvalidArgument("sigma penalty must be positive".into()));
    }
    let start = Instant::now();
    let mut state = AdmmState::zeros(problem, schedule.sigma_penalty);
    let mut trace = SolveTrace::default();
    let exact = Projector::Exact;
    let mut warm = schedule.warm_projector.as_ref();
    let never_switch = !schedule.warm_threshold.is_finite();
    for _ in 0..schedule.max_iters {
        let projector = warm.unwrap_or(&exact);
        state = admm_step(problem, &state, projector)?;
        let (p, d, g) = surrogate_terms(problem, &state);
        let surrogate = p.max(d).max(g);
        let eta = if warm.is_none() {
            kkt_residual(problem, &state)?.eta
        } else {
            f64::NAN
        };
        trace.rows.push(TraceRow {
            iteration: state.iteration,
            surrogate,
            eta,
            backend: projector.name(),
            wallclock_s: start.elapsed().as_secs_f64(),
        });
        if !(surrogate <= DIVERGENCE_LIMIT) {
            return Err(Error::Diverged {
                iteration: state.iteration,
                residual: surrogate,
                trace: Box::new(trace),
            });
        }
        match warm {
            Some(_) if never_switch => {
                if surrogate < schedule.final_tol {
                    trace.converged = true;
                    break;
                }
            }
            Some(_) => {
                if surrogate < schedule.warm_threshold {
                    warm = None;
                    trace.switched_at = Some(state.iteration + 1);
                }
            }
            None => {
                if eta < schedule.final_tol {
                    trace.converged = true;
                    break;
                }
            }
        }
    }
    Ok((state, trace))
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn diag12() -> SdpProblem {
        SdpProblem::new(
            SymmetricMatrix::from_diag(&[1.0, 2.0]),
            vec![SymmetricMatrix::identity(2)],
            vec![1.0],
        )
        .unwrap()
    }

    #[test]
    fn zero_state_primal_residual() {
        let p = diag12();
        let r = kkt_residual(&p, &AdmmState::zeros(&p, 1.0)).unwrap();
        assert!((r.primal - 0.5).abs() < 1e-15);
    }

    #[test]
    fn dependent_constraints_rejected() {
        let i = SymmetricMatrix::identity(2);
        let err = SdpProblem::new(i.clone(), vec![i.clone(), i.scale(2.0)], vec![1.0, 2.0]);
        assert!(matches!(err, Err(Error::SingularConstraints(_))));
    }

    #[test]
    fn gram_solve_roundtrip() {
        let p = maxcut_sdp(&SymmetricMatrix::from_rows(&[vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap()).unwrap();
        assert_eq!(p.solve_gram(&[2.0, 3.0]), vec![2.0, 3.0]);
    }
}
