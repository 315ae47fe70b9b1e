//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Runs without the libtest harness so every criterion is reported even when
//! an earlier one fails. Set `ACCEPTANCE_ONLY=2,6` to run a subset.

use std::io::Write as _;
use std::process::ExitCode;
use std::time::Instant;

use psdfilter::bench::{bench_one, median, Method};
use psdfilter::datasets::{DatasetFamily, DatasetSpec, Spectrum};
use psdfilter::densemat::SymmetricMatrix;
use psdfilter::densemat::{eig_project, rel_error_against, sym_eig};
use psdfilter::design::{equioscillation_check, sequential_remez_report, CompositeFilter, SequentialDesign};
use psdfilter::golden;
use psdfilter::projection::{gemm_count_of, newton_schulz_filter, project_psd, ProjectionConfig};
use psdfilter::refine::{
    e_float_full, e_float_grid, loss_gradient, refine_with_report, relu_loss, RefineConfig, SampleGrid,
};
use psdfilter::sdp::{kkt_residual, maxcut_sdp, solve, Projector, SolveSchedule};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use twofloat::TwoFloat;

const COEFF_REL_TOL: f64 = 1e-6;
const DESIGN_SECONDS: f64 = 10.0;

const PAPER_E_HALF: f64 = 7.2868e-5;
const PAPER_E_SINGLE: f64 = 1.1092e-5;
const E_ABS_TOL: f64 = 1e-9;
const FLOAT32_COUNT: u64 = 2_130_706_433;
const GRID_FALLBACK_POINTS: usize = 1 << 20;
const GRID_FALLBACK_REL: f64 = 0.05;

const REFINED_BAR_HALF: f64 = 6.0e-5;
const REFINED_BAR_SINGLE: f64 = 1.0e-5;

const HAAR_SEEDS: u64 = 20;
const F64_MEDIAN_BAR: f64 = 1e-4;
const F16_MEDIAN_BAR: f64 = 3e-3;
const PROJECTION_SECONDS: f64 = 60.0;

/// Relative slack for rounding in both the bound and the eig oracle.
const BOUND_ROUNDING: f64 = 1e-12;
const BOUND_TRIALS_PER_FAMILY: u64 = 100;

const GRAD_TRIPLES: usize = 100;
const GRAD_REL_TOL: f64 = 1e-6;
const FD_STEP: f64 = 1e-6;

const EQUIOSC_REL: f64 = 1e-8;

const ORDERING_SEEDS: u64 = 20;

const K3_VALUE: f64 = 2.25;
const K3_TOL: f64 = 1e-3;
const SWITCH_LEVEL: f64 = 1e-2;
const FINAL_ETA: f64 = 1e-4;
const SDP_SECONDS: f64 = 30.0;

struct Outcome {
    pass: bool,
    detail: String,
}

type Criterion = (usize, &'static str, fn() -> Outcome);

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn worst_relative(a: &CompositeFilter, b: &CompositeFilter) -> f64 {
    a.flat_coefficients()
        .iter()
        .zip(b.flat_coefficients())
        .map(|(x, y)| ((x - y) / y).abs())
        .fold(0.0, f64::max)
}

fn timed<T>(f: impl FnOnce() -> T) -> (T, f64) {
    let start = Instant::now();
    let v = f();
    (v, start.elapsed().as_secs_f64())
}

fn design(t: usize, eps: f64) -> (SequentialDesign, f64) {
    timed(|| sequential_remez_report(t, &vec![5; t], eps).expect("design succeeds"))
}

/// Judged as written: both designs at eps = 1e-3. Table 1's coefficients are
/// an eps = 1e-4 design, so that run is reported alongside.
fn golden_designs() -> Outcome {
    let (half, th) = design(7, 1e-3);
    let (single, ts) = design(10, 1e-3);
    let (single_1e4, _) = design(10, 1e-4);
    let wh = worst_relative(&half.filter, &golden::half_stage1());
    let ws = worst_relative(&single.filter, &golden::single_stage1());
    let w4 = worst_relative(&single_1e4.filter, &golden::single_stage1());
    let slowest = th.max(ts);
    outcome(
        wh <= COEFF_REL_TOL && ws <= COEFF_REL_TOL && slowest <= DESIGN_SECONDS,
        format!(
            "half worst rel {wh:.2e}; single worst rel {ws:.2e} at eps=1e-3 \
             (the eps=1e-4 design matches to {w4:.2e}); slowest design {slowest:.2}s"
        ),
    )
}

fn certificates() -> Outcome {
    let half = e_float_full(&golden::half_stage1());
    let single = e_float_full(&golden::single_stage1());
    let grid = SampleGrid::mixed(GRID_FALLBACK_POINTS).expect("grid");
    let gh = e_float_grid(&golden::half_stage1(), &grid).e_value;
    let gs = e_float_grid(&golden::single_stage1(), &grid).e_value;
    let dh = (half.e_value - PAPER_E_HALF).abs();
    let ds = (single.e_value - PAPER_E_SINGLE).abs();
    let counts = half.count == FLOAT32_COUNT && single.count == FLOAT32_COUNT;
    let gap_h = (gh - half.e_value).abs() / half.e_value;
    let gap_s = (gs - single.e_value).abs() / single.e_value;
    outcome(
        dh <= E_ABS_TOL && ds <= E_ABS_TOL && counts && gap_h <= GRID_FALLBACK_REL && gap_s <= GRID_FALLBACK_REL,
        format!(
            "half {:.5e} (paper {PAPER_E_HALF:e}, |diff| {dh:.2e}); single {:.5e} (paper {PAPER_E_SINGLE:e}, \
             |diff| {ds:.2e}); count {} / {}; grid 2^20 rel gap {:.1e} / {:.1e}; {:.0}s",
            half.e_value,
            single.e_value,
            half.count,
            single.count,
            gap_h,
            gap_s,
            half.wall_time_s + single.wall_time_s
        ),
    )
}

fn refinement() -> Outcome {
    let config = RefineConfig::default();
    let mut pass = true;
    let mut parts = Vec::new();
    for (name, input, bar) in [
        ("half", golden::half_stage1(), REFINED_BAR_HALF),
        ("single", golden::single_stage1(), REFINED_BAR_SINGLE),
    ] {
        let (out, secs) = timed(|| refine_with_report(&input, &config).expect("refine runs"));
        let before = e_float_full(&input).e_value;
        let after = e_float_full(&out.filter).e_value;
        let grid_monotone = relu_loss(&out.filter, &config.grid).0 <= relu_loss(&input, &config.grid).0;
        pass &= after <= bar && after <= before && grid_monotone;
        parts.push(format!(
            "{name} {before:.4e} -> {after:.4e} (bar {bar:e}, {} iters, {secs:.0}s)",
            out.iterations
        ));
    }
    outcome(pass, parts.join("; "))
}

fn haar_projection() -> Outcome {
    let start = Instant::now();
    let family = DatasetFamily::HaarSpectrum {
        spectrum: Spectrum::UniformGap { gap: 1e-3 },
    };
    let (mut e64, mut e16) = (Vec::new(), Vec::new());
    for seed in 0..HAAR_SEEDS {
        let x = DatasetSpec::new(family.clone(), 200, seed).generate().expect("dataset");
        let reference = eig_project(&x).expect("oracle");
        let (p, _) = project_psd(&x, &ProjectionConfig::f64(golden::single_refined())).expect("projection");
        e64.push(rel_error_against(&p, &reference).expect("rel error"));
        let (p, _) = project_psd(&x, &ProjectionConfig::half(golden::half_refined())).expect("projection");
        e16.push(rel_error_against(&p, &reference).expect("rel error"));
    }
    let (m64, m16) = (median(&e64), median(&e16));
    let secs = start.elapsed().as_secs_f64();
    outcome(
        m64 <= F64_MEDIAN_BAR && m16 <= F16_MEDIAN_BAR && secs <= PROJECTION_SECONDS,
        format!("F64 single median {m64:.3e}; F16 half median {m16:.3e}; {secs:.1}s"),
    )
}

fn gemm_budgets() -> Outcome {
    let got = [
        gemm_count_of(&golden::single_refined()),
        gemm_count_of(&golden::half_refined()),
        gemm_count_of(&newton_schulz_filter(15).expect("ns")),
        gemm_count_of(&newton_schulz_filter(10).expect("ns")),
    ];
    outcome(
        got == [31, 22, 31, 21],
        format!("T=10 {}, T=7 {}, NS-15 {}, NS-10 {}", got[0], got[1], got[2], got[3]),
    )
}

fn spectral_bound() -> Outcome {
    let families = [
        DatasetFamily::GaussianSym,
        DatasetFamily::HaarSpectrum {
            spectrum: Spectrum::UniformGap { gap: 1e-3 },
        },
        DatasetFamily::DominantPlusTiny,
        DatasetFamily::ClusteredPm1,
        DatasetFamily::RankDeficient,
    ];
    let (mut trials, mut below, mut above_fro) = (0, 0, 0);
    let mut worst = f64::INFINITY;
    let mut worst_case = String::new();
    for family in &families {
        for seed in 0..BOUND_TRIALS_PER_FAMILY {
            let n = 20 + (seed as usize * 37) % 381;
            let spec = DatasetSpec::new(family.clone(), n, seed);
            let x = spec.generate().expect("dataset");
            let b = psdfilter::spectral::spectral_norm_upper_bound(&x, 20, seed).expect("lanczos");
            let norm = sym_eig(&x).expect("eig").spectral_norm();
            trials += 1;
            let ratio = b.lambda_tilde / norm;
            if ratio < 1.0 - BOUND_ROUNDING {
                below += 1;
            }
            if b.lambda_tilde > x.frobenius_norm() * (1.0 + BOUND_ROUNDING) {
                above_fro += 1;
            }
            if ratio < worst {
                worst = ratio;
                worst_case = format!("{} n={n} seed={seed}", spec.label());
            }
        }
    }
    outcome(
        below == 0 && above_fro == 0,
        format!(
            "{trials} trials; lambda < ||X||_2 in {below}, lambda > ||X||_F in {above_fro}; \
             worst lambda/||X||_2 {worst:.6} ({worst_case})"
        ),
    )
}

/// Signed error in double-double with coefficient `k` shifted by `h`.
fn error_dd(filter: &CompositeFilter, k: usize, h: f64, x: f64) -> TwoFloat {
    let mut idx = 0;
    let mut y = TwoFloat::from(x);
    for row in filter.coefficient_rows() {
        let y2 = y * y;
        let mut p = TwoFloat::from(0.0);
        let coeffs: Vec<TwoFloat> = row
            .iter()
            .map(|&c| {
                let v = if idx == k {
                    TwoFloat::from(c) + h
                } else {
                    TwoFloat::from(c)
                };
                idx += 1;
                v
            })
            .collect();
        for c in coeffs.iter().rev() {
            p = p * y2 + *c;
        }
        y *= p;
    }
    TwoFloat::from(0.5) * TwoFloat::from(x) * (y + 1.0) - x.max(0.0)
}

fn gradient_oracle() -> Outcome {
    let filters = [
        golden::half_stage1(),
        golden::half_refined(),
        golden::single_stage1(),
        golden::single_refined(),
    ];
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let (mut worst, mut failures, mut floored) = (0.0f64, 0, 0);
    for _ in 0..GRAD_TRIPLES {
        let f = &filters[rng.random_range(0..filters.len())];
        let x: f64 = rng.random_range(-1.0..1.0);
        let k = rng.random_range(0..f.num_coefficients());
        let g = loss_gradient(f, x);
        let central = |h: f64| (error_dd(f, k, h, x) - error_dd(f, k, -h, x)) / (2.0 * h);
        let fd: f64 = ((central(FD_STEP / 2.0) * 4.0 - central(FD_STEP)) / 3.0).into();
        // partials below f64 resolution of the whole gradient are compared
        // at that resolution instead of their own magnitude
        let floor = f64::EPSILON * g.iter().fold(0.0f64, |a, b| a.max(b.abs()));
        if fd.abs() < floor {
            floored += 1;
        }
        let rel = (g[k] - fd).abs() / fd.abs().max(floor);
        worst = worst.max(rel);
        if !(rel <= GRAD_REL_TOL) {
            failures += 1;
        }
    }
    outcome(
        failures == 0,
        format!(
            "{GRAD_TRIPLES} triples, worst rel {worst:.2e}, {failures} over tol, {floored} at the resolution floor"
        ),
    )
}

fn equioscillation() -> Outcome {
    let mut checked = 0;
    let mut worst = 0.0f64;
    let mut pass = true;
    for (t, eps) in [(7, 1e-3), (10, 1e-4), (10, 1e-3)] {
        let (rep, _) = design(t, eps);
        for (r, iv) in rep.results.iter().zip(&rep.intervals) {
            let c = equioscillation_check(r, *iv);
            let scale = r.levelled_error.max(f64::MIN_POSITIVE);
            worst = worst.max(c.worst_violation / scale);
            pass &= c.pass && c.worst_violation <= EQUIOSC_REL * scale;
            checked += 1;
        }
    }
    outcome(pass, format!("{checked} stages; worst violation {worst:.2e} x E"))
}

fn baseline_ordering() -> Outcome {
    let (mut cs, mut ns) = (Vec::new(), Vec::new());
    for seed in 0..ORDERING_SEEDS {
        let d = DatasetSpec::new(DatasetFamily::GaussianSym, 200, seed);
        cs.push(bench_one(&d, &Method::CompositeSingle, 1).expect("bench").rel_error);
        ns.push(bench_one(&d, &Method::NewtonSchulz(15), 1).expect("bench").rel_error);
    }
    let (mc, mn) = (median(&cs), median(&ns));
    outcome(
        mc < mn,
        format!("composite-single median {mc:.3e} vs newton-schulz-15 {mn:.3e}"),
    )
}

fn maxcut_k3() -> Outcome {
    let start = Instant::now();
    let w =
        SymmetricMatrix::from_rows(&[vec![0.0, 1.0, 1.0], vec![1.0, 0.0, 1.0], vec![1.0, 1.0, 0.0]]).expect("weights");
    let problem = maxcut_sdp(&w).expect("problem");
    let schedules = [
        ("exact", SolveSchedule::default()),
        (
            "half-warm",
            SolveSchedule::warm(Projector::Filter(Box::new(ProjectionConfig::half(
                golden::half_refined(),
            )))),
        ),
        (
            "single-warm",
            SolveSchedule::warm(Projector::Filter(Box::new(ProjectionConfig::single(
                golden::single_refined(),
            )))),
        ),
    ];
    let mut pass = true;
    let mut values = Vec::new();
    let mut parts = Vec::new();
    for (name, schedule) in &schedules {
        let (state, trace) = match solve(&problem, schedule) {
            Ok(r) => r,
            Err(e) => return outcome(false, format!("{name} failed: {e}")),
        };
        let eta = kkt_residual(&problem, &state).expect("kkt").eta;
        let value = -problem.objective(&state.x);
        pass &= trace.converged && eta < FINAL_ETA && (value - K3_VALUE).abs() <= K3_TOL;
        if schedule.warm_projector.is_some() {
            // the first exact update must follow the first warm surrogate below the level
            let first_below = trace.rows.iter().position(|r| r.surrogate < SWITCH_LEVEL);
            let ok = matches!((first_below, trace.switched_at), (Some(i), Some(s)) if trace.rows[i].iteration + 1 == s);
            pass &= ok;
            parts.push(format!(
                "{name} {value:.6} eta {eta:.1e} switch@{:?}",
                trace.switched_at
            ));
        } else {
            parts.push(format!("{name} {value:.6} eta {eta:.1e} iters {}", state.iteration));
        }
        values.push(value);
    }
    let spread =
        values.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b)) - values.iter().fold(f64::INFINITY, |a, &b| a.min(b));
    let secs = start.elapsed().as_secs_f64();
    pass &= spread <= K3_TOL * K3_VALUE && secs <= SDP_SECONDS;
    outcome(pass, format!("{}; spread {spread:.1e}; {secs:.2}s", parts.join("; ")))
}

fn main() -> ExitCode {
    let only: Option<Vec<usize>> = std::env::var("ACCEPTANCE_ONLY")
        .ok()
        .map(|s| s.split(',').filter_map(|t| t.trim().parse().ok()).collect());
    let criteria: [Criterion; 10] = [
        (1, "golden coefficient reproduction", golden_designs),
        (2, "error-certificate reproduction", certificates),
        (3, "refinement efficacy", refinement),
        (4, "projection accuracy", haar_projection),
        (5, "GEMM budgets", gemm_budgets),
        (6, "spectral bound validity", spectral_bound),
        (7, "gradient vs finite differences", gradient_oracle),
        (8, "equioscillation", equioscillation),
        (9, "baseline ordering", baseline_ordering),
        (10, "SDP end-to-end", maxcut_k3),
    ];
    let mut failed = Vec::new();
    for (id, name, check) in criteria {
        if only.as_ref().is_some_and(|o| !o.contains(&id)) {
            continue;
        }
        let r = check();
        println!(
            "criterion {id:>2}: {} {name}: {}",
            if r.pass { "PASS" } else { "FAIL" },
            r.detail
        );
        let _ = std::io::stdout().flush();
        if !r.pass {
            failed.push(id);
        }
    }
    if failed.is_empty() {
        println!("acceptance: all criteria passed");
        ExitCode::SUCCESS
    } else {
        println!("acceptance: failed criteria {failed:?}");
        ExitCode::FAILURE
    }
}
