use proptest::prelude::*;
use psdfilter::design::{CompositeFilter, Provenance};
use psdfilter::golden;
use psdfilter::refine::{
    composite_eval_scalar, e_float_grid, e_float_half_lines, loss_gradient, refine_with_report, relu_error, relu_loss,
    RefineConfig, SampleGrid,
};
use twofloat::TwoFloat;

fn single_stage(c: &[f64]) -> CompositeFilter {
    CompositeFilter::from_coefficients(&[c.to_vec()], 0.5, Provenance::UserSupplied).unwrap()
}

/// Signed error in double-double arithmetic with coefficient `k` shifted by `h`.
fn error_dd(filter: &CompositeFilter, k: usize, h: f64, x: f64) -> TwoFloat {
    let mut idx = 0;
    let mut y = TwoFloat::from(x);
    for row in filter.coefficient_rows() {
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
        let y2 = y * y;
        let mut p = TwoFloat::from(0.0);
        for c in coeffs.iter().rev() {
            p = p * y2 + *c;
        }
        y *= p;
    }
    TwoFloat::from(0.5) * TwoFloat::from(x) * (y + 1.0) - x.max(0.0)
}

/// Central difference with one Richardson step, all in double-double so
/// neither cancellation nor the O(h^2) term reaches the 1e-6 level.
fn fd_partial(filter: &CompositeFilter, k: usize, x: f64) -> f64 {
    let central = |h: f64| (error_dd(filter, k, h, x) - error_dd(filter, k, -h, x)) / (2.0 * h);
    let h = 1e-6;
    ((central(h / 2.0) * 4.0 - central(h)) / 3.0).into()
}

fn filters() -> [CompositeFilter; 4] {
    [
        golden::half_stage1(),
        golden::half_refined(),
        golden::single_stage1(),
        golden::single_refined(),
    ]
}

#[test]
fn eval_examples() {
    let f = golden::half_refined();
    assert_eq!(composite_eval_scalar(&f, 0.0), 0.0);
    assert!((composite_eval_scalar(&f, 1.0) - 1.0).abs() <= 4.9233e-5);
    let id = single_stage(&[1.0]);
    assert!((composite_eval_scalar(&id, 0.7) - 0.595).abs() < 1e-15);
}

#[test]
fn identity_is_exact_on_three_points() {
    let grid = SampleGrid::new(vec![-1.0, 0.0, 1.0], psdfilter::refine::GridScheme::Uniform).unwrap();
    assert_eq!(relu_loss(&single_stage(&[1.0]), &grid).0, 0.0);
}

#[test]
fn identity_error_peaks_at_half() {
    // |x(1+x)/2 - relu(x)| = |x|(1-|x|)/2, maximal at |x| = 1/2
    let cert = e_float_grid(&single_stage(&[1.0]), &SampleGrid::uniform(4001).unwrap());
    assert!((cert.e_value - 0.125).abs() < 1e-15);
    assert_eq!(cert.argmax_x.abs(), 0.5);
}

/// The chain is odd, so x(1+f)/2 - relu(x) is even and both half-lines
/// share one maximum up to rounding.
#[test]
fn half_lines_agree() {
    let f = golden::half_stage1();
    let ((ep, xp), (en, xn)) = e_float_half_lines(&f);
    assert!(xp >= 0.0 && xn <= 0.0);
    assert!((ep - en).abs() <= 1e-12 * ep, "{ep:e} vs {en:e}");
    let grid = SampleGrid::mixed(1 << 16).unwrap();
    for &x in grid.points() {
        let x32 = x as f32 as f64;
        let bound = if x32 >= 0.0 { ep } else { en };
        assert!(relu_error(&f, x32).abs() <= bound);
    }
}

#[test]
fn gradient_hand_examples() {
    assert_eq!(loss_gradient(&single_stage(&[2.0]), 0.5), vec![0.125]);
    for f in filters() {
        assert!(loss_gradient(&f, 0.0).iter().all(|&g| g == 0.0));
    }
}

#[test]
fn gradient_matches_double_double_differences() {
    use rand::{Rng, SeedableRng};
    let fs = filters();
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
    for _ in 0..300 {
        let f = &fs[rng.random_range(0..fs.len())];
        let x: f64 = rng.random_range(-1.0..1.0);
        let k = rng.random_range(0..f.num_coefficients());
        let g = loss_gradient(f, x);
        let scale = g.iter().fold(0.0f64, |a, b| a.max(b.abs()));
        let fd = fd_partial(f, k, x);
        // entries below f64 resolution of the gradient are held to that floor
        let floor = f64::EPSILON * scale;
        assert!(
            (g[k] - fd).abs() <= 1e-6 * fd.abs().max(floor),
            "x {x} k {k}: analytic {:e} fd {fd:e}",
            g[k]
        );
    }
}

#[test]
fn zero_budget_returns_input() {
    let f = golden::half_stage1();
    let mut cfg = RefineConfig::new(SampleGrid::mixed(2048).unwrap());
    cfg.max_iters = 0;
    let out = refine_with_report(&f, &cfg).unwrap();
    assert_eq!(out.filter.flat_coefficients(), f.flat_coefficients());
}

#[test]
fn refinement_is_deterministic() {
    let mut cfg = RefineConfig::new(SampleGrid::mixed(4096).unwrap());
    cfg.max_iters = 200;
    let a = refine_with_report(&golden::half_stage1(), &cfg).unwrap();
    let b = refine_with_report(&golden::half_stage1(), &cfg).unwrap();
    assert_eq!(a.filter.flat_coefficients(), b.filter.flat_coefficients());
    assert_eq!(a.final_loss, b.final_loss);
}

#[test]
fn short_refinement_improves_stage_one() {
    let grid = SampleGrid::mixed(8192).unwrap();
    let mut cfg = RefineConfig::new(grid.clone());
    cfg.max_iters = 400;
    let f = golden::half_stage1();
    let out = refine_with_report(&f, &cfg).unwrap();
    let before = relu_loss(&f, &grid).0;
    let after = relu_loss(&out.filter, &grid).0;
    assert!(after < before, "{after:e} !< {before:e}");
    assert_eq!(after, out.final_loss);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn refinement_never_worsens_loss(
        pick in 0usize..4,
        noise in prop::collection::vec(-1e-4f64..1e-4, 30),
        iters in 1usize..60,
    ) {
        let mut f = filters()[pick].clone();
        let mut c = f.flat_coefficients();
        for (ci, e) in c.iter_mut().zip(&noise) {
            *ci *= 1.0 + e;
        }
        f.set_flat_coefficients(&c);
        let grid = SampleGrid::mixed(2048).unwrap();
        let mut cfg = RefineConfig::new(grid.clone());
        cfg.max_iters = iters;
        let out = refine_with_report(&f, &cfg).unwrap();
        prop_assert!(relu_loss(&out.filter, &grid).0 <= relu_loss(&f, &grid).0);
    }

    #[test]
    fn error_vanishes_at_zero_and_is_bounded(x in -1.0f64..1.0, pick in 0usize..4) {
        let f = &filters()[pick];
        prop_assert_eq!(relu_error(f, 0.0), 0.0);
        prop_assert!(relu_error(f, x).abs() <= 1e-4);
    }
}
