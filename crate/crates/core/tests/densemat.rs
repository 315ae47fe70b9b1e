use proptest::prelude::*;
use psdfilter::datasets::haar_orthogonal;
use psdfilter::densemat::{
    eig_project, gemm, rel_error, round_to_precision, sym_eig, symmetrize, Matrix, PrecisionMode, SymmetricMatrix,
};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn sym_from(n: usize, vals: &[f64]) -> SymmetricMatrix {
    let mut m = Matrix::zeros(n, n);
    let mut k = 0;
    for i in 0..n {
        for j in i..n {
            m[(i, j)] = vals[k];
            m[(j, i)] = vals[k];
            k += 1;
        }
    }
    SymmetricMatrix::new(m).unwrap()
}

fn symmetric(max_n: usize) -> impl Strategy<Value = SymmetricMatrix> {
    (2..=max_n)
        .prop_flat_map(|n| prop::collection::vec(-1.0f64..1.0, n * (n + 1) / 2).prop_map(move |v| sym_from(n, &v)))
}

fn naive(a: &Matrix, b: &Matrix) -> Matrix {
    let mut c = Matrix::zeros(a.rows(), b.cols());
    for i in 0..a.rows() {
        for j in 0..b.cols() {
            c[(i, j)] = (0..a.cols()).map(|k| a[(i, k)] * b[(k, j)]).sum();
        }
    }
    c
}

#[test]
fn point_one_squared_in_half_differs_from_f64() {
    let a = Matrix::from_rows(&[vec![0.1, 0.1], vec![0.1, 0.1]]).unwrap();
    let h = gemm(&a, &a, PrecisionMode::F16_EMU).unwrap().matrix;
    let d = gemm(&a, &a, PrecisionMode::F64).unwrap().matrix;
    assert_ne!(h, d);
    for (x, y) in h.as_slice().iter().zip(d.as_slice()) {
        assert!((x - y).abs() <= 2f64.powi(-10));
    }
    // binary16 oracle: round inputs, accumulate in f32, round the sum
    let r = half::f16::from_f64(0.1).to_f32();
    let want = half::f16::from_f32(r * r + r * r).to_f64();
    assert_eq!(h[(0, 0)], want);
}

#[test]
fn large_gaussian_reconstructs() {
    let mut rng = ChaCha8Rng::seed_from_u64(50);
    let q = haar_orthogonal(150, &mut rng);
    let d: Vec<f64> = (0..150).map(|i| (i as f64 - 75.0) / 10.0).collect();
    let x = SymmetricMatrix::from_diag(&d).conjugate(&q);
    let e = sym_eig(&x).unwrap();
    let err = e.reconstruct().sub(&x).frobenius_norm();
    assert!(err <= 1e-10 * x.frobenius_norm(), "reconstruction error {err:e}");
    let qtq = naive(&e.vectors.transpose(), &e.vectors);
    let mut dev = 0.0;
    for i in 0..150 {
        for j in 0..150 {
            let want = if i == j { 1.0 } else { 0.0 };
            dev += (qtq[(i, j)] - want).powi(2);
        }
    }
    assert!(dev.sqrt() <= 1e-10 * 150.0);
}

#[test]
fn negative_definite_has_zero_projection() {
    let x = SymmetricMatrix::from_diag(&[-1.0, -2.0]);
    let c = SymmetricMatrix::from_diag(&[0.3, 0.4]);
    assert!((rel_error(&c, &x).unwrap() - 0.5).abs() < 1e-15);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn f64_gemm_matches_triple_loop(n in 1usize..40, seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = haar_orthogonal(n, &mut rng).scale(3.0);
        let b = haar_orthogonal(n, &mut rng);
        let got = gemm(&a, &b, PrecisionMode::F64).unwrap().matrix;
        let want = naive(&a, &b);
        let tol = 1e-13 * a.frobenius_norm() * b.frobenius_norm();
        for (x, y) in got.as_slice().iter().zip(want.as_slice()) {
            prop_assert!((x - y).abs() <= tol);
        }
    }

    #[test]
    fn rounding_is_idempotent(vals in prop::collection::vec(-7e4f64..7e4, 1..64)) {
        let m = Matrix::from_vec(1, vals.len(), vals).unwrap();
        for mode in [PrecisionMode::F64, PrecisionMode::F32, PrecisionMode::F16_EMU] {
            let once = round_to_precision(&m, mode).matrix;
            let twice = round_to_precision(&once, mode).matrix;
            prop_assert_eq!(once, twice);
        }
    }

    #[test]
    fn projection_is_nearest_psd(x in symmetric(12), seed in any::<u64>()) {
        let p = eig_project(&x).unwrap();
        let best = p.sub(&x).frobenius_norm();
        // compare against random PSD competitors B B^T
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for _ in 0..8 {
            let b = haar_orthogonal(x.n(), &mut rng).scale(rand::Rng::random_range(&mut rng, 0.0..1.5));
            let cand = symmetrize(&naive(&b, &b.transpose())).unwrap();
            prop_assert!(best <= cand.sub(&x).frobenius_norm() + 1e-12);
        }
        prop_assert!(best <= x.frobenius_norm() + 1e-12);
    }

    #[test]
    fn projection_is_idempotent(x in symmetric(10)) {
        let p = eig_project(&x).unwrap();
        let pp = eig_project(&p).unwrap();
        prop_assert!(pp.sub(&p).frobenius_norm() <= 1e-10 * p.frobenius_norm().max(1.0));
    }

    #[test]
    fn rel_error_is_rotation_invariant(x in symmetric(9), noise in symmetric(9), seed in any::<u64>()) {
        prop_assume!(x.n() == noise.n());
        let cand = eig_project(&x).unwrap().add(&noise.scale(1e-2));
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let q = haar_orthogonal(x.n(), &mut rng);
        let a = rel_error(&cand, &x).unwrap();
        let b = rel_error(&cand.conjugate(&q), &x.conjugate(&q)).unwrap();
        prop_assert!((a - b).abs() <= 1e-9 * a.max(1.0));
    }

    #[test]
    fn symmetrize_output_is_symmetric(vals in prop::collection::vec(-1.0f64..1.0, 100)) {
        let a = Matrix::from_vec(10, 10, vals).unwrap();
        let s = symmetrize(&a).unwrap();
        prop_assert_eq!(s.as_matrix().asymmetry(), 0.0);
    }
}
