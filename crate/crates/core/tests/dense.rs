mod oracles;

use nalgebra::DMatrix;
use ndarray::{Array1, Array2};
use num_complex::Complex64;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rbfmol::dense::{
    condition_number, eigenvalues_general, pseudo_inverse, reduced_qr, singular_values, solve_spd,
    solve_upper_triangular, RegularizedUpper,
};

fn random(rows: usize, cols: usize, seed: u64) -> Array2<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Array2::from_shape_fn((rows, cols), |_| rng.random_range(-1.0..1.0))
}

fn max_abs(a: &Array2<f64>) -> f64 {
    a.iter().fold(0.0f64, |m, v| m.max(v.abs()))
}

#[test]
fn qr_of_a_tall_random_matrix() {
    let a = random(40, 10, 1);
    let qr = reduced_qr(&a.view()).unwrap();
    assert!(max_abs(&(qr.q.dot(&qr.r) - &a)) <= 1e-13);
    assert!(max_abs(&(qr.q.t().dot(&qr.q) - Array2::<f64>::eye(10))) <= 1e-13);
    for i in 0..10 {
        assert!(qr.r[(i, i)] >= 0.0);
        for j in 0..i {
            assert_eq!(qr.r[(i, j)], 0.0);
        }
    }
    assert!(qr.rank.full_rank());
}

#[test]
fn companion_matrix_eigenvalues() {
    // x³ − 6x² + 11x − 6 = (x − 1)(x − 2)(x − 3)
    let c = ndarray::arr2(&[[6.0, -11.0, 6.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0]]);
    let mut ev = eigenvalues_general(&c.view()).unwrap();
    ev.sort_by(|a, b| a.re.total_cmp(&b.re));
    for (k, z) in ev.iter().enumerate() {
        assert!((z - Complex64::new(k as f64 + 1.0, 0.0)).norm() <= 1e-12);
    }
}

#[test]
fn eigenvalues_match_characteristic_polynomial_roots() {
    for seed in 0..5 {
        let a = random(8, 8, 100 + seed);
        let lib = eigenvalues_general(&a.view()).unwrap();
        let oracle = oracles::polynomial_roots(&oracles::charpoly(&oracles::to_dmatrix(&a)));
        assert!(oracles::multiset_distance(&lib, &oracle) <= 1e-8, "seed {seed}");
    }
}

#[test]
fn singular_values_square_to_gram_eigenvalues() {
    let a = random(30, 12, 3);
    let s = singular_values(&a.view()).unwrap();
    let gram = a.t().dot(&a);
    let mut ev: Vec<f64> = eigenvalues_general(&gram.view())
        .unwrap()
        .iter()
        .map(|z| z.re)
        .collect();
    ev.sort_by(|a, b| b.total_cmp(a));
    for (sk, lk) in s.iter().zip(&ev) {
        assert!((sk * sk - lk).abs() <= 1e-12 * ev[0]);
    }
    let (_, js, _) = oracles::jacobi_svd(&oracles::to_dmatrix(&a));
    for (a, b) in s.iter().zip(&js) {
        assert!((a - b).abs() <= 1e-13 * s[0]);
    }
}

#[test]
fn condition_number_is_scale_invariant() {
    let a = random(20, 20, 4);
    let k = condition_number(&a.view()).unwrap();
    let k2 = condition_number(&(&a * 1e-7).view()).unwrap();
    assert!((k - k2).abs() <= 1e-10 * k);
    assert_eq!(condition_number(&Array2::<f64>::eye(5).view()).unwrap(), 1.0);
}

#[test]
fn hilbert_matrix_spd_solve() {
    let n = 12;
    let h = Array2::from_shape_fn((n, n), |(i, j)| 1.0 / (i + j + 1) as f64);
    let x_true = Array1::from_elem(n, 1.0);
    let b = h.dot(&x_true);
    let x = solve_spd(&h.view(), &b.view()).unwrap();
    // κ(H₁₂) ≈ 1.7e16: only the residual is small
    assert!((h.dot(&x) - &b).iter().all(|r| r.abs() <= 1e-12));
    assert!(oracles::cholesky(&oracles::to_dmatrix(&h)).is_some());
}

#[test]
fn upper_triangular_solve_of_size_fifty() {
    let mut r = random(50, 50, 5);
    for i in 0..50 {
        r[(i, i)] = 2.0 + r[(i, i)].abs();
        for j in 0..i {
            r[(i, j)] = 0.0;
        }
    }
    let x_true = random(50, 1, 6).column(0).to_owned();
    let x = solve_upper_triangular(&r.view(), &r.dot(&x_true).view()).unwrap();
    assert!(x.iter().zip(&x_true).all(|(a, b)| (a - b).abs() <= 1e-12));
}

#[test]
fn pseudo_inverse_matches_jacobi_oracle() {
    let mut a = random(15, 8, 7);
    // rank 7: last column repeats the first
    let c0 = a.column(0).to_owned();
    a.column_mut(7).assign(&c0);
    let lib = pseudo_inverse(&a.view()).unwrap();
    let oracle = oracles::jacobi_pinv(&oracles::to_dmatrix(&a), 15.0 * f64::EPSILON);
    let lib = oracles::to_dmatrix(&lib);
    assert!((&lib - &oracle).amax() <= 1e-10 * oracle.amax());
    // Moore–Penrose: A A† A = A
    let ad = oracles::to_dmatrix(&a);
    assert!((&ad * &lib * &ad - &ad).amax() <= 1e-12);
}

#[test]
fn qr_route_and_pseudoinverse_route_spectra_agree() {
    let a = random(15, 8, 8);
    let b = random(15, 8, 9);
    let qr = reduced_qr(&a.view()).unwrap();
    let c = qr.q.t().dot(&b);
    let tri = RegularizedUpper::new(&qr.r.view())
        .unwrap()
        .solve_matrix(&c.view())
        .unwrap();
    let pinv = pseudo_inverse(&a.view()).unwrap().dot(&b);
    assert!(max_abs(&(&tri - &pinv)) <= 1e-10 * max_abs(&pinv));
    let e1 = eigenvalues_general(&tri.view()).unwrap();
    let e2 = eigenvalues_general(&pinv.view()).unwrap();
    assert!(oracles::multiset_distance(&e1, &e2) <= 1e-8);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn qr_reconstructs(rows in 3usize..30, extra in 0usize..10, seed in 0u64..1000) {
        let cols = rows.saturating_sub(extra).max(1);
        let a = random(rows, cols, seed);
        let qr = reduced_qr(&a.view()).unwrap();
        prop_assert!(max_abs(&(qr.q.dot(&qr.r) - &a)) <= 1e-12);
    }

    #[test]
    fn singular_values_are_sorted_and_bound_the_norm(n in 2usize..15, seed in 0u64..1000) {
        let a = random(n + 3, n, seed);
        let s = singular_values(&a.view()).unwrap();
        prop_assert!(s.windows(2).all(|w| w[0] >= w[1]));
        let x = random(n, 1, seed + 1).column(0).to_owned();
        let ax = a.dot(&x);
        let ratio = ax.dot(&ax).sqrt() / x.dot(&x).sqrt();
        prop_assert!(ratio <= s[0] * (1.0 + 1e-12));
        prop_assert!(ratio >= s[n - 1] * (1.0 - 1e-12));
    }

    #[test]
    fn spd_solve_inverts(n in 1usize..20, seed in 0u64..1000) {
        let g = random(n, n, seed);
        let m = g.t().dot(&g) + Array2::<f64>::eye(n);
        let b = random(n, 1, seed + 7).column(0).to_owned();
        let x = solve_spd(&m.view(), &b.view()).unwrap();
        prop_assert!((m.dot(&x) - &b).iter().all(|r| r.abs() <= 1e-10));
    }
}

#[test]
fn dmatrix_helper_round_trips() {
    let a = random(3, 4, 10);
    let d: DMatrix<f64> = oracles::to_dmatrix(&a);
    assert_eq!(d[(2, 3)], a[(2, 3)]);
}
