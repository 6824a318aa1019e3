use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use stiefel_hermite::linalg::{expm, logm, orth_complete, qr_econ, skew, svd_full, Matrix};

fn random_matrix(seed: u64, rows: usize, cols: usize) -> Matrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Matrix::from_fn(rows, cols, |_, _| rng.random_range(-1.0..1.0))
}

fn orthonormality_defect(q: &Matrix) -> f64 {
    (q.transpose() * q - Matrix::identity(q.ncols(), q.ncols())).norm()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn qr_reconstructs_with_positive_diagonal(seed in any::<u64>(), r in 1usize..7, extra in 0usize..20) {
        let a = random_matrix(seed, r + extra, r);
        let qr = qr_econ(&a).unwrap();
        prop_assert!((qr.recompose() - &a).norm() <= 1e-12 * a.norm().max(1.0));
        prop_assert!(orthonormality_defect(&qr.q) <= 1e-12);
        for i in 0..r {
            prop_assert!(qr.r_factor[(i, i)] >= 0.0);
            for j in 0..i {
                prop_assert_eq!(qr.r_factor[(i, j)], 0.0);
            }
        }
    }

    #[test]
    fn svd_is_ordered_and_reconstructs(seed in any::<u64>(), m in 1usize..7, extra in 0usize..20) {
        let y = random_matrix(seed, m + extra, m);
        let svd = svd_full(&y).unwrap();
        prop_assert!((svd.recompose() - &y).norm() <= 1e-12 * y.norm().max(1.0));
        prop_assert!(svd.sigma.as_slice().windows(2).all(|w| w[0] >= w[1]));
        prop_assert_eq!(svd.v.shape(), (m, m));
        prop_assert!(orthonormality_defect(&svd.v) <= 1e-12);
    }

    #[test]
    fn logm_inverts_expm_on_small_skew(seed in any::<u64>(), k in 2usize..9, scale in 0.01f64..2.5) {
        let s = skew(&random_matrix(seed, k, k));
        let s = &s * (scale / s.norm().max(1e-300));
        let back = logm(&expm(&s).unwrap()).unwrap();
        prop_assert!((back - &s).norm() <= 1e-11, "scale {}", scale);
    }

    #[test]
    fn completion_is_orthogonal(seed in any::<u64>(), r in 1usize..6, extra in 0usize..6) {
        let v_r = qr_econ(&random_matrix(seed, r + extra, r)).unwrap().q;
        let comp = orth_complete(&v_r).unwrap();
        prop_assert_eq!(comp.shape(), (r + extra, extra));
        let mut full = v_r.clone().insert_columns(r, extra, 0.0);
        full.columns_mut(r, extra).copy_from(&comp);
        prop_assert!(orthonormality_defect(&full) <= 1e-12);
    }
}

#[test]
fn kernels_reject_bad_shapes_and_values() {
    assert!(expm(&Matrix::zeros(2, 3)).is_err());
    assert!(logm(&Matrix::from_element(2, 2, f64::NAN)).is_err());
    assert!(qr_econ(&Matrix::zeros(2, 3)).is_err());
    assert!(svd_full(&Matrix::zeros(2, 3)).is_err());
}

#[test]
fn logm_rejects_negative_real_eigenvalues() {
    let reflection = Matrix::from_row_slice(2, 2, &[-1.0, 0.0, 0.0, 1.0]);
    assert!(logm(&reflection).is_err());
}
