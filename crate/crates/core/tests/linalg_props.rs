use idfom::linalg::{self, Bounds, DenseMatrix};
use proptest::prelude::*;

fn boxed(n: usize) -> impl Strategy<Value = (Bounds, Vec<f64>, Vec<f64>)> {
    (
        prop::collection::vec((-5.0f64..5.0, 0.0f64..4.0), n),
        prop::collection::vec(-20.0f64..20.0, n),
        prop::collection::vec(-20.0f64..20.0, n),
    )
        .prop_map(|(lw, a, b)| {
            let lb: Vec<f64> = lw.iter().map(|(l, _)| *l).collect();
            let ub: Vec<f64> = lw.iter().map(|(l, w)| l + w).collect();
            (Bounds::new(lb, ub).unwrap(), a, b)
        })
}

proptest! {
    #[test]
    fn projection_is_idempotent((b, a, _) in boxed(7)) {
        let p = linalg::box_project(&a, &b).unwrap();
        prop_assert_eq!(linalg::box_project(&p, &b).unwrap(), p.clone());
        prop_assert!(b.contains(&p));
    }

    #[test]
    fn projection_is_nonexpansive((b, x, y) in boxed(9)) {
        let px = linalg::box_project(&x, &b).unwrap();
        let py = linalg::box_project(&y, &b).unwrap();
        prop_assert!(linalg::dist(&px, &py) <= linalg::dist(&x, &y) * (1.0 + 1e-15));
    }

    #[test]
    fn spectral_below_frobenius(data in prop::collection::vec(-3.0f64..3.0, 24)) {
        let m = DenseMatrix::new(4, 6, data).unwrap();
        prop_assert!(linalg::spectral_norm(&m).unwrap() <= linalg::frobenius_norm(&m) * (1.0 + 1e-12));
    }

    #[test]
    fn two_by_two_eigen_extremes(a in 0.5f64..10.0, c in 0.5f64..10.0, t in -0.9f64..0.9) {
        // |b| < sqrt(ac) keeps the matrix positive definite
        let b = t * (a * c).sqrt();
        let q = DenseMatrix::from_rows(&[vec![a, b], vec![b, c]], 2).unwrap();
        let (lo, hi) = linalg::eig_extremes_spd(&q).unwrap();
        let mid = 0.5 * (a + c);
        let rad = (0.25 * (a - c) * (a - c) + b * b).sqrt();
        prop_assert!((hi - (mid + rad)).abs() <= 1e-8 * hi);
        prop_assert!((lo - (mid - rad)).abs() <= 1e-8 * hi);
    }
}

#[test]
fn three_by_three_closed_form() {
    // eigenvalues 2 - sqrt 2, 2, 2 + sqrt 2
    let q = DenseMatrix::from_rows(&[vec![2.0, -1.0, 0.0], vec![-1.0, 2.0, -1.0], vec![0.0, -1.0, 2.0]], 3).unwrap();
    let (lo, hi) = linalg::eig_extremes_spd(&q).unwrap();
    assert!((lo - (2.0 - 2f64.sqrt())).abs() <= 1e-8);
    assert!((hi - (2.0 + 2f64.sqrt())).abs() <= 1e-8);
}

#[test]
fn indefinite_matrix_is_rejected() {
    let q = DenseMatrix::from_rows(&[vec![1.0, 2.0], vec![2.0, 1.0]], 2).unwrap();
    assert!(linalg::eig_extremes_spd(&q).is_err());
}
