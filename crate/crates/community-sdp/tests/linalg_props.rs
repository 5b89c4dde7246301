use community_sdp::linalg::{eigenvalues, lambda2_orth, lambda_min, psd_project, spectral_norm, sym_eig, Matrix};
use proptest::prelude::*;

fn sym(n: usize) -> impl Strategy<Value = Matrix> {
    proptest::collection::vec(-5.0f64..5.0, n * n).prop_map(move |v| {
        let mut m = Matrix::from_row_major(n, v);
        m.symmetrize();
        m
    })
}

fn psd(n: usize) -> impl Strategy<Value = Matrix> {
    proptest::collection::vec(-2.0f64..2.0, n * n).prop_map(move |v| {
        let g = Matrix::from_row_major(n, v);
        let gt = Matrix::from_fn(n, |i, j| g.get(j, i));
        let mut m = g.matmul(&gt);
        m.symmetrize();
        m
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn projection_satisfies_variational_inequality(m in sym(6), xs in proptest::collection::vec(psd(6), 10)) {
        let (p, _) = psd_project(&m).unwrap();
        prop_assert!(lambda_min(&p).unwrap() >= -1e-10);
        let mut r = m.clone();
        r.axpy(-1.0, &p);
        for x in &xs {
            let mut d = x.clone();
            d.axpy(-1.0, &p);
            prop_assert!(r.inner(&d) <= 1e-9 * (1.0 + r.frob_norm() * d.frob_norm()));
        }
        // No random PSD matrix is closer than the projection.
        for x in &xs {
            let mut d = m.clone();
            d.axpy(-1.0, x);
            prop_assert!(r.frob_norm() <= d.frob_norm() + 1e-9);
        }
    }

    #[test]
    fn spectral_norm_even_and_subadditive(a in sym(7), b in sym(7)) {
        let na = spectral_norm(&a).unwrap();
        prop_assert!((na - spectral_norm(&a.scaled(-1.0)).unwrap()).abs() <= 1e-10 * (1.0 + na));
        let mut s = a.clone();
        s.axpy(1.0, &b);
        prop_assert!(spectral_norm(&s).unwrap() <= na + spectral_norm(&b).unwrap() + 1e-10);
    }

    #[test]
    fn lambda2_orth_dominates_smallest_eigenvalue(s in sym(8), xi in proptest::collection::vec(-1.0f64..1.0, 8)) {
        prop_assume!(xi.iter().map(|x| x * x).sum::<f64>() > 1e-3);
        let lmin = eigenvalues(&s).unwrap()[0];
        prop_assert!(lambda2_orth(&s, &xi).unwrap() >= lmin - 1e-10);
    }

    #[test]
    fn lambda2_orth_of_bottom_eigenvector_is_second_eigenvalue(s in sym(8)) {
        let e = sym_eig(&s).unwrap();
        let v = e.vector(0);
        let got = lambda2_orth(&s, &v).unwrap();
        prop_assert!((got - e.values[1]).abs() <= 1e-9 * (1.0 + e.values[1].abs()));
    }
}
