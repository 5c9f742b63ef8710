use nalgebra::DMatrix;
use proptest::prelude::*;
use wr_core::rigidity::{bracket_wedge, wedge_endomorphism, WedgeElement};

fn element(coeffs: &[f64], n: usize) -> WedgeElement {
    let mut z = WedgeElement::zero();
    let mut c = coeffs.iter();
    for i in 0..n {
        for j in i + 1..n {
            z.add_term(*c.next().unwrap(), i, j);
        }
    }
    z
}

fn grams() -> Vec<DMatrix<f64>> {
    vec![
        DMatrix::identity(4, 4),
        DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![-1.0, 1.0, 1.0, 1.0])),
        DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![0.0, 1.0, 1.0, 1.0])),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn jacobi_and_antisymmetry(a in prop::collection::vec(-1.0f64..1.0, 6),
                               b in prop::collection::vec(-1.0f64..1.0, 6),
                               c in prop::collection::vec(-1.0f64..1.0, 6)) {
        for g in grams() {
            let (x, y, z) = (element(&a, 4), element(&b, 4), element(&c, 4));
            let br = |p: &WedgeElement, q: &WedgeElement| bracket_wedge(&g, p, q).unwrap();
            let cyc = br(&br(&x, &y), &z).add(&br(&br(&y, &z), &x)).add(&br(&br(&z, &x), &y));
            prop_assert!(cyc.max_abs() < 1e-10);
            prop_assert!(br(&x, &y).add(&br(&y, &x)).max_abs() < 1e-12);
            let l = wedge_endomorphism(&g, &x).unwrap();
            prop_assert!(l.antisymmetry_residual(&g) < 1e-12);
        }
    }
}
