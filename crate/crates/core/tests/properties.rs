use proptest::prelude::*;

use perturbed_pricing::linalg::Matrix;
use perturbed_pricing::perturbation::perturbed_price;
use perturbed_pricing::spectral::{
    approx_isometry_margin, f_p_bound, f_p_grid_min, lambda_min, schur_lower_bound, BlockMatrix,
    DesignAccumulator,
};
use perturbed_pricing::PriceBox;

fn gram(n: usize, g: &[f64]) -> Matrix {
    let k = g.len() / n;
    let m = Matrix::from_row_major(k, n, g.to_vec()).unwrap();
    m.transpose().matmul(&m).unwrap().symmetrized().unwrap()
}

prop_compose! {
    fn psd(max_n: usize)(n in 1..=max_n, k in 1..=8usize)(
        g in proptest::collection::vec(-2.0..2.0f64, n * k), n in Just(n)
    ) -> Matrix {
        gram(n, &g)
    }
}

prop_compose! {
    fn blocks()(upper in 1..=4usize, lower in 1..=4usize)(
        g in proptest::collection::vec(-2.0..2.0f64, (upper + lower) * (upper + lower + 2)),
        upper in Just(upper),
        lower in Just(lower),
    ) -> (Matrix, usize) {
        let n = upper + lower;
        (gram(n, &g).add(&Matrix::identity(n).scale(1e-3)).unwrap(), upper)
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn schur_bound_never_exceeds_smallest_eigenvalue((m, upper) in blocks()) {
        let split = BlockMatrix::split(&m, upper).unwrap();
        let bound = schur_lower_bound(&split).unwrap();
        prop_assert!(bound <= lambda_min(&m).unwrap() + 1e-10);
    }

    #[test]
    fn isometry_margin_is_nonnegative(a in psd(5), e in proptest::collection::vec(-0.5..0.5f64, 25)) {
        let n = a.rows();
        let e = Matrix::from_row_major(n, n, e[..n * n].to_vec()).unwrap().symmetrized().unwrap();
        let b = a.add(&e).unwrap();
        prop_assert!(approx_isometry_margin(&a, &b).unwrap() >= -1e-10);
    }

    #[test]
    fn f_p_grid_stays_above_bound(b in 0.0..20.0f64) {
        prop_assert!(f_p_grid_min(b, 10_000) >= f_p_bound(b) - 1e-9);
    }

    #[test]
    fn recorded_lambda_min_never_decreases(rows in proptest::collection::vec(proptest::collection::vec(-1.0..1.0f64, 3), 1..60)) {
        let mut acc = DesignAccumulator::new(3);
        for x in &rows {
            acc.push(x).unwrap();
            acc.record().unwrap();
        }
        for w in acc.trace().windows(2) {
            prop_assert!(w[1].1 >= w[0].1 - 1e-12);
        }
    }

    #[test]
    fn perturbed_price_stays_in_box(
        lower in 0.1..3.0f64, width in 0.1..5.0f64, frac in 0.0..=1.0f64,
        alpha in 0.0..2.0f64, u in -1.0..=1.0f64,
    ) {
        let price_box = PriceBox::new(lower, lower + width).unwrap();
        let p_ce = lower + frac * width;
        let p = perturbed_price(p_ce, alpha, &[u], &price_box).unwrap();
        prop_assert!(price_box.contains(p));
        if price_box.contains(p_ce + alpha * u) {
            prop_assert_eq!(p, p_ce + alpha * u);
        }
    }
}
