mod common;

use common::*;
use elsa_core::attention::{elsa_forward, skip_params};
use elsa_core::invsqr::{KnotSpec, PiecewiseInvSqr};
use elsa_core::mask_move::{mskmov, MskMovSpec};
use elsa_core::{BlockSpec, Matrix};
use proptest::prelude::*;

fn matrix(rows: usize, cols: usize) -> impl Strategy<Value = Matrix> {
    prop::collection::vec(-1e3f64..1e3, rows * cols).prop_map(move |v| Matrix::new(rows, cols, v).unwrap())
}

fn host_and_spec() -> impl Strategy<Value = (Matrix, MskMovSpec)> {
    (1usize..=7, 1usize..=7)
        .prop_flat_map(|(m, n)| (matrix(m, n), 1..=m, 1..=n, Just((m, n))))
        .prop_flat_map(|(a, i, k, (m, n))| (Just(a), Just((i, k)), i..=m, k..=n, Just((m, n))))
        .prop_flat_map(|(a, (i, k), j, l, (m, n))| {
            let rows = (1 - i as isize)..=((m - j) as isize);
            let cols = (1 - k as isize)..=((n - l) as isize);
            (Just(a), rows, cols).prop_map(move |(a, da, db)| (a, MskMovSpec::new(BlockSpec::new(i, j, k, l), (m, n), da, db)))
        })
}

proptest! {
    #[test]
    fn mskmov_matches_copy_loop((a, spec) in host_and_spec()) {
        let got = mskmov(&a, &spec).unwrap();
        prop_assert_eq!(dense(&got), copy_loop_mskmov(&dense(&a), &spec));
    }

    #[test]
    fn skip_is_exact(h in (1usize..=6, 1usize..=6).prop_flat_map(|(m, n)| matrix(m, n))) {
        let out = elsa_forward(&h, &skip_params(h.shape())).unwrap();
        prop_assert_eq!(out, h);
    }

    #[test]
    fn invsqr_even_and_matches_interpolation(x in -250.0f64..250.0, n in 2usize..200) {
        let f = PiecewiseInvSqr::build(&KnotSpec::geometric(n)).unwrap();
        prop_assert!((f.eval(x) - f.eval(-x)).abs() <= 1e-12);
        let want = invsqr_piecewise(f.knots(), x);
        prop_assert!((f.eval(x) - want).abs() <= 1e-10 * want.max(1.0));
    }
}
