mod common;

use common::*;
use elsa_core::gauss::{solve, solve_traced, DivisionMode, LinearSystem, Stage, PIVOT_TOLERANCE};
use elsa_core::invsqr::{KnotSpec, PiecewiseInvSqr};
use elsa_core::sample::{diagonally_dominant_system, stream_rng};
use elsa_core::{Error, Matrix};

#[test]
fn duplicate_rows_stop_at_a_small_pivot() {
    let f = Matrix::from_rows(&[[1.0, 2.0, 3.0], [1.0, 2.0, 3.0], [0.0, 1.0, 4.0]]).unwrap();
    let sys = LinearSystem::new(f, Matrix::column(&[1.0, 1.0, 1.0]).unwrap()).unwrap();
    match solve(&sys, &DivisionMode::Exact) {
        Err(Error::PivotBelowTolerance { index, .. }) => assert_eq!(index, 2),
        other => panic!("expected PivotBelowTolerance, got {other:?}"),
    }
}

#[test]
fn stages_run_in_order() {
    let sys = diagonally_dominant_system(&mut stream_rng(5, 0), 4, 0.0, 1.0, true);
    let (_, _, states) = solve_traced(&sys, &DivisionMode::Exact, PIVOT_TOLERANCE).unwrap();
    let stages: Vec<Stage> = states.iter().map(|s| s.stage).collect();
    assert_eq!(
        stages,
        vec![
            Stage::Forward(0),
            Stage::Forward(1),
            Stage::Forward(2),
            Stage::Forward(3),
            Stage::Backward(4),
            Stage::Backward(3),
            Stage::Backward(2),
            Stage::Backward(1),
        ]
    );
}

#[test]
fn relu_mode_flags_pivots_outside_the_grid() {
    let f = Matrix::from_rows(&[[500.0, 1.0], [1.0, 600.0]]).unwrap();
    let sys = LinearSystem::new(f, Matrix::column(&[1.0, 2.0]).unwrap()).unwrap();
    let mode = DivisionMode::Relu(PiecewiseInvSqr::build(&KnotSpec::default()).unwrap());
    let (_, report) = solve(&sys, &mode).unwrap();
    assert_eq!(report.flags.len(), 2);
    let (_, report) = solve(&sys, &DivisionMode::Exact).unwrap();
    assert!(report.flags.is_empty());
}

#[test]
fn exact_mode_matches_oracle_on_larger_systems() {
    let mut rng = stream_rng(6, 0);
    for m in [8, 16, 24] {
        let sys = diagonally_dominant_system(&mut rng, m, 1.0, 3.0, true);
        let (x, report) = solve(&sys, &DivisionMode::Exact).unwrap();
        let oracle = dense_solve(&dense(&sys.f), &col(&sys.alpha));
        assert!(max_abs_diff(&col(&x), &oracle) <= 1e-8 * max_abs(&oracle));
        assert!(report.rel_error_vs_oracle.unwrap() <= 1e-8);
        assert_eq!(report.pivots.len(), m);
    }
}
