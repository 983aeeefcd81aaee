mod common;

use common::*;
use elsa_core::pipeline::{
    build_designed_input, build_designed_weights, build_enumerated_input, build_enumerated_weights, run_pipeline,
    run_with_weights, step, Form,
};
use elsa_core::ridge::{stable_eta, RidgeProblem};
use elsa_core::sample::{random_ridge_problem, stream_rng};
use elsa_core::Matrix;

fn problem(stream: u64, n: usize, d: usize, lambda: f64, steps: usize) -> RidgeProblem {
    random_ridge_problem(&mut stream_rng(77, stream), n, d, lambda, steps)
}

#[test]
fn update_is_zero_outside_w_column() {
    for (stream, (n, d)) in [(1, 6), (9, 3), (2, 1), (1, 1)].into_iter().enumerate() {
        let p = problem(stream as u64, n, d, 0.8, 3);
        for (state, weights) in [
            (build_designed_input(&p).unwrap(), build_designed_weights(n, d)),
            (build_enumerated_input(&p).unwrap(), build_enumerated_weights(n, d)),
        ] {
            let update = weights.step.update(&state.h).unwrap();
            let blk = state.layout.w_block();
            let outside = update.block_write(&blk, &Matrix::zeros(blk.height(), 1)).unwrap();
            assert!(outside.is_zero(), "n={n} d={d}");
        }
    }
}

#[test]
fn copied_weights_give_identical_traces() {
    let p = problem(10, 12, 4, 0.3, 40);
    for form in [Form::Lsa, Form::Elsa] {
        let w = match form {
            Form::Lsa => build_designed_weights(12, 4),
            _ => build_enumerated_weights(12, 4),
        };
        let copy: elsa_core::pipeline::ModuleWeights = serde_json::from_str(&serde_json::to_string(&w).unwrap()).unwrap();
        let a = run_with_weights(&p, form, &w).unwrap();
        let b = run_with_weights(&p, form, &copy).unwrap();
        for (x, y) in a.w_trace.iter().zip(&b.w_trace) {
            assert!(x.as_slice().iter().zip(y.as_slice()).all(|(u, v)| u.to_bits() == v.to_bits()));
        }
        assert_eq!(a.prediction.to_bits(), b.prediction.to_bits());
    }
}

#[test]
fn two_hundred_steps_track_the_recurrence() {
    let p = problem(11, 20, 4, 0.5, 200);
    let oracle = gd_recurrence(&dense(&p.x), &col(&p.y), p.lambda, p.eta, &col(&p.w0), 200);
    for form in [Form::Lsa, Form::Elsa, Form::LsaAsElsa] {
        let run = run_pipeline(&p, form).unwrap();
        assert_eq!(run.report.per_step_deviation.len(), 200);
        assert!(run.report.max_step_deviation <= 1e-9, "{form}");
        for (w, o) in run.w_trace.iter().zip(&oracle) {
            assert!(max_abs_diff(&col(w), o) <= 1e-10 * max_abs(o));
        }
    }
}

#[test]
fn forms_agree_on_prediction() {
    let p = problem(12, 9, 3, 1.2, 120);
    let a = run_pipeline(&p, Form::Lsa).unwrap().prediction;
    let b = run_pipeline(&p, Form::Elsa).unwrap().prediction;
    assert!((a - b).abs() <= 1e-9);
}

#[test]
fn non_w_columns_never_change() {
    let p = problem(13, 5, 2, 0.4, 1);
    for (s0, w) in [
        (build_designed_input(&p).unwrap(), build_designed_weights(5, 2)),
        (build_enumerated_input(&p).unwrap(), build_enumerated_weights(5, 2)),
    ] {
        let mut s = s0.clone();
        for _ in 0..10 {
            s = step(&s, &w).unwrap();
        }
        let cols = s.h.cols();
        for i in 0..s.h.rows() {
            for j in 0..cols - 1 {
                assert_eq!(s.h.get(i, j).to_bits(), s0.h.get(i, j).to_bits());
            }
        }
        assert_eq!(s.t, 10);
    }
}

#[test]
fn report_json_fields() {
    let p = problem(14, 4, 2, 0.2, 3);
    let run = run_pipeline(&p, Form::Elsa).unwrap();
    let v: serde_json::Value = serde_json::to_value(&run.report).unwrap();
    for key in [
        "form",
        "n",
        "d",
        "lambda",
        "eta",
        "T",
        "prediction",
        "oracle_prediction",
        "closed_form_prediction",
        "max_step_deviation",
        "per_step_deviation",
    ] {
        assert!(v.get(key).is_some(), "missing {key}");
    }
    assert_eq!(v["form"], "elsa");
    assert_eq!(v["T"], 3);
}

#[test]
fn stable_eta_matches_jacobi() {
    for stream in 0..5 {
        let p = problem(20 + stream, 15, 5, 0.7, 0);
        let gram = reference_matmul(&transpose(&dense(&p.x)), &dense(&p.x));
        let want = 1.0 / (jacobi_max_eigenvalue(&gram) + 0.7);
        assert!((stable_eta(&p) - want).abs() <= 1e-10 * want);
    }
}
