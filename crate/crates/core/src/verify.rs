//! Seeded property suites for the mask-and-move operator and the ELSA
//! constructions, used by the command-line `verify-lemmas` front end.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::attention::{
    const_params, elsa_forward, lsa_matmul_params, matmul_params_v1, matmul_params_v2, skip_params,
    AttentionHead, MatmulConstruction,
};
use crate::mask_move::{mskmov, MskMovSpec};
use crate::matrix::Matrix;
use crate::sample::{random_matrix, random_mskmov_spec, stream_rng};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VerifyConfig {
    pub seed: u64,
    /// Trials per shape.
    pub trials: usize,
    pub max_dim: usize,
    /// Tolerance for the product constructions; the other suites are exact.
    pub tol: f64,
    /// Adds 1 to one bias entry of every constant head (negative control).
    pub perturb: bool,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            trials: 100,
            max_dim: 6,
            tol: 1e-12,
            perturb: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SuiteReport {
    pub suite: String,
    pub trials: usize,
    pub passed: usize,
    pub failed: usize,
    pub max_error: f64,
    pub first_failure: Option<String>,
}

impl SuiteReport {
    fn new(suite: &str) -> Self {
        Self {
            suite: suite.to_string(),
            trials: 0,
            passed: 0,
            failed: 0,
            max_error: 0.0,
            first_failure: None,
        }
    }

    fn record(&mut self, ok: bool, err: f64, what: impl FnOnce() -> String) {
        self.trials += 1;
        self.max_error = self.max_error.max(err);
        if ok {
            self.passed += 1;
        } else {
            self.failed += 1;
            if self.first_failure.is_none() {
                self.first_failure = Some(what());
            }
        }
    }

    pub fn ok(&self) -> bool {
        self.failed == 0
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub config: VerifyConfig,
    pub suites: Vec<SuiteReport>,
    pub warnings: Vec<String>,
}

impl VerifyReport {
    pub fn all_passed(&self) -> bool {
        self.suites.iter().all(SuiteReport::ok)
    }

    pub fn failing(&self) -> Vec<&str> {
        self.suites.iter().filter(|s| !s.ok()).map(|s| s.suite.as_str()).collect()
    }
}

fn shapes(max_dim: usize) -> impl Iterator<Item = (usize, usize)> {
    (1..=max_dim).flat_map(move |m| (1..=max_dim).map(move |n| (m, n)))
}

/// Entry-by-entry copy, straight from the definition.
fn copy_loop_mskmov(a: &Matrix, spec: &MskMovSpec) -> Matrix {
    let mut out = Matrix::zeros(a.rows(), a.cols());
    for r in spec.i..=spec.j {
        for c in spec.k..=spec.l {
            let (tr, tc) = ((r as isize + spec.a) as usize, (c as isize + spec.b) as usize);
            out.set(tr - 1, tc - 1, a.get(r - 1, c - 1));
        }
    }
    out
}

fn bitwise_eq(a: &Matrix, b: &Matrix) -> bool {
    a.shape() == b.shape() && a.as_slice().iter().zip(b.as_slice()).all(|(x, y)| x.to_bits() == y.to_bits())
}

fn mask_move_suite(cfg: &VerifyConfig) -> SuiteReport {
    let mut rep = SuiteReport::new("mask_move");
    let mut rng = stream_rng(cfg.seed, 1);
    for (m, n) in shapes(cfg.max_dim) {
        for _ in 0..cfg.trials {
            let a = random_matrix(&mut rng, m, n);
            let spec = random_mskmov_spec(&mut rng, m, n);
            let got = mskmov(&a, &spec);
            let want = copy_loop_mskmov(&a, &spec);
            let (ok, err) = match &got {
                Ok(g) => (bitwise_eq(g, &want), g.max_abs_diff(&want).unwrap_or(f64::INFINITY)),
                Err(_) => (false, f64::INFINITY),
            };
            rep.record(ok, err, || format!("{m}x{n} spec {spec:?}"));
        }
    }
    rep
}

fn const_suite(cfg: &VerifyConfig) -> SuiteReport {
    let mut rep = SuiteReport::new("const");
    let mut rng = stream_rng(cfg.seed, 2);
    for (m, n) in shapes(cfg.max_dim) {
        for _ in 0..cfg.trials {
            let h = random_matrix(&mut rng, m, n);
            let c = random_matrix(&mut rng, m, n);
            let mut p = const_params(&c, (m, n)).expect("shapes agree");
            if cfg.perturb {
                p.b3[(0, 0)] += 1.0;
            }
            let (ok, err) = match elsa_forward(&h, &p) {
                Ok(out) => (out == c, out.max_abs_diff(&c).unwrap_or(f64::INFINITY)),
                Err(_) => (false, f64::INFINITY),
            };
            rep.record(ok, err, || format!("{m}x{n}"));
        }
    }
    rep
}

fn skip_suite(cfg: &VerifyConfig) -> SuiteReport {
    let mut rep = SuiteReport::new("skip");
    let mut rng = stream_rng(cfg.seed, 3);
    for (m, n) in shapes(cfg.max_dim) {
        let p = skip_params((m, n));
        for _ in 0..cfg.trials {
            let h = random_matrix(&mut rng, m, n);
            let (ok, err) = match elsa_forward(&h, &p) {
                Ok(out) => (bitwise_eq(&out, &h), out.max_abs_diff(&h).unwrap_or(f64::INFINITY)),
                Err(_) => (false, f64::INFINITY),
            };
            rep.record(ok, err, || format!("{m}x{n}"));
        }
    }
    rep
}

/// Reference `A B` by triple loop.
fn reference_product(a: &Matrix, b: &Matrix) -> Matrix {
    Matrix::from_fn(a.rows(), b.cols(), |i, j| (0..a.cols()).map(|k| a.get(i, k) * b.get(k, j)).sum())
}

/// Designated block within `tol` of `A B`, every other entry exactly zero.
fn check_product<P: AttentionHead>(c: &MatmulConstruction<P>, a: &Matrix, b: &Matrix, tol: f64) -> (bool, f64) {
    let Ok(h) = c.layout.pack(a, b) else {
        return (false, f64::INFINITY);
    };
    let Ok(out) = c.params.forward(&h) else {
        return (false, f64::INFINITY);
    };
    let want = reference_product(a, b);
    let blk = c.output_block;
    let mut err: f64 = 0.0;
    let mut outside_zero = true;
    for i in 0..out.rows() {
        for j in 0..out.cols() {
            let v = out.get(i, j);
            if blk.contains(i + 1, j + 1) {
                err = err.max((v - want.get(i + 1 - blk.row_lo, j + 1 - blk.col_lo)).abs());
            } else if v != 0.0 {
                outside_zero = false;
            }
        }
    }
    (outside_zero && err <= tol, err)
}

fn matmul_suite<P: AttentionHead>(
    cfg: &VerifyConfig,
    name: &str,
    stream: u64,
    build: impl Fn(usize, usize, usize) -> crate::Result<MatmulConstruction<P>>,
) -> SuiteReport {
    let mut rep = SuiteReport::new(name);
    let mut rng = stream_rng(cfg.seed, stream);
    for (r, t) in shapes(cfg.max_dim) {
        for _ in 0..cfg.trials {
            let s = rng.random_range(1..=cfg.max_dim);
            let a = random_matrix(&mut rng, r, s);
            let b = random_matrix(&mut rng, s, t);
            let (ok, err) = match build(r, s, t) {
                Ok(c) => check_product(&c, &a, &b, cfg.tol),
                Err(_) => (false, f64::INFINITY),
            };
            rep.record(ok, err, || format!("r={r} s={s} t={t}"));
        }
    }
    rep
}

pub fn verify_lemmas(cfg: &VerifyConfig) -> VerifyReport {
    let mut warnings = Vec::new();
    if cfg.trials == 0 || cfg.max_dim == 0 {
        warnings.push("no trials requested; nothing was checked".to_string());
    }
    let suites = vec![
        mask_move_suite(cfg),
        const_suite(cfg),
        skip_suite(cfg),
        matmul_suite(cfg, "matmul_lsa", 4, lsa_matmul_params),
        matmul_suite(cfg, "matmul_elsa_v1", 5, matmul_params_v1),
        matmul_suite(cfg, "matmul_elsa_v2", 6, matmul_params_v2),
    ];
    VerifyReport {
        config: cfg.clone(),
        suites,
        warnings,
    }
}
