//! Ridge-regression gradient descent run entirely inside attention modules.
//!
//! Two prompt layouts are supported. The designed layout packs scaled data
//! into a `(d+1) x s` matrix (`s = 2n+d+3`) and is driven by three LSA heads:
//!
//! ```text
//! [ sqrt(eta) X^T   O              O   sqrt(eta lambda) I_d   u   w ]
//! [ O               sqrt(eta) y^T  1   O                      0   0 ]
//! ```
//!
//! The enumerated layout lists the raw quantities in a `d x s` matrix
//! (`s = 2n+2d+3`) and is driven by two sequential 4-head ELSA blocks:
//!
//! ```text
//! [ X^T  Y0^T  lambda I_d  sqrt(eta) I_d  u  z  w ]      Y0 = [O_{n,d-1} y]
//! ```
//!
//! Every step is `H_t = P_t + H_{t-1}` with `P_t` zero outside the `w`
//! column. A final readout module writes `u^T w_T` into the prompt.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::attention::{gram_selectors, skip_params, ElsaParams, LsaParams, MultiHead};
use crate::error::{Error, Result};
use crate::mask_move::MskMovSpec;
use crate::matrix::{BlockSpec, Matrix};
use crate::ridge::{gd_run, predict, ridge_closed_form, RidgeProblem};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Layout {
    Designed { n: usize, d: usize },
    Enumerated { n: usize, d: usize },
}

impl Layout {
    pub fn n(&self) -> usize {
        match *self {
            Layout::Designed { n, .. } | Layout::Enumerated { n, .. } => n,
        }
    }

    pub fn d(&self) -> usize {
        match *self {
            Layout::Designed { d, .. } | Layout::Enumerated { d, .. } => d,
        }
    }

    /// Prompt width.
    pub fn s(&self) -> usize {
        match *self {
            Layout::Designed { n, d } => 2 * n + d + 3,
            Layout::Enumerated { n, d } => 2 * n + 2 * d + 3,
        }
    }

    pub fn shape(&self) -> (usize, usize) {
        match self {
            Layout::Designed { d, .. } => (d + 1, self.s()),
            Layout::Enumerated { d, .. } => (*d, self.s()),
        }
    }

    /// Where `w_t` lives (1-based, rows `1..d` of the last column).
    pub fn w_block(&self) -> BlockSpec {
        let s = self.s();
        BlockSpec::new(1, self.d(), s, s)
    }

    /// 1-based cell receiving the prediction after readout.
    pub fn prediction_cell(&self) -> (usize, usize) {
        match self {
            Layout::Designed { d, .. } => (d + 1, self.s()),
            Layout::Enumerated { .. } => (1, self.s() - 1),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PipelineState {
    pub h: Matrix,
    pub t: usize,
    pub layout: Layout,
}

impl PipelineState {
    /// Current coefficients, read from the `w` column.
    pub fn w(&self) -> Matrix {
        self.h
            .block_read(&self.layout.w_block())
            .expect("state shape matches its layout")
    }
}

/// Two multi-head ELSA blocks applied in sequence: `second(first(H))`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ElsaModule {
    pub first: MultiHead<ElsaParams>,
    pub second: MultiHead<ElsaParams>,
}

impl ElsaModule {
    pub fn forward(&self, h: &Matrix) -> Result<Matrix> {
        self.second.forward(&self.first.forward(h)?)
    }
}

/// The update part `P` of a module `H -> P + H`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Module {
    Lsa(MultiHead<LsaParams>),
    Elsa(ElsaModule),
}

impl Module {
    pub fn update(&self, h: &Matrix) -> Result<Matrix> {
        match self {
            Module::Lsa(heads) => heads.forward(h),
            Module::Elsa(m) => m.forward(h),
        }
    }

    /// Zero-bias ELSA copy of an LSA module followed by a skip block. ELSA
    /// modules are returned as is.
    pub fn to_elsa(&self, rows: usize) -> Module {
        match self {
            Module::Lsa(heads) => {
                let width = heads.heads.first().map_or(0, LsaParams::width);
                Module::Elsa(ElsaModule {
                    first: MultiHead::new(heads.heads.iter().map(|p| p.to_elsa(rows)).collect()),
                    second: MultiHead::new(vec![skip_params((rows, width))]),
                })
            }
            Module::Elsa(_) => self.clone(),
        }
    }
}

/// Weights shared by every step, plus the readout module.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModuleWeights {
    pub layout: Layout,
    pub step: Module,
    pub readout: Module,
}

impl ModuleWeights {
    pub fn to_elsa(&self) -> ModuleWeights {
        let rows = self.layout.shape().0;
        ModuleWeights {
            layout: self.layout,
            step: self.step.to_elsa(rows),
            readout: self.readout.to_elsa(rows),
        }
    }
}

/// Which construction a run uses.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Form {
    /// Designed layout, LSA heads.
    #[serde(rename = "lsa")]
    Lsa,
    /// Enumerated layout, two ELSA blocks.
    #[serde(rename = "elsa")]
    Elsa,
    /// Designed layout, the LSA heads rewrapped as zero-bias ELSA.
    #[serde(rename = "lsa-as-elsa")]
    LsaAsElsa,
}

impl Form {
    pub fn name(&self) -> &'static str {
        match self {
            Form::Lsa => "lsa",
            Form::Elsa => "elsa",
            Form::LsaAsElsa => "lsa-as-elsa",
        }
    }
}

impl fmt::Display for Form {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Form {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "lsa" | "designed" => Ok(Form::Lsa),
            "elsa" | "enumerated" => Ok(Form::Elsa),
            "lsa-as-elsa" => Ok(Form::LsaAsElsa),
            other => Err(Error::Parse(format!("unknown form {other:?}"))),
        }
    }
}

fn check_problem_shapes(p: &RidgeProblem) -> Result<()> {
    let (n, d) = p.x.shape();
    for (got, want) in [(p.y.shape(), (n, 1)), (p.u.shape(), (d, 1)), (p.w0.shape(), (d, 1))] {
        if got != want {
            return Err(Error::ShapeMismatch { expected: want, got });
        }
    }
    Ok(())
}

/// `H_0` in the designed layout. Reads `eta` as stored, so `eta = 0` is
/// allowed here even though [`RidgeProblem::validate`] rejects it.
pub fn build_designed_input(p: &RidgeProblem) -> Result<PipelineState> {
    check_problem_shapes(p)?;
    let (n, d) = p.x.shape();
    let layout = Layout::Designed { n, d };
    let (rows, s) = layout.shape();
    let se = p.eta.sqrt();
    let mut h = Matrix::zeros(rows, s);
    h.set_block_at(1, 1, &p.x.transpose().scale(se))?;
    h.set_block_at(rows, n + 1, &p.y.transpose().scale(se))?;
    h.set(d, 2 * n, 1.0);
    let reg = se * p.lambda.sqrt();
    for i in 0..d {
        h.set(i, 2 * n + 1 + i, reg);
    }
    h.set_block_at(1, s - 1, &p.u)?;
    h.set_block_at(1, s, &p.w0)?;
    Ok(PipelineState { h, t: 0, layout })
}

/// `H_0` in the enumerated layout.
pub fn build_enumerated_input(p: &RidgeProblem) -> Result<PipelineState> {
    check_problem_shapes(p)?;
    let (n, d) = p.x.shape();
    let layout = Layout::Enumerated { n, d };
    let s = layout.s();
    let se = p.eta.sqrt();
    let mut h = Matrix::zeros(d, s);
    h.set_block_at(1, 1, &p.x.transpose())?;
    // Y0^T has y^T in its last row
    h.set_block_at(d, n + 1, &p.y.transpose())?;
    for i in 0..d {
        h.set(i, 2 * n + i, p.lambda);
        h.set(i, 2 * n + d + i, se);
    }
    h.set_block_at(1, s - 2, &p.u)?;
    h.set_block_at(1, s, &p.w0)?;
    Ok(PipelineState { h, t: 0, layout })
}

/// Matrix with the listed 0-based entries set.
fn sparse(rows: usize, cols: usize, cells: impl IntoIterator<Item = (usize, usize, f64)>) -> Matrix {
    let mut m = Matrix::zeros(rows, cols);
    for (i, j, v) in cells {
        m.set(i, j, v);
    }
    m
}

/// `(W1, W2)` moving the 1-based Gram block `src` by `(a, b)`.
fn gram_move(src: BlockSpec, s: usize, a: isize, b: isize) -> (Matrix, Matrix) {
    gram_selectors(&MskMovSpec::new(src, (s, s), a, b)).expect("construction moves stay inside the Gram matrix")
}

/// Three LSA heads for the designed layout and the matching readout.
///
/// With `G = H^T H`:
/// head 1 moves `sqrt(eta) y` (`G[n+1:2n, 2n+1]`) to the last column and
/// multiplies by `sqrt(eta) X^T`; head 2 moves `sqrt(eta) X w` and negates;
/// head 3 moves `sqrt(eta lambda) w` and multiplies by `-sqrt(eta lambda) I`.
pub fn build_designed_weights(n: usize, d: usize) -> ModuleWeights {
    let layout = Layout::Designed { n, d };
    let s = layout.s();
    let si = s as isize;
    let ni = n as isize;

    let w13 = sparse(s, s, (0..n).map(|i| (i, i, 1.0)));
    let (w11, w12) = gram_move(BlockSpec::new(n + 1, 2 * n, 2 * n + 1, 2 * n + 1), s, -ni, si - 2 * ni - 1);
    let (w21, w22) = gram_move(BlockSpec::new(1, n, s, s), s, 0, 0);
    let w23 = w13.scale(-1.0);
    let (w31, w32) = gram_move(BlockSpec::new(2 * n + 2, 2 * n + d + 1, s, s), s, -(2 * ni + 1), 0);
    let w33 = sparse(s, s, (0..d).map(|i| (2 * n + 1 + i, i, -1.0)));

    let step = MultiHead::new(vec![
        LsaParams::new(w11, w12, w13),
        LsaParams::new(w21.clone(), w22.clone(), w23),
        LsaParams::new(w31.clone(), w32.clone(), w33),
    ]);

    // u^T w sits at G[2n+d+2, s]; move it one row down to (s, s) and pick
    // it up with the constant 1 in column 2n+1.
    let (r11, r12) = gram_move(BlockSpec::cell(2 * n + d + 2, s), s, 1, 0);
    let r13 = sparse(s, s, [(2 * n, s - 1, 1.0)]);
    let readout = MultiHead::new(vec![
        LsaParams::new(r11, r12, r13),
        LsaParams::new(w21, w22, Matrix::zeros(s, s)),
        LsaParams::new(w31, w32, Matrix::zeros(s, s)),
    ]);

    ModuleWeights {
        layout,
        step: Module::Lsa(step),
        readout: Module::Lsa(readout),
    }
}

fn elsa_head(w: [Matrix; 3], b: [Matrix; 3]) -> ElsaParams {
    let [w1, w2, w3] = w;
    let [b1, b2, b3] = b;
    ElsaParams { w1, w2, w3, b1, b2, b3 }
}

/// Two 4-head ELSA blocks for the enumerated layout and the readout.
///
/// Block 1 emits `[O, -eta I_d, O, O, dw]` from the heads
/// `X^T X w`, `lambda w`, `-X^T y` and `-eta I_d`; block 2 multiplies the
/// two to get `-eta dw` in the last column. Unused heads stay as all-zero
/// parameters so every module has the same shape.
pub fn build_enumerated_weights(n: usize, d: usize) -> ModuleWeights {
    let layout = Layout::Enumerated { n, d };
    let s = layout.s();
    let ni = n as isize;
    let di = d as isize;
    let zw = || Matrix::zeros(s, s);
    let zb = || Matrix::zeros(d, s);
    let lead = |sign: f64| sparse(d, s, (0..d).map(move |i| (i, i, sign)));
    let zero_head = || ElsaParams::zero(d, s);

    let (a1, a2) = gram_move(BlockSpec::new(1, n, s, s), s, 0, 0);
    let k1 = elsa_head([a1, a2, sparse(s, s, (0..n).map(|i| (i, i, 1.0)))], [zb(), zb(), zb()]);

    let (a1, a2) = gram_move(BlockSpec::new(2 * n + 1, 2 * n + d, s, s), s, -2 * ni, 0);
    let k2 = elsa_head([a1, a2, zw()], [zb(), zb(), lead(1.0)]);

    let k3 = elsa_head(
        [
            sparse(s, s, (0..n).map(|i| (n + i, s - n + i, 1.0))),
            zw(),
            sparse(s, s, (0..n).map(|i| (i, s - n + i, 1.0))),
        ],
        [zb(), sparse(d, s, (0..d).map(|i| (i, s - d + i, -1.0))), zb()],
    );

    let eta_block = BlockSpec::new(2 * n + d + 1, 2 * n + 2 * d, 2 * n + d + 1, 2 * n + 2 * d);
    let (a1, a2) = gram_move(eta_block, s, -(2 * ni + di), 0);
    let k4 = elsa_head([a1, a2, zw()], [zb(), zb(), lead(-1.0)]);

    let (a1, a2) = gram_move(BlockSpec::new(2 * n + d + 1, 2 * n + 2 * d, s, s), s, -(2 * ni + di), 0);
    let second = elsa_head([a1, a2, zw()], [zb(), zb(), lead(1.0)]);

    let step = ElsaModule {
        first: MultiHead::new(vec![k1, k2, k3, k4]),
        second: MultiHead::new(vec![second, zero_head(), zero_head(), zero_head()]),
    };

    // u^T w at G[s-2, s] goes to (1, s-1)
    let (a1, a2) = gram_move(BlockSpec::cell(s - 2, s), s, -(2 * ni + 2 * di), -1);
    let pick = elsa_head([a1, a2, zw()], [zb(), zb(), sparse(d, s, [(0, 0, 1.0)])]);
    let readout = ElsaModule {
        first: MultiHead::new(vec![pick, zero_head(), zero_head(), zero_head()]),
        second: MultiHead::new(vec![skip_params((d, s)), zero_head(), zero_head(), zero_head()]),
    };

    ModuleWeights {
        layout,
        step: Module::Elsa(step),
        readout: Module::Elsa(readout),
    }
}

fn check_layout(state: &PipelineState, weights: &ModuleWeights, want: Option<fn(&Layout) -> bool>) -> Result<()> {
    if let Some(pred) = want {
        if !pred(&state.layout) {
            return Err(Error::LayoutMismatch(format!("unexpected layout {:?}", state.layout)));
        }
    }
    if state.layout != weights.layout {
        return Err(Error::LayoutMismatch(format!(
            "state {:?}, weights {:?}",
            state.layout, weights.layout
        )));
    }
    if state.h.shape() != state.layout.shape() {
        return Err(Error::LayoutMismatch(format!(
            "prompt is {:?}, layout needs {:?}",
            state.h.shape(),
            state.layout.shape()
        )));
    }
    Ok(())
}

/// `H_t = P_t + H_{t-1}` for either layout.
pub fn step(state: &PipelineState, weights: &ModuleWeights) -> Result<PipelineState> {
    check_layout(state, weights, None)?;
    let p = weights.step.update(&state.h)?;
    Ok(PipelineState {
        h: p.try_add(&state.h)?,
        t: state.t + 1,
        layout: state.layout,
    })
}

/// Applies the readout module; returns `H_{T+1}` and the prediction.
pub fn readout(state: &PipelineState, weights: &ModuleWeights) -> Result<(Matrix, f64)> {
    check_layout(state, weights, None)?;
    let h = weights.readout.update(&state.h)?.try_add(&state.h)?;
    let (i, j) = state.layout.prediction_cell();
    let pred = h.entry(i, j);
    Ok((h, pred))
}

fn is_designed(l: &Layout) -> bool {
    matches!(l, Layout::Designed { .. })
}

fn is_enumerated(l: &Layout) -> bool {
    matches!(l, Layout::Enumerated { .. })
}

pub fn step_designed(state: &PipelineState, weights: &ModuleWeights) -> Result<PipelineState> {
    check_layout(state, weights, Some(is_designed))?;
    step(state, weights)
}

pub fn readout_designed(state: &PipelineState, weights: &ModuleWeights) -> Result<(Matrix, f64)> {
    check_layout(state, weights, Some(is_designed))?;
    readout(state, weights)
}

pub fn step_enumerated(state: &PipelineState, weights: &ModuleWeights) -> Result<PipelineState> {
    check_layout(state, weights, Some(is_enumerated))?;
    step(state, weights)
}

pub fn readout_enumerated(state: &PipelineState, weights: &ModuleWeights) -> Result<(Matrix, f64)> {
    check_layout(state, weights, Some(is_enumerated))?;
    readout(state, weights)
}

/// Summary of one run against the gradient-descent and closed-form oracles.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PipelineReport {
    pub form: Form,
    pub n: usize,
    pub d: usize,
    pub lambda: f64,
    pub eta: f64,
    #[serde(rename = "T")]
    pub steps: usize,
    pub prediction: f64,
    pub oracle_prediction: f64,
    /// `None` when `X^T X + lambda I` is singular.
    pub closed_form_prediction: Option<f64>,
    pub max_step_deviation: f64,
    /// `|w_t - w_t^oracle|_inf / |w_t^oracle|_inf` for `t = 1..T`.
    pub per_step_deviation: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PipelineRun {
    pub prediction: f64,
    /// `w_0..w_T` as read from the prompt.
    pub w_trace: Vec<Matrix>,
    pub h_final: Matrix,
    pub report: PipelineReport,
}

/// Relative deviation used for step-exactness.
pub fn relative_deviation(got: &Matrix, oracle: &Matrix) -> Result<f64> {
    Ok(got.max_abs_diff(oracle)? / oracle.norm_inf().max(f64::MIN_POSITIVE))
}

pub fn build_input(p: &RidgeProblem, form: Form) -> Result<PipelineState> {
    match form {
        Form::Lsa | Form::LsaAsElsa => build_designed_input(p),
        Form::Elsa => build_enumerated_input(p),
    }
}

pub fn build_weights(n: usize, d: usize, form: Form) -> ModuleWeights {
    match form {
        Form::Lsa => build_designed_weights(n, d),
        Form::LsaAsElsa => build_designed_weights(n, d).to_elsa(),
        Form::Elsa => build_enumerated_weights(n, d),
    }
}

/// Build, `T` steps, readout.
pub fn run_pipeline(p: &RidgeProblem, form: Form) -> Result<PipelineRun> {
    let weights = build_weights(p.n(), p.d(), form);
    run_with_weights(p, form, &weights)
}

/// [`run_pipeline`] with caller-supplied weights.
pub fn run_with_weights(p: &RidgeProblem, form: Form, weights: &ModuleWeights) -> Result<PipelineRun> {
    let mut state = build_input(p, form)?;
    let (_, oracle) = gd_run(p);
    let mut w_trace = Vec::with_capacity(p.steps + 1);
    let mut per_step = Vec::with_capacity(p.steps);
    w_trace.push(state.w());
    for oracle_w in oracle.iter().skip(1) {
        state = step(&state, weights)?;
        let w = state.w();
        per_step.push(relative_deviation(&w, oracle_w)?);
        w_trace.push(w);
    }
    let (h_final, prediction) = readout(&state, weights)?;
    let w_t = oracle.last().expect("trace holds w_0");
    let closed_form_prediction = ridge_closed_form(p).ok().and_then(|w| predict(&w, &p.u).ok());
    let report = PipelineReport {
        form,
        n: p.n(),
        d: p.d(),
        lambda: p.lambda,
        eta: p.eta,
        steps: p.steps,
        prediction,
        oracle_prediction: predict(w_t, &p.u)?,
        closed_form_prediction,
        max_step_deviation: per_step.iter().copied().fold(0.0, f64::max),
        per_step_deviation: per_step,
    };
    Ok(PipelineRun {
        prediction,
        w_trace,
        h_final,
        report,
    })
}
