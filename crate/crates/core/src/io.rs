//! JSON file formats for ridge problems and linear systems.
//!
//! ```text
//! {"X": [[..], ..], "y": [..], "u": [..], "lambda": 0.5,
//!  "eta": 0.01 | "auto", "steps": 100, "w0": [..] | "zero"}
//! {"F": [[..], ..], "alpha": [..]}
//! ```

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gauss::LinearSystem;
use crate::matrix::Matrix;
use crate::ridge::{stable_eta, RidgeProblem};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum EtaSpec {
    Value(f64),
    Keyword(String),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum StartSpec {
    Values(Vec<f64>),
    Keyword(String),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProblemFile {
    #[serde(rename = "X")]
    pub x: Vec<Vec<f64>>,
    pub y: Vec<f64>,
    pub u: Vec<f64>,
    pub lambda: f64,
    pub eta: EtaSpec,
    pub steps: usize,
    #[serde(default = "zero_start")]
    pub w0: StartSpec,
}

fn zero_start() -> StartSpec {
    StartSpec::Keyword("zero".into())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SystemFile {
    #[serde(rename = "F")]
    pub f: Vec<Vec<f64>>,
    pub alpha: Vec<f64>,
}

fn keyword(got: &str, want: &str, field: &str) -> Result<()> {
    if got == want {
        Ok(())
    } else {
        Err(Error::Parse(format!("{field}: expected a number or {want:?}, got {got:?}")))
    }
}

impl ProblemFile {
    pub fn into_problem(self) -> Result<RidgeProblem> {
        let x = Matrix::from_rows(&self.x)?;
        let d = x.cols();
        let w0 = match self.w0 {
            StartSpec::Values(v) => Matrix::column(&v)?,
            StartSpec::Keyword(k) => {
                keyword(&k, "zero", "w0")?;
                Matrix::zeros(d, 1)
            }
        };
        let y = Matrix::column(&self.y)?;
        let u = Matrix::column(&self.u)?;
        match self.eta {
            EtaSpec::Value(eta) => RidgeProblem::new(x, y, u, self.lambda, eta, self.steps, w0),
            EtaSpec::Keyword(k) => {
                keyword(&k, "auto", "eta")?;
                let mut p = RidgeProblem::new(x, y, u, self.lambda, 1.0, self.steps, w0)?;
                p.eta = stable_eta(&p);
                Ok(p)
            }
        }
    }

    pub fn from_problem(p: &RidgeProblem) -> Self {
        Self {
            x: p.x.to_rows(),
            y: p.y.col_values(0),
            u: p.u.col_values(0),
            lambda: p.lambda,
            eta: EtaSpec::Value(p.eta),
            steps: p.steps,
            w0: StartSpec::Values(p.w0.col_values(0)),
        }
    }
}

impl SystemFile {
    pub fn into_system(self) -> Result<LinearSystem> {
        LinearSystem::new(Matrix::from_rows(&self.f)?, Matrix::column(&self.alpha)?)
    }

    pub fn from_system(s: &LinearSystem) -> Self {
        Self {
            f: s.f.to_rows(),
            alpha: s.alpha.col_values(0),
        }
    }
}

fn parse<T: for<'de> Deserialize<'de>>(text: &str) -> Result<T> {
    serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))
}

pub fn parse_problem(text: &str) -> Result<RidgeProblem> {
    parse::<ProblemFile>(text)?.into_problem()
}

pub fn parse_system(text: &str) -> Result<LinearSystem> {
    parse::<SystemFile>(text)?.into_system()
}

pub fn problem_to_json(p: &RidgeProblem) -> String {
    serde_json::to_string_pretty(&ProblemFile::from_problem(p)).expect("plain data serialises")
}

pub fn system_to_json(s: &LinearSystem) -> String {
    serde_json::to_string_pretty(&SystemFile::from_system(s)).expect("plain data serialises")
}
