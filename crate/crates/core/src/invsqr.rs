//! Piecewise-linear approximation of `1/x^2` assembled from ReLU pairs, and
//! the reciprocal `1/x ~ x * sigma(x)` obtained from it.
//!
//! For positive knots `x_1 < ... < x_{n+1}` with `y_k = 1/x_k^2` (`k <= n`)
//! and `y_{n+1} = 0`, each interval contributes two hard sigmoids
//!
//! ```text
//! r_k^+(x) = relu(a_k (x - x_k)) - relu(a_k (x - x_{k-1}))
//! r_k^-(x) = relu(a_k (x + x_k)) - relu(a_k (x + x_{k-1}))
//! a_k      = (y_k - y_{k-1}) / (x_k - x_{k-1}) < 0
//! ```
//!
//! and `sigma(x) = sum_{k=2}^{n+1} r_k^+(x) + r_k^-(x)`. The result is even,
//! equals `y_1` on `[-x_1, x_1]`, interpolates linearly between knots and is
//! zero beyond `x_{n+1}`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub fn relu(x: f64) -> f64 {
    x.max(0.0)
}

/// Unevaluated sum `hi + lo` with `|lo| <= ulp(hi) / 2`. Saturated ReLU
/// pairs cancel at magnitude `|a_k x|`, which reaches 1e8 on the default
/// grid; carrying the low word keeps that cancellation exact.
#[derive(Clone, Copy, Debug, Default)]
struct Dd {
    hi: f64,
    lo: f64,
}

impl Dd {
    fn two_sum(a: f64, b: f64) -> Dd {
        let s = a + b;
        let bb = s - a;
        Dd {
            hi: s,
            lo: (a - (s - bb)) + (b - bb),
        }
    }

    fn renorm(hi: f64, lo: f64) -> Dd {
        let s = hi + lo;
        Dd {
            hi: s,
            lo: lo - (s - hi),
        }
    }

    fn add(self, o: Dd) -> Dd {
        let s = Dd::two_sum(self.hi, o.hi);
        Dd::renorm(s.hi, s.lo + self.lo + o.lo)
    }

    fn neg(self) -> Dd {
        Dd {
            hi: -self.hi,
            lo: -self.lo,
        }
    }

    fn scale(self, a: f64) -> Dd {
        let p = self.hi * a;
        let e = self.hi.mul_add(a, -p);
        Dd::renorm(p, e + self.lo * a)
    }

    fn relu(self) -> Dd {
        if self.hi > 0.0 {
            self
        } else {
            Dd::default()
        }
    }
}

/// `relu(a (x - c))` with the argument formed exactly.
fn relu_unit(a: f64, x: f64, c: f64) -> Dd {
    Dd::two_sum(x, -c).scale(a).relu()
}

/// How the knot grid is laid out.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum KnotSpec {
    /// `x_k = x1 * r^(k-1)` for `k = 1..=n+1`, with `x_{n+1} = xmax`.
    Geometric { x1: f64, xmax: f64, n: usize },
    /// Data knots `x_1..x_n`; the cutoff `x_{n+1}` is one geometric step
    /// past `x_n`.
    Explicit(Vec<f64>),
}

impl Default for KnotSpec {
    fn default() -> Self {
        KnotSpec::Geometric {
            x1: 1e-2,
            xmax: 1e2,
            n: 128,
        }
    }
}

impl KnotSpec {
    pub fn geometric(n: usize) -> Self {
        match Self::default() {
            KnotSpec::Geometric { x1, xmax, .. } => KnotSpec::Geometric { x1, xmax, n },
            KnotSpec::Explicit(_) => unreachable!(),
        }
    }
}

impl fmt::Display for KnotSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            KnotSpec::Geometric { x1, xmax, n } => write!(f, "geometric:x1={x1:e},xmax={xmax:e},n={n}"),
            KnotSpec::Explicit(knots) => {
                let parts: Vec<String> = knots.iter().map(|k| format!("{k}")).collect();
                write!(f, "explicit:{}", parts.join(","))
            }
        }
    }
}

impl FromStr for KnotSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = |msg: String| Error::BadKnotSpec(msg);
        let num = |v: &str| -> Result<f64> {
            v.trim()
                .parse::<f64>()
                .map_err(|_| bad(format!("'{v}' is not a number")))
        };
        if let Some(rest) = s.strip_prefix("geometric:") {
            let (mut x1, mut xmax, mut n) = (None, None, None);
            for part in rest.split(',') {
                let (key, value) = part
                    .split_once('=')
                    .ok_or_else(|| bad(format!("expected key=value, got '{part}'")))?;
                match key.trim() {
                    "x1" => x1 = Some(num(value)?),
                    "xmax" => xmax = Some(num(value)?),
                    "n" => {
                        n = Some(
                            value
                                .trim()
                                .parse::<usize>()
                                .map_err(|_| bad(format!("'{value}' is not a count")))?,
                        )
                    }
                    other => return Err(bad(format!("unknown key '{other}'"))),
                }
            }
            match (x1, xmax, n) {
                (Some(x1), Some(xmax), Some(n)) => Ok(KnotSpec::Geometric { x1, xmax, n }),
                _ => Err(bad("geometric spec needs x1, xmax and n".into())),
            }
        } else if let Some(rest) = s.strip_prefix("explicit:") {
            let knots = rest.split(',').map(num).collect::<Result<Vec<_>>>()?;
            Ok(KnotSpec::Explicit(knots))
        } else {
            Err(bad(format!("'{s}' must start with 'geometric:' or 'explicit:'")))
        }
    }
}

/// Knot table of the approximator. `knots[k-1] = x_k` and
/// `values[k-1] = y_k` for `k = 1..=n+1`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PiecewiseInvSqr {
    knots: Vec<f64>,
    values: Vec<f64>,
    slopes: Vec<f64>,
}

impl PiecewiseInvSqr {
    /// Builds from the full grid `x_1..x_{n+1}` (last entry is the cutoff).
    pub fn from_grid(knots: Vec<f64>) -> Result<Self> {
        if knots.len() < 2 {
            return Err(Error::BadKnotSpec(format!(
                "need at least 2 grid points, got {}",
                knots.len()
            )));
        }
        if let Some(k) = knots.iter().find(|k| !(k.is_finite() && **k > 0.0)) {
            return Err(Error::BadKnotSpec(format!("knot {k} is not positive and finite")));
        }
        if let Some(w) = knots.windows(2).find(|w| w[0] >= w[1]) {
            return Err(Error::BadKnotSpec(format!(
                "knots must be strictly increasing, got {} then {}",
                w[0], w[1]
            )));
        }
        let last = knots.len() - 1;
        let values: Vec<f64> = knots
            .iter()
            .enumerate()
            .map(|(i, x)| if i == last { 0.0 } else { 1.0 / (x * x) })
            .collect();
        // slopes[0] belongs to the flat interval (0, x_1] where y_0 = y_1
        let mut slopes = vec![0.0];
        for k in 1..knots.len() {
            slopes.push((values[k] - values[k - 1]) / (knots[k] - knots[k - 1]));
        }
        Ok(Self {
            knots,
            values,
            slopes,
        })
    }

    pub fn build(spec: &KnotSpec) -> Result<Self> {
        match spec {
            KnotSpec::Geometric { x1, xmax, n } => {
                if *n < 1 {
                    return Err(Error::BadKnotSpec("geometric n must be >= 1".into()));
                }
                if !(x1.is_finite() && xmax.is_finite() && *x1 > 0.0 && xmax > x1) {
                    return Err(Error::BadKnotSpec(format!(
                        "geometric grid needs 0 < x1 < xmax, got x1={x1}, xmax={xmax}"
                    )));
                }
                let ratio = (xmax / x1).powf(1.0 / *n as f64);
                let mut grid: Vec<f64> = (0..=*n).map(|k| x1 * ratio.powi(k as i32)).collect();
                grid[*n] = *xmax;
                Self::from_grid(grid)
            }
            KnotSpec::Explicit(knots) => {
                if knots.len() < 2 {
                    return Err(Error::BadKnotSpec(format!(
                        "explicit spec needs at least 2 knots, got {}",
                        knots.len()
                    )));
                }
                let n = knots.len();
                let cutoff = knots[n - 1] * knots[n - 1] / knots[n - 2];
                let mut grid = knots.clone();
                grid.push(cutoff);
                Self::from_grid(grid)
            }
        }
    }

    /// Grid `x_1..x_{n+1}`.
    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    /// `y_1..y_{n+1}`.
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Interval slopes `a_1..a_{n+1}` (`a_1 = 0`).
    pub fn slopes(&self) -> &[f64] {
        &self.slopes
    }

    /// Number of data knots `n`.
    pub fn n(&self) -> usize {
        self.knots.len() - 1
    }

    /// `x_1`, the edge of the flat cap.
    pub fn x_min(&self) -> f64 {
        self.knots[0]
    }

    /// `x_n`, the last knot where `sigma` matches `1/x^2`.
    pub fn x_last(&self) -> f64 {
        self.knots[self.n() - 1]
    }

    /// `x_{n+1}`, beyond which `sigma` is zero.
    pub fn cutoff(&self) -> f64 {
        self.knots[self.n()]
    }

    fn r_plus_dd(&self, x: f64) -> Dd {
        let mut acc = Dd::default();
        for k in (1..self.knots.len()).rev() {
            let a = self.slopes[k];
            acc = acc
                .add(relu_unit(a, x, self.knots[k]))
                .add(relu_unit(a, x, self.knots[k - 1]).neg());
        }
        acc
    }

    fn r_minus_dd(&self, x: f64) -> Dd {
        let mut acc = Dd::default();
        for k in (1..self.knots.len()).rev() {
            let a = self.slopes[k];
            acc = acc
                .add(relu_unit(a, x, -self.knots[k]))
                .add(relu_unit(a, x, -self.knots[k - 1]).neg());
        }
        acc
    }

    /// `r^+(x)`, the sum of the positive-side hard sigmoids.
    pub fn r_plus(&self, x: f64) -> f64 {
        self.r_plus_dd(x).hi
    }

    /// `r^-(x)`, the sum of the negative-side hard sigmoids.
    pub fn r_minus(&self, x: f64) -> f64 {
        self.r_minus_dd(x).hi
    }

    /// `sigma(x) = r^+(x) + r^-(x)`, summed term by term over all
    /// `4n` ReLU units.
    pub fn eval(&self, x: f64) -> f64 {
        self.r_plus_dd(x).add(self.r_minus_dd(x)).hi
    }

    /// `x * sigma(x)`.
    pub fn reciprocal(&self, x: f64) -> f64 {
        x * self.eval(x)
    }
}

impl Default for PiecewiseInvSqr {
    fn default() -> Self {
        Self::build(&KnotSpec::default()).expect("default grid is valid")
    }
}

pub fn build_invsqr(spec: &KnotSpec) -> Result<PiecewiseInvSqr> {
    PiecewiseInvSqr::build(spec)
}

pub fn invsqr_eval(p: &PiecewiseInvSqr, x: f64) -> f64 {
    p.eval(x)
}

pub fn approx_reciprocal(p: &PiecewiseInvSqr, x: f64) -> f64 {
    p.reciprocal(x)
}
