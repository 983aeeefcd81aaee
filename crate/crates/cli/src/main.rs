use std::fs;
use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;

use elsa_core::gauss::{solve_traced, DivisionMode, LinearSystem, SolveReport, PIVOT_TOLERANCE};
use elsa_core::invsqr::{KnotSpec, PiecewiseInvSqr};
use elsa_core::io::{parse_problem, parse_system};
use elsa_core::pipeline::{run_pipeline, Form, PipelineReport};
use elsa_core::sample::{diagonally_dominant_system, random_ridge_problem, stream_rng};
use elsa_core::verify::{verify_lemmas, VerifyConfig};

#[derive(Parser)]
#[command(name = "elsa", version, about = "Matrix programs on (extended) linear self-attention")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the mask-and-move and ELSA construction property suites.
    VerifyLemmas {
        /// Trials per shape.
        #[arg(long, default_value_t = 100)]
        trials: usize,
        /// Shapes run over 1..=max-dim in each direction.
        #[arg(long, default_value_t = 6)]
        max_dim: usize,
        #[arg(long, env = "ELSA_WB_SEED", default_value_t = 0)]
        seed: u64,
        /// Tolerance for the product constructions.
        #[arg(long, default_value_t = 1e-12, value_parser = positive)]
        tol: f64,
        /// Corrupt one bias entry of the constant construction.
        #[arg(long)]
        perturb: bool,
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Run gradient descent for ridge regression inside an attention stack.
    Ridge {
        /// lsa (designed prompt), elsa (enumerated prompt) or lsa-as-elsa.
        #[arg(long, default_value = "lsa", value_parser = parse_form)]
        form: Form,
        #[arg(long, default_value_t = 20)]
        n: usize,
        #[arg(long, default_value_t = 4)]
        d: usize,
        #[arg(long, default_value_t = 0.5)]
        lambda: f64,
        /// Learning rate, or "auto" for 1 / (sigma_max(X)^2 + lambda).
        #[arg(long, default_value = "auto")]
        eta: String,
        #[arg(long, default_value_t = 200)]
        steps: usize,
        #[arg(long, env = "ELSA_WB_SEED", default_value_t = 0)]
        seed: u64,
        /// Problem JSON; overrides the generator options.
        #[arg(long)]
        problem: Option<PathBuf>,
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Solve a linear system by component-built Gaussian elimination.
    Gauss {
        #[arg(long, value_enum, default_value_t = Mode::Exact)]
        mode: Mode,
        /// Size of the generated diagonally dominant system.
        #[arg(long, default_value_t = 6)]
        size: usize,
        /// Knot grid for relu mode, e.g. geometric:x1=1e-2,xmax=1e2,n=128 or explicit:1,2,4.
        #[arg(long, value_parser = parse_knots)]
        knots: Option<KnotSpec>,
        /// System JSON; overrides the generator.
        #[arg(long)]
        system: Option<PathBuf>,
        /// Relu mode over several geometric grids, as CSV.
        #[arg(long)]
        sweep: bool,
        /// Grid sizes for --sweep.
        #[arg(long, value_delimiter = ',', default_value = "64,128,256")]
        grids: Vec<usize>,
        #[arg(long, env = "ELSA_WB_SEED", default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Tabulate the ReLU-sum inverse-square approximator as CSV.
    Invsqr {
        #[arg(long, value_parser = parse_knots)]
        knots: Option<KnotSpec>,
        #[arg(long, default_value_t = 200)]
        samples: usize,
        /// Half-width of the symmetric sample grid; defaults to 1.25 x the cutoff.
        #[arg(long, value_parser = positive)]
        range: Option<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Exact,
    Relu,
}

fn parse_form(s: &str) -> Result<Form, String> {
    s.parse().map_err(|e: elsa_core::Error| e.to_string())
}

fn parse_knots(s: &str) -> Result<KnotSpec, String> {
    s.parse().map_err(|e: elsa_core::Error| e.to_string())
}

fn positive(s: &str) -> Result<f64, String> {
    match s.parse::<f64>() {
        Ok(v) if v > 0.0 && v.is_finite() => Ok(v),
        _ => Err(format!("expected a positive number, got {s:?}")),
    }
}

enum Failure {
    /// A check ran and did not hold.
    Check(String),
    Core(elsa_core::Error),
    Io(String),
}

impl From<elsa_core::Error> for Failure {
    fn from(e: elsa_core::Error) -> Self {
        Failure::Core(e)
    }
}

type Outcome = Result<(), Failure>;

fn emit(path: Option<&PathBuf>, text: &str) -> Outcome {
    match path {
        Some(p) => fs::write(p, text).map_err(|e| Failure::Io(format!("{}: {e}", p.display()))),
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(text.as_bytes())
                .and_then(|_| out.flush())
                .map_err(|e| Failure::Io(e.to_string()))
        }
    }
}

fn json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("reports serialise");
    s.push('\n');
    s
}

fn read(path: &PathBuf) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| Failure::Io(format!("{}: {e}", path.display())))
}

fn verify(cfg: VerifyConfig, report: Option<&PathBuf>) -> Outcome {
    let rep = verify_lemmas(&cfg);
    for w in &rep.warnings {
        eprintln!("warning: {w}");
    }
    emit(report, &json(&rep))?;
    if rep.all_passed() {
        Ok(())
    } else {
        Err(Failure::Check(format!("failing suites: {}", rep.failing().join(", "))))
    }
}

#[derive(Serialize)]
struct RidgeOutput {
    #[serde(flatten)]
    report: PipelineReport,
    closed_form_gap: Option<f64>,
}

#[allow(clippy::too_many_arguments)]
fn ridge(
    form: Form,
    n: usize,
    d: usize,
    lambda: f64,
    eta: &str,
    steps: usize,
    seed: u64,
    problem: Option<&PathBuf>,
    report: Option<&PathBuf>,
) -> Outcome {
    let p = match problem {
        Some(path) => parse_problem(&read(path)?)?,
        None => {
            let mut p = random_ridge_problem(&mut stream_rng(seed, 0), n, d, lambda, steps);
            if eta != "auto" {
                p.eta = eta
                    .parse()
                    .map_err(|_| elsa_core::Error::Parse(format!("eta must be a number or \"auto\", got {eta:?}")))?;
            }
            p.validate()?;
            p
        }
    };
    let run = run_pipeline(&p, form)?;
    let gap = run.report.closed_form_prediction.map(|c| (run.prediction - c).abs());
    emit(
        report,
        &json(&RidgeOutput {
            report: run.report,
            closed_form_gap: gap,
        }),
    )
}

#[derive(Serialize)]
struct GaussOutput {
    #[serde(flatten)]
    report: SolveReport,
    solution: Vec<f64>,
}

fn relu_mode(knots: &KnotSpec) -> Result<DivisionMode, Failure> {
    Ok(DivisionMode::Relu(PiecewiseInvSqr::build(knots)?))
}

#[allow(clippy::too_many_arguments)]
fn gauss(
    mode: Mode,
    size: usize,
    knots: Option<KnotSpec>,
    system: Option<&PathBuf>,
    sweep: bool,
    grids: &[usize],
    seed: u64,
    report: Option<&PathBuf>,
) -> Outcome {
    let sys: LinearSystem = match system {
        Some(path) => parse_system(&read(path)?)?,
        None => {
            if size < 2 {
                return Err(elsa_core::Error::BadProblem(format!("size must be >= 2, got {size}")).into());
            }
            diagonally_dominant_system(&mut stream_rng(seed, 0), size, 1.0, 3.0, true)
        }
    };
    if sweep {
        let mut csv = String::from("n,rel_error,residual_inf,flags\n");
        for &n in grids {
            let (_, rep, _) = solve_traced(&sys, &relu_mode(&KnotSpec::geometric(n))?, PIVOT_TOLERANCE)?;
            let rel = rep.rel_error_vs_oracle.map_or("nan".to_string(), |e| format!("{e:e}"));
            csv.push_str(&format!("{n},{rel},{:e},{}\n", rep.residual_inf, rep.flags.len()));
        }
        return emit(report, &csv);
    }
    let mode = match mode {
        Mode::Exact => DivisionMode::Exact,
        Mode::Relu => relu_mode(&knots.unwrap_or_default())?,
    };
    let (x, rep, _) = solve_traced(&sys, &mode, PIVOT_TOLERANCE)?;
    for f in &rep.flags {
        eprintln!("warning: {f}");
    }
    emit(
        report,
        &json(&GaussOutput {
            report: rep,
            solution: x.col_values(0),
        }),
    )
}

fn invsqr(knots: Option<KnotSpec>, samples: usize, range: Option<f64>, out: Option<&PathBuf>) -> Outcome {
    let f = PiecewiseInvSqr::build(&knots.unwrap_or_default())?;
    let r = range.unwrap_or(1.25 * f.cutoff());
    let mut csv = String::from("x,sigma,inv_sq,abs_err,rel_err\n");
    for i in 0..samples {
        let x = if samples == 1 {
            0.0
        } else {
            r * (2.0 * i as f64 - (samples - 1) as f64) / (samples - 1) as f64
        };
        let sigma = f.eval(x);
        let exact = 1.0 / (x * x);
        let abs = (sigma - exact).abs();
        csv.push_str(&format!("{x:e},{sigma:e},{exact:e},{abs:e},{:e}\n", abs / exact));
    }
    emit(out, &csv)
}

fn run(cli: Cli) -> Outcome {
    match cli.command {
        Command::VerifyLemmas {
            trials,
            max_dim,
            seed,
            tol,
            perturb,
            report,
        } => verify(
            VerifyConfig {
                seed,
                trials,
                max_dim,
                tol,
                perturb,
            },
            report.as_ref(),
        ),
        Command::Ridge {
            form,
            n,
            d,
            lambda,
            eta,
            steps,
            seed,
            problem,
            report,
        } => ridge(form, n, d, lambda, &eta, steps, seed, problem.as_ref(), report.as_ref()),
        Command::Gauss {
            mode,
            size,
            knots,
            system,
            sweep,
            grids,
            seed,
            report,
        } => gauss(mode, size, knots, system.as_ref(), sweep, &grids, seed, report.as_ref()),
        Command::Invsqr {
            knots,
            samples,
            range,
            out,
        } => invsqr(knots, samples, range, out.as_ref()),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Check(msg)) => {
            eprintln!("check failed: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Core(e)) => {
            eprintln!("error[{}]: {e}", e.kind());
            ExitCode::from(1)
        }
        Err(Failure::Io(msg)) => {
            eprintln!("error[Io]: {msg}");
            ExitCode::from(1)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::CommandFactory;

    #[test]
    fn cli_definition_is_consistent() {
        Cli::command().debug_assert();
    }

    #[test]
    fn value_parsers() {
        assert!(positive("1e-9").is_ok());
        assert!(positive("0").is_err());
        assert!(positive("-1").is_err());
        assert_eq!(parse_form("elsa").unwrap(), Form::Elsa);
        assert!(parse_knots("geometric:x1=1,xmax=0.5,n=3").is_ok());
        assert!(parse_knots("linear:1,2").is_err());
    }

    #[test]
    fn generated_problems_use_the_stable_rate() {
        let p = random_ridge_problem(&mut stream_rng(0, 0), 5, 2, 0.5, 1);
        assert_eq!(p.eta, elsa_core::ridge::stable_eta(&p));
    }
}
