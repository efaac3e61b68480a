use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use nqricci::flow::FlowDirection;
use nqricci::Error;

mod render;
mod report;

#[derive(Parser, Debug)]
#[command(name = "nqricci", version, about = "Generalized Ricci tensors of degree-2 NQ manifolds")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Render a plain-text table instead of JSON.
    #[arg(long, global = true, conflicts_with = "json")]
    pretty: bool,
    /// Emit compact JSON (the default).
    #[arg(long, global = true)]
    json: bool,
}

#[derive(clap::Args, Debug, Clone)]
pub struct PointArgs {
    /// Model file (JSON).
    pub input: PathBuf,
    /// Evaluate at this base point instead of the file's, comma-separated.
    /// Repeat for several points.
    #[arg(long = "point", value_parser = parse_point, allow_hyphen_values = true)]
    pub points: Vec<Vec<f64>>,
    /// Tolerance for the validation verdict.
    #[arg(long)]
    pub tol: Option<f64>,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
pub enum RicciPathArg {
    Engine,
    Closed,
    Both,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum DirectionArg {
    Forward,
    Backward,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Check the master equation and report grouped residuals.
    Validate(PointArgs),
    /// Ricci tensor of the model's connection.
    Ricci {
        #[command(flatten)]
        args: PointArgs,
        #[arg(long, value_enum, default_value = "both")]
        path: RicciPathArg,
    },
    /// Torsion Qτ and the invariance verdict.
    Torsion(PointArgs),
    /// Components of the curvature Q² in End₂.
    Curvature(PointArgs),
    /// Graded and classical Ricci of an exact model.
    ExactCompare(PointArgs),
    /// Jet-valued NQ model (with Levi-Civita connection) of an exact model.
    ExactExport(PointArgs),
    /// Run a flow scenario; prints one JSON record per line.
    Flow {
        /// Flow scenario file (JSON).
        input: PathBuf,
        /// Override the scenario's direction.
        #[arg(long, value_enum)]
        direction: Option<DirectionArg>,
    },
}

fn parse_point(s: &str) -> Result<Vec<f64>, String> {
    if s.trim().is_empty() {
        return Ok(Vec::new());
    }
    s.split(',')
        .map(|t| t.trim().parse::<f64>().map_err(|e| format!("bad coordinate {t:?}: {e}")))
        .collect()
}

/// 0 success, 1 validation failure, 2 input error, 3 numeric error.
fn exit_code(e: &Error) -> u8 {
    match e {
        Error::MasterEquationFailure(_) | Error::End2Violation { .. } => 1,
        Error::Parse { .. }
        | Error::VariableOutOfRange { .. }
        | Error::Schema(_)
        | Error::Shape(_)
        | Error::ChartMismatch => 2,
        Error::DivisionByZeroConstantTerm
        | Error::SqrtOfNonpositive(_)
        | Error::Domain(_)
        | Error::JetOrderExhausted
        | Error::FrameDegenerate { .. }
        | Error::StepRejected(_) => 3,
    }
}

fn emit(out: &mut impl Write, value: &serde_json::Value, pretty: bool) -> nqricci::Result<()> {
    let text = if pretty {
        render::table(value)
    } else {
        nqricci::model::to_json(value, false)?
    };
    writeln!(out, "{text}").map_err(|e| Error::Schema(format!("writing output: {e}")))
}

fn run(cli: &Cli, out: &mut impl Write) -> nqricci::Result<u8> {
    let (value, failed) = match &cli.command {
        Command::Validate(a) => report::per_point(a, report::validate)?,
        Command::Ricci { args, path } => report::per_point(args, |m, p, t| report::ricci(m, p, t, *path))?,
        Command::Torsion(a) => report::per_point(a, report::torsion)?,
        Command::Curvature(a) => report::per_point(a, report::curvature)?,
        Command::ExactCompare(a) => report::per_exact_point(a, report::exact_compare)?,
        Command::ExactExport(a) => report::per_exact_point(a, report::exact_export)?,
        Command::Flow { input, direction } => {
            let dir = direction.map(|d| match d {
                DirectionArg::Forward => FlowDirection::Forward,
                DirectionArg::Backward => FlowDirection::Backward,
            });
            let (records, rejected) = report::flow(input, dir)?;
            for r in &records {
                emit(out, r, cli.pretty)?;
            }
            return match rejected {
                Some(e) => Err(e),
                None => Ok(0),
            };
        }
    };
    emit(out, &value, cli.pretty)?;
    Ok(if failed { 1 } else { 0 })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let stdout = std::io::stdout();
    let mut out = stdout.lock();
    match run(&cli, &mut out) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            let _ = out.flush();
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

