mod commands;
mod render;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

/// Compiles quantified Boolean formulas into planar flows and finds
/// approximate limit cycles of Lipschitz vector fields.
#[derive(Debug, Parser)]
#[command(name = "lcycle", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Compile an instance into a grid flow summary or an arithmetic circuit.
    CompileQbf(CompileArgs),
    /// Decide an instance by following the compiled flow.
    Decide(DecideArgs),
    /// Search for an eps-cycle or eps-fixpoint.
    FindCycle(FindArgs),
    /// Dump a trajectory.
    Trace(TraceArgs),
    /// Re-check a certificate file against its field.
    Verify(VerifyArgs),
    /// Draw a domain and an optional trajectory as SVG.
    Render(RenderArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Variant {
    Discrete,
    Continuous,
}

#[derive(Debug, Args)]
pub struct CompileArgs {
    /// Instance file.
    pub instance: PathBuf,
    #[arg(long, value_enum, default_value = "discrete")]
    pub variant: Variant,
    /// Compile the search variant (discrete only).
    #[arg(long)]
    pub search: bool,
    /// Oracle queries as `square,i,j`; square by name or index.
    #[arg(long = "query")]
    pub queries: Vec<String>,
    /// Write the summary or circuit here instead of standard output.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct DecideArgs {
    /// Instance file; omit with --batch.
    pub instance: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "discrete")]
    pub variant: Variant,
    /// Cross-check against brute-force evaluation.
    #[arg(long)]
    pub check: bool,
    /// Read one instance path per line from standard input.
    #[arg(long)]
    pub batch: bool,
    /// Worker threads in batch mode.
    #[arg(long, default_value_t = 1)]
    pub jobs: usize,
    /// Write the discrete trace through the core here.
    #[arg(long)]
    pub trace_out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct FindArgs {
    /// System spec (circle, annulus:<coeffs>, hypercycle:<n>[:<k-list>],
    /// vdp:<mu>, drift3[:<rate>]) or an instance file for the continuous
    /// reduction.
    pub target: String,
    #[arg(long, default_value_t = 0.01, allow_negative_numbers = true)]
    pub eps: f64,
    /// Lipschitz constant; defaults to the system's.
    #[arg(long = "L", allow_negative_numbers = true)]
    pub lipschitz: Option<f64>,
    /// Comma-separated start point; defaults to the system's.
    #[arg(long, allow_negative_numbers = true)]
    pub start: Option<String>,
    /// Draw the start point from this seed instead.
    #[arg(long, conflicts_with = "start")]
    pub seed: Option<u64>,
    /// Time budget; defaults to the sweep bound.
    #[arg(long, allow_negative_numbers = true)]
    pub budget: Option<f64>,
    /// Certificate file; standard output if absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Where the trajectory goes when the budget runs out.
    #[arg(long, default_value = "partial-trajectory.csv")]
    pub dump: PathBuf,
}

#[derive(Debug, Args)]
pub struct TraceArgs {
    /// Instance file or system spec.
    pub target: String,
    #[arg(long, value_enum, default_value = "discrete")]
    pub variant: Variant,
    /// Grid steps (discrete).
    #[arg(long, default_value_t = 1000)]
    pub steps: u64,
    /// End time (continuous); defaults to one lap for reductions.
    #[arg(long, allow_negative_numbers = true)]
    pub t_end: Option<f64>,
    /// Integration step (continuous).
    #[arg(long, allow_negative_numbers = true)]
    pub h: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub start: Option<String>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    /// Certificate file.
    pub certificate: PathBuf,
    /// System spec or instance file the certificate belongs to.
    #[arg(long)]
    pub system: String,
    #[arg(long = "L", allow_negative_numbers = true)]
    pub lipschitz: Option<f64>,
}

#[derive(Debug, Args)]
pub struct RenderArgs {
    /// Discrete trace or CSV trajectory; omit to draw the domain only.
    pub input: Option<PathBuf>,
    /// Instance whose domain is drawn.
    #[arg(long)]
    pub instance: Option<PathBuf>,
    /// Domain to draw for the instance; CSV input implies continuous.
    #[arg(long, value_enum)]
    pub variant: Option<Variant>,
    /// Arrow glyphs per axis on continuous domains.
    #[arg(long, default_value_t = 16)]
    pub glyphs: usize,
    #[arg(long)]
    pub out: PathBuf,
}

/// Failure with its exit code.
#[derive(Debug)]
pub struct Fail {
    pub code: u8,
    pub error: anyhow::Error,
}

pub fn usage(e: impl Into<anyhow::Error>) -> Fail {
    Fail { code: 2, error: e.into() }
}

pub fn internal(e: impl Into<anyhow::Error>) -> Fail {
    Fail { code: 3, error: e.into() }
}

/// First line of every report.
pub fn header() -> String {
    let args: Vec<String> = std::env::args().skip(1).collect();
    format!("# lcycle {} {}", env!("CARGO_PKG_VERSION"), args.join(" "))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::CompileQbf(a) => commands::compile(a),
        Command::Decide(a) => commands::decide(a),
        Command::FindCycle(a) => commands::find_cycle(a),
        Command::Trace(a) => commands::trace(a),
        Command::Verify(a) => commands::verify(a),
        Command::Render(a) => commands::render(a),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("error: {:#}", f.error);
            ExitCode::from(f.code)
        }
    }
}
