use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

mod commands;

/// Stable reaction-diffusion patterns on bent tubes and glued tori.
#[derive(Parser, Debug)]
#[command(name = "rdsurf", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
pub struct Common {
    /// Configuration file; built-in defaults when omitted.
    #[arg(long, short)]
    pub config: Option<PathBuf>,
    /// Output directory; overrides `output.directory`.
    #[arg(long, short)]
    pub out: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Synthesize the base pattern and its nonlinearity on the straight tube.
    Synth(Common),
    /// Continue the base pattern in curvature and write the trace.
    Continue(Common),
    /// Glue 2n bent copies and write the global mesh and field.
    Glue {
        #[command(flatten)]
        common: Common,
        /// Number of copies per half period; overrides `glue.n`.
        #[arg(long)]
        n: Option<usize>,
    },
    /// Run every stage and write the verification report.
    Verify(Common),
    /// Re-emit the artifacts stored by `glue` or `verify`.
    Export {
        /// Directory holding `run.cfg` and `global_field.csv`.
        #[arg(long, default_value = "out")]
        from: PathBuf,
        /// Destination directory; defaults to `--from`.
        #[arg(long, short)]
        out: Option<PathBuf>,
        /// Output format (json, csv, obj); repeatable.
        #[arg(long = "format", short, required = true)]
        formats: Vec<String>,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(2) } else { ExitCode::SUCCESS };
        }
    };
    let result = match cli.command {
        Command::Synth(c) => commands::synth(&c),
        Command::Continue(c) => commands::continuation(&c),
        Command::Glue { common, n } => commands::glue(&common, n),
        Command::Verify(c) => commands::verify(&c),
        Command::Export { from, out, formats } => commands::export(&from, out.as_deref(), &formats),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(commands::exit_code(&e))
        }
    }
}
