use clap::Parser;
use qpat_cli::{execute, parse_with_overrides, Command};
use std::path::PathBuf;
use std::process::ExitCode;

/// Forward solves, linearizations, reconstructions and sensitivity sweeps
/// for the two-photon photoacoustic model.
#[derive(Debug, Parser)]
#[command(name = "qpat", version)]
struct Cli {
    #[arg(long)]
    config: PathBuf,
    #[arg(long, value_enum)]
    cmd: Command,
    /// Output directory; overrides `output_dir` in the config.
    #[arg(long)]
    out: Option<PathBuf>,
    /// `key=value`, applied after the config file. Repeatable.
    #[arg(long = "override", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Ok(n) = std::env::var("QPAT_THREADS") {
        match n.trim().parse::<usize>() {
            Ok(n) if n > 0 => {
                if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
                    eprintln!("qpat: cannot size the thread pool: {e}");
                }
            }
            _ => {
                eprintln!("qpat: QPAT_THREADS must be a positive integer, got {n:?}");
                return ExitCode::from(2);
            }
        }
    }
    let text = match std::fs::read_to_string(&cli.config) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("qpat: cannot read {}: {e}", cli.config.display());
            return ExitCode::from(1);
        }
    };
    let cfg = match parse_with_overrides(&text, &cli.overrides) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("qpat: {}: {e}", cli.config.display());
            return ExitCode::from(2);
        }
    };
    let out = cli.out.unwrap_or_else(|| cfg.output_dir.clone());
    match execute(cli.cmd, &cfg, &out) {
        Ok(manifest) => {
            print!("{manifest}");
            ExitCode::SUCCESS
        }
        Err((e, _)) => {
            eprintln!("qpat: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
