use clap::{Parser, Subcommand};
use std::path::PathBuf;
use strata_cli::{
    cmd_continue, cmd_critical, cmd_diagnose, cmd_export, cmd_solve, CliError, ContinueArgs, ExportFormat, Outcome,
    EXIT_INTERNAL,
};

#[derive(Parser, Debug)]
#[command(name = "strata", version, about = "Stratified solitary water waves")]
struct Cli {
    /// Print the machine-readable summary as JSON on stdout.
    #[arg(long, global = true)]
    json: bool,
    /// Suppress human-readable output and progress.
    #[arg(long, global = true)]
    quiet: bool,
    /// Worker thread cap.
    #[arg(long, global = true, env = "STRATA_THREADS")]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Critical Froude number and linear spectrum.
    Critical {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Small-amplitude wave from the KdV guess, Newton and diagnostics.
    Solve {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        epsilon: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Pseudo-arclength continuation toward stagnation.
    Continue {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        max_points: Option<usize>,
        /// Continue from the last point stored in --out.
        #[arg(long)]
        resume: bool,
    },
    /// Full diagnostics for every state in a run directory.
    Diagnose {
        run_dir: PathBuf,
        /// Config to use instead of the path recorded in the manifest.
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Eulerian fields and surface profiles for every state in a run directory.
    Export {
        run_dir: PathBuf,
        #[arg(long, value_enum, default_value = "csv")]
        format: ExportFormat,
        #[arg(long)]
        config: Option<PathBuf>,
    },
}

fn run(cli: &Cli) -> Result<Outcome, CliError> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build_global()
            .map_err(|e| CliError::internal(e.to_string()))?;
    }
    match &cli.command {
        Command::Critical { config, out } => cmd_critical(config, out.as_deref()),
        Command::Solve { config, epsilon, out } => cmd_solve(config, *epsilon, out.as_deref()),
        Command::Continue {
            config,
            out,
            max_points,
            resume,
        } => {
            let args = ContinueArgs {
                max_points: *max_points,
                resume: *resume,
            };
            let quiet = cli.quiet;
            cmd_continue(config, out, &args, &mut |r| {
                if !quiet {
                    eprintln!(
                        "point {:>4}  s = {:.5}  F = {:.8}  amplitude = {:.6}  max h_p = {:.4}",
                        r.index, r.s, r.froude, r.amplitude, r.max_hp
                    );
                }
            })
        }
        Command::Diagnose { run_dir, config } => cmd_diagnose(run_dir, config.as_deref()),
        Command::Export { run_dir, format, config } => cmd_export(run_dir, *format, config.as_deref()),
    }
}

fn main() {
    let cli = Cli::parse();
    let code = match run(&cli) {
        Ok(outcome) => {
            if cli.json {
                println!("{}", outcome.summary);
            } else if !cli.quiet {
                print!("{}", outcome.text);
            }
            outcome.code
        }
        Err(e) => {
            if cli.json {
                println!("{}", serde_json::json!({ "error": e.message, "exit_code": e.code }));
            }
            eprintln!("error: {}", e.message);
            if e.code == 0 {
                EXIT_INTERNAL
            } else {
                e.code
            }
        }
    };
    std::process::exit(code);
}
