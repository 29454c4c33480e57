use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use iad_core::harness::{self, RunOptions, RunSummary};

#[derive(Parser)]
#[command(name = "iad", version, about = "Run, resume and report IAD experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Execute every matrix cell of an experiment config.
    Run {
        config: PathBuf,
        #[command(flatten)]
        exec: ExecFlags,
    },
    /// Continue an interrupted experiment from its manifest.
    Resume {
        manifest: PathBuf,
        #[command(flatten)]
        exec: ExecFlags,
    },
    /// Write curve CSVs and a summary for a ledger.
    Report { ledger: PathBuf, out_dir: PathBuf },
    /// Check a config and print the size of its matrix.
    Validate { config: PathBuf },
}

#[derive(Args)]
struct ExecFlags {
    /// Worker threads (default: all cores, or 1 for external adapters).
    #[arg(long)]
    workers: Option<usize>,
    /// Print the matrix instead of running it.
    #[arg(long)]
    dry_run: bool,
    /// Only cells whose strategy, task id or run id matches this glob.
    #[arg(long)]
    filter: Option<String>,
}

impl ExecFlags {
    fn options(&self) -> RunOptions {
        RunOptions {
            workers: self.workers,
            dry_run: self.dry_run,
            filter: self.filter.clone(),
            ..Default::default()
        }
    }
}

fn print_summary(s: &RunSummary) -> i32 {
    if !s.planned.is_empty() || s.selected_runs == 0 {
        for c in &s.planned {
            println!("{}\t{}", c.run_id, c.task_id);
        }
        println!("{} of {} cells selected", s.selected_runs, s.total_runs);
        return harness::EXIT_OK;
    }
    println!(
        "{}: {} run, {} already done, {} failed",
        s.output_dir.display(),
        s.executed,
        s.skipped,
        s.failures.len()
    );
    for f in &s.failures {
        eprintln!("failed: {f}");
    }
    s.exit_code()
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run { config, exec } => {
            harness::run_experiment(&config, &exec.options()).map(|s| print_summary(&s))
        }
        Command::Resume { manifest, exec } => {
            harness::resume(&manifest, &exec.options()).map(|s| print_summary(&s))
        }
        Command::Report { ledger, out_dir } => {
            harness::emit_reports(&ledger, &out_dir, 1.0).map(|r| {
                for f in &r.files {
                    println!("{}", f.display());
                }
                r.exit_code()
            })
        }
        Command::Validate { config } => harness::validate(&config).map(|(_, cells)| {
            println!("ok: {} cells", cells.len());
            harness::EXIT_OK
        }),
    };
    let code = result.unwrap_or_else(|e| {
        eprintln!("error: {e}");
        harness::error_exit_code(&e)
    });
    ExitCode::from(code as u8)
}
