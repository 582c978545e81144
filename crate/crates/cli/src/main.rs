use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use fieldclt_cli::{run, CliError, ExperimentConfig, EXIT_PASS, EXIT_VERDICT_FAIL};

#[derive(Debug, Parser)]
#[command(name = "fieldclt", version, about = "Monte Carlo checks of the random-field invariance principle")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run an experiment described by a JSON config.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// `dotted.key=value`; the value is parsed as JSON, else taken as a string.
        #[arg(long = "override", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
        /// Output directory; replaces `output.dir`.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Base seed; replaces `mc.base_seed`.
        #[arg(long)]
        seed: Option<u64>,
        /// Worker threads. Results do not depend on this.
        #[arg(long)]
        jobs: Option<usize>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let code = match cli.command {
        Command::Run {
            config,
            mut overrides,
            out,
            seed,
            jobs,
        } => {
            if let Some(dir) = out {
                let dir = serde_json::to_string(&dir.to_string_lossy()).expect("string serializes");
                overrides.push(format!("output.dir={dir}"));
            }
            if let Some(s) = seed {
                overrides.push(format!("mc.base_seed={s}"));
            }
            if let Some(j) = jobs {
                if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(j).build_global() {
                    eprintln!("error: cannot configure {j} worker threads: {e}");
                    return ExitCode::from(3);
                }
            }
            match ExperimentConfig::load(&config, &overrides).and_then(|c| run(&c)) {
                Ok(outcome) => {
                    for r in &outcome.reports {
                        let status = if r.passed() { "PASS" } else { "FAIL" };
                        println!("{status} {}", r.name);
                        for e in r.failures() {
                            println!(
                                "    {}: value {} vs target {:?} (tolerance {:?})",
                                e.name, e.value, e.target, e.tolerance
                            );
                        }
                    }
                    println!("artifacts written to {}", outcome.dir.display());
                    if outcome.passed {
                        EXIT_PASS
                    } else {
                        EXIT_VERDICT_FAIL
                    }
                }
                Err(e) => report_error(&e),
            }
        }
    };
    ExitCode::from(code as u8)
}

fn report_error(e: &CliError) -> i32 {
    eprintln!("error: {e}");
    e.exit_code()
}
