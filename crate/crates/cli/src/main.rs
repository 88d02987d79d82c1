use std::path::PathBuf;
use std::process::ExitCode;

use atsmem::harness::{self, compare_to_reference, read_metrics, read_reference, ExperimentKind};
use atsmem::Error;
use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(name = "atsmem", version, about = "Run ATS quantum-memory scenarios")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario file or bundled scenario name and write its report.
    Run {
        scenario: String,
        /// Report directory; defaults to <ATSMEM_OUT_DIR>/<scenario name>.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, env = "ATSMEM_OUT_DIR", default_value = "reports")]
        out_root: PathBuf,
        /// Overrides the scenario seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Worker threads (default: all cores).
        #[arg(long)]
        threads: Option<usize>,
    },
    /// Check a scenario without running it.
    Validate { scenario: String },
    /// Compare a report (directory or metrics.csv) with a key,value,sigma table.
    Compare {
        report: PathBuf,
        reference: PathBuf,
        #[arg(long, default_value_t = 2.0)]
        threshold: f64,
    },
    /// List the bundled scenarios.
    ListScenarios,
}

fn exit_code(err: &Error) -> u8 {
    match err.root() {
        Error::Validation(_) | Error::Parse { .. } | Error::Config(_) => 2,
        Error::Numerical { .. } => 3,
        _ => 1,
    }
}

fn report_error(err: &Error) -> ExitCode {
    eprintln!("error: {err}");
    if let Error::Validation(list) = err.root() {
        for e in list {
            eprintln!("  {e}");
        }
    }
    ExitCode::from(exit_code(err))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Run { scenario, out, out_root, seed, threads } => {
            if let Some(n) = threads {
                if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
                    eprintln!("error: cannot set thread count: {e}");
                    return ExitCode::from(1);
                }
            }
            let mut sc = match harness::load_scenario(&scenario) {
                Ok(s) => s,
                Err(e) => return report_error(&e),
            };
            if let Some(seed) = seed {
                if seed > i64::MAX as u64 {
                    eprintln!("error: --seed must not exceed {}", i64::MAX);
                    return ExitCode::from(2);
                }
                sc.seed = seed;
            }
            let report = match harness::run(&sc) {
                Ok(r) => r,
                Err(e) => return report_error(&e),
            };
            let dir = out.unwrap_or_else(|| out_root.join(&sc.name));
            if let Err(e) = report.write(&dir) {
                return report_error(&e);
            }
            print!("{}", report.summary());
            println!("\nreport written to {}", dir.display());
            ExitCode::SUCCESS
        }
        Command::Validate { scenario } => match harness::load_scenario(&scenario) {
            Ok(s) => {
                println!("{}: valid {} scenario", s.name, s.kind.as_str());
                ExitCode::SUCCESS
            }
            Err(e) => report_error(&e),
        },
        Command::Compare { report, reference, threshold } => {
            let loaded = read_metrics(&report).and_then(|m| Ok((m, read_reference(&reference)?)));
            let (metrics, reference) = match loaded {
                Ok(x) => x,
                Err(e) => return report_error(&e),
            };
            let cmp = compare_to_reference(&metrics, &reference, threshold);
            print!("{}", cmp.render());
            if cmp.passed() {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(4)
            }
        }
        Command::ListScenarios => {
            for (name, text) in harness::BUNDLED {
                let kind = harness::Scenario::from_toml_str(text).map(|s| s.kind).unwrap_or(ExperimentKind::SingleRun);
                println!("{name:<22} {}", kind.as_str());
            }
            ExitCode::SUCCESS
        }
    }
}
