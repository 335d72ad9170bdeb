use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use fpde_core::app::{self, BenchSpec, Kernel, OUTPUT_ROOT_ENV};
use fpde_core::Error;

/// Pseudo-spectral solvers for critical nonlocal parabolic equations.
#[derive(Parser)]
#[command(name = "fpde", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario file and write its artifacts.
    Solve {
        config: PathBuf,
        /// Root for relative `run.output` paths.
        #[arg(long, env = OUTPUT_ROOT_ENV)]
        output_root: Option<PathBuf>,
    },
    /// Run the invariant suites; prints a JSON report.
    Verify {
        /// One suite name, or all suites when omitted.
        suite: Option<String>,
        /// Also write the report to this file.
        #[arg(long)]
        report: Option<PathBuf>,
        /// List suite names and exit.
        #[arg(long)]
        list: bool,
    },
    /// Time the hot kernels; prints a CSV table.
    Bench {
        /// Comma-separated grid sizes; an empty string gives an empty table.
        #[arg(long, default_value = "32,64,128,256")]
        sizes: String,
        /// Kernels to time (multiplier, step-linear, picard-step).
        #[arg(long, value_delimiter = ',')]
        kernel: Vec<String>,
        #[arg(long, default_value_t = 2)]
        dim: usize,
        #[arg(long, default_value_t = app::bench::MIN_REPS)]
        reps: usize,
        /// Write the table here instead of stdout.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Print a snapshot's header and norms.
    Inspect { snapshot: PathBuf },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("fpde: {e}");
            let mut source = std::error::Error::source(&e);
            while let Some(s) = source {
                eprintln!("  caused by: {s}");
                source = s.source();
            }
            ExitCode::from(app::exit_code(&e) as u8)
        }
    }
}

fn run(command: Command) -> Result<i32, Error> {
    match command {
        Command::Solve {
            config,
            output_root,
        } => {
            let (cfg, text) = app::ScenarioConfig::load(&config)?;
            let dir = app::output_dir_under(&cfg, output_root.as_deref());
            let summary = app::run_scenario_in(&cfg, &text, &dir)?;
            for c in &summary.checks {
                println!("{c}");
            }
            println!(
                "{} frames written to {} ({:?})",
                summary.frames,
                summary.output.display(),
                summary.status
            );
            Ok(summary.status.exit_code())
        }
        Command::Verify {
            suite,
            report,
            list,
        } => {
            if list {
                for (name, _) in app::SUITES {
                    println!("{name}");
                }
                return Ok(app::EXIT_OK);
            }
            let r = app::verify(suite.as_deref())?;
            let json = r.to_json();
            println!("{json}");
            if let Some(path) = report {
                std::fs::write(path, &json)?;
            }
            for c in r.checks.iter().filter(|c| !c.passed) {
                eprintln!("{c}");
            }
            Ok(if r.passed {
                app::EXIT_OK
            } else {
                app::EXIT_INVARIANT
            })
        }
        Command::Bench {
            sizes,
            kernel,
            dim,
            reps,
            output,
        } => {
            let sizes = sizes
                .split(',')
                .map(str::trim)
                .filter(|s| !s.is_empty())
                .map(|s| {
                    s.parse::<usize>()
                        .map_err(|_| Error::Config(format!("bad size `{s}` in --sizes")))
                })
                .collect::<Result<Vec<_>, _>>()?;
            let kernels = if kernel.is_empty() {
                Kernel::ALL.to_vec()
            } else {
                kernel
                    .iter()
                    .map(|k| Kernel::parse(k))
                    .collect::<Result<_, _>>()?
            };
            let rows = app::bench(&BenchSpec {
                kernels,
                dim,
                sizes,
                reps,
            })?;
            let csv = app::bench_csv(&rows);
            match output {
                Some(path) => std::fs::write(path, csv)?,
                None => print!("{csv}"),
            }
            Ok(app::EXIT_OK)
        }
        Command::Inspect { snapshot } => {
            print!("{}", app::inspect(&snapshot)?);
            Ok(app::EXIT_OK)
        }
    }
}
