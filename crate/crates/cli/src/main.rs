use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use stickysim_cli::params::Params;
use stickysim_cli::{compare, config, experiments, run_experiment, CliError, RunOptions};

#[derive(Parser)]
#[command(name = "stickysim", version = stickysim_cli::output::VERSION, about = "Flow stickiness vs packet latency experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a named experiment, writing CSVs and summary.json.
    Run {
        experiment: String,
        #[arg(long)]
        seed: Option<u64>,
        /// Output directory [default: results/<experiment>]
        #[arg(long)]
        out: Option<PathBuf>,
        /// Experiment parameter, repeatable.
        #[arg(long = "param", value_name = "K=V")]
        params: Vec<String>,
        /// TOML file with defaults; flags take precedence.
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Total variation between the distributions in two CSV files.
    Compare {
        a: PathBuf,
        b: PathBuf,
        #[arg(long)]
        tol: f64,
        /// Value column in `a` [default: p, else first p_*]
        #[arg(long)]
        column_a: Option<String>,
        /// Value column in `b` [default: p, else first p_*]
        #[arg(long)]
        column_b: Option<String>,
    },
    /// List experiments.
    List {
        /// Only experiments exercising this scheme family.
        #[arg(long)]
        scheme: Option<String>,
    },
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Run {
            experiment,
            seed,
            out,
            params,
            config: config_path,
        } => {
            let file = match &config_path {
                Some(p) => config::load(p, &experiment)?,
                None => config::FileSettings::default(),
            };
            let mut merged = file.params;
            merged.extend(Params::from_pairs(&params)?);
            let opts = RunOptions {
                seed: seed.or(file.seed).unwrap_or(1),
                out: out
                    .or(file.out)
                    .unwrap_or_else(|| PathBuf::from("results").join(&experiment)),
                params: merged,
            };
            let summary = run_experiment(&experiment, &opts)?;
            for f in &summary.files {
                println!("wrote {}", opts.out.join(f).display());
            }
            for (k, v) in &summary.tv_distances {
                println!("tv {k} = {v:.6e}");
            }
            println!(
                "wrote {} ({:.2}s)",
                opts.out.join(stickysim_cli::output::SUMMARY_FILE).display(),
                summary.wall_clock_seconds
            );
            Ok(())
        }
        Command::Compare {
            a,
            b,
            tol,
            column_a,
            column_b,
        } => {
            let report =
                compare::compare_files(&a, &b, tol, column_a.as_deref(), column_b.as_deref())?;
            println!("{report}");
            if report.passed() {
                Ok(())
            } else {
                Err(CliError::Threshold(format!(
                    "tv {:.6e} exceeds tol {:e} (mean gap {:+.6})",
                    report.tv,
                    report.tol,
                    report.mean_gap()
                )))
            }
        }
        Command::List { scheme } => {
            for e in experiments::list(scheme.as_deref()) {
                println!("{:<27} {}", e.name, e.about);
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
