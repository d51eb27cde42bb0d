use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use powernet::data::{convert_grid_dump, write_dataset_csv};
use powernet_cli::config::{RawConfig, Task};
use powernet_cli::suite::{run_suite, SUITE_FILE};
use powernet_cli::{exit, run, ConfigError, RunError, RunManifest};

#[derive(Parser)]
#[command(name = "powernet", version, about = "Train plain, residual and power-skip networks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct ConfigArgs {
    /// Flat TOML config file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override one key, e.g. `--set layers=20`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Fit a network to a builtin function or a data file.
    Interpolate(ConfigArgs),
    /// Recover the Burgers coefficients from observations.
    PinnBurgers(ConfigArgs),
    /// Write the Cole-Hopf reference grid to `reference_file`.
    GenBurgersRef(ConfigArgs),
    /// Run every combination of the `[sweep]` table.
    Suite(ConfigArgs),
    /// Convert a whitespace-separated height matrix into `x1,x2,y` CSV.
    ConvertGrid {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output: PathBuf,
        /// Distance between neighbouring grid nodes.
        #[arg(long, default_value_t = 1.0)]
        spacing: f64,
    },
}

fn load(args: &ConfigArgs, task: Option<Task>) -> Result<RawConfig, ConfigError> {
    let mut raw = RawConfig::load(args.config.as_deref())?;
    for s in &args.set {
        raw.set(s)?;
    }
    if let Some(task) = task {
        let name = toml::Value::try_from(task).map_err(|e| ConfigError(e.to_string()))?;
        match raw.values.get("task") {
            Some(v) if *v != name => {
                return Err(ConfigError(format!("config task {v} does not match the subcommand {name}")));
            }
            _ => {
                raw.values.insert("task".into(), name);
            }
        }
    }
    Ok(raw)
}

fn report(m: &RunManifest) -> i32 {
    let status = if m.failed { "FAILED" } else { "ok" };
    println!("{status}: {} after {} iterations ({})", m.task, m.iterations, m.stop_reason);
    if let Some(v) = m.metrics {
        println!("  validation mse {:.4e}  max_abs {:.4e}  rel_l2 {}", v.mse, v.max_abs,
            v.rel_l2.map(|r| format!("{r:.4e}")).unwrap_or_else(|| "n/a".into()));
    }
    if let Some(l) = m.lambda {
        println!("  lambda1 {:.6} ({:.3}%)  lambda2 {:.6} ({:.3}%)", l.lambda1, l.lambda1_error_pct, l.lambda2, l.lambda2_error_pct);
    }
    println!("  wrote {}", m.config.output_dir.display());
    if m.failed { exit::TRAINING } else { exit::SUCCESS }
}

fn main_inner(cli: Cli) -> Result<i32, RunError> {
    match cli.command {
        Command::Interpolate(a) => Ok(report(&run::run_interpolate(&load(&a, Some(Task::Interpolate))?.resolve()?)?)),
        Command::PinnBurgers(a) => Ok(report(&run::run_pinn(&load(&a, Some(Task::PinnBurgers))?.resolve()?)?)),
        Command::GenBurgersRef(a) => {
            let path = run::run_gen_reference(&load(&a, Some(Task::GenBurgersRef))?.resolve()?)?;
            println!("wrote {}", path.display());
            Ok(exit::SUCCESS)
        }
        Command::Suite(a) => {
            let raw = load(&a, None)?;
            let runs = run_suite(&raw, |i, n, r| match &r.outcome {
                Ok(m) => println!("[{i}/{n}] {} {}", if m.failed { "failed" } else { "ok" }, r.config.output_dir.display()),
                Err(e) => println!("[{i}/{n}] error {}: {e}", r.config.output_dir.display()),
            })?;
            let bad = runs.iter().filter(|r| !matches!(&r.outcome, Ok(m) if !m.failed)).count();
            println!("{} runs, {bad} failed; table in {}", runs.len(), raw.resolve()?.output_dir.join(SUITE_FILE).display());
            Ok(exit::SUCCESS)
        }
        Command::ConvertGrid { input, output, spacing } => {
            let text = std::fs::read_to_string(&input).map_err(|e| RunError::Output(format!("{}: {e}", input.display())))?;
            let ds = convert_grid_dump(&text, &input, spacing)?;
            write_dataset_csv(&ds, &output)?;
            println!("wrote {} points to {}", ds.len(), output.display());
            Ok(exit::SUCCESS)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let code = match main_inner(cli) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    };
    ExitCode::from(code as u8)
}
