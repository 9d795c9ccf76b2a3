use clap::{Parser, Subcommand};
use std::path::PathBuf;
use std::process::ExitCode;

use nf_cli::{emit_plotdata, run, Command, RunConfig, RunError};

#[derive(Parser)]
#[command(name = "nf", version, about = "KAM and Birkhoff normal forms for the derivative NLS lattice")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
    /// TOML run configuration; every key has a default.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Override one key, e.g. `--set kam.steps=4`; repeatable.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// Output directory; defaults to `<output.dir>/<command>`.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Replaces the configured seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads.
    #[arg(long, global = true)]
    jobs: Option<usize>,
}

#[derive(Subcommand)]
enum Cmd {
    /// Algebra, solver-oracle and estimate-constant suites.
    Selftest,
    /// KAM iteration with a per-step norm table.
    Kam,
    /// KAM followed by the partial Birkhoff normal form.
    Birkhoff,
    /// One trajectory around the constructed torus.
    Simulate,
    /// Distance to the torus for each configured delta.
    Stability,
    /// Removed parameter fraction as a function of eta.
    Measure,
    /// Rewrite the long-format plot tables of a finished run.
    Plotdata { dir: PathBuf },
}

fn execute(cli: Cli) -> Result<bool, RunError> {
    let mut overrides = cli.set.clone();
    if let Some(s) = cli.seed {
        overrides.push(format!("seed={s}"));
    }
    let cfg = RunConfig::load(cli.config.as_deref(), &overrides)?;
    if let Some(j) = cli.jobs {
        rayon::ThreadPoolBuilder::new().num_threads(j.max(1)).build_global().map_err(|e| RunError::Schema(e.to_string()))?;
    }
    let cmd = match cli.cmd {
        Cmd::Selftest => Command::Selftest,
        Cmd::Kam => Command::Kam,
        Cmd::Birkhoff => Command::Birkhoff,
        Cmd::Simulate => Command::Simulate,
        Cmd::Stability => Command::Stability,
        Cmd::Measure => Command::Measure,
        Cmd::Plotdata { dir } => {
            for f in emit_plotdata(&dir)? {
                println!("{}", dir.join(f).display());
            }
            return Ok(true);
        }
    };
    let out = cli.out.unwrap_or_else(|| PathBuf::from(&cfg.output.dir).join(cmd.name()));
    let outcome = run(cmd, &cfg, &out)?;
    for l in &outcome.lines {
        println!("{l}");
    }
    println!("artifacts in {}", out.display());
    Ok(outcome.pass)
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(_) => ExitCode::SUCCESS,
        Err(e) => {
            let code = e.exit_code() as u8;
            eprintln!("{:#}", anyhow::Error::new(e).context("run failed"));
            ExitCode::from(code)
        }
    }
}
