use chns::config::load_config_with;
use chns::run::{self, Check, Outcome};
use chns::{plot, Error};
use clap::{Parser, Subcommand, ValueEnum};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "chns",
    version,
    about = "Boundary control of a Cahn-Hilliard-Navier-Stokes system"
)]
struct Cli {
    /// Run configuration (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Override the config seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Only print errors.
    #[arg(long, global = true)]
    quiet: bool,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Forward solve with diagnostics and phase snapshots.
    Simulate,
    /// Linearized solve along a seeded smooth direction.
    Linearize,
    /// Adjoint solve, boundary multipliers and reduced gradient.
    Adjoint,
    /// Projected-gradient optimization.
    Optimize,
    /// Derivative checks; exit code 4 when a threshold is missed.
    Verify {
        #[arg(value_enum)]
        check: CheckArg,
    },
    /// Render plots from an output directory.
    Plot,
}

#[derive(Clone, Copy, ValueEnum)]
enum CheckArg {
    Taylor,
    Gradcheck,
    Duality,
}

fn report(o: &Outcome) {
    for (k, v) in &o.metrics {
        println!("{k} = {v:.6e}");
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = if cli.quiet { "error" } else { "info" };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match dispatch(&cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn dispatch(cli: &Cli) -> Result<u8, Error> {
    if let Cmd::Plot = cli.cmd {
        let files = plot::emit_plots(&cli.out)?;
        if !cli.quiet {
            files.iter().for_each(|f| println!("{}", f.display()));
        }
        return Ok(0);
    }
    let path = cli
        .config
        .as_ref()
        .ok_or_else(|| Error::Validation(vec!["--config is required".into()]))?;
    let rc = load_config_with(path, cli.seed)?;
    let o = match &cli.cmd {
        Cmd::Simulate => run::simulate(&rc, &cli.out)?,
        Cmd::Linearize => run::linearize(&rc, &cli.out)?,
        Cmd::Adjoint => run::adjoint(&rc, &cli.out)?,
        Cmd::Optimize => run::run_optimize(&rc, &cli.out)?,
        Cmd::Verify { check } => {
            let c = match check {
                CheckArg::Taylor => Check::Taylor,
                CheckArg::Gradcheck => Check::Gradcheck,
                CheckArg::Duality => Check::Duality,
            };
            run::run_verify(&rc, c, &cli.out)?
        }
        Cmd::Plot => unreachable!(),
    };
    if !cli.quiet {
        report(&o);
    }
    Ok(if o.passed { 0 } else { 4 })
}
