use clap::{Args, Parser, Subcommand};
use conical_flow::cli_io::{
    cmd_chi_table, cmd_diagnose, cmd_elliptic, cmd_ladder, cmd_run, exit_code, parse_config,
    Outcome, Overrides, RunConfig, EXIT_INCOMPLETE,
};
use conical_flow::Result;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "conical-flow", version, about = "Regularized conical Kähler-Ricci flow on a flat torus")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// TOML run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Output directory (defaults to the config's `output`, then `./out`).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Regularization: the single ε for `run`, the top rung for `ladder` and `elliptic`.
    #[arg(long)]
    eps: Option<f64>,
    /// Grid size N, overriding the config.
    #[arg(long)]
    grid: Option<usize>,
    #[arg(long)]
    quiet: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Flow at one ε with diagnostics, snapshots and manifest.
    Run(Common),
    /// Every ε of the ladder plus the ladder report.
    Ladder(Common),
    /// Reference solutions of the elliptic family for every rung.
    Elliptic(Common),
    /// Tabulate χ on [0, 1].
    ChiTable {
        #[arg(long, default_value_t = 0.5)]
        beta: f64,
        #[arg(long, default_value_t = 0.0)]
        eps: f64,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Recompute the series of a finished run from its snapshots.
    Diagnose {
        /// Directory written by `run` or `ladder`.
        run_dir: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        quiet: bool,
    },
}

fn load(c: &Common) -> Result<(RunConfig, Overrides, PathBuf)> {
    let cfg = parse_config(&c.config)?;
    let out = c
        .out
        .clone()
        .or_else(|| cfg.output.clone())
        .unwrap_or_else(|| Path::new("out").to_path_buf());
    let ov = Overrides {
        eps: c.eps,
        grid: c.grid,
        quiet: c.quiet,
    };
    Ok((cfg, ov, out))
}

fn dispatch(cmd: Command) -> Result<Outcome> {
    match cmd {
        Command::Run(c) => {
            let (cfg, ov, out) = load(&c)?;
            cmd_run(&cfg, &ov, &out)
        }
        Command::Ladder(c) => {
            let (cfg, ov, out) = load(&c)?;
            cmd_ladder(&cfg, &ov, &out)
        }
        Command::Elliptic(c) => {
            let (cfg, ov, out) = load(&c)?;
            cmd_elliptic(&cfg, &ov, &out)
        }
        Command::ChiTable { beta, eps, out } => cmd_chi_table(beta, eps, &out),
        Command::Diagnose { run_dir, out, quiet } => cmd_diagnose(&run_dir, &out, quiet),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(o) if o.all_complete() => ExitCode::SUCCESS,
        Ok(o) => {
            eprintln!("incomplete ladder; partial artifacts kept under {}", o.out.display());
            ExitCode::from(EXIT_INCOMPLETE as u8)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e) as u8)
        }
    }
}
