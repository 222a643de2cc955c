use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser};
use cube_transport_cli::config::{Command, RunConfig, SEED_ENV};
use cube_transport_cli::{run, EXIT_ERROR};

#[derive(Parser)]
#[command(
    name = "cube-transport",
    version,
    about = "Numerical checks of transport and concentration inequalities on the cube"
)]
struct Cli {
    #[arg(value_enum)]
    command: Command,

    /// JSON config; flags override its fields.
    #[arg(long)]
    config: Option<PathBuf>,

    #[command(flatten)]
    overrides: Overrides,
}

#[derive(Args)]
struct Overrides {
    /// Dimension.
    #[arg(short = 'n', long)]
    n: Option<usize>,
    /// Cells per axis.
    #[arg(short = 'm', long)]
    m: Option<usize>,
    /// Side length of the cube.
    #[arg(long)]
    ell: Option<f64>,
    #[arg(long)]
    n_points: Option<usize>,
    #[arg(long, env = SEED_ENV)]
    seed: Option<u64>,
    #[arg(long)]
    output_dir: Option<PathBuf>,
    /// Also write an SVG per concentration profile.
    #[arg(long)]
    plot: bool,
    #[arg(long)]
    threads: Option<usize>,
    #[arg(long)]
    rel_tol: Option<f64>,
    #[arg(long)]
    abs_tol: Option<f64>,
}

impl Overrides {
    fn apply(self, cfg: &mut RunConfig) {
        macro_rules! set {
            ($($field:ident => $target:expr),* $(,)?) => {
                $(if let Some(v) = self.$field { $target = v; })*
            };
        }
        set! {
            n => cfg.grid.n,
            m => cfg.grid.m,
            ell => cfg.grid.ell,
            n_points => cfg.monte_carlo.n_points,
            output_dir => cfg.output_dir,
            rel_tol => cfg.tolerance.rel_tol,
            abs_tol => cfg.tolerance.abs_tol,
        }
        if self.seed.is_some() {
            cfg.monte_carlo.seed = self.seed;
        }
        if self.threads.is_some() {
            cfg.threads = self.threads;
        }
        cfg.plot |= self.plot;
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_ERROR as u8 } else { 0 });
        }
    };
    let mut cfg = match &cli.config {
        Some(path) => match RunConfig::load(path) {
            Ok(c) => c,
            Err(e) => {
                eprintln!("error: {e}");
                return ExitCode::from(EXIT_ERROR as u8);
            }
        },
        None => RunConfig::default(),
    };
    cfg.command = cli.command;
    cli.overrides.apply(&mut cfg);
    ExitCode::from(run(cfg) as u8)
}
