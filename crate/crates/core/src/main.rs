use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use ma_hdg::config::{Command, RunConfig};
use ma_hdg::runner::{output_root, run};
use ma_hdg::Error;

/// HDG solvers for the Monge-Ampere equation and optimal-transport mesh adaptation.
#[derive(Parser)]
#[command(name = "ma-hdg", version)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Error and iteration study on the Dirichlet benchmarks.
    Converge(ConvergeArgs),
    /// Adapted mesh from an optimal-transport solve.
    Adapt(AdaptArgs),
    /// Fast invariant checks.
    Selftest(Common),
}

#[derive(Args)]
struct Common {
    /// key = value config file; flags override its entries.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output root (overridden by MA_HDG_OUT).
    #[arg(long)]
    out: Option<String>,
    /// Run subdirectory name.
    #[arg(long)]
    name: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    tau: Option<String>,
    #[arg(long)]
    newton_tol: Option<String>,
    #[arg(long)]
    fp_tol: Option<String>,
    /// l2 or coefficient.
    #[arg(long)]
    fp_norm: Option<String>,
    #[arg(long)]
    max_iter: Option<String>,
}

#[derive(Args)]
struct ConvergeArgs {
    #[command(flatten)]
    common: Common,
    /// ex1 or ex2.
    #[arg(long)]
    example: Option<String>,
    /// Radius of example 2.
    #[arg(long = "R")]
    radius: Option<String>,
    /// tri or quad.
    #[arg(long)]
    mesh: Option<String>,
    /// Comma-separated degrees.
    #[arg(long)]
    p: Option<String>,
    /// Comma-separated resolutions.
    #[arg(long)]
    n: Option<String>,
    /// newton, fixed-point or both.
    #[arg(long)]
    method: Option<String>,
}

#[derive(Args)]
struct AdaptArgs {
    #[command(flatten)]
    common: Common,
    /// uniform, ring, bell or shock.
    #[arg(long)]
    density: Option<String>,
    /// Comma-separated density coefficients.
    #[arg(long)]
    coef: Option<String>,
    /// NxM background grid.
    #[arg(long)]
    grid: Option<String>,
    /// tri or quad.
    #[arg(long)]
    elem: Option<String>,
    #[arg(long)]
    p: Option<String>,
    /// square or cylinder.
    #[arg(long)]
    domain: Option<String>,
    /// newton or fixed-point.
    #[arg(long)]
    method: Option<String>,
    /// auto, on or off.
    #[arg(long)]
    continuation: Option<String>,
}

fn build_config(command: Command, common: &Common, flags: &[(&str, &Option<String>)]) -> ma_hdg::Result<RunConfig> {
    let mut cfg = RunConfig::for_command(command);
    if let Some(path) = &common.config {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Io {
            path: path.clone(),
            source: e,
        })?;
        cfg.apply_text(&text)?;
    }
    let shared = [
        ("out", &common.out),
        ("name", &common.name),
        ("tau", &common.tau),
        ("newton_tol", &common.newton_tol),
        ("fp_tol", &common.fp_tol),
        ("fp_norm", &common.fp_norm),
        ("max_iter", &common.max_iter),
    ];
    for (key, value) in shared.iter().chain(flags) {
        if let Some(v) = value {
            cfg.set(key, v)?;
        }
    }
    cfg.command = command;
    Ok(cfg)
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::InvalidArgument(_) | Error::UnknownTag(_) => 2,
        Error::Io { .. } => 3,
        _ => 1,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let config = match &cli.command {
        Cmd::Converge(a) => build_config(
            Command::Converge,
            &a.common,
            &[
                ("example", &a.example),
                ("R", &a.radius),
                ("mesh", &a.mesh),
                ("p", &a.p),
                ("n", &a.n),
                ("method", &a.method),
            ],
        ),
        Cmd::Adapt(a) => build_config(
            Command::Adapt,
            &a.common,
            &[
                ("density", &a.density),
                ("coef", &a.coef),
                ("grid", &a.grid),
                ("mesh", &a.elem),
                ("p", &a.p),
                ("domain", &a.domain),
                ("method", &a.method),
                ("continuation", &a.continuation),
            ],
        ),
        Cmd::Selftest(c) => build_config(Command::Selftest, c, &[]),
    };
    let result = config.and_then(|cfg| run(&cfg, &output_root(&cfg)));
    match result {
        Ok(out) => {
            print!("{}", out.summary);
            println!("output: {}", out.dir.display());
            if out.failures.is_empty() {
                ExitCode::SUCCESS
            } else {
                for f in &out.failures {
                    eprintln!("failed: {f}");
                }
                ExitCode::from(1)
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
