use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use expfbm::harness::{
    covariance_csv, covariance_diagnostics, emit_report, parse_config, run_convergence, run_covariance,
    run_simulation, run_stability, ExperimentConfig,
};
use expfbm::Error;

/// Exponential Euler experiments for stiff systems driven by fractional Brownian motion.
#[derive(Parser, Debug)]
#[command(name = "expfbm", version)]
struct Cli {
    /// Master seed, overrides the config.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Number of Monte Carlo paths, overrides the config.
    #[arg(long, global = true)]
    paths: Option<usize>,
    /// 1000 paths and 2048 reference steps.
    #[arg(long, global = true)]
    paper_scale: bool,
    /// Where result files go, overrides the config.
    #[arg(long, global = true)]
    output_dir: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Strong-error convergence study; writes errors.csv, slopes.csv, manifest.txt.
    Converge { config: PathBuf },
    /// Single trajectory; writes trajectory.csv.
    Simulate { config: PathBuf },
    /// Stability condition and maximal step size; writes stability.csv.
    Stability { config: PathBuf },
    /// Covariance of the convolution increments; writes covariance.csv and covariance_diagnostics.txt.
    Covariance { config: PathBuf },
}

fn load(cli: &Cli, path: &Path) -> Result<ExperimentConfig, Error> {
    let text = fs::read_to_string(path).map_err(|e| Error::Config {
        line: 0,
        message: format!("cannot read {}: {e}", path.display()),
    })?;
    let mut cfg = parse_config(&text)?;
    if cli.paper_scale {
        cfg.apply_paper_scale();
    }
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(paths) = cli.paths {
        cfg.paths = paths;
    }
    if let Some(dir) = &cli.output_dir {
        cfg.output_dir = dir.clone();
    }
    cfg.validate()?;
    Ok(cfg)
}

fn write(dir: &Path, name: &str, body: impl AsRef<[u8]>) -> Result<PathBuf, Error> {
    fs::create_dir_all(dir)?;
    let path = dir.join(name);
    fs::write(&path, body)?;
    Ok(path)
}

fn run(cli: &Cli) -> Result<Vec<PathBuf>, Error> {
    match &cli.command {
        Command::Converge { config } => {
            let cfg = load(cli, config)?;
            let report = run_convergence(&cfg)?;
            for row in &report.rows {
                println!("H={} N={} rmse={:.6e} stderr={:.2e}", row.hurst, row.steps, row.rmse, row.stderr);
            }
            for s in &report.slopes {
                println!("H={} slope={:.4} residual={:.3e}", s.hurst, s.fit.slope, s.fit.residual);
            }
            emit_report(&report, &cfg.output_dir)
        }
        Command::Simulate { config } => {
            let cfg = load(cli, config)?;
            let traj = run_simulation(&cfg)?;
            let mut body = Vec::new();
            traj.write_csv(&mut body)?;
            Ok(vec![write(&cfg.output_dir, "trajectory.csv", body)?])
        }
        Command::Stability { config } => {
            let cfg = load(cli, config)?;
            let a = run_stability(&cfg)?;
            println!(
                "lhs={:.6} rhs={:.6} condition_holds={} h_star={}",
                a.lhs,
                a.rhs,
                a.condition_holds,
                a.h_star.map_or("none".to_string(), |h| format!("{h:.15}"))
            );
            let mut body = Vec::new();
            a.write_csv(&mut body)?;
            Ok(vec![write(&cfg.output_dir, "stability.csv", body)?])
        }
        Command::Covariance { config } => {
            let cfg = load(cli, config)?;
            let asm = run_covariance(&cfg)?;
            Ok(vec![
                write(&cfg.output_dir, "covariance.csv", covariance_csv(&asm))?,
                write(&cfg.output_dir, "covariance_diagnostics.txt", covariance_diagnostics(&asm))?,
            ])
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(files) => {
            for f in files {
                log::info!("wrote {}", f.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) if e.is_config() => {
            eprintln!("configuration error: {e}");
            ExitCode::from(1)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
