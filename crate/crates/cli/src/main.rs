use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use tsboot::bootstrap::read_pivot_csv;
use tsboot::estimators::{ar1_lad, ar1_lse, ar1_wlad, ar1_wlse, arch_fit, ArchVariant};
use tsboot::harness::{emit_report, run_experiment, ExperimentConfig, ReportFormat};
use tsboot::processes::{
    simulate_ar1, simulate_arch, simulate_hetero_ar1, Ar1Spec, ArchSpec, HeteroAr1Spec, Series,
    TauSchedule, DEFAULT_ARCH_BURN_IN,
};
use tsboot::rand_weights::{ErrorDist, RngStream};
use tsboot::stats::ks_two_sample;
use tsboot::{Error, Result};

const THREADS_ENV: &str = "TSBOOT_THREADS";

/// Bootstrap experiments for AR(1), heteroscedastic AR(1) and ARCH series.
#[derive(Parser)]
#[command(name = "tsboot", version)]
struct Cli {
    /// Worker threads (0 = all cores). TSBOOT_THREADS takes precedence.
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment described by a JSON config.
    Run {
        config: PathBuf,
        /// Overrides the config's output_dir.
        #[arg(long)]
        output_dir: Option<PathBuf>,
        /// Table formats to write (repeatable). Defaults to both.
        #[arg(long = "format", value_enum)]
        formats: Vec<Format>,
        /// Draw a fresh series for every bootstrap replicate.
        #[arg(long)]
        fresh_series_per_replicate: bool,
    },
    /// Two-sample Kolmogorov-Smirnov test between two CSV files (pivot
    /// `replicate,param,pivot` or series `t,x`).
    Ks {
        a: PathBuf,
        b: PathBuf,
        /// Compare only this parameter of pivot files.
        #[arg(long)]
        param: Option<String>,
    },
    /// Simulate a series and write it as `t,x` CSV.
    Simulate(SimulateArgs),
    /// Fit an estimator to a `t,x` series.
    Fit {
        /// lse, lad, wlse, wlad, gaussian_nll, lade1, lade2 or lade3.
        estimator: String,
        series: PathBuf,
        /// ARCH order.
        #[arg(long, default_value_t = 1)]
        p: usize,
        /// Two-period schedule for wlse/wlad.
        #[arg(long, requires = "sigma2_sq")]
        sigma1_sq: Option<f64>,
        #[arg(long, requires = "sigma1_sq")]
        sigma2_sq: Option<f64>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Markdown,
}

#[derive(Clone, Copy, ValueEnum)]
enum Model {
    Ar1,
    Hetero,
    Arch,
}

#[derive(Args)]
struct SimulateArgs {
    model: Model,
    #[arg(long, default_value_t = 0.5)]
    theta: f64,
    #[arg(long, default_value_t = 1.0)]
    sigma: f64,
    #[arg(long, default_value_t = 1.0)]
    sigma1_sq: f64,
    #[arg(long, default_value_t = 2.0)]
    sigma2_sq: f64,
    #[arg(long, default_value_t = 1.0)]
    c0: f64,
    /// ARCH coefficients, comma separated.
    #[arg(long, value_delimiter = ',', default_value = "0.5")]
    b: Vec<f64>,
    /// normal, t<d> or double_exponential.
    #[arg(long, default_value = "normal")]
    error: String,
    #[arg(long, default_value_t = DEFAULT_ARCH_BURN_IN)]
    burn_in: usize,
    #[arg(long)]
    n: usize,
    #[arg(long)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

fn threads(flag: Option<usize>) -> Result<usize> {
    match std::env::var(THREADS_ENV) {
        Ok(v) => v.trim().parse().map_err(|_| {
            Error::Config(format!("{THREADS_ENV} must be a non-negative integer, got `{v}`"))
        }),
        Err(_) => Ok(flag.unwrap_or(0)),
    }
}

fn read_columns(path: &Path) -> Result<Vec<(String, Vec<f64>)>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })?;
    if text.lines().next().map(str::trim) == Some("t,x") {
        let s = Series::read_csv(path)?;
        Ok(vec![("x".into(), s.values().to_vec())])
    } else {
        read_pivot_csv(path)
    }
}

fn run(cli: Cli) -> Result<()> {
    let threads = threads(cli.threads)?;
    match cli.command {
        Command::Run {
            config,
            output_dir,
            formats,
            fresh_series_per_replicate,
        } => {
            let mut config = ExperimentConfig::from_path(&config)?;
            if let Some(dir) = output_dir {
                config.output_dir = dir;
            }
            if fresh_series_per_replicate {
                config.fresh_series_per_replicate = true;
            }
            let report = run_experiment(&config, threads)?;
            let formats: Vec<ReportFormat> = if formats.is_empty() {
                vec![ReportFormat::Csv, ReportFormat::Markdown]
            } else {
                formats
                    .into_iter()
                    .map(|f| match f {
                        Format::Csv => ReportFormat::Csv,
                        Format::Markdown => ReportFormat::Markdown,
                    })
                    .collect()
            };
            let written = emit_report(&report, &config.output_dir, &formats)?;
            for table in &report.tables {
                println!("## {}\n\n{}", table.name, table.to_markdown());
            }
            for w in &report.warnings {
                eprintln!("warning: {w}");
            }
            eprintln!(
                "wrote {} files to {} in {:.2}s",
                written.len(),
                config.output_dir.display(),
                report.wall_time_secs
            );
        }
        Command::Ks { a, b, param } => {
            let (ca, cb) = (read_columns(&a)?, read_columns(&b)?);
            let mut out = Vec::new();
            for (name, xa) in &ca {
                if param.as_ref().is_some_and(|p| p != name) {
                    continue;
                }
                let xb = match cb.iter().find(|(n, _)| n == name) {
                    Some((_, v)) => v,
                    None if ca.len() == 1 && cb.len() == 1 => &cb[0].1,
                    None => continue,
                };
                let r = ks_two_sample(xa, xb)?;
                out.push(serde_json::json!({
                    "param": name,
                    "d_stat": r.d_stat,
                    "p_value": r.p_value,
                    "n1": r.n1,
                    "n2": r.n2,
                }));
            }
            if out.is_empty() {
                return Err(Error::InvalidParameter(
                    "no parameter is present in both files".into(),
                ));
            }
            println!("{}", serde_json::to_string_pretty(&out).expect("json"));
        }
        Command::Simulate(args) => {
            let error: ErrorDist = args.error.parse()?;
            let stream = RngStream::new(args.seed);
            let series = match args.model {
                Model::Ar1 => simulate_ar1(
                    &Ar1Spec {
                        theta: args.theta,
                        sigma: args.sigma,
                        error,
                    },
                    args.n,
                    &stream,
                )?,
                Model::Hetero => simulate_hetero_ar1(
                    &HeteroAr1Spec {
                        theta: args.theta,
                        tau: TauSchedule::TwoPeriod {
                            sigma1_sq: args.sigma1_sq,
                            sigma2_sq: args.sigma2_sq,
                        },
                        error,
                    },
                    args.n,
                    &stream,
                )?,
                Model::Arch => simulate_arch(
                    &ArchSpec {
                        c0: args.c0,
                        b: args.b.clone(),
                        error,
                    },
                    args.n,
                    args.burn_in,
                    &stream,
                )?,
            };
            series.write_csv(&args.out)?;
        }
        Command::Fit {
            estimator,
            series,
            p,
            sigma1_sq,
            sigma2_sq,
        } => {
            let s = Series::read_csv(&series)?;
            let x = s.values();
            let taus = || -> Result<Vec<f64>> {
                let (a, b) = sigma1_sq.zip(sigma2_sq).ok_or_else(|| {
                    Error::InvalidParameter(format!(
                        "{estimator} needs --sigma1-sq and --sigma2-sq"
                    ))
                })?;
                let tau = TauSchedule::TwoPeriod {
                    sigma1_sq: a,
                    sigma2_sq: b,
                };
                Ok(tau.taus(x.len())?[1..].to_vec())
            };
            let result = match estimator.as_str() {
                "lse" => ar1_lse(x)?,
                "lad" => ar1_lad(x)?,
                "wlse" => ar1_wlse(x, &taus()?)?,
                "wlad" => ar1_wlad(x, &taus()?)?,
                other => {
                    let variant: ArchVariant = other.parse()?;
                    arch_fit(x, p, variant)?
                }
            };
            println!("{}", serde_json::to_string_pretty(&result).expect("json"));
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let line = serde_json::json!({
                "error": { "kind": e.kind(), "message": e.to_string() }
            });
            eprintln!("{line}");
            ExitCode::FAILURE
        }
    }
}
