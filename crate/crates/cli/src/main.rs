//! `epr`: evaluate EPR criteria for analytic states and coincidence-count tables.
//!
//! Exit status: 0 on success, 2 for usage errors, 3 for unreadable count
//! tables, 4 for numerical failures and 5 for I/O failures.

mod output;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};

use epr_core::ingest::{
    self, analyze, read_count_table, write_count_table, IngestError, UncertaintyConfig,
    UncertaintyMethod, DEFAULT_BOOTSTRAP_SAMPLES,
};
use epr_core::simulate::{run_virtual_experiment, CountBudget, DetectorLayout, Optics};
use epr_core::states::{GridOptions, StateSpec};
use epr_core::theory::{scan_hermite_gauss, theory_reports, variance_threshold, ThresholdSearch};

use output::{Format, Output};

#[derive(Parser, Debug)]
#[command(name = "epr", version, about = "Variance and entropic EPR criteria")]
struct Cli {
    /// Output format.
    #[arg(long, value_enum, global = true, default_value_t = Format::Human)]
    format: Format,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Both criteria for Hermite-Gauss states n = 0..=n_max.
    ScanN {
        #[arg(long, default_value_t = 10)]
        n_max: u32,
        #[command(flatten)]
        grid: GridArgs,
    },
    /// Width ratio at which the engineered state starts to violate the variance criterion.
    Threshold {
        /// Bracket on sigma_minus^2 / sigma_plus^2, as `lo,hi`.
        #[arg(long, value_parser = parse_bracket, default_value = "1,20")]
        ratio_bracket: (f64, f64),
        /// Absolute bisection tolerance on the ratio.
        #[arg(long, default_value_t = 1e-3)]
        tolerance: f64,
        #[arg(long, default_value_t = 2048)]
        grid_points: usize,
        #[arg(long, default_value_t = 6.0)]
        grid_extent: f64,
    },
    /// Criteria with uncertainties from an x table and a p table.
    Analyze {
        file_x: PathBuf,
        file_p: PathBuf,
        #[arg(long, value_enum, default_value_t = MethodArg::Analytic)]
        method: MethodArg,
        #[arg(long, default_value_t = DEFAULT_BOOTSTRAP_SAMPLES)]
        bootstrap_samples: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Write simulated x and p count tables.
    Simulate {
        #[command(flatten)]
        state: StateArgs,
        /// Expected total counts for each table.
        #[arg(long, default_value_t = 1_000_000)]
        counts: u64,
        /// Overrides --counts for the x table.
        #[arg(long)]
        counts_x: Option<u64>,
        /// Overrides --counts for the p table.
        #[arg(long)]
        counts_p: Option<u64>,
        /// Seed for the Poisson sampler; equal seeds give identical files.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[command(flatten)]
        optics: OpticsArgs,
        /// Destination of the x count table.
        #[arg(long)]
        out_x: PathBuf,
        /// Destination of the p count table.
        #[arg(long)]
        out_p: PathBuf,
    },
    /// Noise-free criteria for one state on exact grids.
    Theory {
        #[command(flatten)]
        state: StateArgs,
        #[command(flatten)]
        grid: GridArgs,
    },
}

#[derive(Args, Debug, Clone, Copy)]
struct GridArgs {
    /// Points per axis.
    #[arg(long, default_value_t = 1024)]
    grid_points: usize,
    /// Half-extent in widths of the broadest factor.
    #[arg(long, default_value_t = 6.0)]
    grid_extent: f64,
}

#[derive(Args, Debug, Clone)]
struct StateArgs {
    /// `hg:<n>`, `engineered:<sigma_plus>,<sigma_minus>` or `sinc:<L>,<K>,<w>` (mm, mm^-1).
    #[arg(long, conflicts_with_all = ["sigma_plus", "sigma_minus"])]
    state: Option<String>,
    /// Engineered state sigma_plus in mm (default sqrt(0.566)).
    #[arg(long)]
    sigma_plus: Option<f64>,
    /// Engineered state sigma_minus in mm (default sqrt(0.240)).
    #[arg(long)]
    sigma_minus: Option<f64>,
}

#[derive(Args, Debug, Clone, Copy)]
struct OpticsArgs {
    /// Detector step for x scans, mm.
    #[arg(long, default_value_t = Optics::reference().step_x)]
    step_x: f64,
    /// Detector step for p scans, mm.
    #[arg(long, default_value_t = Optics::reference().step_p)]
    step_p: f64,
    /// Detector-to-physical scale for x (image magnification).
    #[arg(long, default_value_t = Optics::reference().gamma_x)]
    gamma_x: f64,
    /// Detector-to-physical scale for p, mm^-2.
    #[arg(long, default_value_t = Optics::reference().gamma_p)]
    gamma_p: f64,
}

#[derive(ValueEnum, Debug, Clone, Copy)]
enum MethodArg {
    Analytic,
    Bootstrap,
}

fn parse_bracket(s: &str) -> Result<(f64, f64), String> {
    let (a, b) = s
        .split_once(',')
        .ok_or_else(|| format!("expected lo,hi, got {s:?}"))?;
    let p = |t: &str| t.trim().parse::<f64>().map_err(|e| format!("{t:?}: {e}"));
    Ok((p(a)?, p(b)?))
}

/// An error tagged with the exit status it maps to.
struct Failure {
    code: u8,
    error: anyhow::Error,
}

const USAGE: u8 = 2;
const PARSE: u8 = 3;
const NUMERICAL: u8 = 4;
const IO: u8 = 5;

fn fail(code: u8) -> impl FnOnce(anyhow::Error) -> Failure {
    move |error| Failure { code, error }
}

fn usage(msg: String) -> Failure {
    Failure {
        code: USAGE,
        error: anyhow!(msg),
    }
}

impl StateArgs {
    fn resolve(&self) -> Result<StateSpec, Failure> {
        if let Some(s) = &self.state {
            return s.parse().map_err(|e| usage(format!("--state: {e}")));
        }
        let d = StateSpec::measured_engineered();
        let StateSpec::Engineered {
            sigma_plus,
            sigma_minus,
        } = d
        else {
            unreachable!()
        };
        StateSpec::engineered(
            self.sigma_plus.unwrap_or(sigma_plus),
            self.sigma_minus.unwrap_or(sigma_minus),
        )
        .map_err(|e| usage(e.to_string()))
    }
}

impl GridArgs {
    fn resolve(&self) -> Result<GridOptions, Failure> {
        GridOptions::new(self.grid_points, self.grid_extent).map_err(|e| usage(e.to_string()))
    }
}

fn load_table(path: &Path) -> Result<ingest::CountTable, Failure> {
    let bytes = std::fs::read(path)
        .with_context(|| format!("reading {}", path.display()))
        .map_err(fail(IO))?;
    read_count_table(&bytes).map_err(|e| {
        let code = match e {
            IngestError::Parse(_) => PARSE,
            _ => NUMERICAL,
        };
        Failure {
            code,
            error: anyhow!("{}: {e}", path.display()),
        }
    })
}

fn write_file(path: &Path, text: &str) -> Result<(), Failure> {
    std::fs::write(path, text)
        .with_context(|| format!("writing {}", path.display()))
        .map_err(fail(IO))
}

fn run(cli: Cli) -> Result<(), Failure> {
    let mut out = Output::new(cli.format);
    match cli.command {
        Command::ScanN { n_max, grid } => {
            let opts = grid.resolve()?;
            out.header(&[
                ("command", "scan-n".into()),
                ("n_max", n_max.to_string()),
                ("grid_points", opts.points.to_string()),
                ("grid_extent", opts.extent.to_string()),
            ]);
            let rows = scan_hermite_gauss(n_max, &opts).map_err(|e| fail(NUMERICAL)(e.into()))?;
            out.scan(&rows)
        }
        Command::Threshold {
            ratio_bracket,
            tolerance,
            grid_points,
            grid_extent,
        } => {
            let grid =
                GridOptions::new(grid_points, grid_extent).map_err(|e| usage(e.to_string()))?;
            let search = ThresholdSearch {
                bracket: ratio_bracket,
                tolerance,
                grid,
                ..ThresholdSearch::default()
            };
            out.header(&[
                ("command", "threshold".into()),
                (
                    "ratio_bracket",
                    format!("{},{}", ratio_bracket.0, ratio_bracket.1),
                ),
                ("tolerance", tolerance.to_string()),
                ("grid_points", grid_points.to_string()),
                ("grid_extent", grid_extent.to_string()),
                ("sigma_plus", "1".into()),
            ]);
            let t = variance_threshold(&search).map_err(|e| fail(NUMERICAL)(e.into()))?;
            out.threshold(&search, &t)
        }
        Command::Analyze {
            file_x,
            file_p,
            method,
            bootstrap_samples,
            seed,
        } => {
            let cfg = UncertaintyConfig {
                method: match method {
                    MethodArg::Analytic => UncertaintyMethod::Analytic,
                    MethodArg::Bootstrap => UncertaintyMethod::Bootstrap,
                },
                bootstrap_samples,
                seed,
            };
            out.header(&[
                ("command", "analyze".into()),
                ("file_x", file_x.display().to_string()),
                ("file_p", file_p.display().to_string()),
                ("method", format!("{:?}", cfg.method).to_lowercase()),
                ("bootstrap_samples", bootstrap_samples.to_string()),
                ("seed", seed.to_string()),
            ]);
            let tx = load_table(&file_x)?;
            let tp = load_table(&file_p)?;
            let a = analyze(&tx, &tp, &cfg).map_err(|e| {
                let code = match e {
                    IngestError::TooFewBootstrapSamples(_) | IngestError::WrongVariable { .. } => {
                        USAGE
                    }
                    _ => NUMERICAL,
                };
                fail(code)(e.into())
            })?;
            out.analysis(&a)
        }
        Command::Simulate {
            state,
            counts,
            counts_x,
            counts_p,
            seed,
            optics,
            out_x,
            out_p,
        } => {
            let spec = state.resolve()?;
            let budget = CountBudget {
                x: counts_x.unwrap_or(counts),
                p: counts_p.unwrap_or(counts),
            };
            if budget.x == 0 || budget.p == 0 {
                return Err(usage("total counts must be positive".into()));
            }
            let optics = Optics {
                step_x: optics.step_x,
                step_p: optics.step_p,
                gamma_x: optics.gamma_x,
                gamma_p: optics.gamma_p,
            };
            let layout = DetectorLayout::default_for(&spec, &optics)
                .map_err(|e| fail(NUMERICAL)(e.into()))?;
            out.header(&[
                ("command", "simulate".into()),
                ("state", spec.to_string()),
                ("counts_x", budget.x.to_string()),
                ("counts_p", budget.p.to_string()),
                ("seed", seed.to_string()),
                ("step_x_mm", optics.step_x.to_string()),
                ("step_p_mm", optics.step_p.to_string()),
                ("gamma_x", optics.gamma_x.to_string()),
                ("gamma_p", optics.gamma_p.to_string()),
                ("detector_points_x", layout.x.0.count().to_string()),
                ("detector_points_p", layout.p.0.count().to_string()),
                ("out_x", out_x.display().to_string()),
                ("out_p", out_p.display().to_string()),
            ]);
            let (tx, tp) = run_virtual_experiment(&spec, &optics, budget, seed)
                .map_err(|e| fail(NUMERICAL)(e.into()))?;
            write_file(&out_x, &write_count_table(&tx))?;
            write_file(&out_p, &write_count_table(&tp))?;
            out.simulated(&tx, &tp)
        }
        Command::Theory { state, grid } => {
            let spec = state.resolve()?;
            let opts = grid.resolve()?;
            out.header(&[
                ("command", "theory".into()),
                ("state", spec.to_string()),
                ("grid_points", opts.points.to_string()),
                ("grid_extent", opts.extent.to_string()),
            ]);
            let reports = theory_reports(&spec, &opts).map_err(|e| fail(NUMERICAL)(e.into()))?;
            out.reports(&reports)
        }
    }
    .map_err(fail(IO))
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { USAGE } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {:#}", f.error);
            ExitCode::from(f.code)
        }
    }
}
