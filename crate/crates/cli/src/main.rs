//! `pfha`: probabilistic frequency-hazard engine.
//!
//! Exit codes: 0 success, 2 configuration error, 3 data error, 4 numeric failure.

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use pfha_core::config::Config;
use pfha_core::controls::ControlSet;
use pfha_core::disagg::Dimension;
use pfha_core::io::fmt_sig;
use pfha_core::pipeline::{self, Overrides, Scenario};
use pfha_core::{synth, Error, ErrorClass};
use tracing::info;

#[derive(Parser, Debug)]
#[command(name = "pfha", version, about = "Annual exceedance rates of frequency deviations")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run every logic-tree path and write the hazard tables.
    Compute(Common),
    /// Disaggregate the central-path rate at one threshold.
    Disagg {
        #[command(flatten)]
        common: Common,
        /// Deviation in Hz.
        #[arg(long)]
        threshold: f64,
        #[arg(long, default_value = "source")]
        dimension: String,
    },
    /// One-at-a-time branch sensitivity.
    Tornado {
        #[command(flatten)]
        common: Common,
        /// Deviation in Hz; defaults to the config value.
        #[arg(long)]
        threshold: Option<f64>,
    },
    /// Temporal split, model comparison and anchor checks.
    Validate(Common),
    /// Build (or confirm the cache of) the physics nadir grid.
    GridBuild(Common),
    /// Write a deterministic synthetic dataset and its config.
    Synth {
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, default_value = "synth")]
        out: PathBuf,
        #[arg(long)]
        threads: Option<usize>,
    },
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Switch {
    On,
    Off,
}

#[derive(Args, Debug, Clone)]
struct Common {
    #[arg(long, env = "PFHA_CONFIG")]
    config: PathBuf,
    /// Output directory (or file, for disagg and tornado).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Comma-separated deviations in Hz, e.g. "0.5,0.8,1.2".
    #[arg(long, value_delimiter = ',')]
    thresholds: Option<Vec<f64>>,
    /// Worker threads; defaults to all cores.
    #[arg(long)]
    threads: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    controls: Option<ControlSet>,
    #[arg(long, value_enum)]
    cascade: Option<Switch>,
}

impl Common {
    fn overrides(&self) -> Overrides {
        Overrides {
            thresholds: self.thresholds.clone(),
            controls: self.controls,
            cascade: self.cascade.map(|s| matches!(s, Switch::On)),
            seed: self.seed,
        }
    }

    fn scenario(&self) -> Result<Scenario, Error> {
        set_threads(self.threads)?;
        let mut loaded = Config::load(&self.config)?;
        self.overrides().apply(&mut loaded.config)?;
        Scenario::load(&loaded)
    }

    fn out_dir(&self) -> PathBuf {
        self.out.clone().unwrap_or_else(|| PathBuf::from("out"))
    }
}

fn set_threads(threads: Option<usize>) -> Result<(), Error> {
    if let Some(n) = threads {
        if n == 0 {
            return Err(Error::Config("--threads must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    }
    Ok(())
}

fn exit_code(e: &Error) -> u8 {
    match e.class() {
        ErrorClass::Config => 2,
        ErrorClass::Data => 3,
        ErrorClass::Numeric => 4,
    }
}

fn compute(common: &Common) -> Result<(), Error> {
    let start = Instant::now();
    let scenario = common.scenario()?;
    let out = pipeline::compute(&scenario)?;
    let dir = common.out_dir();
    pipeline::write_compute(&dir, &scenario, &out)?;
    println!("threshold_hz  mean/yr  median/yr  p05/yr  p95/yr  return_period_yr");
    for row in &out.summary.thresholds {
        println!(
            "{}  {}  {}  {}  {}  {}",
            fmt_sig(row.threshold_hz),
            fmt_sig(row.mean_rate_per_yr),
            fmt_sig(row.median_rate_per_yr),
            fmt_sig(row.p05_rate_per_yr),
            fmt_sig(row.p95_rate_per_yr),
            fmt_sig(row.return_period_yr)
        );
    }
    info!(elapsed_s = start.elapsed().as_secs_f64(), out = %dir.display(), "compute finished");
    Ok(())
}

fn disagg(common: &Common, threshold: f64, dimension: &str) -> Result<(), Error> {
    let dim: Dimension = dimension.parse()?;
    let scenario = common.scenario()?;
    let cells = pipeline::disaggregate_central(&scenario, threshold, dim)?;
    let path = common.out.clone().unwrap_or_else(|| PathBuf::from(format!("disagg_{dim}.csv")));
    pipeline::write_disagg(&path, &scenario, dim, &cells)?;
    let total: f64 = cells.iter().map(|c| c.fraction).sum();
    println!("{} cells, fractions sum to {}, written to {}", cells.len(), fmt_sig(total), path.display());
    Ok(())
}

fn tornado(common: &Common, threshold: Option<f64>) -> Result<(), Error> {
    let scenario = common.scenario()?;
    let threshold = threshold.unwrap_or(scenario.config.tornado.threshold_hz);
    let rows = pipeline::tornado_table(&scenario, threshold)?;
    let path = common.out.clone().unwrap_or_else(|| PathBuf::from("tornado.csv"));
    pipeline::write_tornado(&path, &scenario, threshold, &rows)?;
    println!("branch  low/yr  high/yr  swing");
    for r in &rows {
        println!("{}  {}  {}  {}", r.branch, fmt_sig(r.low_rate), fmt_sig(r.high_rate), fmt_sig(r.swing));
    }
    Ok(())
}

fn validate(common: &Common) -> Result<(), Error> {
    let scenario = common.scenario()?;
    let v = pipeline::validate(&scenario)?;
    let dir = common.out_dir();
    pipeline::write_validate(&dir, &scenario, &v)?;
    println!(
        "temporal split at {}: {} training / {} test events",
        v.split_at, v.split.training_events, v.split.test_events
    );
    for r in &v.split.rows {
        let flag = if r.stable { "stable" } else { "UNSTABLE" };
        println!("  {} Hz  ratio {}  {flag}", fmt_sig(r.threshold_hz), fmt_sig(r.ratio));
    }
    if let Some(c) = &v.comparison {
        for (name, s) in [("sfr (b = 1)", &c.sfr_raw), ("physics", &c.physics)] {
            println!(
                "{name}: bias factor {}, residual stdev {}, MAE {} Hz over {} events",
                fmt_sig(s.bias_factor),
                fmt_sig(s.stdev_log_residual),
                fmt_sig(s.mean_absolute_error_hz),
                s.n_events
            );
        }
    }
    for a in &v.anchors {
        let verdict = if a.pass { "pass" } else { "FAIL" };
        println!("{verdict}  {}: {} in [{}, {}]", a.name, fmt_sig(a.value), fmt_sig(a.lo), fmt_sig(a.hi));
    }
    Ok(())
}

fn grid_build(common: &Common) -> Result<(), Error> {
    set_threads(common.threads)?;
    let mut loaded = Config::load(&common.config)?;
    common.overrides().apply(&mut loaded.config)?;
    let start = Instant::now();
    let (model, hit) = pipeline::load_physics(&loaded.config)?;
    let grid = &model.grid;
    let simulations = if hit { 0 } else { grid.total_len() };
    println!(
        "{}: {} primary + {} boundary points; cache {}; {simulations} simulations in {:.1} s",
        loaded.config.physics.grid.display(),
        grid.primary_len(),
        grid.boundary_len(),
        if hit { "hit" } else { "miss" },
        start.elapsed().as_secs_f64()
    );
    Ok(())
}

fn synth(seed: u64, out: &Path, threads: Option<usize>) -> Result<(), Error> {
    set_threads(threads)?;
    let config = synth::generate(seed).write(out)?;
    println!("synthetic dataset (seed {seed}) written; config at {}", config.display());
    Ok(())
}

fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_env_filter(tracing_subscriber::EnvFilter::try_from_env("PFHA_LOG").unwrap_or_else(|_| "warn".into()))
        .with_writer(std::io::stderr)
        .init();
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Compute(c) => compute(c),
        Command::Disagg { common, threshold, dimension } => disagg(common, *threshold, dimension),
        Command::Tornado { common, threshold } => tornado(common, *threshold),
        Command::Validate(c) => validate(c),
        Command::GridBuild(c) => grid_build(c),
        Command::Synth { seed, out, threads } => synth(*seed, out, *threads),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
