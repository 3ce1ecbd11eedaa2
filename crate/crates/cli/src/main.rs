use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crossfield::calibration::CalibratedHmm;
use crossfield::config::{Profile, RunConfig};
use crossfield::harness::{self, PanelVariant};
use crossfield::io;

/// Near/far-field channel model selection simulator for array-of-subarrays links.
#[derive(Parser)]
#[command(version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Offline sweep, per-SNR threshold fit and HMM estimation.
    Calibrate(Common),
    /// η quantiles versus distance for each SNR in `sweep_snr_db`.
    SweepMetric {
        #[command(flatten)]
        common: Common,
        /// Array variation to apply before sweeping.
        #[arg(long, value_enum, requires = "values")]
        panel: Option<Panel>,
        /// Comma-separated variation values, one CSV each.
        #[arg(long, value_delimiter = ',')]
        values: Vec<usize>,
    },
    /// Moving-receiver experiment scored against ground truth.
    RunOnline {
        #[command(flatten)]
        common: Common,
        /// thresholds.toml written by `calibrate`.
        #[arg(long)]
        thresholds: PathBuf,
        /// hmm.toml written by `calibrate` or `export-hmm`.
        #[arg(long)]
        hmm: PathBuf,
        /// Window length U (overrides the config).
        #[arg(long)]
        window: Option<usize>,
    },
    /// Re-estimates the HMMs for existing thresholds.
    ExportHmm {
        #[command(flatten)]
        common: Common,
        /// thresholds.toml written by `calibrate`.
        #[arg(long)]
        thresholds: PathBuf,
        /// Additive smoothing (overrides the config).
        #[arg(long)]
        smoothing: Option<f64>,
    },
}

#[derive(Args)]
struct Common {
    /// TOML run configuration; keys override the profile.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, value_enum)]
    profile: Option<ProfileArg>,
    /// Output directory, created if missing.
    #[arg(long)]
    out: PathBuf,
    /// Master seed (overrides the config).
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads.
    #[arg(long, default_value_t = 1)]
    threads: usize,
}

#[derive(Clone, Copy, ValueEnum)]
enum ProfileArg {
    Desk,
    Table1,
}

impl From<ProfileArg> for Profile {
    fn from(p: ProfileArg) -> Self {
        match p {
            ProfileArg::Desk => Profile::Desk,
            ProfileArg::Table1 => Profile::Table1,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Panel {
    A,
    B,
    C,
    D,
}

impl Panel {
    fn letter(self) -> &'static str {
        match self {
            Panel::A => "a",
            Panel::B => "b",
            Panel::C => "c",
            Panel::D => "d",
        }
    }
}

#[derive(Debug)]
enum Failure {
    Setup(String),
    Compute(String),
}

impl From<crossfield::Error> for Failure {
    fn from(e: crossfield::Error) -> Self {
        if e.is_config_or_io() {
            Failure::Setup(e.to_string())
        } else {
            Failure::Compute(e.to_string())
        }
    }
}

type Outcome<T> = std::result::Result<T, Failure>;

#[derive(Serialize)]
struct Manifest<'a> {
    command: &'a str,
    config: Option<String>,
    profile: Option<&'static str>,
    seed: u64,
    out_dir: String,
    threads: usize,
    tool_version: &'static str,
    timestamp: String,
}

struct Run {
    cfg: RunConfig,
    out: PathBuf,
    pool: rayon::ThreadPool,
}

impl Run {
    fn setup(command: &str, common: &Common) -> Outcome<Self> {
        let profile = common.profile.map(Profile::from);
        let mut cfg = match (&common.config, profile) {
            (Some(path), p) => RunConfig::load(path, p)?,
            (None, Some(p)) => RunConfig::profile(p),
            (None, None) => return Err(Failure::Setup("either --config or --profile is required".into())),
        };
        if let Some(seed) = common.seed {
            cfg.seed = seed;
        }
        if common.threads == 0 {
            return Err(Failure::Setup("--threads must be at least 1".into()));
        }
        fs::create_dir_all(&common.out)
            .map_err(|e| Failure::Setup(format!("{}: {e}", common.out.display())))?;
        let manifest = Manifest {
            command,
            config: common.config.as_ref().map(|p| p.display().to_string()),
            profile: profile.map(Profile::as_str),
            seed: cfg.seed,
            out_dir: common.out.display().to_string(),
            threads: common.threads,
            tool_version: env!("CARGO_PKG_VERSION"),
            timestamp: chrono::Utc::now().to_rfc3339(),
        };
        let path = common.out.join("manifest.json");
        let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
        fs::write(&path, text + "\n").map_err(|e| Failure::Setup(format!("{}: {e}", path.display())))?;
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(common.threads)
            .build()
            .map_err(|e| Failure::Setup(format!("thread pool: {e}")))?;
        Ok(Self { cfg, out: common.out.clone(), pool })
    }

    fn path(&self, name: &str) -> PathBuf {
        self.out.join(name)
    }
}

fn wrote(path: &Path) {
    println!("wrote {}", path.display());
}

fn calibrate(common: &Common) -> Outcome<()> {
    let run = Run::setup("calibrate", common)?;
    let scenario = run.cfg.scenario()?;
    let plan = run.cfg.calibration_plan()?;
    println!(
        "calibrating {} SNR values over {} distances ({} × {} realizations each)",
        plan.snr_list.len(),
        plan.distances.len(),
        plan.orientations,
        plan.trials
    );
    let out = run.pool.install(|| harness::calibrate(&scenario, &plan, run.cfg.seed))?;
    for t in &out.thresholds {
        println!(
            "  snr {:>6} dB: gamma = {:.6}, balanced accuracy = {:.4}{}",
            t.snr_db.unwrap_or(f64::NAN),
            t.gamma,
            t.balanced_accuracy,
            if t.inverted { " (inverted)" } else { "" }
        );
    }
    let samples = run.path("offline_samples.csv");
    io::write_offline_samples(&samples, &out.samples)?;
    wrote(&samples);
    let thresholds = run.path("thresholds.toml");
    io::write_thresholds(&thresholds, &out.thresholds)?;
    wrote(&thresholds);
    let hmm = run.path("hmm.toml");
    io::write_hmms(&hmm, &out.hmms)?;
    wrote(&hmm);
    Ok(())
}

fn sweep_metric(common: &Common, panel: Option<Panel>, values: &[usize]) -> Outcome<()> {
    let run = Run::setup("sweep-metric", common)?;
    let base = run.cfg.scenario()?;
    let variants: Vec<(String, _)> = match panel {
        None => vec![("metric_sweep.csv".to_owned(), base)],
        Some(p) => values
            .iter()
            .map(|&v| {
                let s = PanelVariant::from_letter(p.letter(), v)?.apply(&base)?;
                Ok((format!("metric_sweep_{}{v}.csv", p.letter()), s))
            })
            .collect::<crossfield::Result<_>>()?,
    };
    for (name, scenario) in variants {
        println!(
            "sweeping {}: Tx {}×{}, Rx {}×{}",
            name, scenario.tx.num_sas, scenario.tx.aes_per_sa, scenario.rx.num_sas, scenario.rx.aes_per_sa
        );
        let rows = run.pool.install(|| {
            harness::run_metric_sweep(
                &scenario,
                &run.cfg.sweep_distances,
                &run.cfg.sweep_snr_db,
                run.cfg.r_offline,
                run.cfg.e_offline,
                run.cfg.seed,
            )
        })?;
        let path = run.path(&name);
        io::write_metric_sweep(&path, &rows)?;
        wrote(&path);
    }
    Ok(())
}

fn run_online(common: &Common, thresholds: &Path, hmm: &Path, window: Option<usize>) -> Outcome<()> {
    let mut run = Run::setup("run-online", common)?;
    if let Some(u) = window {
        if u == 0 {
            return Err(Failure::Setup("--window must be at least 1".into()));
        }
        run.cfg.window = u;
    }
    let thresholds = io::read_thresholds(thresholds)?;
    let hmms = io::read_hmms(hmm)?;
    let scenario = run.cfg.scenario()?;
    let plan = run.cfg.online_plan()?;
    println!(
        "running {} trajectories of {} steps per SNR with U = {}",
        plan.orientations * plan.trials,
        plan.trajectory.num_steps(),
        plan.window
    );
    let out = run.pool.install(|| harness::run_online(&scenario, &plan, &thresholds, &hmms, run.cfg.seed))?;
    let path = run.path("success_rates.csv");
    io::write_success_rates(&path, &out.result)?;
    wrote(&path);
    Ok(())
}

fn export_hmm(common: &Common, thresholds: &Path, smoothing: Option<f64>) -> Outcome<()> {
    let mut run = Run::setup("export-hmm", common)?;
    if let Some(s) = smoothing {
        run.cfg.smoothing = s;
    }
    let thresholds = io::read_thresholds(thresholds)?;
    let scenario = run.cfg.scenario()?;
    let plan = run.cfg.calibration_plan()?;
    let hmms = run.pool.install(|| {
        thresholds
            .iter()
            .map(|t| {
                let snr = t.snr_db.ok_or_else(|| {
                    crossfield::Error::InvalidConfig("threshold entry has no snr_db".into())
                })?;
                let model = harness::train_hmm(
                    &scenario,
                    &plan.trajectory,
                    t,
                    plan.hmm_trajectories,
                    snr,
                    plan.smoothing,
                    run.cfg.seed,
                )?;
                Ok(CalibratedHmm { snr_db: snr, model })
            })
            .collect::<crossfield::Result<Vec<_>>>()
    })?;
    let path = run.path("hmm.toml");
    io::write_hmms(&path, &hmms)?;
    wrote(&path);
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Calibrate(common) => calibrate(common),
        Command::SweepMetric { common, panel, values } => sweep_metric(common, *panel, values),
        Command::RunOnline { common, thresholds, hmm, window } => run_online(common, thresholds, hmm, *window),
        Command::ExportHmm { common, thresholds, smoothing } => export_hmm(common, thresholds, *smoothing),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Setup(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Compute(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(3)
        }
    }
}
