use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use ifelab_core::{save_result, ResultDocument};
use ifelab_harness::analyze::{analyze_csv, AnalyzeConfig};
use ifelab_harness::appendix_c::{run_appendix_c, AppendixCConfig};
use ifelab_harness::appendix_d::{run_appendix_d, AppendixDConfig};
use ifelab_harness::table1::{run_table1, Scale, Table1Config};
use ifelab_harness::{archive_config, load_config, run_sweep, ExperimentConfig, HarnessError, Result};
use serde::de::DeserializeOwned;

#[derive(Parser)]
#[command(name = "ifelab", version, about = "Treatment-effect estimators for panels with interactive fixed effects")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// TOML config; flags override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Noise seed (placebo seed for `analyze`).
    #[arg(long)]
    seed: Option<u64>,
    /// Replications (permutations for `analyze`).
    #[arg(long)]
    reps: Option<usize>,
    #[arg(long)]
    workers: Option<usize>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Run the replication sweep described by a config file.
    Sweep {
        #[command(flatten)]
        common: Common,
    },
    /// Homogeneous and heterogeneous effect grid for all five estimators.
    Table1 {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum)]
        scale: Option<Scale>,
    },
    /// IFE under time-invariant effect heterogeneity.
    AppendixC {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        k_alpha: Option<usize>,
    },
    /// Static versus dynamic IFE specifications.
    AppendixD {
        #[command(flatten)]
        common: Common,
    },
    /// Estimate (and test) treatment effects on a long-format CSV.
    Analyze {
        #[command(flatten)]
        common: Common,
        /// Input CSV.
        #[arg(long)]
        data: Option<PathBuf>,
        #[arg(long)]
        no_inference: bool,
        /// Draw pseudo-treated units from the controls only.
        #[arg(long)]
        controls_only: bool,
    },
}

fn load_or_default<T: DeserializeOwned + Default>(path: &Option<PathBuf>) -> Result<T> {
    match path {
        Some(p) => load_config(p),
        None => Ok(T::default()),
    }
}

fn out_dir(common: &Common, fallback: &str) -> PathBuf {
    common.out.clone().unwrap_or_else(|| Path::new("out").join(fallback))
}

fn write_text(dir: &Path, name: &str, text: &str) -> Result<()> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join(name), text)?;
    Ok(())
}

fn sweep(common: Common) -> Result<PathBuf> {
    let path = common
        .config
        .as_ref()
        .ok_or_else(|| HarnessError::Config("sweep needs --config".into()))?;
    let mut cfg: ExperimentConfig = load_config(path)?;
    if let Some(s) = common.seed {
        cfg.dgp.noise_seed = s;
    }
    if let Some(r) = common.reps {
        cfg.replications = r;
    }
    if let Some(w) = common.workers {
        cfg.workers = w;
    }
    if let Some(o) = &common.out {
        cfg.output_dir = o.clone();
    }
    let dir = cfg.output_dir.clone();
    archive_config(&cfg, &dir)?;
    let report = run_sweep(&cfg)?;
    report.write(&dir, &report.render_text())?;
    Ok(dir)
}

fn table1(common: Common, scale: Option<Scale>) -> Result<PathBuf> {
    let mut cfg: Table1Config = load_or_default(&common.config)?;
    if let Some(s) = scale {
        cfg.scale = s;
    }
    if let Some(s) = common.seed {
        cfg.noise_seed = s;
    }
    if common.reps.is_some() {
        cfg.replications = common.reps;
    }
    if let Some(w) = common.workers {
        cfg.workers = w;
    }
    let dir = out_dir(&common, "table1");
    archive_config(&cfg, &dir)?;
    let report = run_table1(&cfg)?;
    let text = format!("{}\n{}", report.render_wide(), report.render_text());
    report.write(&dir, &text)?;
    Ok(dir)
}

fn appendix_c(common: Common, k_alpha: Option<usize>) -> Result<PathBuf> {
    let mut cfg: AppendixCConfig = load_or_default(&common.config)?;
    if let Some(k) = k_alpha {
        cfg.k_alpha = k;
    }
    if let Some(s) = common.seed {
        cfg.noise_seed = s;
    }
    if let Some(r) = common.reps {
        cfg.replications = r;
    }
    if let Some(w) = common.workers {
        cfg.workers = w;
    }
    let dir = out_dir(&common, "appendix-c");
    archive_config(&cfg, &dir)?;
    let out = run_appendix_c(&cfg)?;
    out.report.write(&dir, &out.render_text())?;
    write_text(&dir, "histogram.bins", &out.render_bins())?;
    Ok(dir)
}

fn appendix_d(common: Common) -> Result<PathBuf> {
    let mut cfg: AppendixDConfig = load_or_default(&common.config)?;
    if let Some(s) = common.seed {
        cfg.noise_seed = s;
    }
    if let Some(r) = common.reps {
        cfg.replications = r;
    }
    if let Some(w) = common.workers {
        cfg.workers = w;
    }
    let dir = out_dir(&common, "appendix-d");
    archive_config(&cfg, &dir)?;
    let out = run_appendix_d(&cfg)?;
    out.report.write(&dir, &out.render_text())?;
    Ok(dir)
}

fn analyze(common: Common, data: Option<PathBuf>, no_inference: bool, controls_only: bool) -> Result<PathBuf> {
    let mut cfg: AnalyzeConfig = load_or_default(&common.config)?;
    if let Some(d) = data {
        cfg.data = d;
    }
    if cfg.data.as_os_str().is_empty() {
        return Err(HarnessError::Config("analyze needs --data or `data` in the config".into()));
    }
    if no_inference {
        cfg.inference = false;
    }
    if controls_only {
        cfg.controls_only = true;
    }
    if let Some(s) = common.seed {
        cfg.seed = s;
    }
    if let Some(r) = common.reps {
        cfg.permutations = r;
    }
    let dir = out_dir(&common, "analyze");
    let hash = archive_config(&cfg, &dir)?;
    let report = analyze_csv(&cfg.data, &cfg)?;
    write_text(&dir, "report.txt", &report.render_text())?;
    write_text(&dir, "report.csv", &report.render_csv()?)?;
    let results = dir.join("results");
    fs::create_dir_all(&results)?;
    for row in &report.rows {
        let doc = ResultDocument {
            estimator: row.name.clone(),
            config_hash: hash.clone(),
            seed: cfg.seed,
            estimate: row.estimate.clone(),
        };
        save_result(&doc, &results.join(format!("{}.json", row.name)))?;
    }
    Ok(dir)
}

fn run(cli: Cli) -> Result<PathBuf> {
    match cli.command {
        Command::Sweep { common } => sweep(common),
        Command::Table1 { common, scale } => table1(common, scale),
        Command::AppendixC { common, k_alpha } => appendix_c(common, k_alpha),
        Command::AppendixD { common } => appendix_d(common),
        Command::Analyze {
            common,
            data,
            no_inference,
            controls_only,
        } => analyze(common, data, no_inference, controls_only),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run(Cli::parse()) {
        Ok(dir) => {
            log::info!("wrote {}", dir.display());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
