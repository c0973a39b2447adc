//! Command-line front end of the parcellation pipeline.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use hemoparcel::par;
use hemoparcel::parcellation::Method;
use hemoparcel::pipeline::{self, Layout, ParcellateJob, PipelineError, Run, Stage};

#[derive(Debug, Parser)]
#[command(name = "hemoparcel", version, about = "Simulate BOLD data, extract GLM features and parcellate them")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Global {
    /// TOML experiment configuration; defaults are used when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory, or a file path where a subcommand accepts one.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Overrides the configuration's base seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Repeat for more detail.
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Simulate one dataset into <out>/dataset.
    Simulate,
    /// Fit the GLM to every voxel.
    Features {
        /// Dataset directory (default: <out>/dataset). With this flag, a
        /// `--out` ending in .csv is the features file itself.
        #[arg(long)]
        data: Option<PathBuf>,
    },
    /// Agglomerate voxels into parcels.
    Parcellate {
        /// Features CSV (default: <out>/features.csv).
        #[arg(long)]
        features: Option<PathBuf>,
        /// Method to run; repeatable (default: the configured methods).
        #[arg(long = "method")]
        methods: Vec<Method>,
        /// Target number of parcels.
        #[arg(long)]
        k: Option<usize>,
        /// Merge log path; only with a single method and a .csv `--out`.
        #[arg(long)]
        merge_log: Option<PathBuf>,
    },
    /// Refit one HRF per parcel.
    Refit {
        #[arg(long, requires = "labels")]
        data: Option<PathBuf>,
        #[arg(long, requires = "data")]
        labels: Option<PathBuf>,
    },
    /// Monte Carlo comparison of the methods over the noise grid.
    Mc {
        #[arg(long)]
        runs: Option<usize>,
        /// Alias for `--seed`.
        #[arg(long)]
        base_seed: Option<u64>,
        /// Record per-run wall time in the report.
        #[arg(long)]
        timing: bool,
    },
    /// Every stage in order under <out>.
    All,
}

fn is_csv(p: &Path) -> bool {
    p.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv"))
}

fn is_json(p: &Path) -> bool {
    p.extension().is_some_and(|e| e.eq_ignore_ascii_case("json"))
}

fn execute(cli: Cli) -> Result<(), PipelineError> {
    let mut run = Run::load(cli.global.config.as_deref())?;
    if let Some(seed) = cli.global.seed {
        run.config.seed = seed;
    }
    let out = cli.global.out;
    let layout = Layout::new(&out);
    let mkdir =
        |dir: &Path| std::fs::create_dir_all(dir).map_err(|e| PipelineError::Data(format!("{}: {e}", dir.display())));
    match cli.command {
        Command::Simulate => pipeline::run_pipeline(&run, Stage::Simulate, &out),
        Command::All => pipeline::run_pipeline(&run, Stage::All, &out),
        Command::Features { data: None } => pipeline::run_pipeline(&run, Stage::Features, &out),
        Command::Features { data: Some(data) } => {
            let target = if is_csv(&out) {
                out.clone()
            } else {
                mkdir(&out)?;
                layout.features()
            };
            pipeline::features(&run, &data, &target)
        }
        Command::Parcellate { features, methods, k, merge_log } => {
            if !methods.is_empty() {
                run.config.parcellation.methods = methods;
            }
            if let Some(k) = k {
                run.config.parcellation.target_parcels = k;
            }
            run.config.validate()?;
            let methods = run.config.parcellation.methods.clone();
            let single_file = is_csv(&out);
            if single_file && methods.len() != 1 {
                return Err(PipelineError::Config("a .csv --out needs exactly one --method".into()));
            }
            if merge_log.is_some() && !single_file {
                return Err(PipelineError::Config(
                    "--merge-log needs a single method and a .csv --out; otherwise logs go to <out>".into(),
                ));
            }
            let jobs: Vec<ParcellateJob> = if single_file {
                vec![ParcellateJob { method: methods[0], labels: out.clone(), merge_log }]
            } else {
                mkdir(&out)?;
                methods
                    .iter()
                    .map(|&m| ParcellateJob { method: m, labels: layout.labels(m), merge_log: Some(layout.merges(m)) })
                    .collect()
            };
            let features = features.unwrap_or_else(|| layout.features());
            pipeline::parcellate(&run, &features, run.config.parcellation.target_parcels, &jobs)
        }
        Command::Refit { data: Some(data), labels: Some(labels) } => pipeline::refit(&run, &data, &labels, &out),
        Command::Refit { .. } => pipeline::run_pipeline(&run, Stage::Refit, &out),
        Command::Mc { runs, base_seed, timing } => {
            if let Some(r) = runs {
                run.config.mc.runs = r;
            }
            if let Some(s) = base_seed {
                run.config.seed = s;
            }
            run.config.mc.record_timing |= timing;
            run.config.validate()?;
            if is_json(&out) {
                if let Some(dir) = out.parent().filter(|d| !d.as_os_str().is_empty()) {
                    mkdir(dir)?;
                }
                pipeline::mc(&run, &out, &out.with_extension("csv"))
            } else {
                pipeline::run_pipeline(&run, Stage::Mc, &out)
            }
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    let level = match cli.global.verbose {
        0 => "warn",
        1 => "info",
        2 => "debug",
        _ => "trace",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).format_timestamp(None).init();
    par::init_threads(cli.global.threads);
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
