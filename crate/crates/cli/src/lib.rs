//! Command-line driver for `degenwave`: single runs with a machine-readable
//! report, parameter sweeps, self-convergence studies and the operator and
//! elliptic certificates.

use std::fmt;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};
use degenwave_core::RunConfig;

pub mod checks;
pub mod converge;
pub mod report;
pub mod simulate;
pub mod sweep;

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_HYPOTHESIS: i32 = 2;
pub const EXIT_AUDIT: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "degenwave", version, about = "Degenerate wave equation with delayed boundary feedback")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run one configuration and write the trajectory CSV and report JSON.
    Simulate {
        #[command(flatten)]
        common: Common,
        /// Also store the full state at every recorded sample.
        #[arg(long)]
        snapshots: bool,
    },
    /// Run a grid of configurations over up to three axes.
    Sweep {
        #[command(flatten)]
        common: Common,
        /// Axis as `key=v1,v2,...` or `key=start:stop:step`; repeatable.
        #[arg(long = "axis", value_name = "KEY=VALUES")]
        axes: Vec<String>,
    },
    /// Refine N, N_delta and 1/dt together and report observed orders.
    Converge {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 3)]
        levels: usize,
    },
    /// Probe dissipativity, the resolvent and the norm family of the generator.
    OperatorCheck {
        #[command(flatten)]
        common: Common,
        /// Times to probe; defaults to 0, T/2 and T.
        #[arg(long = "t", value_delimiter = ',')]
        times: Vec<f64>,
        #[arg(long, default_value_t = 500)]
        trials: usize,
        #[arg(long, default_value_t = 100)]
        resolvent_trials: usize,
    },
    /// Solve the auxiliary elliptic problem on a mesh ladder and check its bounds.
    EllipticCheck {
        #[command(flatten)]
        common: Common,
        #[arg(long = "n", value_delimiter = ',', default_value = "16,32,64,128,256")]
        sizes: Vec<usize>,
        #[arg(long, default_value_t = 1.0, allow_negative_numbers = true)]
        lambda: f64,
    },
}

#[derive(Debug, Clone, Args)]
pub struct Common {
    /// Path to a config file, or the name of a shipped scenario.
    #[arg(long, short)]
    pub config: String,
    /// Override a config entry; repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub sets: Vec<String>,
    /// Output directory.
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
    /// Exit with code 3 when an audit or certificate fails.
    #[arg(long)]
    pub strict: bool,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Worker threads for sweeps and convergence studies.
    #[arg(long, env = "DEGENWAVE_JOBS")]
    pub jobs: Option<usize>,
}

impl Common {
    pub fn load(&self) -> anyhow::Result<RunConfig> {
        let mut config = load_config(&self.config)?;
        for assignment in &self.sets {
            config.apply_override(assignment)?;
        }
        if let Some(seed) = self.seed {
            config.set("seed", &seed.to_string())?;
        }
        Ok(config)
    }

    pub fn pool(&self) -> anyhow::Result<rayon::ThreadPool> {
        let mut builder = rayon::ThreadPoolBuilder::new();
        if let Some(jobs) = self.jobs {
            builder = builder.num_threads(jobs.max(1));
        }
        Ok(builder.build()?)
    }

    fn output_dir(&self) -> anyhow::Result<&Path> {
        std::fs::create_dir_all(&self.out).with_context(|| format!("creating {}", self.out.display()))?;
        Ok(&self.out)
    }
}

/// Reads `source` as a file if it exists, else looks it up among the
/// shipped scenarios (with or without a `.cfg` suffix).
pub fn load_config(source: &str) -> anyhow::Result<RunConfig> {
    let path = Path::new(source);
    if path.is_file() {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {source}"))?;
        return Ok(text.parse()?);
    }
    let name = path.file_stem().and_then(|s| s.to_str()).unwrap_or(source);
    match RunConfig::scenario(name) {
        Some(config) => Ok(config),
        None => bail!("no config file or scenario named '{source}'"),
    }
}

/// Raised under `--strict` when a run completes but a check fails.
#[derive(Debug)]
pub struct AuditFailure(pub Vec<String>);

impl fmt::Display for AuditFailure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "audit failed: {}", self.0.join(", "))
    }
}

impl std::error::Error for AuditFailure {}

pub fn exit_code(err: &anyhow::Error) -> i32 {
    if err.downcast_ref::<AuditFailure>().is_some() {
        return EXIT_AUDIT;
    }
    match err.downcast_ref::<degenwave_core::Error>() {
        Some(e) if e.is_hypothesis_violation() => EXIT_HYPOTHESIS,
        _ => EXIT_FAILURE,
    }
}

fn strict_gate(strict: bool, failed: Vec<String>) -> anyhow::Result<()> {
    if strict && !failed.is_empty() {
        return Err(AuditFailure(failed).into());
    }
    Ok(())
}

/// Runs a parsed command line; the caller maps errors through [`exit_code`].
pub fn execute(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Simulate { common, snapshots } => {
            let mut config = common.load()?;
            if snapshots && config.get("outputs.snapshots").is_none() {
                config.set("outputs.snapshots", "snapshots.jsonl")?;
            }
            let outcome = simulate::simulate(&config)?;
            let paths = simulate::write_outputs(&outcome, &config, common.output_dir()?)?;
            for p in &paths {
                eprintln!("wrote {}", p.display());
            }
            for w in &outcome.report.warnings {
                eprintln!("warning: {w}");
            }
            strict_gate(common.strict, outcome.report.checks.failed())
        }
        Command::Sweep { common, axes } => {
            let config = common.load()?;
            let axes = axes.iter().map(|a| sweep::Axis::parse(a)).collect::<anyhow::Result<Vec<_>>>()?;
            let table = common.pool()?.install(|| sweep::sweep(&config, &axes))?;
            let path = common.output_dir()?.join("sweep.csv");
            std::fs::write(&path, table.to_csv()).with_context(|| format!("writing {}", path.display()))?;
            print!("{}", table.to_csv());
            eprintln!("wrote {}", path.display());
            let failed = table.rows.iter().filter(|r| r.error.is_some()).map(|r| format!("row {}", r.index)).collect();
            strict_gate(common.strict, failed)
        }
        Command::Converge { common, levels } => {
            let config = common.load()?;
            let study = common.pool()?.install(|| converge::converge(&config, levels))?;
            let dir = common.output_dir()?;
            std::fs::write(dir.join("converge.csv"), study.to_csv())?;
            std::fs::write(dir.join("converge.json"), serde_json::to_string_pretty(&study)? + "\n")?;
            print!("{}", study.to_csv());
            Ok(())
        }
        Command::OperatorCheck { common, times, trials, resolvent_trials } => {
            let config = common.load()?;
            let setup = config.build()?;
            let times = if times.is_empty() { checks::default_times(setup.t_end) } else { times };
            let report = checks::operator_check(&setup, &times, trials, resolvent_trials, config.seed()?)?;
            let text = serde_json::to_string_pretty(&report)? + "\n";
            std::fs::write(common.output_dir()?.join("operator_check.json"), &text)?;
            print!("{text}");
            strict_gate(common.strict, report.failed())
        }
        Command::EllipticCheck { common, sizes, lambda } => {
            let config = common.load()?;
            let report = checks::elliptic_check(&config, &sizes, lambda)?;
            let text = serde_json::to_string_pretty(&report)? + "\n";
            std::fs::write(common.output_dir()?.join("elliptic_check.json"), &text)?;
            print!("{text}");
            strict_gate(common.strict, report.failed())
        }
    }
}
