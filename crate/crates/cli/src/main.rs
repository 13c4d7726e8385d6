//! Command-line front end: single runs, sweeps, growth summaries, plot data
//! and environment files.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::bail;
use clap::{Args, Parser, Subcommand};
use qucrl::harness::{
    self, Algorithm, EnvSource, ExperimentConfig, GeneratorSpec, GrowthReport, RunRecord,
    RunStatus, SweepGrid,
};
use qucrl::mdp::envfile;
use qucrl::oracle::NoiseMode;

const OUTPUT_ROOT_VAR: &str = "QUCRL_OUTPUT_ROOT";

#[derive(Parser)]
#[command(
    name = "qucrl",
    version,
    about = "Quantum UCRL experiments on a simulated query model"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one seeded experiment.
    Run(RunArgs),
    /// Run every combination of a grid concurrently.
    Sweep(SweepArgs),
    /// Fit log and square-root growth to saved runs.
    Summarize(SummarizeArgs),
    /// Write regret curves and fitted curves as two-column series.
    EmitPlotData(PlotArgs),
    /// Generate an environment file.
    GenEnv(GenEnvArgs),
}

#[derive(Args, Default)]
struct GeneratorArgs {
    /// Instance generator: tabular, linmix, gap-tabular, gap-linmix or chain.
    #[arg(long)]
    generator: Option<String>,
    #[arg(long)]
    states: Option<usize>,
    #[arg(long)]
    actions: Option<usize>,
    #[arg(long)]
    horizon: Option<usize>,
    /// Feature dimension of a linear mixture.
    #[arg(long)]
    dim: Option<usize>,
    #[arg(long)]
    gap: Option<f64>,
    /// Seed of the random instance generators.
    #[arg(long, default_value_t = 0)]
    env_seed: u64,
}

fn need<T>(value: Option<T>, flag: &str, generator: &str) -> qucrl::Result<T> {
    value.ok_or_else(|| qucrl::Error::Config(format!("generator {generator} needs --{flag}")))
}

impl GeneratorArgs {
    fn spec(&self) -> qucrl::Result<Option<GeneratorSpec>> {
        let Some(name) = self.generator.as_deref() else {
            return Ok(None);
        };
        let spec = match name {
            "tabular" => GeneratorSpec::Tabular {
                states: need(self.states, "states", name)?,
                actions: need(self.actions, "actions", name)?,
                horizon: need(self.horizon, "horizon", name)?,
                seed: self.env_seed,
            },
            "linmix" => GeneratorSpec::Linmix {
                dim: need(self.dim, "dim", name)?,
                states: need(self.states, "states", name)?,
                actions: need(self.actions, "actions", name)?,
                horizon: need(self.horizon, "horizon", name)?,
                seed: self.env_seed,
            },
            "gap-tabular" => GeneratorSpec::GapTabular {
                actions: need(self.actions, "actions", name)?,
                horizon: need(self.horizon, "horizon", name)?,
                gap: need(self.gap, "gap", name)?,
            },
            "gap-linmix" => GeneratorSpec::GapLinmix {
                horizon: need(self.horizon, "horizon", name)?,
                gap: need(self.gap, "gap", name)?,
            },
            "chain" => GeneratorSpec::Chain {
                states: need(self.states, "states", name)?,
                horizon: need(self.horizon, "horizon", name)?,
            },
            other => return Err(qucrl::Error::Config(format!("unknown generator {other:?}"))),
        };
        Ok(Some(spec))
    }
}

/// Flags mirroring [`ExperimentConfig`]; each one overrides `--config`.
#[derive(Args)]
struct ExperimentArgs {
    /// JSON experiment config used as the starting point.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Environment file.
    #[arg(long, conflicts_with = "generator")]
    env: Option<PathBuf>,
    #[command(flatten)]
    generator: GeneratorArgs,
    #[arg(long)]
    algorithm: Option<Algorithm>,
    /// Episode budget.
    #[arg(long)]
    episodes: Option<u64>,
    #[arg(long)]
    delta: Option<f64>,
    #[arg(long)]
    c1: Option<f64>,
    #[arg(long)]
    c_amp: Option<f64>,
    #[arg(long)]
    c_mean: Option<f64>,
    #[arg(long)]
    c_k: Option<f64>,
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long)]
    epsilon_floor: Option<f64>,
    #[arg(long)]
    noise: Option<NoiseMode>,
    #[arg(long)]
    failure_injection: bool,
    #[arg(long)]
    seed: Option<u64>,
    /// Output root; runs land in `<root>/<run id>/`.
    #[arg(long, env = OUTPUT_ROOT_VAR)]
    output_dir: Option<PathBuf>,
}

impl ExperimentArgs {
    fn config(&self) -> anyhow::Result<ExperimentConfig> {
        self.config_with(None, None)
    }

    /// As [`Self::config`], but a sweep axis can stand in for a missing
    /// `--algorithm` or `--episodes`.
    fn config_with(
        &self,
        algorithm: Option<Algorithm>,
        episodes: Option<u64>,
    ) -> anyhow::Result<ExperimentConfig> {
        let base = match &self.config {
            Some(path) => Some(ExperimentConfig::from_json(&read_config(path)?)?),
            None => None,
        };
        let environment = match (&self.env, self.generator.spec()?) {
            (Some(path), _) => Some(EnvSource::File(path.clone())),
            (None, Some(spec)) => Some(EnvSource::Generate(spec)),
            (None, None) => None,
        };
        let mut c = match base {
            Some(mut c) => {
                if let Some(e) = environment {
                    c.environment = e;
                }
                c
            }
            None => {
                let Some(environment) = environment else {
                    return Err(config_error(
                        "an environment is required: pass --config, --env or --generator",
                    ));
                };
                let Some(algorithm) = self.algorithm.or(algorithm) else {
                    return Err(config_error("--algorithm is required without --config"));
                };
                let Some(episodes) = self.episodes.or(episodes) else {
                    return Err(config_error("--episodes is required without --config"));
                };
                ExperimentConfig::new(environment, algorithm, episodes)
            }
        };
        if let Some(a) = self.algorithm {
            c.algorithm = a;
        }
        if let Some(t) = self.episodes {
            c.episodes = t;
        }
        if let Some(d) = self.delta {
            c.delta = d;
        }
        let k = &mut c.constants;
        for (slot, value) in [
            (&mut k.c1, self.c1),
            (&mut k.c_amp, self.c_amp),
            (&mut k.c_mean, self.c_mean),
            (&mut k.c_k, self.c_k),
            (&mut k.lambda, self.lambda),
            (&mut k.epsilon_floor, self.epsilon_floor),
        ] {
            if let Some(v) = value {
                *slot = v;
            }
        }
        if let Some(n) = self.noise {
            c.noise = n;
        }
        c.failure_injection |= self.failure_injection;
        if let Some(s) = self.seed {
            c.seed = s;
        }
        if self.output_dir.is_some() {
            c.output_dir = self.output_dir.clone();
        }
        Ok(c)
    }
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    experiment: ExperimentArgs,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    experiment: ExperimentArgs,
    /// JSON sweep grid; the list flags below replace its axes.
    #[arg(long)]
    grid: Option<PathBuf>,
    #[arg(long, value_delimiter = ',')]
    seeds: Vec<u64>,
    #[arg(long, value_delimiter = ',')]
    algorithms: Vec<Algorithm>,
    #[arg(long = "budgets", value_delimiter = ',')]
    budgets: Vec<u64>,
    #[arg(long = "noise-modes", value_delimiter = ',')]
    noise_modes: Vec<NoiseMode>,
}

impl SweepArgs {
    fn grid(&self) -> anyhow::Result<SweepGrid> {
        let mut grid = match &self.grid {
            Some(path) => serde_json::from_str(&read_config(path)?)
                .map_err(|e| qucrl::Error::Config(format!("grid: {e}")))?,
            None => SweepGrid::default(),
        };
        if !self.seeds.is_empty() {
            grid.seeds = self.seeds.clone();
        }
        if !self.algorithms.is_empty() {
            grid.algorithms = self.algorithms.clone();
        }
        if !self.budgets.is_empty() {
            grid.episodes = self.budgets.clone();
        }
        if !self.noise_modes.is_empty() {
            grid.noise = self.noise_modes.clone();
        }
        Ok(grid)
    }
}

#[derive(Args)]
struct SummarizeArgs {
    /// Run directory or output root; defaults to the output root variable.
    #[arg(env = OUTPUT_ROOT_VAR)]
    root: PathBuf,
    /// Print the report as JSON.
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct PlotArgs {
    #[arg(env = OUTPUT_ROOT_VAR)]
    root: PathBuf,
    /// Directory for the series files.
    #[arg(long, short)]
    out: PathBuf,
}

#[derive(Args)]
struct GenEnvArgs {
    #[command(flatten)]
    generator: GeneratorArgs,
    /// Destination file.
    #[arg(long, short)]
    out: PathBuf,
}

/// A missing or unreadable input file is a configuration error.
fn read_config(path: &Path) -> qucrl::Result<String> {
    std::fs::read_to_string(path)
        .map_err(|e| qucrl::Error::Config(format!("reading {}: {e}", path.display())))
}

fn config_error(message: &str) -> anyhow::Error {
    qucrl::Error::Config(message.into()).into()
}

fn print_record(r: &RunRecord) {
    let s = &r.summary;
    println!(
        "{}\tepisodes={}\tregret={:.6}\tphases={}\tupdates={}\tstatus={}",
        s.run_id,
        s.episodes_run,
        s.final_regret,
        s.phases,
        s.updates,
        status_name(s.status)
    );
}

fn status_name(status: RunStatus) -> &'static str {
    match status {
        RunStatus::Completed => "completed",
        RunStatus::Degenerate => "degenerate",
        RunStatus::Truncated => "truncated",
    }
}

/// 3 when any run stopped early or degenerated; its output is still written.
fn outcome(records: &[RunRecord]) -> ExitCode {
    if records
        .iter()
        .all(|r| r.summary.status == RunStatus::Completed)
    {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(3)
    }
}

fn print_report(reports: &[GrowthReport]) {
    println!("label\truns\tT\tmean_final_regret\tratio\tlog_residual\tsqrt_residual\tverdict");
    for r in reports {
        match &r.fit {
            Some(f) => println!(
                "{}\t{}\t{}\t{:.6}\t{:.4}\t{:.3e}\t{:.3e}\t{}",
                r.label,
                r.runs,
                r.episodes,
                r.mean_final_regret,
                f.ratio,
                f.log_fit.relative_residual,
                f.sqrt_fit.relative_residual,
                match f.verdict {
                    harness::Growth::Logarithmic => "log",
                    harness::Growth::SquareRoot => "sqrt",
                }
            ),
            None => println!(
                "{}\t{}\t{}\t{:.6}\t-\t-\t-\t-",
                r.label, r.runs, r.episodes, r.mean_final_regret
            ),
        }
    }
}

fn load(root: &Path) -> anyhow::Result<Vec<RunRecord>> {
    let records = harness::load_records(root)?;
    if records.is_empty() {
        bail!(qucrl::Error::Config(format!(
            "no runs found under {}",
            root.display()
        )));
    }
    Ok(records)
}

fn dispatch(cli: Cli) -> anyhow::Result<ExitCode> {
    match cli.command {
        Command::Run(args) => {
            let config = args.experiment.config()?;
            let record = harness::run(&config)?;
            print_record(&record);
            Ok(outcome(std::slice::from_ref(&record)))
        }
        Command::Sweep(args) => {
            let grid = args.grid()?;
            let config = args.experiment.config_with(
                grid.algorithms.first().copied(),
                grid.episodes.first().copied(),
            )?;
            let records = harness::sweep(&config, &grid)?;
            records.iter().for_each(print_record);
            Ok(outcome(&records))
        }
        Command::Summarize(args) => {
            let reports = harness::summarize(&load(&args.root)?);
            if args.json {
                println!("{}", serde_json::to_string_pretty(&reports)?);
            } else {
                print_report(&reports);
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::EmitPlotData(args) => {
            for path in harness::emit_plot_data(&load(&args.root)?, &args.out)? {
                println!("{}", path.display());
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::GenEnv(args) => {
            let Some(spec) = args.generator.spec()? else {
                return Err(config_error("gen-env needs --generator"));
            };
            envfile::save(&spec.build()?, &args.out)?;
            println!("{}", args.out.display());
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn main() -> ExitCode {
    match dispatch(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            let config = e
                .downcast_ref::<qucrl::Error>()
                .is_some_and(qucrl::Error::is_config);
            ExitCode::from(if config { 2 } else { 1 })
        }
    }
}
