//! `morl`: train, sweep and score tabular multi-objective RL agents.
//!
//! Exit codes: 0 on success, 1 when a run fails, 2 for usage or
//! configuration errors (including agent/environment incompatibility).

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use morl_core::config::{parse_vector, ConfigFile};
use morl_core::indicators::{cardinality, hypervolume, igd, sparsity};
use morl_core::io::{emit_plot_data, read_points, write_run};
use morl_core::sweep::{run_sweep, Algorithm, SweepConfig, SweepResult, WeightSelection};
use morl_core::MorlError;

/// Output root when `MORL_RESULTS_DIR` is unset.
const DEFAULT_RESULTS_DIR: &str = "runs";

#[derive(Parser, Debug)]
#[command(name = "morl", version, about = "Tabular multi-objective RL benchmark")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Train a single configuration for one seed.
    Train(TrainArgs),
    /// Run the outer-loop weight sweep (or PQL) over several seeds.
    Sweep(SweepArgs),
    /// Print indicator values for a point-set file.
    Metrics(MetricsArgs),
    /// Emit plot-ready curves and the final front for a run directory.
    Plotdata(PlotArgs),
}

#[derive(Args, Debug, Default)]
struct RunArgs {
    /// Configuration file; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    /// dst-concave or four-room.
    #[arg(long)]
    env: Option<String>,
    /// Map file replacing the bundled layout.
    #[arg(long)]
    map: Option<PathBuf>,
    /// moq, pql, moq-linear or moq-chebyshev.
    #[arg(long)]
    algo: Option<String>,
    /// linear or chebyshev (MOQ).
    #[arg(long)]
    scalariser: Option<String>,
    /// hypervolume, cardinality or pareto (PQL).
    #[arg(long)]
    set_eval: Option<String>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long)]
    tau: Option<f64>,
    /// Total training timesteps.
    #[arg(long = "steps", alias = "total-timesteps")]
    steps: Option<usize>,
    #[arg(long)]
    eps_initial: Option<f64>,
    #[arg(long)]
    eps_final: Option<f64>,
    #[arg(long)]
    eps_decay_fraction: Option<f64>,
    #[arg(long)]
    eval_interval: Option<usize>,
    /// Metric reference point, e.g. "0,-50".
    #[arg(long, allow_hyphen_values = true)]
    ref_point: Option<String>,
    #[arg(long)]
    state_cap: Option<usize>,
    /// Skip IGD even when the true front is known.
    #[arg(long)]
    no_true_front: bool,
    /// Run name; the output goes to `<results root>/<name>`.
    #[arg(long)]
    name: Option<String>,
    /// Output directory, overriding the results root and name.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct TrainArgs {
    #[command(flatten)]
    run: RunArgs,
    /// Weight vector for MOQ, e.g. "0.3,0.7". Defaults to equal weights.
    #[arg(long)]
    weights: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args, Debug)]
struct SweepArgs {
    #[command(flatten)]
    run: RunArgs,
    /// Seeds as an inclusive range `42..51` or a list `1,2,3`.
    #[arg(long)]
    seeds: Option<String>,
    #[arg(long)]
    workers: Option<usize>,
    /// Keep every non-dominated return seen so far instead of per-checkpoint snapshots.
    #[arg(long)]
    archive: bool,
    #[arg(long)]
    weight_step: Option<f64>,
    /// Evenly thin the weight grid to at most this many configurations.
    #[arg(long)]
    max_configs: Option<usize>,
}

#[derive(Args, Debug)]
struct MetricsArgs {
    /// Point-set file: one comma-separated point per line.
    front: PathBuf,
    /// Reference point for hypervolume, e.g. "0,-50".
    #[arg(long = "ref", alias = "ref-point", allow_hyphen_values = true)]
    reference: String,
    /// True front for IGD.
    #[arg(long)]
    truth: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct PlotArgs {
    run_dir: PathBuf,
    /// Output directory; defaults to `<run_dir>/plot`.
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Error that maps to exit code 2.
#[derive(Debug)]
struct UsageError(String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

fn usage(e: MorlError) -> anyhow::Error {
    match e {
        MorlError::Io { .. } | MorlError::Csv(_) => e.into(),
        other => UsageError(other.to_string()).into(),
    }
}

impl RunArgs {
    /// Flags rendered as config lines so they go through the same parser.
    fn push_lines(&self, lines: &mut Vec<(&'static str, String)>) {
        let mut push = |k: &'static str, v: Option<String>| {
            if let Some(v) = v {
                lines.push((k, v));
            }
        };
        push("env", self.env.clone());
        push("algo", self.algo.clone());
        push("scalariser", self.scalariser.clone());
        push("set_eval", self.set_eval.clone());
        push("alpha", self.alpha.map(|v| v.to_string()));
        push("gamma", self.gamma.map(|v| v.to_string()));
        push("tau", self.tau.map(|v| v.to_string()));
        push("total_timesteps", self.steps.map(|v| v.to_string()));
        push("eps_initial", self.eps_initial.map(|v| v.to_string()));
        push("eps_final", self.eps_final.map(|v| v.to_string()));
        push("eps_decay_fraction", self.eps_decay_fraction.map(|v| v.to_string()));
        push("eval_interval", self.eval_interval.map(|v| v.to_string()));
        push("ref_point", self.ref_point.clone());
        push("state_cap", self.state_cap.map(|v| v.to_string()));
        push("name", self.name.clone());
        if self.no_true_front {
            push("true_front", Some("false".into()));
        }
    }

    fn resolve(&self, extra: Vec<(&'static str, String)>) -> anyhow::Result<SweepConfig> {
        let base = match &self.config {
            Some(path) => Some(ConfigFile::load(path).map_err(usage)?.to_sweep_config(None).map_err(usage)?),
            None => None,
        };
        let mut lines = Vec::new();
        self.push_lines(&mut lines);
        lines.extend(extra);
        let mut text = String::new();
        for (k, v) in &lines {
            let _ = writeln!(text, "{k} = {v}");
        }
        let flags = ConfigFile::parse(&text, Path::new("command line"))
            .map_err(usage)?
            .to_sweep_config(base)
            .map_err(|e| match e {
                MorlError::Config(m) if m.contains("required key") => UsageError(
                    "missing required option: --env and --algo (or --config)".into(),
                )
                .into(),
                other => usage(other),
            })?;
        let mut cfg = flags;
        if let Some(map) = &self.map {
            cfg.map = Some(map.clone());
        }
        Ok(cfg)
    }

    fn output_dir(&self, cfg: &SweepConfig) -> PathBuf {
        if let Some(out) = &self.out {
            return out.clone();
        }
        let root = std::env::var_os("MORL_RESULTS_DIR")
            .map(PathBuf::from)
            .unwrap_or_else(|| PathBuf::from(DEFAULT_RESULTS_DIR));
        root.join(&cfg.name)
    }
}

fn execute(cfg: &SweepConfig, dir: &Path) -> anyhow::Result<SweepResult> {
    let result = run_sweep(cfg).map_err(usage_or_runtime)?;
    write_run(dir, &result).with_context(|| format!("writing results to {}", dir.display()))?;
    Ok(result)
}

/// Validation failures are usage errors; anything else happened mid-run.
fn usage_or_runtime(e: MorlError) -> anyhow::Error {
    match e {
        MorlError::Config(_)
        | MorlError::StateCapExceeded { .. }
        | MorlError::Parse { .. }
        | MorlError::InvalidWeights(_)
        | MorlError::DimensionMismatch { .. } => UsageError(e.to_string()).into(),
        other => other.into(),
    }
}

fn summarise(result: &SweepResult, dir: &Path) {
    if let Some(last) = result.aggregate.last() {
        let mut line = format!(
            "{} on {}: {} seed(s), t={} hypervolume {:.4} cardinality {:.2} sparsity {:.4}",
            result.config.algorithm,
            result.config.env,
            result.per_seed.len(),
            last.timestep,
            last.hypervolume.mean,
            last.cardinality.mean,
            last.sparsity.mean,
        );
        if let Some(igd) = last.igd {
            let _ = write!(line, " igd {:.4}", igd.mean);
        }
        println!("{line}");
    }
    println!("results written to {}", dir.display());
}

fn cmd_train(args: TrainArgs) -> anyhow::Result<()> {
    let mut extra = Vec::new();
    if let Some(seed) = args.seed {
        extra.push(("seed", seed.to_string()));
    }
    let mut cfg = args.run.resolve(extra)?;
    if args.run.name.is_none() && args.run.config.is_none() {
        cfg.name = format!("{}-{}-train", cfg.env, cfg.algorithm);
    }
    cfg.seeds.truncate(1);
    if let Algorithm::Moq(_) = cfg.algorithm {
        let m = cfg.env.num_objectives();
        let w = match &args.weights {
            Some(s) => s.parse().map_err(usage)?,
            None => match &cfg.weights {
                WeightSelection::Explicit(ws) if ws.len() == 1 => ws[0].clone(),
                _ => vec![(1.0 / m as f64).to_string(); m]
                    .join(",")
                    .parse()
                    .map_err(usage)?,
            },
        };
        cfg.weights = WeightSelection::Explicit(vec![w]);
    } else if args.weights.is_some() {
        return Err(UsageError("--weights only applies to moq".into()).into());
    }
    let dir = args.run.output_dir(&cfg);
    let result = execute(&cfg, &dir)?;
    summarise(&result, &dir);
    Ok(())
}

fn cmd_sweep(args: SweepArgs) -> anyhow::Result<()> {
    let mut extra = Vec::new();
    if let Some(s) = &args.seeds {
        extra.push(("seeds", s.clone()));
    }
    if let Some(n) = args.workers {
        extra.push(("workers", n.to_string()));
    }
    if args.archive {
        extra.push(("archive", "cumulative".into()));
    }
    if let Some(s) = args.weight_step {
        extra.push(("weight_step", s.to_string()));
    }
    if let Some(n) = args.max_configs {
        extra.push(("max_configs", n.to_string()));
    }
    let cfg = args.run.resolve(extra)?;
    if let Algorithm::Moq(_) = cfg.algorithm {
        let n = cfg.weight_configs(cfg.env.num_objectives()).map_err(usage)?.len();
        eprintln!("{} weight configurations x {} seed(s)", n, cfg.seeds.len());
    }
    let dir = args.run.output_dir(&cfg);
    let result = execute(&cfg, &dir)?;
    summarise(&result, &dir);
    Ok(())
}

fn cmd_metrics(args: MetricsArgs) -> anyhow::Result<()> {
    let front = read_points(&args.front).map_err(usage)?;
    let reference = parse_vector(&args.reference).map_err(usage)?;
    let truth = match &args.truth {
        Some(p) => Some(read_points(p).map_err(usage)?),
        None => None,
    };
    println!("hypervolume {}", hypervolume(&front, &reference).map_err(usage)?);
    println!("cardinality {}", cardinality(&front));
    println!("sparsity {}", sparsity(&front).map_err(usage)?);
    if let Some(truth) = truth {
        match igd(&front, &truth).map_err(usage)? {
            Some(v) => println!("igd {v}"),
            None => println!("igd undefined (empty front)"),
        }
    }
    Ok(())
}

fn cmd_plotdata(args: PlotArgs) -> anyhow::Result<()> {
    if !args.run_dir.is_dir() {
        return Err(UsageError(format!("{} is not a run directory", args.run_dir.display())).into());
    }
    let out = args.out.clone().unwrap_or_else(|| args.run_dir.join("plot"));
    let files = emit_plot_data(&args.run_dir, &out).map_err(usage)?;
    for f in files.curves.iter().chain(files.front.iter()) {
        println!("{}", f.display());
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    let outcome = match cli.command {
        Command::Train(a) => cmd_train(a),
        Command::Sweep(a) => cmd_sweep(a),
        Command::Metrics(a) => cmd_metrics(a),
        Command::Plotdata(a) => cmd_plotdata(a),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.is::<UsageError>() {
                eprintln!("run `morl --help` for usage");
                ExitCode::from(2)
            } else {
                ExitCode::from(1)
            }
        }
    }
}
