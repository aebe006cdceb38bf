//! Outer-loop multi-policy protocol and run aggregation.
//!
//! Each weight configuration is trained independently. At every evaluation
//! checkpoint the greedy returns of all configurations are pooled into one
//! non-dominated approximation set. The sets are per-checkpoint snapshots:
//! a solution found at one checkpoint may be gone at the next. Cumulative
//! archiving is opt-in.

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use rayon::prelude::*;

use crate::env::{EnvId, Environment, LoadedEnv};
use crate::error::{MorlError, Result};
use crate::indicators::{cardinality, hypervolume, igd, sparsity};
use crate::moq::{self, EpsilonSchedule, Evaluation, MoqConfig};
use crate::pareto::{nondominated_unchecked, ObjectiveVector, ParetoArchive};
use crate::pql::{self, PqlConfig, SetEvalMode, SetEvaluation, DEFAULT_STATE_CAP};
use crate::scalarise::{ScalariserKind, WeightVector};

pub const DEFAULT_EVAL_INTERVAL: usize = 1000;
pub const DEFAULT_WEIGHT_STEP: f64 = 0.1;
pub const DEFAULT_ALPHA: f64 = 0.1;

/// Checkpoints in `(0, total]` every `interval` steps, always ending at
/// `total`. An empty run is evaluated once, at step 0.
pub fn evaluation_steps(total: usize, interval: usize) -> Vec<usize> {
    if total == 0 {
        return vec![0];
    }
    let interval = interval.max(1);
    let mut steps: Vec<usize> = (1..=total / interval).map(|k| k * interval).collect();
    if total % interval != 0 {
        steps.push(total);
    }
    steps
}

/// All weight vectors on the simplex whose components are multiples of
/// `step`, in lexicographic order.
pub fn weight_grid(objectives: usize, step: f64) -> Result<Vec<WeightVector>> {
    if !(step > 0.0 && step <= 1.0) {
        return Err(MorlError::Contract(format!("weight step must lie in (0, 1], got {step}")));
    }
    if objectives == 0 {
        return Err(MorlError::Contract("need at least one objective".into()));
    }
    let divisions = (1.0 / step).round();
    if (divisions * step - 1.0).abs() > 1e-9 {
        return Err(MorlError::Contract(format!("weight step {step} does not divide 1")));
    }
    let k = divisions as usize;
    let mut out = Vec::new();
    let mut parts = vec![0usize; objectives];
    compositions(&mut parts, 0, k, &mut |p| {
        out.push(WeightVector::new(p.iter().map(|&n| n as f64 / k as f64)).expect("simplex point"));
    });
    Ok(out)
}

fn compositions(parts: &mut [usize], at: usize, remaining: usize, emit: &mut impl FnMut(&[usize])) {
    if at + 1 == parts.len() {
        parts[at] = remaining;
        emit(parts);
        return;
    }
    for n in 0..=remaining {
        parts[at] = n;
        compositions(parts, at + 1, remaining - n, emit);
    }
}

/// Deterministic evenly spaced subset of `n` grid points.
pub fn subsample(grid: &[WeightVector], n: usize) -> Vec<WeightVector> {
    if n >= grid.len() {
        return grid.to_vec();
    }
    (0..n).map(|i| grid[i * grid.len() / n].clone()).collect()
}

/// Runs one episode with `policy` from reset and returns the discounted
/// return `sum_t gamma^t r_t`, stopping after `max_steps` at the latest.
pub fn evaluate_policy(
    env: &mut dyn Environment,
    mut policy: impl FnMut(usize) -> usize,
    gamma: f64,
    max_steps: usize,
) -> Result<ObjectiveVector> {
    let mut state = env.reset();
    let mut total = vec![0.0; env.spec().num_objectives];
    let mut discount = 1.0;
    for _ in 0..max_steps {
        let out = env.step(policy(state))?;
        for (t, r) in total.iter_mut().zip(out.reward.iter()) {
            *t += discount * r;
        }
        discount *= gamma;
        if out.terminated || out.truncated {
            break;
        }
        state = out.next_state;
    }
    ObjectiveVector::new(total)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Algorithm {
    Moq(ScalariserKind),
    Pql(SetEvalMode),
}

impl Algorithm {
    pub fn token(self) -> String {
        match self {
            Algorithm::Moq(k) => format!("moq-{k}"),
            Algorithm::Pql(_) => "pql".into(),
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.token())
    }
}

impl FromStr for Algorithm {
    type Err = MorlError;

    /// Accepts `moq-linear`, `moq-chebyshev` and `pql`.
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "pql" => Ok(Algorithm::Pql(SetEvalMode::Hypervolume)),
            _ => match s.strip_prefix("moq-") {
                Some(k) => Ok(Algorithm::Moq(k.parse()?)),
                None => Err(MorlError::Config(format!("unknown algorithm `{s}`"))),
            },
        }
    }
}

/// Which weight configurations a MOQ sweep trains.
#[derive(Clone, Debug, PartialEq)]
pub enum WeightSelection {
    /// Simplex grid at `step`, optionally thinned to `max_configs` points.
    Grid { step: f64, max_configs: Option<usize> },
    Explicit(Vec<WeightVector>),
}

#[derive(Clone, Debug)]
pub struct SweepConfig {
    pub name: String,
    pub env: EnvId,
    pub map: Option<PathBuf>,
    pub algorithm: Algorithm,
    pub weights: WeightSelection,
    pub alpha: f64,
    pub gamma: f64,
    pub tau: f64,
    pub total_timesteps: usize,
    pub schedule: EpsilonSchedule,
    pub eval_interval: usize,
    pub seeds: Vec<u64>,
    pub reference: ObjectiveVector,
    pub use_true_front: bool,
    pub cumulative_archive: bool,
    pub state_cap: usize,
    pub workers: Option<usize>,
}

impl SweepConfig {
    /// Settings for `env`: its discount, step budget, tau and reference
    /// point, seeds 42 to 51, full epsilon decay from 1.0 to 0.1.
    pub fn defaults(env: EnvId, algorithm: Algorithm) -> Self {
        Self {
            name: format!("{}-{}", env, algorithm),
            env,
            map: None,
            algorithm,
            weights: WeightSelection::Grid {
                step: DEFAULT_WEIGHT_STEP,
                max_configs: None,
            },
            alpha: DEFAULT_ALPHA,
            gamma: env.default_gamma(),
            tau: env.default_tau(),
            total_timesteps: env.default_timesteps(),
            schedule: EpsilonSchedule::default(),
            eval_interval: DEFAULT_EVAL_INTERVAL,
            seeds: (42..=51).collect(),
            reference: env.reference_point(),
            use_true_front: true,
            cumulative_archive: false,
            state_cap: DEFAULT_STATE_CAP,
            workers: None,
        }
    }

    pub fn weight_configs(&self, objectives: usize) -> Result<Vec<WeightVector>> {
        match &self.weights {
            WeightSelection::Grid { step, max_configs } => {
                let grid = weight_grid(objectives, *step)?;
                Ok(match max_configs {
                    Some(n) => subsample(&grid, *n),
                    None => grid,
                })
            }
            WeightSelection::Explicit(ws) => {
                for w in ws {
                    MorlError::check_dim(objectives, w.dim())?;
                }
                Ok(ws.clone())
            }
        }
    }

    pub fn moq_config(&self, kind: ScalariserKind, weights: WeightVector) -> MoqConfig {
        MoqConfig {
            alpha: self.alpha,
            gamma: self.gamma,
            total_timesteps: self.total_timesteps,
            scalariser: kind,
            weights,
            tau: self.tau,
            schedule: self.schedule,
            eval_interval: self.eval_interval,
        }
    }

    pub fn pql_config(&self, mode: SetEvalMode) -> PqlConfig {
        PqlConfig {
            gamma: self.gamma,
            total_timesteps: self.total_timesteps,
            schedule: self.schedule,
            set_eval: SetEvaluation::from_mode(mode, self.reference.clone()),
            eval_interval: self.eval_interval,
            state_cap: self.state_cap,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.seeds.is_empty() {
            return Err(MorlError::Config("at least one seed is required".into()));
        }
        if self.eval_interval == 0 {
            return Err(MorlError::Config("eval_interval must be positive".into()));
        }
        if self.workers == Some(0) {
            return Err(MorlError::Config("workers must be positive".into()));
        }
        if let WeightSelection::Explicit(ws) = &self.weights {
            if ws.is_empty() {
                return Err(MorlError::Config("explicit weight list is empty".into()));
            }
        }
        MorlError::check_dim(self.env.num_objectives(), self.reference.dim())?;
        self.schedule.validate()
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MetricPoint {
    pub timestep: usize,
    pub hypervolume: f64,
    pub sparsity: f64,
    pub cardinality: usize,
    pub igd: Option<f64>,
}

pub type MetricTimeline = Vec<MetricPoint>;

/// Pooled approximation set per checkpoint.
pub type ApproximationSetTimeline = Vec<(usize, ParetoArchive)>;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Stat {
    pub mean: f64,
    pub sd: f64,
}

impl Stat {
    /// Mean and population standard deviation.
    pub fn of(values: &[f64]) -> Self {
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        Stat {
            mean,
            sd: var.sqrt(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AggregatePoint {
    pub timestep: usize,
    pub hypervolume: Stat,
    pub sparsity: Stat,
    pub cardinality: Stat,
    /// Over the seeds where IGD is defined; `None` when it is defined for none.
    pub igd: Option<Stat>,
}

/// Pointwise mean and standard deviation across seeds.
pub fn aggregate_seeds(per_seed: &[MetricTimeline]) -> Result<Vec<AggregatePoint>> {
    let Some(first) = per_seed.first() else {
        return Err(MorlError::Contract("nothing to aggregate".into()));
    };
    for tl in per_seed {
        let aligned = tl.len() == first.len()
            && tl.iter().zip(first).all(|(a, b)| a.timestep == b.timestep);
        if !aligned {
            return Err(MorlError::Contract(
                "metric timelines are not aligned on timesteps".into(),
            ));
        }
    }
    Ok((0..first.len())
        .map(|k| {
            let column = |f: &dyn Fn(&MetricPoint) -> f64| -> Vec<f64> {
                per_seed.iter().map(|tl| f(&tl[k])).collect()
            };
            let igds: Vec<f64> = per_seed.iter().filter_map(|tl| tl[k].igd).collect();
            AggregatePoint {
                timestep: first[k].timestep,
                hypervolume: Stat::of(&column(&|p| p.hypervolume)),
                sparsity: Stat::of(&column(&|p| p.sparsity)),
                cardinality: Stat::of(&column(&|p| p.cardinality as f64)),
                igd: (!igds.is_empty()).then(|| Stat::of(&igds)),
            }
        })
        .collect())
}

pub fn compute_metrics(
    fronts: &[(usize, ParetoArchive)],
    reference: &ObjectiveVector,
    truth: Option<&[ObjectiveVector]>,
) -> Result<MetricTimeline> {
    fronts
        .iter()
        .map(|(t, front)| {
            Ok(MetricPoint {
                timestep: *t,
                hypervolume: hypervolume(front, reference)?,
                sparsity: sparsity(front)?,
                cardinality: cardinality(front),
                igd: match truth {
                    Some(z) => igd(front, z)?,
                    None => None,
                },
            })
        })
        .collect()
}

/// Pools per-configuration returns into one archive per checkpoint.
pub fn pool_returns(per_config: &[Vec<Evaluation>], cumulative: bool) -> Result<ApproximationSetTimeline> {
    let Some(first) = per_config.first() else {
        return Ok(Vec::new());
    };
    let mut out: ApproximationSetTimeline = Vec::with_capacity(first.len());
    for (k, eval) in first.iter().enumerate() {
        let mut points = Vec::with_capacity(per_config.len());
        for tl in per_config {
            let e = tl.get(k).filter(|e| e.timestep == eval.timestep).ok_or_else(|| {
                MorlError::Contract("configuration timelines are not aligned".into())
            })?;
            points.push(e.discounted_return.clone());
        }
        out.push((eval.timestep, nondominated_unchecked(points)));
    }
    if cumulative {
        accumulate(&mut out);
    }
    Ok(out)
}

fn accumulate(timeline: &mut ApproximationSetTimeline) {
    for k in 1..timeline.len() {
        let mut merged = timeline[k - 1].1.points().to_vec();
        merged.extend(timeline[k].1.iter().cloned());
        timeline[k].1 = nondominated_unchecked(merged);
    }
}

#[derive(Clone, Debug)]
pub struct SeedRun {
    pub seed: u64,
    pub fronts: ApproximationSetTimeline,
    pub metrics: MetricTimeline,
    /// Greedy-evaluation timeline of each weight configuration; empty for PQL.
    pub config_returns: Vec<Vec<Evaluation>>,
}

#[derive(Clone, Debug)]
pub struct SweepResult {
    pub config: SweepConfig,
    pub weights: Vec<WeightVector>,
    pub true_front: Option<Vec<ObjectiveVector>>,
    pub per_seed: Vec<SeedRun>,
    pub aggregate: Vec<AggregatePoint>,
}

enum Trained {
    Moq(Vec<Evaluation>),
    Pql(ApproximationSetTimeline),
}

/// Trains every configuration for every seed and reduces the results.
///
/// Work items run on rayon, on a dedicated pool of `workers` threads when
/// set. The reduction is ordered by seed and configuration index, so results
/// do not depend on scheduling.
pub fn run_sweep(config: &SweepConfig) -> Result<SweepResult> {
    config.validate()?;
    let loaded = LoadedEnv::load(config.env, config.map.as_deref())?;
    let spec = loaded.instance().spec().clone();
    MorlError::check_dim(spec.num_objectives, config.reference.dim())?;
    let true_front = if config.use_true_front {
        loaded.true_front(config.gamma)?
    } else {
        None
    };

    let weights = match config.algorithm {
        Algorithm::Moq(kind) => {
            let ws = config.weight_configs(spec.num_objectives)?;
            for w in &ws {
                config.moq_config(kind, w.clone()).validate(&spec)?;
            }
            ws
        }
        Algorithm::Pql(mode) => {
            config.pql_config(mode).validate(&spec)?;
            Vec::new()
        }
    };

    let items: Vec<(u64, usize)> = match config.algorithm {
        Algorithm::Moq(_) => config
            .seeds
            .iter()
            .flat_map(|&s| (0..weights.len()).map(move |c| (s, c)))
            .collect(),
        Algorithm::Pql(_) => config.seeds.iter().map(|&s| (s, 0)).collect(),
    };

    let train_item = |&(seed, ci): &(u64, usize)| -> Result<Trained> {
        let mut env = loaded.instance();
        match config.algorithm {
            Algorithm::Moq(kind) => {
                let mut eval_env = loaded.instance();
                let cfg = config.moq_config(kind, weights[ci].clone());
                let run = moq::train(env.as_mut(), eval_env.as_mut(), &cfg, seed, ci as u64)?;
                Ok(Trained::Moq(run.timeline))
            }
            Algorithm::Pql(mode) => {
                let run = pql::train(env.as_mut(), &config.pql_config(mode), seed)?;
                Ok(Trained::Pql(run.timeline))
            }
        }
    };
    let run_all = || items.par_iter().map(train_item).collect::<Result<Vec<_>>>();
    let trained = match config.workers {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| MorlError::Config(format!("cannot start worker pool: {e}")))?
            .install(run_all)?,
        None => run_all()?,
    };

    let per_item = match config.algorithm {
        Algorithm::Moq(_) => weights.len(),
        Algorithm::Pql(_) => 1,
    };
    let mut trained = trained.into_iter();
    let mut per_seed = Vec::with_capacity(config.seeds.len());
    for &seed in &config.seeds {
        let chunk: Vec<Trained> = trained.by_ref().take(per_item).collect();
        let (fronts, config_returns) = match config.algorithm {
            Algorithm::Moq(_) => {
                let returns: Vec<Vec<Evaluation>> = chunk
                    .into_iter()
                    .map(|t| match t {
                        Trained::Moq(tl) => tl,
                        Trained::Pql(_) => unreachable!(),
                    })
                    .collect();
                (pool_returns(&returns, config.cumulative_archive)?, returns)
            }
            Algorithm::Pql(_) => {
                let mut fronts = match chunk.into_iter().next() {
                    Some(Trained::Pql(f)) => f,
                    _ => unreachable!(),
                };
                if config.cumulative_archive {
                    accumulate(&mut fronts);
                }
                (fronts, Vec::new())
            }
        };
        let metrics = compute_metrics(&fronts, &config.reference, true_front.as_deref())?;
        per_seed.push(SeedRun {
            seed,
            fronts,
            metrics,
            config_returns,
        });
    }
    let timelines: Vec<MetricTimeline> = per_seed.iter().map(|s| s.metrics.clone()).collect();
    let aggregate = aggregate_seeds(&timelines)?;
    Ok(SweepResult {
        config: config.clone(),
        weights,
        true_front,
        per_seed,
        aggregate,
    })
}
