//! Pareto Q-learning: a single run that learns the whole front of
//! non-dominated returns.
//!
//! Each state-action pair keeps its visit count, the running mean of its
//! immediate reward and the non-dominated set of discounted future returns
//! observed at the successor state. Its Q-set is the mean reward translated
//! onto the discounted future set:
//!
//! ```text
//! Q(s, a) = R(s, a) + gamma * ND( U_a' Q(s', a') )
//! ```

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::env::{EnvSpec, Environment};
use crate::error::{MorlError, Result};
use crate::indicators::hypervolume;
use crate::moq::EpsilonSchedule;
use crate::pareto::{nondominated_unchecked, ObjectiveVector, ParetoArchive};
use crate::rng::stream_rng;
use crate::scalarise::argmax_random_tie;
use crate::sweep::evaluation_steps;

/// Default upper bound on `states * actions` before PQL refuses to run.
pub const DEFAULT_STATE_CAP: usize = 100_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum SetEvalMode {
    Hypervolume,
    Cardinality,
    Pareto,
}

impl SetEvalMode {
    pub fn token(self) -> &'static str {
        match self {
            SetEvalMode::Hypervolume => "hypervolume",
            SetEvalMode::Cardinality => "cardinality",
            SetEvalMode::Pareto => "pareto",
        }
    }
}

impl fmt::Display for SetEvalMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.token())
    }
}

impl FromStr for SetEvalMode {
    type Err = MorlError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "hypervolume" => Ok(SetEvalMode::Hypervolume),
            "cardinality" => Ok(SetEvalMode::Cardinality),
            "pareto" => Ok(SetEvalMode::Pareto),
            other => Err(MorlError::Config(format!(
                "unknown set evaluation `{other}` (expected hypervolume, cardinality or pareto)"
            ))),
        }
    }
}

/// How candidate actions' Q-sets are scored. The reference point is only
/// carried in hypervolume mode.
#[derive(Clone, Debug, PartialEq)]
pub struct SetEvaluation {
    mode: SetEvalMode,
    reference: Option<ObjectiveVector>,
}

impl SetEvaluation {
    pub fn hypervolume(reference: ObjectiveVector) -> Self {
        Self {
            mode: SetEvalMode::Hypervolume,
            reference: Some(reference),
        }
    }

    pub fn cardinality() -> Self {
        Self {
            mode: SetEvalMode::Cardinality,
            reference: None,
        }
    }

    pub fn pareto() -> Self {
        Self {
            mode: SetEvalMode::Pareto,
            reference: None,
        }
    }

    pub fn from_mode(mode: SetEvalMode, reference: ObjectiveVector) -> Self {
        match mode {
            SetEvalMode::Hypervolume => Self::hypervolume(reference),
            SetEvalMode::Cardinality => Self::cardinality(),
            SetEvalMode::Pareto => Self::pareto(),
        }
    }

    pub fn mode(&self) -> SetEvalMode {
        self.mode
    }

    pub fn reference(&self) -> Option<&ObjectiveVector> {
        self.reference.as_ref()
    }
}

/// Scores every action's Q-set at one state.
///
/// Hypervolume scores each set on its own. Cardinality counts the points an
/// action contributes to the non-dominated union over all actions; Pareto
/// mode reduces that count to 0 or 1.
pub fn evaluate_action_sets(sets: &[ParetoArchive], eval: &SetEvaluation) -> Result<Vec<f64>> {
    match eval.mode {
        SetEvalMode::Hypervolume => {
            let reference = eval.reference.as_ref().ok_or_else(|| {
                MorlError::Contract("hypervolume set evaluation needs a reference point".into())
            })?;
            sets.iter().map(|s| hypervolume(s, reference)).collect()
        }
        SetEvalMode::Cardinality | SetEvalMode::Pareto => {
            let union = nondominated_unchecked(sets.iter().flat_map(|s| s.iter().cloned()).collect());
            Ok(sets
                .iter()
                .map(|s| {
                    let hits = s.iter().filter(|p| union.contains(p)).count();
                    match eval.mode {
                        SetEvalMode::Pareto => (hits > 0) as u8 as f64,
                        _ => hits as f64,
                    }
                })
                .collect())
        }
    }
}

/// Per state-action visit counts, mean rewards and future-return fronts.
#[derive(Clone, Debug)]
pub struct QSetStore {
    states: usize,
    actions: usize,
    objectives: usize,
    counts: Vec<u64>,
    mean_reward: Vec<f64>,
    future: Vec<ParetoArchive>,
}

impl QSetStore {
    pub fn new(states: usize, actions: usize, objectives: usize) -> Self {
        let pairs = states * actions;
        Self {
            states,
            actions,
            objectives,
            counts: vec![0; pairs],
            mean_reward: vec![0.0; pairs * objectives],
            future: vec![ParetoArchive::new(); pairs],
        }
    }

    fn index(&self, state: usize, action: usize) -> Result<usize> {
        if state >= self.states {
            return Err(MorlError::InvalidState {
                state,
                state_count: self.states,
            });
        }
        if action >= self.actions {
            return Err(MorlError::InvalidAction {
                action,
                action_count: self.actions,
            });
        }
        Ok(state * self.actions + action)
    }

    pub fn visits(&self, state: usize, action: usize) -> Result<u64> {
        Ok(self.counts[self.index(state, action)?])
    }

    /// `None` until the pair has been visited.
    pub fn mean_reward(&self, state: usize, action: usize) -> Result<Option<&[f64]>> {
        let i = self.index(state, action)?;
        let m = self.objectives;
        Ok((self.counts[i] > 0).then(|| &self.mean_reward[i * m..(i + 1) * m]))
    }

    pub fn future_front(&self, state: usize, action: usize) -> Result<&ParetoArchive> {
        Ok(&self.future[self.index(state, action)?])
    }

    pub fn qset(&self, state: usize, action: usize, gamma: f64) -> Result<ParetoArchive> {
        let i = self.index(state, action)?;
        Ok(self.qset_at(i, gamma))
    }

    fn qset_at(&self, i: usize, gamma: f64) -> ParetoArchive {
        if self.counts[i] == 0 {
            return ParetoArchive::new();
        }
        let m = self.objectives;
        let reward = ObjectiveVector::from_finite(&self.mean_reward[i * m..(i + 1) * m]);
        let future = &self.future[i];
        if future.is_empty() {
            return nondominated_unchecked(vec![reward]);
        }
        nondominated_unchecked(future.iter().map(|v| reward.add_scaled(gamma, v)).collect())
    }

    fn state_qsets(&self, state: usize, gamma: f64) -> Vec<ParetoArchive> {
        (0..self.actions)
            .map(|a| self.qset_at(state * self.actions + a, gamma))
            .collect()
    }

    /// Non-dominated union of all actions' Q-sets at `state`.
    pub fn front(&self, state: usize, gamma: f64) -> Result<ParetoArchive> {
        self.index(state, 0)?;
        Ok(self.front_unchecked(state, gamma))
    }

    fn front_unchecked(&self, state: usize, gamma: f64) -> ParetoArchive {
        nondominated_unchecked(
            self.state_qsets(state, gamma)
                .into_iter()
                .flat_map(ParetoArchive::into_points)
                .collect(),
        )
    }

    pub fn update(
        &mut self,
        state: usize,
        action: usize,
        reward: &[f64],
        next_state: usize,
        terminated: bool,
        gamma: f64,
    ) -> Result<()> {
        let i = self.index(state, action)?;
        self.index(next_state, 0)?;
        MorlError::check_dim(self.objectives, reward.len())?;
        self.counts[i] += 1;
        let n = self.counts[i] as f64;
        let m = self.objectives;
        for (mean, r) in self.mean_reward[i * m..(i + 1) * m].iter_mut().zip(reward) {
            *mean += (r - *mean) / n;
        }
        self.future[i] = if terminated {
            ParetoArchive::new()
        } else {
            self.front_unchecked(next_state, gamma)
        };
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct PqlConfig {
    pub gamma: f64,
    pub total_timesteps: usize,
    pub schedule: EpsilonSchedule,
    pub set_eval: SetEvaluation,
    pub eval_interval: usize,
    pub state_cap: usize,
}

impl PqlConfig {
    /// Rejects invalid settings and environments too large for set-valued tables.
    pub fn validate(&self, spec: &EnvSpec) -> Result<()> {
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return Err(MorlError::Config(format!("gamma must lie in (0, 1], got {}", self.gamma)));
        }
        if self.eval_interval == 0 {
            return Err(MorlError::Config("eval_interval must be positive".into()));
        }
        if let Some(r) = self.set_eval.reference() {
            MorlError::check_dim(spec.num_objectives, r.dim())?;
        }
        self.schedule.validate()?;
        let pairs = spec.state_count.saturating_mul(spec.action_count);
        if pairs > self.state_cap {
            return Err(MorlError::StateCapExceeded {
                pairs,
                cap: self.state_cap,
            });
        }
        Ok(())
    }
}

pub struct PqlAgent {
    store: QSetStore,
    gamma: f64,
    set_eval: SetEvaluation,
    rng: ChaCha8Rng,
}

impl PqlAgent {
    pub fn new(spec: &EnvSpec, config: &PqlConfig, rng: ChaCha8Rng) -> Result<Self> {
        config.validate(spec)?;
        Ok(Self {
            store: QSetStore::new(spec.state_count, spec.action_count, spec.num_objectives),
            gamma: config.gamma,
            set_eval: config.set_eval.clone(),
            rng,
        })
    }

    pub fn store(&self) -> &QSetStore {
        &self.store
    }

    pub fn act(&mut self, state: usize, epsilon: f64) -> Result<usize> {
        self.store.index(state, 0)?;
        if self.rng.gen::<f64>() < epsilon {
            return Ok(self.rng.gen_range(0..self.store.actions));
        }
        let scores = evaluate_action_sets(&self.store.state_qsets(state, self.gamma), &self.set_eval)?;
        Ok(argmax_random_tie(scores.into_iter(), &mut self.rng))
    }

    pub fn update(
        &mut self,
        state: usize,
        action: usize,
        reward: &[f64],
        next_state: usize,
        terminated: bool,
    ) -> Result<()> {
        self.store
            .update(state, action, reward, next_state, terminated, self.gamma)
    }

    pub fn front(&self, state: usize) -> Result<ParetoArchive> {
        self.store.front(state, self.gamma)
    }
}

pub struct PqlRun {
    pub agent: PqlAgent,
    /// Front at the start state after each evaluation checkpoint.
    pub timeline: Vec<(usize, ParetoArchive)>,
}

pub fn train(env: &mut dyn Environment, config: &PqlConfig, seed: u64) -> Result<PqlRun> {
    let spec = env.spec().clone();
    let mut agent = PqlAgent::new(&spec, config, stream_rng(seed, 0))?;
    let checkpoints = evaluation_steps(config.total_timesteps, config.eval_interval);
    let mut next_checkpoint = checkpoints.iter().copied().peekable();
    let mut timeline = Vec::with_capacity(checkpoints.len());

    let start = env.reset();
    let mut state = start;
    for t in 0..=config.total_timesteps {
        while next_checkpoint.peek() == Some(&t) {
            next_checkpoint.next();
            timeline.push((t, agent.front(start)?));
        }
        if t == config.total_timesteps {
            break;
        }
        let eps = config.schedule.at(t, config.total_timesteps);
        let action = agent.act(state, eps)?;
        let out = env.step(action)?;
        agent.update(state, action, &out.reward, out.next_state, out.terminated)?;
        state = if out.terminated || out.truncated {
            env.reset()
        } else {
            out.next_state
        };
    }
    Ok(PqlRun { agent, timeline })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v<const N: usize>(x: [f64; N]) -> ObjectiveVector {
        ObjectiveVector::from(x)
    }

    #[test]
    fn unvisited_qset_is_empty() {
        let store = QSetStore::new(2, 2, 2);
        assert!(store.qset(0, 0, 0.9).unwrap().is_empty());
        assert!(store.mean_reward(0, 0).unwrap().is_none());
        assert!(store.front(0, 0.9).unwrap().is_empty());
    }

    #[test]
    fn terminal_pair_qset_is_mean_reward() {
        let mut store = QSetStore::new(2, 1, 2);
        store.update(0, 0, &[1.0, -1.0], 1, true, 0.9).unwrap();
        assert_eq!(store.visits(0, 0).unwrap(), 1);
        assert_eq!(store.mean_reward(0, 0).unwrap(), Some(&[1.0, -1.0][..]));
        assert!(store.future_front(0, 0).unwrap().is_empty());
        assert_eq!(store.qset(0, 0, 0.9).unwrap().points(), &[v([1.0, -1.0])]);
    }

    #[test]
    fn qset_translates_future_front() {
        // Successor state 1 has two terminal actions with returns (1,-1) and (2,-3).
        let mut store = QSetStore::new(2, 2, 2);
        store.update(1, 0, &[1.0, -1.0], 1, true, 0.9).unwrap();
        store.update(1, 1, &[2.0, -3.0], 1, true, 0.9).unwrap();
        store.update(0, 0, &[0.0, -1.0], 1, false, 0.9).unwrap();
        let q = store.qset(0, 0, 0.9).unwrap();
        let expect = [(0.9, -1.9), (1.8, -3.7)];
        assert_eq!(q.len(), 2);
        for (p, (x, y)) in q.iter().zip(expect) {
            assert!((p[0] - x).abs() < 1e-12 && (p[1] - y).abs() < 1e-12, "{p}");
        }
    }

    #[test]
    fn incremental_mean() {
        let mut store = QSetStore::new(1, 1, 2);
        store.update(0, 0, &[0.0, -1.0], 0, true, 0.9).unwrap();
        store.update(0, 0, &[2.0, -1.0], 0, true, 0.9).unwrap();
        assert_eq!(store.mean_reward(0, 0).unwrap(), Some(&[1.0, -1.0][..]));
    }

    #[test]
    fn update_rejects_bad_indices() {
        let mut store = QSetStore::new(2, 2, 2);
        assert!(store.update(2, 0, &[0.0, 0.0], 0, true, 0.9).is_err());
        assert!(store.update(0, 0, &[0.0, 0.0], 3, false, 0.9).is_err());
        assert!(store.update(0, 0, &[0.0], 0, true, 0.9).is_err());
    }

    #[test]
    fn hypervolume_scores() {
        let eval = SetEvaluation::hypervolume(v([0.0, 0.0]));
        let sets = [
            ParetoArchive::new(),
            nondominated_unchecked(vec![v([1.0, 1.0])]),
            nondominated_unchecked(vec![v([2.0, 2.0])]),
        ];
        assert_eq!(evaluate_action_sets(&sets, &eval).unwrap(), vec![0.0, 1.0, 4.0]);
    }

    #[test]
    fn cardinality_and_pareto_scores_use_siblings() {
        let sets = [
            nondominated_unchecked(vec![v([3.0, 0.0]), v([1.0, 1.0])]),
            nondominated_unchecked(vec![v([0.0, 3.0]), v([2.0, 2.0])]),
            nondominated_unchecked(vec![v([0.5, 0.5])]),
        ];
        // (1,1) is dominated by the sibling point (2,2).
        assert_eq!(evaluate_action_sets(&sets, &SetEvaluation::cardinality()).unwrap(), vec![1.0, 2.0, 0.0]);
        assert_eq!(evaluate_action_sets(&sets, &SetEvaluation::pareto()).unwrap(), vec![1.0, 1.0, 0.0]);
    }

    #[test]
    fn greedy_picks_strictly_better_set() {
        let spec = EnvSpec {
            name: "t".into(),
            num_objectives: 2,
            action_count: 2,
            state_count: 2,
            max_episode_steps: 10,
        };
        let cfg = PqlConfig {
            gamma: 0.9,
            total_timesteps: 0,
            schedule: EpsilonSchedule::default(),
            set_eval: SetEvaluation::hypervolume(v([0.0, 0.0])),
            eval_interval: 1000,
            state_cap: DEFAULT_STATE_CAP,
        };
        let mut agent = PqlAgent::new(&spec, &cfg, stream_rng(0, 0)).unwrap();
        agent.update(0, 1, &[2.0, 2.0], 1, true).unwrap();
        agent.update(0, 0, &[1.0, 1.0], 1, true).unwrap();
        for _ in 0..50 {
            assert_eq!(agent.act(0, 0.0).unwrap(), 1);
        }
    }

    #[test]
    fn unvisited_actions_tie_uniformly() {
        let spec = EnvSpec {
            name: "t".into(),
            num_objectives: 2,
            action_count: 4,
            state_count: 1,
            max_episode_steps: 10,
        };
        let cfg = PqlConfig {
            gamma: 0.9,
            total_timesteps: 0,
            schedule: EpsilonSchedule::default(),
            set_eval: SetEvaluation::hypervolume(v([0.0, -50.0])),
            eval_interval: 1000,
            state_cap: DEFAULT_STATE_CAP,
        };
        let mut agent = PqlAgent::new(&spec, &cfg, stream_rng(5, 0)).unwrap();
        let mut counts = [0usize; 4];
        for _ in 0..4000 {
            counts[agent.act(0, 0.0).unwrap()] += 1;
        }
        assert!(counts.iter().all(|c| (800..1200).contains(c)), "{counts:?}");
    }

    #[test]
    fn state_cap_refuses_large_spaces() {
        let spec = EnvSpec {
            name: "big".into(),
            num_objectives: 3,
            action_count: 4,
            state_count: 86_528,
            max_episode_steps: 1000,
        };
        let cfg = PqlConfig {
            gamma: 0.99,
            total_timesteps: 10,
            schedule: EpsilonSchedule::default(),
            set_eval: SetEvaluation::pareto(),
            eval_interval: 1000,
            state_cap: DEFAULT_STATE_CAP,
        };
        let err = PqlAgent::new(&spec, &cfg, stream_rng(0, 0)).err().unwrap();
        assert!(matches!(err, MorlError::StateCapExceeded { .. }), "{err}");
    }

    #[test]
    fn set_eval_tokens() {
        for m in [SetEvalMode::Hypervolume, SetEvalMode::Cardinality, SetEvalMode::Pareto] {
            assert_eq!(m.token().parse::<SetEvalMode>().unwrap(), m);
        }
        assert!("volume".parse::<SetEvalMode>().is_err());
        assert!(SetEvaluation::hypervolume(v([0.0, 0.0])).reference().is_some());
        assert!(SetEvaluation::cardinality().reference().is_none());
    }
}
