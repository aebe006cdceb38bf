//! Single-policy multi-objective Q-learning.
//!
//! The agent keeps one Q-vector per state-action pair and selects actions by
//! scalarising those vectors. Every objective is updated with a temporal
//! difference target that bootstraps on the same next action `a*`, the
//! scalarised-greedy action at the next state.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::env::{EnvSpec, Environment};
use crate::error::{MorlError, Result};
use crate::pareto::ObjectiveVector;
use crate::rng::stream_rng;
use crate::scalarise::{Scalariser, ScalariserKind, WeightVector};
use crate::sweep::{evaluation_steps, evaluate_policy};

/// Linear exploration decay from `initial` to `final_value` over the first
/// `decay_fraction` of training, constant afterwards.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EpsilonSchedule {
    pub initial: f64,
    pub final_value: f64,
    pub decay_fraction: f64,
}

impl Default for EpsilonSchedule {
    fn default() -> Self {
        Self {
            initial: 1.0,
            final_value: 0.1,
            decay_fraction: 1.0,
        }
    }
}

impl EpsilonSchedule {
    pub fn new(initial: f64, final_value: f64, decay_fraction: f64) -> Result<Self> {
        let s = Self {
            initial,
            final_value,
            decay_fraction,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0 <= self.final_value && self.final_value <= self.initial && self.initial <= 1.0) {
            return Err(MorlError::Config(format!(
                "need 0 <= eps_final <= eps_initial <= 1, got {} and {}",
                self.final_value, self.initial
            )));
        }
        if !(0.0..=1.0).contains(&self.decay_fraction) {
            return Err(MorlError::Config(format!(
                "eps_decay_fraction must lie in [0, 1], got {}",
                self.decay_fraction
            )));
        }
        Ok(())
    }

    pub fn at(&self, t: usize, total: usize) -> f64 {
        let horizon = self.decay_fraction * total as f64;
        if horizon <= 0.0 {
            return self.final_value;
        }
        let progress = (t as f64 / horizon).min(1.0);
        self.initial + (self.final_value - self.initial) * progress
    }
}

pub fn epsilon_at(schedule: &EpsilonSchedule, t: usize, total: usize) -> f64 {
    schedule.at(t, total)
}

/// Dense `states x actions x objectives` table, zero-initialised.
#[derive(Clone, Debug, PartialEq)]
pub struct VectorQTable {
    states: usize,
    actions: usize,
    objectives: usize,
    q: Vec<f64>,
}

impl VectorQTable {
    pub fn zeros(states: usize, actions: usize, objectives: usize) -> Self {
        Self {
            states,
            actions,
            objectives,
            q: vec![0.0; states * actions * objectives],
        }
    }

    pub fn states(&self) -> usize {
        self.states
    }

    pub fn actions(&self) -> usize {
        self.actions
    }

    pub fn objectives(&self) -> usize {
        self.objectives
    }

    /// All actions' Q-vectors at `state`, flattened.
    pub fn row(&self, state: usize) -> &[f64] {
        let w = self.actions * self.objectives;
        &self.q[state * w..(state + 1) * w]
    }

    pub fn get(&self, state: usize, action: usize) -> &[f64] {
        let i = (state * self.actions + action) * self.objectives;
        &self.q[i..i + self.objectives]
    }

    fn get_mut(&mut self, state: usize, action: usize) -> &mut [f64] {
        let i = (state * self.actions + action) * self.objectives;
        &mut self.q[i..i + self.objectives]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.q
    }
}

#[derive(Clone, Debug)]
pub struct MoqConfig {
    pub alpha: f64,
    pub gamma: f64,
    pub total_timesteps: usize,
    pub scalariser: ScalariserKind,
    pub weights: WeightVector,
    pub tau: f64,
    pub schedule: EpsilonSchedule,
    pub eval_interval: usize,
}

impl MoqConfig {
    pub fn validate(&self, spec: &EnvSpec) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return Err(MorlError::Config(format!("alpha must lie in (0, 1], got {}", self.alpha)));
        }
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return Err(MorlError::Config(format!("gamma must lie in (0, 1], got {}", self.gamma)));
        }
        if self.eval_interval == 0 {
            return Err(MorlError::Config("eval_interval must be positive".into()));
        }
        MorlError::check_dim(spec.num_objectives, self.weights.dim())?;
        self.schedule.validate()
    }
}

pub struct MoqAgent {
    table: VectorQTable,
    scalariser: Scalariser,
    alpha: f64,
    gamma: f64,
    rng: ChaCha8Rng,
}

impl MoqAgent {
    pub fn new(spec: &EnvSpec, config: &MoqConfig, rng: ChaCha8Rng) -> Result<Self> {
        config.validate(spec)?;
        Ok(Self {
            table: VectorQTable::zeros(spec.state_count, spec.action_count, spec.num_objectives),
            scalariser: Scalariser::new(config.scalariser, config.weights.clone(), config.tau)?,
            alpha: config.alpha,
            gamma: config.gamma,
            rng,
        })
    }

    pub fn table(&self) -> &VectorQTable {
        &self.table
    }

    pub fn scalariser(&self) -> &Scalariser {
        &self.scalariser
    }

    fn check_state(&self, state: usize) -> Result<()> {
        if state < self.table.states {
            Ok(())
        } else {
            Err(MorlError::InvalidState {
                state,
                state_count: self.table.states,
            })
        }
    }

    /// Epsilon-greedy action.
    pub fn act(&mut self, state: usize, epsilon: f64) -> Result<usize> {
        self.check_state(state)?;
        if self.rng.gen::<f64>() < epsilon {
            return Ok(self.rng.gen_range(0..self.table.actions));
        }
        Ok(self.scalariser.select(self.table.row(state), &mut self.rng))
    }

    /// Greedy action with ties broken by `rng`; leaves the agent untouched.
    pub fn greedy<R: Rng + ?Sized>(&self, state: usize, rng: &mut R) -> usize {
        self.scalariser.greedy(self.table.row(state), rng)
    }

    pub fn update(
        &mut self,
        state: usize,
        action: usize,
        reward: &[f64],
        next_state: usize,
        terminated: bool,
    ) -> Result<()> {
        self.check_state(state)?;
        self.check_state(next_state)?;
        if action >= self.table.actions {
            return Err(MorlError::InvalidAction {
                action,
                action_count: self.table.actions,
            });
        }
        MorlError::check_dim(self.table.objectives, reward.len())?;

        let bootstrap: Option<ObjectiveVector> = if terminated {
            None
        } else {
            let a_star = self.scalariser.select(self.table.row(next_state), &mut self.rng);
            Some(ObjectiveVector::from_finite(self.table.get(next_state, a_star)))
        };
        let (alpha, gamma) = (self.alpha, self.gamma);
        let q = self.table.get_mut(state, action);
        for o in 0..q.len() {
            let next = bootstrap.as_ref().map_or(0.0, |b| b[o]);
            let td = reward[o] + gamma * next - q[o];
            q[o] += alpha * td;
        }
        Ok(())
    }
}

/// Greedy evaluation result recorded at one timestep.
#[derive(Clone, Debug, PartialEq)]
pub struct Evaluation {
    pub timestep: usize,
    pub discounted_return: ObjectiveVector,
}

pub struct MoqRun {
    pub agent: MoqAgent,
    pub timeline: Vec<Evaluation>,
}

/// Trains one weight configuration, evaluating the greedy policy on
/// `eval_env` every `eval_interval` steps.
///
/// Streams `2 * stream` and `2 * stream + 1` of `seed` drive training and
/// evaluation tie-breaks respectively.
pub fn train(
    env: &mut dyn Environment,
    eval_env: &mut dyn Environment,
    config: &MoqConfig,
    seed: u64,
    stream: u64,
) -> Result<MoqRun> {
    let spec = env.spec().clone();
    let mut agent = MoqAgent::new(&spec, config, stream_rng(seed, 2 * stream))?;
    let mut eval_rng = stream_rng(seed, 2 * stream + 1);
    let checkpoints = evaluation_steps(config.total_timesteps, config.eval_interval);
    let mut timeline = Vec::with_capacity(checkpoints.len());
    let mut next_checkpoint = checkpoints.iter().copied().peekable();

    let mut state = env.reset();
    for t in 0..=config.total_timesteps {
        while next_checkpoint.peek() == Some(&t) {
            next_checkpoint.next();
            let max_steps = eval_env.spec().max_episode_steps;
            let ret = evaluate_policy(
                eval_env,
                |s| agent.greedy(s, &mut eval_rng),
                config.gamma,
                max_steps,
            )?;
            timeline.push(Evaluation {
                timestep: t,
                discounted_return: ret,
            });
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
    Ok(MoqRun { agent, timeline })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::TabularMdp;

    fn config(kind: ScalariserKind, weights: &[f64]) -> MoqConfig {
        MoqConfig {
            alpha: 0.1,
            gamma: 0.9,
            total_timesteps: 0,
            scalariser: kind,
            weights: WeightVector::new(weights.iter().copied()).unwrap(),
            tau: 4.0,
            schedule: EpsilonSchedule::default(),
            eval_interval: 1000,
        }
    }

    fn spec(states: usize, actions: usize, m: usize) -> EnvSpec {
        EnvSpec {
            name: "t".into(),
            num_objectives: m,
            action_count: actions,
            state_count: states,
            max_episode_steps: 100,
        }
    }

    #[test]
    fn epsilon_schedule_points() {
        let s = EpsilonSchedule::default();
        assert_eq!(s.at(0, 400_000), 1.0);
        assert!((s.at(400_000, 400_000) - 0.1).abs() < 1e-12);
        assert!((s.at(200_000, 400_000) - 0.55).abs() < 1e-12);
        let fast = EpsilonSchedule::new(1.0, 0.1, 0.5).unwrap();
        assert!((fast.at(300_000, 400_000) - 0.1).abs() < 1e-12);
        assert_eq!(fast.at(0, 0), 0.1);
    }

    #[test]
    fn epsilon_schedule_validation() {
        assert!(EpsilonSchedule::new(0.1, 0.5, 1.0).is_err());
        assert!(EpsilonSchedule::new(1.2, 0.1, 1.0).is_err());
        assert!(EpsilonSchedule::new(1.0, 0.1, 1.5).is_err());
    }

    #[test]
    fn terminal_update_overwrites_with_alpha_one() {
        let mut cfg = config(ScalariserKind::Linear, &[0.5, 0.5]);
        cfg.alpha = 1.0;
        let mut agent = MoqAgent::new(&spec(2, 2, 2), &cfg, stream_rng(0, 0)).unwrap();
        agent.update(0, 1, &[1.0, -1.0], 1, true).unwrap();
        assert_eq!(agent.table().get(0, 1), &[1.0, -1.0]);
        assert_eq!(agent.table().get(0, 0), &[0.0, 0.0]);
    }

    #[test]
    fn alpha_zero_is_rejected_by_validation() {
        let mut cfg = config(ScalariserKind::Linear, &[0.5, 0.5]);
        cfg.alpha = 0.0;
        assert!(MoqAgent::new(&spec(2, 2, 2), &cfg, stream_rng(0, 0)).is_err());
    }

    #[test]
    fn update_rejects_bad_indices() {
        let cfg = config(ScalariserKind::Linear, &[0.5, 0.5]);
        let mut agent = MoqAgent::new(&spec(2, 2, 2), &cfg, stream_rng(0, 0)).unwrap();
        assert!(agent.update(5, 0, &[0.0, 0.0], 0, false).is_err());
        assert!(agent.update(0, 7, &[0.0, 0.0], 0, false).is_err());
        assert!(agent.update(0, 0, &[0.0], 0, false).is_err());
        assert!(agent.act(9, 0.0).is_err());
    }

    #[test]
    fn uniform_exploration_with_full_epsilon() {
        let cfg = config(ScalariserKind::Linear, &[0.5, 0.5]);
        let mut agent = MoqAgent::new(&spec(1, 4, 2), &cfg, stream_rng(3, 0)).unwrap();
        let mut counts = [0usize; 4];
        for _ in 0..10_000 {
            counts[agent.act(0, 1.0).unwrap()] += 1;
        }
        for c in counts {
            assert!((c as f64 / 10_000.0 - 0.25).abs() <= 0.02, "{counts:?}");
        }
    }

    #[test]
    fn greedy_with_zero_epsilon_is_deterministic() {
        let mut cfg = config(ScalariserKind::Linear, &[1.0, 0.0]);
        cfg.alpha = 1.0;
        let mut agent = MoqAgent::new(&spec(2, 3, 2), &cfg, stream_rng(0, 0)).unwrap();
        agent.update(0, 2, &[5.0, 0.0], 1, true).unwrap();
        for _ in 0..100 {
            assert_eq!(agent.act(0, 0.0).unwrap(), 2);
        }
    }

    #[test]
    fn chain_converges_to_discounted_return() {
        // s0 --(0,-1)--> s1 --(2,-1)--> terminal.
        let v = |a: f64, b: f64| ObjectiveVector::from([a, b]);
        let mut mdp = TabularMdp::new(
            3,
            1,
            0,
            vec![(1, v(0.0, -1.0), false), (2, v(2.0, -1.0), true), (2, v(0.0, 0.0), true)],
        )
        .unwrap();
        let mut cfg = config(ScalariserKind::Linear, &[0.5, 0.5]);
        cfg.schedule = EpsilonSchedule::new(0.0, 0.0, 1.0).unwrap();
        let mut agent = MoqAgent::new(mdp.spec(), &cfg, stream_rng(0, 0)).unwrap();
        let mut s = mdp.reset();
        for _ in 0..10_000 {
            let a = agent.act(s, 0.0).unwrap();
            let out = mdp.step(a).unwrap();
            agent.update(s, a, &out.reward, out.next_state, out.terminated).unwrap();
            s = if out.terminated { mdp.reset() } else { out.next_state };
        }
        let q0 = agent.table().get(0, 0);
        assert!((q0[0] - 0.9 * 2.0).abs() < 1e-3, "{q0:?}");
        assert!((q0[1] - (-1.0 - 0.9)).abs() < 1e-3, "{q0:?}");
    }

    #[test]
    fn zero_steps_evaluates_untrained_policy() {
        let v = |a: f64, b: f64| ObjectiveVector::from([a, b]);
        let mut mdp = TabularMdp::new(1, 2, 0, vec![(0, v(1.0, -1.0), true), (0, v(1.0, -1.0), true)]).unwrap();
        let mut eval = mdp.clone();
        let run = train(&mut mdp, &mut eval, &config(ScalariserKind::Linear, &[0.5, 0.5]), 1, 0).unwrap();
        assert!(run.agent.table().as_slice().iter().all(|q| *q == 0.0));
        assert_eq!(run.timeline.len(), 1);
        assert_eq!(run.timeline[0].timestep, 0);
        assert_eq!(run.timeline[0].discounted_return, v(1.0, -1.0));
    }
}
