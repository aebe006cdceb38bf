use super::{EnvSpec, Environment, Episode, StepOutcome};
use crate::error::{MorlError, Result};
use crate::pareto::ObjectiveVector;

/// Deterministic episodic MDP given by explicit tables, for small
/// hand-built problems and oracle comparisons.
#[derive(Clone, Debug)]
pub struct TabularMdp {
    spec: EnvSpec,
    start: usize,
    /// `(next_state, reward, terminated)` indexed by `state * actions + action`.
    table: Vec<(usize, ObjectiveVector, bool)>,
    episode: Episode,
}

impl TabularMdp {
    pub fn new(
        state_count: usize,
        action_count: usize,
        start: usize,
        table: Vec<(usize, ObjectiveVector, bool)>,
    ) -> Result<Self> {
        if table.len() != state_count * action_count {
            return Err(MorlError::Contract(format!(
                "transition table has {} entries, expected {}",
                table.len(),
                state_count * action_count
            )));
        }
        let m = table.first().map_or(1, |t| t.1.dim());
        for (next, r, _) in &table {
            if *next >= state_count {
                return Err(MorlError::InvalidState {
                    state: *next,
                    state_count,
                });
            }
            MorlError::check_dim(m, r.dim())?;
        }
        if start >= state_count {
            return Err(MorlError::InvalidState {
                state: start,
                state_count,
            });
        }
        let spec = EnvSpec {
            name: "tabular".into(),
            num_objectives: m,
            action_count,
            state_count,
            max_episode_steps: super::DEFAULT_MAX_EPISODE_STEPS,
        };
        let mut mdp = Self {
            spec,
            start,
            table,
            episode: Episode::default(),
        };
        mdp.episode.begin(start);
        Ok(mdp)
    }

    pub fn start(&self) -> usize {
        self.start
    }

    pub fn transition(&self, state: usize, action: usize) -> &(usize, ObjectiveVector, bool) {
        &self.table[state * self.spec.action_count + action]
    }
}

impl Environment for TabularMdp {
    fn spec(&self) -> &EnvSpec {
        &self.spec
    }

    fn reset(&mut self) -> usize {
        self.episode.begin(self.start)
    }

    fn step(&mut self, action: usize) -> Result<StepOutcome> {
        let table = &self.table;
        let actions = self.spec.action_count;
        self.episode.advance(&self.spec, action, |s| table[s * actions + action].clone())
    }
}
