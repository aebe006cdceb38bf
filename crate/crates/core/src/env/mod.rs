//! Deterministic discrete multi-objective gridworlds.

mod dst;
mod four_room;
pub mod map;
mod tabular;

use std::fmt;
use std::path::Path;
use std::str::FromStr;
use std::sync::Arc;

pub use dst::{dst_true_front, DeepSeaTreasure, DstMap};
pub use four_room::{FourRoom, FourRoomMap};
pub use tabular::TabularMdp;

use crate::error::{MorlError, Result};
use crate::pareto::ObjectiveVector;

/// Truncation guard shared by both bundled environments.
pub const DEFAULT_MAX_EPISODE_STEPS: usize = 1000;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EnvSpec {
    pub name: String,
    pub num_objectives: usize,
    pub action_count: usize,
    pub state_count: usize,
    pub max_episode_steps: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct StepOutcome {
    pub next_state: usize,
    pub reward: ObjectiveVector,
    pub terminated: bool,
    pub truncated: bool,
}

pub trait Environment: Send {
    fn spec(&self) -> &EnvSpec;

    /// Starts a new episode and returns the initial state.
    fn reset(&mut self) -> usize;

    fn step(&mut self, action: usize) -> Result<StepOutcome>;
}

/// Step counter and episode bookkeeping shared by the gridworlds.
#[derive(Clone, Debug, Default)]
struct Episode {
    state: usize,
    steps: usize,
    finished: bool,
}

impl Episode {
    fn begin(&mut self, state: usize) -> usize {
        *self = Episode {
            state,
            steps: 0,
            finished: false,
        };
        state
    }

    fn advance(
        &mut self,
        spec: &EnvSpec,
        action: usize,
        transition: impl FnOnce(usize) -> (usize, ObjectiveVector, bool),
    ) -> Result<StepOutcome> {
        if action >= spec.action_count {
            return Err(MorlError::InvalidAction {
                action,
                action_count: spec.action_count,
            });
        }
        if self.finished {
            return Err(MorlError::Contract("episode is over; call reset".into()));
        }
        let (next_state, reward, terminated) = transition(self.state);
        self.state = next_state;
        self.steps += 1;
        let truncated = !terminated && self.steps >= spec.max_episode_steps;
        self.finished = terminated || truncated;
        Ok(StepOutcome {
            next_state,
            reward,
            terminated,
            truncated,
        })
    }
}

/// The bundled environments, addressable by CLI token.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum EnvId {
    DstConcave,
    FourRoom,
}

impl EnvId {
    pub fn token(self) -> &'static str {
        match self {
            EnvId::DstConcave => "dst-concave",
            EnvId::FourRoom => "four-room",
        }
    }

    pub fn build(self) -> Box<dyn Environment> {
        LoadedEnv::bundled(self).instance()
    }

    /// Hypervolume reference point used for metrics.
    pub fn reference_point(self) -> ObjectiveVector {
        match self {
            EnvId::DstConcave => ObjectiveVector::from([0.0, -50.0]),
            EnvId::FourRoom => ObjectiveVector::from([-1.0, -1.0, -1.0]),
        }
    }

    pub fn default_gamma(self) -> f64 {
        match self {
            EnvId::DstConcave => 0.9,
            EnvId::FourRoom => 0.99,
        }
    }

    pub fn default_timesteps(self) -> usize {
        match self {
            EnvId::DstConcave => 400_000,
            EnvId::FourRoom => 800_000,
        }
    }

    pub fn default_tau(self) -> f64 {
        match self {
            EnvId::DstConcave => 4.0,
            EnvId::FourRoom => 6.0,
        }
    }

    pub fn num_objectives(self) -> usize {
        match self {
            EnvId::DstConcave => 2,
            EnvId::FourRoom => 3,
        }
    }

}

/// An environment layout loaded once and shared by every instance built from it.
#[derive(Clone, Debug)]
pub enum LoadedEnv {
    Dst(Arc<DstMap>),
    FourRoom(Arc<FourRoomMap>),
}

impl LoadedEnv {
    pub fn bundled(id: EnvId) -> Self {
        match id {
            EnvId::DstConcave => LoadedEnv::Dst(Arc::new(DstMap::concave())),
            EnvId::FourRoom => LoadedEnv::FourRoom(Arc::new(FourRoomMap::bundled())),
        }
    }

    /// Bundled layout, or the map file at `map` when given.
    pub fn load(id: EnvId, map: Option<&Path>) -> Result<Self> {
        let Some(path) = map else {
            return Ok(Self::bundled(id));
        };
        Ok(match id {
            EnvId::DstConcave => LoadedEnv::Dst(Arc::new(DstMap::load(path)?)),
            EnvId::FourRoom => LoadedEnv::FourRoom(Arc::new(FourRoomMap::load(path)?)),
        })
    }

    pub fn instance(&self) -> Box<dyn Environment> {
        match self {
            LoadedEnv::Dst(m) => Box::new(DeepSeaTreasure::new(m.clone())),
            LoadedEnv::FourRoom(m) => Box::new(FourRoom::new(m.clone())),
        }
    }

    /// Known optimal front at discount `gamma`, where one exists.
    pub fn true_front(&self, gamma: f64) -> Result<Option<Vec<ObjectiveVector>>> {
        match self {
            LoadedEnv::Dst(m) => dst_true_front(m, gamma).map(Some),
            LoadedEnv::FourRoom(_) => Ok(None),
        }
    }
}

impl fmt::Display for EnvId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.token())
    }
}

impl FromStr for EnvId {
    type Err = MorlError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "dst-concave" | "dst" => Ok(EnvId::DstConcave),
            "four-room" | "fourroom" => Ok(EnvId::FourRoom),
            other => Err(MorlError::Config(format!(
                "unknown environment `{other}` (expected dst-concave or four-room)"
            ))),
        }
    }
}
