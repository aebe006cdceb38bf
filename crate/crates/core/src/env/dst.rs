use std::collections::VecDeque;
use std::path::Path;
use std::sync::Arc;

use super::map::{Cell, GridMap};
use super::{EnvSpec, Environment, Episode, StepOutcome, DEFAULT_MAX_EPISODE_STEPS};
use crate::error::{MorlError, Result};
use crate::pareto::ObjectiveVector;

const CONCAVE_MAP: &str = include_str!("../../maps/dst_concave.map");

/// Deep Sea Treasure layout. States are cell indices `row * cols + col`.
#[derive(Clone, Debug)]
pub struct DstMap {
    grid: GridMap,
    treasure: Vec<Option<f64>>,
}

impl DstMap {
    /// The classic 11x10 concave layout with ten treasures.
    pub fn concave() -> Self {
        Self::from_grid(GridMap::parse(CONCAVE_MAP, Path::new("dst_concave.map")).unwrap())
            .expect("bundled DST map is valid")
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_grid(GridMap::load(path)?)
    }

    pub fn from_grid(grid: GridMap) -> Result<Self> {
        let mut treasure = vec![None; grid.cells.len()];
        for (i, cell) in grid.cells.iter().enumerate() {
            if let Cell::Marker(m) = cell {
                let raw = &grid.legend[m];
                let value: f64 = raw.parse().map_err(|_| {
                    MorlError::Config(format!("treasure `{m}` has non-numeric value `{raw}`"))
                })?;
                if !value.is_finite() {
                    return Err(MorlError::Config(format!("treasure `{m}` is not finite")));
                }
                treasure[i] = Some(value);
            }
        }
        let map = DstMap { grid, treasure };
        let found = map.treasures_by_distance()?;
        if found.is_empty() {
            return Err(MorlError::Config("DST map has no treasure".into()));
        }
        for pair in found.windows(2) {
            if pair[1].value <= pair[0].value {
                return Err(MorlError::Config(
                    "treasure values must strictly increase with distance from the start".into(),
                ));
            }
        }
        Ok(map)
    }

    pub fn rows(&self) -> usize {
        self.grid.rows
    }

    pub fn cols(&self) -> usize {
        self.grid.cols
    }

    pub fn start(&self) -> usize {
        self.grid.start()
    }

    pub fn treasure_at(&self, cell: usize) -> Option<f64> {
        self.treasure[cell]
    }

    /// Pure transition: `(next_state, reward, terminated)`.
    pub fn transition(&self, state: usize, action: usize) -> (usize, ObjectiveVector, bool) {
        let next = self.grid.neighbour(state, action);
        match self.treasure[next] {
            Some(v) => (next, ObjectiveVector::from_finite(&[v, -1.0]), true),
            None => (next, ObjectiveVector::from_finite(&[0.0, -1.0]), false),
        }
    }

    /// Each treasure with its minimal step count, nearest first. Treasure
    /// cells end the episode, so paths never pass through one.
    pub fn treasures_by_distance(&self) -> Result<Vec<Treasure>> {
        let n = self.grid.cells.len();
        let mut dist = vec![usize::MAX; n];
        let start = self.start();
        dist[start] = 0;
        let mut queue = VecDeque::from([start]);
        while let Some(pos) = queue.pop_front() {
            if self.treasure[pos].is_some() {
                continue;
            }
            for a in 0..4 {
                let next = self.grid.neighbour(pos, a);
                if dist[next] == usize::MAX {
                    dist[next] = dist[pos] + 1;
                    queue.push_back(next);
                }
            }
        }
        let mut out = Vec::new();
        for (cell, t) in self.treasure.iter().enumerate() {
            if let Some(value) = *t {
                if dist[cell] == usize::MAX {
                    return Err(MorlError::Contract(format!(
                        "treasure at cell {cell} is unreachable"
                    )));
                }
                out.push(Treasure {
                    cell,
                    value,
                    steps: dist[cell],
                });
            }
        }
        out.sort_by_key(|t| (t.steps, t.cell));
        Ok(out)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Treasure {
    pub cell: usize,
    pub value: f64,
    pub steps: usize,
}

/// Discounted return of the shortest path to each treasure:
/// `(v * gamma^(t-1), -sum_{k<t} gamma^k)`.
///
/// Every treasure is reported, including ones whose discounted point is
/// dominated by a nearer treasure; this is the reference set the indicators
/// are calibrated against.
pub fn dst_true_front(map: &DstMap, gamma: f64) -> Result<Vec<ObjectiveVector>> {
    if !(gamma > 0.0 && gamma <= 1.0) {
        return Err(MorlError::Contract(format!("gamma must lie in (0, 1], got {gamma}")));
    }
    Ok(map
        .treasures_by_distance()?
        .into_iter()
        .map(|t| {
            let time: f64 = (0..t.steps).map(|k| gamma.powi(k as i32)).sum();
            let value = t.value * gamma.powi(t.steps as i32 - 1);
            ObjectiveVector::from_finite(&[value, -time])
        })
        .collect())
}

pub struct DeepSeaTreasure {
    map: Arc<DstMap>,
    spec: EnvSpec,
    episode: Episode,
}

impl DeepSeaTreasure {
    pub fn new(map: Arc<DstMap>) -> Self {
        let spec = EnvSpec {
            name: "dst-concave".into(),
            num_objectives: 2,
            action_count: 4,
            state_count: map.rows() * map.cols(),
            max_episode_steps: DEFAULT_MAX_EPISODE_STEPS,
        };
        let start = map.start();
        let mut env = Self {
            map,
            spec,
            episode: Episode::default(),
        };
        env.episode.begin(start);
        env
    }

    pub fn with_max_episode_steps(mut self, steps: usize) -> Self {
        self.spec.max_episode_steps = steps;
        self
    }

    pub fn map(&self) -> &DstMap {
        &self.map
    }
}

impl Environment for DeepSeaTreasure {
    fn spec(&self) -> &EnvSpec {
        &self.spec
    }

    fn reset(&mut self) -> usize {
        self.episode.begin(self.map.start())
    }

    fn step(&mut self, action: usize) -> Result<StepOutcome> {
        let map = &self.map;
        self.episode
            .advance(&self.spec, action, |s| map.transition(s, action))
    }
}
