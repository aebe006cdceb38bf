use std::path::Path;
use std::sync::Arc;

use super::map::{Cell, GridMap};
use super::{EnvSpec, Environment, Episode, StepOutcome, DEFAULT_MAX_EPISODE_STEPS};
use crate::error::{MorlError, Result};
use crate::pareto::ObjectiveVector;

const BUNDLED_MAP: &str = include_str!("../../maps/four_room.map");
const MAX_ITEMS: usize = 16;
pub const NUM_SHAPES: usize = 3;

/// Four-room layout with collectable items of three shapes.
///
/// A state packs the agent cell and the collected-item bitmask:
/// `cell << item_count | mask`.
#[derive(Clone, Debug)]
pub struct FourRoomMap {
    grid: GridMap,
    /// Item index per cell.
    item_at: Vec<Option<usize>>,
    /// Shape (objective index) per item.
    item_shape: Vec<usize>,
    goal: usize,
}

impl FourRoomMap {
    pub fn bundled() -> Self {
        Self::from_grid(GridMap::parse(BUNDLED_MAP, Path::new("four_room.map")).unwrap())
            .expect("bundled four-room map is valid")
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_grid(GridMap::load(path)?)
    }

    pub fn from_grid(grid: GridMap) -> Result<Self> {
        let goals: Vec<usize> = (0..grid.cells.len())
            .filter(|&i| grid.cells[i] == Cell::Goal)
            .collect();
        let goal = match goals.as_slice() {
            [g] => *g,
            _ => return Err(MorlError::Config("four-room map needs exactly one goal `G`".into())),
        };
        let mut item_at = vec![None; grid.cells.len()];
        let mut item_shape = Vec::new();
        for (i, cell) in grid.cells.iter().enumerate() {
            if let Cell::Marker(m) = cell {
                let raw = &grid.legend[m];
                let shape: usize = raw
                    .parse()
                    .ok()
                    .filter(|s| *s < NUM_SHAPES)
                    .ok_or_else(|| {
                        MorlError::Config(format!(
                            "item `{m}` must map to a shape index below {NUM_SHAPES}, got `{raw}`"
                        ))
                    })?;
                item_at[i] = Some(item_shape.len());
                item_shape.push(shape);
            }
        }
        if item_shape.len() > MAX_ITEMS {
            return Err(MorlError::Config(format!(
                "at most {MAX_ITEMS} items are supported, found {}",
                item_shape.len()
            )));
        }
        Ok(FourRoomMap {
            grid,
            item_at,
            item_shape,
            goal,
        })
    }

    pub fn item_count(&self) -> usize {
        self.item_shape.len()
    }

    pub fn items_of_shape(&self, shape: usize) -> usize {
        self.item_shape.iter().filter(|s| **s == shape).count()
    }

    pub fn cell_count(&self) -> usize {
        self.grid.cells.len()
    }

    pub fn state_count(&self) -> usize {
        self.cell_count() << self.item_count()
    }

    pub fn encode(&self, cell: usize, mask: u32) -> usize {
        (cell << self.item_count()) | mask as usize
    }

    pub fn decode(&self, state: usize) -> (usize, u32) {
        let n = self.item_count();
        (state >> n, (state & ((1 << n) - 1)) as u32)
    }

    pub fn start_state(&self) -> usize {
        self.encode(self.grid.start(), 0)
    }

    pub fn goal(&self) -> usize {
        self.goal
    }

    pub fn is_wall(&self, cell: usize) -> bool {
        self.grid.cells[cell] == Cell::Wall
    }

    /// Pure transition: `(next_state, reward, terminated)`.
    pub fn transition(&self, state: usize, action: usize) -> (usize, ObjectiveVector, bool) {
        let (cell, mut mask) = self.decode(state);
        let next = self.grid.neighbour(cell, action);
        let mut reward = [0.0; NUM_SHAPES];
        if let Some(item) = self.item_at[next] {
            if mask & (1 << item) == 0 {
                mask |= 1 << item;
                reward[self.item_shape[item]] = 1.0;
            }
        }
        (
            self.encode(next, mask),
            ObjectiveVector::from_finite(&reward),
            next == self.goal,
        )
    }
}

pub struct FourRoom {
    map: Arc<FourRoomMap>,
    spec: EnvSpec,
    episode: Episode,
}

impl FourRoom {
    pub fn new(map: Arc<FourRoomMap>) -> Self {
        let spec = EnvSpec {
            name: "four-room".into(),
            num_objectives: NUM_SHAPES,
            action_count: 4,
            state_count: map.state_count(),
            max_episode_steps: DEFAULT_MAX_EPISODE_STEPS,
        };
        let start = map.start_state();
        let mut env = Self {
            map,
            spec,
            episode: Episode::default(),
        };
        env.episode.begin(start);
        env
    }

    pub fn map(&self) -> &FourRoomMap {
        &self.map
    }
}

impl Environment for FourRoom {
    fn spec(&self) -> &EnvSpec {
        &self.spec
    }

    fn reset(&mut self) -> usize {
        self.episode.begin(self.map.start_state())
    }

    fn step(&mut self, action: usize) -> Result<StepOutcome> {
        let map = &self.map;
        self.episode
            .advance(&self.spec, action, |s| map.transition(s, action))
    }
}
