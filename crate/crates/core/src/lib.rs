//! Tabular multi-objective reinforcement learning benchmark.
//!
//! * [`pareto`] and [`indicators`]: dominance, non-dominated archives,
//!   hypervolume, sparsity, cardinality and IGD.
//! * [`env`]: Deep Sea Treasure (concave) and Four-Room gridworlds.
//! * [`scalarise`] and [`moq`]: single-policy MO Q-learning with linear or
//!   Chebyshev action selection.
//! * [`pql`]: Pareto Q-learning over set-valued Q estimates.
//! * [`sweep`]: the outer-loop weight sweep, evaluation and seed aggregation.
//! * [`config`] and [`io`]: run configuration files and result persistence.

pub mod config;
pub mod env;
pub mod error;
pub mod indicators;
pub mod io;
pub mod moq;
pub mod pareto;
pub mod pql;
pub mod rng;
pub mod scalarise;
pub mod sweep;

pub use error::{MorlError, Result};
pub use pareto::{dominates, nondominated_filter, ObjectiveVector, ParetoArchive};
