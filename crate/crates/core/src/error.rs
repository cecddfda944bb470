use thiserror::Error;

use crate::layout::Cell;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("zone `{0}` does not exist in this map")]
    UnknownZone(String),

    #[error("no path from {start} to {goal}")]
    NoPath { start: Cell, goal: Cell },

    #[error("cell {0} is outside the grid or blocked")]
    BlockedCell(Cell),

    #[error("batch of {size} stops is outside 1..={capacity}")]
    BatchSize { size: usize, capacity: usize },

    #[error("class proportions must be nonnegative and sum to 1 (got sum {sum})")]
    InvalidProportions { sum: f64 },

    #[error("delay caps must satisfy C_A >= C_B >= C_C >= C_D, got {0:?}")]
    CapOrdering([f64; 4]),

    #[error("deadline offsets must be positive and ordered A <= B <= C, D, got {0:?}")]
    DeadlineOrdering([f64; 4]),

    #[error("objective weight {0} is outside [0, 1]")]
    WeightRange(f64),

    #[error("invalid parameter `{field}`: {reason}")]
    InvalidParameter { field: &'static str, reason: String },

    #[error("row {row}: {message}")]
    Parse { row: usize, message: String },

    #[error("missing CSV column `{0}`")]
    MissingColumn(&'static str),

    #[error("deadlock at tick {tick}: {diagnostic}")]
    Deadlock { tick: u64, diagnostic: String },

    #[error("training diverged at episode {episode}: loss {loss}")]
    Divergence { episode: usize, loss: f64 },

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
