//! Grid-warehouse AGV simulation: layouts, order streams, delay-cost
//! accounting, A* routing, priority dispatch rules, a tick-based simulator
//! and an A*-guided deep Q-learning agent.

pub mod agdqn;
pub mod costmodel;
pub mod error;
pub mod layout;
pub mod orders;
pub mod routing;
pub mod scheduler;
pub mod simulator;

pub use error::{Error, Result};
