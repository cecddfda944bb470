//! A*-guided deep Q-learning over the grid: with probability `xi` an agent
//! follows its planned path, otherwise it acts epsilon-greedily on a
//! learned action-value network trained from replayed experience against a
//! periodically synchronised target copy.

mod env;
mod net;
mod replay;
mod train;

pub use env::{
    greedy_action, select_action, td_target, Action, EnvScenario, GridEnv, RewardParams,
    StepResult, NUM_ACTIONS,
};
pub use net::{Forward, Mlp, Optimizer, OptimizerKind};
pub use replay::{ReplayBuffer, Transition};
pub use train::{
    evaluate_policy, moving_average, train, write_curves_csv, AgdqnConfig, CurvePoint, Rollout,
    TrainOutcome,
};
