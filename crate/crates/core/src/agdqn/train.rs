use std::io::Write;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::layout::Cell;

use super::env::{greedy_action, select_action, td_target, EnvScenario, GridEnv, NUM_ACTIONS};
use super::net::{Mlp, Optimizer, OptimizerKind};
use super::replay::{ReplayBuffer, Transition};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AgdqnConfig {
    pub episodes: usize,
    pub gamma: f64,
    pub epsilon_start: f64,
    /// Multiplicative decay applied after every environment step.
    pub epsilon_decay: f64,
    pub epsilon_min: f64,
    pub xi_start: f64,
    /// Episodes over which guidance decays linearly to zero.
    pub xi_decay_episodes: usize,
    pub buffer_capacity: usize,
    pub batch_size: usize,
    /// Learning steps between target-network copies.
    pub target_sync: usize,
    pub hidden: usize,
    pub learning_rate: f64,
    pub optimizer: OptimizerKind,
    /// Environment steps per learning step.
    pub learn_every: usize,
    pub divergence_loss: f64,
    pub seed: u64,
}

impl Default for AgdqnConfig {
    fn default() -> Self {
        Self {
            episodes: 500,
            gamma: 0.95,
            epsilon_start: 1.0,
            epsilon_decay: 0.995,
            epsilon_min: 0.05,
            xi_start: 0.3,
            xi_decay_episodes: 250,
            buffer_capacity: 10_000,
            batch_size: 64,
            target_sync: 200,
            hidden: 64,
            learning_rate: 1e-3,
            optimizer: OptimizerKind::Adam,
            learn_every: 1,
            divergence_loss: 1e6,
            seed: 0,
        }
    }
}

impl AgdqnConfig {
    pub fn validate(&self) -> Result<()> {
        let unit = [
            ("gamma", self.gamma),
            ("epsilon_start", self.epsilon_start),
            ("epsilon_decay", self.epsilon_decay),
            ("epsilon_min", self.epsilon_min),
            ("xi_start", self.xi_start),
        ];
        for (field, v) in unit {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::InvalidParameter {
                    field,
                    reason: format!("must lie in [0, 1], got {v}"),
                });
            }
        }
        let positive = [
            ("batch_size", self.batch_size),
            ("buffer_capacity", self.buffer_capacity),
            ("target_sync", self.target_sync),
            ("hidden", self.hidden),
            ("learn_every", self.learn_every),
        ];
        for (field, v) in positive {
            if v == 0 {
                return Err(Error::InvalidParameter {
                    field,
                    reason: "must be > 0".into(),
                });
            }
        }
        if !(self.learning_rate > 0.0) {
            return Err(Error::InvalidParameter {
                field: "learning_rate",
                reason: format!("must be > 0, got {}", self.learning_rate),
            });
        }
        Ok(())
    }

    /// Guidance probability during `episode` (0-based).
    pub fn xi_at(&self, episode: usize) -> f64 {
        if self.xi_decay_episodes == 0 {
            return 0.0;
        }
        self.xi_start * (1.0 - episode as f64 / self.xi_decay_episodes as f64).max(0.0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub episode: usize,
    pub cumulative_reward: f64,
    /// NaN before the first learning step.
    pub mean_loss: f64,
    pub epsilon: f64,
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    pub q: Mlp,
    pub curves: Vec<CurvePoint>,
}

/// Q-learner state shared across episodes.
struct Learner {
    online: Mlp,
    target: Mlp,
    optimizer: Optimizer,
    buffer: ReplayBuffer,
    learn_steps: usize,
}

impl Learner {
    /// One minibatch step on the mean squared TD error; returns that error.
    fn learn(&mut self, cfg: &AgdqnConfig, rng: &mut ChaCha8Rng) -> f64 {
        let batch = self.buffer.sample(cfg.batch_size, rng);
        let scale = 1.0 / batch.len() as f64;
        let mut grad = vec![0.0; self.online.num_params()];
        let mut loss = 0.0;
        for t in batch {
            let next: Vec<f64> = t.next_state.iter().map(|v| *v as f64).collect();
            let y = td_target(
                t.reward,
                &self.target.q_values(&next),
                &t.next_valid,
                t.done,
                cfg.gamma,
            );
            let s: Vec<f64> = t.state.iter().map(|v| *v as f64).collect();
            loss += self
                .online
                .accumulate_gradient(&s, t.action, y, scale, &mut grad)
                * scale;
        }
        let mut params = self.online.params();
        self.optimizer.step(&mut params, &grad);
        self.online.set_params(&params).expect("same shape");
        self.learn_steps += 1;
        if self.learn_steps.is_multiple_of(cfg.target_sync) {
            self.target = self.online.clone();
        }
        loss
    }
}

fn to_f32(v: &[f64]) -> Vec<f32> {
    v.iter().map(|x| *x as f32).collect()
}

/// Guided epsilon-greedy Q-learning with replay and a target network.
pub fn train(cfg: &AgdqnConfig, scen: &EnvScenario) -> Result<TrainOutcome> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let online = Mlp::new(scen.state_len(), cfg.hidden, NUM_ACTIONS, &mut rng);
    let mut learner = Learner {
        target: online.clone(),
        optimizer: Optimizer::new(cfg.optimizer, cfg.learning_rate, online.num_params()),
        online,
        buffer: ReplayBuffer::new(cfg.buffer_capacity),
        learn_steps: 0,
    };
    let mut epsilon = cfg.epsilon_start;
    let mut env_steps = 0usize;
    let mut curves = Vec::with_capacity(cfg.episodes);

    for episode in 0..cfg.episodes {
        let xi = cfg.xi_at(episode);
        let mut env = GridEnv::new(scen);
        let mut total = 0.0;
        let (mut loss_sum, mut loss_n) = (0.0, 0usize);
        while !env.finished() && !env.truncated() {
            for i in 0..env.agents() {
                if !env.is_active(i) {
                    continue;
                }
                let state = env.encode(i);
                let valid = env.valid_actions(i);
                let action = select_action(
                    &learner.online,
                    &state,
                    &valid,
                    epsilon,
                    xi,
                    env.hint(i),
                    &mut rng,
                );
                let step = env.step(i, action);
                total += step.reward;
                learner.buffer.push(Transition {
                    state: to_f32(&state),
                    action: action.index(),
                    reward: step.reward,
                    next_state: to_f32(&env.encode(i)),
                    next_valid: env.valid_actions(i),
                    done: step.done,
                });
                env_steps += 1;
                epsilon = (epsilon * cfg.epsilon_decay).max(cfg.epsilon_min);
                if learner.buffer.len() >= cfg.batch_size && env_steps.is_multiple_of(cfg.learn_every) {
                    let loss = learner.learn(cfg, &mut rng);
                    if !(loss <= cfg.divergence_loss) {
                        return Err(Error::Divergence { episode, loss });
                    }
                    loss_sum += loss;
                    loss_n += 1;
                }
            }
            env.end_tick();
        }
        log::debug!("episode {episode}: reward {total:.3}, epsilon {epsilon:.3}");
        curves.push(CurvePoint {
            episode,
            cumulative_reward: total,
            mean_loss: if loss_n > 0 {
                loss_sum / loss_n as f64
            } else {
                f64::NAN
            },
            epsilon,
        });
    }
    Ok(TrainOutcome {
        q: learner.online,
        curves,
    })
}

/// Result of a greedy rollout.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Rollout {
    /// Cells occupied by each agent, one entry per move.
    pub paths: Vec<Vec<Cell>>,
    /// Order ids in pickup order.
    pub order_sequence: Vec<u32>,
    pub completed: bool,
    pub ticks: u64,
    pub blocked_moves: usize,
    /// Ticks at which two agents shared a non-station cell.
    pub collisions: usize,
}

impl Rollout {
    /// Moves made by agent `i`.
    pub fn path_length(&self, i: usize) -> usize {
        self.paths[i].len().saturating_sub(1)
    }
}

/// Greedy rollout of `q` in `scen` until all orders are delivered or the
/// tick limit is reached.
pub fn evaluate_policy(q: &Mlp, scen: &EnvScenario) -> Rollout {
    let mut env = GridEnv::new(scen);
    let station = scen.map.station();
    let mut blocked_moves = 0;
    let mut collisions = 0;
    while !env.finished() && !env.truncated() {
        for i in 0..env.agents() {
            if env.is_active(i) {
                let action = greedy_action(&q.q_values(&env.encode(i)), &env.valid_actions(i));
                if env.step(i, action).blocked {
                    blocked_moves += 1;
                }
            }
        }
        let mut cells: Vec<Cell> = (0..env.agents())
            .map(|i| env.position(i))
            .filter(|c| *c != station)
            .collect();
        cells.sort();
        collisions += cells.windows(2).filter(|w| w[0] == w[1]).count();
        env.end_tick();
    }
    Rollout {
        completed: env.finished(),
        ticks: env.tick(),
        order_sequence: env.pickups.clone(),
        paths: env.paths.clone(),
        blocked_moves,
        collisions,
    }
}

/// Trailing mean over at most `window` values.
pub fn moving_average(values: &[f64], window: usize) -> Vec<f64> {
    let window = window.max(1);
    let mut out = Vec::with_capacity(values.len());
    let mut sum = 0.0;
    for i in 0..values.len() {
        sum += values[i];
        if i >= window {
            sum -= values[i - window];
        }
        out.push(sum / (i + 1).min(window) as f64);
    }
    out
}

/// `episode,cumulativeReward,meanLoss,epsilon` with a header.
pub fn write_curves_csv<W: Write>(writer: W, curves: &[CurvePoint]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["episode", "cumulativeReward", "meanLoss", "epsilon"])?;
    for c in curves {
        w.write_record([
            c.episode.to_string(),
            format!("{:?}", c.cumulative_reward),
            format!("{:?}", c.mean_loss),
            format!("{:?}", c.epsilon),
        ])?;
    }
    w.flush()?;
    Ok(())
}
