//! Grid environment for the Q-learning agents.
//!
//! Agents act one after another within a tick, so a move into a cell held
//! by another agent is refused (and penalised) instead of colliding. The
//! station is a depot shared by any number of agents.

use std::collections::HashSet;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::costmodel::{delay_cost, leg_energy, CostParams};
use crate::error::Result;
use crate::layout::{generate_layout, Cell, GridMap, WarehouseScale};
use crate::orders::{
    synthesize_stream, ArrivalWindow, ClassProfiles, DeadlineWindows, Order, PriorityClass,
    ProfileParams, SynthesisParams,
};
use crate::routing::{astar, astar_avoiding, order_stops, MAX_STOPS};
use crate::scheduler::sort_pdsp;

use super::net::Mlp;

pub const NUM_ACTIONS: usize = 5;

/// Discriminant order is the argmax tie-break order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Action {
    Up,
    Down,
    Left,
    Right,
    Stay,
}

impl Action {
    pub const ALL: [Action; NUM_ACTIONS] = [
        Action::Up,
        Action::Down,
        Action::Left,
        Action::Right,
        Action::Stay,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn delta(self) -> (i32, i32) {
        match self {
            Action::Up => (0, 1),
            Action::Down => (0, -1),
            Action::Left => (-1, 0),
            Action::Right => (1, 0),
            Action::Stay => (0, 0),
        }
    }

    pub fn apply(self, c: Cell) -> Cell {
        let (dx, dy) = self.delta();
        Cell::new(c.x + dx, c.y + dy)
    }

    /// The move from `from` to an adjacent `to`; `Stay` otherwise.
    pub fn toward(from: Cell, to: Cell) -> Action {
        Action::ALL[..4]
            .iter()
            .copied()
            .find(|a| a.apply(from) == to)
            .unwrap_or(Action::Stay)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RewardParams {
    pub tick: f64,
    pub subgoal: f64,
    pub loop_complete: f64,
    pub blocked: f64,
    /// Per Wh of movement energy.
    pub energy: f64,
}

impl Default for RewardParams {
    fn default() -> Self {
        Self {
            tick: -0.01,
            subgoal: 1.0,
            loop_complete: 5.0,
            blocked: -1.0,
            energy: -0.001,
        }
    }
}

/// A fixed training or evaluation world.
#[derive(Clone, Debug)]
pub struct EnvScenario {
    pub map: GridMap,
    pub agents: usize,
    pub orders: Vec<Order>,
    pub max_ticks: u64,
    pub capacity: usize,
    pub payload_limit: f64,
    pub profiles: ClassProfiles,
    pub cost: CostParams,
    pub rewards: RewardParams,
}

impl EnvScenario {
    pub fn new(map: GridMap, agents: usize, orders: Vec<Order>, max_ticks: u64) -> Result<Self> {
        let dtw = DeadlineWindows::default();
        Ok(Self {
            map,
            agents: agents.max(1),
            orders,
            max_ticks,
            capacity: MAX_STOPS,
            payload_limit: 270.0,
            profiles: ClassProfiles::new(&ProfileParams::default(), &dtw)?,
            cost: CostParams::default(),
            rewards: RewardParams::default(),
        })
    }

    /// 5x5 grid with a partial wall; one order behind the wall. The loop
    /// from the station to the goal and back is 16 moves.
    pub fn single_goal() -> Self {
        let map = GridMap::from_ascii(
            ".....\n\
             .....\n\
             .###.\n\
             .....\n\
             ..S..",
        )
        .expect("static map");
        let goal = Cell::new(2, 4);
        let order = Order {
            id: 1,
            pickup: goal,
            arrival: 0.0,
            deadline: 3600.0,
            weight_kg: 5.0,
            price: 100.0,
            class: PriorityClass::A,
        };
        Self::new(map, 1, vec![order], 100).expect("default profiles are valid")
    }

    /// Small generated warehouse with `orders` dynamic orders arriving
    /// every 0 to 10 s.
    pub fn small_warehouse(orders: usize, agents: usize, seed: u64) -> Result<Self> {
        let map = generate_layout(WarehouseScale::Small, seed);
        let owt = ArrivalWindow::new(0.0, 10.0)?;
        let stream = synthesize_stream(
            orders,
            &map,
            &SynthesisParams::default(),
            owt,
            &DeadlineWindows::default(),
            seed.wrapping_add(17),
        )?;
        let max_ticks = 200 * orders as u64 + 500;
        Self::new(map, agents, stream.orders, max_ticks)
    }

    /// Length of the flattened state vector.
    pub fn state_len(&self) -> usize {
        let plane = self.map.cell_count();
        2 + 2
            + 2 * plane
            + (3 * MAX_STOPS + 2)
            + (3 + MAX_STOPS)
            + 5 * (self.agents - 1)
            + 2
            + 4
            + 4
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum OrderStatus {
    Waiting,
    Assigned,
    Picked,
    Delivered,
}

#[derive(Clone, Debug)]
struct AgentState {
    pos: Cell,
    dir: (i32, i32),
    stops: Vec<Cell>,
    stop_orders: Vec<usize>,
    visited: u8,
}

impl AgentState {
    fn active(&self) -> bool {
        !self.stops.is_empty()
    }

    fn next_stop(&self) -> Option<usize> {
        (0..self.stops.len()).find(|k| self.visited & (1 << k) == 0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepResult {
    pub reward: f64,
    /// The agent completed its loop.
    pub done: bool,
    pub blocked: bool,
}

#[derive(Clone, Debug)]
pub struct GridEnv<'a> {
    scen: &'a EnvScenario,
    tick: u64,
    agents: Vec<AgentState>,
    status: Vec<OrderStatus>,
    delivered: usize,
    /// Order ids in pickup order.
    pub pickups: Vec<u32>,
    /// Cells visited by each agent, starting at the station.
    pub paths: Vec<Vec<Cell>>,
}

impl<'a> GridEnv<'a> {
    pub fn new(scen: &'a EnvScenario) -> Self {
        let station = scen.map.station();
        let mut env = Self {
            scen,
            tick: 0,
            agents: vec![
                AgentState {
                    pos: station,
                    dir: (0, 0),
                    stops: Vec::new(),
                    stop_orders: Vec::new(),
                    visited: 0,
                };
                scen.agents
            ],
            status: vec![OrderStatus::Waiting; scen.orders.len()],
            delivered: 0,
            pickups: Vec::new(),
            paths: vec![vec![station]; scen.agents],
        };
        env.assign_idle();
        env
    }

    pub fn tick(&self) -> u64 {
        self.tick
    }

    pub fn agents(&self) -> usize {
        self.agents.len()
    }

    pub fn position(&self, i: usize) -> Cell {
        self.agents[i].pos
    }

    pub fn is_active(&self, i: usize) -> bool {
        self.agents[i].active()
    }

    pub fn finished(&self) -> bool {
        self.delivered == self.scen.orders.len()
    }

    pub fn truncated(&self) -> bool {
        self.tick >= self.scen.max_ticks
    }

    /// Ends the tick and hands new batches to idle agents at the station.
    pub fn end_tick(&mut self) {
        self.tick += 1;
        self.assign_idle();
    }

    fn assign_idle(&mut self) {
        let station = self.scen.map.station();
        for i in 0..self.agents.len() {
            if self.agents[i].active() || self.agents[i].pos != station {
                continue;
            }
            let now = self.tick as f64;
            let waiting: Vec<Order> = self
                .scen
                .orders
                .iter()
                .enumerate()
                .filter(|(k, o)| self.status[*k] == OrderStatus::Waiting && o.arrival <= now)
                .map(|(_, o)| *o)
                .collect();
            if waiting.is_empty() {
                return;
            }
            let mut batch = Vec::new();
            let mut weight = 0.0;
            for id in sort_pdsp(&waiting) {
                let k = self
                    .scen
                    .orders
                    .iter()
                    .position(|o| o.id == id)
                    .expect("known id");
                let o = &self.scen.orders[k];
                if batch.len() < self.scen.capacity
                    && weight + o.weight_kg <= self.scen.payload_limit
                {
                    weight += o.weight_kg;
                    batch.push(k);
                }
            }
            let cells: Vec<Cell> = batch.iter().map(|&k| self.scen.orders[k].pickup).collect();
            let Ok(trip) = order_stops(&self.scen.map, &cells, station) else {
                continue;
            };
            for &k in &batch {
                self.status[k] = OrderStatus::Assigned;
            }
            let agent = &mut self.agents[i];
            agent.stop_orders = trip.visit_order.iter().map(|&j| batch[j]).collect();
            agent.stops = trip.stops;
            agent.visited = 0;
        }
    }

    fn others(&self, i: usize) -> HashSet<Cell> {
        let station = self.scen.map.station();
        self.agents
            .iter()
            .enumerate()
            .filter(|(j, a)| *j != i && a.pos != station)
            .map(|(_, a)| a.pos)
            .collect()
    }

    /// Next sub-goal, or the station once every stop is visited.
    pub fn target(&self, i: usize) -> Cell {
        let a = &self.agents[i];
        a.next_stop()
            .map_or(self.scen.map.station(), |k| a.stops[k])
    }

    pub fn valid_actions(&self, i: usize) -> [bool; NUM_ACTIONS] {
        let pos = self.agents[i].pos;
        Action::ALL.map(|a| a == Action::Stay || self.scen.map.is_free(a.apply(pos)))
    }

    /// First move of the shortest path to the target that avoids other agents.
    pub fn hint(&self, i: usize) -> Action {
        let pos = self.agents[i].pos;
        let target = self.target(i);
        if pos == target {
            return Action::Stay;
        }
        let path = astar_avoiding(&self.scen.map, pos, target, &self.others(i))
            .or_else(|_| astar(&self.scen.map, pos, target));
        match path {
            Ok(p) if p.cells.len() > 1 => Action::toward(pos, p.cells[1]),
            _ => Action::Stay,
        }
    }

    /// Flattened observation of agent `i`:
    /// position (2), heading (2), obstacle plane, pending-shelf plane,
    /// sub-goals with presence flags (12) and station (2), target order
    /// class, deadline slack and delay cost (3), visited bits (4), other
    /// agents' position, heading and presence (5 each), offset to the
    /// target (2), planner move one-hot (4) and blocked neighbours (4).
    pub fn encode(&self, i: usize) -> Vec<f64> {
        let map = &self.scen.map;
        let (w, h) = (map.width(), map.height());
        let nx = |x: i32| {
            if w > 1 {
                x as f64 / (w - 1) as f64
            } else {
                0.0
            }
        };
        let ny = |y: i32| {
            if h > 1 {
                y as f64 / (h - 1) as f64
            } else {
                0.0
            }
        };
        let a = &self.agents[i];
        let mut s = Vec::with_capacity(self.scen.state_len());
        s.extend([nx(a.pos.x), ny(a.pos.y), a.dir.0 as f64, a.dir.1 as f64]);

        let plane = map.cell_count();
        let base = s.len();
        s.resize(base + 2 * plane, 0.0);
        for c in map.obstacles() {
            s[base + map.index(c)] = 1.0;
        }
        for (k, o) in self.scen.orders.iter().enumerate() {
            if matches!(self.status[k], OrderStatus::Waiting | OrderStatus::Assigned)
                && o.arrival <= self.tick as f64
            {
                s[base + plane + map.index(o.pickup)] = 1.0;
            }
        }

        for k in 0..MAX_STOPS {
            match a.stops.get(k) {
                Some(c) => s.extend([nx(c.x), ny(c.y), 1.0]),
                None => s.extend([0.0, 0.0, 0.0]),
            }
        }
        let station = map.station();
        s.extend([nx(station.x), ny(station.y)]);

        match a.next_stop() {
            Some(k) => {
                let o = &self.scen.orders[a.stop_orders[k]];
                let now = self.tick as f64;
                let profile = self.scen.profiles.get(o.class);
                let slack = ((o.deadline - now) / o.tolerance()).clamp(0.0, 1.0);
                let cost = if profile.cap > 0.0 {
                    delay_cost(profile, now - o.arrival) / profile.cap
                } else {
                    0.0
                };
                s.extend([o.class.index() as f64 / 3.0, slack, cost]);
            }
            None => s.extend([0.0, 0.0, 0.0]),
        }
        for k in 0..MAX_STOPS {
            s.push(if a.visited & (1 << k) != 0 { 1.0 } else { 0.0 });
        }

        for (j, other) in self.agents.iter().enumerate() {
            if j != i {
                s.extend([
                    nx(other.pos.x),
                    ny(other.pos.y),
                    other.dir.0 as f64,
                    other.dir.1 as f64,
                    1.0,
                ]);
            }
        }

        let target = self.target(i);
        s.extend([nx(target.x) - nx(a.pos.x), ny(target.y) - ny(a.pos.y)]);

        let hint = self.hint(i);
        for act in &Action::ALL[..4] {
            s.push(if *act == hint { 1.0 } else { 0.0 });
        }
        let others = self.others(i);
        for act in &Action::ALL[..4] {
            let n = act.apply(a.pos);
            s.push(if !map.is_free(n) || others.contains(&n) {
                1.0
            } else {
                0.0
            });
        }
        debug_assert_eq!(s.len(), self.scen.state_len());
        s
    }

    /// Applies `action` for agent `i`. Invalid moves are treated as `Stay`.
    pub fn step(&mut self, i: usize, action: Action) -> StepResult {
        let r = self.scen.rewards;
        let map = &self.scen.map;
        let station = map.station();
        let mut reward = r.tick;
        let mut blocked = false;
        let from = self.agents[i].pos;
        let to = action.apply(from);
        if action != Action::Stay && map.is_free(to) {
            if to != station && self.others(i).contains(&to) {
                reward += r.blocked;
                blocked = true;
                self.agents[i].dir = (0, 0);
            } else {
                let payload: f64 = self.agents[i]
                    .stop_orders
                    .iter()
                    .filter(|&&k| self.status[k] == OrderStatus::Picked)
                    .map(|&k| self.scen.orders[k].weight_kg)
                    .sum();
                reward += r.energy
                    * leg_energy(
                        self.scen.cost.self_weight + payload,
                        map.cell_size(),
                        &self.scen.cost,
                    );
                self.agents[i].pos = to;
                self.agents[i].dir = action.delta();
                self.paths[i].push(to);
            }
        } else {
            self.agents[i].dir = (0, 0);
        }

        let pos = self.agents[i].pos;
        // Consecutive stops on one cell are all served on arrival.
        while let Some(k) = self.agents[i].next_stop() {
            if self.agents[i].stops[k] != pos {
                break;
            }
            self.agents[i].visited |= 1 << k;
            let order = self.agents[i].stop_orders[k];
            self.status[order] = OrderStatus::Picked;
            self.pickups.push(self.scen.orders[order].id);
            reward += r.subgoal;
        }
        let mut done = false;
        let agent = &self.agents[i];
        if agent.active() && agent.next_stop().is_none() && pos == station {
            reward += r.loop_complete;
            for k in std::mem::take(&mut self.agents[i].stop_orders) {
                self.status[k] = OrderStatus::Delivered;
                self.delivered += 1;
            }
            self.agents[i].stops.clear();
            self.agents[i].visited = 0;
            // The idle agent takes no actions, so nothing is learned about
            // the state between loops; each loop is its own episode.
            done = true;
        }
        StepResult {
            reward,
            done,
            blocked,
        }
    }
}

/// Chooses an action: the planner's move with probability `xi`, otherwise
/// a uniformly random valid action with probability `epsilon`, otherwise
/// the valid action with the largest Q value (earliest action on ties).
#[allow(clippy::too_many_arguments)]
pub fn select_action<R: Rng + ?Sized>(
    q: &Mlp,
    state: &[f64],
    valid: &[bool; NUM_ACTIONS],
    epsilon: f64,
    xi: f64,
    hint: Action,
    rng: &mut R,
) -> Action {
    if xi > 0.0 && rng.gen::<f64>() < xi {
        return hint;
    }
    if epsilon > 0.0 && rng.gen::<f64>() < epsilon {
        let choices: Vec<Action> = Action::ALL
            .into_iter()
            .filter(|a| valid[a.index()])
            .collect();
        return choices[rng.gen_range(0..choices.len())];
    }
    greedy_action(&q.q_values(state), valid)
}

/// Valid action with the largest value; earliest in `Action::ALL` on ties.
pub fn greedy_action(q: &[f64], valid: &[bool; NUM_ACTIONS]) -> Action {
    let mut best: Option<(Action, f64)> = None;
    for a in Action::ALL {
        if valid[a.index()] && best.is_none_or(|(_, v)| q[a.index()] > v) {
            best = Some((a, q[a.index()]));
        }
    }
    best.map_or(Action::Stay, |(a, _)| a)
}

/// Bellman target: `reward` if terminal, otherwise `reward + gamma * max`
/// over the actions valid in the next state.
pub fn td_target(
    reward: f64,
    next_q: &[f64],
    next_valid: &[bool; NUM_ACTIONS],
    done: bool,
    gamma: f64,
) -> f64 {
    if done {
        return reward;
    }
    let best = next_q
        .iter()
        .zip(next_valid)
        .filter(|(_, v)| **v)
        .map(|(q, _)| *q)
        .fold(f64::NEG_INFINITY, f64::max);
    if best.is_finite() {
        reward + gamma * best
    } else {
        reward
    }
}
