//! Dispatch rules ordering the pending queue, and capacity-limited batching.

use std::cmp::Ordering;
use std::collections::VecDeque;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::costmodel::delay_cost;
use crate::error::{Error, Result};
use crate::layout::{Cell, GridMap};
use crate::orders::{ClassProfiles, Order};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Rule {
    Fcfs,
    Spt,
    Edt,
    Ldc,
    Pdsp,
    Dcsp,
}

impl Rule {
    pub const ALL: [Rule; 6] = [
        Rule::Fcfs,
        Rule::Spt,
        Rule::Edt,
        Rule::Ldc,
        Rule::Pdsp,
        Rule::Dcsp,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Rule::Fcfs => "FCFS",
            Rule::Spt => "SPT",
            Rule::Edt => "EDT",
            Rule::Ldc => "LDC",
            Rule::Pdsp => "PDSP",
            Rule::Dcsp => "DCSP",
        }
    }
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Rule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Rule::ALL
            .into_iter()
            .find(|r| r.name().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| Error::InvalidParameter {
                field: "rule",
                reason: format!(
                    "unknown rule `{s}`, expected one of fcfs, spt, edt, ldc, pdsp, dcsp"
                ),
            })
    }
}

/// Shortest-path distance in metres from the station to every cell.
#[derive(Clone, Debug)]
pub struct StationDistances {
    width: i32,
    height: i32,
    cell_size: f64,
    steps: Vec<Option<u32>>,
}

impl StationDistances {
    /// Breadth-first search from the station; on a unit grid this equals
    /// the A* length to every reachable cell.
    pub fn new(map: &GridMap) -> Self {
        let mut steps = vec![None; map.cell_count()];
        let start = map.station();
        let mut frontier = VecDeque::from([start]);
        steps[map.index(start)] = Some(0);
        while let Some(c) = frontier.pop_front() {
            let d = steps[map.index(c)].unwrap();
            for n in map.free_neighbors(c) {
                let i = map.index(n);
                if steps[i].is_none() {
                    steps[i] = Some(d + 1);
                    frontier.push_back(n);
                }
            }
        }
        Self {
            width: map.width(),
            height: map.height(),
            cell_size: map.cell_size(),
            steps,
        }
    }

    /// Infinite for unreachable or off-grid cells.
    pub fn get(&self, c: Cell) -> f64 {
        if c.x < 0 || c.y < 0 || c.x >= self.width || c.y >= self.height {
            return f64::INFINITY;
        }
        self.steps[(c.y * self.width + c.x) as usize]
            .map_or(f64::INFINITY, |s| s as f64 * self.cell_size)
    }
}

/// Service latency estimate used by the LDC lookahead: an order at queue
/// position `i` is expected to start after `floor(i / slots) * mean_trip`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LdcLatency {
    /// Orders served per round, fleet size times capacity.
    pub slots: usize,
    /// Mean duration of recently completed trips, s.
    pub mean_trip: f64,
}

impl LdcLatency {
    pub fn at(&self, position: usize) -> f64 {
        (position / self.slots.max(1)) as f64 * self.mean_trip
    }
}

/// Everything a comparator may look at.
#[derive(Clone, Copy, Debug)]
pub struct SortContext<'a> {
    pub now: f64,
    pub profiles: &'a ClassProfiles,
    pub distances: &'a StationDistances,
    pub ldc: LdcLatency,
    /// Look-ahead of the DCSP marginal term, s.
    pub dcsp_horizon: f64,
}

fn by_arrival(a: &Order, b: &Order) -> Ordering {
    a.arrival.total_cmp(&b.arrival)
}

fn ids(orders: &[Order]) -> Vec<u32> {
    orders.iter().map(|o| o.id).collect()
}

/// Arrival order; equal arrivals keep their input order.
pub fn sort_fcfs(pending: &[Order]) -> Vec<u32> {
    let mut v = pending.to_vec();
    v.sort_by(by_arrival);
    ids(&v)
}

/// Nearest pickup first, then arrival.
pub fn sort_spt(pending: &[Order], distances: &StationDistances) -> Vec<u32> {
    let mut v = pending.to_vec();
    v.sort_by(|a, b| {
        distances
            .get(a.pickup)
            .total_cmp(&distances.get(b.pickup))
            .then_with(|| by_arrival(a, b))
            .then(a.id.cmp(&b.id))
    });
    ids(&v)
}

/// Earliest absolute deadline first, then arrival.
pub fn sort_edt(pending: &[Order]) -> Vec<u32> {
    let mut v = pending.to_vec();
    v.sort_by(|a, b| {
        a.deadline
            .total_cmp(&b.deadline)
            .then_with(|| by_arrival(a, b))
            .then(a.id.cmp(&b.id))
    });
    ids(&v)
}

/// Delay cost of `order` if service starts at `at`.
pub fn projected_delay_cost(order: &Order, at: f64, profiles: &ClassProfiles) -> f64 {
    delay_cost(profiles.get(order.class), at - order.arrival)
}

/// Largest projected delay cost first. The projection point of the order
/// at input position `i` is `now + latency.at(i)`; ties go by deadline.
pub fn sort_ldc(
    pending: &[Order],
    now: f64,
    profiles: &ClassProfiles,
    latency: LdcLatency,
) -> Vec<u32> {
    let mut scored: Vec<(f64, Order)> = pending
        .iter()
        .enumerate()
        .map(|(i, o)| (projected_delay_cost(o, now + latency.at(i), profiles), *o))
        .collect();
    scored.sort_by(|(ca, a), (cb, b)| {
        cb.total_cmp(ca)
            .then_with(|| a.deadline.total_cmp(&b.deadline))
            .then(a.id.cmp(&b.id))
    });
    scored.into_iter().map(|(_, o)| o.id).collect()
}

/// Class first (A before D), then tolerance window, then arrival.
pub fn sort_pdsp(pending: &[Order]) -> Vec<u32> {
    let mut v = pending.to_vec();
    v.sort_by(|a, b| {
        a.class
            .cmp(&b.class)
            .then_with(|| a.tolerance().total_cmp(&b.tolerance()))
            .then_with(|| by_arrival(a, b))
            .then(a.id.cmp(&b.id))
    });
    ids(&v)
}

/// Accrued delay cost at `now` plus its growth over the next `horizon` seconds.
pub fn dcsp_score(order: &Order, now: f64, horizon: f64, profiles: &ClassProfiles) -> f64 {
    let accrued = projected_delay_cost(order, now, profiles);
    let ahead = projected_delay_cost(order, now + horizon, profiles);
    accrued + (ahead - accrued)
}

/// Largest DCSP score first, then deadline, then id.
pub fn sort_dcsp(pending: &[Order], now: f64, horizon: f64, profiles: &ClassProfiles) -> Vec<u32> {
    let mut scored: Vec<(f64, Order)> = pending
        .iter()
        .map(|o| (dcsp_score(o, now, horizon, profiles), *o))
        .collect();
    scored.sort_by(|(ca, a), (cb, b)| {
        cb.total_cmp(ca)
            .then_with(|| a.deadline.total_cmp(&b.deadline))
            .then(a.id.cmp(&b.id))
    });
    scored.into_iter().map(|(_, o)| o.id).collect()
}

impl Rule {
    /// Order ids of `pending` in dispatch order.
    pub fn sort(self, pending: &[Order], ctx: &SortContext<'_>) -> Vec<u32> {
        match self {
            Rule::Fcfs => sort_fcfs(pending),
            Rule::Spt => sort_spt(pending, ctx.distances),
            Rule::Edt => sort_edt(pending),
            Rule::Ldc => sort_ldc(pending, ctx.now, ctx.profiles, ctx.ldc),
            Rule::Pdsp => sort_pdsp(pending),
            Rule::Dcsp => sort_dcsp(pending, ctx.now, ctx.dcsp_horizon, ctx.profiles),
        }
    }
}

/// Arrived, unassigned orders in dispatch order.
#[derive(Clone, Debug)]
pub struct DispatchQueue {
    pending: Vec<Order>,
    pub rule: Rule,
    pub last_resort: Option<f64>,
}

impl DispatchQueue {
    pub fn new(rule: Rule) -> Self {
        Self {
            pending: Vec::new(),
            rule,
            last_resort: None,
        }
    }

    /// Appends at the tail; the next resort places it.
    pub fn push(&mut self, order: Order) {
        self.pending.push(order);
    }

    pub fn len(&self) -> usize {
        self.pending.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pending.is_empty()
    }

    pub fn ids(&self) -> Vec<u32> {
        ids(&self.pending)
    }

    pub fn orders(&self) -> &[Order] {
        &self.pending
    }

    pub fn resort(&mut self, ctx: &SortContext<'_>) {
        let order = self.rule.sort(&self.pending, ctx);
        let mut by_id: std::collections::BTreeMap<u32, Order> =
            self.pending.iter().map(|o| (o.id, *o)).collect();
        self.pending = order
            .into_iter()
            .map(|id| by_id.remove(&id).expect("sort is a permutation"))
            .collect();
        self.last_resort = Some(ctx.now);
    }

    /// True when the periodic resort is due at `now`.
    pub fn resort_due(&self, now: f64, interval: f64) -> bool {
        self.last_resort.is_none_or(|t| now - t >= interval)
    }

    /// Removes and returns the first orders that fit `capacity` and
    /// `weight_limit`. An order that would breach the weight limit stays
    /// queued in place.
    pub fn next_batch(&mut self, capacity: usize, weight_limit: f64) -> Vec<Order> {
        let mut batch = Vec::new();
        let mut weight = 0.0;
        let mut kept = Vec::with_capacity(self.pending.len());
        for o in self.pending.drain(..) {
            if batch.len() < capacity && weight + o.weight_kg <= weight_limit {
                weight += o.weight_kg;
                batch.push(o);
            } else {
                kept.push(o);
            }
        }
        self.pending = kept;
        batch
    }
}
