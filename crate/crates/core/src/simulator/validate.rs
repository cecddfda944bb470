use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use super::trace::SimTrace;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ViolationCode {
    /// A trip walk is not a chain of adjacent cells from and to the station.
    FlowConservation,
    /// An order is carried zero times or more than once.
    Assignment,
    /// A trip does not visit its stops in one closed walk.
    Subtour,
    /// More orders in a trip than the vehicle holds.
    Capacity,
    /// Trip payload above the weight limit.
    PayloadWeight,
    /// Running time between recharges above the battery budget.
    Battery,
    /// Pickup before arrival or delivery before pickup.
    Temporal,
    /// Class deadline offsets out of order.
    ClassDeadline,
    /// Objective weight outside [0, 1].
    WeightRange,
    /// Delay caps out of order.
    CapOrdering,
    /// Two AGVs in one non-station cell at the same tick.
    Collision,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub code: ViolationCode,
    pub detail: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}: {}", self.code, self.detail)
    }
}

/// Checks a finished trace against the routing, assignment, capacity,
/// battery and timing constraints. Empty on a correct run.
pub fn validate_constraints(trace: &SimTrace) -> Vec<Violation> {
    let mut out = Vec::new();
    let mut push = |code, detail: String| out.push(Violation { code, detail });
    let lim = &trace.limits;
    let station = lim.station;

    let weights: BTreeMap<u32, f64> = trace.orders.iter().map(|o| (o.id, o.weight_kg)).collect();
    let mut carried: BTreeMap<u32, usize> = trace.orders.iter().map(|o| (o.id, 0)).collect();

    for (t, trip) in trace.trips.iter().enumerate() {
        let walk = &trip.walk;
        let closed = walk.first() == Some(&station) && walk.last() == Some(&station);
        let chained = walk
            .windows(2)
            .all(|w| w[0] == w[1] || w[0].is_adjacent(w[1]));
        if !closed || !chained {
            push(
                ViolationCode::FlowConservation,
                format!(
                    "trip {t} (AGV {}) walk is not a connected station loop",
                    trip.agv
                ),
            );
        }
        // Stops must appear in order along the walk; repeated stops may share a cell.
        let mut j = 0;
        let in_order = trip.stops.iter().all(|s| {
            while j < walk.len() && walk[j] != *s {
                j += 1;
            }
            j < walk.len()
        });
        if !in_order {
            push(
                ViolationCode::Subtour,
                format!(
                    "trip {t} (AGV {}) does not visit its stops in one walk",
                    trip.agv
                ),
            );
        }
        if trip.order_ids.len() > lim.capacity {
            push(
                ViolationCode::Capacity,
                format!(
                    "trip {t} carries {} orders, capacity {}",
                    trip.order_ids.len(),
                    lim.capacity
                ),
            );
        }
        let payload: f64 = trip.order_ids.iter().filter_map(|id| weights.get(id)).sum();
        if payload > lim.payload_limit {
            push(
                ViolationCode::PayloadWeight,
                format!(
                    "trip {t} payload {payload} kg exceeds {} kg",
                    lim.payload_limit
                ),
            );
        }
        for id in &trip.order_ids {
            *carried.entry(*id).or_insert(0) += 1;
        }
    }
    for (id, n) in &carried {
        if *n != 1 || !weights.contains_key(id) {
            push(
                ViolationCode::Assignment,
                format!("order {id} carried {n} times"),
            );
        }
    }

    for c in &trace.battery_cycles {
        if c.running_seconds > lim.battery_budget {
            push(
                ViolationCode::Battery,
                format!(
                    "AGV {} ran {} s on one charge, budget {} s",
                    c.agv, c.running_seconds, lim.battery_budget
                ),
            );
        }
    }

    let arrivals: BTreeMap<u32, f64> = trace.orders.iter().map(|o| (o.id, o.arrival)).collect();
    for o in &trace.outcomes {
        let arrival = arrivals.get(&o.id).copied().unwrap_or(f64::NEG_INFINITY);
        if o.pickup < arrival || o.delivery < o.pickup {
            push(
                ViolationCode::Temporal,
                format!(
                    "order {} arrival {arrival}, pickup {}, delivery {}",
                    o.id, o.pickup, o.delivery
                ),
            );
        }
    }

    let [a, b, c, d] = lim.dtw_hours;
    if !(a <= b && b <= c && b <= d) {
        push(
            ViolationCode::ClassDeadline,
            format!("deadline offsets {:?} out of order", lim.dtw_hours),
        );
    }
    if !(0.0..=1.0).contains(&lim.w_t) {
        push(ViolationCode::WeightRange, format!("w_t = {}", lim.w_t));
    }
    let [ca, cb, cc, cd] = lim.caps;
    if !(ca >= cb && cb >= cc && cc >= cd) {
        push(
            ViolationCode::CapOrdering,
            format!("caps {:?} out of order", lim.caps),
        );
    }
    for (tick, cell) in &trace.collisions {
        push(
            ViolationCode::Collision,
            format!("two AGVs at {cell} on tick {tick}"),
        );
    }
    out
}
