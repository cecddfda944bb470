//! Tick-based fleet simulation: one tick is one second and one cell.

mod kpi;
mod trace;
mod validate;

use std::collections::{BTreeMap, HashSet, VecDeque};

use serde::{Deserialize, Serialize};

use crate::costmodel::{
    delay_cost, delay_time, inventory_cost, leg_energy, unit_inventory_cost, waiting_time,
    CostParams, OrderServiceRecord,
};
use crate::error::{Error, Result};
use crate::layout::{generate_layout, Cell, GridMap, WarehouseScale};
use crate::orders::{
    synthesize_stream, ArrivalWindow, ClassProfiles, DeadlineWindows, Order, OrderStream,
    ProfileParams, SynthesisParams,
};
use crate::routing::{
    astar, astar_avoiding, order_stops, resolve_moves, MoveOutcome, MoveRequest, Path, MAX_STOPS,
};
use crate::scheduler::{DispatchQueue, LdcLatency, Rule, SortContext, StationDistances};

pub use kpi::{service_level, FleetTotals, KpiReport};
pub use trace::{
    collisions_from_events, read_trace_csv, station_from_events, write_trace_csv, BatteryCycle,
    EventKind, OrderOutcome, SimTrace, TraceEvent, TraceLimits, TripRecord,
};
pub use validate::{validate_constraints, Violation, ViolationCode};

/// Completed trips averaged for the LDC latency estimate.
const RECENT_TRIPS: usize = 20;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    pub scale: WarehouseScale,
    pub fleet_size: usize,
    pub order_quantity: usize,
    pub owt: ArrivalWindow,
    pub dtw: DeadlineWindows,
    pub cost: CostParams,
    pub profiles: ProfileParams,
    pub synthesis: SynthesisParams,
    pub rule: Rule,
    pub seed: u64,
    /// Orders per trip.
    pub capacity: usize,
    /// kg per trip.
    pub payload_limit: f64,
    /// s between periodic queue resorts.
    pub resort_interval: f64,
    /// Consecutive waits before a leg is re-planned around other AGVs.
    pub replan_after: u32,
    /// Ticks without any movement or service before aborting.
    pub deadlock_ticks: u64,
    /// Derive the holding cost rate from the stream's total value.
    pub uihc_from_stream: bool,
    /// Log per-tick move and wait events.
    pub record_moves: bool,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            scale: WarehouseScale::Medium,
            fleet_size: 3,
            order_quantity: 500,
            owt: ArrivalWindow { lo: 0.0, hi: 5.0 },
            dtw: DeadlineWindows::default(),
            cost: CostParams::default(),
            profiles: ProfileParams::default(),
            synthesis: SynthesisParams::default(),
            rule: Rule::Pdsp,
            seed: 0,
            capacity: MAX_STOPS,
            payload_limit: 270.0,
            resort_interval: 10.0,
            replan_after: 50,
            deadlock_ticks: 10_000,
            uihc_from_stream: true,
            record_moves: true,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        let invalid = |field, reason: String| Err(Error::InvalidParameter { field, reason });
        if self.fleet_size == 0 {
            return invalid("fleet_size", "need at least one AGV".into());
        }
        if self.order_quantity == 0 {
            return invalid("order_quantity", "need at least one order".into());
        }
        if self.capacity == 0 || self.capacity > MAX_STOPS {
            return invalid(
                "capacity",
                format!("must be in 1..={MAX_STOPS}, got {}", self.capacity),
            );
        }
        if !(self.payload_limit > 0.0) {
            return invalid(
                "payload_limit",
                format!("must be > 0, got {}", self.payload_limit),
            );
        }
        if !(self.resort_interval > 0.0) {
            return invalid(
                "resort_interval",
                format!("must be > 0, got {}", self.resort_interval),
            );
        }
        if self.deadlock_ticks == 0 {
            return invalid("deadlock_ticks", "must be > 0".into());
        }
        ArrivalWindow::new(self.owt.lo, self.owt.hi)?;
        DeadlineWindows::new(self.dtw.hours)?;
        self.cost.validate()?;
        self.profiles.validate()
    }

    /// Seeds for layout generation and order synthesis.
    fn seeds(&self) -> (u64, u64) {
        (
            self.seed,
            self.seed
                .wrapping_mul(0x9E37_79B9_7F4A_7C15)
                .wrapping_add(1),
        )
    }
}

/// Generates the layout and synthetic order stream a config describes.
pub fn build_scenario(config: &SimConfig) -> Result<(GridMap, OrderStream)> {
    config.validate()?;
    let (layout_seed, order_seed) = config.seeds();
    let map = generate_layout(config.scale, layout_seed);
    let stream = synthesize_stream(
        config.order_quantity,
        &map,
        &config.synthesis,
        config.owt,
        &config.dtw,
        order_seed,
    )?;
    Ok((map, stream))
}

#[derive(Clone, Debug, PartialEq)]
pub struct SimOutcome {
    pub report: KpiReport,
    pub trace: SimTrace,
}

/// Builds the scenario and runs it.
pub fn simulate(config: &SimConfig) -> Result<SimOutcome> {
    let (map, stream) = build_scenario(config)?;
    run(config, &map, &stream)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Phase {
    Idle,
    Outbound,
    Returning,
}

struct ActiveTrip {
    record: usize,
    stops: Vec<Cell>,
    /// Order index picked up at each stop.
    stop_orders: Vec<usize>,
    legs: Vec<Path>,
    /// Index of the stop being approached; `stops.len()` while returning.
    next_stop: usize,
}

impl ActiveTrip {
    fn target(&self, station: Cell) -> Cell {
        self.stops.get(self.next_stop).copied().unwrap_or(station)
    }
}

struct Agv {
    serial: u32,
    pos: Cell,
    phase: Phase,
    onboard: Vec<usize>,
    trip: Option<ActiveTrip>,
    route: VecDeque<Cell>,
    wait_streak: u32,
    cycle_running: f64,
}

struct Engine<'a> {
    config: &'a SimConfig,
    map: &'a GridMap,
    orders: &'a [Order],
    index_of: BTreeMap<u32, usize>,
    cost: CostParams,
    profiles: ClassProfiles,
    distances: StationDistances,
    station: Cell,
    agvs: Vec<Agv>,
    queue: DispatchQueue,
    pickup: Vec<Option<f64>>,
    delivery: Vec<Option<f64>>,
    order_energy: Vec<f64>,
    recent_trips: VecDeque<f64>,
    totals: FleetTotals,
    delivered: usize,
    trace: SimTrace,
}

/// Runs `stream` on `map` until every order is delivered.
pub fn run(config: &SimConfig, map: &GridMap, stream: &OrderStream) -> Result<SimOutcome> {
    config.validate()?;
    if stream.is_empty() {
        return Err(Error::InvalidParameter {
            field: "orders",
            reason: "empty order stream".into(),
        });
    }
    for o in &stream.orders {
        if !map.is_free(o.pickup) {
            return Err(Error::BlockedCell(o.pickup));
        }
    }
    let mut cost = config.cost.clone();
    if config.uihc_from_stream {
        cost.uihc = unit_inventory_cost(cost.gamma, stream.total_value(), stream.len() as f64);
    }
    let station = map.station();
    let n = stream.len();
    let mut engine = Engine {
        config,
        map,
        orders: &stream.orders,
        index_of: stream
            .orders
            .iter()
            .enumerate()
            .map(|(k, o)| (o.id, k))
            .collect(),
        profiles: ClassProfiles::new(&config.profiles, &config.dtw)?,
        distances: StationDistances::new(map),
        station,
        agvs: (1..=config.fleet_size as u32)
            .map(|serial| Agv {
                serial,
                pos: station,
                phase: Phase::Idle,
                onboard: Vec::new(),
                trip: None,
                route: VecDeque::new(),
                wait_streak: 0,
                cycle_running: 0.0,
            })
            .collect(),
        queue: DispatchQueue::new(config.rule),
        pickup: vec![None; n],
        delivery: vec![None; n],
        order_energy: vec![0.0; n],
        recent_trips: VecDeque::new(),
        totals: FleetTotals {
            fleet_size: config.fleet_size,
            ..FleetTotals::default()
        },
        delivered: 0,
        trace: SimTrace {
            events: Vec::new(),
            trips: Vec::new(),
            battery_cycles: Vec::new(),
            orders: stream.orders.clone(),
            outcomes: Vec::new(),
            records: Vec::new(),
            limits: TraceLimits {
                station,
                capacity: config.capacity,
                payload_limit: config.payload_limit,
                battery_budget: cost.battery_budget,
                w_t: cost.w_t,
                caps: config.profiles.caps,
                dtw_hours: config.dtw.hours,
            },
            collisions: Vec::new(),
            makespan: 0,
        },
        cost,
    };
    engine.run()?;
    Ok(engine.finish())
}

impl Engine<'_> {
    fn log(&mut self, tick: u64, agv: u32, event: EventKind, order_id: Option<u32>, cell: Cell) {
        self.trace.events.push(TraceEvent {
            tick,
            agv,
            event,
            order_id,
            cell,
        });
    }

    fn run(&mut self) -> Result<()> {
        let n = self.orders.len();
        let mut next_arrival = 0;
        let mut stalled: u64 = 0;
        let mut t: u64 = 0;
        while self.delivered < n {
            let now = t as f64;
            let mut progress = false;

            let mut admitted = false;
            while next_arrival < n && self.orders[next_arrival].arrival <= now {
                let o = self.orders[next_arrival];
                self.queue.push(o);
                self.log(t, 0, EventKind::Arrival, Some(o.id), o.pickup);
                next_arrival += 1;
                admitted = true;
            }
            if !self.queue.is_empty()
                && (admitted || self.queue.resort_due(now, self.config.resort_interval))
            {
                self.resort(now);
            }

            for i in 0..self.agvs.len() {
                if self.queue.is_empty() {
                    break;
                }
                if self.agvs[i].phase == Phase::Idle
                    && self.agvs[i].pos == self.station
                    && self.dispatch(i, t)?
                {
                    progress = true;
                }
            }

            // Movement alone is not progress: AGVs dodging each other can
            // shuffle forever without reaching a stop.
            self.advance(t)?;
            t += 1;
            for i in 0..self.agvs.len() {
                if self.agvs[i].trip.is_some() && self.agvs[i].route.is_empty() {
                    self.settle(i, t)?;
                    progress = true;
                }
            }

            let busy = !self.queue.is_empty() || self.agvs.iter().any(|a| a.trip.is_some());
            stalled = if busy && !progress { stalled + 1 } else { 0 };
            if stalled >= self.config.deadlock_ticks {
                let diagnostic = self
                    .agvs
                    .iter()
                    .map(|a| match a.route.front() {
                        Some(next) => format!("AGV {} at {} -> {}", a.serial, a.pos, next),
                        None => format!("AGV {} at {} idle", a.serial, a.pos),
                    })
                    .collect::<Vec<_>>()
                    .join("; ");
                return Err(Error::Deadlock {
                    tick: t,
                    diagnostic,
                });
            }

            // Nothing to do until the next arrival.
            if !busy && self.queue.is_empty() && next_arrival < n {
                let next = self.orders[next_arrival].arrival.ceil() as u64;
                t = t.max(next);
            }
        }
        self.trace.makespan = t;
        Ok(())
    }

    fn resort(&mut self, now: f64) {
        let mean_trip = if self.recent_trips.is_empty() {
            let pending = self.queue.orders();
            2.0 * pending
                .iter()
                .map(|o| self.distances.get(o.pickup))
                .sum::<f64>()
                / pending.len().max(1) as f64
                / self.cost.speed
        } else {
            self.recent_trips.iter().sum::<f64>() / self.recent_trips.len() as f64
        };
        let ctx = SortContext {
            now,
            profiles: &self.profiles,
            distances: &self.distances,
            ldc: LdcLatency {
                slots: self.config.fleet_size * self.config.capacity,
                mean_trip,
            },
            dcsp_horizon: self.config.resort_interval,
        };
        self.queue.resort(&ctx);
    }

    fn order_index(&self, id: u32) -> usize {
        self.index_of[&id]
    }

    /// Starts a trip for idle AGV `i`; false when nothing fits.
    fn dispatch(&mut self, i: usize, t: u64) -> Result<bool> {
        let batch = self
            .queue
            .next_batch(self.config.capacity, self.config.payload_limit);
        if batch.is_empty() {
            return Ok(false);
        }
        let cells: Vec<Cell> = batch.iter().map(|o| o.pickup).collect();
        let plan = order_stops(self.map, &cells, self.station)?;
        let stop_orders: Vec<usize> = plan
            .visit_order
            .iter()
            .map(|&k| self.order_index(batch[k].id))
            .collect();

        // Keep a reserve equal to the planned length for waits and detours.
        let planned = plan.length() / self.cost.speed;
        let agv = &mut self.agvs[i];
        if agv.cycle_running > 0.0 && agv.cycle_running + 2.0 * planned > self.cost.battery_budget {
            self.trace.battery_cycles.push(BatteryCycle {
                agv: agv.serial,
                running_seconds: agv.cycle_running,
            });
            agv.cycle_running = 0.0;
            let serial = agv.serial;
            self.log(t, serial, EventKind::Recharge, None, self.station);
        }

        let serial = self.agvs[i].serial;
        self.trace.trips.push(TripRecord {
            agv: serial,
            dispatch: t,
            completion: t,
            walk: vec![self.station],
            stops: plan.stops.clone(),
            order_ids: stop_orders.iter().map(|&k| self.orders[k].id).collect(),
            energy: 0.0,
        });
        self.log(t, serial, EventKind::Dispatch, None, self.station);
        let agv = &mut self.agvs[i];
        agv.route = plan.legs[0].cells[1..].iter().copied().collect();
        agv.trip = Some(ActiveTrip {
            record: self.trace.trips.len() - 1,
            stops: plan.stops,
            stop_orders,
            legs: plan.legs,
            next_stop: 0,
        });
        agv.phase = Phase::Outbound;
        agv.wait_streak = 0;
        if agv.route.is_empty() {
            self.settle(i, t)?;
        }
        Ok(true)
    }

    /// Handles every stop reached by AGV `i` at time `t`, chaining through
    /// zero-length legs, and delivers on return to the station.
    fn settle(&mut self, i: usize, t: u64) -> Result<()> {
        let now = t as f64;
        while self.agvs[i].route.is_empty() {
            let serial = self.agvs[i].serial;
            let pos = self.agvs[i].pos;
            let trip = self.agvs[i]
                .trip
                .as_mut()
                .expect("settle needs an active trip");
            if trip.next_stop < trip.stops.len() {
                let k = trip.stop_orders[trip.next_stop];
                trip.next_stop += 1;
                let target = trip.target(self.station);
                let leg = &trip.legs[trip.next_stop];
                let route: VecDeque<Cell> = if leg.start() == pos {
                    leg.cells[1..].iter().copied().collect()
                } else {
                    astar(self.map, pos, target)?.cells[1..]
                        .iter()
                        .copied()
                        .collect()
                };
                if trip.next_stop == trip.stops.len() {
                    self.agvs[i].phase = Phase::Returning;
                }
                self.agvs[i].route = route;
                self.agvs[i].onboard.push(k);
                self.pickup[k] = Some(now);
                self.log(t, serial, EventKind::Pickup, Some(self.orders[k].id), pos);
            } else {
                let record = trip.record;
                self.trace.trips[record].completion = t;
                let duration = (t - self.trace.trips[record].dispatch) as f64;
                self.recent_trips.push_back(duration);
                if self.recent_trips.len() > RECENT_TRIPS {
                    self.recent_trips.pop_front();
                }
                let agv = &mut self.agvs[i];
                agv.trip = None;
                agv.phase = Phase::Idle;
                for k in std::mem::take(&mut agv.onboard) {
                    self.delivery[k] = Some(now);
                    self.delivered += 1;
                    self.log(t, serial, EventKind::Deliver, Some(self.orders[k].id), pos);
                }
                break;
            }
        }
        Ok(())
    }

    /// Moves every AGV with a route by at most one cell during tick `t`.
    fn advance(&mut self, t: u64) -> Result<bool> {
        let requests: Vec<MoveRequest> = self
            .agvs
            .iter()
            .map(|a| MoveRequest {
                agv: a.serial,
                from: a.pos,
                to: a.route.front().copied().unwrap_or(a.pos),
            })
            .collect();
        if requests.iter().all(|r| r.from == r.to) {
            return Ok(false);
        }
        let outcomes = resolve_moves(self.map, &requests, Some(self.station), t);
        let mut moved = false;
        for (i, outcome) in outcomes.into_iter().enumerate() {
            if self.agvs[i].trip.is_none() {
                continue;
            }
            self.totals.running_seconds += 1.0;
            self.agvs[i].cycle_running += 1.0;
            if self.agvs[i].onboard.is_empty() {
                self.totals.empty_seconds += 1.0;
            }
            let serial = self.agvs[i].serial;
            match outcome {
                MoveOutcome::Proceed | MoveOutcome::Evade(_)
                    if requests[i].to != requests[i].from =>
                {
                    let dest = outcome.destination(&requests[i]);
                    self.step_energy(i);
                    let agv = &mut self.agvs[i];
                    agv.pos = dest;
                    agv.wait_streak = 0;
                    let record = agv.trip.as_ref().unwrap().record;
                    self.trace.trips[record].walk.push(dest);
                    moved = true;
                    if let MoveOutcome::Evade(_) = outcome {
                        let target = agv.trip.as_ref().unwrap().target(self.station);
                        agv.route = astar(self.map, dest, target)?.cells[1..]
                            .iter()
                            .copied()
                            .collect();
                        self.log(t + 1, serial, EventKind::Evade, None, dest);
                    } else {
                        agv.route.pop_front();
                        if self.config.record_moves {
                            self.log(t + 1, serial, EventKind::Move, None, dest);
                        }
                    }
                }
                _ => {
                    let agv = &mut self.agvs[i];
                    if agv.route.is_empty() {
                        continue;
                    }
                    agv.wait_streak += 1;
                    let pos = agv.pos;
                    if self.config.record_moves {
                        self.log(t + 1, serial, EventKind::Wait, None, pos);
                    }
                    if self.agvs[i].wait_streak > self.config.replan_after {
                        self.replan(i, t)?;
                    }
                }
            }
        }
        self.check_safety(t + 1);
        Ok(moved)
    }

    fn step_energy(&mut self, i: usize) {
        let agv = &self.agvs[i];
        let payload: f64 = agv.onboard.iter().map(|&k| self.orders[k].weight_kg).sum();
        let e = leg_energy(
            self.cost.self_weight + payload,
            self.map.cell_size(),
            &self.cost,
        );
        if agv.onboard.is_empty() {
            self.totals.empty_energy += e;
        } else {
            let share = e / agv.onboard.len() as f64;
            for &k in &agv.onboard {
                self.order_energy[k] += share;
            }
        }
        let record = agv.trip.as_ref().unwrap().record;
        self.trace.trips[record].energy += e;
    }

    /// Re-plans the current leg treating other AGVs' cells as obstacles.
    fn replan(&mut self, i: usize, t: u64) -> Result<()> {
        let blocked: HashSet<Cell> = self
            .agvs
            .iter()
            .enumerate()
            .filter(|(j, a)| *j != i && a.pos != self.station)
            .map(|(_, a)| a.pos)
            .collect();
        let agv = &mut self.agvs[i];
        agv.wait_streak = 0;
        let target = agv.trip.as_ref().unwrap().target(self.station);
        if let Ok(path) = astar_avoiding(self.map, agv.pos, target, &blocked) {
            agv.route = path.cells[1..].iter().copied().collect();
            let (serial, pos) = (agv.serial, agv.pos);
            self.log(t + 1, serial, EventKind::Replan, None, pos);
        }
        Ok(())
    }

    fn check_safety(&mut self, tick: u64) {
        let mut cells: Vec<Cell> = self
            .agvs
            .iter()
            .map(|a| a.pos)
            .filter(|c| *c != self.station)
            .collect();
        cells.sort();
        for w in cells.windows(2) {
            if w[0] == w[1] {
                self.trace.collisions.push((tick, w[0]));
            }
        }
    }

    fn finish(mut self) -> SimOutcome {
        for a in &self.agvs {
            self.trace.battery_cycles.push(BatteryCycle {
                agv: a.serial,
                running_seconds: a.cycle_running,
            });
        }
        let mut records = Vec::with_capacity(self.orders.len());
        let mut outcomes = Vec::with_capacity(self.orders.len());
        for (k, o) in self.orders.iter().enumerate() {
            let pickup = self.pickup[k].expect("every order is picked up");
            let delivery = self.delivery[k].expect("every order is delivered");
            let profile = self.profiles.get(o.class);
            let waiting = waiting_time(pickup, o.arrival);
            records.push(OrderServiceRecord {
                order_id: o.id,
                waiting_time: waiting,
                travel_time: delivery - pickup,
                delay_time: delay_time(waiting, profile.deadline_offset),
                order_energy: self.order_energy[k],
                inventory_cost: inventory_cost(waiting, &self.cost),
                delay_cost: delay_cost(profile, waiting),
            });
            outcomes.push(OrderOutcome {
                id: o.id,
                pickup,
                delivery,
            });
        }
        self.totals.makespan = self.trace.makespan as f64;
        let report = KpiReport::from_records(&records, &self.totals, &self.cost);
        self.trace.records = records;
        self.trace.outcomes = outcomes;
        SimOutcome {
            report,
            trace: self.trace,
        }
    }
}
