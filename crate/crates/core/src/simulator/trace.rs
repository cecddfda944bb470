use std::collections::BTreeMap;
use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::costmodel::OrderServiceRecord;
use crate::error::{Error, Result};
use crate::layout::Cell;
use crate::orders::Order;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EventKind {
    Arrival,
    Dispatch,
    Move,
    Wait,
    Evade,
    Replan,
    Pickup,
    Deliver,
    Recharge,
}

impl EventKind {
    pub const ALL: [EventKind; 9] = [
        EventKind::Arrival,
        EventKind::Dispatch,
        EventKind::Move,
        EventKind::Wait,
        EventKind::Evade,
        EventKind::Replan,
        EventKind::Pickup,
        EventKind::Deliver,
        EventKind::Recharge,
    ];

    pub fn name(self) -> &'static str {
        match self {
            EventKind::Arrival => "arrival",
            EventKind::Dispatch => "dispatch",
            EventKind::Move => "move",
            EventKind::Wait => "wait",
            EventKind::Evade => "evade",
            EventKind::Replan => "replan",
            EventKind::Pickup => "pickup",
            EventKind::Deliver => "deliver",
            EventKind::Recharge => "recharge",
        }
    }

    /// Events whose cell is the AGV's position after the tick.
    pub fn places_agv(self) -> bool {
        matches!(
            self,
            EventKind::Move | EventKind::Evade | EventKind::Dispatch
        )
    }
}

impl fmt::Display for EventKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for EventKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        EventKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::InvalidParameter {
                field: "event",
                reason: format!("unknown trace event `{s}`"),
            })
    }
}

/// One trace line. `agv` is 0 for events not tied to a vehicle.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceEvent {
    pub tick: u64,
    pub agv: u32,
    pub event: EventKind,
    pub order_id: Option<u32>,
    pub cell: Cell,
}

/// One closed station-to-station loop as executed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TripRecord {
    pub agv: u32,
    pub dispatch: u64,
    pub completion: u64,
    /// Every cell occupied, starting and (when complete) ending at the station.
    pub walk: Vec<Cell>,
    /// Planned pickup cells in visiting order.
    pub stops: Vec<Cell>,
    pub order_ids: Vec<u32>,
    pub energy: f64,
}

/// Running seconds accumulated by one AGV between recharges.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BatteryCycle {
    pub agv: u32,
    pub running_seconds: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct OrderOutcome {
    pub id: u32,
    pub pickup: f64,
    pub delivery: f64,
}

/// Configuration values the constraint checks compare against.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceLimits {
    pub station: Cell,
    pub capacity: usize,
    pub payload_limit: f64,
    pub battery_budget: f64,
    pub w_t: f64,
    pub caps: [f64; 4],
    pub dtw_hours: [f64; 4],
}

/// Everything recorded by one run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimTrace {
    pub events: Vec<TraceEvent>,
    pub trips: Vec<TripRecord>,
    pub battery_cycles: Vec<BatteryCycle>,
    pub orders: Vec<Order>,
    pub outcomes: Vec<OrderOutcome>,
    pub records: Vec<OrderServiceRecord>,
    pub limits: TraceLimits,
    /// `(tick, cell)` where two AGVs shared a non-station cell.
    pub collisions: Vec<(u64, Cell)>,
    pub makespan: u64,
}

#[derive(Debug, Serialize, Deserialize)]
struct Row {
    tick: u64,
    agv: u32,
    event: String,
    #[serde(rename = "orderId")]
    order_id: Option<u32>,
    x: i32,
    y: i32,
}

/// Writes `tick,agv,event,orderId,x,y` lines with a header.
pub fn write_trace_csv<W: Write>(writer: W, events: &[TraceEvent]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    for e in events {
        w.serialize(Row {
            tick: e.tick,
            agv: e.agv,
            event: e.event.name().to_string(),
            order_id: e.order_id,
            x: e.cell.x,
            y: e.cell.y,
        })?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_trace_csv<R: Read>(reader: R) -> Result<Vec<TraceEvent>> {
    let mut r = csv::Reader::from_reader(reader);
    let mut events = Vec::new();
    for (i, row) in r.deserialize::<Row>().enumerate() {
        let row = row?;
        let event = row.event.parse().map_err(|e: Error| Error::Parse {
            row: i + 1,
            message: e.to_string(),
        })?;
        events.push(TraceEvent {
            tick: row.tick,
            agv: row.agv,
            event,
            order_id: row.order_id,
            cell: Cell::new(row.x, row.y),
        });
    }
    Ok(events)
}

/// Replays AGV positions from placement events and reports every tick at
/// which two AGVs shared a cell other than `shared`.
pub fn collisions_from_events(events: &[TraceEvent], shared: Option<Cell>) -> Vec<(u64, Cell)> {
    let mut by_tick: BTreeMap<u64, Vec<&TraceEvent>> = BTreeMap::new();
    for e in events.iter().filter(|e| e.event.places_agv()) {
        by_tick.entry(e.tick).or_default().push(e);
    }
    let mut positions: BTreeMap<u32, Cell> = BTreeMap::new();
    let mut found = Vec::new();
    for (tick, group) in by_tick {
        for e in group {
            positions.insert(e.agv, e.cell);
        }
        let mut seen: BTreeMap<Cell, u32> = BTreeMap::new();
        for (&agv, &cell) in &positions {
            if Some(cell) == shared {
                continue;
            }
            if seen.insert(cell, agv).is_some() {
                found.push((tick, cell));
            }
        }
    }
    found
}

/// Station cell as logged by dispatch events.
pub fn station_from_events(events: &[TraceEvent]) -> Option<Cell> {
    events
        .iter()
        .find(|e| e.event == EventKind::Dispatch)
        .map(|e| e.cell)
}
