//! Shortest paths, multi-stop trips and per-tick corridor conflict resolution.

use std::cmp::Reverse;
use std::collections::{BTreeMap, BTreeSet, BinaryHeap, HashMap, HashSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::layout::{Cell, GridMap};

/// Stops per trip; each AGV carries up to four units.
pub const MAX_STOPS: usize = 4;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Path {
    pub cells: Vec<Cell>,
    pub length: f64,
}

impl Path {
    fn from_cells(cells: Vec<Cell>, cell_size: f64) -> Self {
        let length = cells.len().saturating_sub(1) as f64 * cell_size;
        Self { cells, length }
    }

    pub fn steps(&self) -> usize {
        self.cells.len().saturating_sub(1)
    }

    pub fn start(&self) -> Cell {
        self.cells[0]
    }

    pub fn end(&self) -> Cell {
        *self.cells.last().expect("paths are never empty")
    }
}

/// Result of a search together with every node it expanded, in order.
#[derive(Clone, Debug)]
pub struct SearchTrace {
    pub path: Path,
    /// `(cell, g, h)` for each expansion.
    pub expanded: Vec<(Cell, u32, u32)>,
}

/// 4-connected A* with the Manhattan heuristic.
///
/// The open list is ordered by `f`, then `h`, then cell coordinates, which
/// makes the returned path a pure function of the inputs.
pub fn astar(map: &GridMap, start: Cell, goal: Cell) -> Result<Path> {
    search(map, start, goal, |c| map.is_free(c), false).map(|t| t.path)
}

pub fn astar_traced(map: &GridMap, start: Cell, goal: Cell) -> Result<SearchTrace> {
    search(map, start, goal, |c| map.is_free(c), true)
}

/// A* treating `blocked` as extra obstacles; `goal` is always enterable.
pub fn astar_avoiding(
    map: &GridMap,
    start: Cell,
    goal: Cell,
    blocked: &HashSet<Cell>,
) -> Result<Path> {
    search(
        map,
        start,
        goal,
        |c| map.is_free(c) && (c == goal || !blocked.contains(&c)),
        false,
    )
    .map(|t| t.path)
}

fn search(
    map: &GridMap,
    start: Cell,
    goal: Cell,
    passable: impl Fn(Cell) -> bool,
    record: bool,
) -> Result<SearchTrace> {
    for c in [start, goal] {
        if !map.is_free(c) {
            return Err(Error::BlockedCell(c));
        }
    }
    let n = map.cell_count();
    let mut g_score = vec![u32::MAX; n];
    let mut parent = vec![usize::MAX; n];
    let mut closed = vec![false; n];
    let mut open = BinaryHeap::new();
    let mut expanded = Vec::new();

    let s = map.index(start);
    g_score[s] = 0;
    let h0 = start.manhattan(goal);
    open.push(Reverse((h0, h0, start)));

    while let Some(Reverse((_, h, cell))) = open.pop() {
        let ci = map.index(cell);
        if closed[ci] {
            continue;
        }
        closed[ci] = true;
        if record {
            expanded.push((cell, g_score[ci], h));
        }
        if cell == goal {
            let mut cells = vec![goal];
            let mut i = ci;
            while i != s {
                i = parent[i];
                cells.push(map.cell_at(i));
            }
            cells.reverse();
            return Ok(SearchTrace {
                path: Path::from_cells(cells, map.cell_size()),
                expanded,
            });
        }
        let g_next = g_score[ci] + 1;
        for next in cell.neighbors() {
            if !map.in_bounds(next) || !passable(next) {
                continue;
            }
            let ni = map.index(next);
            if !closed[ni] && g_next < g_score[ni] {
                g_score[ni] = g_next;
                parent[ni] = ci;
                let h = next.manhattan(goal);
                open.push(Reverse((g_next + h, h, next)));
            }
        }
    }
    Err(Error::NoPath { start, goal })
}

/// One station-to-station loop over a batch of pickups.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Trip {
    /// Pickup cells in visiting order.
    pub stops: Vec<Cell>,
    /// `visit_order[k]` is the batch index visited k-th.
    pub visit_order: Vec<usize>,
    /// `stops.len() + 1` legs; the last ends at the station.
    pub legs: Vec<Path>,
    pub terminal: Cell,
}

impl Trip {
    pub fn length(&self) -> f64 {
        self.legs.iter().map(|l| l.length).sum()
    }

    pub fn steps(&self) -> usize {
        self.legs.iter().map(Path::steps).sum()
    }
}

/// Lexicographic successor of `perm`; false once the last permutation is reached.
fn next_permutation(perm: &mut [usize]) -> bool {
    let n = perm.len();
    if n < 2 {
        return false;
    }
    let Some(i) = (0..n - 1).rev().find(|&i| perm[i] < perm[i + 1]) else {
        return false;
    };
    let j = (i + 1..n)
        .rev()
        .find(|&j| perm[j] > perm[i])
        .expect("pivot has a successor");
    perm.swap(i, j);
    perm[i + 1..].reverse();
    true
}

/// Exact minimum-length visiting order for up to four pickups starting and
/// ending at `station`. Among equal-length orders the one carrying goods
/// over the fewest item-metres wins, then the lexicographically first
/// permutation of batch indices.
pub fn order_stops(map: &GridMap, batch: &[Cell], station: Cell) -> Result<Trip> {
    if batch.is_empty() || batch.len() > MAX_STOPS {
        return Err(Error::BatchSize {
            size: batch.len(),
            capacity: MAX_STOPS,
        });
    }
    // Node 0 is the station, nodes 1..=k the pickups.
    let mut nodes = Vec::with_capacity(batch.len() + 1);
    nodes.push(station);
    nodes.extend_from_slice(batch);
    let k = nodes.len();
    let mut paths: HashMap<(usize, usize), Path> = HashMap::new();
    let mut memo: HashMap<(Cell, Cell), Path> = HashMap::new();
    for a in 0..k {
        for b in 0..k {
            if a == b {
                continue;
            }
            let key = (nodes[a], nodes[b]);
            let path = match memo.get(&key) {
                Some(p) => p.clone(),
                None => {
                    let p = astar(map, nodes[a], nodes[b])?;
                    memo.insert(key, p.clone());
                    p
                }
            };
            paths.insert((a, b), path);
        }
    }
    let len = |a: usize, b: usize| -> f64 {
        if a == b {
            0.0
        } else {
            paths[&(a, b)].length
        }
    };

    // Key: tour length, then item-metres carried (the j-th leg carries j
    // items), then lexicographic order of batch indices.
    let mut perm: Vec<usize> = (1..k).collect();
    let mut best: Option<(f64, f64, Vec<usize>)> = None;
    loop {
        let mut total = 0.0;
        let mut carried = 0.0;
        let mut prev = 0;
        for (j, &node) in perm.iter().chain(std::iter::once(&0)).enumerate() {
            let l = len(prev, node);
            total += l;
            carried += j as f64 * l;
            prev = node;
        }
        let better = best
            .as_ref()
            .is_none_or(|(bt, bc, _)| total < *bt || (total == *bt && carried < *bc));
        if better {
            best = Some((total, carried, perm.clone()));
        }
        if !next_permutation(&mut perm) {
            break;
        }
    }
    let (_, _, order) = best.expect("at least one permutation");

    let mut legs = Vec::with_capacity(k);
    let mut prev = 0;
    for &node in order.iter().chain(std::iter::once(&0)) {
        let leg = if prev == node {
            Path::from_cells(vec![nodes[node]], map.cell_size())
        } else {
            paths[&(prev, node)].clone()
        };
        legs.push(leg);
        prev = node;
    }
    Ok(Trip {
        stops: order.iter().map(|&i| nodes[i]).collect(),
        visit_order: order.iter().map(|&i| i - 1).collect(),
        legs,
        terminal: station,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StepDecision {
    Proceed,
    Wait,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Conflict {
    Vertex,
    /// Head-on exchange with an AGV already granted the opposite move.
    Swap,
}

/// Cell and edge claims for one tick. AGVs are processed in ascending
/// serial order, so an earlier claim always comes from a smaller serial
/// number (or from an AGV that is standing still).
#[derive(Clone, Debug)]
pub struct ReservationTable {
    pub tick: u64,
    vertex: HashMap<Cell, u32>,
    edges: HashSet<(Cell, Cell)>,
    /// A depot cell any number of AGVs may share.
    shared: Option<Cell>,
}

impl ReservationTable {
    pub fn new(tick: u64, shared: Option<Cell>) -> Self {
        Self {
            tick,
            vertex: HashMap::new(),
            edges: HashSet::new(),
            shared,
        }
    }

    /// Claims `cell` for an AGV that stays put this tick.
    pub fn hold(&mut self, agv: u32, cell: Cell) {
        if Some(cell) != self.shared {
            self.vertex.entry(cell).or_insert(agv);
        }
    }

    pub fn is_claimed(&self, cell: Cell) -> bool {
        Some(cell) != self.shared && self.vertex.contains_key(&cell)
    }

    /// A swap is reported ahead of a vertex clash: waiting never resolves
    /// a swap, so the loser must be offered a sidestep. The shared cell has
    /// room for several AGVs, so edges touching it never swap.
    fn conflict(&self, agv: u32, from: Cell, next: Cell) -> Option<Conflict> {
        let at_shared = Some(from) == self.shared || Some(next) == self.shared;
        if !at_shared && self.edges.contains(&(next, from)) {
            return Some(Conflict::Swap);
        }
        if Some(next) != self.shared && self.vertex.get(&next).is_some_and(|&o| o != agv) {
            return Some(Conflict::Vertex);
        }
        None
    }

    /// Grants the move `from -> next` unless the cell is already claimed for
    /// this tick or the reverse edge is taken. A granted move claims both.
    pub fn reserve_step(&mut self, agv: u32, from: Cell, next: Cell) -> StepDecision {
        if self.conflict(agv, from, next).is_some() {
            return StepDecision::Wait;
        }
        if Some(next) != self.shared {
            self.vertex.insert(next, agv);
        }
        if next != from {
            self.edges.insert((from, next));
        }
        StepDecision::Proceed
    }
}

/// What an AGV wants to do this tick; `to == from` means stand still.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct MoveRequest {
    pub agv: u32,
    pub from: Cell,
    pub to: Cell,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MoveOutcome {
    /// Moved to the requested cell.
    Proceed,
    /// Stayed in place.
    Wait,
    /// Lost a head-on exchange and stepped aside into this cell instead.
    Evade(Cell),
}

impl MoveOutcome {
    pub fn destination(self, req: &MoveRequest) -> Cell {
        match self {
            MoveOutcome::Proceed => req.to,
            MoveOutcome::Wait => req.from,
            MoveOutcome::Evade(c) => c,
        }
    }
}

/// Resolves one tick of simultaneous moves.
///
/// Smaller serial numbers win cell conflicts. An AGV that is standing still
/// keeps its cell against every claimant. In a head-on exchange the larger
/// serial yields by stepping into a free side cell; if it has none the
/// smaller serial steps aside instead, and if neither can both wait.
/// Afterwards no two AGVs share a cell (except `shared`) and no pair
/// traverses an edge in opposite directions unless it touches `shared`.
pub fn resolve_moves(
    map: &GridMap,
    requests: &[MoveRequest],
    shared: Option<Cell>,
    tick: u64,
) -> Vec<MoveOutcome> {
    let mut order: Vec<usize> = (0..requests.len()).collect();
    order.sort_by_key(|&i| requests[i].agv);

    let mut waiting: BTreeSet<usize> = requests
        .iter()
        .enumerate()
        .filter(|(_, r)| r.to == r.from)
        .map(|(i, _)| i)
        .collect();
    let mut evading: BTreeMap<usize, Cell> = BTreeMap::new();
    let occupied: HashSet<Cell> = requests.iter().map(|r| r.from).collect();
    let sidestep = |i: usize, evading: &BTreeMap<usize, Cell>, table: Option<&ReservationTable>| {
        let r = requests[i];
        r.from.neighbors().into_iter().find(|n| {
            map.is_free(*n)
                && *n != r.to
                && (Some(*n) == shared
                    || (!occupied.contains(n) && !table.is_some_and(|t| t.is_claimed(*n))))
                && !evading.values().any(|c| c == n)
        })
    };

    // Head-on pairs are settled before any claim is made, so a third AGV
    // claiming one of the two cells cannot hide the exchange.
    for (a, &i) in order.iter().enumerate() {
        for &j in &order[a + 1..] {
            let (ri, rj) = (requests[i], requests[j]);
            let at_shared = Some(ri.from) == shared || Some(ri.to) == shared;
            let head_on = ri.from != ri.to && ri.to == rj.from && rj.to == ri.from && !at_shared;
            if !head_on || evading.contains_key(&i) || evading.contains_key(&j) {
                continue;
            }
            if let Some(c) = sidestep(j, &evading, None) {
                evading.insert(j, c);
            } else if let Some(c) = sidestep(i, &evading, None) {
                evading.insert(i, c);
            } else {
                waiting.insert(i);
                waiting.insert(j);
            }
        }
    }
    let mut tried_evade: BTreeSet<usize> = evading.keys().copied().collect();

    loop {
        let mut table = ReservationTable::new(tick, shared);
        for &i in &order {
            if waiting.contains(&i) {
                table.hold(requests[i].agv, requests[i].from);
            }
        }
        let mut changed = false;
        for &i in &order {
            if waiting.contains(&i) {
                continue;
            }
            let r = requests[i];
            let target = evading.get(&i).copied().unwrap_or(r.to);
            match table.conflict(r.agv, r.from, target) {
                None => {
                    table.reserve_step(r.agv, r.from, target);
                }
                Some(Conflict::Swap) if !tried_evade.contains(&i) => {
                    tried_evade.insert(i);
                    changed = true;
                    match sidestep(i, &evading, Some(&table)) {
                        Some(c) => {
                            evading.insert(i, c);
                        }
                        None => {
                            waiting.insert(i);
                        }
                    }
                    break;
                }
                Some(_) => {
                    evading.remove(&i);
                    waiting.insert(i);
                    changed = true;
                    break;
                }
            }
        }
        if !changed {
            break;
        }
    }

    (0..requests.len())
        .map(|i| {
            if waiting.contains(&i) {
                MoveOutcome::Wait
            } else if let Some(c) = evading.get(&i) {
                MoveOutcome::Evade(*c)
            } else {
                MoveOutcome::Proceed
            }
        })
        .collect()
}
