//! Grid warehouse layouts.
//!
//! A layout is a rectangular lattice of one-metre cells. Corridors run along
//! every even row and every even column, storage cells fill the odd/odd
//! lattice positions, and a seeded fraction of storage cells is blocked. The
//! conveyor drop-off station sits at the centre of the bottom edge. Storage
//! cells carry a zone label: zone F takes the cells nearest the station and
//! zones A through E split the rest into vertical bands.

use std::collections::{BTreeMap, VecDeque};
use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Cell {
    pub x: i32,
    pub y: i32,
}

impl Cell {
    pub const fn new(x: i32, y: i32) -> Self {
        Self { x, y }
    }

    pub fn manhattan(self, other: Cell) -> u32 {
        self.x.abs_diff(other.x) + self.y.abs_diff(other.y)
    }

    /// The four orthogonal neighbours: up, down, left, right.
    pub fn neighbors(self) -> [Cell; 4] {
        [
            Cell::new(self.x, self.y + 1),
            Cell::new(self.x, self.y - 1),
            Cell::new(self.x - 1, self.y),
            Cell::new(self.x + 1, self.y),
        ]
    }

    pub fn is_adjacent(self, other: Cell) -> bool {
        self.manhattan(other) == 1
    }
}

impl fmt::Display for Cell {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.x, self.y)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Zone {
    A,
    B,
    C,
    D,
    E,
    F,
}

impl Zone {
    pub const ALL: [Zone; 6] = [Zone::A, Zone::B, Zone::C, Zone::D, Zone::E, Zone::F];

    pub fn letter(self) -> char {
        match self {
            Zone::A => 'A',
            Zone::B => 'B',
            Zone::C => 'C',
            Zone::D => 'D',
            Zone::E => 'E',
            Zone::F => 'F',
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for Zone {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.letter())
    }
}

impl FromStr for Zone {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_uppercase().as_str() {
            "A" => Ok(Zone::A),
            "B" => Ok(Zone::B),
            "C" => Ok(Zone::C),
            "D" => Ok(Zone::D),
            "E" => Ok(Zone::E),
            "F" => Ok(Zone::F),
            _ => Err(Error::UnknownZone(s.to_string())),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WarehouseScale {
    Small,
    Medium,
    Large,
}

impl WarehouseScale {
    pub const ALL: [WarehouseScale; 3] = [
        WarehouseScale::Small,
        WarehouseScale::Medium,
        WarehouseScale::Large,
    ];

    /// Grid dimensions in cells (width, height).
    pub fn grid_dims(self) -> (i32, i32) {
        match self {
            WarehouseScale::Small => (15, 15),
            WarehouseScale::Medium => (25, 25),
            WarehouseScale::Large => (40, 40),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            WarehouseScale::Small => "small",
            WarehouseScale::Medium => "medium",
            WarehouseScale::Large => "large",
        }
    }
}

impl fmt::Display for WarehouseScale {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for WarehouseScale {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "small" => Ok(WarehouseScale::Small),
            "medium" | "middle" => Ok(WarehouseScale::Medium),
            "large" => Ok(WarehouseScale::Large),
            other => Err(Error::InvalidParameter {
                field: "layout",
                reason: format!("unknown scale `{other}`"),
            }),
        }
    }
}

/// Tunable layout generation parameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LayoutParams {
    pub width: i32,
    pub height: i32,
    pub cell_size: f64,
    /// Fraction of storage lattice cells turned into obstacles.
    pub obstacle_fraction: f64,
    /// Target fraction of free storage cells labelled zone F.
    pub zone_f_fraction: f64,
}

impl LayoutParams {
    pub fn for_scale(scale: WarehouseScale) -> Self {
        let (width, height) = scale.grid_dims();
        Self {
            width,
            height,
            ..Self::default()
        }
    }
}

impl Default for LayoutParams {
    fn default() -> Self {
        Self {
            width: 15,
            height: 15,
            cell_size: 1.0,
            obstacle_fraction: 0.1,
            zone_f_fraction: 0.2,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CellKind {
    Corridor,
    Storage(Zone),
    Obstacle,
    Station,
}

#[derive(Clone, Debug, PartialEq)]
pub struct GridMap {
    width: i32,
    height: i32,
    cell_size: f64,
    station: Cell,
    kinds: Vec<CellKind>,
    zone_cells: BTreeMap<Zone, Vec<Cell>>,
}

impl GridMap {
    /// An obstacle-free corridor grid with the station at `station`.
    pub fn open(width: i32, height: i32, station: Cell) -> Self {
        let mut kinds = vec![CellKind::Corridor; (width * height) as usize];
        let mut map = Self {
            width,
            height,
            cell_size: 1.0,
            station,
            kinds: Vec::new(),
            zone_cells: BTreeMap::new(),
        };
        kinds[map.index(station)] = CellKind::Station;
        map.kinds = kinds;
        map
    }

    /// Parses the plain-text dump format. Rows are listed top (highest y)
    /// first: `#` obstacle, `.` corridor, `S` station, `A`..`F` storage.
    pub fn from_ascii(text: &str) -> Result<Self> {
        let rows: Vec<&str> = text
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty())
            .collect();
        let height = rows.len() as i32;
        let width = rows.first().map_or(0, |r| r.chars().count()) as i32;
        if height == 0 || width == 0 {
            return Err(Error::InvalidParameter {
                field: "map",
                reason: "empty map".into(),
            });
        }
        let mut kinds = vec![CellKind::Corridor; (width * height) as usize];
        let mut station = None;
        for (row_idx, row) in rows.iter().enumerate() {
            if row.chars().count() as i32 != width {
                return Err(Error::Parse {
                    row: row_idx + 1,
                    message: "ragged map row".into(),
                });
            }
            let y = height - 1 - row_idx as i32;
            for (x, ch) in row.chars().enumerate() {
                let kind = match ch {
                    '#' => CellKind::Obstacle,
                    '.' => CellKind::Corridor,
                    'S' => {
                        station = Some(Cell::new(x as i32, y));
                        CellKind::Station
                    }
                    other => {
                        CellKind::Storage(other.to_string().parse::<Zone>().map_err(|_| {
                            Error::Parse {
                                row: row_idx + 1,
                                message: format!("unexpected map character `{other}`"),
                            }
                        })?)
                    }
                };
                kinds[(y * width + x as i32) as usize] = kind;
            }
        }
        let station = station.ok_or(Error::InvalidParameter {
            field: "map",
            reason: "no station `S`".into(),
        })?;
        let mut map = Self {
            width,
            height,
            cell_size: 1.0,
            station,
            kinds,
            zone_cells: BTreeMap::new(),
        };
        map.rebuild_zone_index();
        Ok(map)
    }

    pub fn to_ascii(&self) -> String {
        let mut out = String::with_capacity(((self.width + 1) * self.height) as usize);
        for y in (0..self.height).rev() {
            for x in 0..self.width {
                out.push(match self.kind(Cell::new(x, y)) {
                    Some(CellKind::Obstacle) => '#',
                    Some(CellKind::Corridor) => '.',
                    Some(CellKind::Station) => 'S',
                    Some(CellKind::Storage(z)) => z.letter(),
                    None => '?',
                });
            }
            out.push('\n');
        }
        out
    }

    pub fn with_obstacles(mut self, cells: impl IntoIterator<Item = Cell>) -> Self {
        for c in cells {
            if self.in_bounds(c) && c != self.station {
                let i = self.index(c);
                self.kinds[i] = CellKind::Obstacle;
            }
        }
        self.rebuild_zone_index();
        self
    }

    pub fn with_cell_size(mut self, cell_size: f64) -> Self {
        self.cell_size = cell_size;
        self
    }

    fn rebuild_zone_index(&mut self) {
        let mut zone_cells: BTreeMap<Zone, Vec<Cell>> = BTreeMap::new();
        for y in 0..self.height {
            for x in 0..self.width {
                let c = Cell::new(x, y);
                if let Some(CellKind::Storage(z)) = self.kind(c) {
                    zone_cells.entry(z).or_default().push(c);
                }
            }
        }
        self.zone_cells = zone_cells;
    }

    pub fn width(&self) -> i32 {
        self.width
    }

    pub fn height(&self) -> i32 {
        self.height
    }

    pub fn cell_count(&self) -> usize {
        self.kinds.len()
    }

    pub fn cell_size(&self) -> f64 {
        self.cell_size
    }

    pub fn station(&self) -> Cell {
        self.station
    }

    pub fn in_bounds(&self, c: Cell) -> bool {
        c.x >= 0 && c.y >= 0 && c.x < self.width && c.y < self.height
    }

    /// Row-major index of an in-bounds cell.
    pub fn index(&self, c: Cell) -> usize {
        (c.y * self.width + c.x) as usize
    }

    pub fn cell_at(&self, index: usize) -> Cell {
        let i = index as i32;
        Cell::new(i % self.width, i / self.width)
    }

    pub fn kind(&self, c: Cell) -> Option<CellKind> {
        self.in_bounds(c).then(|| self.kinds[self.index(c)])
    }

    /// In bounds and not an obstacle.
    pub fn is_free(&self, c: Cell) -> bool {
        matches!(self.kind(c), Some(k) if k != CellKind::Obstacle)
    }

    pub fn is_obstacle(&self, c: Cell) -> bool {
        self.kind(c) == Some(CellKind::Obstacle)
    }

    pub fn zone_of(&self, c: Cell) -> Option<Zone> {
        match self.kind(c) {
            Some(CellKind::Storage(z)) => Some(z),
            _ => None,
        }
    }

    pub fn zone_cells(&self, zone: Zone) -> &[Cell] {
        self.zone_cells.get(&zone).map_or(&[], Vec::as_slice)
    }

    pub fn zones(&self) -> impl Iterator<Item = Zone> + '_ {
        self.zone_cells.keys().copied()
    }

    pub fn obstacles(&self) -> impl Iterator<Item = Cell> + '_ {
        self.kinds
            .iter()
            .enumerate()
            .filter(|(_, k)| **k == CellKind::Obstacle)
            .map(|(i, _)| self.cell_at(i))
    }

    pub fn free_neighbors(&self, c: Cell) -> impl Iterator<Item = Cell> + '_ {
        c.neighbors().into_iter().filter(|n| self.is_free(*n))
    }

    /// Uniform draw over the free cells of `zone`.
    pub fn sample_in_zone<R: Rng + ?Sized>(&self, zone: Zone, rng: &mut R) -> Result<Cell> {
        let cells = self.zone_cells(zone);
        if cells.is_empty() {
            return Err(Error::UnknownZone(zone.to_string()));
        }
        Ok(cells[rng.gen_range(0..cells.len())])
    }

    /// Storage cell for an item of `zone`, drawn deterministically from `seed`.
    pub fn storage_coordinate(&self, zone: &str, seed: u64) -> Result<Cell> {
        let zone: Zone = zone.parse()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        self.sample_in_zone(zone, &mut rng)
    }

    /// Flood fill over free cells from the station; `true` marks reachable cells.
    pub fn reachable_from_station(&self) -> Vec<bool> {
        let mut seen = vec![false; self.kinds.len()];
        let mut queue = VecDeque::from([self.station]);
        seen[self.index(self.station)] = true;
        while let Some(c) = queue.pop_front() {
            for n in self.free_neighbors(c) {
                let i = self.index(n);
                if !seen[i] {
                    seen[i] = true;
                    queue.push_back(n);
                }
            }
        }
        seen
    }

    /// Structural invariant findings; empty for a well-formed layout.
    pub fn check_invariants(&self) -> Vec<String> {
        let mut issues = Vec::new();
        if self.is_obstacle(self.station) || !self.in_bounds(self.station) {
            issues.push(format!("station {} is not a free cell", self.station));
        }
        let reach = self.reachable_from_station();
        for (i, k) in self.kinds.iter().enumerate() {
            if *k != CellKind::Obstacle && !reach[i] {
                issues.push(format!("cell {} unreachable from station", self.cell_at(i)));
            }
        }
        let f_cells = self.zone_cells(Zone::F);
        if !f_cells.is_empty() {
            let mut other: Vec<u32> = Zone::ALL[..5]
                .iter()
                .flat_map(|z| self.zone_cells(*z))
                .map(|c| c.manhattan(self.station))
                .collect();
            if !other.is_empty() {
                other.sort_unstable();
                let median = other[other.len() / 2];
                if let Some(far) = f_cells.iter().find(|c| c.manhattan(self.station) >= median) {
                    issues.push(format!(
                        "zone F cell {far} is not nearer than the median non-F cell"
                    ));
                }
            }
        }
        issues
    }
}

pub fn generate_layout(scale: WarehouseScale, seed: u64) -> GridMap {
    generate_layout_with(&LayoutParams::for_scale(scale), seed)
}

pub fn generate_layout_with(params: &LayoutParams, seed: u64) -> GridMap {
    let (width, height) = (params.width.max(3), params.height.max(3));
    let station = Cell::new(width / 2, 0);
    let mut map = GridMap::open(width, height, station).with_cell_size(params.cell_size);

    let mut storage = Vec::new();
    for y in 0..height {
        for x in 0..width {
            let c = Cell::new(x, y);
            if x % 2 == 1 && y % 2 == 1 && c != station {
                storage.push(c);
            }
        }
    }

    // Obstacles only ever replace isolated lattice cells, so the corridor
    // network (and with it every remaining cell) stays connected.
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n_obstacles =
        (params.obstacle_fraction.clamp(0.0, 0.9) * storage.len() as f64).round() as usize;
    let mut shuffled = storage.clone();
    shuffled.shuffle(&mut rng);
    let blocked: Vec<Cell> = shuffled[..n_obstacles].to_vec();
    for c in &blocked {
        let i = map.index(*c);
        map.kinds[i] = CellKind::Obstacle;
    }

    let mut free: Vec<Cell> = storage
        .into_iter()
        .filter(|c| !map.is_obstacle(*c))
        .collect();
    free.sort_by_key(|c| (c.manhattan(station), c.x, c.y));

    // Zone F: nearest cells, never splitting a distance tie so every F cell is
    // strictly closer than every other storage cell.
    let n_f = if free.is_empty() {
        0
    } else {
        let target = ((params.zone_f_fraction.clamp(0.0, 1.0) * free.len() as f64).ceil() as usize)
            .clamp(1, free.len());
        let cutoff = free[target - 1].manhattan(station);
        match free.iter().position(|c| c.manhattan(station) >= cutoff) {
            Some(0) | None => free
                .iter()
                .position(|c| c.manhattan(station) > cutoff)
                .unwrap_or(free.len()),
            Some(n) => n,
        }
    };
    for c in &free[..n_f] {
        let i = map.index(*c);
        map.kinds[i] = CellKind::Storage(Zone::F);
    }

    let mut rest: Vec<Cell> = free[n_f..].to_vec();
    rest.sort_by_key(|c| (c.x, c.y));
    let bands = 5;
    let len = rest.len();
    for (k, c) in rest.iter().enumerate() {
        let zone = Zone::ALL[(k * bands / len.max(1)).min(bands - 1)];
        let i = map.index(*c);
        map.kinds[i] = CellKind::Storage(zone);
    }

    map.rebuild_zone_index();
    map
}
