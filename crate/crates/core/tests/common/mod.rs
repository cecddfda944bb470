#![allow(dead_code)]

use std::collections::VecDeque;

use agvsb_core::layout::{Cell, GridMap};
use rand::Rng;

/// Open grid with roughly `fraction` of non-station cells blocked.
pub fn random_map<R: Rng>(rng: &mut R, width: i32, height: i32, fraction: f64) -> GridMap {
    let station = Cell::new(width / 2, 0);
    let blocked: Vec<Cell> = (0..height)
        .flat_map(|y| (0..width).map(move |x| Cell::new(x, y)))
        .filter(|c| *c != station)
        .filter(|_| rng.gen_bool(fraction))
        .collect();
    GridMap::open(width, height, station).with_obstacles(blocked)
}

pub fn free_cells(map: &GridMap) -> Vec<Cell> {
    (0..map.height())
        .flat_map(|y| (0..map.width()).map(move |x| Cell::new(x, y)))
        .filter(|c| map.is_free(*c))
        .collect()
}

/// Breadth-first step counts from `start`; `None` where unreachable.
pub fn bfs(map: &GridMap, start: Cell) -> Vec<Option<u32>> {
    let mut dist = vec![None; map.cell_count()];
    dist[map.index(start)] = Some(0);
    let mut q = VecDeque::from([start]);
    while let Some(c) = q.pop_front() {
        let d = dist[map.index(c)].unwrap();
        for n in [
            Cell::new(c.x + 1, c.y),
            Cell::new(c.x - 1, c.y),
            Cell::new(c.x, c.y + 1),
            Cell::new(c.x, c.y - 1),
        ] {
            if map.is_free(n) && dist[map.index(n)].is_none() {
                dist[map.index(n)] = Some(d + 1);
                q.push_back(n);
            }
        }
    }
    dist
}

/// Every ordering of `0..n`, generated recursively.
pub fn all_orders(n: usize) -> Vec<Vec<usize>> {
    if n == 0 {
        return vec![vec![]];
    }
    let mut out = Vec::new();
    for rest in all_orders(n - 1) {
        for pos in 0..=rest.len() {
            let mut v = rest.clone();
            v.insert(pos, n - 1);
            out.push(v);
        }
    }
    out
}
