//! Visiting order for camera positions.
//!
//! The production planner is a nested zig-zag: the volume is cut into slabs
//! along X and each slab into columns along Y. Slabs are visited in +X
//! order; inside a slab the columns are visited alternately in +Y and -Y
//! order (starting with +Y), and inside each column the heights are swept
//! alternately upward and downward (starting upward). Both alternations
//! count only non-empty slabs and columns and carry over from one slab to
//! the next.
//!
//! Nearest-neighbour and exhaustive search are provided for comparison.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::CameraPose;
pub use crate::geometry::Volume;
use crate::kinematics::{move_time, MotionContext};
use crate::par::Execution;

/// Largest set accepted by [`brute_force_tsp`].
pub const BRUTE_FORCE_MAX: usize = 10;

/// `n` seeded, uniformly distributed points inside `volume`.
pub fn random_waypoints(n: usize, volume: &Volume, seed: u64) -> Vec<[f64; 3]> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| std::array::from_fn(|a| rng.gen_range(volume.min[a]..=volume.max[a])))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WaypointSet {
    positions: Vec<[f64; 3]>,
    volume: Volume,
}

impl WaypointSet {
    pub fn new(positions: Vec<[f64; 3]>, volume: Volume) -> Result<Self> {
        volume.validate()?;
        for (i, p) in positions.iter().enumerate() {
            if !volume.contains(*p) {
                return Err(Error::domain(format!(
                    "waypoint {i} {p:?} lies outside the volume"
                )));
            }
        }
        let mut sorted: Vec<&[f64; 3]> = positions.iter().collect();
        sorted.sort_by(|a, b| lex_cmp(a, b));
        if sorted.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::domain("waypoints must be distinct"));
        }
        Ok(Self { positions, volume })
    }

    pub fn positions(&self) -> &[[f64; 3]] {
        &self.positions
    }

    pub fn volume(&self) -> &Volume {
        &self.volume
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ZigzagParams {
    /// Slab width along X, mm.
    pub slab_width: f64,
    /// Column width along Y, mm.
    pub column_width: f64,
}

impl Default for ZigzagParams {
    fn default() -> Self {
        Self {
            slab_width: 200.0,
            column_width: 200.0,
        }
    }
}

impl ZigzagParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.slab_width > 0.0 && self.column_width > 0.0) {
            return Err(Error::domain("slab and column widths must be positive"));
        }
        Ok(())
    }
}

/// A visiting order: a permutation of waypoint indices.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Route(pub Vec<usize>);

impl Route {
    pub fn order(&self) -> &[usize] {
        &self.0
    }

    pub fn is_permutation_of(&self, n: usize) -> bool {
        let mut seen = vec![false; n];
        self.0.len() == n
            && self
                .0
                .iter()
                .all(|&i| i < n && !std::mem::replace(&mut seen[i], true))
    }
}

fn lex_cmp(a: &[f64; 3], b: &[f64; 3]) -> std::cmp::Ordering {
    a[0].total_cmp(&b[0])
        .then(a[1].total_cmp(&b[1]))
        .then(a[2].total_cmp(&b[2]))
}

fn bucket(value: f64, origin: f64, width: f64) -> i64 {
    ((value - origin) / width).floor() as i64
}

/// Zig-zag order over raw positions. Duplicate positions are allowed here.
pub fn zigzag_order(positions: &[[f64; 3]], volume: &Volume, params: &ZigzagParams) -> Vec<usize> {
    let mut cells: BTreeMap<i64, BTreeMap<i64, Vec<usize>>> = BTreeMap::new();
    for (i, p) in positions.iter().enumerate() {
        let slab = bucket(p[0], volume.min[0], params.slab_width);
        let column = bucket(p[1], volume.min[1], params.column_width);
        cells.entry(slab).or_default().entry(column).or_default().push(i);
    }

    let mut order = Vec::with_capacity(positions.len());
    let mut upward = true;
    for (slab_ordinal, columns) in cells.into_values().enumerate() {
        let columns: Vec<Vec<usize>> = if slab_ordinal % 2 == 0 {
            columns.into_values().collect()
        } else {
            columns.into_values().rev().collect()
        };
        for mut members in columns {
            // ties in height fall back to ascending (x, y)
            members.sort_by(|&a, &b| {
                let (pa, pb) = (&positions[a], &positions[b]);
                let z = if upward {
                    pa[2].total_cmp(&pb[2])
                } else {
                    pb[2].total_cmp(&pa[2])
                };
                z.then(pa[0].total_cmp(&pb[0])).then(pa[1].total_cmp(&pb[1]))
            });
            order.extend(members);
            upward = !upward;
        }
    }
    order
}

pub fn plan_zigzag(set: &WaypointSet, params: &ZigzagParams) -> Result<Route> {
    params.validate()?;
    if set.is_empty() {
        return Err(Error::domain("cannot plan a route over an empty waypoint set"));
    }
    Ok(Route(zigzag_order(set.positions(), set.volume(), params)))
}

fn dist(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)).sqrt()
}

/// Euclidean length of the open path.
pub fn route_distance(route: &Route, set: &WaypointSet) -> f64 {
    let p = set.positions();
    route.0.windows(2).map(|w| dist(&p[w[0]], &p[w[1]])).sum()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RouteCost {
    pub total_seconds: f64,
    pub total_mm: f64,
    pub leg_seconds: Vec<f64>,
}

/// Travel time and distance of a route under the kinematics model. The
/// camera orientation is held fixed, so only the linear axes contribute.
pub fn route_cost(route: &Route, set: &WaypointSet, ctx: &MotionContext) -> Result<RouteCost> {
    if !route.is_permutation_of(set.len()) {
        return Err(Error::domain("route is not a permutation of the waypoint set"));
    }
    let p = set.positions();
    let leg_seconds = route
        .0
        .windows(2)
        .map(|w| move_time(&CameraPose::at(p[w[0]]), &CameraPose::at(p[w[1]]), ctx))
        .collect::<Result<Vec<_>>>()?;
    Ok(RouteCost {
        total_seconds: leg_seconds.iter().sum(),
        total_mm: route_distance(route, set),
        leg_seconds,
    })
}

/// Greedy tour starting at the waypoint closest to the volume's minimum
/// corner; ties go to the lower index.
pub fn nearest_neighbor_route(set: &WaypointSet) -> Result<Route> {
    let p = set.positions();
    if p.is_empty() {
        return Err(Error::domain("cannot plan a route over an empty waypoint set"));
    }
    let pick = |from: &[f64; 3], visited: &[bool]| {
        (0..p.len())
            .filter(|&i| !visited[i])
            .min_by(|&a, &b| dist(from, &p[a]).total_cmp(&dist(from, &p[b])).then(a.cmp(&b)))
    };
    let mut visited = vec![false; p.len()];
    let mut order = Vec::with_capacity(p.len());
    let mut current = set.volume().min;
    while let Some(next) = pick(&current, &visited) {
        visited[next] = true;
        order.push(next);
        current = p[next];
    }
    Ok(Route(order))
}

#[derive(Debug, Clone)]
struct Best {
    cost: f64,
    order: Vec<usize>,
}

impl Best {
    fn better_than(&self, other: &Best) -> bool {
        match self.cost.total_cmp(&other.cost) {
            std::cmp::Ordering::Less => true,
            std::cmp::Ordering::Greater => false,
            std::cmp::Ordering::Equal => self.order < other.order,
        }
    }
}

struct Search<'a> {
    d: &'a [Vec<f64>],
    path: Vec<usize>,
    used: Vec<bool>,
    best: Option<Best>,
}

impl Search<'_> {
    // depth-first in lexicographic order, so the first path found at a given
    // cost is the lexicographically smallest one
    fn extend(&mut self, cost: f64) {
        if let Some(b) = &self.best {
            if cost > b.cost {
                return;
            }
        }
        let n = self.d.len();
        if self.path.len() == n {
            let improves = self.best.as_ref().is_none_or(|b| cost < b.cost);
            if improves {
                self.best = Some(Best {
                    cost,
                    order: self.path.clone(),
                });
            }
            return;
        }
        let last = *self.path.last().expect("search starts from a fixed first node");
        for next in 0..n {
            if self.used[next] {
                continue;
            }
            self.used[next] = true;
            self.path.push(next);
            self.extend(cost + self.d[last][next]);
            self.path.pop();
            self.used[next] = false;
        }
    }
}

fn best_from(start: usize, d: &[Vec<f64>]) -> Best {
    let mut used = vec![false; d.len()];
    used[start] = true;
    let mut s = Search {
        d,
        path: vec![start],
        used,
        best: None,
    };
    s.extend(0.0);
    s.best.expect("at least one completion")
}

/// Shortest open path (Euclidean, free endpoints) over all orderings.
/// Among equal-length paths the lexicographically smallest order wins, so
/// the result does not depend on how the search is split across threads.
pub fn brute_force_tsp(set: &WaypointSet, exec: Execution) -> Result<Route> {
    let p = set.positions();
    let n = p.len();
    if n == 0 {
        return Err(Error::domain("cannot plan a route over an empty waypoint set"));
    }
    if n > BRUTE_FORCE_MAX {
        return Err(Error::Size {
            size: n,
            max: BRUTE_FORCE_MAX,
        });
    }
    let d: Vec<Vec<f64>> = p
        .iter()
        .map(|a| p.iter().map(|b| dist(a, b)).collect())
        .collect();
    let candidates = exec.map_range(n, |start| best_from(start, &d));
    let best = candidates
        .into_iter()
        .reduce(|a, b| if b.better_than(&a) { b } else { a })
        .expect("n >= 1");
    Ok(Route(best.order))
}
