//! Risk-aware grid planning.
//!
//! Free cells near obstacles carry a risk penalty that decays linearly with the
//! distance to the closest occupied cell. Paths minimise
//! `gamma = gamma_dist + gamma_risk` over the 8-connected free grid, where each
//! step costs its Euclidean length plus the risk of the cell it enters.

use alloc::collections::BinaryHeap;
use alloc::vec;
use alloc::vec::Vec;
use core::cmp::Ordering;
use core::fmt;

use crate::domain::{Cell, DomainError, GridMap, Point, Pose};
use crate::math;

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct RiskParams {
    /// Distance (m) beyond which a free cell carries no risk.
    pub inflation_distance: f64,
    /// Risk of a free cell touching an obstacle (at zero distance).
    pub risk_weight: f64,
}

impl Default for RiskParams {
    fn default() -> Self {
        Self {
            inflation_distance: 0.4,
            risk_weight: 5.0,
        }
    }
}

impl RiskParams {
    pub fn validate(&self) -> Result<(), PlanError> {
        if !(self.inflation_distance.is_finite() && self.inflation_distance >= 0.0) {
            return Err(PlanError::InvalidParams("inflation_distance must be >= 0"));
        }
        if !(self.risk_weight.is_finite() && self.risk_weight >= 0.0) {
            return Err(PlanError::InvalidParams("risk_weight must be >= 0"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PlanError {
    NoPath,
    InvalidEndpoint,
    OutOfBounds,
    InvalidParams(&'static str),
}

impl fmt::Display for PlanError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PlanError::NoPath => write!(f, "goal unreachable"),
            PlanError::InvalidEndpoint => write!(f, "start or goal on an occupied cell"),
            PlanError::OutOfBounds => write!(f, "start or goal outside the map"),
            PlanError::InvalidParams(why) => write!(f, "invalid risk parameters: {why}"),
        }
    }
}

impl core::error::Error for PlanError {}

impl From<DomainError> for PlanError {
    fn from(_: DomainError) -> Self {
        PlanError::OutOfBounds
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlanResult {
    /// Cell centers from the start cell to the goal cell; empty if they coincide.
    pub path: Vec<Pose>,
    pub cells: Vec<Cell>,
    pub gamma_dist: f64,
    pub gamma_risk: f64,
    pub gamma: f64,
}

impl PlanResult {
    pub fn points(&self) -> Vec<Point> {
        self.path.iter().map(Pose::position).collect()
    }
}

/// Returns a copy of `map` whose risk layer is filled from `params`.
pub fn build_risk_layer(map: &GridMap, params: &RiskParams) -> GridMap {
    let mut out = map.clone();
    let res = map.resolution();
    let infl = params.inflation_distance;
    let reach = if infl > 0.0 { math::ceil(infl / res) as isize } else { 0 };
    let mut risk = vec![0.0; map.width() * map.height()];
    for row in 0..map.height() {
        for col in 0..map.width() {
            let cell = Cell::new(row, col);
            let idx = map.index(cell);
            if map.is_occupied(cell) {
                risk[idx] = f64::INFINITY;
                continue;
            }
            if reach == 0 || params.risk_weight == 0.0 {
                continue;
            }
            let mut best_sq = f64::INFINITY;
            for dr in -reach..=reach {
                for dc in -reach..=reach {
                    let r = row as isize + dr;
                    let c = col as isize + dc;
                    if r < 0 || c < 0 || r >= map.height() as isize || c >= map.width() as isize {
                        continue;
                    }
                    if map.is_occupied(Cell::new(r as usize, c as usize)) {
                        let d_sq = ((dr * dr + dc * dc) as f64) * res * res;
                        best_sq = best_sq.min(d_sq);
                    }
                }
            }
            if best_sq.is_finite() {
                let d = math::sqrt(best_sq);
                risk[idx] = params.risk_weight * (1.0 - d / infl).max(0.0);
            }
        }
    }
    out.set_risk_layer(risk);
    out
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct QueueEntry {
    cost: f64,
    cell: Cell,
}

impl Eq for QueueEntry {}

impl Ord for QueueEntry {
    // Min-heap on cost; ties pop the lower row, then the lower column.
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .cost
            .total_cmp(&self.cost)
            .then_with(|| other.cell.cmp(&self.cell))
    }
}

impl PartialOrd for QueueEntry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

const NEIGHBORS: [(isize, isize); 8] = [
    (-1, -1),
    (-1, 0),
    (-1, 1),
    (0, -1),
    (0, 1),
    (1, -1),
    (1, 0),
    (1, 1),
];

/// Single-source shortest-path tree over a risk-annotated map.
#[derive(Debug, Clone)]
pub struct CostField<'m> {
    map: &'m GridMap,
    source: Cell,
    dist: Vec<f64>,
    parent: Vec<usize>,
}

const NO_PARENT: usize = usize::MAX;

impl<'m> CostField<'m> {
    /// Dijkstra from `source`; stops early once `target` (if any) is settled.
    fn compute(map: &'m GridMap, source: Cell, target: Option<Cell>) -> Self {
        let n = map.width() * map.height();
        let mut dist = vec![f64::INFINITY; n];
        let mut parent = vec![NO_PARENT; n];
        let mut done = vec![false; n];
        let mut heap = BinaryHeap::new();
        let res = map.resolution();
        let diag = res * core::f64::consts::SQRT_2;
        let s = map.index(source);
        dist[s] = 0.0;
        heap.push(QueueEntry { cost: 0.0, cell: source });
        while let Some(QueueEntry { cost, cell }) = heap.pop() {
            let idx = map.index(cell);
            if done[idx] {
                continue;
            }
            done[idx] = true;
            if Some(cell) == target {
                break;
            }
            for (dr, dc) in NEIGHBORS {
                let r = cell.row as isize + dr;
                let c = cell.col as isize + dc;
                if r < 0 || c < 0 || r >= map.height() as isize || c >= map.width() as isize {
                    continue;
                }
                let next = Cell::new(r as usize, c as usize);
                if map.is_occupied(next) {
                    continue;
                }
                let nidx = map.index(next);
                if done[nidx] {
                    continue;
                }
                let step = if dr != 0 && dc != 0 { diag } else { res };
                let cand = cost + step + map.risk(next);
                if cand < dist[nidx] {
                    dist[nidx] = cand;
                    parent[nidx] = idx;
                    heap.push(QueueEntry { cost: cand, cell: next });
                }
            }
        }
        Self {
            map,
            source,
            dist,
            parent,
        }
    }

    pub fn source(&self) -> Cell {
        self.source
    }

    /// Path to `goal`, with the gamma terms recomputed along the path.
    pub fn plan_to(&self, goal: Cell, goal_heading: Option<f64>) -> Result<PlanResult, PlanError> {
        let map = self.map;
        if !map.contains(goal) {
            return Err(PlanError::OutOfBounds);
        }
        if map.is_occupied(goal) {
            return Err(PlanError::InvalidEndpoint);
        }
        if goal == self.source {
            return Ok(PlanResult {
                path: Vec::new(),
                cells: Vec::new(),
                gamma_dist: 0.0,
                gamma_risk: 0.0,
                gamma: 0.0,
            });
        }
        let gidx = map.index(goal);
        if !self.dist[gidx].is_finite() {
            return Err(PlanError::NoPath);
        }
        let mut cells = Vec::new();
        let mut idx = gidx;
        while idx != NO_PARENT {
            cells.push(map.cell_of_index(idx));
            idx = self.parent[idx];
        }
        cells.reverse();
        let (gamma_dist, gamma_risk) = path_gamma(map, &cells);
        let path = cells_to_poses(map, &cells, goal_heading);
        Ok(PlanResult {
            path,
            cells,
            gamma_dist,
            gamma_risk,
            gamma: gamma_dist + gamma_risk,
        })
    }

    pub fn gamma_to(&self, goal: Cell) -> Result<f64, PlanError> {
        self.plan_to(goal, None).map(|p| p.gamma)
    }
}

/// Distance and risk terms of a cell path.
///
/// The distance term counts straight and diagonal steps, and the risk term sums
/// the entered cells' risks in ascending order, so paths that use the same
/// steps and the same risk values get bit-identical totals regardless of order.
pub fn path_gamma(map: &GridMap, cells: &[Cell]) -> (f64, f64) {
    let mut straight = 0u64;
    let mut diagonal = 0u64;
    let mut risks: Vec<f64> = Vec::with_capacity(cells.len());
    for w in cells.windows(2) {
        let (a, b) = (w[0], w[1]);
        if a.row != b.row && a.col != b.col {
            diagonal += 1;
        } else {
            straight += 1;
        }
        risks.push(map.risk(b));
    }
    risks.sort_by(f64::total_cmp);
    let res = map.resolution();
    let gamma_dist = res * (straight as f64 + diagonal as f64 * core::f64::consts::SQRT_2);
    let gamma_risk = risks.iter().sum();
    (gamma_dist, gamma_risk)
}

fn cells_to_poses(map: &GridMap, cells: &[Cell], goal_heading: Option<f64>) -> Vec<Pose> {
    let points: Vec<Point> = cells.iter().map(|&c| map.cell_center(c)).collect();
    let mut out = Vec::with_capacity(points.len());
    let mut heading = 0.0;
    for (i, p) in points.iter().enumerate() {
        if let Some(next) = points.get(i + 1) {
            heading = math::atan2(next.y - p.y, next.x - p.x);
        } else if let Some(h) = goal_heading {
            heading = math::wrap_angle(h);
        }
        out.push(Pose {
            x: p.x,
            y: p.y,
            heading,
        });
    }
    out
}

/// Endpoint-checked planning over a risk-annotated map.
#[derive(Debug, Clone, Copy)]
pub struct Planner<'m> {
    map: &'m GridMap,
}

impl<'m> Planner<'m> {
    /// `map` must already carry its risk layer (see [`build_risk_layer`]).
    pub fn new(map: &'m GridMap) -> Self {
        Self { map }
    }

    pub fn map(&self) -> &'m GridMap {
        self.map
    }

    fn endpoint(&self, p: Point) -> Result<Cell, PlanError> {
        let cell = self.map.world_to_cell(p).map_err(|_| PlanError::OutOfBounds)?;
        if self.map.is_occupied(cell) {
            return Err(PlanError::InvalidEndpoint);
        }
        Ok(cell)
    }

    pub fn cost_field(&self, start: Point) -> Result<CostField<'m>, PlanError> {
        let s = self.endpoint(start)?;
        Ok(CostField::compute(self.map, s, None))
    }

    pub fn plan(&self, start: Pose, goal: Pose) -> Result<PlanResult, PlanError> {
        let s = self.endpoint(start.position())?;
        let g = self.endpoint(goal.position())?;
        CostField::compute(self.map, s, Some(g)).plan_to(g, Some(goal.heading))
    }

    pub fn path_cost(&self, start: Point, goal: Point) -> Result<f64, PlanError> {
        let s = self.endpoint(start)?;
        let g = self.endpoint(goal)?;
        CostField::compute(self.map, s, Some(g)).gamma_to(g)
    }
}

/// Builds the risk layer and plans in one call.
pub fn plan(map: &GridMap, params: &RiskParams, start: Pose, goal: Pose) -> Result<PlanResult, PlanError> {
    let risky = build_risk_layer(map, params);
    Planner::new(&risky).plan(start, goal)
}
