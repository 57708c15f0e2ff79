//! Bid costs from planner path costs, gated by the behavior-tree stage.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;

use crate::allocation::Bid;
use crate::domain::{AgentId, Point, Pose, Task, TaskId, TaskKind};
use crate::math;
use crate::planner::{CostField, PlanError, Planner};

/// Immutable view of an agent taken when a round is announced.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AgentSnapshot {
    pub agent: AgentId,
    pub pose: Pose,
    pub current_task: Option<TaskId>,
    pub k_bt: u8,
}

#[derive(Debug, Clone, Copy)]
pub struct CostQuery<'a> {
    pub snapshot: AgentSnapshot,
    pub announced: &'a [Task],
    pub participation: f64,
}

/// Path cost from `pose` to an inspection target.
pub fn cost_inspect(planner: &Planner<'_>, pose: Pose, task: &Task) -> Result<f64, PlanError> {
    match task.kind {
        TaskKind::Inspect { target } => planner.path_cost(start_point(planner, pose), target),
        TaskKind::PickAndDeliver { .. } => Err(PlanError::InvalidEndpoint),
    }
}

/// Path cost from `pose` to the pick location plus pick to delivery.
pub fn cost_pick_deliver(planner: &Planner<'_>, pose: Pose, task: &Task) -> Result<f64, PlanError> {
    match task.kind {
        TaskKind::PickAndDeliver { pick, deliver } => {
            let first = planner.path_cost(start_point(planner, pose), pick)?;
            let second = planner.path_cost(pick, deliver)?;
            Ok(first + second)
        }
        TaskKind::Inspect { .. } => Err(PlanError::InvalidEndpoint),
    }
}

/// Moves a start position that fell onto an occupied or off-map cell to the
/// nearest free cell centre.
fn start_point(planner: &Planner<'_>, pose: Pose) -> Point {
    let map = planner.map();
    let p = pose.position();
    if map.is_free_point(p) {
        return p;
    }
    map.nearest_free_cell(p).map(|c| map.cell_center(c)).unwrap_or(p)
}

/// Number of bids kept by the participation filter out of `n` candidates.
pub fn participation_count(participation: f64, n: usize) -> usize {
    if n == 0 {
        return 0;
    }
    let k = math::ceil(participation * n as f64 - 1e-9);
    (k.max(1.0) as usize).min(n)
}

/// Memoizes the pick-to-delivery leg, which depends only on the task.
#[derive(Debug, Clone, Default)]
pub struct LegCache {
    legs: BTreeMap<TaskId, Result<f64, PlanError>>,
}

impl LegCache {
    pub fn new() -> Self {
        Self::default()
    }

    fn second_leg(&mut self, planner: &Planner<'_>, task: &Task, pick: Point, deliver: Point) -> Result<f64, PlanError> {
        *self.legs.entry(task.id).or_insert_with(|| planner.path_cost(pick, deliver))
    }
}

/// One agent's bids for an announcement.
///
/// A closed gate (`k_bt == 0`) yields exactly one zero-cost bid on the current
/// task. Otherwise every reachable task is priced by its path cost and the
/// cheapest fraction is kept, always including the current task.
pub fn compute_bids(planner: &Planner<'_>, query: &CostQuery<'_>, cache: &mut LegCache) -> Vec<Bid> {
    let snap = query.snapshot;
    if snap.k_bt == 0 {
        return match snap.current_task {
            Some(t) if query.announced.iter().any(|x| x.id == t) => Vec::from([Bid::new(snap.agent, t, 0.0)]),
            _ => Vec::new(),
        };
    }
    if query.announced.is_empty() {
        return Vec::new();
    }
    let Ok(field) = planner.cost_field(start_point(planner, snap.pose)) else {
        return Vec::new();
    };
    let mut priced: Vec<Bid> = query
        .announced
        .iter()
        .filter_map(|task| task_cost(planner, &field, task, cache).ok().map(|c| Bid::new(snap.agent, task.id, c)))
        .collect();
    let keep = participation_count(query.participation, priced.len());
    priced.sort_by(|a, b| a.cost.total_cmp(&b.cost).then(a.task.cmp(&b.task)));
    let mut kept: Vec<Bid> = priced.iter().take(keep).copied().collect();
    if let Some(current) = snap.current_task {
        if !kept.iter().any(|b| b.task == current) {
            if let Some(b) = priced.iter().find(|b| b.task == current) {
                kept.push(*b);
            }
        }
    }
    kept.sort_by_key(|b| b.task);
    kept
}

fn task_cost(planner: &Planner<'_>, field: &CostField<'_>, task: &Task, cache: &mut LegCache) -> Result<f64, PlanError> {
    let map = planner.map();
    let cell = |p: Point| -> Result<_, PlanError> {
        let c = map.world_to_cell(p).map_err(|_| PlanError::OutOfBounds)?;
        if map.is_occupied(c) {
            return Err(PlanError::InvalidEndpoint);
        }
        Ok(c)
    };
    match task.kind {
        TaskKind::Inspect { target } => field.gamma_to(cell(target)?),
        TaskKind::PickAndDeliver { pick, deliver } => {
            let first = field.gamma_to(cell(pick)?)?;
            let second = cache.second_leg(planner, task, pick, deliver)?;
            Ok(first + second)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::GridMap;
    use crate::planner::{build_risk_layer, RiskParams};

    fn open_map() -> GridMap {
        build_risk_layer(&GridMap::empty(12, 12, 0.5).unwrap(), &RiskParams::default())
    }

    fn at(x: f64, y: f64) -> Pose {
        Pose { x, y, heading: 0.0 }
    }

    fn snapshot(pose: Pose) -> AgentSnapshot {
        AgentSnapshot {
            agent: AgentId(0),
            pose,
            current_task: None,
            k_bt: 1,
        }
    }

    #[test]
    fn inspect_costs() {
        let map = open_map();
        let planner = Planner::new(&map);
        let here = Task::inspect(1, Point::new(0.25, 0.25));
        assert_eq!(cost_inspect(&planner, at(0.25, 0.25), &here), Ok(0.0));
        let far = Task::inspect(2, Point::new(4.25, 0.25));
        assert!((cost_inspect(&planner, at(0.25, 0.25), &far).unwrap() - 4.0).abs() < 1e-12);
    }

    #[test]
    fn pick_deliver_costs_add_legs() {
        let map = open_map();
        let planner = Planner::new(&map);
        let t = Task::pick_deliver(1, Point::new(0.25, 0.25), Point::new(3.25, 0.25));
        assert!((cost_pick_deliver(&planner, at(0.25, 0.25), &t).unwrap() - 3.0).abs() < 1e-12);
        let t = Task::pick_deliver(2, Point::new(2.25, 0.25), Point::new(4.25, 0.25));
        assert!((cost_pick_deliver(&planner, at(0.25, 0.25), &t).unwrap() - 4.0).abs() < 1e-12);
        assert!(cost_pick_deliver(&planner, at(0.25, 0.25), &Task::inspect(3, Point::new(1.0, 1.0))).is_err());
    }

    #[test]
    fn closed_gate_bids_only_on_current_task() {
        let map = open_map();
        let planner = Planner::new(&map);
        let tasks: Vec<Task> = (0..5).map(|i| Task::inspect(i, Point::new(0.25 + i as f64, 1.25))).collect();
        let mut snap = snapshot(at(0.25, 0.25));
        snap.k_bt = 0;
        snap.current_task = Some(TaskId(3));
        let q = CostQuery {
            snapshot: snap,
            announced: &tasks,
            participation: 1.0,
        };
        let bids = compute_bids(&planner, &q, &mut LegCache::new());
        assert_eq!(bids, Vec::from([Bid::new(AgentId(0), TaskId(3), 0.0)]));
    }

    #[test]
    fn participation_keeps_cheapest() {
        let map = open_map();
        let planner = Planner::new(&map);
        let tasks: Vec<Task> = (1..=4).map(|i| Task::inspect(i, Point::new(0.25 + i as f64, 0.25))).collect();
        let q = CostQuery {
            snapshot: snapshot(at(0.25, 0.25)),
            announced: &tasks,
            participation: 0.5,
        };
        let bids = compute_bids(&planner, &q, &mut LegCache::new());
        let costs: Vec<f64> = bids.iter().map(|b| b.cost).collect();
        assert_eq!(bids.len(), 2);
        assert!((costs[0] - 1.0).abs() < 1e-12 && (costs[1] - 2.0).abs() < 1e-12);

        let mut snap = snapshot(at(0.25, 0.25));
        snap.current_task = Some(TaskId(4));
        let q = CostQuery {
            snapshot: snap,
            announced: &tasks,
            participation: 0.25,
        };
        let bids = compute_bids(&planner, &q, &mut LegCache::new());
        let ids: Vec<TaskId> = bids.iter().map(|b| b.task).collect();
        assert_eq!(ids, Vec::from([TaskId(1), TaskId(4)]));
    }

    #[test]
    fn empty_announcement_gives_no_bids() {
        let map = open_map();
        let planner = Planner::new(&map);
        let q = CostQuery {
            snapshot: snapshot(at(1.0, 1.0)),
            announced: &[],
            participation: 1.0,
        };
        assert!(compute_bids(&planner, &q, &mut LegCache::new()).is_empty());
    }

    #[test]
    fn unreachable_tasks_are_skipped() {
        let raw = GridMap::from_ascii(&["..#..", "..#..", "..#.."], 1.0).unwrap();
        let map = build_risk_layer(&raw, &RiskParams::default());
        let planner = Planner::new(&map);
        let tasks = [Task::inspect(1, Point::new(4.5, 1.5)), Task::inspect(2, Point::new(1.5, 2.5))];
        let q = CostQuery {
            snapshot: snapshot(at(0.5, 0.5)),
            announced: &tasks,
            participation: 1.0,
        };
        let bids = compute_bids(&planner, &q, &mut LegCache::new());
        assert_eq!(bids.len(), 1);
        assert_eq!(bids[0].task, TaskId(2));
    }

    #[test]
    fn participation_count_rounds_up() {
        assert_eq!(participation_count(0.3, 10), 3);
        assert_eq!(participation_count(0.3, 7), 3);
        assert_eq!(participation_count(0.01, 7), 1);
        assert_eq!(participation_count(1.0, 7), 7);
        assert_eq!(participation_count(0.5, 0), 0);
    }
}
