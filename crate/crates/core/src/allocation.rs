//! Bid to profit conversion and the exact one-task-per-agent assignment solver.
//!
//! Profits are `priority * (c_max - c + 1)`, so every bid edge carries a
//! strictly positive profit and the solver never prefers leaving an agent idle
//! over giving it a task it bid on. The solver is a sparse variant of the
//! shortest augmenting path method for rectangular assignment: every agent gets
//! a private zero-profit "idle" column so a complete row matching always
//! exists, and each augmentation is a Dijkstra search over bid edges only. The
//! work therefore scales with the number of bids rather than `n_a * n_t`.

use alloc::collections::{BTreeMap, BTreeSet, BinaryHeap};
use alloc::vec;
use alloc::vec::Vec;
use core::cmp::Ordering;
use core::fmt;

use crate::domain::{AgentId, TaskId};

/// Offset added to inverted costs so the most expensive bid still has profit > 0.
pub const PROFIT_EPSILON: f64 = 1.0;

/// Default priority multiplier for urgent tasks.
pub const HIGH_PRIORITY: f64 = 1000.0;

/// Largest side accepted by [`brute_force_assignment`].
pub const BRUTE_FORCE_LIMIT: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AllocError {
    InvalidBid { agent: AgentId, task: TaskId },
    DuplicateBid { agent: AgentId, task: TaskId },
    InvalidPriority(TaskId),
    InstanceTooLarge { agents: usize, tasks: usize },
    Internal(&'static str),
}

impl fmt::Display for AllocError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AllocError::InvalidBid { agent, task } => {
                write!(f, "bid of agent {agent} on task {task} is negative or non-finite")
            }
            AllocError::DuplicateBid { agent, task } => {
                write!(f, "agent {agent} bid twice on task {task}")
            }
            AllocError::InvalidPriority(t) => write!(f, "task {t} has a non-positive priority"),
            AllocError::InstanceTooLarge { agents, tasks } => {
                write!(f, "{agents}x{tasks} instance exceeds the brute-force limit")
            }
            AllocError::Internal(why) => write!(f, "internal solver error: {why}"),
        }
    }
}

impl core::error::Error for AllocError {}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Bid {
    pub agent: AgentId,
    pub task: TaskId,
    pub cost: f64,
}

impl Bid {
    pub fn new(agent: AgentId, task: TaskId, cost: f64) -> Self {
        Self { agent, task, cost }
    }
}

/// Sparse profit table; present keys are exactly the edges of the bid graph.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ProfitMatrix {
    entries: BTreeMap<(AgentId, TaskId), f64>,
}

impl ProfitMatrix {
    pub fn new() -> Self {
        Self::default()
    }

    /// Inserts or replaces an edge. Profits must be finite and positive.
    pub fn insert(&mut self, agent: AgentId, task: TaskId, profit: f64) -> Result<(), AllocError> {
        if !(profit.is_finite() && profit > 0.0) {
            return Err(AllocError::Internal("profit must be finite and positive"));
        }
        self.entries.insert((agent, task), profit);
        Ok(())
    }

    pub fn get(&self, agent: AgentId, task: TaskId) -> Option<f64> {
        self.entries.get(&(agent, task)).copied()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (AgentId, TaskId, f64)> + '_ {
        self.entries.iter().map(|(&(a, t), &p)| (a, t, p))
    }

    pub fn agents(&self) -> Vec<AgentId> {
        let set: BTreeSet<AgentId> = self.entries.keys().map(|k| k.0).collect();
        set.into_iter().collect()
    }

    pub fn tasks(&self) -> Vec<TaskId> {
        let set: BTreeSet<TaskId> = self.entries.keys().map(|k| k.1).collect();
        set.into_iter().collect()
    }

    /// Copy with every profit multiplied by `factor` (> 0).
    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            entries: self.entries.iter().map(|(&k, &p)| (k, p * factor)).collect(),
        }
    }
}

/// Solved assignment: pairs sorted by agent id.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Allocation {
    pub pairs: Vec<(AgentId, TaskId)>,
    pub objective_value: f64,
}

impl Allocation {
    fn from_pairs(mut pairs: Vec<(AgentId, TaskId)>, profits: &ProfitMatrix) -> Result<Self, AllocError> {
        pairs.sort();
        let mut objective_value = 0.0;
        for &(a, t) in &pairs {
            objective_value += profits
                .get(a, t)
                .ok_or(AllocError::Internal("assignment uses a missing edge"))?;
        }
        Ok(Self {
            pairs,
            objective_value,
        })
    }

    pub fn task_of(&self, agent: AgentId) -> Option<TaskId> {
        self.pairs.iter().find(|p| p.0 == agent).map(|p| p.1)
    }

    pub fn agent_of(&self, task: TaskId) -> Option<AgentId> {
        self.pairs.iter().find(|p| p.1 == task).map(|p| p.0)
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    /// Checks the one-task-per-agent / one-agent-per-task constraints and
    /// that every pair is an edge of `profits`.
    pub fn is_feasible_for(&self, profits: &ProfitMatrix) -> bool {
        let mut agents = BTreeSet::new();
        let mut tasks = BTreeSet::new();
        self.pairs
            .iter()
            .all(|&(a, t)| agents.insert(a) && tasks.insert(t) && profits.get(a, t).is_some())
    }
}

/// Inverts costs into profits and applies per-task priority multipliers.
///
/// Tasks missing from `priorities` default to priority 1.
pub fn costs_to_profits(bids: &[Bid], priorities: &BTreeMap<TaskId, f64>) -> Result<ProfitMatrix, AllocError> {
    let mut seen = BTreeSet::new();
    let mut c_max: f64 = 0.0;
    for bid in bids {
        if !(bid.cost.is_finite() && bid.cost >= 0.0) {
            return Err(AllocError::InvalidBid {
                agent: bid.agent,
                task: bid.task,
            });
        }
        if !seen.insert((bid.agent, bid.task)) {
            return Err(AllocError::DuplicateBid {
                agent: bid.agent,
                task: bid.task,
            });
        }
        c_max = c_max.max(bid.cost);
    }
    let mut out = ProfitMatrix::new();
    for bid in bids {
        let priority = priorities.get(&bid.task).copied().unwrap_or(1.0);
        if !(priority.is_finite() && priority > 0.0) {
            return Err(AllocError::InvalidPriority(bid.task));
        }
        out.insert(bid.agent, bid.task, priority * (c_max - bid.cost + PROFIT_EPSILON))?;
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Frontier {
    dist: f64,
    assigned: bool,
    col: usize,
}

impl Eq for Frontier {}

impl Ord for Frontier {
    // BinaryHeap is a max-heap: invert so the smallest distance pops first,
    // then free columns, then the lowest column index.
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .dist
            .total_cmp(&self.dist)
            .then_with(|| other.assigned.cmp(&self.assigned))
            .then_with(|| other.col.cmp(&self.col))
    }
}

impl PartialOrd for Frontier {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

const NONE: usize = usize::MAX;

/// Exact maximum-profit assignment over the bid graph.
pub fn solve_assignment(profits: &ProfitMatrix) -> Result<Allocation, AllocError> {
    if profits.is_empty() {
        return Ok(Allocation::default());
    }
    let agents = profits.agents();
    let tasks = profits.tasks();
    let task_index: BTreeMap<TaskId, usize> = tasks.iter().enumerate().map(|(i, &t)| (t, i)).collect();
    let n_rows = agents.len();
    let n_tasks = tasks.len();
    let n_cols = n_tasks + n_rows;

    // Minimisation form: cost = -profit on bid edges, 0 on the idle column.
    let mut adjacency: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n_rows];
    {
        let row_index: BTreeMap<AgentId, usize> = agents.iter().enumerate().map(|(i, &a)| (a, i)).collect();
        for (a, t, p) in profits.iter() {
            adjacency[row_index[&a]].push((task_index[&t], -p));
        }
        for (row, edges) in adjacency.iter_mut().enumerate() {
            edges.push((n_tasks + row, 0.0));
        }
    }

    let mut u = vec![0.0; n_rows];
    let mut v = vec![0.0; n_cols];
    let mut col4row = vec![NONE; n_rows];
    let mut row4col = vec![NONE; n_cols];
    let mut path = vec![NONE; n_cols];
    let mut spc = vec![f64::INFINITY; n_cols];
    let mut scanned_col = vec![false; n_cols];
    let mut scanned_rows: Vec<usize> = Vec::new();
    let mut scanned_cols: Vec<usize> = Vec::new();
    let mut touched: Vec<usize> = Vec::new();
    let mut heap = BinaryHeap::new();

    for cur_row in 0..n_rows {
        for &j in &touched {
            spc[j] = f64::INFINITY;
            path[j] = NONE;
            scanned_col[j] = false;
        }
        touched.clear();
        scanned_rows.clear();
        scanned_cols.clear();
        heap.clear();

        let mut min_val = 0.0;
        let mut i = cur_row;
        let sink;
        loop {
            scanned_rows.push(i);
            for &(j, c) in &adjacency[i] {
                if scanned_col[j] {
                    continue;
                }
                let r = min_val + c - u[i] - v[j];
                if r < spc[j] {
                    if spc[j] == f64::INFINITY {
                        touched.push(j);
                    }
                    spc[j] = r;
                    path[j] = i;
                    heap.push(Frontier {
                        dist: r,
                        assigned: row4col[j] != NONE,
                        col: j,
                    });
                }
            }
            let next = loop {
                match heap.pop() {
                    Some(f) if scanned_col[f.col] || f.dist != spc[f.col] => continue,
                    other => break other,
                }
            };
            let Some(next) = next else {
                return Err(AllocError::Internal("no augmenting path"));
            };
            let j = next.col;
            min_val = spc[j];
            scanned_col[j] = true;
            scanned_cols.push(j);
            if row4col[j] == NONE {
                sink = j;
                break;
            }
            i = row4col[j];
        }

        // Dual update keeps reduced costs non-negative on matched edges.
        u[cur_row] += min_val;
        for &r in &scanned_rows {
            if r != cur_row {
                u[r] += min_val - spc[col4row[r]];
            }
        }
        for &j in &scanned_cols {
            v[j] -= min_val - spc[j];
        }

        let mut j = sink;
        loop {
            let r = path[j];
            row4col[j] = r;
            let prev = col4row[r];
            col4row[r] = j;
            if r == cur_row {
                break;
            }
            j = prev;
        }
    }

    let pairs: Vec<(AgentId, TaskId)> = col4row
        .iter()
        .enumerate()
        .filter(|&(_, &j)| j < n_tasks)
        .map(|(r, &j)| (agents[r], tasks[j]))
        .collect();
    let alloc = Allocation::from_pairs(pairs, profits)?;
    if !alloc.is_feasible_for(profits) {
        return Err(AllocError::Internal("solver produced an infeasible assignment"));
    }
    Ok(alloc)
}

/// Exhaustive search over every feasible assignment. Verification oracle.
///
/// Agents are visited in id order; each one tries its tasks in id order and
/// then "idle". Only a strictly better objective replaces the incumbent, so
/// among tied optima the first one in that enumeration order wins.
pub fn brute_force_assignment(profits: &ProfitMatrix) -> Result<Allocation, AllocError> {
    let agents = profits.agents();
    let tasks = profits.tasks();
    if agents.len() > BRUTE_FORCE_LIMIT || tasks.len() > BRUTE_FORCE_LIMIT {
        return Err(AllocError::InstanceTooLarge {
            agents: agents.len(),
            tasks: tasks.len(),
        });
    }

    struct Search<'a> {
        profits: &'a ProfitMatrix,
        agents: &'a [AgentId],
        tasks: &'a [TaskId],
        used: Vec<bool>,
        current: Vec<(AgentId, TaskId)>,
        best: Option<(f64, Vec<(AgentId, TaskId)>)>,
    }

    impl Search<'_> {
        fn visit(&mut self, depth: usize) {
            if depth == self.agents.len() {
                let value: f64 = self
                    .current
                    .iter()
                    .map(|&(a, t)| self.profits.get(a, t).unwrap_or(0.0))
                    .sum();
                let better = match &self.best {
                    None => true,
                    Some((b, _)) => value > *b,
                };
                if better {
                    self.best = Some((value, self.current.clone()));
                }
                return;
            }
            let agent = self.agents[depth];
            for (ti, &task) in self.tasks.iter().enumerate() {
                if self.used[ti] || self.profits.get(agent, task).is_none() {
                    continue;
                }
                self.used[ti] = true;
                self.current.push((agent, task));
                self.visit(depth + 1);
                self.current.pop();
                self.used[ti] = false;
            }
            self.visit(depth + 1);
        }
    }

    let mut search = Search {
        profits,
        agents: &agents,
        tasks: &tasks,
        used: vec![false; tasks.len()],
        current: Vec::new(),
        best: None,
    };
    search.visit(0);
    let pairs = search.best.map(|(_, p)| p).unwrap_or_default();
    Allocation::from_pairs(pairs, profits)
}
