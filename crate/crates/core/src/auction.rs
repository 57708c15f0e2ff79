//! Announce / bid / allocate rounds over a task pool.
//!
//! Every round announces each task that is not yet completed, asks every
//! registered agent for bids, converts them to profits and solves the
//! assignment. Tasks already assigned are auctioned again each round, so an
//! agent keeps its task only as long as its bid stays competitive; agents that
//! passed a critical stage protect their task by bidding a single zero cost.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::vec::Vec;
use core::fmt;

use crate::allocation::{costs_to_profits, solve_assignment, AllocError, Allocation, Bid};
use crate::domain::{AgentId, Task, TaskId, TaskStatus};

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct AuctionConfig {
    pub cycle_delay_ms: f64,
    /// Fraction of announced tasks each agent bids on, cheapest first.
    pub participation: f64,
}

impl Default for AuctionConfig {
    fn default() -> Self {
        Self {
            cycle_delay_ms: 100.0,
            participation: 1.0,
        }
    }
}

impl AuctionConfig {
    pub fn validate(&self) -> Result<(), AuctionError> {
        if !(self.cycle_delay_ms.is_finite() && self.cycle_delay_ms >= 0.0) {
            return Err(AuctionError::InvalidConfig("cycle_delay_ms must be finite and >= 0"));
        }
        if !(self.participation > 0.0 && self.participation <= 1.0) {
            return Err(AuctionError::InvalidConfig("participation must lie in (0, 1]"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum AuctionError {
    DuplicateAgent(AgentId),
    DuplicateTask(TaskId),
    UnknownTask(TaskId),
    InvalidStatus(TaskId),
    InvalidConfig(&'static str),
    /// The solver moved a task that passed its critical stage.
    RetentionViolated { task: TaskId, holder: AgentId, winner: AgentId },
    Solver(AllocError),
}

impl fmt::Display for AuctionError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AuctionError::DuplicateAgent(a) => write!(f, "agent {a} is already registered"),
            AuctionError::DuplicateTask(t) => write!(f, "task {t} is already in the pool"),
            AuctionError::UnknownTask(t) => write!(f, "task {t} is not in the pool"),
            AuctionError::InvalidStatus(t) => write!(f, "task {t} has an invalid status for this operation"),
            AuctionError::InvalidConfig(why) => write!(f, "invalid auction config: {why}"),
            AuctionError::RetentionViolated { task, holder, winner } => {
                write!(f, "task {task} held by {holder} past its critical stage was given to {winner}")
            }
            AuctionError::Solver(e) => write!(f, "allocation failed: {e}"),
        }
    }
}

impl core::error::Error for AuctionError {}

impl From<AllocError> for AuctionError {
    fn from(e: AllocError) -> Self {
        AuctionError::Solver(e)
    }
}

/// Reason an agent produced no bids for a round.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BidError(pub &'static str);

impl fmt::Display for BidError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.0)
    }
}

/// Produces an agent's bids for a list of announced tasks.
pub trait BidSource {
    fn bids(&mut self, agent: AgentId, announced: &[Task]) -> Result<Vec<Bid>, BidError>;
}

impl<F> BidSource for F
where
    F: FnMut(AgentId, &[Task]) -> Result<Vec<Bid>, BidError>,
{
    fn bids(&mut self, agent: AgentId, announced: &[Task]) -> Result<Vec<Bid>, BidError> {
        self(agent, announced)
    }
}

/// Monotonic millisecond clock used to time the allocate stage.
pub trait Clock {
    fn now_ms(&self) -> f64;
}

/// Reports zero elapsed time; for deterministic runs.
#[derive(Debug, Clone, Copy, Default)]
pub struct NullClock;

impl Clock for NullClock {
    fn now_ms(&self) -> f64 {
        0.0
    }
}

/// What an agent is told after a round.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Notification {
    Assigned { agent: AgentId, task: TaskId },
    /// The agent held `previous` before this round and now holds nothing.
    Unassigned { agent: AgentId, previous: TaskId },
}

#[derive(Debug, Clone, PartialEq)]
pub struct AuctionRoundRecord {
    pub round: u64,
    /// Simulated time at which the round started, seconds.
    pub t: f64,
    pub announced: Vec<TaskId>,
    pub bids: Vec<Bid>,
    pub allocation: Allocation,
    /// Wall time spent converting and solving, milliseconds.
    pub solve_ms: f64,
    pub notifications: Vec<Notification>,
    /// Agents whose bid callback failed or returned malformed bids.
    pub silent_agents: Vec<AgentId>,
}

#[derive(Debug, Clone)]
pub struct Coordinator {
    config: AuctionConfig,
    agents: BTreeSet<AgentId>,
    pool: BTreeMap<TaskId, Task>,
    holdings: BTreeMap<AgentId, TaskId>,
    round: u64,
    last_round_t: Option<f64>,
}

impl Coordinator {
    pub fn new(config: AuctionConfig) -> Result<Self, AuctionError> {
        config.validate()?;
        Ok(Self {
            config,
            agents: BTreeSet::new(),
            pool: BTreeMap::new(),
            holdings: BTreeMap::new(),
            round: 0,
            last_round_t: None,
        })
    }

    pub fn config(&self) -> &AuctionConfig {
        &self.config
    }

    pub fn register_agent(&mut self, id: AgentId) -> Result<(), AuctionError> {
        if !self.agents.insert(id) {
            return Err(AuctionError::DuplicateAgent(id));
        }
        Ok(())
    }

    pub fn agents(&self) -> impl Iterator<Item = AgentId> + '_ {
        self.agents.iter().copied()
    }

    pub fn submit_task(&mut self, task: Task) -> Result<(), AuctionError> {
        if self.pool.contains_key(&task.id) {
            return Err(AuctionError::DuplicateTask(task.id));
        }
        if task.status != TaskStatus::Pending {
            return Err(AuctionError::InvalidStatus(task.id));
        }
        self.pool.insert(task.id, task);
        Ok(())
    }

    pub fn task(&self, id: TaskId) -> Option<&Task> {
        self.pool.get(&id)
    }

    /// All tasks ever submitted, by id.
    pub fn pool(&self) -> impl Iterator<Item = &Task> + '_ {
        self.pool.values()
    }

    pub fn holding(&self, agent: AgentId) -> Option<TaskId> {
        self.holdings.get(&agent).copied()
    }

    /// Records that `agent` passed the critical stage of `task`.
    pub fn mark_critical(&mut self, task: TaskId, agent: AgentId) -> Result<(), AuctionError> {
        let t = self.pool.get_mut(&task).ok_or(AuctionError::UnknownTask(task))?;
        t.set_status(TaskStatus::CriticalStagePassed(agent))
            .map_err(|_| AuctionError::InvalidStatus(task))
    }

    /// Removes `task` from future announcements.
    pub fn mark_completed(&mut self, task: TaskId) -> Result<(), AuctionError> {
        let t = self.pool.get_mut(&task).ok_or(AuctionError::UnknownTask(task))?;
        t.set_status(TaskStatus::Completed)
            .map_err(|_| AuctionError::InvalidStatus(task))?;
        self.holdings.retain(|_, held| *held != task);
        Ok(())
    }

    /// Tasks to announce in the next round, by id.
    pub fn announcement(&self) -> Vec<Task> {
        self.pool
            .values()
            .filter(|t| t.status != TaskStatus::Completed)
            .copied()
            .collect()
    }

    /// Whether a round is due at simulated time `now` (seconds).
    pub fn due(&self, now: f64) -> bool {
        match self.last_round_t {
            None => true,
            Some(last) => (now - last) * 1000.0 >= self.config.cycle_delay_ms - 1e-6,
        }
    }

    pub fn rounds_run(&self) -> u64 {
        self.round
    }

    /// One announce / bid / allocate cycle at simulated time `now`.
    pub fn run_round(
        &mut self,
        now: f64,
        bidders: &mut dyn BidSource,
        clock: &dyn Clock,
    ) -> Result<AuctionRoundRecord, AuctionError> {
        let announced = self.announcement();
        let announced_ids: BTreeSet<TaskId> = announced.iter().map(|t| t.id).collect();

        let mut bids = Vec::new();
        let mut silent_agents = Vec::new();
        for &agent in &self.agents {
            match bidders.bids(agent, &announced) {
                Ok(set) if well_formed(agent, &set, &announced_ids) => bids.extend(set),
                _ => silent_agents.push(agent),
            }
        }

        // Only the holder may bid on a task past its critical stage; a rival
        // bidding exactly 0 would otherwise tie with the holder's gate bid.
        bids.retain(|b| match self.pool.get(&b.task).map(|t| t.status) {
            Some(TaskStatus::CriticalStagePassed(holder)) => holder == b.agent,
            _ => true,
        });

        let priorities: BTreeMap<TaskId, f64> = announced.iter().map(|t| (t.id, t.priority)).collect();
        let started = clock.now_ms();
        let profits = costs_to_profits(&bids, &priorities)?;
        let allocation = solve_assignment(&profits)?;
        let solve_ms = (clock.now_ms() - started).max(0.0);

        for &(winner, task) in &allocation.pairs {
            if let Some(TaskStatus::CriticalStagePassed(holder)) = self.pool.get(&task).map(|t| t.status) {
                if holder != winner {
                    return Err(AuctionError::RetentionViolated { task, holder, winner });
                }
            }
        }

        for id in &announced_ids {
            let t = self.pool.get_mut(id).ok_or(AuctionError::UnknownTask(*id))?;
            let next = match (t.status, allocation.agent_of(*id)) {
                (TaskStatus::CriticalStagePassed(_), _) => continue,
                (_, Some(agent)) => TaskStatus::Assigned(agent),
                (_, None) => TaskStatus::Pending,
            };
            t.set_status(next).map_err(|_| AuctionError::InvalidStatus(*id))?;
        }

        let mut notifications = Vec::new();
        let mut holdings = BTreeMap::new();
        for &agent in &self.agents {
            match allocation.task_of(agent) {
                Some(task) => {
                    holdings.insert(agent, task);
                    notifications.push(Notification::Assigned { agent, task });
                }
                None => {
                    // A critical-stage holder that went silent keeps its task.
                    let kept = self.holdings.get(&agent).copied().filter(|t| {
                        matches!(
                            self.pool.get(t).map(|x| x.status),
                            Some(TaskStatus::CriticalStagePassed(h)) if h == agent
                        )
                    });
                    if let Some(task) = kept {
                        holdings.insert(agent, task);
                    } else if let Some(&previous) = self.holdings.get(&agent) {
                        notifications.push(Notification::Unassigned { agent, previous });
                    }
                }
            }
        }
        self.holdings = holdings;

        let record = AuctionRoundRecord {
            round: self.round,
            t: now,
            announced: announced_ids.into_iter().collect(),
            bids,
            allocation,
            solve_ms,
            notifications,
            silent_agents,
        };
        self.round += 1;
        self.last_round_t = Some(now);
        Ok(record)
    }
}

fn well_formed(agent: AgentId, bids: &[Bid], announced: &BTreeSet<TaskId>) -> bool {
    let mut seen = BTreeSet::new();
    bids.iter().all(|b| {
        b.agent == agent && announced.contains(&b.task) && b.cost.is_finite() && b.cost >= 0.0 && seen.insert(b.task)
    })
}
