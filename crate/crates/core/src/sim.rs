//! Deterministic discrete-time world.
//!
//! One [`World::step`] delivers task arrivals, runs an auction round when the
//! cycle delay has elapsed on the simulated clock, ticks every behavior tree,
//! solves one NMPC problem per moving agent against the predictions the other
//! agents published on the previous step, integrates, publishes the new
//! predictions, evaluates stage completion and appends a metrics row.
//! Everything is ordered by id, so equal configurations give equal logs.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use crate::auction::{AuctionConfig, AuctionError, AuctionRoundRecord, BidError, Clock, Coordinator, NullClock};
use crate::bt::{ActivePath, BtError, StageEvent, TaskExecutor, DEFAULT_ARRIVAL_RADIUS};
use crate::cost::{compute_bids, AgentSnapshot, CostQuery, LegCache};
use crate::domain::{AgentId, GridMap, Point, Pose, Task, TaskId, TaskStatus};
use crate::math;
use crate::nmpc::{
    euler_step, reference_along_path, shift_warm_start, solve, ControlInput, NmpcConfig, NmpcError, ObstacleDisc,
    PredictedTrajectory, TrackingProblem,
};
use crate::planner::{build_risk_layer, Planner, RiskParams};

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct AgentSpec {
    pub id: AgentId,
    pub start: Pose,
    pub home: Point,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    /// Occupancy map without a risk layer; the world builds it from `risk`.
    pub map: GridMap,
    pub agents: Vec<AgentSpec>,
    /// Scripted tasks, sorted by arrival time.
    pub tasks: Vec<Task>,
    pub auction: AuctionConfig,
    pub nmpc: NmpcConfig,
    pub risk: RiskParams,
    pub dt: f64,
    pub duration: f64,
    /// Seed used by scenario generators; the world itself draws no random numbers.
    pub seed: u64,
    pub arrival_radius: f64,
}

impl ScenarioConfig {
    pub fn new(map: GridMap, agents: Vec<AgentSpec>, tasks: Vec<Task>) -> Self {
        Self {
            map,
            agents,
            tasks,
            auction: AuctionConfig::default(),
            nmpc: NmpcConfig::default(),
            risk: RiskParams::default(),
            dt: 0.1,
            duration: 60.0,
            seed: 0,
            arrival_radius: DEFAULT_ARRIVAL_RADIUS,
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        self.nmpc.validate().map_err(ConfigError::Nmpc)?;
        self.auction.validate().map_err(|_| ConfigError::Invalid("auction settings out of range"))?;
        self.risk.validate().map_err(|_| ConfigError::Invalid("risk settings out of range"))?;
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return Err(ConfigError::Invalid("dt must be positive"));
        }
        if (self.dt - self.nmpc.ts).abs() > 1e-12 {
            return Err(ConfigError::StepMismatch {
                dt: self.dt,
                ts: self.nmpc.ts,
            });
        }
        if !(self.duration.is_finite() && self.duration >= 0.0) {
            return Err(ConfigError::Invalid("duration must be finite and >= 0"));
        }
        if !(self.arrival_radius.is_finite() && self.arrival_radius > 0.0) {
            return Err(ConfigError::Invalid("arrival radius must be positive"));
        }
        let mut ids = BTreeSet::new();
        for a in &self.agents {
            if !ids.insert(a.id) {
                return Err(ConfigError::DuplicateAgent(a.id));
            }
            if !self.map.is_free_point(a.start.position()) || !self.map.is_free_point(a.home) {
                return Err(ConfigError::AgentNotOnFreeCell(a.id));
            }
        }
        let mut tids = BTreeSet::new();
        let mut last = 0.0;
        for t in &self.tasks {
            if !tids.insert(t.id) {
                return Err(ConfigError::DuplicateTask(t.id));
            }
            if t.arrival_time < last {
                return Err(ConfigError::UnsortedArrivals(t.id));
            }
            last = t.arrival_time;
            if t.status != TaskStatus::Pending {
                return Err(ConfigError::Invalid("scripted tasks must start Pending"));
            }
            if t.kind.waypoints().iter().any(|p| self.map.world_to_cell(*p).is_err()) {
                return Err(ConfigError::TaskOffMap(t.id));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ConfigError {
    Invalid(&'static str),
    StepMismatch { dt: f64, ts: f64 },
    DuplicateAgent(AgentId),
    DuplicateTask(TaskId),
    UnsortedArrivals(TaskId),
    AgentNotOnFreeCell(AgentId),
    TaskOffMap(TaskId),
    Nmpc(NmpcError),
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ConfigError::Invalid(why) => f.write_str(why),
            ConfigError::StepMismatch { dt, ts } => write!(f, "step {dt} s differs from controller step {ts} s"),
            ConfigError::DuplicateAgent(a) => write!(f, "agent {a} listed twice"),
            ConfigError::DuplicateTask(t) => write!(f, "task {t} listed twice"),
            ConfigError::UnsortedArrivals(t) => write!(f, "task {t} arrives before its predecessor"),
            ConfigError::AgentNotOnFreeCell(a) => write!(f, "agent {a} starts or lives on an occupied or off-map cell"),
            ConfigError::TaskOffMap(t) => write!(f, "task {t} has a waypoint outside the map"),
            ConfigError::Nmpc(e) => write!(f, "{e}"),
        }
    }
}

impl core::error::Error for ConfigError {}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum EventKind {
    Arrival,
    Assignment,
    Reallocation,
    Unassignment,
    PickedUp,
    Completed,
    SolverFallback,
    NoPath,
    SilentAgent,
    GuardTripped,
}

impl EventKind {
    pub fn label(self) -> &'static str {
        match self {
            EventKind::Arrival => "arrival",
            EventKind::Assignment => "assignment",
            EventKind::Reallocation => "reallocation",
            EventKind::Unassignment => "unassignment",
            EventKind::PickedUp => "picked_up",
            EventKind::Completed => "completed",
            EventKind::SolverFallback => "solver_fallback",
            EventKind::NoPath => "no_path",
            EventKind::SilentAgent => "silent_agent",
            EventKind::GuardTripped => "guard_tripped",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Event {
    pub step: u64,
    pub t: f64,
    pub kind: EventKind,
    pub agent: Option<AgentId>,
    pub task: Option<TaskId>,
    /// Task the agent held before a reallocation or unassignment.
    pub previous: Option<TaskId>,
    /// The agent's gate at the moment of the event.
    pub k_bt: Option<u8>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AgentRow {
    pub id: AgentId,
    pub pose: Pose,
    pub task: Option<TaskId>,
    pub k_bt: u8,
    pub input: ControlInput,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct TaskCounts {
    pub arrived: usize,
    pub pending: usize,
    pub assigned: usize,
    pub critical: usize,
    pub completed: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepRow {
    pub step: u64,
    pub t: f64,
    pub agents: Vec<AgentRow>,
    pub min_distance: f64,
    pub tasks: TaskCounts,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RoundSummary {
    pub round: u64,
    pub t: f64,
    pub n_tasks: usize,
    pub n_bids: usize,
    pub n_assigned: usize,
    pub solve_ms: f64,
    pub announced: Vec<TaskId>,
    pub assignments: Vec<(AgentId, TaskId)>,
}

impl RoundSummary {
    fn from_record(r: &AuctionRoundRecord) -> Self {
        Self {
            round: r.round,
            t: r.t,
            n_tasks: r.announced.len(),
            n_bids: r.bids.len(),
            n_assigned: r.allocation.len(),
            solve_ms: r.solve_ms,
            announced: r.announced.clone(),
            assignments: r.allocation.pairs.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct MetricsLog {
    pub steps: Vec<StepRow>,
    pub events: Vec<Event>,
    pub rounds: Vec<RoundSummary>,
}

impl MetricsLog {
    pub fn events_of(&self, kind: EventKind) -> impl Iterator<Item = &Event> + '_ {
        self.events.iter().filter(move |e| e.kind == kind)
    }

    pub fn count(&self, kind: EventKind) -> usize {
        self.events_of(kind).count()
    }

    /// Smallest pairwise distance over all logged steps.
    pub fn min_distance(&self) -> f64 {
        self.steps.iter().map(|s| s.min_distance).fold(f64::INFINITY, f64::min)
    }
}

/// Minimum Euclidean distance over unordered pairs; `+inf` for fewer than two poses.
pub fn min_pairwise_distance(poses: &[Pose]) -> f64 {
    let mut best = f64::INFINITY;
    for (i, a) in poses.iter().enumerate() {
        for b in &poses[i + 1..] {
            best = best.min(a.position().distance(&b.position()));
        }
    }
    best
}

/// Controller state of one agent.
#[derive(Debug, Clone, PartialEq)]
pub struct MotionState {
    pub id: AgentId,
    pub pose: Pose,
    pub u_prev: ControlInput,
    pub warm_start: Vec<ControlInput>,
    /// Last published prediction.
    pub prediction: PredictedTrajectory,
}

impl MotionState {
    pub fn new(id: AgentId, pose: Pose, horizon: usize, t: f64) -> Self {
        Self {
            id,
            pose,
            u_prev: ControlInput::ZERO,
            warm_start: Vec::new(),
            prediction: PredictedTrajectory {
                agent: id,
                stamp: t,
                poses: vec![pose; horizon],
            },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MotionOutcome {
    Moved(ControlInput),
    Held,
    Fallback(NmpcError),
}

/// Advances every agent by one step.
///
/// `paths[i]` is the path agent `i` should track, or `None` to hold still.
/// All solves see the predictions published before this call; predictions are
/// replaced only after every agent has been integrated.
pub fn motion_step(agents: &mut [MotionState], paths: &[Option<&[Point]>], config: &NmpcConfig, t: f64) -> Vec<MotionOutcome> {
    let n = config.horizon;
    let mut decisions = Vec::with_capacity(agents.len());
    for (i, agent) in agents.iter().enumerate() {
        let Some(path) = paths.get(i).copied().flatten() else {
            decisions.push((MotionOutcome::Held, None));
            continue;
        };
        let obstacles: Vec<ObstacleDisc> = agents
            .iter()
            .enumerate()
            .filter(|(j, _)| *j != i)
            .flat_map(|(_, other)| {
                let lag = math::floor((t - other.prediction.stamp) / config.ts + 0.5).max(0.0) as usize;
                let forecast = ObstacleDisc {
                    centers: other.prediction.positions(),
                    radius: config.r_obs,
                }
                .aligned(lag, n);
                [forecast, ObstacleDisc::stationary(other.pose.position(), n, config.r_obs)]
            })
            .collect();
        let reference = reference_along_path(path, agent.pose, config);
        let problem = TrackingProblem {
            x0: agent.pose,
            reference: &reference,
            u_prev: agent.u_prev,
            obstacles: &obstacles,
        };
        match solve(&problem, config, &agent.warm_start) {
            Ok(sol) => decisions.push((MotionOutcome::Moved(sol.inputs[0]), Some(sol))),
            Err(e) => decisions.push((MotionOutcome::Fallback(e), None)),
        }
    }
    let mut outcomes = Vec::with_capacity(agents.len());
    for (agent, (outcome, sol)) in agents.iter_mut().zip(decisions) {
        match sol {
            Some(sol) => {
                let u = sol.inputs[0];
                agent.pose = euler_step(agent.pose, u, config.ts);
                agent.u_prev = u;
                agent.warm_start = shift_warm_start(&sol.inputs);
                agent.prediction = PredictedTrajectory {
                    agent: agent.id,
                    stamp: t,
                    poses: sol.states,
                };
            }
            None => {
                agent.u_prev = ControlInput::ZERO;
                agent.warm_start.clear();
                agent.prediction = PredictedTrajectory {
                    agent: agent.id,
                    stamp: t,
                    poses: vec![agent.pose; n],
                };
            }
        }
        outcomes.push(outcome);
    }
    outcomes
}

#[derive(Debug)]
struct AgentRuntime {
    executor: TaskExecutor,
    motion: MotionState,
    cache: LegCache,
    last_input: ControlInput,
}

/// The simulated mission. Agents are kept sorted by id.
#[derive(Debug)]
pub struct World {
    config: ScenarioConfig,
    map: GridMap,
    coordinator: Coordinator,
    agents: Vec<AgentRuntime>,
    next_arrival: usize,
    step: u64,
    log: MetricsLog,
}

impl World {
    pub fn new(mut config: ScenarioConfig) -> Result<Self, ConfigError> {
        config.validate()?;
        config.agents.sort_by_key(|a| a.id);
        let map = build_risk_layer(&config.map, &config.risk);
        let mut coordinator =
            Coordinator::new(config.auction).map_err(|_| ConfigError::Invalid("auction settings out of range"))?;
        let mut agents = Vec::with_capacity(config.agents.len());
        for spec in &config.agents {
            coordinator
                .register_agent(spec.id)
                .map_err(|_| ConfigError::DuplicateAgent(spec.id))?;
            agents.push(AgentRuntime {
                executor: TaskExecutor::new(spec.id, spec.start, spec.home, config.arrival_radius),
                motion: MotionState::new(spec.id, spec.start, config.nmpc.horizon, -config.dt),
                cache: LegCache::new(),
                last_input: ControlInput::ZERO,
            });
        }
        let mut world = Self {
            config,
            map,
            coordinator,
            agents,
            next_arrival: 0,
            step: 0,
            log: MetricsLog::default(),
        };
        world.record_row();
        Ok(world)
    }

    pub fn config(&self) -> &ScenarioConfig {
        &self.config
    }

    /// Map with its risk layer.
    pub fn map(&self) -> &GridMap {
        &self.map
    }

    pub fn coordinator(&self) -> &Coordinator {
        &self.coordinator
    }

    pub fn time(&self) -> f64 {
        self.step as f64 * self.config.dt
    }

    pub fn step_index(&self) -> u64 {
        self.step
    }

    pub fn log(&self) -> &MetricsLog {
        &self.log
    }

    pub fn into_log(self) -> MetricsLog {
        self.log
    }

    pub fn poses(&self) -> Vec<(AgentId, Pose)> {
        self.agents.iter().map(|a| (a.motion.id, a.motion.pose)).collect()
    }

    pub fn predictions(&self) -> Vec<&PredictedTrajectory> {
        self.agents.iter().map(|a| &a.motion.prediction).collect()
    }

    /// Task the agent is currently executing, if any.
    pub fn agent_task(&self, agent: AgentId) -> Option<TaskId> {
        self.agents
            .iter()
            .find(|a| a.motion.id == agent)
            .and_then(|a| a.executor.state.current_task_id())
    }

    pub fn agent_k_bt(&self, agent: AgentId) -> Option<u8> {
        self.agents.iter().find(|a| a.motion.id == agent).map(|a| a.executor.state.k_bt())
    }

    pub fn min_pairwise_distance(&self) -> f64 {
        let poses: Vec<Pose> = self.agents.iter().map(|a| a.motion.pose).collect();
        min_pairwise_distance(&poses)
    }

    /// Adds a task at runtime; it arrives at the current time.
    pub fn inject_task(&mut self, task: Task) -> Result<(), AuctionError> {
        if self.config.tasks.iter().any(|t| t.id == task.id) {
            return Err(AuctionError::DuplicateTask(task.id));
        }
        let mut task = task;
        task.arrival_time = self.time();
        self.coordinator.submit_task(task)?;
        self.push_event(EventKind::Arrival, None, Some(task.id), None, None);
        Ok(())
    }

    /// Whether every scripted task has been completed.
    pub fn scripted_tasks_done(&self) -> bool {
        self.config.tasks.iter().all(|t| {
            self.coordinator
                .task(t.id)
                .map(|x| x.status == TaskStatus::Completed)
                .unwrap_or(false)
        })
    }

    pub fn step(&mut self) -> Result<(), AuctionError> {
        self.step_with_clock(&NullClock)
    }

    pub fn step_with_clock(&mut self, clock: &dyn Clock) -> Result<(), AuctionError> {
        let t = self.time();

        while let Some(task) = self.config.tasks.get(self.next_arrival).copied() {
            if task.arrival_time > t + 1e-9 {
                break;
            }
            self.next_arrival += 1;
            self.coordinator.submit_task(task)?;
            self.push_event(EventKind::Arrival, None, Some(task.id), None, None);
        }

        if self.coordinator.due(t) {
            self.auction_round(t, clock)?;
        }

        for a in &mut self.agents {
            // Swaps are guarded and the trees are well formed, so ticks cannot fail.
            let _: Result<_, BtError> = a.executor.tick();
        }

        let mut wants_path = Vec::with_capacity(self.agents.len());
        for i in 0..self.agents.len() {
            let goal = self.agents[i].executor.state.motion_goal;
            if let Some(goal) = goal {
                self.ensure_path(i, goal);
            }
            let usable = goal.is_some()
                && self.agents[i]
                    .executor
                    .state
                    .active_path
                    .as_ref()
                    .map(|p| !p.points.is_empty())
                    .unwrap_or(false);
            wants_path.push(usable);
        }

        let mut motions: Vec<MotionState> = self.agents.iter().map(|a| a.motion.clone()).collect();
        let outcomes = {
            let paths: Vec<Option<&[Point]>> = self
                .agents
                .iter()
                .zip(&wants_path)
                .map(|(a, &use_it)| {
                    if use_it {
                        a.executor.state.active_path.as_ref().map(|p| p.points.as_slice())
                    } else {
                        None
                    }
                })
                .collect();
            motion_step(&mut motions, &paths, &self.config.nmpc, t)
        };
        self.step += 1;
        let t_after = self.time();
        for (i, (motion, outcome)) in motions.into_iter().zip(outcomes).enumerate() {
            let agent = &mut self.agents[i];
            agent.executor.state.pose = motion.pose;
            agent.motion = motion;
            agent.last_input = match outcome {
                MotionOutcome::Moved(u) => u,
                _ => ControlInput::ZERO,
            };
            if let MotionOutcome::Fallback(_) = outcome {
                let id = agent.motion.id;
                let task = agent.executor.state.current_task_id();
                self.push_event_at(t_after, EventKind::SolverFallback, Some(id), task, None, None);
            }
        }

        for i in 0..self.agents.len() {
            let events = self.agents[i].executor.state.update_stage_flags();
            let id = self.agents[i].motion.id;
            for ev in events {
                match ev {
                    StageEvent::PickedUp(task) => {
                        self.coordinator.mark_critical(task, id)?;
                        self.push_event_at(t_after, EventKind::PickedUp, Some(id), Some(task), None, Some(0));
                    }
                    StageEvent::Completed(task) => {
                        self.coordinator.mark_completed(task)?;
                        let k = self.agents[i].executor.state.k_bt();
                        self.push_event_at(t_after, EventKind::Completed, Some(id), Some(task), None, Some(k));
                    }
                }
            }
            if self.agents[i].executor.state.is_task_done() {
                let _ = self.agents[i].executor.swap_tree(None);
            }
        }

        self.record_row();
        Ok(())
    }

    fn auction_round(&mut self, t: f64, clock: &dyn Clock) -> Result<(), AuctionError> {
        let snapshots: BTreeMap<AgentId, AgentSnapshot> = self
            .agents
            .iter()
            .map(|a| {
                let s = &a.executor.state;
                let current = s.task.filter(|t| t.status != TaskStatus::Completed).map(|t| t.id);
                (
                    a.motion.id,
                    AgentSnapshot {
                        agent: a.motion.id,
                        pose: s.pose,
                        current_task: current,
                        k_bt: s.k_bt(),
                    },
                )
            })
            .collect();
        let planner = Planner::new(&self.map);
        let participation = self.config.auction.participation;
        let mut caches: BTreeMap<AgentId, &mut LegCache> =
            self.agents.iter_mut().map(|a| (a.motion.id, &mut a.cache)).collect();
        let mut bidder = |agent: AgentId, announced: &[Task]| -> Result<Vec<crate::allocation::Bid>, BidError> {
            let snapshot = *snapshots.get(&agent).ok_or(BidError("unknown agent"))?;
            let cache = caches.get_mut(&agent).ok_or(BidError("unknown agent"))?;
            let query = CostQuery {
                snapshot,
                announced,
                participation,
            };
            Ok(compute_bids(&planner, &query, cache))
        };
        let record = self.coordinator.run_round(t, &mut bidder, clock)?;
        drop(caches);
        self.log.rounds.push(RoundSummary::from_record(&record));
        for &agent in &record.silent_agents {
            self.push_event(EventKind::SilentAgent, Some(agent), None, None, None);
        }

        for i in 0..self.agents.len() {
            let id = self.agents[i].motion.id;
            let won = record.allocation.task_of(id);
            let state = &self.agents[i].executor.state;
            let current = state.task.filter(|t| t.status != TaskStatus::Completed).map(|t| t.id);
            let k = state.k_bt();
            if won == current {
                continue;
            }
            let next_task = won.and_then(|w| self.coordinator.task(w).copied());
            if won.is_none() && current.is_some() && k == 0 {
                // The holder went silent; its task stays with it.
                continue;
            }
            match self.agents[i].executor.swap_tree(next_task) {
                Ok(()) => {
                    let (kind, previous) = match (current, won) {
                        (Some(prev), Some(_)) => (EventKind::Reallocation, Some(prev)),
                        (Some(prev), None) => (EventKind::Unassignment, Some(prev)),
                        (None, _) => (EventKind::Assignment, None),
                    };
                    self.push_event(kind, Some(id), won, previous, Some(k));
                }
                Err(_) => {
                    self.push_event(EventKind::GuardTripped, Some(id), won, current, Some(k));
                }
            }
        }
        Ok(())
    }

    fn ensure_path(&mut self, i: usize, goal: Point) {
        let state = &self.agents[i].executor.state;
        if state.active_path.as_ref().map(|p| p.goal == goal).unwrap_or(false) {
            return;
        }
        let planner = Planner::new(&self.map);
        let pose = state.pose;
        let start = if self.map.is_free_point(pose.position()) {
            pose.position()
        } else {
            self.map
                .nearest_free_cell(pose.position())
                .map(|c| self.map.cell_center(c))
                .unwrap_or(pose.position())
        };
        let points = match planner.plan(Pose { x: start.x, y: start.y, heading: pose.heading }, Pose { x: goal.x, y: goal.y, heading: 0.0 }) {
            Ok(plan) => {
                let mut pts = Vec::with_capacity(plan.cells.len() + 2);
                pts.push(pose.position());
                pts.extend(plan.cells.iter().skip(1).map(|&c| self.map.cell_center(c)));
                if plan.cells.len() > 1 {
                    pts.pop();
                }
                pts.push(goal);
                pts
            }
            Err(_) => Vec::new(),
        };
        let failed = points.is_empty();
        self.agents[i].executor.state.active_path = Some(ActivePath { goal, points });
        if failed {
            let id = self.agents[i].motion.id;
            let task = self.agents[i].executor.state.current_task_id();
            self.push_event(EventKind::NoPath, Some(id), task, None, None);
        }
    }

    fn push_event(&mut self, kind: EventKind, agent: Option<AgentId>, task: Option<TaskId>, previous: Option<TaskId>, k_bt: Option<u8>) {
        let t = self.time();
        self.push_event_at(t, kind, agent, task, previous, k_bt);
    }

    fn push_event_at(
        &mut self,
        t: f64,
        kind: EventKind,
        agent: Option<AgentId>,
        task: Option<TaskId>,
        previous: Option<TaskId>,
        k_bt: Option<u8>,
    ) {
        self.log.events.push(Event {
            step: self.step,
            t,
            kind,
            agent,
            task,
            previous,
            k_bt,
        });
    }

    fn task_counts(&self) -> TaskCounts {
        let mut c = TaskCounts::default();
        for t in self.coordinator.pool() {
            c.arrived += 1;
            match t.status {
                TaskStatus::Pending => c.pending += 1,
                TaskStatus::Assigned(_) => c.assigned += 1,
                TaskStatus::CriticalStagePassed(_) => c.critical += 1,
                TaskStatus::Completed => c.completed += 1,
            }
        }
        c
    }

    fn record_row(&mut self) {
        let agents: Vec<AgentRow> = self
            .agents
            .iter()
            .map(|a| AgentRow {
                id: a.motion.id,
                pose: a.motion.pose,
                task: a.executor.state.task.filter(|t| t.status != TaskStatus::Completed).map(|t| t.id),
                k_bt: a.executor.state.k_bt(),
                input: a.last_input,
            })
            .collect();
        let poses: Vec<Pose> = agents.iter().map(|r| r.pose).collect();
        let row = StepRow {
            step: self.step,
            t: self.time(),
            min_distance: min_pairwise_distance(&poses),
            agents,
            tasks: self.task_counts(),
        };
        self.log.steps.push(row);
    }
}

/// Steps until the duration elapses or every scripted task is completed.
pub fn run_scenario(config: ScenarioConfig) -> Result<MetricsLog, SimError> {
    let mut world = World::new(config)?;
    run_world(&mut world)?;
    Ok(world.into_log())
}

/// Number of steps that cover `config.duration`.
pub fn step_budget(config: &ScenarioConfig) -> u64 {
    math::ceil(config.duration / config.dt - 1e-9).max(0.0) as u64
}

/// Drives an existing world to the end of its scenario.
pub fn run_world(world: &mut World) -> Result<(), SimError> {
    let steps = step_budget(&world.config);
    let has_tasks = !world.config.tasks.is_empty();
    while world.step_index() < steps {
        if has_tasks && world.scripted_tasks_done() {
            break;
        }
        world.step()?;
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub enum SimError {
    Config(ConfigError),
    Auction(AuctionError),
}

impl fmt::Display for SimError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SimError::Config(e) => write!(f, "invalid scenario: {e}"),
            SimError::Auction(e) => write!(f, "auction failed: {e}"),
        }
    }
}

impl core::error::Error for SimError {}

impl From<ConfigError> for SimError {
    fn from(e: ConfigError) -> Self {
        SimError::Config(e)
    }
}

impl From<AuctionError> for SimError {
    fn from(e: AuctionError) -> Self {
        SimError::Auction(e)
    }
}
