//! Minimal reactive behavior trees.
//!
//! Control nodes keep no memory between ticks: every tick restarts from the
//! leftmost child, so a change in the world (an object picked up, a task
//! swapped) is reflected on the very next tick. The concrete trees drive an
//! agent home, to an inspection point, or through pick-up then delivery, and
//! the pick-and-deliver tree owns the `k_bt` gate that blocks reallocation once
//! an object has been picked up.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use crate::domain::{AgentId, Point, Pose, Task, TaskKind, TaskStatus};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TickStatus {
    Success,
    Failure,
    Running,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BtError {
    MalformedTree(&'static str),
    KindMismatch,
    ForbiddenSwap,
}

impl fmt::Display for BtError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BtError::MalformedTree(why) => write!(f, "malformed tree: {why}"),
            BtError::KindMismatch => write!(f, "task kind does not match the requested tree"),
            BtError::ForbiddenSwap => write!(f, "cannot leave a task after its critical stage"),
        }
    }
}

impl core::error::Error for BtError {}

pub struct Condition<S> {
    pub name: &'static str,
    pub predicate: fn(&S) -> bool,
}

pub struct Action<S> {
    pub name: &'static str,
    pub behavior: fn(&mut S) -> TickStatus,
}

pub enum Node<S> {
    Fallback(Vec<Node<S>>),
    Sequence(Vec<Node<S>>),
    Condition(Condition<S>),
    Action(Action<S>),
}

impl<S> Node<S> {
    pub fn condition(name: &'static str, predicate: fn(&S) -> bool) -> Self {
        Node::Condition(Condition { name, predicate })
    }

    pub fn action(name: &'static str, behavior: fn(&mut S) -> TickStatus) -> Self {
        Node::Action(Action { name, behavior })
    }

    pub fn name(&self) -> &'static str {
        match self {
            Node::Fallback(_) => "?",
            Node::Sequence(_) => "->",
            Node::Condition(c) => c.name,
            Node::Action(a) => a.name,
        }
    }

    pub fn validate(&self) -> Result<(), BtError> {
        match self {
            Node::Fallback(children) | Node::Sequence(children) => {
                if children.is_empty() {
                    return Err(BtError::MalformedTree("control node without children"));
                }
                children.iter().try_for_each(Node::validate)
            }
            Node::Condition(_) | Node::Action(_) => Ok(()),
        }
    }
}

impl<S> fmt::Debug for Condition<S> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Condition({})", self.name)
    }
}

impl<S> fmt::Debug for Action<S> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Action({})", self.name)
    }
}

impl<S> fmt::Debug for Node<S> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Node::Fallback(c) => f.debug_tuple("Fallback").field(c).finish(),
            Node::Sequence(c) => f.debug_tuple("Sequence").field(c).finish(),
            Node::Condition(c) => write!(f, "Condition({})", c.name),
            Node::Action(a) => write!(f, "Action({})", a.name),
        }
    }
}

/// One ticked node: slash-separated child indices from the root, name and result.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TraceEntry {
    pub path: String,
    pub node: &'static str,
    pub status: TickStatus,
}

/// Ticks `node` once against `state`.
pub fn tick<S>(node: &Node<S>, state: &mut S) -> Result<TickStatus, BtError> {
    tick_inner(node, state, &mut Vec::new(), &mut None)
}

/// Like [`tick`], recording every node that was actually ticked.
pub fn tick_traced<S>(node: &Node<S>, state: &mut S, trace: &mut Vec<TraceEntry>) -> Result<TickStatus, BtError> {
    let mut sink = Some(trace);
    tick_inner(node, state, &mut Vec::new(), &mut sink)
}

fn tick_inner<S>(
    node: &Node<S>,
    state: &mut S,
    path: &mut Vec<usize>,
    trace: &mut Option<&mut Vec<TraceEntry>>,
) -> Result<TickStatus, BtError> {
    let status = match node {
        Node::Fallback(children) | Node::Sequence(children) => {
            if children.is_empty() {
                return Err(BtError::MalformedTree("control node without children"));
            }
            let is_fallback = matches!(node, Node::Fallback(_));
            let mut result = if is_fallback { TickStatus::Failure } else { TickStatus::Success };
            for (i, child) in children.iter().enumerate() {
                path.push(i);
                let s = tick_inner(child, state, path, trace);
                path.pop();
                let s = s?;
                let keep_going = if is_fallback { s == TickStatus::Failure } else { s == TickStatus::Success };
                if !keep_going {
                    result = s;
                    break;
                }
            }
            result
        }
        Node::Condition(c) => {
            if (c.predicate)(state) {
                TickStatus::Success
            } else {
                TickStatus::Failure
            }
        }
        Node::Action(a) => (a.behavior)(state),
    };
    if let Some(t) = trace.as_deref_mut() {
        let mut p = String::new();
        for (k, i) in path.iter().enumerate() {
            if k > 0 {
                p.push('/');
            }
            p.push_str(&alloc::format!("{i}"));
        }
        t.push(TraceEntry {
            path: p,
            node: node.name(),
            status,
        });
    }
    Ok(status)
}

/// Distance at which a waypoint counts as reached.
pub const DEFAULT_ARRIVAL_RADIUS: f64 = 0.15;

/// Reallocation gate: `Open` (k_bt = 1) or `Closed` (k_bt = 0).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Gate {
    Open,
    Closed,
}

impl Gate {
    pub fn k_bt(self) -> u8 {
        match self {
            Gate::Open => 1,
            Gate::Closed => 0,
        }
    }
}

/// A planned path cached for a particular goal.
#[derive(Debug, Clone, PartialEq)]
pub struct ActivePath {
    pub goal: Point,
    pub points: Vec<Point>,
}

/// Execution state an agent's tree reads and writes.
#[derive(Debug, Clone, PartialEq)]
pub struct AgentTaskState {
    pub agent: AgentId,
    pub pose: Pose,
    pub home: Point,
    pub task: Option<Task>,
    pub picked_up: bool,
    pub delivered: bool,
    pub inspected: bool,
    pub at_home: bool,
    pub gate: Gate,
    pub arrival_radius: f64,
    /// Where the last tick asked to move; `None` means hold still.
    pub motion_goal: Option<Point>,
    pub active_path: Option<ActivePath>,
}

impl AgentTaskState {
    pub fn new(agent: AgentId, pose: Pose, home: Point, arrival_radius: f64) -> Self {
        let mut s = Self {
            agent,
            pose,
            home,
            task: None,
            picked_up: false,
            delivered: false,
            inspected: false,
            at_home: false,
            gate: Gate::Open,
            arrival_radius,
            motion_goal: None,
            active_path: None,
        };
        s.at_home = s.within(home);
        s
    }

    pub fn k_bt(&self) -> u8 {
        self.gate.k_bt()
    }

    pub fn current_task_id(&self) -> Option<crate::domain::TaskId> {
        self.task.as_ref().map(|t| t.id)
    }

    fn within(&self, p: Point) -> bool {
        self.pose.position().distance(&p) <= self.arrival_radius
    }

    fn go_to(&mut self, target: Point) -> TickStatus {
        if self.within(target) {
            self.motion_goal = None;
            TickStatus::Success
        } else {
            self.motion_goal = Some(target);
            TickStatus::Running
        }
    }

    /// Re-evaluates arrival at the waypoints after the agent moved and updates
    /// stage flags, the gate and the local task status.
    pub fn update_stage_flags(&mut self) -> Vec<StageEvent> {
        let mut events = Vec::new();
        self.at_home = self.within(self.home);
        let Some(task) = self.task else { return events };
        match task.kind {
            TaskKind::Inspect { target } => {
                if !self.inspected && self.within(target) {
                    self.inspected = true;
                    self.set_task_status(TaskStatus::Completed);
                    events.push(StageEvent::Completed(task.id));
                }
            }
            TaskKind::PickAndDeliver { pick, deliver } => {
                if !self.picked_up && self.within(pick) {
                    self.picked_up = true;
                    self.gate = Gate::Closed;
                    self.set_task_status(TaskStatus::CriticalStagePassed(self.agent));
                    events.push(StageEvent::PickedUp(task.id));
                }
                if self.picked_up && !self.delivered && self.within(deliver) {
                    self.delivered = true;
                    self.set_task_status(TaskStatus::Completed);
                    events.push(StageEvent::Completed(task.id));
                }
            }
        }
        events
    }

    fn set_task_status(&mut self, status: TaskStatus) {
        if let Some(t) = self.task.as_mut() {
            // Local copy; transitions here are always forward.
            let _ = t.set_status(status);
        }
    }

    pub fn is_task_done(&self) -> bool {
        self.task.map(|t| t.status == TaskStatus::Completed).unwrap_or(false)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StageEvent {
    PickedUp(crate::domain::TaskId),
    Completed(crate::domain::TaskId),
}

fn at_home(s: &AgentTaskState) -> bool {
    s.at_home
}

fn follow_path_home(s: &mut AgentTaskState) -> TickStatus {
    let home = s.home;
    s.go_to(home)
}

fn position_inspected(s: &AgentTaskState) -> bool {
    s.inspected
}

fn follow_path_to_inspection(s: &mut AgentTaskState) -> TickStatus {
    match s.task.map(|t| t.kind) {
        Some(TaskKind::Inspect { target }) => s.go_to(target),
        _ => TickStatus::Failure,
    }
}

fn object_picked_up(s: &AgentTaskState) -> bool {
    s.picked_up
}

fn follow_path_to_pick(s: &mut AgentTaskState) -> TickStatus {
    match s.task.map(|t| t.kind) {
        Some(TaskKind::PickAndDeliver { pick, .. }) => s.go_to(pick),
        _ => TickStatus::Failure,
    }
}

fn object_delivered(s: &AgentTaskState) -> bool {
    s.delivered
}

fn follow_path_to_delivery(s: &mut AgentTaskState) -> TickStatus {
    match s.task.map(|t| t.kind) {
        Some(TaskKind::PickAndDeliver { deliver, .. }) => s.go_to(deliver),
        _ => TickStatus::Failure,
    }
}

/// `?[at home, follow path home]`
pub fn build_idle_tree() -> Node<AgentTaskState> {
    Node::Fallback(vec![
        Node::condition("at home", at_home),
        Node::action("follow path home", follow_path_home),
    ])
}

/// `?[position inspected, follow path to inspection position]`
pub fn build_inspect_tree(task: &Task) -> Result<Node<AgentTaskState>, BtError> {
    if !matches!(task.kind, TaskKind::Inspect { .. }) {
        return Err(BtError::KindMismatch);
    }
    Ok(Node::Fallback(vec![
        Node::condition("position inspected", position_inspected),
        Node::action("follow path to inspection position", follow_path_to_inspection),
    ]))
}

/// `->[?[object picked up, follow path to pick location], ?[object delivered, follow path to delivery location]]`
pub fn build_pick_deliver_tree(task: &Task) -> Result<Node<AgentTaskState>, BtError> {
    if !matches!(task.kind, TaskKind::PickAndDeliver { .. }) {
        return Err(BtError::KindMismatch);
    }
    Ok(Node::Sequence(vec![
        Node::Fallback(vec![
            Node::condition("object picked up", object_picked_up),
            Node::action("follow path to pick location", follow_path_to_pick),
        ]),
        Node::Fallback(vec![
            Node::condition("object delivered", object_delivered),
            Node::action("follow path to delivery location", follow_path_to_delivery),
        ]),
    ]))
}

pub fn tree_for(task: Option<&Task>) -> Result<Node<AgentTaskState>, BtError> {
    match task {
        None => Ok(build_idle_tree()),
        Some(t) => match t.kind {
            TaskKind::Inspect { .. } => build_inspect_tree(t),
            TaskKind::PickAndDeliver { .. } => build_pick_deliver_tree(t),
        },
    }
}

/// An agent's current tree plus the state it runs on.
#[derive(Debug)]
pub struct TaskExecutor {
    pub state: AgentTaskState,
    tree: Node<AgentTaskState>,
}

impl TaskExecutor {
    pub fn new(agent: AgentId, pose: Pose, home: Point, arrival_radius: f64) -> Self {
        Self {
            state: AgentTaskState::new(agent, pose, home, arrival_radius),
            tree: build_idle_tree(),
        }
    }

    pub fn tree(&self) -> &Node<AgentTaskState> {
        &self.tree
    }

    /// Installs the tree for `task` (the idle tree for `None`). Re-installing
    /// the current task is a no-op that keeps progress.
    pub fn swap_tree(&mut self, task: Option<Task>) -> Result<(), BtError> {
        let current = self.state.current_task_id();
        let next = task.as_ref().map(|t| t.id);
        if current == next && current.is_some() {
            return Ok(());
        }
        if self.state.picked_up && !self.state.delivered && current.is_some() {
            return Err(BtError::ForbiddenSwap);
        }
        let tree = tree_for(task.as_ref())?;
        let s = &mut self.state;
        s.task = task.map(|mut t| {
            t.status = TaskStatus::Assigned(s.agent);
            t
        });
        s.picked_up = false;
        s.delivered = false;
        s.inspected = false;
        s.gate = Gate::Open;
        s.motion_goal = None;
        s.active_path = None;
        s.at_home = s.pose.position().distance(&s.home) <= s.arrival_radius;
        self.tree = tree;
        Ok(())
    }

    pub fn tick(&mut self) -> Result<TickStatus, BtError> {
        self.state.motion_goal = None;
        tick(&self.tree, &mut self.state)
    }

    pub fn tick_traced(&mut self, trace: &mut Vec<TraceEntry>) -> Result<TickStatus, BtError> {
        self.state.motion_goal = None;
        tick_traced(&self.tree, &mut self.state, trace)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::TaskId;

    #[derive(Default)]
    struct Counters {
        ticks: [u32; 4],
        flag: bool,
    }

    fn yes(_: &Counters) -> bool {
        true
    }
    fn no(_: &Counters) -> bool {
        false
    }
    fn act0(c: &mut Counters) -> TickStatus {
        c.ticks[0] += 1;
        TickStatus::Running
    }
    fn act1(c: &mut Counters) -> TickStatus {
        c.ticks[1] += 1;
        TickStatus::Running
    }
    fn flag(c: &Counters) -> bool {
        c.flag
    }

    #[test]
    fn fallback_short_circuits_on_success() {
        let tree = Node::Fallback(vec![Node::condition("yes", yes), Node::action("a", act0)]);
        let mut c = Counters::default();
        assert_eq!(tick(&tree, &mut c), Ok(TickStatus::Success));
        assert_eq!(c.ticks[0], 0);
    }

    #[test]
    fn fallback_runs_action_after_failure() {
        let tree = Node::Fallback(vec![Node::condition("no", no), Node::action("a", act0)]);
        let mut c = Counters::default();
        assert_eq!(tick(&tree, &mut c), Ok(TickStatus::Running));
        assert_eq!(c.ticks[0], 1);
    }

    #[test]
    fn sequence_stops_at_first_running_child() {
        let tree = Node::Sequence(vec![
            Node::Fallback(vec![Node::condition("picked", flag), Node::action("pick", act0)]),
            Node::Fallback(vec![Node::condition("delivered", no), Node::action("deliver", act1)]),
        ]);
        let mut c = Counters::default();
        let mut trace = Vec::new();
        assert_eq!(tick_traced(&tree, &mut c, &mut trace), Ok(TickStatus::Running));
        assert_eq!(c.ticks, [1, 0, 0, 0]);
        assert!(trace.iter().all(|e| !e.path.starts_with('1')));
        assert_eq!(trace.last().unwrap().path, "");
        c.flag = true;
        assert_eq!(tick(&tree, &mut c), Ok(TickStatus::Running));
        assert_eq!(c.ticks, [1, 1, 0, 0]);
    }

    #[test]
    fn empty_control_node_is_malformed() {
        let tree: Node<Counters> = Node::Sequence(vec![]);
        let mut c = Counters::default();
        assert!(matches!(tick(&tree, &mut c), Err(BtError::MalformedTree(_))));
        let nested: Node<Counters> = Node::Fallback(vec![Node::condition("no", no), Node::Fallback(vec![])]);
        assert!(nested.validate().is_err());
        assert!(tick(&nested, &mut c).is_err());
    }

    fn executor_at(x: f64, y: f64) -> TaskExecutor {
        TaskExecutor::new(AgentId(0), Pose { x, y, heading: 0.0 }, Point::new(0.0, 0.0), DEFAULT_ARRIVAL_RADIUS)
    }

    #[test]
    fn idle_tree_behaviour() {
        let mut home = executor_at(0.05, 0.0);
        assert_eq!(home.tick(), Ok(TickStatus::Success));
        assert_eq!(home.state.motion_goal, None);
        let mut away = executor_at(2.0, 0.0);
        assert_eq!(away.tick(), Ok(TickStatus::Running));
        assert_eq!(away.state.motion_goal, Some(Point::new(0.0, 0.0)));
    }

    #[test]
    fn inspect_tree_behaviour() {
        let task = Task::inspect(3, Point::new(1.0, 1.0));
        let mut ex = executor_at(0.0, 0.0);
        ex.swap_tree(Some(task)).unwrap();
        assert_eq!(ex.tick(), Ok(TickStatus::Running));
        assert_eq!(ex.state.motion_goal, Some(Point::new(1.0, 1.0)));
        ex.state.pose = Pose { x: 1.0, y: 0.9, heading: 0.0 };
        let ev = ex.state.update_stage_flags();
        assert_eq!(ev, vec![StageEvent::Completed(TaskId(3))]);
        assert_eq!(ex.tick(), Ok(TickStatus::Success));
        assert!(ex.state.is_task_done());
        assert!(build_inspect_tree(&Task::pick_deliver(1, Point::new(0.0, 0.0), Point::new(1.0, 0.0))).is_err());
    }

    #[test]
    fn pick_deliver_tree_and_gate() {
        let task = Task::pick_deliver(7, Point::new(1.0, 0.0), Point::new(2.0, 0.0));
        let mut ex = executor_at(0.0, 0.0);
        ex.swap_tree(Some(task)).unwrap();
        assert_eq!(ex.tick(), Ok(TickStatus::Running));
        assert_eq!(ex.state.motion_goal, Some(Point::new(1.0, 0.0)));
        assert_eq!(ex.state.k_bt(), 1);

        ex.state.pose.x = 1.0;
        assert_eq!(ex.state.update_stage_flags(), vec![StageEvent::PickedUp(TaskId(7))]);
        assert_eq!(ex.state.k_bt(), 0);
        assert_eq!(ex.state.task.unwrap().status, TaskStatus::CriticalStagePassed(AgentId(0)));
        assert_eq!(ex.tick(), Ok(TickStatus::Running));
        assert_eq!(ex.state.motion_goal, Some(Point::new(2.0, 0.0)));

        let other = Task::inspect(8, Point::new(0.0, 1.0));
        assert_eq!(ex.swap_tree(Some(other)), Err(BtError::ForbiddenSwap));
        assert_eq!(ex.swap_tree(None), Err(BtError::ForbiddenSwap));
        assert_eq!(ex.swap_tree(Some(task)), Ok(()));
        assert_eq!(ex.state.k_bt(), 0);

        ex.state.pose.x = 2.0;
        assert_eq!(ex.state.update_stage_flags(), vec![StageEvent::Completed(TaskId(7))]);
        assert_eq!(ex.tick(), Ok(TickStatus::Success));
        assert_eq!(ex.state.task.unwrap().status, TaskStatus::Completed);

        ex.swap_tree(None).unwrap();
        assert_eq!(ex.state.k_bt(), 1);
        assert!(ex.state.task.is_none());
        assert!(build_pick_deliver_tree(&Task::inspect(1, Point::new(0.0, 0.0))).is_err());
    }

    #[test]
    fn swap_resets_progress() {
        let a = Task::inspect(1, Point::new(1.0, 0.0));
        let b = Task::pick_deliver(2, Point::new(0.0, 1.0), Point::new(0.0, 2.0));
        let mut ex = executor_at(0.0, 0.0);
        ex.swap_tree(Some(a)).unwrap();
        ex.state.active_path = Some(ActivePath { goal: Point::new(1.0, 0.0), points: vec![] });
        ex.swap_tree(Some(b)).unwrap();
        assert!(ex.state.active_path.is_none());
        assert_eq!(ex.state.task.unwrap().status, TaskStatus::Assigned(AgentId(0)));
        assert!(matches!(ex.tree(), Node::Sequence(_)));
        ex.swap_tree(None).unwrap();
        assert!(matches!(ex.tree(), Node::Fallback(_)));
    }
}
