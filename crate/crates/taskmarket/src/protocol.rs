//! Operator bridge wire protocol, version 1.
//!
//! Every frame is one UTF-8 JSON object with a `"type"` discriminator. Server
//! frames always carry `"v": 1`; client frames may omit `v`, and any other
//! version is refused. See `docs/protocol.md`.

use serde::{Deserialize, Serialize};
use serde_json::Value;
use taskmarket_core::{GridMap, Point, Task, TaskId, TaskKind, World};

pub const PROTOCOL_VERSION: u64 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WireKind {
    Inspect,
    PickDeliver,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AddTask {
    pub kind: WireKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target: Option<[f64; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pick: Option<[f64; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub deliver: Option<[f64; 2]>,
    #[serde(default = "unit_priority")]
    pub priority: f64,
}

fn unit_priority() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum Command {
    AddTask(AddTask),
    Pause,
    Resume,
    SetSpeed { multiplier: f64 },
    /// Asks for the current snapshot right away, paused or not.
    Poll,
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::AddTask(_) => "add_task",
            Command::Pause => "pause",
            Command::Resume => "resume",
            Command::SetSpeed { .. } => "set_speed",
            Command::Poll => "poll",
        }
    }
}

/// Parses one client frame; the error is the reason sent back to the client.
pub fn parse_command(text: &str) -> Result<Command, String> {
    let mut value: Value = serde_json::from_str(text).map_err(|e| format!("malformed JSON: {e}"))?;
    let obj = value.as_object_mut().ok_or_else(|| "expected a JSON object".to_string())?;
    if let Some(v) = obj.remove("v") {
        if v.as_u64() != Some(PROTOCOL_VERSION) {
            return Err(format!("unsupported protocol version {v}"));
        }
    }
    match obj.get("type") {
        None => return Err("missing \"type\"".to_string()),
        Some(Value::String(t)) if !matches!(t.as_str(), "add_task" | "pause" | "resume" | "set_speed" | "poll") => {
            return Err(format!("unknown message type {t:?}"));
        }
        Some(Value::String(t)) if matches!(t.as_str(), "pause" | "resume" | "poll") => {
            if let Some(extra) = obj.keys().find(|k| k.as_str() != "type") {
                return Err(format!("invalid command: unknown field `{extra}`"));
            }
        }
        Some(Value::String(_)) => {}
        Some(_) => return Err("\"type\" must be a string".to_string()),
    }
    serde_json::from_value(value).map_err(|e| format!("invalid command: {e}"))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentView {
    pub id: u32,
    /// `[x, y, heading]`
    pub pose: [f64; 3],
    pub task: Option<u32>,
    pub k_bt: u8,
    pub prediction: Vec<[f64; 2]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskView {
    pub id: u32,
    pub kind: String,
    pub status: String,
    pub agent: Option<u32>,
    pub waypoints: Vec<[f64; 2]>,
    pub priority: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundView {
    pub round: u64,
    pub t: f64,
    pub n_tasks: usize,
    pub n_bids: usize,
    pub n_assigned: usize,
    pub solve_ms: f64,
    /// `[agent, task]` pairs.
    pub assignments: Vec<[u32; 2]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Snapshot {
    pub step: u64,
    pub t: f64,
    pub paused: bool,
    pub speed: f64,
    pub agents: Vec<AgentView>,
    pub tasks: Vec<TaskView>,
    pub last_round: Option<RoundView>,
    /// `null` with fewer than two agents.
    pub min_distance: Option<f64>,
}

fn xy(p: Point) -> [f64; 2] {
    [p.x, p.y]
}

impl Snapshot {
    pub fn capture(world: &World, paused: bool, speed: f64) -> Self {
        let predictions = world.predictions();
        let agents = world
            .poses()
            .into_iter()
            .zip(predictions)
            .map(|((id, pose), pred)| AgentView {
                id: id.0,
                pose: [pose.x, pose.y, pose.heading],
                task: world.agent_task(id).map(|t| t.0),
                k_bt: world.agent_k_bt(id).unwrap_or(1),
                prediction: pred.poses.iter().map(|p| [p.x, p.y]).collect(),
            })
            .collect();
        let tasks = world
            .coordinator()
            .pool()
            .map(|t| TaskView {
                id: t.id.0,
                kind: match t.kind {
                    TaskKind::Inspect { .. } => "inspect",
                    TaskKind::PickAndDeliver { .. } => "pick_deliver",
                }
                .to_string(),
                status: t.status.label().to_string(),
                agent: t.status.agent().map(|a| a.0),
                waypoints: t.kind.waypoints().into_iter().map(xy).collect(),
                priority: t.priority,
            })
            .collect();
        let last_round = world.log().rounds.last().map(|r| RoundView {
            round: r.round,
            t: r.t,
            n_tasks: r.n_tasks,
            n_bids: r.n_bids,
            n_assigned: r.n_assigned,
            solve_ms: r.solve_ms,
            assignments: r.assignments.iter().map(|(a, t)| [a.0, t.0]).collect(),
        });
        let d = world.min_pairwise_distance();
        Self {
            step: world.step_index(),
            t: world.time(),
            paused,
            speed,
            agents,
            tasks,
            last_round,
            min_distance: d.is_finite().then_some(d),
        }
    }

    pub fn task(&self, id: u32) -> Option<&TaskView> {
        self.tasks.iter().find(|t| t.id == id)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ServerMessage {
    Snapshot(Snapshot),
    Ack {
        command: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        task_id: Option<u32>,
    },
    Error {
        reason: String,
    },
}

#[derive(Serialize, Deserialize)]
struct Envelope<M> {
    v: u64,
    #[serde(flatten)]
    msg: M,
}

impl ServerMessage {
    pub fn to_json(&self) -> String {
        serde_json::to_string(&Envelope {
            v: PROTOCOL_VERSION,
            msg: self,
        })
        .expect("server messages always serialize")
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        let env: Envelope<ServerMessage> = serde_json::from_str(text)?;
        Ok(env.msg)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("{field}: {reason}")]
pub struct Rejection {
    pub field: &'static str,
    pub reason: String,
}

fn reject(field: &'static str, reason: impl Into<String>) -> Rejection {
    Rejection {
        field,
        reason: reason.into(),
    }
}

fn free_point(map: &GridMap, field: &'static str, p: Option<[f64; 2]>) -> Result<Point, Rejection> {
    let p = p.ok_or_else(|| reject(field, "missing"))?;
    let pt = Point::new(p[0], p[1]);
    if !pt.is_finite() {
        return Err(reject(field, "coordinates must be finite"));
    }
    if map.world_to_cell(pt).is_err() {
        return Err(reject(field, "outside the map"));
    }
    if !map.is_free_point(pt) {
        return Err(reject(field, "occupied cell"));
    }
    Ok(pt)
}

/// Checks an injection against `map` and builds the task it describes.
pub fn validate_command(req: &AddTask, map: &GridMap, id: TaskId, now: f64) -> Result<Task, Rejection> {
    if !(req.priority.is_finite() && req.priority > 0.0) {
        return Err(reject("priority", "must be a positive number"));
    }
    let kind = match req.kind {
        WireKind::Inspect => {
            if req.pick.is_some() || req.deliver.is_some() {
                return Err(reject("kind", "inspect takes only target"));
            }
            TaskKind::Inspect {
                target: free_point(map, "target", req.target)?,
            }
        }
        WireKind::PickDeliver => {
            if req.target.is_some() {
                return Err(reject("kind", "pick_deliver takes pick and deliver"));
            }
            TaskKind::PickAndDeliver {
                pick: free_point(map, "pick", req.pick)?,
                deliver: free_point(map, "deliver", req.deliver)?,
            }
        }
    };
    Task::new(id, kind, req.priority, now.max(0.0)).map_err(|e| reject("task", e.to_string()))
}

/// First id above every scripted and pooled task.
pub fn next_task_id(world: &World) -> TaskId {
    let scripted = world.config().tasks.iter().map(|t| t.id.0);
    let pooled = world.coordinator().pool().map(|t| t.id.0);
    TaskId(scripted.chain(pooled).max().map(|m| m + 1).unwrap_or(0))
}

/// True when the snapshot shows `task` held by some agent.
pub fn is_assigned(snapshot: &Snapshot, task: u32) -> bool {
    snapshot
        .task(task)
        .map(|t| t.status == "assigned" || t.status == "critical_stage_passed")
        .unwrap_or(false)
}
