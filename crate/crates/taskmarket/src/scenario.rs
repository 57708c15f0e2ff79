//! JSON scenario files.
//!
//! Parsing is strict: unknown keys are rejected, every waypoint must sit on a
//! free map cell, and the resulting [`ScenarioConfig`] is validated before it is
//! returned, so an accepted file always starts a run. `docs/scenario.md`
//! describes every key.

use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use taskmarket_core::sim::{AgentSpec, ConfigError};
use taskmarket_core::{
    AgentId, AuctionConfig, GridMap, NmpcConfig, Point, Pose, RiskParams, ScenarioConfig, Task, TaskId, TaskKind,
};

use crate::map_io::{parse_map, MapLoadError};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    /// Map path, relative to the scenario file.
    pub map: String,
    pub agents: Vec<AgentEntry>,
    #[serde(default)]
    pub tasks: Vec<TaskEntry>,
    #[serde(default)]
    pub auction: AuctionConfig,
    #[serde(default)]
    pub nmpc: NmpcConfig,
    #[serde(default)]
    pub risk: RiskParams,
    #[serde(default)]
    pub sim: SimSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AgentEntry {
    pub id: u32,
    /// `[x, y, heading]`
    pub start: [f64; 3],
    pub home: [f64; 2],
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KindName {
    Inspect,
    PickDeliver,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TaskEntry {
    pub id: u32,
    pub kind: KindName,
    /// Omitted: drawn uniformly from `[0, sim.arrival_window_s)` with the run seed.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub arrival_s: Option<f64>,
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
#[serde(default, deny_unknown_fields)]
pub struct SimSection {
    pub dt_s: f64,
    pub duration_s: f64,
    pub seed: u64,
    pub arrival_window_s: f64,
    pub arrival_radius_m: f64,
}

impl Default for SimSection {
    fn default() -> Self {
        Self {
            dt_s: 0.1,
            duration_s: 60.0,
            seed: 0,
            arrival_window_s: 30.0,
            arrival_radius_m: taskmarket_core::bt::DEFAULT_ARRIVAL_RADIUS,
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ScenarioError {
    #[error("cannot read scenario {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("scenario is not valid JSON for this schema: {0}")]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Map(#[from] MapLoadError),
    #[error("{field}: {reason}")]
    Field { field: String, reason: String },
    #[error("scenario rejected: {0}")]
    Config(#[from] ConfigError),
}

fn field_error(field: impl Into<String>, reason: impl Into<String>) -> ScenarioError {
    ScenarioError::Field {
        field: field.into(),
        reason: reason.into(),
    }
}

/// A parsed scenario ready to run.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub file: ScenarioFile,
    pub map_path: PathBuf,
    pub config: ScenarioConfig,
}

impl ScenarioFile {
    pub fn from_json(text: &str) -> Result<Self, ScenarioError> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenario files always serialize")
    }

    /// Builds the run configuration against `map`; `seed` overrides `sim.seed`.
    pub fn to_config(&self, map: GridMap, seed: Option<u64>) -> Result<ScenarioConfig, ScenarioError> {
        let seed = seed.unwrap_or(self.sim.seed);
        let free = |field: String, p: [f64; 2]| -> Result<Point, ScenarioError> {
            let pt = Point::new(p[0], p[1]);
            if !pt.is_finite() {
                return Err(field_error(field, "coordinates must be finite"));
            }
            if map.world_to_cell(pt).is_err() {
                return Err(field_error(field, "outside the map"));
            }
            if !map.is_free_point(pt) {
                return Err(field_error(field, "on an occupied cell"));
            }
            Ok(pt)
        };

        let mut agents = Vec::with_capacity(self.agents.len());
        for (i, a) in self.agents.iter().enumerate() {
            let [x, y, heading] = a.start;
            free(format!("agents[{i}].start"), [x, y])?;
            let home = free(format!("agents[{i}].home"), a.home)?;
            let start = Pose::new(x, y, heading).map_err(|e| field_error(format!("agents[{i}].start"), e.to_string()))?;
            agents.push(AgentSpec {
                id: AgentId(a.id),
                start,
                home,
            });
        }

        if !(self.sim.arrival_window_s.is_finite() && self.sim.arrival_window_s >= 0.0) {
            return Err(field_error("sim.arrival_window_s", "must be finite and >= 0"));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut tasks = Vec::with_capacity(self.tasks.len());
        for (i, t) in self.tasks.iter().enumerate() {
            let at = |name: &str| format!("tasks[{i}].{name}");
            let kind = match t.kind {
                KindName::Inspect => {
                    if t.pick.is_some() || t.deliver.is_some() {
                        return Err(field_error(at("kind"), "inspect tasks take only `target`"));
                    }
                    let target = t.target.ok_or_else(|| field_error(at("target"), "required for inspect"))?;
                    TaskKind::Inspect {
                        target: free(at("target"), target)?,
                    }
                }
                KindName::PickDeliver => {
                    if t.target.is_some() {
                        return Err(field_error(at("kind"), "pick_deliver tasks take `pick` and `deliver`"));
                    }
                    let pick = t.pick.ok_or_else(|| field_error(at("pick"), "required for pick_deliver"))?;
                    let deliver = t.deliver.ok_or_else(|| field_error(at("deliver"), "required for pick_deliver"))?;
                    TaskKind::PickAndDeliver {
                        pick: free(at("pick"), pick)?,
                        deliver: free(at("deliver"), deliver)?,
                    }
                }
            };
            let arrival = match t.arrival_s {
                Some(a) => a,
                None if self.sim.arrival_window_s > 0.0 => rng.gen_range(0.0..self.sim.arrival_window_s),
                None => 0.0,
            };
            let task = Task::new(TaskId(t.id), kind, t.priority, arrival)
                .map_err(|e| field_error(format!("tasks[{i}]"), e.to_string()))?;
            tasks.push(task);
        }
        tasks.sort_by(|a, b| a.arrival_time.total_cmp(&b.arrival_time).then(a.id.cmp(&b.id)));

        let mut config = ScenarioConfig::new(map, agents, tasks);
        config.auction = self.auction;
        config.nmpc = self.nmpc;
        config.risk = self.risk;
        config.dt = self.sim.dt_s;
        config.duration = self.sim.duration_s;
        config.seed = seed;
        config.arrival_radius = self.sim.arrival_radius_m;
        config.validate()?;
        Ok(config)
    }
}

/// Reads a scenario and its map from disk.
pub fn load_scenario(path: &Path, seed: Option<u64>) -> Result<Scenario, ScenarioError> {
    let text = std::fs::read_to_string(path).map_err(|source| ScenarioError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let file = ScenarioFile::from_json(&text)?;
    let map_path = path.parent().unwrap_or(Path::new(".")).join(&file.map);
    let map = parse_map(&map_path)?;
    let config = file.to_config(map, seed)?;
    Ok(Scenario { file, map_path, config })
}
