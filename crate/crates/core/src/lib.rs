//! # taskmarket-core
//!
//! Reactive multi-robot task allocation: a central auctioneer announces tasks,
//! agents bid path costs gated by the state of their behavior trees, and an
//! exact assignment solver hands out at most one task per agent. Agents follow
//! risk-aware grid paths with a penalty-method NMPC that keeps clear of the
//! predicted trajectories other agents publish.
//!
//! The crate is `no_std` (it needs `alloc`). File formats, the command-line
//! front end, wall-clock timing and the live operator bridge live in the
//! `taskmarket` companion crate.
//!
//! ## Modules
//!
//! - [`domain`] - poses, tasks, identifiers and the occupancy grid
//! - [`allocation`] - cost to profit conversion and the assignment solver
//! - [`auction`] - announce / bid / allocate rounds over a task pool
//! - [`bt`] - behavior-tree engine and the idle, inspect and pick-and-deliver trees
//! - [`planner`] - risk layer and Dijkstra planner over the grid
//! - [`cost`] - bid computation for an agent
//! - [`nmpc`] - unicycle model, collision penalty and the tracking controller
//! - [`sim`] - deterministic discrete-time world

#![no_std]
#![warn(missing_debug_implementations)]

extern crate alloc;

pub mod allocation;
pub mod auction;
pub mod bt;
pub mod cost;
pub mod domain;
pub(crate) mod math;
pub mod nmpc;
pub mod planner;
pub mod sim;

pub use allocation::{Allocation, Bid, ProfitMatrix};
pub use auction::{AuctionConfig, AuctionRoundRecord, Coordinator};
pub use domain::{AgentId, GridMap, Point, Pose, Task, TaskId, TaskKind, TaskStatus};
pub use nmpc::{ControlInput, NmpcConfig, PredictedTrajectory};
pub use planner::{PlanResult, RiskParams};
pub use sim::{MetricsLog, ScenarioConfig, World};
