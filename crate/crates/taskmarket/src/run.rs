//! Runs a [`World`] headless, paced to wall time, or behind the operator bridge.

use std::time::{Duration, Instant};

use taskmarket_core::auction::AuctionError;
use taskmarket_core::sim::{step_budget, SimError};
use taskmarket_core::{MetricsLog, ScenarioConfig, World};

use crate::bridge::{Bridge, ClientId};
use crate::live::WallClock;
use crate::protocol::{next_task_id, validate_command, Command, ServerMessage, Snapshot};

#[derive(Debug)]
pub struct RunOptions {
    /// Pace steps to `dt / speed` of wall time.
    pub realtime: bool,
    pub speed: f64,
    pub bridge: Option<Bridge>,
    /// Stop as soon as every scripted task is completed.
    pub stop_when_done: bool,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self {
            realtime: false,
            speed: 1.0,
            bridge: None,
            stop_when_done: true,
        }
    }
}

#[derive(Debug)]
pub struct RunOutcome {
    pub log: MetricsLog,
    pub all_tasks_completed: bool,
    pub steps: u64,
}

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error("invalid scenario: {0}")]
    Config(#[from] taskmarket_core::sim::ConfigError),
    #[error("auction failed: {0}")]
    Auction(#[from] AuctionError),
}

impl From<SimError> for RunError {
    fn from(e: SimError) -> Self {
        match e {
            SimError::Config(c) => RunError::Config(c),
            SimError::Auction(a) => RunError::Auction(a),
        }
    }
}

struct Control {
    paused: bool,
    speed: f64,
}

fn apply(world: &mut World, control: &mut Control, bridge: &Bridge, client: ClientId, cmd: Command) -> bool {
    let reply = |msg: ServerMessage| bridge.send(client, &msg);
    let ack = |cmd: &Command| ServerMessage::Ack {
        command: cmd.name().to_string(),
        task_id: None,
    };
    match cmd {
        Command::AddTask(ref req) => {
            let id = next_task_id(world);
            match validate_command(req, world.map(), id, world.time()) {
                Ok(task) => match world.inject_task(task) {
                    Ok(()) => {
                        log::info!("operator added task {id} at t={:.1}", world.time());
                        reply(ServerMessage::Ack {
                            command: cmd.name().into(),
                            task_id: Some(id.0),
                        });
                        return true;
                    }
                    Err(e) => reply(ServerMessage::Error { reason: e.to_string() }),
                },
                Err(rejection) => reply(ServerMessage::Error {
                    reason: rejection.to_string(),
                }),
            }
        }
        Command::Pause => {
            control.paused = true;
            reply(ack(&cmd));
            return true;
        }
        Command::Resume => {
            control.paused = false;
            reply(ack(&cmd));
            return true;
        }
        Command::SetSpeed { multiplier } => {
            if multiplier.is_finite() && multiplier > 0.0 {
                control.speed = multiplier;
                reply(ack(&cmd));
                return true;
            }
            reply(ServerMessage::Error {
                reason: "multiplier: must be a positive number".into(),
            });
        }
        Command::Poll => reply(ServerMessage::Snapshot(Snapshot::capture(world, control.paused, control.speed))),
    }
    false
}

/// Steps `world` until its duration is used up (or, with `stop_when_done`,
/// every scripted task is completed). With a bridge, commands are applied
/// between steps and a snapshot follows every step, throttled.
pub fn drive(mut world: World, mut options: RunOptions) -> Result<RunOutcome, RunError> {
    let budget = step_budget(world.config());
    let has_tasks = !world.config().tasks.is_empty();
    let clock = WallClock::new();
    let mut control = Control {
        paused: false,
        speed: options.speed,
    };
    let mut next_due = Instant::now();
    loop {
        if let Some(bridge) = options.bridge.as_mut() {
            let mut changed = false;
            for (client, cmd) in bridge.drain() {
                changed |= apply(&mut world, &mut control, bridge, client, cmd);
            }
            if changed {
                bridge.broadcast(&ServerMessage::Snapshot(Snapshot::capture(&world, control.paused, control.speed)));
            }
        }
        if control.paused {
            std::thread::sleep(Duration::from_millis(10));
            next_due = Instant::now();
            continue;
        }
        let finished = world.step_index() >= budget || (options.stop_when_done && has_tasks && world.scripted_tasks_done());
        if finished {
            break;
        }
        world.step_with_clock(&clock)?;
        if let Some(bridge) = options.bridge.as_mut() {
            bridge.push_throttled(&ServerMessage::Snapshot(Snapshot::capture(&world, false, control.speed)));
        }
        if options.realtime {
            next_due += Duration::from_secs_f64(world.config().dt / control.speed);
            let now = Instant::now();
            if next_due > now {
                std::thread::sleep(next_due - now);
            } else {
                next_due = now;
            }
        }
    }
    let all_tasks_completed = world.scripted_tasks_done() && world.coordinator().pool().all(|t| t.status == taskmarket_core::TaskStatus::Completed);
    let steps = world.step_index();
    Ok(RunOutcome {
        log: world.into_log(),
        all_tasks_completed,
        steps,
    })
}

/// Headless run with wall-clock solve timing.
pub fn run(config: ScenarioConfig) -> Result<RunOutcome, RunError> {
    drive(World::new(config)?, RunOptions::default())
}
