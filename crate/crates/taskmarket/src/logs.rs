//! Run logs on disk.
//!
//! - `metrics.csv`: one row per agent per step:
//!   `step,t,agent,x,y,heading,task,k_bt,v,omega,min_distance,arrived,pending,assigned,critical,completed`.
//!   `task` is empty for an idle agent; `min_distance` is `inf` with fewer than two agents.
//! - `rounds.csv`: `round,t,n_tasks,n_bids,n_assigned,solve_ms`, where `solve_ms`
//!   is wall time and therefore the only column that differs between equal runs.
//! - `events.jsonl`: one JSON object per event.
//!
//! Floats use Rust's shortest round-trip formatting, so equal logs give equal bytes.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;
use taskmarket_core::sim::Event;
use taskmarket_core::MetricsLog;

pub const METRICS_FILE: &str = "metrics.csv";
pub const ROUNDS_FILE: &str = "rounds.csv";
pub const EVENTS_FILE: &str = "events.jsonl";

pub const METRICS_HEADER: &str =
    "step,t,agent,x,y,heading,task,k_bt,v,omega,min_distance,arrived,pending,assigned,critical,completed";
pub const ROUNDS_HEADER: &str = "round,t,n_tasks,n_bids,n_assigned,solve_ms";

pub fn write_metrics_csv(log: &MetricsLog, out: &mut impl Write) -> io::Result<()> {
    writeln!(out, "{METRICS_HEADER}")?;
    for row in &log.steps {
        let c = row.tasks;
        for a in &row.agents {
            let task = a.task.map(|t| t.to_string()).unwrap_or_default();
            writeln!(
                out,
                "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
                row.step,
                row.t,
                a.id,
                a.pose.x,
                a.pose.y,
                a.pose.heading,
                task,
                a.k_bt,
                a.input.v,
                a.input.omega,
                row.min_distance,
                c.arrived,
                c.pending,
                c.assigned,
                c.critical,
                c.completed
            )?;
        }
    }
    Ok(())
}

pub fn write_rounds_csv(log: &MetricsLog, out: &mut impl Write) -> io::Result<()> {
    writeln!(out, "{ROUNDS_HEADER}")?;
    for r in &log.rounds {
        writeln!(out, "{},{},{},{},{},{}", r.round, r.t, r.n_tasks, r.n_bids, r.n_assigned, r.solve_ms)?;
    }
    Ok(())
}

#[derive(Debug, Serialize)]
pub struct EventRecord {
    pub step: u64,
    pub t: f64,
    pub kind: &'static str,
    pub agent: Option<u32>,
    pub task: Option<u32>,
    pub previous: Option<u32>,
    pub k_bt: Option<u8>,
}

impl From<&Event> for EventRecord {
    fn from(e: &Event) -> Self {
        Self {
            step: e.step,
            t: e.t,
            kind: e.kind.label(),
            agent: e.agent.map(|a| a.0),
            task: e.task.map(|t| t.0),
            previous: e.previous.map(|t| t.0),
            k_bt: e.k_bt,
        }
    }
}

pub fn write_events_jsonl(log: &MetricsLog, out: &mut impl Write) -> io::Result<()> {
    for e in &log.events {
        serde_json::to_writer(&mut *out, &EventRecord::from(e))?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

#[derive(Debug, Clone)]
pub struct LogPaths {
    pub metrics: PathBuf,
    pub rounds: PathBuf,
    pub events: PathBuf,
}

/// Writes all three logs into `dir`, creating it if needed.
pub fn write_logs(log: &MetricsLog, dir: &Path) -> io::Result<LogPaths> {
    std::fs::create_dir_all(dir)?;
    let paths = LogPaths {
        metrics: dir.join(METRICS_FILE),
        rounds: dir.join(ROUNDS_FILE),
        events: dir.join(EVENTS_FILE),
    };
    let mut w = BufWriter::new(File::create(&paths.metrics)?);
    write_metrics_csv(log, &mut w)?;
    w.flush()?;
    let mut w = BufWriter::new(File::create(&paths.rounds)?);
    write_rounds_csv(log, &mut w)?;
    w.flush()?;
    let mut w = BufWriter::new(File::create(&paths.events)?);
    write_events_jsonl(log, &mut w)?;
    w.flush()?;
    Ok(paths)
}
