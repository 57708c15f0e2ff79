//! Wall-clock auction loop.

use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::mpsc::Receiver;
use std::time::{Duration, Instant};

use taskmarket_core::auction::{AuctionError, BidSource, Clock};
use taskmarket_core::{AuctionRoundRecord, Coordinator, Task};

/// Milliseconds since construction.
#[derive(Debug, Clone, Copy)]
pub struct WallClock {
    origin: Instant,
}

impl WallClock {
    pub fn new() -> Self {
        Self { origin: Instant::now() }
    }

    pub fn seconds(&self) -> f64 {
        self.origin.elapsed().as_secs_f64()
    }
}

impl Default for WallClock {
    fn default() -> Self {
        Self::new()
    }
}

impl Clock for WallClock {
    fn now_ms(&self) -> f64 {
        self.origin.elapsed().as_secs_f64() * 1e3
    }
}

#[derive(Debug, Clone)]
pub struct LiveReport {
    pub records: Vec<AuctionRoundRecord>,
    /// Round start times, seconds since the loop began.
    pub started: Vec<f64>,
    /// Tasks taken from the intake, with the index of the round that followed.
    pub intake: Vec<(Task, usize)>,
    /// Rounds per second between the first and the last round start.
    pub rate_hz: f64,
}

#[derive(Debug, thiserror::Error)]
pub enum LiveError {
    #[error("auction failed: {0}")]
    Auction(#[from] AuctionError),
}

/// Runs rounds until `stop` is set, sleeping `cycle_delay_ms` of wall time after
/// each one. Tasks waiting on `intake` are submitted right before a round, so
/// each is announced in that round. `on_round` sees every record as it is made.
pub fn run_loop(
    coordinator: &mut Coordinator,
    bidders: &mut dyn BidSource,
    intake: Option<&Receiver<Task>>,
    stop: &AtomicBool,
    mut on_round: impl FnMut(&AuctionRoundRecord),
) -> Result<LiveReport, LiveError> {
    let clock = WallClock::new();
    let delay = Duration::from_secs_f64(coordinator.config().cycle_delay_ms / 1e3);
    let mut report = LiveReport {
        records: Vec::new(),
        started: Vec::new(),
        intake: Vec::new(),
        rate_hz: 0.0,
    };
    while !stop.load(Ordering::SeqCst) {
        if let Some(rx) = intake {
            while let Ok(task) = rx.try_recv() {
                coordinator.submit_task(task)?;
                report.intake.push((task, report.records.len()));
            }
        }
        let now = clock.seconds();
        report.started.push(now);
        let record = coordinator.run_round(now, bidders, &clock)?;
        on_round(&record);
        report.records.push(record);
        if stop.load(Ordering::SeqCst) {
            break;
        }
        if !delay.is_zero() {
            std::thread::sleep(delay);
        }
    }
    report.rate_hz = match (report.started.first(), report.started.last()) {
        (Some(first), Some(last)) if report.started.len() > 1 && last > first => {
            (report.started.len() - 1) as f64 / (last - first)
        }
        _ => 0.0,
    };
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use taskmarket_core::auction::BidError;
    use taskmarket_core::{AgentId, AuctionConfig, Bid, Point};

    fn one_agent(delay_ms: f64) -> Coordinator {
        let mut c = Coordinator::new(AuctionConfig {
            cycle_delay_ms: delay_ms,
            participation: 1.0,
        })
        .unwrap();
        c.register_agent(AgentId(0)).unwrap();
        c
    }

    fn trivial(agent: AgentId, tasks: &[Task]) -> Result<Vec<Bid>, BidError> {
        Ok(tasks.iter().map(|t| Bid::new(agent, t.id, 1.0)).collect())
    }

    #[test]
    fn stopping_after_the_third_round_leaves_three_records() {
        let mut c = one_agent(0.0);
        let stop = AtomicBool::new(false);
        let mut bidder = trivial;
        let report = run_loop(&mut c, &mut bidder, None, &stop, |r| {
            if r.round == 2 {
                stop.store(true, Ordering::SeqCst);
            }
        })
        .unwrap();
        assert_eq!(report.records.len(), 3);
    }

    #[test]
    fn queued_tasks_enter_the_next_round() {
        let mut c = one_agent(10.0);
        let stop = AtomicBool::new(false);
        let (tx, rx) = std::sync::mpsc::channel();
        tx.send(Task::inspect(5, Point::new(1.0, 1.0))).unwrap();
        let mut bidder = trivial;
        let report = run_loop(&mut c, &mut bidder, Some(&rx), &stop, |r| {
            if r.round == 1 {
                stop.store(true, Ordering::SeqCst);
            }
        })
        .unwrap();
        assert_eq!(report.intake.len(), 1);
        let (task, round) = report.intake[0];
        assert!(report.records[round].announced.contains(&task.id));
        assert!(report.rate_hz > 0.0);
    }
}
