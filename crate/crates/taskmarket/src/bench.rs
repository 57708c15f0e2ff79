//! Assignment solver scaling sweep.
//!
//! Each trial draws a uniform `[1, 100]` cost for every agent and task, keeps
//! each agent's `ceil(participation * n_t)` cheapest, converts to profits and
//! times `solve_assignment` alone.

use std::collections::BTreeMap;
use std::io::{self, Write};
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use taskmarket_core::allocation::{costs_to_profits, solve_assignment, AllocError};
use taskmarket_core::cost::participation_count;
use taskmarket_core::{AgentId, Bid, ProfitMatrix, TaskId};

#[derive(Debug, Clone, PartialEq)]
pub struct BenchSpec {
    pub agents: Vec<usize>,
    pub tasks: Vec<usize>,
    pub participation: Vec<f64>,
    pub trials: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum BenchError {
    #[error("{0} list is empty")]
    EmptyList(&'static str),
    #[error("agent and task counts must be >= 1")]
    ZeroCount,
    #[error("participation {0} is outside (0, 1]")]
    Participation(f64),
    #[error("trials must be >= 1")]
    NoTrials,
    #[error("solver failed: {0}")]
    Solver(AllocError),
    #[error("allocation for n_a={n_a}, n_t={n_t} violates the assignment constraints")]
    Infeasible { n_a: usize, n_t: usize },
}

impl BenchSpec {
    pub fn validate(&self) -> Result<(), BenchError> {
        for (name, empty) in [
            ("agents", self.agents.is_empty()),
            ("tasks", self.tasks.is_empty()),
            ("participation", self.participation.is_empty()),
        ] {
            if empty {
                return Err(BenchError::EmptyList(name));
            }
        }
        if self.agents.iter().chain(&self.tasks).any(|&n| n == 0) {
            return Err(BenchError::ZeroCount);
        }
        if let Some(&p) = self.participation.iter().find(|&&p| !(p > 0.0 && p <= 1.0)) {
            return Err(BenchError::Participation(p));
        }
        if self.trials == 0 {
            return Err(BenchError::NoTrials);
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchRow {
    pub n_a: usize,
    pub n_t: usize,
    pub participation: f64,
    pub trials: usize,
    pub median_us: f64,
    pub p95_us: f64,
}

/// One synthetic profit matrix.
pub fn generate_instance(rng: &mut impl Rng, n_a: usize, n_t: usize, participation: f64) -> ProfitMatrix {
    let keep = participation_count(participation, n_t);
    let mut bids = Vec::with_capacity(n_a * keep);
    let mut row: Vec<(f64, u32)> = Vec::with_capacity(n_t);
    for a in 0..n_a {
        row.clear();
        row.extend((0..n_t).map(|t| (rng.gen_range(1.0..=100.0), t as u32)));
        row.sort_by(|x, y| x.0.total_cmp(&y.0).then(x.1.cmp(&y.1)));
        bids.extend(row.iter().take(keep).map(|&(c, t)| Bid::new(AgentId(a as u32), TaskId(t), c)));
    }
    let priorities: BTreeMap<TaskId, f64> = (0..n_t).map(|t| (TaskId(t as u32), 1.0)).collect();
    costs_to_profits(&bids, &priorities).expect("synthetic bids are well formed")
}

/// Independent stream per cell so a cell's instances do not depend on sweep order.
fn cell_rng(seed: u64, n_a: usize, n_t: usize, participation: f64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((n_a as u64) << 40) ^ ((n_t as u64) << 16) ^ (participation * 1000.0).round() as u64);
    rng
}

fn percentile(sorted: &[f64], q: f64) -> f64 {
    let rank = ((q * sorted.len() as f64).ceil() as usize).clamp(1, sorted.len());
    sorted[rank - 1]
}

fn median(sorted: &[f64]) -> f64 {
    let n = sorted.len();
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
    }
}

pub fn run_cell(seed: u64, n_a: usize, n_t: usize, participation: f64, trials: usize) -> Result<BenchRow, BenchError> {
    let mut rng = cell_rng(seed, n_a, n_t, participation);
    let mut times = Vec::with_capacity(trials);
    for _ in 0..trials {
        let profits = generate_instance(&mut rng, n_a, n_t, participation);
        let start = Instant::now();
        let alloc = solve_assignment(&profits);
        let elapsed = start.elapsed();
        let alloc = alloc.map_err(BenchError::Solver)?;
        if !alloc.is_feasible_for(&profits) {
            return Err(BenchError::Infeasible { n_a, n_t });
        }
        times.push(elapsed.as_secs_f64() * 1e6);
    }
    times.sort_by(f64::total_cmp);
    Ok(BenchRow {
        n_a,
        n_t,
        participation,
        trials,
        median_us: median(&times),
        p95_us: percentile(&times, 0.95),
    })
}

/// Runs every cell of the sweep, agents outermost, participation innermost.
pub fn run_bench(spec: &BenchSpec) -> Result<Vec<BenchRow>, BenchError> {
    spec.validate()?;
    let mut rows = Vec::new();
    for &n_a in &spec.agents {
        for &n_t in &spec.tasks {
            for &p in &spec.participation {
                rows.push(run_cell(spec.seed, n_a, n_t, p, spec.trials)?);
            }
        }
    }
    Ok(rows)
}

pub const BENCH_HEADER: &str = "n_a,n_t,participation,trials,median_us,p95_us";

pub fn write_bench_csv(rows: &[BenchRow], out: &mut impl Write) -> io::Result<()> {
    writeln!(out, "{BENCH_HEADER}")?;
    for r in rows {
        writeln!(out, "{},{},{},{},{:.3},{:.3}", r.n_a, r.n_t, r.participation, r.trials, r.median_us, r.p95_us)?;
    }
    Ok(())
}
