use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use taskmarket::bench::{generate_instance, run_bench, run_cell, write_bench_csv, BenchSpec, BENCH_HEADER};
use taskmarket_core::allocation::solve_assignment;

fn spec() -> BenchSpec {
    BenchSpec {
        agents: vec![2, 5],
        tasks: vec![3, 8],
        participation: vec![0.5, 1.0],
        trials: 3,
        seed: 9,
    }
}

#[test]
fn one_row_per_cell_in_sweep_order() {
    let s = spec();
    let rows = run_bench(&s).unwrap();
    assert_eq!(rows.len(), s.agents.len() * s.tasks.len() * s.participation.len());
    let cells: Vec<_> = rows.iter().map(|r| (r.n_a, r.n_t, r.participation)).collect();
    let mut want = Vec::new();
    for &a in &s.agents {
        for &t in &s.tasks {
            for &p in &s.participation {
                want.push((a, t, p));
            }
        }
    }
    assert_eq!(cells, want);
    assert!(rows.iter().all(|r| r.trials == 3 && r.median_us <= r.p95_us));
}

#[test]
fn csv_has_the_documented_header() {
    let rows = run_bench(&spec()).unwrap();
    let mut out = Vec::new();
    write_bench_csv(&rows, &mut out).unwrap();
    let text = String::from_utf8(out).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some(BENCH_HEADER));
    assert_eq!(lines.count(), rows.len());
}

#[test]
fn equal_seeds_give_equal_instances() {
    let a = generate_instance(&mut ChaCha8Rng::seed_from_u64(3), 4, 10, 0.3);
    let b = generate_instance(&mut ChaCha8Rng::seed_from_u64(3), 4, 10, 0.3);
    let c = generate_instance(&mut ChaCha8Rng::seed_from_u64(4), 4, 10, 0.3);
    assert_eq!(a, b);
    assert_ne!(a, c);
}

#[test]
fn participation_sets_the_bids_per_agent() {
    let m = generate_instance(&mut ChaCha8Rng::seed_from_u64(1), 6, 10, 0.3);
    for a in m.agents() {
        assert_eq!(m.iter().filter(|&(x, _, _)| x == a).count(), 3);
    }
    assert!(solve_assignment(&m).unwrap().is_feasible_for(&m));
}

#[test]
fn single_agent_single_task_cell() {
    let row = run_cell(0, 1, 1, 1.0, 1).unwrap();
    assert_eq!((row.n_a, row.n_t, row.trials), (1, 1, 1));
    assert!(row.median_us >= 0.0);
}

#[test]
fn invalid_specs_are_refused() {
    let mut s = spec();
    s.agents.clear();
    assert!(run_bench(&s).is_err());
    let mut s = spec();
    s.participation = vec![0.0];
    assert!(run_bench(&s).is_err());
    let mut s = spec();
    s.trials = 0;
    assert!(run_bench(&s).is_err());
    let mut s = spec();
    s.tasks = vec![0];
    assert!(run_bench(&s).is_err());
}
