use std::path::{Path, PathBuf};

use proptest::prelude::*;
use taskmarket::scenario::{KindName, TaskEntry};
use taskmarket::{load_scenario, parse_map, parse_map_str, serialize_map, ScenarioError, ScenarioFile};
use taskmarket_core::{GridMap, World};

fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
}

fn grid() -> impl Strategy<Value = String> {
    (1usize..12, 1usize..12, prop_oneof![Just("0.1"), Just("0.05"), Just("0.25"), Just("1"), Just("0.3")]).prop_flat_map(
        |(w, h, res)| {
            proptest::collection::vec(proptest::bool::weighted(0.3), w * h).prop_map(move |cells| {
                let mut text = format!("resolution {res}\n");
                for row in cells.chunks(w) {
                    text.extend(row.iter().map(|&o| if o { '#' } else { '.' }));
                    text.push('\n');
                }
                text
            })
        },
    )
}

proptest! {
    #[test]
    fn canonical_maps_round_trip_byte_for_byte(text in grid()) {
        let map = parse_map_str(&text).unwrap();
        prop_assert_eq!(serialize_map(&map), text);
    }

    #[test]
    fn parsed_maps_survive_a_second_pass(text in grid()) {
        let once = parse_map_str(&text).unwrap();
        let twice = parse_map_str(&serialize_map(&once)).unwrap();
        prop_assert_eq!(once.occupancy(), twice.occupancy());
        prop_assert_eq!(once.resolution().to_bits(), twice.resolution().to_bits());
    }

    #[test]
    fn ragged_rows_are_rejected(text in grid(), extra in 1usize..3) {
        let mut lines: Vec<String> = text.lines().map(String::from).collect();
        prop_assume!(lines.len() >= 3);
        let last = lines.len() - 1;
        lines[last].push_str(&".".repeat(extra));
        let joined = lines.join("\n");
        let err = parse_map_str(&joined).unwrap_err();
        prop_assert_eq!(err.line, lines.len());
    }
}

#[test]
fn every_fixture_map_parses_and_round_trips() {
    for dir in ["maps", "planner"] {
        for entry in std::fs::read_dir(fixtures().join(dir)).unwrap() {
            let path = entry.unwrap().path();
            let text = std::fs::read_to_string(&path).unwrap();
            let map = parse_map(&path).unwrap();
            assert_eq!(serialize_map(&map), text, "{}", path.display());
        }
    }
}

#[test]
fn missing_map_file_is_an_io_error() {
    let err = parse_map(Path::new("/nonexistent/nowhere.map")).unwrap_err();
    assert!(err.to_string().contains("nowhere.map"));
}

#[test]
fn every_fixture_scenario_starts_a_world() {
    for entry in std::fs::read_dir(fixtures()).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().is_some_and(|x| x == "json") {
            let s = load_scenario(&path, None).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
            World::new(s.config).unwrap();
        }
    }
}

#[test]
fn scenario_files_round_trip_through_json() {
    let text = std::fs::read_to_string(fixtures().join("scenario-3.json")).unwrap();
    let file = ScenarioFile::from_json(&text).unwrap();
    assert_eq!(ScenarioFile::from_json(&file.to_json()).unwrap(), file);
}

fn minimal() -> ScenarioFile {
    ScenarioFile::from_json(
        r#"{
            "map": "unused.map",
            "agents": [{"id": 0, "start": [0.5, 0.5, 0.0], "home": [0.5, 0.5]}],
            "tasks": [{"id": 0, "kind": "inspect", "arrival_s": 1.0, "target": [1.5, 0.5]}]
        }"#,
    )
    .unwrap()
}

fn open_map() -> GridMap {
    parse_map_str("resolution 0.5\n....\n....\n...#\n").unwrap()
}

#[test]
fn defaults_fill_every_omitted_section() {
    let cfg = minimal().to_config(open_map(), None).unwrap();
    assert_eq!(cfg.dt, 0.1);
    assert_eq!(cfg.duration, 60.0);
    assert_eq!(cfg.nmpc.horizon, 50);
    assert_eq!(cfg.auction.cycle_delay_ms, 100.0);
    assert_eq!(cfg.tasks[0].priority, 1.0);
}

#[test]
fn unknown_keys_are_rejected_at_every_level() {
    let base = r#"{"map": "m", "agents": [], "tasks": []"#;
    for extra in [
        r#", "colour": 1}"#,
        r#", "sim": {"dt_s": 0.1, "speed": 2}}"#,
        r#", "nmpc": {"horizon": 10, "gain": 1}}"#,
        r#", "auction": {"cycle_delay": 100}}"#,
        r#", "risk": {"inflation": 0.3}}"#,
    ] {
        let text = format!("{base}{extra}");
        assert!(matches!(ScenarioFile::from_json(&text), Err(ScenarioError::Json(_))), "{text}");
    }
    let bad_task = r#"{"map": "m", "agents": [], "tasks": [{"id": 0, "kind": "inspect", "target": [1, 1], "due": 3}]}"#;
    assert!(ScenarioFile::from_json(bad_task).is_err());
    let bad_kind = r#"{"map": "m", "agents": [], "tasks": [{"id": 0, "kind": "patrol", "target": [1, 1]}]}"#;
    assert!(ScenarioFile::from_json(bad_kind).is_err());
}

#[test]
fn waypoints_on_occupied_cells_name_the_field() {
    let mut file = minimal();
    file.tasks.push(TaskEntry {
        id: 1,
        kind: KindName::PickDeliver,
        arrival_s: Some(0.0),
        target: None,
        pick: Some([0.25, 0.25]),
        deliver: Some([1.75, 1.25]),
        priority: 1.0,
    });
    match file.to_config(open_map(), None) {
        Err(ScenarioError::Field { field, .. }) => assert_eq!(field, "tasks[1].deliver"),
        other => panic!("expected a field error, got {other:?}"),
    }
    let mut file = minimal();
    file.agents[0].start = [9.0, 9.0, 0.0];
    assert!(matches!(file.to_config(open_map(), None), Err(ScenarioError::Field { .. })));
}

#[test]
fn seeds_decide_the_drawn_arrival_times() {
    let path = fixtures().join("seeded.json");
    let arrivals = |seed| {
        load_scenario(&path, Some(seed))
            .unwrap()
            .config
            .tasks
            .iter()
            .map(|t| (t.id, t.arrival_time))
            .collect::<Vec<_>>()
    };
    assert_eq!(arrivals(1), arrivals(1));
    assert_ne!(arrivals(1), arrivals(2));
    let window = 10.0;
    assert!(arrivals(3).iter().all(|&(_, t)| (0.0..window).contains(&t)));
}

#[test]
fn scenario_with_a_missing_map_reports_the_map() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("s.json");
    std::fs::write(&path, r#"{"map": "absent.map", "agents": []}"#).unwrap();
    let err = load_scenario(&path, None).unwrap_err();
    assert!(matches!(err, ScenarioError::Map(_)), "{err}");
}
