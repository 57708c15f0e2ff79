//! File formats, logs, the benchmark harness, the live auction loop and the
//! WebSocket operator bridge around [`taskmarket_core`].

pub mod bench;
pub mod bridge;
pub mod live;
pub mod logs;
pub mod map_io;
pub mod protocol;
pub mod run;
pub mod scenario;

pub use map_io::{parse_map, parse_map_str, serialize_map, MapParseError};
pub use scenario::{load_scenario, Scenario, ScenarioError, ScenarioFile};
