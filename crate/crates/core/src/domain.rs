//! Shared vocabulary: identifiers, poses, tasks and the occupancy grid.

use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use crate::math;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DomainError {
    OutOfBounds,
    InvalidValue,
    InvalidTask(&'static str),
    InvalidTransition { from: TaskStatus, to: TaskStatus },
    InvalidMap(&'static str),
}

impl fmt::Display for DomainError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DomainError::OutOfBounds => write!(f, "position outside map bounds"),
            DomainError::InvalidValue => write!(f, "non-finite value"),
            DomainError::InvalidTask(why) => write!(f, "invalid task: {why}"),
            DomainError::InvalidTransition { from, to } => {
                write!(f, "illegal task status transition {from:?} -> {to:?}")
            }
            DomainError::InvalidMap(why) => write!(f, "invalid map: {why}"),
        }
    }
}

impl core::error::Error for DomainError {}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(transparent))]
pub struct AgentId(pub u32);

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(transparent))]
pub struct TaskId(pub u32);

impl fmt::Display for AgentId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl fmt::Display for TaskId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Planar position in meters.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn distance(&self, other: &Point) -> f64 {
        math::hypot(self.x - other.x, self.y - other.y)
    }

    pub fn distance_sq(&self, other: &Point) -> f64 {
        let dx = self.x - other.x;
        let dy = self.y - other.y;
        dx * dx + dy * dy
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

/// Planar pose of a differential-drive agent. Heading lives in (-pi, pi].
#[derive(Debug, Clone, Copy, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Pose {
    pub x: f64,
    pub y: f64,
    pub heading: f64,
}

impl Pose {
    /// Builds a pose, wrapping the heading. Rejects non-finite components.
    pub fn new(x: f64, y: f64, heading: f64) -> Result<Self, DomainError> {
        if !x.is_finite() || !y.is_finite() {
            return Err(DomainError::InvalidValue);
        }
        Ok(Self {
            x,
            y,
            heading: normalize_heading(heading)?,
        })
    }

    pub fn position(&self) -> Point {
        Point::new(self.x, self.y)
    }
}

/// Maps an angle into (-pi, pi], preserving it modulo 2pi.
pub fn normalize_heading(theta: f64) -> Result<f64, DomainError> {
    if !theta.is_finite() {
        return Err(DomainError::InvalidValue);
    }
    Ok(math::wrap_angle(theta))
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum TaskKind {
    Inspect { target: Point },
    PickAndDeliver { pick: Point, deliver: Point },
}

impl TaskKind {
    pub fn waypoints(&self) -> Vec<Point> {
        match *self {
            TaskKind::Inspect { target } => vec![target],
            TaskKind::PickAndDeliver { pick, deliver } => vec![pick, deliver],
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            TaskKind::Inspect { .. } => "inspect",
            TaskKind::PickAndDeliver { .. } => "pick_deliver",
        }
    }
}

/// Lifecycle of a task. A task may bounce between `Pending` and `Assigned`
/// while it is re-auctioned; once `CriticalStagePassed` it only moves forward.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum TaskStatus {
    Pending,
    Assigned(AgentId),
    CriticalStagePassed(AgentId),
    Completed,
}

impl TaskStatus {
    pub fn agent(&self) -> Option<AgentId> {
        match *self {
            TaskStatus::Assigned(a) | TaskStatus::CriticalStagePassed(a) => Some(a),
            _ => None,
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            TaskStatus::Pending => "pending",
            TaskStatus::Assigned(_) => "assigned",
            TaskStatus::CriticalStagePassed(_) => "critical_stage_passed",
            TaskStatus::Completed => "completed",
        }
    }

    pub fn can_transition_to(&self, next: &TaskStatus) -> bool {
        use TaskStatus::*;
        match (self, next) {
            (Pending | Assigned(_), Pending | Assigned(_)) => true,
            (Assigned(a), CriticalStagePassed(b)) | (CriticalStagePassed(a), CriticalStagePassed(b)) => a == b,
            (Assigned(_) | CriticalStagePassed(_), Completed) => true,
            _ => false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Task {
    pub id: TaskId,
    pub kind: TaskKind,
    pub priority: f64,
    pub arrival_time: f64,
    pub status: TaskStatus,
}

impl Task {
    pub fn new(id: TaskId, kind: TaskKind, priority: f64, arrival_time: f64) -> Result<Self, DomainError> {
        if !(priority.is_finite() && priority > 0.0) {
            return Err(DomainError::InvalidTask("priority must be positive"));
        }
        if !(arrival_time.is_finite() && arrival_time >= 0.0) {
            return Err(DomainError::InvalidTask("arrival time must be >= 0"));
        }
        if kind.waypoints().iter().any(|p| !p.is_finite()) {
            return Err(DomainError::InvalidTask("non-finite waypoint"));
        }
        Ok(Self {
            id,
            kind,
            priority,
            arrival_time,
            status: TaskStatus::Pending,
        })
    }

    pub fn inspect(id: u32, target: Point) -> Self {
        Self::new(TaskId(id), TaskKind::Inspect { target }, 1.0, 0.0).expect("finite target")
    }

    pub fn pick_deliver(id: u32, pick: Point, deliver: Point) -> Self {
        Self::new(TaskId(id), TaskKind::PickAndDeliver { pick, deliver }, 1.0, 0.0)
            .expect("finite waypoints")
    }

    pub fn with_priority(mut self, priority: f64) -> Self {
        self.priority = priority;
        self
    }

    pub fn with_arrival(mut self, arrival_time: f64) -> Self {
        self.arrival_time = arrival_time;
        self
    }

    pub fn set_status(&mut self, next: TaskStatus) -> Result<(), DomainError> {
        if !self.status.can_transition_to(&next) {
            return Err(DomainError::InvalidTransition {
                from: self.status,
                to: next,
            });
        }
        self.status = next;
        Ok(())
    }
}

/// Column/row index of a grid cell. Row grows with y.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Cell {
    pub row: usize,
    pub col: usize,
}

impl Cell {
    pub const fn new(row: usize, col: usize) -> Self {
        Self { row, col }
    }
}

/// Static occupancy grid with an attached risk layer.
///
/// Cell `(row, col)` covers `[col*res, (col+1)*res) x [row*res, (row+1)*res)`.
/// Occupied cells carry infinite risk.
#[derive(Debug, Clone, PartialEq)]
pub struct GridMap {
    width: usize,
    height: usize,
    resolution: f64,
    occupancy: Vec<bool>,
    risk: Vec<f64>,
}

impl GridMap {
    pub fn new(width: usize, height: usize, resolution: f64, occupancy: Vec<bool>) -> Result<Self, DomainError> {
        if !(resolution.is_finite() && resolution > 0.0) {
            return Err(DomainError::InvalidMap("resolution must be positive"));
        }
        if width == 0 || height == 0 {
            return Err(DomainError::InvalidMap("empty grid"));
        }
        if occupancy.len() != width * height {
            return Err(DomainError::InvalidMap("occupancy size mismatch"));
        }
        let risk = occupancy
            .iter()
            .map(|&occ| if occ { f64::INFINITY } else { 0.0 })
            .collect();
        Ok(Self {
            width,
            height,
            resolution,
            occupancy,
            risk,
        })
    }

    pub fn empty(width: usize, height: usize, resolution: f64) -> Result<Self, DomainError> {
        Self::new(width, height, resolution, vec![false; width * height])
    }

    /// Builds a map from rows of `#` (occupied) and `.` (free); row 0 first.
    pub fn from_ascii(rows: &[&str], resolution: f64) -> Result<Self, DomainError> {
        let height = rows.len();
        let width = rows.first().map(|r| r.len()).unwrap_or(0);
        let mut occupancy = Vec::with_capacity(width * height);
        for row in rows {
            if row.len() != width {
                return Err(DomainError::InvalidMap("ragged rows"));
            }
            for ch in row.bytes() {
                match ch {
                    b'#' => occupancy.push(true),
                    b'.' => occupancy.push(false),
                    _ => return Err(DomainError::InvalidMap("unknown cell character")),
                }
            }
        }
        Self::new(width, height, resolution, occupancy)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn resolution(&self) -> f64 {
        self.resolution
    }

    pub fn extent(&self) -> (f64, f64) {
        (self.width as f64 * self.resolution, self.height as f64 * self.resolution)
    }

    pub fn index(&self, cell: Cell) -> usize {
        cell.row * self.width + cell.col
    }

    pub fn cell_of_index(&self, idx: usize) -> Cell {
        Cell::new(idx / self.width, idx % self.width)
    }

    pub fn contains(&self, cell: Cell) -> bool {
        cell.row < self.height && cell.col < self.width
    }

    pub fn is_occupied(&self, cell: Cell) -> bool {
        self.occupancy[self.index(cell)]
    }

    pub fn is_free(&self, cell: Cell) -> bool {
        !self.is_occupied(cell)
    }

    pub fn occupancy(&self) -> &[bool] {
        &self.occupancy
    }

    pub fn risk(&self, cell: Cell) -> f64 {
        self.risk[self.index(cell)]
    }

    pub fn risk_layer(&self) -> &[f64] {
        &self.risk
    }

    pub(crate) fn set_risk_layer(&mut self, risk: Vec<f64>) {
        debug_assert_eq!(risk.len(), self.risk.len());
        self.risk = risk;
    }

    /// Cell containing `p` (floor division by the resolution).
    pub fn world_to_cell(&self, p: Point) -> Result<Cell, DomainError> {
        if !p.is_finite() {
            return Err(DomainError::InvalidValue);
        }
        let (w, h) = self.extent();
        if p.x < 0.0 || p.y < 0.0 || p.x >= w || p.y >= h {
            return Err(DomainError::OutOfBounds);
        }
        let col = (math::floor(p.x / self.resolution) as usize).min(self.width - 1);
        let row = (math::floor(p.y / self.resolution) as usize).min(self.height - 1);
        Ok(Cell::new(row, col))
    }

    pub fn cell_center(&self, cell: Cell) -> Point {
        Point::new(
            (cell.col as f64 + 0.5) * self.resolution,
            (cell.row as f64 + 0.5) * self.resolution,
        )
    }

    /// True when `p` lies inside the map on a free cell.
    pub fn is_free_point(&self, p: Point) -> bool {
        self.world_to_cell(p).map(|c| self.is_free(c)).unwrap_or(false)
    }

    /// Free cell closest to `p` (by center distance), searching outward ring by ring.
    pub fn nearest_free_cell(&self, p: Point) -> Option<Cell> {
        let (w, h) = self.extent();
        let clamped = Point::new(
            p.x.clamp(0.0, w - self.resolution * 1e-6),
            p.y.clamp(0.0, h - self.resolution * 1e-6),
        );
        let origin = self.world_to_cell(clamped).ok()?;
        if self.is_free(origin) {
            return Some(origin);
        }
        let max_ring = self.width.max(self.height);
        for ring in 1..=max_ring {
            let mut best: Option<(f64, Cell)> = None;
            let r0 = origin.row as isize - ring as isize;
            let r1 = origin.row as isize + ring as isize;
            let c0 = origin.col as isize - ring as isize;
            let c1 = origin.col as isize + ring as isize;
            for r in r0..=r1 {
                for c in c0..=c1 {
                    if r != r0 && r != r1 && c != c0 && c != c1 {
                        continue;
                    }
                    if r < 0 || c < 0 {
                        continue;
                    }
                    let cell = Cell::new(r as usize, c as usize);
                    if !self.contains(cell) || self.is_occupied(cell) {
                        continue;
                    }
                    let d = self.cell_center(cell).distance_sq(&p);
                    if best.map(|(bd, _)| d < bd).unwrap_or(true) {
                        best = Some((d, cell));
                    }
                }
            }
            if let Some((_, cell)) = best {
                return Some(cell);
            }
        }
        None
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn world_to_cell_examples() {
        let map = GridMap::empty(10, 10, 0.5).unwrap();
        assert_eq!(map.world_to_cell(Point::new(1.0, 1.0)), Ok(Cell::new(2, 2)));
        let unit = GridMap::empty(4, 4, 1.0).unwrap();
        assert_eq!(unit.world_to_cell(Point::new(0.0, 0.0)), Ok(Cell::new(0, 0)));
        assert_eq!(map.world_to_cell(Point::new(-0.1, 0.0)), Err(DomainError::OutOfBounds));
        assert_eq!(map.world_to_cell(Point::new(5.0, 0.0)), Err(DomainError::OutOfBounds));
    }

    #[test]
    fn cell_center_round_trips() {
        let map = GridMap::empty(7, 5, 0.1).unwrap();
        for row in 0..5 {
            for col in 0..7 {
                let c = Cell::new(row, col);
                assert_eq!(map.world_to_cell(map.cell_center(c)), Ok(c));
            }
        }
    }

    #[test]
    fn normalize_heading_examples() {
        assert_eq!(normalize_heading(0.0), Ok(0.0));
        let a = normalize_heading(3.0 * math::PI).unwrap();
        assert!((a - math::PI).abs() < 1e-12, "{a}");
        let b = normalize_heading(-1.5 * math::PI).unwrap();
        assert!((b - 0.5 * math::PI).abs() < 1e-12, "{b}");
        assert_eq!(normalize_heading(math::PI), Ok(math::PI));
        assert!(normalize_heading(-math::PI).unwrap() > 0.0);
        assert_eq!(normalize_heading(f64::NAN), Err(DomainError::InvalidValue));
        assert_eq!(normalize_heading(f64::INFINITY), Err(DomainError::InvalidValue));
    }

    #[test]
    fn status_transitions() {
        let a = AgentId(1);
        let b = AgentId(2);
        let mut t = Task::pick_deliver(0, Point::new(1.0, 1.0), Point::new(2.0, 2.0));
        t.set_status(TaskStatus::Assigned(a)).unwrap();
        t.set_status(TaskStatus::Assigned(b)).unwrap();
        t.set_status(TaskStatus::Pending).unwrap();
        t.set_status(TaskStatus::Assigned(a)).unwrap();
        assert!(t.set_status(TaskStatus::CriticalStagePassed(b)).is_err());
        t.set_status(TaskStatus::CriticalStagePassed(a)).unwrap();
        assert!(t.set_status(TaskStatus::Assigned(b)).is_err());
        assert!(t.set_status(TaskStatus::Pending).is_err());
        t.set_status(TaskStatus::Completed).unwrap();
        assert!(t.set_status(TaskStatus::Pending).is_err());
        let mut i = Task::inspect(1, Point::new(1.0, 1.0));
        i.set_status(TaskStatus::Assigned(a)).unwrap();
        i.set_status(TaskStatus::Completed).unwrap();
    }

    #[test]
    fn task_validation() {
        let kind = TaskKind::Inspect { target: Point::new(0.0, 0.0) };
        assert!(Task::new(TaskId(0), kind, 0.0, 0.0).is_err());
        assert!(Task::new(TaskId(0), kind, -1.0, 0.0).is_err());
        assert!(Task::new(TaskId(0), kind, 1.0, -0.5).is_err());
        assert!(Task::new(TaskId(0), kind, 1.0, 0.0).is_ok());
    }

    #[test]
    fn ascii_map_and_nearest_free() {
        let map = GridMap::from_ascii(&["...", ".#.", "..."], 1.0).unwrap();
        assert!(map.is_occupied(Cell::new(1, 1)));
        assert_eq!(map.risk(Cell::new(1, 1)), f64::INFINITY);
        let c = map.nearest_free_cell(Point::new(1.5, 1.2)).unwrap();
        assert_eq!(c, Cell::new(0, 1));
        assert!(GridMap::from_ascii(&["..", "..."], 1.0).is_err());
    }
}
