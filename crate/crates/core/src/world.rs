//! Pre-mapped environment: continuous obstacles plus the 2.5D occupancy grid
//! (an XYZ heightmap) that the controller and the model reason over.
//!
//! Rasterization counts a cell as occupied when an obstacle footprint overlaps
//! the cell with positive area. Footprint edges that only touch a cell edge do
//! not mark it, so a 2 m cube aligned to a 1 m grid covers exactly four cells.

use std::fmt;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::geometry::{point_segment_distance, segment_box_distance, Vec3};

pub const WORLD_SCHEMA_VERSION: u32 = 1;

/// Tolerance used when deciding whether a path enters a clearance boundary.
/// Paths that run exactly along the boundary are not violations.
pub const CLEARANCE_EPS: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum WorldError {
    #[error("invalid extent: {0}")]
    InvalidExtent(String),
    #[error("resolution must be positive and finite, got {0}")]
    InvalidResolution(f64),
    #[error("resolution {resolution} does not divide the {axis} extent {span}")]
    NonDivisibleExtent { axis: char, span: f64, resolution: f64 },
    #[error("obstacle {0} does not fit inside the world extent")]
    ObstacleOutOfBounds(String),
    #[error("obstacle {id} is invalid: {reason}")]
    InvalidObstacle { id: String, reason: String },
    #[error("duplicate obstacle id {0}")]
    DuplicateObstacle(String),
    #[error("cell ({ix}, {iy}) does not exist")]
    CellNotFound { ix: usize, iy: usize },
    #[error("refinement depth must be between 1 and {max}, got {depth}")]
    InvalidDepth { depth: u32, max: u32 },
    #[error("position {0} is outside the world extent")]
    OutOfBounds(Vec3),
    #[error("world file is invalid: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WorldExtent {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
    pub z_ceiling: f64,
}

impl WorldExtent {
    pub fn validate(&self) -> Result<(), WorldError> {
        let all = [self.x_min, self.x_max, self.y_min, self.y_max, self.z_ceiling];
        if all.iter().any(|v| !v.is_finite()) {
            return Err(WorldError::InvalidExtent("non-finite bound".into()));
        }
        if self.x_min >= self.x_max {
            return Err(WorldError::InvalidExtent("x_min must be below x_max".into()));
        }
        if self.y_min >= self.y_max {
            return Err(WorldError::InvalidExtent("y_min must be below y_max".into()));
        }
        if self.z_ceiling <= 0.0 {
            return Err(WorldError::InvalidExtent("z_ceiling must be positive".into()));
        }
        Ok(())
    }

    pub fn contains_xy(&self, p: Vec3) -> bool {
        p.x >= self.x_min && p.x <= self.x_max && p.y >= self.y_min && p.y <= self.y_max
    }

    /// Closed containment, altitude between the ground and the ceiling.
    pub fn contains(&self, p: Vec3) -> bool {
        self.contains_xy(p) && p.z >= 0.0 && p.z <= self.z_ceiling
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum Shape {
    Cube { center: Vec3, edge_lengths: Vec3 },
    Sphere { center: Vec3, radius: f64 },
}

impl Shape {
    pub fn center(&self) -> Vec3 {
        match self {
            Shape::Cube { center, .. } | Shape::Sphere { center, .. } => *center,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            Shape::Cube { .. } => "cube",
            Shape::Sphere { .. } => "sphere",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Obstacle {
    pub id: String,
    pub shape: Shape,
    /// Extra stand-off distance around the solid.
    #[serde(default)]
    pub clearance: f64,
}

impl Obstacle {
    pub fn cube(id: &str, center: Vec3, edge_lengths: Vec3, clearance: f64) -> Self {
        Self { id: id.into(), shape: Shape::Cube { center, edge_lengths }, clearance }
    }

    pub fn sphere(id: &str, center: Vec3, radius: f64, clearance: f64) -> Self {
        Self { id: id.into(), shape: Shape::Sphere { center, radius }, clearance }
    }

    /// Axis-aligned bounds of the solid.
    pub fn bounds(&self) -> (Vec3, Vec3) {
        match &self.shape {
            Shape::Cube { center, edge_lengths } => {
                let h = *edge_lengths * 0.5;
                (*center - h, *center + h)
            }
            Shape::Sphere { center, radius } => {
                let r = Vec3::new(*radius, *radius, *radius);
                (*center - r, *center + r)
            }
        }
    }

    /// Highest point of the solid.
    pub fn top(&self) -> f64 {
        self.bounds().1.z
    }

    /// Whether the xy-projection of the solid overlaps the rectangle
    /// `[x0, x1] x [y0, y1]` with positive area.
    pub fn footprint_overlaps(&self, x0: f64, y0: f64, x1: f64, y1: f64) -> bool {
        match &self.shape {
            Shape::Cube { .. } => {
                let (lo, hi) = self.bounds();
                lo.x < x1 && x0 < hi.x && lo.y < y1 && y0 < hi.y
            }
            Shape::Sphere { center, radius } => {
                let dx = (x0 - center.x).max(0.0).max(center.x - x1);
                let dy = (y0 - center.y).max(0.0).max(center.y - y1);
                dx.hypot(dy) < *radius
            }
        }
    }

    /// Distance from a segment to the solid; zero on contact.
    pub fn segment_distance(&self, a: Vec3, b: Vec3) -> f64 {
        match &self.shape {
            Shape::Cube { .. } => {
                let (lo, hi) = self.bounds();
                segment_box_distance(a, b, lo, hi)
            }
            Shape::Sphere { center, radius } => {
                (point_segment_distance(*center, a, b) - radius).max(0.0)
            }
        }
    }

    fn validate(&self, extent: &WorldExtent) -> Result<(), WorldError> {
        let invalid = |reason: &str| WorldError::InvalidObstacle {
            id: self.id.clone(),
            reason: reason.into(),
        };
        if self.id.is_empty() {
            return Err(invalid("empty id"));
        }
        if !(self.clearance.is_finite() && self.clearance >= 0.0) {
            return Err(invalid("clearance must be finite and non-negative"));
        }
        match &self.shape {
            Shape::Cube { center, edge_lengths } => {
                if !center.is_finite() || !edge_lengths.is_finite() {
                    return Err(invalid("non-finite geometry"));
                }
                if edge_lengths.x <= 0.0 || edge_lengths.y <= 0.0 || edge_lengths.z <= 0.0 {
                    return Err(invalid("edge lengths must be positive"));
                }
            }
            Shape::Sphere { center, radius } => {
                if !center.is_finite() || !radius.is_finite() {
                    return Err(invalid("non-finite geometry"));
                }
                if *radius <= 0.0 {
                    return Err(invalid("radius must be positive"));
                }
            }
        }
        let (lo, hi) = self.bounds();
        if !(extent.contains(lo) && extent.contains(hi)) {
            return Err(WorldError::ObstacleOutOfBounds(self.id.clone()));
        }
        Ok(())
    }
}

/// Contents of a world description file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorldSpec {
    #[serde(default = "world_schema_version")]
    pub schema_version: u32,
    pub extent: WorldExtent,
    #[serde(default = "default_resolution")]
    pub resolution: f64,
    #[serde(default)]
    pub obstacles: Vec<Obstacle>,
}

fn world_schema_version() -> u32 {
    WORLD_SCHEMA_VERSION
}

fn default_resolution() -> f64 {
    1.0
}

impl WorldSpec {
    pub fn from_json(text: &str) -> Result<Self, WorldError> {
        let spec: WorldSpec =
            serde_json::from_str(text).map_err(|e| WorldError::Invalid(e.to_string()))?;
        if spec.schema_version != WORLD_SCHEMA_VERSION {
            return Err(WorldError::Invalid(format!(
                "unsupported schema_version {}",
                spec.schema_version
            )));
        }
        spec.validate()?;
        Ok(spec)
    }

    pub fn load(path: &Path) -> Result<Self, WorldError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| WorldError::Invalid(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("world spec serializes")
    }

    pub fn validate(&self) -> Result<(), WorldError> {
        self.extent.validate()?;
        check_resolution(&self.extent, self.resolution)?;
        let mut seen = std::collections::BTreeSet::new();
        for obstacle in &self.obstacles {
            obstacle.validate(&self.extent)?;
            if !seen.insert(obstacle.id.as_str()) {
                return Err(WorldError::DuplicateObstacle(obstacle.id.clone()));
            }
        }
        Ok(())
    }

    pub fn obstacle(&self, id: &str) -> Option<&Obstacle> {
        self.obstacles.iter().find(|o| o.id == id)
    }

    pub fn build_grid(&self) -> Result<GridMap, WorldError> {
        GridMap::build(self.extent, self.resolution, &self.obstacles)
    }
}

fn cells_along(span: f64, resolution: f64, axis: char) -> Result<usize, WorldError> {
    let n = span / resolution;
    let rounded = n.round();
    if rounded < 1.0 || (n - rounded).abs() > 1e-9 * n.max(1.0) {
        return Err(WorldError::NonDivisibleExtent { axis, span, resolution });
    }
    Ok(rounded as usize)
}

fn check_resolution(extent: &WorldExtent, resolution: f64) -> Result<(usize, usize), WorldError> {
    if !(resolution.is_finite() && resolution > 0.0) {
        return Err(WorldError::InvalidResolution(resolution));
    }
    let nx = cells_along(extent.x_max - extent.x_min, resolution, 'x')?;
    let ny = cells_along(extent.y_max - extent.y_min, resolution, 'y')?;
    Ok((nx, ny))
}

/// One grid cell. `height` is the tallest obstacle top over the cell footprint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub occupancy: u8,
    pub height: f64,
    /// 2x2 refinement in the order south-west, south-east, north-west, north-east.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub children: Option<Box<[Cell; 4]>>,
}

impl Cell {
    fn rasterize(obstacles: &[Obstacle], rect: Rect, depth: u32) -> Cell {
        if depth > 0 {
            let children = Box::new(rect.quarters().map(|q| Cell::rasterize(obstacles, q, depth - 1)));
            let occupancy = children.iter().map(|c| c.occupancy).max().unwrap_or(0);
            let height = children.iter().map(|c| c.height).fold(0.0, f64::max);
            return Cell { occupancy, height, children: Some(children) };
        }
        let height = obstacles
            .iter()
            .filter(|o| o.footprint_overlaps(rect.x0, rect.y0, rect.x1, rect.y1))
            .map(Obstacle::top)
            .fold(0.0, f64::max);
        Cell { occupancy: u8::from(height > 0.0), height, children: None }
    }

    pub fn is_refined(&self) -> bool {
        self.children.is_some()
    }

    /// Number of refinement levels below this cell.
    pub fn depth(&self) -> u32 {
        self.children
            .as_ref()
            .map(|c| 1 + c.iter().map(Cell::depth).max().unwrap_or(0))
            .unwrap_or(0)
    }

    fn hash_into(&self, h: &mut Sha256) {
        h.update([self.occupancy]);
        h.update(self.height.to_le_bytes());
        match &self.children {
            Some(children) => {
                h.update([1u8]);
                children.iter().for_each(|c| c.hash_into(h));
            }
            None => h.update([0u8]),
        }
    }
}

/// Closed rectangle in the ground plane.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rect {
    pub x0: f64,
    pub y0: f64,
    pub x1: f64,
    pub y1: f64,
}

impl Rect {
    fn quarters(self) -> [Rect; 4] {
        let mx = 0.5 * (self.x0 + self.x1);
        let my = 0.5 * (self.y0 + self.y1);
        [
            Rect { x0: self.x0, y0: self.y0, x1: mx, y1: my },
            Rect { x0: mx, y0: self.y0, x1: self.x1, y1: my },
            Rect { x0: self.x0, y0: my, x1: mx, y1: self.y1 },
            Rect { x0: mx, y0: my, x1: self.x1, y1: self.y1 },
        ]
    }

    pub fn center(&self) -> (f64, f64) {
        (0.5 * (self.x0 + self.x1), 0.5 * (self.y0 + self.y1))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct CellIndex {
    pub ix: usize,
    pub iy: usize,
}

impl fmt::Display for CellIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.ix, self.iy)
    }
}

/// Rasterized heightmap with binary occupancy and optional local refinement.
#[derive(Debug, Clone, PartialEq)]
pub struct GridMap {
    extent: WorldExtent,
    resolution: f64,
    nx: usize,
    ny: usize,
    cells: Vec<Cell>,
    obstacles: Vec<Obstacle>,
}

/// Deepest refinement accepted by [`GridMap::refine_cell`].
pub const MAX_REFINE_DEPTH: u32 = 8;

impl GridMap {
    pub fn build(
        extent: WorldExtent,
        resolution: f64,
        obstacles: &[Obstacle],
    ) -> Result<GridMap, WorldError> {
        extent.validate()?;
        let (nx, ny) = check_resolution(&extent, resolution)?;
        for o in obstacles {
            o.validate(&extent)?;
        }
        let mut grid = GridMap {
            extent,
            resolution,
            nx,
            ny,
            cells: Vec::with_capacity(nx * ny),
            obstacles: obstacles.to_vec(),
        };
        for iy in 0..ny {
            for ix in 0..nx {
                let rect = grid.cell_rect(CellIndex { ix, iy });
                grid.cells.push(Cell::rasterize(obstacles, rect, 0));
            }
        }
        Ok(grid)
    }

    pub fn extent(&self) -> &WorldExtent {
        &self.extent
    }

    pub fn resolution(&self) -> f64 {
        self.resolution
    }

    /// Number of base cells along x and y.
    pub fn dims(&self) -> (usize, usize) {
        (self.nx, self.ny)
    }

    pub fn obstacles(&self) -> &[Obstacle] {
        &self.obstacles
    }

    pub fn cell(&self, idx: CellIndex) -> Option<&Cell> {
        (idx.ix < self.nx && idx.iy < self.ny).then(|| &self.cells[idx.iy * self.nx + idx.ix])
    }

    pub fn cell_rect(&self, idx: CellIndex) -> Rect {
        let x0 = self.extent.x_min + idx.ix as f64 * self.resolution;
        let y0 = self.extent.y_min + idx.iy as f64 * self.resolution;
        Rect { x0, y0, x1: x0 + self.resolution, y1: y0 + self.resolution }
    }

    /// Base cell containing the ground point of `p`. Cells are half-open
    /// except along the maximum edges of the extent.
    pub fn cell_index(&self, p: Vec3) -> Result<CellIndex, WorldError> {
        if !self.extent.contains_xy(p) {
            return Err(WorldError::OutOfBounds(p));
        }
        let ix = (((p.x - self.extent.x_min) / self.resolution).floor() as usize).min(self.nx - 1);
        let iy = (((p.y - self.extent.y_min) / self.resolution).floor() as usize).min(self.ny - 1);
        Ok(CellIndex { ix, iy })
    }

    /// Base cells in row-major order, south row first.
    pub fn cells(&self) -> impl Iterator<Item = (CellIndex, &Cell)> {
        self.cells.iter().enumerate().map(|(i, c)| {
            (CellIndex { ix: i % self.nx, iy: i / self.nx }, c)
        })
    }

    pub fn occupied_count(&self) -> usize {
        self.cells.iter().filter(|c| c.occupancy == 1).count()
    }

    /// Replaces one base cell by a uniform `2^depth x 2^depth` refinement,
    /// re-rasterized against the obstacles.
    pub fn refine_cell(&self, idx: CellIndex, depth: u32) -> Result<GridMap, WorldError> {
        if depth == 0 || depth > MAX_REFINE_DEPTH {
            return Err(WorldError::InvalidDepth { depth, max: MAX_REFINE_DEPTH });
        }
        if self.cell(idx).is_none() {
            return Err(WorldError::CellNotFound { ix: idx.ix, iy: idx.iy });
        }
        let mut out = self.clone();
        let rect = self.cell_rect(idx);
        out.cells[idx.iy * self.nx + idx.ix] = Cell::rasterize(&self.obstacles, rect, depth);
        Ok(out)
    }

    /// Deepest cell containing the ground point of `p`, with its rectangle.
    pub fn leaf_at(&self, p: Vec3) -> Result<(&Cell, Rect), WorldError> {
        let idx = self.cell_index(p)?;
        let mut cell = &self.cells[idx.iy * self.nx + idx.ix];
        let mut rect = self.cell_rect(idx);
        while let Some(children) = &cell.children {
            let (mx, my) = rect.center();
            let east = p.x >= mx;
            let north = p.y >= my;
            let q = usize::from(east) + 2 * usize::from(north);
            rect = rect.quarters()[q];
            cell = &children[q];
        }
        Ok((cell, rect))
    }

    /// 2.5D occupancy: 1 only when the footprint is occupied and `p` is not
    /// above the obstacle height stored for that cell.
    pub fn query_occupancy(&self, p: Vec3) -> Result<u8, WorldError> {
        let (cell, _) = self.leaf_at(p)?;
        Ok(u8::from(cell.occupancy == 1 && p.z <= cell.height))
    }

    /// Stable SHA-256 over a canonical serialization of the grid.
    pub fn digest(&self) -> String {
        let mut h = Sha256::new();
        h.update(b"flightlink-grid-v1");
        for v in [
            self.extent.x_min,
            self.extent.x_max,
            self.extent.y_min,
            self.extent.y_max,
            self.extent.z_ceiling,
            self.resolution,
        ] {
            h.update(v.to_le_bytes());
        }
        h.update((self.nx as u64).to_le_bytes());
        h.update((self.ny as u64).to_le_bytes());
        for cell in &self.cells {
            cell.hash_into(&mut h);
        }
        hex::encode(h.finalize())
    }

    /// Base-cell occupancy as CSV of 0/1, north row first, west to east.
    pub fn to_csv(&self) -> String {
        let mut out = String::with_capacity(self.nx * self.ny * 2);
        for iy in (0..self.ny).rev() {
            let row: Vec<&str> = (0..self.nx)
                .map(|ix| if self.cells[iy * self.nx + ix].occupancy == 1 { "1" } else { "0" })
                .collect();
            out.push_str(&row.join(","));
            out.push('\n');
        }
        out
    }
}

/// Result of testing one straight segment against the continuous obstacles.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CollisionReport {
    /// Obstacles whose solid the segment touches or enters.
    pub collisions: Vec<String>,
    /// Obstacles whose clearance boundary the segment enters.
    pub clearance_violations: Vec<String>,
}

impl CollisionReport {
    pub fn is_clear(&self) -> bool {
        self.collisions.is_empty()
    }
}

/// Exact segment-versus-solid test, independent of the grid.
pub fn collision_check(obstacles: &[Obstacle], a: Vec3, b: Vec3) -> CollisionReport {
    let mut report = CollisionReport::default();
    for o in obstacles {
        let d = o.segment_distance(a, b);
        if d <= 0.0 {
            report.collisions.push(o.id.clone());
        }
        if d < o.clearance - CLEARANCE_EPS {
            report.clearance_violations.push(o.id.clone());
        }
    }
    report
}

/// Outcome of [`validate_world`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidationReport {
    pub cells: (usize, usize),
    pub occupied_cells: usize,
    pub obstacle_count: usize,
    pub digest: String,
    /// Base cells whose occupancy disagrees with a direct per-obstacle test.
    pub mismatches: Vec<CellIndex>,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.mismatches.is_empty()
    }
}

/// Checks the world invariants and cross-checks every rasterized cell against
/// a direct footprint test over all obstacles.
pub fn validate_world(spec: &WorldSpec) -> Result<ValidationReport, WorldError> {
    spec.validate()?;
    let grid = spec.build_grid()?;
    let mismatches = grid
        .cells()
        .filter(|(idx, cell)| {
            let r = grid.cell_rect(*idx);
            let hit = spec.obstacles.iter().any(|o| o.footprint_overlaps(r.x0, r.y0, r.x1, r.y1));
            hit != (cell.occupancy == 1) || (cell.occupancy == 1) != (cell.height > 0.0)
        })
        .map(|(idx, _)| idx)
        .collect();
    Ok(ValidationReport {
        cells: grid.dims(),
        occupied_cells: grid.occupied_count(),
        obstacle_count: spec.obstacles.len(),
        digest: grid.digest(),
        mismatches,
    })
}

/// A random valid 20 x 20 m world with 1 m cells and up to `max_obstacles`
/// cubes and spheres. Some coordinates are snapped to the half-meter lattice
/// so footprint edges regularly coincide with cell edges.
pub fn random_world(seed: u64, max_obstacles: usize) -> WorldSpec {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let extent = WorldExtent { x_min: 0.0, x_max: 20.0, y_min: 0.0, y_max: 20.0, z_ceiling: 10.0 };
    let n = rng.gen_range(0..=max_obstacles);
    let mut obstacles = Vec::with_capacity(n);
    for i in 0..n {
        let snap = rng.gen_bool(0.4);
        let mut draw = |lo: f64, hi: f64| {
            let v: f64 = rng.gen_range(lo..hi);
            if snap {
                ((v * 2.0).round() / 2.0).clamp(lo, hi)
            } else {
                v
            }
        };
        if i % 2 == 0 {
            let ex = draw(0.5, 4.0);
            let ey = draw(0.5, 4.0);
            let ez = draw(0.5, 6.0);
            let cx = draw(ex / 2.0, 20.0 - ex / 2.0);
            let cy = draw(ey / 2.0, 20.0 - ey / 2.0);
            obstacles.push(Obstacle::cube(
                &format!("cube-{i}"),
                Vec3::new(cx, cy, ez / 2.0),
                Vec3::new(ex, ey, ez),
                0.5,
            ));
        } else {
            let r = draw(0.3, 2.5);
            let cx = draw(r, 20.0 - r);
            let cy = draw(r, 20.0 - r);
            let cz = draw(r, 10.0 - r);
            obstacles.push(Obstacle::sphere(&format!("sphere-{i}"), Vec3::new(cx, cy, cz), r, 0.5));
        }
    }
    WorldSpec { schema_version: WORLD_SCHEMA_VERSION, extent, resolution: 1.0, obstacles }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn extent20() -> WorldExtent {
        WorldExtent { x_min: 0.0, x_max: 20.0, y_min: 0.0, y_max: 20.0, z_ceiling: 10.0 }
    }

    fn cube_2x2x5() -> Obstacle {
        Obstacle::cube("cube-1", Vec3::new(10.0, 10.0, 2.5), Vec3::new(2.0, 2.0, 5.0), 0.5)
    }

    #[test]
    fn cube_covers_exactly_four_cells() {
        let grid = GridMap::build(extent20(), 1.0, &[cube_2x2x5()]).unwrap();
        let occupied: Vec<CellIndex> =
            grid.cells().filter(|(_, c)| c.occupancy == 1).map(|(i, _)| i).collect();
        assert_eq!(
            occupied,
            vec![
                CellIndex { ix: 9, iy: 9 },
                CellIndex { ix: 10, iy: 9 },
                CellIndex { ix: 9, iy: 10 },
                CellIndex { ix: 10, iy: 10 },
            ]
        );
        assert!(grid.cells().all(|(_, c)| (c.occupancy == 1) == (c.height == 5.0) || c.height == 0.0));
    }

    #[test]
    fn empty_world_is_free() {
        let grid = GridMap::build(extent20(), 1.0, &[]).unwrap();
        assert_eq!(grid.dims(), (20, 20));
        assert!(grid.cells().all(|(_, c)| c.occupancy == 0 && c.height == 0.0));
    }

    #[test]
    fn non_divisible_extent_is_rejected() {
        let err = GridMap::build(extent20(), 3.0, &[]).unwrap_err();
        assert!(matches!(err, WorldError::NonDivisibleExtent { axis: 'x', .. }));
        assert!(matches!(
            GridMap::build(extent20(), 0.0, &[]).unwrap_err(),
            WorldError::InvalidResolution(_)
        ));
    }

    #[test]
    fn obstacle_outside_extent_is_rejected() {
        let o = Obstacle::cube("edge", Vec3::new(19.5, 10.0, 1.0), Vec3::new(2.0, 2.0, 2.0), 0.0);
        assert_eq!(
            GridMap::build(extent20(), 1.0, &[o]).unwrap_err(),
            WorldError::ObstacleOutOfBounds("edge".into())
        );
        let tall = Obstacle::cube("tall", Vec3::new(5.0, 5.0, 6.0), Vec3::new(1.0, 1.0, 12.0), 0.0);
        assert!(matches!(
            GridMap::build(extent20(), 1.0, &[tall]).unwrap_err(),
            WorldError::ObstacleOutOfBounds(_)
        ));
    }

    #[test]
    fn query_respects_height() {
        let grid = GridMap::build(extent20(), 1.0, &[cube_2x2x5()]).unwrap();
        assert_eq!(grid.query_occupancy(Vec3::new(10.0, 10.0, 6.0)).unwrap(), 0);
        assert_eq!(grid.query_occupancy(Vec3::new(10.0, 10.0, 1.0)).unwrap(), 1);
        assert_eq!(grid.query_occupancy(Vec3::new(10.0, 10.0, 5.0)).unwrap(), 1);
        assert_eq!(grid.query_occupancy(Vec3::new(3.0, 4.0, 1.0)).unwrap(), 0);
        assert_eq!(grid.query_occupancy(Vec3::new(20.0, 20.0, 1.0)).unwrap(), 0);
        assert!(matches!(
            grid.query_occupancy(Vec3::new(-0.1, 4.0, 1.0)),
            Err(WorldError::OutOfBounds(_))
        ));
    }

    #[test]
    fn refine_interior_and_free_cells() {
        let grid = GridMap::build(extent20(), 1.0, &[cube_2x2x5()]).unwrap();
        let fine = grid.refine_cell(CellIndex { ix: 9, iy: 9 }, 1).unwrap();
        let cell = fine.cell(CellIndex { ix: 9, iy: 9 }).unwrap();
        assert!(cell.children.as_ref().unwrap().iter().all(|c| c.occupancy == 1));
        assert_eq!(cell.depth(), 1);

        let free = grid.refine_cell(CellIndex { ix: 2, iy: 2 }, 2).unwrap();
        let cell = free.cell(CellIndex { ix: 2, iy: 2 }).unwrap();
        assert_eq!(cell.occupancy, 0);
        assert_eq!(cell.depth(), 2);
        for k in 0..400 {
            let p = Vec3::new(0.05 + (k % 20) as f64, 0.05 + (k / 20) as f64, 1.0);
            assert_eq!(free.query_occupancy(p).unwrap(), grid.query_occupancy(p).unwrap());
        }
    }

    #[test]
    fn refine_errors() {
        let grid = GridMap::build(extent20(), 1.0, &[]).unwrap();
        assert_eq!(
            grid.refine_cell(CellIndex { ix: 20, iy: 0 }, 1).unwrap_err(),
            WorldError::CellNotFound { ix: 20, iy: 0 }
        );
        assert!(matches!(
            grid.refine_cell(CellIndex { ix: 0, iy: 0 }, 0).unwrap_err(),
            WorldError::InvalidDepth { .. }
        ));
    }

    #[test]
    fn collision_check_cases() {
        let cube = cube_2x2x5();
        let above = collision_check(
            std::slice::from_ref(&cube),
            Vec3::new(2.0, 10.0, 6.0),
            Vec3::new(18.0, 10.0, 6.0),
        );
        assert!(above.collisions.is_empty() && above.clearance_violations.is_empty());

        let through = collision_check(
            std::slice::from_ref(&cube),
            Vec3::new(2.0, 10.0, 2.5),
            Vec3::new(18.0, 10.0, 2.5),
        );
        assert_eq!(through.collisions, vec!["cube-1".to_string()]);

        // Passes 1.6 m from the center of a 1.5 m sphere with 0.5 m clearance.
        let sphere = Obstacle::sphere("s", Vec3::new(10.0, 10.0, 1.5), 1.5, 0.5);
        let graze = collision_check(
            std::slice::from_ref(&sphere),
            Vec3::new(2.0, 11.6, 1.5),
            Vec3::new(18.0, 11.6, 1.5),
        );
        assert!(graze.collisions.is_empty());
        assert_eq!(graze.clearance_violations, vec!["s".to_string()]);
    }

    #[test]
    fn world_json_roundtrip_and_errors() {
        let spec = WorldSpec {
            schema_version: 1,
            extent: extent20(),
            resolution: 1.0,
            obstacles: vec![cube_2x2x5()],
        };
        let parsed = WorldSpec::from_json(&spec.to_json_pretty()).unwrap();
        assert_eq!(parsed, spec);
        assert!(matches!(WorldSpec::from_json("{ not json"), Err(WorldError::Invalid(_))));
        let dup = WorldSpec { obstacles: vec![cube_2x2x5(), cube_2x2x5()], ..spec };
        assert!(matches!(dup.validate(), Err(WorldError::DuplicateObstacle(_))));
    }

    #[test]
    fn csv_export_has_one_row_per_cell_row() {
        let grid = GridMap::build(extent20(), 1.0, &[cube_2x2x5()]).unwrap();
        let csv = grid.to_csv();
        let rows: Vec<&str> = csv.lines().collect();
        assert_eq!(rows.len(), 20);
        // Row 9 from the top is iy = 10.
        assert_eq!(rows[9].split(',').filter(|v| *v == "1").count(), 2);
        assert_eq!(csv.matches('1').count(), 4);
    }

    #[test]
    fn random_worlds_are_valid_and_seeded() {
        for seed in 0..50 {
            let w = random_world(seed, 5);
            w.validate().unwrap();
            assert_eq!(w, random_world(seed, 5));
        }
    }
}
