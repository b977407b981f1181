//! Synthetic ΔT ground truth, the sensor array, and training-set sampling.
//!
//! Arrival times are modelled as obstacle-aware shortest paths on the
//! 8-connected grid (diagonal cost `√2·h`, no corner cutting past holes)
//! travelled at a constant speed. A ΔT map is the difference of two such
//! arrival fields.

use alloc::collections::BinaryHeap;
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use core::cmp::Ordering;

#[allow(unused_imports)]
use num_traits::Float;

use crate::error::{Error, Result};
use crate::geometry::{boundary_cells, DomainGeometry, GridMask, Hole, Point};
use crate::gp::TrainingSet;

pub const SENSOR_COUNT: usize = 8;
pub const PAIR_COUNT: usize = 28;
/// Default propagation speed (mm/s).
pub const DEFAULT_WAVE_SPEED: f64 = 5.0e6;
/// Grid step of the plate test set (mm).
pub const PLATE_STEP: f64 = 5.0;
/// Training-point spacings of the sparse-data study (mm).
pub const TABLE1_SPACINGS: [f64; 9] = [10.0, 15.0, 20.0, 25.0, 30.0, 40.0, 50.0, 60.0, 70.0];

/// Sensors `(a, b)` (1-based, `a < b`) of a 1-based pair index, enumerated
/// lexicographically: 1 = (1,2), 2 = (1,3), ..., 28 = (7,8).
pub fn pair_sensors(pair: usize) -> Result<(usize, usize)> {
    if pair == 0 || pair > PAIR_COUNT {
        return Err(Error::InvalidPair(pair));
    }
    let mut k = 0;
    for a in 1..SENSOR_COUNT {
        for b in a + 1..=SENSOR_COUNT {
            k += 1;
            if k == pair {
                return Ok((a, b));
            }
        }
    }
    unreachable!("pair index checked above")
}

/// Inverse of [`pair_sensors`] for `a < b`.
pub fn pair_index(a: usize, b: usize) -> Result<usize> {
    if a == 0 || b > SENSOR_COUNT || a >= b {
        return Err(Error::InvalidArgument(format!("({a}, {b}) is not an ordered sensor pair")));
    }
    Ok((1..a).map(|s| SENSOR_COUNT - s).sum::<usize>() + (b - a))
}

#[derive(Debug, Clone, PartialEq)]
pub struct SensorArray {
    positions: Vec<Point>,
}

impl SensorArray {
    pub fn new(positions: Vec<Point>) -> Result<Self> {
        if positions.len() != SENSOR_COUNT {
            return Err(Error::InvalidArgument(format!("expected {SENSOR_COUNT} sensors, got {}", positions.len())));
        }
        if let Some(i) = positions.iter().position(|p| !p.is_finite()) {
            return Err(Error::PointOutsideDomain { index: i });
        }
        Ok(Self { positions })
    }

    pub fn positions(&self) -> &[Point] {
        &self.positions
    }

    /// Position of a 1-based sensor.
    pub fn sensor(&self, s: usize) -> Point {
        self.positions[s - 1]
    }

    /// Fails with the 0-based index of the first sensor outside `mask`.
    pub fn check_inside(&self, mask: &GridMask) -> Result<()> {
        match self.positions.iter().position(|p| mask.locate(*p).is_none()) {
            Some(index) => Err(Error::PointOutsideDomain { index }),
            None => Ok(()),
        }
    }
}

/// The 200 × 370 mm plate with six holes. The layout approximates a published
/// schematic and is not a measured geometry.
pub fn plate_geometry() -> DomainGeometry {
    DomainGeometry::new(
        200.0,
        370.0,
        vec![
            Hole::Circle { cx: 60.0, cy: 110.0, r: 25.0 },
            Hole::Circle { cx: 140.0, cy: 190.0, r: 45.0 },
            Hole::Circle { cx: 60.0, cy: 270.0, r: 20.0 },
            Hole::Rect { x0: 110.0, y0: 280.0, x1: 170.0, y1: 320.0 },
            Hole::Rect { x0: 120.0, y0: 50.0, x1: 180.0, y1: 90.0 },
            Hole::Rect { x0: 20.0, y0: 170.0, x1: 70.0, y1: 220.0 },
        ],
    )
    .expect("preset geometry is valid")
}

pub fn plate_sensors() -> SensorArray {
    SensorArray::new(vec![
        Point::new(20.0, 60.0),
        Point::new(70.0, 30.0),
        Point::new(40.0, 280.0),
        Point::new(180.0, 120.0),
        Point::new(100.0, 250.0),
        Point::new(180.0, 250.0),
        Point::new(150.0, 330.0),
        Point::new(60.0, 340.0),
    ])
    .expect("preset sensors are valid")
}

#[derive(Clone, Copy, PartialEq)]
struct Entry {
    dist: f64,
    node: usize,
}

impl Eq for Entry {}

impl Ord for Entry {
    fn cmp(&self, other: &Self) -> Ordering {
        // min-heap on distance, ties on node index
        other.dist.total_cmp(&self.dist).then_with(|| other.node.cmp(&self.node))
    }
}

impl PartialOrd for Entry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Shortest in-domain path length (mm) from `source` to every cell centre.
pub fn geodesic_distance_field(mask: &GridMask, source: Point) -> Result<Vec<f64>> {
    let start = mask.locate(source).ok_or(Error::PointOutsideDomain { index: 0 })?;
    let h = mask.step();
    let diagonal = core::f64::consts::SQRT_2 * h;
    let mut dist = vec![f64::INFINITY; mask.len()];
    dist[start] = source.distance(&mask.center(mask.cells()[start]));
    let mut heap = BinaryHeap::new();
    heap.push(Entry { dist: dist[start], node: start });
    while let Some(Entry { dist: d, node }) = heap.pop() {
        if d > dist[node] {
            continue;
        }
        let cell = mask.cells()[node];
        let (r, c) = (cell.row as isize, cell.col as isize);
        for (dr, dc) in [(-1, -1), (-1, 0), (-1, 1), (0, -1), (0, 1), (1, -1), (1, 0), (1, 1)] {
            let Some(next) = mask.index_at(r + dr, c + dc) else { continue };
            let step = if dr != 0 && dc != 0 {
                if !(mask.is_set(r + dr, c) && mask.is_set(r, c + dc)) {
                    continue;
                }
                diagonal
            } else {
                h
            };
            let candidate = d + step;
            if candidate < dist[next] {
                dist[next] = candidate;
                heap.push(Entry { dist: candidate, node: next });
            }
        }
    }
    Ok(dist)
}

/// Geodesic distance fields of every sensor.
pub fn sensor_distances(mask: &GridMask, sensors: &SensorArray) -> Result<Vec<Vec<f64>>> {
    sensors.check_inside(mask)?;
    sensors.positions().iter().map(|&p| geodesic_distance_field(mask, p)).collect()
}

/// ΔT values (s) of one sensor pair over the cells of a mask.
#[derive(Debug, Clone, PartialEq)]
pub struct DeltaTField {
    pub pair: usize,
    /// mm/s.
    pub speed: f64,
    pub values: Vec<f64>,
}

/// `ΔT(x) = (d(x, s_a) − d(x, s_b)) / c` from precomputed sensor distances.
pub fn delta_t_from_distances(distances: &[Vec<f64>], pair: usize, speed: f64) -> Result<DeltaTField> {
    let (a, b) = pair_sensors(pair)?;
    if !(speed > 0.0 && speed.is_finite()) {
        return Err(Error::InvalidArgument("wave speed must be positive".into()));
    }
    let values = distances[a - 1].iter().zip(&distances[b - 1]).map(|(da, db)| (da - db) / speed).collect();
    Ok(DeltaTField { pair, speed, values })
}

pub fn delta_t_field(mask: &GridMask, sensors: &SensorArray, pair: usize, speed: f64) -> Result<DeltaTField> {
    let (a, b) = pair_sensors(pair)?;
    sensors.check_inside(mask)?;
    let da = geodesic_distance_field(mask, sensors.sensor(a))?;
    let db = geodesic_distance_field(mask, sensors.sensor(b))?;
    let mut fields = vec![Vec::new(); SENSOR_COUNT];
    fields[a - 1] = da;
    fields[b - 1] = db;
    delta_t_from_distances(&fields, pair, speed)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BoundaryMode {
    /// Lattice points plus boundary cells on 10 mm grid lines.
    FullBoundary10mm,
    /// Lattice points only, boundary cells included where the lattice hits them.
    InlineWithGrid,
    /// Lattice points with every boundary cell removed.
    NoBoundary,
}

impl BoundaryMode {
    pub fn name(self) -> &'static str {
        match self {
            BoundaryMode::FullBoundary10mm => "full_boundary_10mm",
            BoundaryMode::InlineWithGrid => "inline_with_grid",
            BoundaryMode::NoBoundary => "no_boundary",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        [BoundaryMode::FullBoundary10mm, BoundaryMode::InlineWithGrid, BoundaryMode::NoBoundary]
            .into_iter()
            .find(|m| m.name() == name)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Coverage {
    Full,
    /// Central third of the plate height.
    MiddleSection,
}

impl Coverage {
    pub fn name(self) -> &'static str {
        match self {
            Coverage::Full => "full",
            Coverage::MiddleSection => "middle_section",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        [Coverage::Full, Coverage::MiddleSection].into_iter().find(|c| c.name() == name)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioSpec {
    /// Training lattice spacing (mm).
    pub spacing: f64,
    pub boundary_mode: BoundaryMode,
    pub coverage: Coverage,
    /// 1-based pair indices.
    pub pairs: Vec<usize>,
    pub seed: u64,
}

impl ScenarioSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.spacing > 0.0 && self.spacing.is_finite()) {
            return Err(Error::InvalidScenario(format!("spacing {} is not positive", self.spacing)));
        }
        if self.pairs.is_empty() {
            return Err(Error::InvalidScenario("no sensor pairs".into()));
        }
        for (i, &p) in self.pairs.iter().enumerate() {
            pair_sensors(p)?;
            if self.pairs[..i].contains(&p) {
                return Err(Error::InvalidScenario(format!("pair {p} listed twice")));
            }
        }
        Ok(())
    }
}

fn lattice_stride(spacing: f64, step: f64) -> Result<usize> {
    let ratio = spacing / step;
    let stride = libm::round(ratio);
    if stride < 1.0 || (ratio - stride).abs() > 1e-6 * ratio.max(1.0) {
        return Err(Error::InvalidScenario(format!("spacing {spacing} mm is not a multiple of the grid step {step} mm")));
    }
    Ok(stride as usize)
}

/// Mask indices of the training cells of a scenario, ascending.
pub fn training_indices(mask: &GridMask, scenario: &ScenarioSpec) -> Result<Vec<usize>> {
    scenario.validate()?;
    let stride = lattice_stride(scenario.spacing, mask.step())?;
    let boundary = boundary_cells(mask);
    let edge_stride = libm::round(10.0 / mask.step()).max(1.0) as usize;
    let y0 = mask.origin().y;
    let height = (mask.rows() - 1) as f64 * mask.step();
    let (lo, hi) = (y0 + height / 3.0, y0 + 2.0 * height / 3.0);
    let tol = 1e-9 * mask.step();

    let mut out = Vec::new();
    for (k, cell) in mask.cells().iter().enumerate() {
        if scenario.coverage == Coverage::MiddleSection {
            let y = mask.center(*cell).y;
            if y < lo - tol || y > hi + tol {
                continue;
            }
        }
        let on_lattice = cell.row % stride == 0 && cell.col % stride == 0;
        let is_boundary = boundary.contains(k);
        let keep = match scenario.boundary_mode {
            BoundaryMode::InlineWithGrid => on_lattice,
            BoundaryMode::NoBoundary => on_lattice && !is_boundary,
            BoundaryMode::FullBoundary10mm => {
                on_lattice || (is_boundary && (cell.row % edge_stride == 0 || cell.col % edge_stride == 0))
            }
        };
        if keep {
            out.push(k);
        }
    }
    if out.is_empty() {
        return Err(Error::EmptyTrainingSet);
    }
    Ok(out)
}

pub fn subsample_training(field: &DeltaTField, mask: &GridMask, scenario: &ScenarioSpec) -> Result<TrainingSet> {
    if field.values.len() != mask.len() {
        return Err(Error::InvalidArgument("field does not belong to this mask".into()));
    }
    let idx = training_indices(mask, scenario)?;
    let x = idx.iter().map(|&k| mask.center(mask.cells()[k])).collect();
    let y = idx.iter().map(|&k| field.values[k]).collect();
    TrainingSet::new(x, y)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::rasterize;

    #[test]
    fn pair_table() {
        assert_eq!(pair_sensors(1).unwrap(), (1, 2));
        assert_eq!(pair_sensors(7).unwrap(), (1, 8));
        assert_eq!(pair_sensors(8).unwrap(), (2, 3));
        assert_eq!(pair_sensors(15).unwrap(), (3, 5));
        assert_eq!(pair_sensors(28).unwrap(), (7, 8));
        assert_eq!(pair_sensors(0), Err(Error::InvalidPair(0)));
        assert_eq!(pair_sensors(29), Err(Error::InvalidPair(29)));
        for k in 1..=PAIR_COUNT {
            let (a, b) = pair_sensors(k).unwrap();
            assert_eq!(pair_index(a, b).unwrap(), k);
        }
    }

    #[test]
    fn plate_preset_is_consistent() {
        let mask = rasterize(&plate_geometry(), PLATE_STEP).unwrap();
        let n = mask.len() as f64;
        assert!((n - 2277.0).abs() <= 0.1 * 2277.0, "{n} cells");
        plate_sensors().check_inside(&mask).unwrap();
        for p in plate_sensors().positions() {
            let k = mask.locate(*p).unwrap();
            assert_eq!(mask.center(mask.cells()[k]), *p);
        }
    }

    #[test]
    fn straight_distances_on_open_grid() {
        let mask = GridMask::rectangle(10, 12, 2.0, Point::default()).unwrap();
        let d = geodesic_distance_field(&mask, Point::new(4.0, 6.0)).unwrap();
        let k = |r, c| mask.index_of(crate::geometry::Cell { row: r, col: c }).unwrap();
        assert_eq!(d[k(3, 2)], 0.0);
        assert_eq!(d[k(3, 9)], 14.0);
        assert_eq!(d[k(8, 2)], 10.0);
        assert!((d[k(5, 4)] - 2.0 * core::f64::consts::SQRT_2 * 2.0).abs() < 1e-12);
        assert!(geodesic_distance_field(&mask, Point::new(-5.0, 0.0)).is_err());
    }

    #[test]
    fn antisymmetric_pair_fields() {
        let mask = rasterize(&plate_geometry(), PLATE_STEP).unwrap();
        let sensors = plate_sensors();
        let d = sensor_distances(&mask, &sensors).unwrap();
        let f = delta_t_from_distances(&d, 15, DEFAULT_WAVE_SPEED).unwrap();
        let mut swapped = sensors.positions().to_vec();
        swapped.swap(2, 4);
        let g = delta_t_field(&mask, &SensorArray::new(swapped).unwrap(), 15, DEFAULT_WAVE_SPEED).unwrap();
        assert!(f.values.iter().zip(&g.values).all(|(a, b)| *a == -*b));
        let direct = delta_t_field(&mask, &sensors, 15, DEFAULT_WAVE_SPEED).unwrap();
        assert_eq!(direct, f);
    }

    #[test]
    fn open_plate_lattice_count() {
        let mask = rasterize(&DomainGeometry::new(200.0, 370.0, vec![]).unwrap(), 5.0).unwrap();
        let scenario = ScenarioSpec {
            spacing: 10.0,
            boundary_mode: BoundaryMode::InlineWithGrid,
            coverage: Coverage::Full,
            pairs: vec![1],
            seed: 0,
        };
        assert_eq!(training_indices(&mask, &scenario).unwrap().len(), 21 * 38);
        let bad = ScenarioSpec { spacing: 12.0, ..scenario.clone() };
        assert!(matches!(training_indices(&mask, &bad), Err(Error::InvalidScenario(_))));
        let dup = ScenarioSpec { pairs: vec![3, 3], ..scenario };
        assert!(dup.validate().is_err());
    }

    #[test]
    fn names_round_trip() {
        for m in [BoundaryMode::FullBoundary10mm, BoundaryMode::InlineWithGrid, BoundaryMode::NoBoundary] {
            assert_eq!(BoundaryMode::from_name(m.name()), Some(m));
        }
        for c in [Coverage::Full, Coverage::MiddleSection] {
            assert_eq!(Coverage::from_name(c.name()), Some(c));
        }
    }
}
