//! Plate domains with holes and their rasterization onto a regular grid.
//!
//! A [`GridMask`] is a binary matrix over a regular lattice with spacing `h`.
//! Row `i` runs along `y` and column `j` along `x`, with cell `(0, 0)` at the
//! lower-left corner. Each 1-cell owns the closed square of side `h` centred on
//! its node; the discrete domain is the union of those squares.

use alloc::collections::VecDeque;
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};

/// A location on the plate, in millimetres.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn distance(&self, other: &Point) -> f64 {
        libm::hypot(self.x - other.x, self.y - other.y)
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

/// A hole cut through the plate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Hole {
    Circle { cx: f64, cy: f64, r: f64 },
    Rect { x0: f64, y0: f64, x1: f64, y1: f64 },
}

impl Hole {
    /// Closed containment test: points on the rim belong to the hole.
    pub fn contains(&self, p: Point) -> bool {
        match *self {
            Hole::Circle { cx, cy, r } => {
                let (dx, dy) = (p.x - cx, p.y - cy);
                dx * dx + dy * dy <= r * r
            }
            Hole::Rect { x0, y0, x1, y1 } => p.x >= x0 && p.x <= x1 && p.y >= y0 && p.y <= y1,
        }
    }

    /// Smallest extent across the hole.
    pub fn min_diameter(&self) -> f64 {
        match *self {
            Hole::Circle { r, .. } => 2.0 * r,
            Hole::Rect { x0, y0, x1, y1 } => (x1 - x0).min(y1 - y0),
        }
    }

    fn bounds(&self) -> (f64, f64, f64, f64) {
        match *self {
            Hole::Circle { cx, cy, r } => (cx - r, cy - r, cx + r, cy + r),
            Hole::Rect { x0, y0, x1, y1 } => (x0, y0, x1, y1),
        }
    }

    fn is_well_formed(&self) -> bool {
        match *self {
            Hole::Circle { cx, cy, r } => cx.is_finite() && cy.is_finite() && r.is_finite() && r > 0.0,
            Hole::Rect { x0, y0, x1, y1 } => {
                [x0, y0, x1, y1].iter().all(|v| v.is_finite()) && x0 < x1 && y0 < y1
            }
        }
    }

    fn disjoint_from(&self, other: &Hole) -> bool {
        match (*self, *other) {
            (Hole::Circle { cx: ax, cy: ay, r: ar }, Hole::Circle { cx: bx, cy: by, r: br }) => {
                libm::hypot(ax - bx, ay - by) > ar + br
            }
            (Hole::Rect { x0, y0, x1, y1 }, Hole::Rect { x0: u0, y0: v0, x1: u1, y1: v1 }) => {
                x1 < u0 || u1 < x0 || y1 < v0 || v1 < y0
            }
            (Hole::Circle { cx, cy, r }, Hole::Rect { x0, y0, x1, y1 })
            | (Hole::Rect { x0, y0, x1, y1 }, Hole::Circle { cx, cy, r }) => {
                let dx = (x0 - cx).max(0.0).max(cx - x1);
                let dy = (y0 - cy).max(0.0).max(cy - y1);
                libm::hypot(dx, dy) > r
            }
        }
    }
}

/// Rectangular plate `[0, width] x [0, height]` with internal holes.
#[derive(Debug, Clone, PartialEq)]
pub struct DomainGeometry {
    width: f64,
    height: f64,
    holes: Vec<Hole>,
}

impl DomainGeometry {
    pub fn new(width: f64, height: f64, holes: Vec<Hole>) -> Result<Self> {
        if !(width.is_finite() && width > 0.0 && height.is_finite() && height > 0.0) {
            return Err(Error::InvalidGeometry(format!(
                "plate dimensions must be positive, got {width} x {height}"
            )));
        }
        for (k, hole) in holes.iter().enumerate() {
            if !hole.is_well_formed() {
                return Err(Error::InvalidGeometry(format!("hole {k} is malformed")));
            }
            let (x0, y0, x1, y1) = hole.bounds();
            if !(x0 > 0.0 && y0 > 0.0 && x1 < width && y1 < height) {
                return Err(Error::InvalidGeometry(format!(
                    "hole {k} touches or crosses the outer boundary"
                )));
            }
            for (l, other) in holes.iter().enumerate().take(k) {
                if !hole.disjoint_from(other) {
                    return Err(Error::InvalidGeometry(format!("holes {l} and {k} overlap")));
                }
            }
        }
        Ok(Self { width, height, holes })
    }

    pub fn width(&self) -> f64 {
        self.width
    }

    pub fn height(&self) -> f64 {
        self.height
    }

    pub fn holes(&self) -> &[Hole] {
        &self.holes
    }

    /// True if `p` lies in the closed plate and outside every hole.
    pub fn contains(&self, p: Point) -> bool {
        let tol = 1e-9 * self.width.max(self.height);
        p.x >= -tol
            && p.x <= self.width + tol
            && p.y >= -tol
            && p.y <= self.height + tol
            && !self.holes.iter().any(|hole| hole.contains(p))
    }

    /// Copy of this geometry with one more hole, re-validated.
    pub fn with_hole(&self, hole: Hole) -> Result<Self> {
        let mut holes = self.holes.clone();
        holes.push(hole);
        Self::new(self.width, self.height, holes)
    }
}

/// Row/column address of a grid cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Cell {
    pub row: usize,
    pub col: usize,
}

const NOT_IN_DOMAIN: u32 = u32::MAX;

/// Binary raster of a domain.
///
/// 1-cells are enumerated in row-major order; that enumeration is the index
/// space used by stencils, eigenvectors and synthetic fields.
#[derive(Debug, Clone, PartialEq)]
pub struct GridMask {
    rows: usize,
    cols: usize,
    step: f64,
    origin: Point,
    cells: Vec<bool>,
    index: Vec<u32>,
    members: Vec<Cell>,
}

impl GridMask {
    /// Builds a mask from a row-major boolean grid and checks its invariants.
    pub fn new(rows: usize, cols: usize, cells: Vec<bool>, step: f64, origin: Point) -> Result<Self> {
        if !(step.is_finite() && step > 0.0) {
            return Err(Error::InvalidMask(format!("step must be positive, got {step}")));
        }
        if !origin.is_finite() {
            return Err(Error::InvalidMask("origin must be finite".into()));
        }
        if rows == 0 || cols == 0 || cells.len() != rows * cols {
            return Err(Error::InvalidMask(format!(
                "expected {rows}x{cols} cells, got {}",
                cells.len()
            )));
        }
        if rows * cols >= NOT_IN_DOMAIN as usize {
            return Err(Error::InvalidMask("grid too large".into()));
        }
        let mut index = vec![NOT_IN_DOMAIN; rows * cols];
        let mut members = Vec::new();
        for row in 0..rows {
            for col in 0..cols {
                if cells[row * cols + col] {
                    index[row * cols + col] = members.len() as u32;
                    members.push(Cell { row, col });
                }
            }
        }
        let mask = Self { rows, cols, step, origin, cells, index, members };
        mask.check_invariants()?;
        Ok(mask)
    }

    /// Fully populated `rows x cols` mask.
    pub fn rectangle(rows: usize, cols: usize, step: f64, origin: Point) -> Result<Self> {
        Self::new(rows, cols, vec![true; rows * cols], step, origin)
    }

    /// Fully populated mask whose cell squares tile `[0, width] x [0, height]`
    /// exactly, so that the zero-flux faces of the ghost-point stencil sit on the
    /// rectangle's edges. Both sides must be integer multiples of `step`.
    pub fn tiled_rectangle(width: f64, height: f64, step: f64) -> Result<Self> {
        let cols = whole_steps(width, step)?;
        let rows = whole_steps(height, step)?;
        Self::rectangle(rows, cols, step, Point::new(0.5 * step, 0.5 * step))
    }

    /// Fully populated mask of the interior nodes of `[0, width] x [0, height]`
    /// on a lattice of spacing `step`; the dropped-neighbour zero-value stencil
    /// then places its boundary exactly on the rectangle's edges.
    pub fn interior_nodes(width: f64, height: f64, step: f64) -> Result<Self> {
        let cols = whole_steps(width, step)?;
        let rows = whole_steps(height, step)?;
        if cols < 2 || rows < 2 {
            return Err(Error::InvalidMask("rectangle too small for its step".into()));
        }
        Self::rectangle(rows - 1, cols - 1, step, Point::new(step, step))
    }

    fn check_invariants(&self) -> Result<()> {
        if self.members.is_empty() {
            return Err(Error::InvalidMask("mask has no 1-cells".into()));
        }
        let has_interior = self.members.iter().any(|c| self.neighbours4(*c).count() == 4);
        if !has_interior {
            return Err(Error::InvalidMask("mask has no interior cell".into()));
        }
        let mut seen = vec![false; self.members.len()];
        let mut queue = VecDeque::new();
        seen[0] = true;
        queue.push_back(self.members[0]);
        let mut reached = 1;
        while let Some(cell) = queue.pop_front() {
            for nb in self.neighbours4(cell) {
                let k = self.index_of(nb).expect("neighbour is a 1-cell");
                if !seen[k] {
                    seen[k] = true;
                    reached += 1;
                    queue.push_back(nb);
                }
            }
        }
        if reached != self.members.len() {
            return Err(Error::InvalidMask(format!(
                "1-cells are not 4-connected ({reached} of {} reachable)",
                self.members.len()
            )));
        }
        Ok(())
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    pub fn origin(&self) -> Point {
        self.origin
    }

    /// Number of 1-cells.
    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    /// Row-major raw cell values.
    pub fn raw(&self) -> &[bool] {
        &self.cells
    }

    /// 1-cells in index order.
    pub fn cells(&self) -> &[Cell] {
        &self.members
    }

    pub fn is_set(&self, row: isize, col: isize) -> bool {
        row >= 0
            && col >= 0
            && (row as usize) < self.rows
            && (col as usize) < self.cols
            && self.cells[row as usize * self.cols + col as usize]
    }

    /// Index of a 1-cell in the enumeration, `None` for 0-cells.
    pub fn index_of(&self, cell: Cell) -> Option<usize> {
        if cell.row >= self.rows || cell.col >= self.cols {
            return None;
        }
        match self.index[cell.row * self.cols + cell.col] {
            NOT_IN_DOMAIN => None,
            k => Some(k as usize),
        }
    }

    pub(crate) fn index_at(&self, row: isize, col: isize) -> Option<usize> {
        if row < 0 || col < 0 {
            return None;
        }
        self.index_of(Cell { row: row as usize, col: col as usize })
    }

    pub fn center(&self, cell: Cell) -> Point {
        Point::new(
            self.origin.x + cell.col as f64 * self.step,
            self.origin.y + cell.row as f64 * self.step,
        )
    }

    /// Centres of all 1-cells, in index order.
    pub fn centers(&self) -> Vec<Point> {
        self.members.iter().map(|c| self.center(*c)).collect()
    }

    /// The 1-cell whose closed square contains `p`.
    pub fn locate(&self, p: Point) -> Option<usize> {
        if !p.is_finite() {
            return None;
        }
        let u = (p.x - self.origin.x) / self.step;
        let v = (p.y - self.origin.y) / self.step;
        let tol = 1e-9;
        let (col, row) = (libm::round(u), libm::round(v));
        if let Some(k) = self.index_at(row as isize, col as isize) {
            if (u - col).abs() <= 0.5 + tol && (v - row).abs() <= 0.5 + tol {
                return Some(k);
            }
        }
        // Points on a shared edge may round into a 0-cell; try the other side.
        for (dr, dc) in [(0.0, -1.0), (0.0, 1.0), (-1.0, 0.0), (1.0, 0.0), (-1.0, -1.0), (-1.0, 1.0), (1.0, -1.0), (1.0, 1.0)] {
            let (r, c) = (row + dr, col + dc);
            if (u - c).abs() <= 0.5 + tol && (v - r).abs() <= 0.5 + tol {
                if let Some(k) = self.index_at(r as isize, c as isize) {
                    return Some(k);
                }
            }
        }
        None
    }

    /// 4-neighbours of `cell` that are 1-cells.
    pub fn neighbours4(&self, cell: Cell) -> impl Iterator<Item = Cell> + '_ {
        let (r, c) = (cell.row as isize, cell.col as isize);
        [(r - 1, c), (r + 1, c), (r, c - 1), (r, c + 1)]
            .into_iter()
            .filter(move |&(rr, cc)| self.is_set(rr, cc))
            .map(|(rr, cc)| Cell { row: rr as usize, col: cc as usize })
    }

    /// True if the cell lies on the outermost rows or columns of the grid.
    pub fn on_outer_perimeter(&self, cell: Cell) -> bool {
        cell.row == 0 || cell.col == 0 || cell.row + 1 == self.rows || cell.col + 1 == self.cols
    }
}

fn whole_steps(length: f64, step: f64) -> Result<usize> {
    if !(length > 0.0 && step > 0.0 && length.is_finite() && step.is_finite()) {
        return Err(Error::InvalidMask("length and step must be positive".into()));
    }
    let n = libm::round(length / step);
    if (n * step - length).abs() > 1e-9 * length || n < 1.0 {
        return Err(Error::InvalidMask(format!("{length} is not a whole number of steps {step}")));
    }
    Ok(n as usize)
}

/// Rasterizes `geometry` with nodes at multiples of `step` from the origin.
///
/// A cell is set iff its node lies in the closed plate and outside every hole.
pub fn rasterize(geometry: &DomainGeometry, step: f64) -> Result<GridMask> {
    if !(step.is_finite() && step > 0.0) {
        return Err(Error::StepTooCoarse(format!("step must be positive, got {step}")));
    }
    if let Some(smallest) = geometry.holes.iter().map(Hole::min_diameter).reduce(f64::min) {
        if step >= smallest {
            return Err(Error::StepTooCoarse(format!(
                "step {step} is not below the smallest hole diameter {smallest}"
            )));
        }
    }
    let cols = libm::floor(geometry.width / step + 1e-9) as usize + 1;
    let rows = libm::floor(geometry.height / step + 1e-9) as usize + 1;
    let mut cells = vec![false; rows * cols];
    let mut hole_hit = vec![false; geometry.holes.len()];
    for row in 0..rows {
        for col in 0..cols {
            let p = Point::new(col as f64 * step, row as f64 * step);
            let mut inside = true;
            for (k, hole) in geometry.holes.iter().enumerate() {
                if hole.contains(p) {
                    hole_hit[k] = true;
                    inside = false;
                }
            }
            cells[row * cols + col] = inside;
        }
    }
    if let Some(k) = hole_hit.iter().position(|hit| !hit) {
        return Err(Error::StepTooCoarse(format!("hole {k} covers no cell centre")));
    }
    GridMask::new(rows, cols, cells, step, Point::new(0.0, 0.0)).map_err(|e| match e {
        Error::InvalidMask(msg) => Error::StepTooCoarse(msg),
        other => other,
    })
}

/// Boundary cells of a mask, as sorted 1-cell indices.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct BoundaryCells {
    /// 1-cells on the outermost rows and columns.
    pub outer: Vec<usize>,
    /// 1-cells next to a 0-cell that are not on the outer perimeter.
    pub inner: Vec<usize>,
}

impl BoundaryCells {
    pub fn contains(&self, index: usize) -> bool {
        self.outer.binary_search(&index).is_ok() || self.inner.binary_search(&index).is_ok()
    }
}

pub fn boundary_cells(mask: &GridMask) -> BoundaryCells {
    let mut out = BoundaryCells::default();
    for (k, cell) in mask.cells().iter().enumerate() {
        if mask.on_outer_perimeter(*cell) {
            out.outer.push(k);
        } else if mask.neighbours4(*cell).count() < 4 {
            out.inner.push(k);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn full(rows: usize, cols: usize) -> GridMask {
        GridMask::rectangle(rows, cols, 1.0, Point::default()).unwrap()
    }

    #[test]
    fn hole_free_plate_count_matches_closed_form() {
        let geometry = DomainGeometry::new(200.0, 370.0, Vec::new()).unwrap();
        let mask = rasterize(&geometry, 5.0).unwrap();
        assert_eq!((mask.rows(), mask.cols()), (75, 41));
        assert_eq!(mask.len(), 41 * 75);
        assert_eq!(mask.len(), 3075);
    }

    #[test]
    fn oversized_centered_hole_is_rejected() {
        let res = DomainGeometry::new(10.0, 10.0, vec![Hole::Circle { cx: 5.0, cy: 5.0, r: 6.0 }])
            .and_then(|g| rasterize(&g, 1.0));
        assert!(res.is_err());
    }

    #[test]
    fn overlapping_holes_are_rejected() {
        let holes = vec![
            Hole::Circle { cx: 50.0, cy: 50.0, r: 10.0 },
            Hole::Rect { x0: 55.0, y0: 40.0, x1: 80.0, y1: 60.0 },
        ];
        assert!(matches!(DomainGeometry::new(100.0, 100.0, holes), Err(Error::InvalidGeometry(_))));
    }

    #[test]
    fn coarse_step_is_rejected() {
        let g = DomainGeometry::new(100.0, 100.0, vec![Hole::Circle { cx: 50.0, cy: 50.0, r: 2.0 }]).unwrap();
        assert!(matches!(rasterize(&g, 5.0), Err(Error::StepTooCoarse(_))));
        // Small enough step, but the hole still falls between nodes.
        let g = DomainGeometry::new(100.0, 100.0, vec![Hole::Circle { cx: 52.5, cy: 52.5, r: 1.9 }]).unwrap();
        assert!(matches!(rasterize(&g, 3.0), Err(Error::StepTooCoarse(_))));
        let g = DomainGeometry::new(100.0, 100.0, vec![Hole::Rect { x0: 51.0, y0: 51.0, x1: 54.0, y1: 54.0 }]).unwrap();
        assert!(matches!(rasterize(&g, 3.5), Err(Error::StepTooCoarse(_))));
    }

    #[test]
    fn perimeter_counts() {
        let b = boundary_cells(&full(5, 5));
        assert_eq!(b.outer.len(), 16);
        assert!(b.inner.is_empty());
        assert_eq!(boundary_cells(&full(3, 3)).outer.len(), 8);
    }

    #[test]
    fn centre_hole_marks_its_neighbours_as_inner() {
        let mut cells = vec![true; 25];
        cells[12] = false;
        let mask = GridMask::new(5, 5, cells, 1.0, Point::default()).unwrap();
        let b = boundary_cells(&mask);
        let inner: Vec<Cell> = b.inner.iter().map(|&k| mask.cells()[k]).collect();
        assert_eq!(
            inner,
            vec![
                Cell { row: 1, col: 2 },
                Cell { row: 2, col: 1 },
                Cell { row: 2, col: 3 },
                Cell { row: 3, col: 2 }
            ]
        );
    }

    #[test]
    fn disconnected_and_interior_free_masks_are_invalid() {
        let mut cells = vec![true; 35];
        for row in 0..5 {
            cells[row * 7 + 3] = false;
        }
        assert!(GridMask::new(5, 7, cells, 1.0, Point::default()).is_err());
        assert!(GridMask::rectangle(2, 8, 1.0, Point::default()).is_err());
        assert!(GridMask::rectangle(3, 3, 0.0, Point::default()).is_err());
    }

    #[test]
    fn locate_finds_owning_cell() {
        let mask = full(4, 4);
        assert_eq!(mask.locate(Point::new(1.0, 2.0)), mask.index_of(Cell { row: 2, col: 1 }));
        assert_eq!(mask.locate(Point::new(-0.5, 0.0)), Some(0));
        assert_eq!(mask.locate(Point::new(-0.6, 0.0)), None);
        assert_eq!(mask.locate(Point::new(3.2, 3.4)), mask.index_of(Cell { row: 3, col: 3 }));
    }

    #[test]
    fn tiled_and_interior_rectangles() {
        let tiled = GridMask::tiled_rectangle(1.0, 1.0, 1.0 / 64.0).unwrap();
        assert_eq!(tiled.len(), 64 * 64);
        assert_eq!(tiled.origin(), Point::new(0.5 / 64.0, 0.5 / 64.0));
        let nodes = GridMask::interior_nodes(1.0, 1.0, 1.0 / 64.0).unwrap();
        assert_eq!(nodes.len(), 63 * 63);
        assert!(GridMask::tiled_rectangle(1.0, 1.0, 0.3).is_err());
    }
}
