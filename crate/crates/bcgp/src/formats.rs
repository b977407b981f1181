//! File formats: geometry JSON, mask dumps, ΔT CSVs, the eigenbasis cache and
//! saved models.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use anyhow::{bail, ensure, Context, Result};
use bcgp_core::laplace_eig::Support;
use bcgp_core::nalgebra::DMatrix;
use bcgp_core::synth::SensorArray;
use bcgp_core::{BoundarySpec, DomainGeometry, Eigenbasis, GridMask, Hole, KernelFamily, ModelKind, Point};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

/// The bundled plate preset.
pub const PLATE_PRESET_JSON: &str = include_str!("../presets/plate.json");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum HoleSpec {
    Circle { cx: f64, cy: f64, r: f64 },
    Rect { x0: f64, y0: f64, x1: f64, y1: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeometryFile {
    pub width_mm: f64,
    pub height_mm: f64,
    #[serde(default)]
    pub holes: Vec<HoleSpec>,
    /// Sensor positions in mm; the plate preset layout when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sensors: Option<Vec<[f64; 2]>>,
}

impl GeometryFile {
    pub fn preset() -> Self {
        serde_json::from_str(PLATE_PRESET_JSON).expect("bundled preset parses")
    }

    pub fn from_domain(geometry: &DomainGeometry, sensors: Option<&SensorArray>) -> Self {
        let holes = geometry
            .holes()
            .iter()
            .map(|h| match *h {
                Hole::Circle { cx, cy, r } => HoleSpec::Circle { cx, cy, r },
                Hole::Rect { x0, y0, x1, y1 } => HoleSpec::Rect { x0, y0, x1, y1 },
            })
            .collect();
        Self {
            width_mm: geometry.width(),
            height_mm: geometry.height(),
            holes,
            sensors: sensors.map(|s| s.positions().iter().map(|p| [p.x, p.y]).collect()),
        }
    }

    pub fn domain(&self) -> Result<DomainGeometry> {
        let holes = self
            .holes
            .iter()
            .map(|h| match *h {
                HoleSpec::Circle { cx, cy, r } => Hole::Circle { cx, cy, r },
                HoleSpec::Rect { x0, y0, x1, y1 } => Hole::Rect { x0, y0, x1, y1 },
            })
            .collect();
        Ok(DomainGeometry::new(self.width_mm, self.height_mm, holes)?)
    }

    pub fn sensor_array(&self) -> Result<SensorArray> {
        match &self.sensors {
            Some(list) => Ok(SensorArray::new(list.iter().map(|&[x, y]| Point::new(x, y)).collect())?),
            None => Ok(bcgp_core::synth::plate_sensors()),
        }
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading geometry {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("parsing geometry {}", path.display()))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, serde_json::to_string_pretty(self)?).with_context(|| format!("writing {}", path.display()))
    }
}

/// SHA-256 over the mask shape, step, origin and cells.
pub fn mask_hash(mask: &GridMask) -> [u8; 32] {
    let mut h = Sha256::new();
    h.update((mask.rows() as u64).to_le_bytes());
    h.update((mask.cols() as u64).to_le_bytes());
    h.update(mask.step().to_le_bytes());
    h.update(mask.origin().x.to_le_bytes());
    h.update(mask.origin().y.to_le_bytes());
    h.update(mask.raw().iter().map(|&b| b as u8).collect::<Vec<u8>>());
    h.finalize().into()
}

/// Writes the mask as rows of `0`/`1`, top row first, after a one-line
/// header `h=<mm> origin=<x>,<y>`.
pub fn write_mask(mask: &GridMask, mut out: impl Write) -> Result<()> {
    let o = mask.origin();
    writeln!(out, "h={} origin={},{}", mask.step(), o.x, o.y)?;
    for r in (0..mask.rows()).rev() {
        let line: Vec<&str> = (0..mask.cols())
            .map(|c| if mask.is_set(r as isize, c as isize) { "1" } else { "0" })
            .collect();
        writeln!(out, "{}", line.join(" "))?;
    }
    Ok(())
}

pub fn read_mask(input: impl Read) -> Result<GridMask> {
    let mut lines = BufReader::new(input).lines();
    let header = lines.next().context("empty mask file")??;
    let (step, origin) = parse_mask_header(&header)?;
    let mut rows: Vec<Vec<bool>> = Vec::new();
    for line in lines {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let row = line
            .split_whitespace()
            .map(|t| match t {
                "0" => Ok(false),
                "1" => Ok(true),
                other => bail!("unexpected mask token {other:?}"),
            })
            .collect::<Result<Vec<bool>>>()?;
        rows.push(row);
    }
    ensure!(!rows.is_empty(), "mask has no rows");
    let cols = rows[0].len();
    ensure!(rows.iter().all(|r| r.len() == cols), "mask rows have different lengths");
    let n_rows = rows.len();
    let cells: Vec<bool> = rows.into_iter().rev().flatten().collect();
    Ok(GridMask::new(n_rows, cols, cells, step, origin)?)
}

fn parse_mask_header(header: &str) -> Result<(f64, Point)> {
    let mut step = None;
    let mut origin = None;
    for token in header.split_whitespace() {
        if let Some(v) = token.strip_prefix("h=") {
            step = Some(v.parse::<f64>()?);
        } else if let Some(v) = token.strip_prefix("origin=") {
            let (x, y) = v.split_once(',').context("origin must be x,y")?;
            origin = Some(Point::new(x.parse()?, y.parse()?));
        }
    }
    Ok((step.context("mask header lacks h=")?, origin.context("mask header lacks origin=")?))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FieldRow {
    pub x_mm: f64,
    pub y_mm: f64,
    pub dt_s: f64,
}

pub fn write_field_csv(path: &Path, points: &[Point], values: &[f64]) -> Result<()> {
    ensure!(points.len() == values.len(), "points and values differ in length");
    let mut w = csv::Writer::from_path(path).with_context(|| format!("creating {}", path.display()))?;
    for (p, &v) in points.iter().zip(values) {
        w.serialize(FieldRow { x_mm: p.x, y_mm: p.y, dt_s: v })?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_field_csv(path: &Path) -> Result<(Vec<Point>, Vec<f64>)> {
    let mut r = csv::Reader::from_path(path).with_context(|| format!("opening {}", path.display()))?;
    let mut points = Vec::new();
    let mut values = Vec::new();
    for row in r.deserialize() {
        let row: FieldRow = row.with_context(|| format!("parsing {}", path.display()))?;
        points.push(Point::new(row.x_mm, row.y_mm));
        values.push(row.dt_s);
    }
    Ok((points, values))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PointRow {
    pub x_mm: f64,
    pub y_mm: f64,
}

pub fn read_points_csv(path: &Path) -> Result<Vec<Point>> {
    let mut r = csv::Reader::from_path(path).with_context(|| format!("opening {}", path.display()))?;
    r.deserialize::<PointRow>()
        .map(|row| Ok(row.map(|p| Point::new(p.x_mm, p.y_mm))?))
        .collect()
}

const CACHE_MAGIC: &[u8; 8] = b"BCGPEIG1";

/// Writes a grid eigenbasis as little-endian binary: magic, mask hash, boundary
/// kind, step, origin, grid shape, `n`, `m`, eigenvalues, then the `n × m`
/// eigenvector matrix in column-major order.
pub fn write_eigencache(path: &Path, basis: &Eigenbasis) -> Result<()> {
    let Support::Grid(mask) = basis.support() else {
        bail!("only grid eigenbases can be cached");
    };
    let mut w = BufWriter::new(File::create(path).with_context(|| format!("creating {}", path.display()))?);
    w.write_all(CACHE_MAGIC)?;
    w.write_all(&mask_hash(mask))?;
    w.write_all(&[match basis.boundary() {
        BoundarySpec::NeumannZero => 0u8,
        BoundarySpec::DirichletZero => 1u8,
    }])?;
    for v in [mask.step(), mask.origin().x, mask.origin().y] {
        w.write_all(&v.to_le_bytes())?;
    }
    for v in [mask.rows(), mask.cols(), mask.len(), basis.len()] {
        w.write_all(&(v as u64).to_le_bytes())?;
    }
    for v in basis.eigenvalues().iter().chain(basis.vectors().as_slice()) {
        w.write_all(&v.to_le_bytes())?;
    }
    w.flush()?;
    Ok(())
}

/// Metadata of a cache file, readable without the mask.
#[derive(Debug, Clone, PartialEq)]
pub struct CacheHeader {
    pub mask_hash: [u8; 32],
    pub boundary: BoundarySpec,
    pub step: f64,
    pub n: usize,
    pub m: usize,
}

fn read_exact<const N: usize>(r: &mut impl Read) -> Result<[u8; N]> {
    let mut buf = [0u8; N];
    r.read_exact(&mut buf)?;
    Ok(buf)
}

fn read_header(r: &mut impl Read) -> Result<(CacheHeader, usize, usize)> {
    ensure!(&read_exact::<8>(r)? == CACHE_MAGIC, "not an eigenbasis cache file");
    let mask_hash = read_exact::<32>(r)?;
    let boundary = match read_exact::<1>(r)?[0] {
        0 => BoundarySpec::NeumannZero,
        1 => BoundarySpec::DirichletZero,
        other => bail!("unknown boundary kind {other}"),
    };
    let step = f64::from_le_bytes(read_exact(r)?);
    let _origin = [f64::from_le_bytes(read_exact(r)?), f64::from_le_bytes(read_exact(r)?)];
    let rows = u64::from_le_bytes(read_exact(r)?) as usize;
    let cols = u64::from_le_bytes(read_exact(r)?) as usize;
    let n = u64::from_le_bytes(read_exact(r)?) as usize;
    let m = u64::from_le_bytes(read_exact(r)?) as usize;
    Ok((CacheHeader { mask_hash, boundary, step, n, m }, rows, cols))
}

pub fn read_eigencache_header(path: &Path) -> Result<CacheHeader> {
    let mut r = BufReader::new(File::open(path).with_context(|| format!("opening {}", path.display()))?);
    Ok(read_header(&mut r)?.0)
}

/// Loads a cache written for `mask`; fails if it was computed on another mask.
pub fn read_eigencache(path: &Path, mask: &GridMask) -> Result<Eigenbasis> {
    let mut r = BufReader::new(File::open(path).with_context(|| format!("opening {}", path.display()))?);
    let (header, rows, cols) = read_header(&mut r)?;
    ensure!(
        header.mask_hash == mask_hash(mask) && rows == mask.rows() && cols == mask.cols() && header.n == mask.len(),
        "eigenbasis cache {} was computed for a different mask",
        path.display()
    );
    let mut read_f64s = |count: usize| -> Result<Vec<f64>> {
        let mut bytes = vec![0u8; count * 8];
        r.read_exact(&mut bytes)?;
        Ok(bytes.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes"))).collect())
    };
    let values = read_f64s(header.m)?;
    let vectors = DMatrix::from_vec(header.n, header.m, read_f64s(header.n * header.m)?);
    Ok(Eigenbasis::from_parts(Support::Grid(mask.clone()), header.boundary, values, vectors)?)
}

pub const MODEL_VERSION: u32 = 1;

/// Where a constrained model's eigenbasis comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BasisRef {
    pub geometry: GeometryFile,
    pub step_mm: f64,
    pub m: usize,
    pub boundary: String,
    pub mask_sha256: String,
    /// Cache file to try before recomputing.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eigencache: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub version: u32,
    pub kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pair: Option<usize>,
    pub family: String,
    pub sigma_f2: f64,
    pub lengthscale_mm: f64,
    pub noise_var: f64,
    /// Constant subtracted from the targets before conditioning.
    pub offset: f64,
    pub training: Vec<FieldRow>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub basis: Option<BasisRef>,
}

impl ModelFile {
    pub fn kind(&self) -> Result<ModelKind> {
        ModelKind::from_name(&self.kind).with_context(|| format!("unknown model kind {:?}", self.kind))
    }

    pub fn family(&self) -> Result<KernelFamily> {
        KernelFamily::from_name(&self.family).with_context(|| format!("unknown kernel family {:?}", self.family))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading model {}", path.display()))?;
        let model: Self = serde_json::from_str(&text).with_context(|| format!("parsing model {}", path.display()))?;
        ensure!(model.version == MODEL_VERSION, "model file version {} is not supported", model.version);
        Ok(model)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, serde_json::to_string_pretty(self)?).with_context(|| format!("writing {}", path.display()))
    }
}

pub fn boundary_name(bc: BoundarySpec) -> &'static str {
    match bc {
        BoundarySpec::NeumannZero => "neumann",
        BoundarySpec::DirichletZero => "dirichlet",
    }
}

pub fn parse_boundary(name: &str) -> Result<BoundarySpec> {
    match name {
        "neumann" | "NeumannZero" => Ok(BoundarySpec::NeumannZero),
        "dirichlet" | "DirichletZero" => Ok(BoundarySpec::DirichletZero),
        other => bail!("unknown boundary condition {other:?}"),
    }
}

/// One line of the metrics table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub pair_index: usize,
    pub spacing_mm: f64,
    pub boundary_mode: String,
    pub coverage: String,
    pub model: String,
    pub nmse: f64,
    pub msll: f64,
    pub n_train: usize,
    pub n_test: usize,
}

pub fn write_metrics_csv(path: &Path, rows: &[MetricsRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).with_context(|| format!("creating {}", path.display()))?;
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_metrics_csv(path: &Path) -> Result<Vec<MetricsRow>> {
    let mut r = csv::Reader::from_path(path).with_context(|| format!("opening {}", path.display()))?;
    Ok(r.deserialize().collect::<std::result::Result<_, _>>()?)
}
