//! Geometry primitives shared by the continuous CSA model and the point
//! process: axis-aligned box domains, point containers and neighbour
//! counting.
//!
//! Two points are neighbours when their Euclidean distance is at most the
//! interaction radius `R` (closed ball: distance exactly `R` counts).

use std::collections::BTreeMap;
use std::io::{BufRead, Write};

use rand::Rng;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SpatialError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("invalid box bounds: lower[{0}] must be strictly below upper[{0}]")]
    BadBounds(usize),
    #[error("point {0} lies outside the domain")]
    OutOfDomain(usize),
    #[error("csv: {0}")]
    Csv(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Axis-aligned box in `d`-dimensional space.
#[derive(Debug, Clone, PartialEq)]
pub struct Domain {
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl Domain {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self, SpatialError> {
        if lower.len() != upper.len() || lower.is_empty() {
            return Err(SpatialError::DimensionMismatch {
                expected: lower.len().max(1),
                got: upper.len(),
            });
        }
        for (i, (lo, hi)) in lower.iter().zip(&upper).enumerate() {
            if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
                return Err(SpatialError::BadBounds(i));
            }
        }
        Ok(Self { lower, upper })
    }

    /// The cube `[0,1]^d`.
    pub fn unit_cube(d: usize) -> Self {
        Self::new(vec![0.0; d], vec![1.0; d]).expect("unit cube is valid")
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    /// Product of the side lengths.
    pub fn volume(&self) -> f64 {
        self.lower
            .iter()
            .zip(&self.upper)
            .map(|(lo, hi)| hi - lo)
            .product()
    }

    /// Closed-box membership test.
    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.dim()
            && x.iter()
                .zip(self.lower.iter().zip(&self.upper))
                .all(|(xi, (lo, hi))| *xi >= *lo && *xi <= *hi)
    }

    /// Rescale every side by `m^{1/d}`, keeping the lower corner fixed, so
    /// that the volume is multiplied by `m`.
    pub fn rescaled(&self, m: f64) -> Self {
        let factor = m.powf(1.0 / self.dim() as f64);
        let upper = self
            .lower
            .iter()
            .zip(&self.upper)
            .map(|(lo, hi)| lo + (hi - lo) * factor)
            .collect();
        Self {
            lower: self.lower.clone(),
            upper,
        }
    }

    /// Uniform point in the box.
    pub fn sample_uniform<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        self.lower
            .iter()
            .zip(&self.upper)
            .map(|(lo, hi)| rng.random_range(*lo..*hi))
            .collect()
    }
}

/// Squared Euclidean distance; panics are avoided by the callers checking
/// dimensions up front.
pub(crate) fn dist_sq(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Number of points of `config` within (closed) distance `radius` of `x`.
pub fn neighbour_count(
    x: &[f64],
    config: impl IntoIterator<Item = impl AsRef<[f64]>>,
    radius: f64,
) -> Result<usize, SpatialError> {
    let r_sq = radius * radius;
    let mut count = 0;
    for p in config {
        let p = p.as_ref();
        if p.len() != x.len() {
            return Err(SpatialError::DimensionMismatch {
                expected: x.len(),
                got: p.len(),
            });
        }
        if dist_sq(x, p) <= r_sq {
            count += 1;
        }
    }
    Ok(count)
}

/// Ordered sequence of points with arrival order, all inside a [`Domain`].
#[derive(Debug, Clone, PartialEq)]
pub struct PointSeq {
    dim: usize,
    points: Vec<Vec<f64>>,
}

impl PointSeq {
    pub fn new(domain: &Domain, points: Vec<Vec<f64>>) -> Result<Self, SpatialError> {
        for (i, p) in points.iter().enumerate() {
            if p.len() != domain.dim() {
                return Err(SpatialError::DimensionMismatch {
                    expected: domain.dim(),
                    got: p.len(),
                });
            }
            if !domain.contains(p) {
                return Err(SpatialError::OutOfDomain(i));
            }
        }
        Ok(Self {
            dim: domain.dim(),
            points,
        })
    }

    pub(crate) fn from_parts(dim: usize, points: Vec<Vec<f64>>) -> Self {
        Self { dim, points }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[Vec<f64>] {
        &self.points
    }

    /// The prefix `x(k)` of the first `k` arrivals.
    pub fn prefix(&self, k: usize) -> &[Vec<f64>] {
        &self.points[..k]
    }
}

/// Uniform-grid index with cell side equal to the interaction radius.
/// Neighbour queries scan the 3^d surrounding cells; correctness is defined
/// by the naive scan in [`neighbour_count`].
#[derive(Debug, Clone)]
pub struct NeighbourGrid {
    radius: f64,
    dim: usize,
    cells: BTreeMap<Vec<i64>, Vec<Vec<f64>>>,
    len: usize,
}

impl NeighbourGrid {
    pub fn new(dim: usize, radius: f64) -> Self {
        assert!(radius > 0.0, "interaction radius must be positive");
        Self {
            radius,
            dim,
            cells: BTreeMap::new(),
            len: 0,
        }
    }

    fn cell_of(&self, x: &[f64]) -> Vec<i64> {
        x.iter().map(|xi| (xi / self.radius).floor() as i64).collect()
    }

    pub fn insert(&mut self, x: &[f64]) {
        debug_assert_eq!(x.len(), self.dim);
        let cell = self.cell_of(x);
        self.cells.entry(cell).or_default().push(x.to_vec());
        self.len += 1;
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// Number of inserted points within closed distance `radius` of `x`.
    pub fn count_neighbours(&self, x: &[f64]) -> usize {
        debug_assert_eq!(x.len(), self.dim);
        let r_sq = self.radius * self.radius;
        let center = self.cell_of(x);
        let mut count = 0;
        let mut offset = vec![-1i64; self.dim];
        loop {
            let cell: Vec<i64> = center.iter().zip(&offset).map(|(c, o)| c + o).collect();
            if let Some(points) = self.cells.get(&cell) {
                count += points.iter().filter(|p| dist_sq(x, p) <= r_sq).count();
            }
            // advance the mixed-radix offset over {-1,0,1}^d
            let mut i = 0;
            loop {
                if i == self.dim {
                    return count;
                }
                offset[i] += 1;
                if offset[i] <= 1 {
                    break;
                }
                offset[i] = -1;
                i += 1;
            }
        }
    }
}

/// Write a point set as CSV, one point per row, header `x1..xd`.
/// Lines starting with `#` carry provenance metadata and are skipped on read.
pub fn write_points_csv<W: Write>(
    mut w: W,
    points: &[Vec<f64>],
    dim: usize,
    metadata: &[String],
) -> Result<(), SpatialError> {
    for line in metadata {
        writeln!(w, "# {line}")?;
    }
    let header: Vec<String> = (1..=dim).map(|i| format!("x{i}")).collect();
    writeln!(w, "{}", header.join(","))?;
    for p in points {
        let row: Vec<String> = p.iter().map(|v| format!("{v:?}")).collect();
        writeln!(w, "{}", row.join(","))?;
    }
    Ok(())
}

/// Read a point set written by [`write_points_csv`] (header row required).
pub fn read_points_csv<R: BufRead>(reader: R) -> Result<Vec<Vec<f64>>, SpatialError> {
    let mut dim = None;
    let mut points = Vec::new();
    for line in reader.lines() {
        let line = line?;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        match dim {
            None => {
                for (i, f) in fields.iter().enumerate() {
                    if *f != format!("x{}", i + 1) {
                        return Err(SpatialError::Csv(format!(
                            "expected header column x{}, got {f:?}",
                            i + 1
                        )));
                    }
                }
                dim = Some(fields.len());
            }
            Some(d) => {
                if fields.len() != d {
                    return Err(SpatialError::Csv(format!(
                        "row has {} fields, expected {d}",
                        fields.len()
                    )));
                }
                let p = fields
                    .iter()
                    .map(|f| f.parse::<f64>().map_err(|e| SpatialError::Csv(e.to_string())))
                    .collect::<Result<Vec<f64>, _>>()?;
                points.push(p);
            }
        }
    }
    Ok(points)
}
