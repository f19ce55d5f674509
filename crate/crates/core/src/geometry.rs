//! Points in the unit cube and the bad-pair structure that drives resampling.
//!
//! Every "closer than 2r" test is done on squared distances against `4r²`,
//! with strict inequality, so a pair at exactly `2r` is not bad.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const MAX_DIM: usize = 8;

pub(crate) fn check_dim(dim: usize) -> Result<()> {
    if (1..=MAX_DIM).contains(&dim) {
        Ok(())
    } else {
        Err(Error::UnsupportedDimension(dim))
    }
}

fn check_coord(c: f64) -> Result<()> {
    if (0.0..=1.0).contains(&c) {
        Ok(())
    } else {
        Err(Error::CoordinateOutOfRange(c))
    }
}

/// A single point of `[0,1]^d`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Point(Vec<f64>);

impl Point {
    pub fn new(coords: Vec<f64>) -> Result<Self> {
        check_dim(coords.len())?;
        coords.iter().copied().try_for_each(check_coord)?;
        Ok(Point(coords))
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn coords(&self) -> &[f64] {
        &self.0
    }
}

impl AsRef<[f64]> for Point {
    fn as_ref(&self) -> &[f64] {
        &self.0
    }
}

/// An ordered collection of points sharing one dimension, stored flat.
///
/// The order carries no meaning for the model; it is kept stable so that
/// runs can be replayed and compared bit for bit.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PointSet {
    dim: usize,
    coords: Vec<f64>,
}

impl PointSet {
    pub fn new(dim: usize) -> Result<Self> {
        check_dim(dim)?;
        Ok(PointSet {
            dim,
            coords: Vec::new(),
        })
    }

    pub fn from_points<I, P>(dim: usize, points: I) -> Result<Self>
    where
        I: IntoIterator<Item = P>,
        P: AsRef<[f64]>,
    {
        let mut set = PointSet::new(dim)?;
        for p in points {
            set.push(p.as_ref())?;
        }
        Ok(set)
    }

    /// Builds a set from a flat coordinate buffer already known to be valid.
    pub(crate) fn from_flat_unchecked(dim: usize, coords: Vec<f64>) -> Self {
        debug_assert_eq!(coords.len() % dim, 0);
        PointSet { dim, coords }
    }

    pub fn push(&mut self, point: &[f64]) -> Result<()> {
        if point.len() != self.dim {
            return Err(Error::DimensionMismatch {
                left: self.dim,
                right: point.len(),
            });
        }
        point.iter().copied().try_for_each(check_coord)?;
        self.coords.extend_from_slice(point);
        Ok(())
    }

    pub(crate) fn push_unchecked(&mut self, point: &[f64]) {
        self.coords.extend_from_slice(point);
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.coords.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.coords[i * self.dim..(i + 1) * self.dim]
    }

    pub fn iter(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        self.coords.chunks_exact(self.dim)
    }

    /// Coordinates in point-major, axis-minor order.
    pub fn as_flat(&self) -> &[f64] {
        &self.coords
    }

    /// Points whose index is not flagged in `removed`, in their original order.
    pub(crate) fn without(&self, removed: &[bool]) -> PointSet {
        let mut out = Vec::with_capacity(self.coords.len());
        for (p, &gone) in self.iter().zip(removed) {
            if !gone {
                out.extend_from_slice(p);
            }
        }
        PointSet::from_flat_unchecked(self.dim, out)
    }

    /// Bit-level equality of every coordinate, order included.
    pub fn bit_identical(&self, other: &PointSet) -> bool {
        self.dim == other.dim
            && self.coords.len() == other.coords.len()
            && self
                .coords
                .iter()
                .zip(&other.coords)
                .all(|(a, b)| a.to_bits() == b.to_bits())
    }
}

/// An unordered pair of indices `i < j` closer than `2r`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct BadPair {
    pub i: usize,
    pub j: usize,
}

impl BadPair {
    pub fn new(a: usize, b: usize) -> Self {
        debug_assert_ne!(a, b);
        BadPair {
            i: a.min(b),
            j: a.max(b),
        }
    }
}

#[inline]
pub(crate) fn sq_dist(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum()
}

pub fn squared_distance(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::DimensionMismatch {
            left: x.len(),
            right: y.len(),
        });
    }
    Ok(sq_dist(x, y))
}

/// `4r²`, the squared exclusion diameter.
#[inline]
pub(crate) fn exclusion_sq(radius: f64) -> f64 {
    4.0 * radius * radius
}

/// All bad pairs by exhaustive scan, sorted by `(i, j)`.
pub fn bad_pairs(points: &PointSet, radius: f64) -> Vec<BadPair> {
    let limit = exclusion_sq(radius);
    let n = points.len();
    let mut pairs = Vec::new();
    for i in 0..n {
        let x = points.point(i);
        for j in i + 1..n {
            if sq_dist(x, points.point(j)) < limit {
                pairs.push(BadPair { i, j });
            }
        }
    }
    pairs
}

/// Sorted, deduplicated endpoints of `pairs`.
pub fn endpoints(pairs: &[BadPair]) -> Vec<usize> {
    let mut idx: Vec<usize> = pairs.iter().flat_map(|p| [p.i, p.j]).collect();
    idx.sort_unstable();
    idx.dedup();
    idx
}

pub fn bad_points(points: &PointSet, radius: f64) -> Vec<usize> {
    endpoints(&bad_pairs(points, radius))
}

/// Membership of `x` in the open Minkowski sum of `centres` with a ball of radius `2r`.
pub fn within_resampling_set<'a, I>(x: &[f64], centres: I, radius: f64) -> bool
where
    I: IntoIterator<Item = &'a [f64]>,
{
    let limit = exclusion_sq(radius);
    centres.into_iter().any(|b| sq_dist(x, b) < limit)
}
