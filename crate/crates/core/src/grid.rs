//! Uniform cell decomposition of the unit cube.
//!
//! The cube is cut into `n^d` cells of side `s = 1/n` with `n = floor(1/r)`,
//! so `s ≥ r` and any two points closer than `2r` lie in cells at Chebyshev
//! distance at most `ceil(2r/s) ≤ 2`. Cells are addressed by a linear id in
//! which the first axis is most significant; increasing id is lexicographic
//! order of the cell index.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{exclusion_sq, sq_dist, BadPair, PointSet, MAX_DIM};
use crate::process::ModelParams;

/// Refuse to allocate more cells than this.
pub const MAX_CELLS: usize = 1 << 25;

/// A cell index, one integer per axis in `[0, n)`.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct CellIndex(pub Vec<usize>);

/// Shape of the grid: everything except occupancy.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GridSpec {
    dim: usize,
    n: usize,
    side: f64,
    d_bad: usize,
    d_res: usize,
    cell_count: usize,
}

impl GridSpec {
    pub fn new(params: &ModelParams) -> Result<Self> {
        let dim = params.dim();
        let r = params.radius();
        let mut n = (1.0 / r).floor() as usize;
        // Guard against 1/r rounding up past an integer.
        while n > 1 && n as f64 * r > 1.0 {
            n -= 1;
        }
        let n = n.max(1);
        let cell_count = n
            .checked_pow(dim as u32)
            .filter(|&c| c <= MAX_CELLS)
            .ok_or(Error::GridTooLarge { cells_per_axis: n, dim })?;
        let reach = (2.0 * r * n as f64).ceil() as usize;
        Ok(GridSpec {
            dim,
            n,
            side: 1.0 / n as f64,
            d_bad: reach,
            d_res: reach,
            cell_count,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Cells per axis.
    pub fn cells_per_axis(&self) -> usize {
        self.n
    }

    pub fn side(&self) -> f64 {
        self.side
    }

    /// Chebyshev cell radius searched for bad pairs.
    pub fn bad_pair_reach(&self) -> usize {
        self.d_bad
    }

    /// Chebyshev cell radius of the resampling candidates around a bad cell.
    pub fn resample_reach(&self) -> usize {
        self.d_res
    }

    pub fn cell_count(&self) -> usize {
        self.cell_count
    }

    #[inline]
    fn axis_cell(&self, c: f64) -> usize {
        ((c * self.n as f64).floor() as usize).min(self.n - 1)
    }

    /// Linear id of the cell containing `x`.
    #[inline]
    pub fn cell_of(&self, x: &[f64]) -> usize {
        x.iter().fold(0, |acc, &c| acc * self.n + self.axis_cell(c))
    }

    pub fn index_of(&self, x: &[f64]) -> CellIndex {
        CellIndex(x.iter().map(|&c| self.axis_cell(c)).collect())
    }

    pub fn linear(&self, cell: &CellIndex) -> usize {
        cell.0.iter().fold(0, |acc, &c| acc * self.n + c)
    }

    pub fn unlinear(&self, mut id: usize) -> CellIndex {
        let mut idx = vec![0; self.dim];
        for k in (0..self.dim).rev() {
            idx[k] = id % self.n;
            id /= self.n;
        }
        CellIndex(idx)
    }

    fn is_valid(&self, cell: &CellIndex) -> bool {
        cell.0.len() == self.dim && cell.0.iter().all(|&c| c < self.n)
    }

    /// Writes the bounds of cell `id` into `lo` and `hi`.
    pub(crate) fn cell_bounds(&self, mut id: usize, lo: &mut [f64], hi: &mut [f64]) {
        let n = self.n as f64;
        for k in (0..self.dim).rev() {
            let c = (id % self.n) as f64;
            id /= self.n;
            lo[k] = c / n;
            hi[k] = (c + 1.0) / n;
        }
    }

    /// Calls `f` on every cell within Chebyshev distance `reach` of `id`,
    /// clipped at the cube boundary, in increasing id order.
    pub(crate) fn for_each_neighbor(&self, id: usize, reach: usize, mut f: impl FnMut(usize)) {
        self.any_neighbor(id, reach, |j| {
            f(j);
            false
        });
    }

    /// Like [`Self::for_each_neighbor`] but stops at the first cell for which
    /// `f` returns true, and reports whether that happened.
    pub(crate) fn any_neighbor(&self, id: usize, reach: usize, mut f: impl FnMut(usize) -> bool) -> bool {
        let dim = self.dim;
        let mut lo = [0usize; MAX_DIM];
        let mut hi = [0usize; MAX_DIM];
        let mut rest = id;
        for k in (0..dim).rev() {
            let c = rest % self.n;
            rest /= self.n;
            lo[k] = c.saturating_sub(reach);
            hi[k] = (c + reach).min(self.n - 1);
        }
        let mut cur = lo;
        loop {
            if f(cur[..dim].iter().fold(0, |acc, &c| acc * self.n + c)) {
                return true;
            }
            let mut k = dim;
            loop {
                if k == 0 {
                    return false;
                }
                k -= 1;
                if cur[k] < hi[k] {
                    cur[k] += 1;
                    break;
                }
                cur[k] = lo[k];
            }
        }
    }

    /// Sorted, deduplicated union of the `reach`-neighbourhoods of `cells`.
    pub(crate) fn neighborhood_union(&self, cells: &[usize], reach: usize) -> Vec<usize> {
        let mut out = Vec::with_capacity(cells.len() * (2 * reach + 1).pow(self.dim as u32));
        for &c in cells {
            self.for_each_neighbor(c, reach, |j| out.push(j));
        }
        out.sort_unstable();
        out.dedup();
        out
    }
}

/// Cell occupancy lists over a [`GridSpec`].
#[derive(Clone, Debug, PartialEq)]
pub struct Grid {
    spec: GridSpec,
    cells: Vec<Vec<usize>>,
}

impl Grid {
    pub fn empty(spec: GridSpec) -> Self {
        Grid {
            spec,
            cells: vec![Vec::new(); spec.cell_count],
        }
    }

    pub fn spec(&self) -> &GridSpec {
        &self.spec
    }

    pub fn cell(&self, id: usize) -> &[usize] {
        &self.cells[id]
    }

    pub fn occupants(&self, cell: &CellIndex) -> &[usize] {
        &self.cells[self.spec.linear(cell)]
    }

    pub(crate) fn insert(&mut self, cell: usize, point: usize) {
        self.cells[cell].push(point);
    }

    /// Removes `point` from `cell`. Order within a cell is not preserved.
    pub(crate) fn remove(&mut self, cell: usize, point: usize) -> bool {
        let occupants = &mut self.cells[cell];
        match occupants.iter().position(|&p| p == point) {
            Some(pos) => {
                occupants.swap_remove(pos);
                true
            }
            None => false,
        }
    }

    /// Total number of indices stored across all cells.
    pub fn occupancy(&self) -> usize {
        self.cells.iter().map(Vec::len).sum()
    }

    /// Equal shape and equal occupant sets per cell, ignoring order within a cell.
    pub fn same_partition(&self, other: &Grid) -> bool {
        self.spec == other.spec
            && self.cells.iter().zip(&other.cells).all(|(a, b)| {
                let (mut a, mut b) = (a.clone(), b.clone());
                a.sort_unstable();
                b.sort_unstable();
                a == b
            })
    }

    /// Every valid cell within Chebyshev distance `reach` of `cell`, in
    /// lexicographic order, `cell` included.
    pub fn neighbor_cells(&self, cell: &CellIndex, reach: usize) -> Result<Vec<CellIndex>> {
        if !self.spec.is_valid(cell) {
            return Err(Error::invalid("cell", format!("{:?} outside the grid", cell.0)));
        }
        let mut out = Vec::new();
        self.spec
            .for_each_neighbor(self.spec.linear(cell), reach, |j| out.push(self.spec.unlinear(j)));
        Ok(out)
    }
}

/// Assigns every point of `points` to the cell containing it.
pub fn build_grid(points: &PointSet, params: &ModelParams) -> Result<Grid> {
    let spec = GridSpec::new(params)?;
    if points.dim() != spec.dim {
        return Err(Error::DimensionMismatch {
            left: spec.dim,
            right: points.dim(),
        });
    }
    let mut grid = Grid::empty(spec);
    for (i, p) in points.iter().enumerate() {
        grid.insert(spec.cell_of(p), i);
    }
    Ok(grid)
}

/// Bad pairs found by scanning cell pairs within the bad-pair reach, sorted.
pub fn grid_bad_pairs(grid: &Grid, points: &PointSet, radius: f64) -> Vec<BadPair> {
    let spec = grid.spec;
    let limit = exclusion_sq(radius);
    let mut pairs = Vec::new();
    for (c, occupants) in grid.cells.iter().enumerate() {
        if occupants.is_empty() {
            continue;
        }
        for (a, &i) in occupants.iter().enumerate() {
            let x = points.point(i);
            for &j in &occupants[a + 1..] {
                if sq_dist(x, points.point(j)) < limit {
                    pairs.push(BadPair::new(i, j));
                }
            }
        }
        spec.for_each_neighbor(c, spec.d_bad, |other| {
            if other <= c {
                return;
            }
            for &i in occupants {
                let x = points.point(i);
                for &j in &grid.cells[other] {
                    if sq_dist(x, points.point(j)) < limit {
                        pairs.push(BadPair::new(i, j));
                    }
                }
            }
        });
    }
    pairs.sort_unstable();
    pairs
}

/// Union of the resampling neighbourhoods of `bad_cells`, lexicographic.
pub fn candidate_cells(grid: &Grid, bad_cells: &[CellIndex]) -> Result<Vec<CellIndex>> {
    let spec = grid.spec;
    let mut ids = Vec::with_capacity(bad_cells.len());
    for c in bad_cells {
        if !spec.is_valid(c) {
            return Err(Error::invalid("cell", format!("{:?} outside the grid", c.0)));
        }
        ids.push(spec.linear(c));
    }
    Ok(spec
        .neighborhood_union(&ids, spec.d_res)
        .into_iter()
        .map(|j| spec.unlinear(j))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(dim: usize, r: f64) -> ModelParams {
        ModelParams::new(dim, r, 0.1).unwrap()
    }

    #[test]
    fn empty_set_gives_empty_cells() {
        let g = build_grid(&PointSet::new(2).unwrap(), &params(2, 0.1)).unwrap();
        assert_eq!(g.occupancy(), 0);
        assert_eq!(g.spec().cell_count(), 100);
    }

    #[test]
    fn floor_assignment() {
        let p = PointSet::from_points(2, [[0.3, 0.9], [1.0, 1.0], [0.0, 0.0]]).unwrap();
        let g = build_grid(&p, &params(2, 0.25)).unwrap();
        assert_eq!(g.spec().cells_per_axis(), 4);
        assert_eq!(g.occupants(&CellIndex(vec![1, 3])), &[0]);
        assert_eq!(g.occupants(&CellIndex(vec![3, 3])), &[1]);
        assert_eq!(g.occupants(&CellIndex(vec![0, 0])), &[2]);
    }

    #[test]
    fn reach_for_r_point_three() {
        let spec = GridSpec::new(&params(2, 0.3)).unwrap();
        assert_eq!(spec.cells_per_axis(), 3);
        assert!(spec.side() > 0.3);
        assert_eq!(spec.bad_pair_reach(), (0.6f64 * 3.0).ceil() as usize);
        assert_eq!(spec.bad_pair_reach(), 2);
    }

    #[test]
    fn side_never_below_radius() {
        for denom in [3.0, 7.0, 10.0, 64.0, 100.0, 200.0, 512.0, 1000.0] {
            let r = 1.0 / denom;
            let spec = GridSpec::new(&params(2, r)).unwrap();
            assert!(spec.side() >= r, "r = {r}");
            assert!(spec.bad_pair_reach() <= 2);
        }
    }

    #[test]
    fn neighbour_counts() {
        let g = Grid::empty(GridSpec::new(&params(2, 0.1)).unwrap());
        assert_eq!(g.neighbor_cells(&CellIndex(vec![5, 5]), 2).unwrap().len(), 25);
        assert_eq!(g.neighbor_cells(&CellIndex(vec![0, 0]), 2).unwrap().len(), 9);
        assert_eq!(
            g.neighbor_cells(&CellIndex(vec![4, 7]), 0).unwrap(),
            vec![CellIndex(vec![4, 7])]
        );
        let ns = g.neighbor_cells(&CellIndex(vec![9, 0]), 1).unwrap();
        assert!(ns.windows(2).all(|w| w[0] < w[1]));
        assert!(g.neighbor_cells(&CellIndex(vec![10, 0]), 1).is_err());
    }

    #[test]
    fn candidate_examples() {
        let g = Grid::empty(GridSpec::new(&params(2, 0.1)).unwrap());
        assert!(candidate_cells(&g, &[]).unwrap().is_empty());
        assert_eq!(candidate_cells(&g, &[CellIndex(vec![5, 5])]).unwrap().len(), 25);
        let two = candidate_cells(&g, &[CellIndex(vec![5, 5]), CellIndex(vec![5, 6])]).unwrap();
        assert!(two.len() < 50);
        assert_eq!(two.len(), 30);
        assert!(two.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn same_cell_pair_is_bad() {
        let r = 0.05;
        let p = PointSet::from_points(2, [[0.501, 0.501], [0.549, 0.549]]).unwrap();
        let g = build_grid(&p, &params(2, r)).unwrap();
        let spec = g.spec();
        assert_eq!(spec.cell_of(p.point(0)), spec.cell_of(p.point(1)));
        assert_eq!(grid_bad_pairs(&g, &p, r), vec![BadPair::new(0, 1)]);
    }

    #[test]
    fn one_dimensional_and_high_dimensional_grids() {
        let g1 = GridSpec::new(&params(1, 0.01)).unwrap();
        assert_eq!(g1.cell_count(), 100);
        let g8 = GridSpec::new(&params(8, 0.2)).unwrap();
        assert_eq!(g8.cell_count(), 5usize.pow(8));
        assert!(matches!(
            GridSpec::new(&params(8, 0.01)),
            Err(Error::GridTooLarge { .. })
        ));
    }

    #[test]
    fn linear_roundtrip() {
        let spec = GridSpec::new(&params(3, 0.1)).unwrap();
        for id in [0, 1, 99, 500, 999] {
            assert_eq!(spec.linear(&spec.unlinear(id)), id);
        }
    }
}
