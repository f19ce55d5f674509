//! Partial rejection sampling.
//!
//! Each iteration removes the bad points `B`, then refreshes the open set
//! `S = B + D_{2r}(0)` with a new Poisson realisation: candidate cells (all
//! cells within the resampling reach of a cell holding a bad point) are
//! visited in lexicographic order, each gets one Poisson count followed by
//! its coordinates, and a fresh point is kept only if it lies within `2r` of
//! some point of `B`. Both implementations below consume the random stream in
//! exactly this order, so for a given seed they agree bit for bit.
//!
//! The naive path rescans all pairs every iteration. The grid path keeps an
//! incremental cell index and only examines pairs touching a fresh point:
//! survivors were pairwise good before the iteration and stay so.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{bad_pairs, endpoints, exclusion_sq, sq_dist, PointSet, MAX_DIM};
use crate::grid::{grid_bad_pairs, Grid, GridSpec};
use crate::process::{poisson_unchecked, push_uniform_points, ModelParams, RandomStream};

pub const DEFAULT_MAX_ITERATIONS: usize = 1_000_000;

/// Work done by one iteration.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct IterationWork {
    /// Points removed (`|B|`).
    pub removed: usize,
    pub candidate_cells: usize,
    /// Fresh points generated in candidate cells, kept or not.
    pub generated: usize,
    /// Fresh points that landed in `S` and were kept.
    pub accepted: usize,
}

/// Trace of a single run.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RunStats {
    /// Number of loop iterations `T`.
    pub iterations: usize,
    /// Bad-pair counts `Z_0, …, Z_T`.
    pub bad_pair_trace: Vec<usize>,
    pub work: Vec<IterationWork>,
    pub initial_count: usize,
    pub final_count: usize,
    pub wall_time_s: f64,
}

impl RunStats {
    pub fn total_generated(&self) -> usize {
        self.work.iter().map(|w| w.generated).sum()
    }

    pub fn total_accepted(&self) -> usize {
        self.work.iter().map(|w| w.accepted).sum()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunOutcome {
    pub points: PointSet,
    pub stats: RunStats,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Implementation {
    Naive,
    #[default]
    Grid,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SamplerConfig {
    pub max_iterations: usize,
    pub implementation: Implementation,
    /// Grid path only: after every iteration, recompute all bad pairs from
    /// scratch and assert they match the incremental bookkeeping.
    pub verify: bool,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        SamplerConfig {
            max_iterations: DEFAULT_MAX_ITERATIONS,
            implementation: Implementation::Grid,
            verify: false,
        }
    }
}

/// Expected number of Poisson points in one grid cell.
fn cell_mean(params: &ModelParams, spec: &GridSpec) -> f64 {
    params.intensity() * spec.side().powi(params.dim() as i32)
}

/// Draws a fresh realisation in each candidate cell and appends the points
/// passing `accept` to `out`. Returns the number generated.
fn resample_cells(
    spec: &GridSpec,
    candidates: &[usize],
    mean: f64,
    rng: &mut RandomStream,
    mut accept: impl FnMut(&[f64]) -> bool,
    out: &mut Vec<f64>,
) -> usize {
    let dim = spec.dim();
    let mut lo = [0.0; MAX_DIM];
    let mut hi = [0.0; MAX_DIM];
    let mut scratch = Vec::new();
    let mut generated = 0;
    for &cell in candidates {
        let count = poisson_unchecked(rng, mean);
        if count == 0 {
            continue;
        }
        spec.cell_bounds(cell, &mut lo[..dim], &mut hi[..dim]);
        scratch.clear();
        push_uniform_points(rng, count, &lo[..dim], &hi[..dim], &mut scratch);
        generated += count as usize;
        for x in scratch.chunks_exact(dim) {
            if accept(x) {
                out.extend_from_slice(x);
            }
        }
    }
    generated
}

/// Poisson realisation on the unit cube, drawn cell by cell in lexicographic
/// order, with the grid built alongside.
pub fn initialize(params: &ModelParams, rng: &mut RandomStream) -> Result<(PointSet, Grid)> {
    let spec = GridSpec::new(params)?;
    let dim = spec.dim();
    let mean = cell_mean(params, &spec);
    let mut grid = Grid::empty(spec);
    let mut coords = Vec::with_capacity((params.intensity() * 1.1) as usize * dim + 16);
    let mut lo = [0.0; MAX_DIM];
    let mut hi = [0.0; MAX_DIM];
    for cell in 0..spec.cell_count() {
        let count = poisson_unchecked(rng, mean);
        if count == 0 {
            continue;
        }
        spec.cell_bounds(cell, &mut lo[..dim], &mut hi[..dim]);
        let first = coords.len() / dim;
        push_uniform_points(rng, count, &lo[..dim], &hi[..dim], &mut coords);
        for i in first..coords.len() / dim {
            grid.insert(spec.cell_of(&coords[i * dim..(i + 1) * dim]), i);
        }
    }
    Ok((PointSet::from_flat_unchecked(dim, coords), grid))
}

fn naive_step(
    points: &PointSet,
    bad: &[usize],
    params: &ModelParams,
    spec: &GridSpec,
    rng: &mut RandomStream,
) -> (PointSet, IterationWork) {
    let limit = exclusion_sq(params.radius());
    let mut bad_cells: Vec<usize> = bad.iter().map(|&b| spec.cell_of(points.point(b))).collect();
    bad_cells.sort_unstable();
    bad_cells.dedup();
    let candidates = spec.neighborhood_union(&bad_cells, spec.resample_reach());

    let mut fresh = Vec::new();
    let generated = resample_cells(
        spec,
        &candidates,
        cell_mean(params, spec),
        rng,
        |x| bad.iter().any(|&b| sq_dist(x, points.point(b)) < limit),
        &mut fresh,
    );

    let mut removed = vec![false; points.len()];
    for &b in bad {
        removed[b] = true;
    }
    let mut next = points.without(&removed);
    for x in fresh.chunks_exact(points.dim()) {
        next.push_unchecked(x);
    }
    let work = IterationWork {
        removed: bad.len(),
        candidate_cells: candidates.len(),
        generated,
        accepted: fresh.len() / points.dim(),
    };
    (next, work)
}

/// One loop iteration by the reference path: all-pairs bad-point detection,
/// removal of `B`, and resampling of `S`.
pub fn prs_iteration_naive(points: &PointSet, params: &ModelParams, rng: &mut RandomStream) -> Result<PointSet> {
    check_dims(points, params)?;
    let bad = endpoints(&bad_pairs(points, params.radius()));
    if bad.is_empty() {
        return Err(Error::Precondition("no bad points to resample"));
    }
    let spec = GridSpec::new(params)?;
    Ok(naive_step(points, &bad, params, &spec, rng).0)
}

/// One loop iteration by the grid path. `grid` must index `points`.
pub fn prs_iteration_grid(
    points: &PointSet,
    grid: &Grid,
    params: &ModelParams,
    rng: &mut RandomStream,
) -> Result<(PointSet, Grid)> {
    let mut engine = GridEngine::from_parts(points.clone(), grid.clone(), params)?;
    engine.step(rng)?;
    Ok(engine.snapshot())
}

fn check_dims(points: &PointSet, params: &ModelParams) -> Result<()> {
    if points.dim() != params.dim() {
        return Err(Error::DimensionMismatch {
            left: params.dim(),
            right: points.dim(),
        });
    }
    Ok(())
}

/// Incremental grid-accelerated state of a run.
///
/// Points live in append-only slots; removed slots are tombstoned, so the
/// live slots in slot order are exactly "survivors in their old order, then
/// fresh points in generation order", the same order the naive path builds.
#[derive(Clone, Debug)]
pub struct GridEngine {
    params: ModelParams,
    spec: GridSpec,
    limit: f64,
    mean: f64,
    coords: Vec<f64>,
    alive: Vec<bool>,
    live: usize,
    grid: Grid,
    is_bad: Vec<bool>,
    bad: Vec<usize>,
    bad_pair_count: usize,
}

impl GridEngine {
    /// Takes over a point set and its grid, computing the current bad pairs.
    pub fn from_parts(points: PointSet, grid: Grid, params: &ModelParams) -> Result<Self> {
        check_dims(&points, params)?;
        let spec = GridSpec::new(params)?;
        if *grid.spec() != spec || grid.occupancy() != points.len() {
            return Err(Error::Precondition("grid is inconsistent with the point set"));
        }
        for (i, p) in points.iter().enumerate() {
            if !grid.cell(spec.cell_of(p)).contains(&i) {
                return Err(Error::Precondition("grid is inconsistent with the point set"));
            }
        }
        Ok(Self::from_parts_unchecked(points, grid, params, spec))
    }

    fn from_parts_unchecked(points: PointSet, grid: Grid, params: &ModelParams, spec: GridSpec) -> Self {
        let pairs = grid_bad_pairs(&grid, &points, params.radius());
        let bad = endpoints(&pairs);
        let n = points.len();
        let mut is_bad = vec![false; n];
        for &b in &bad {
            is_bad[b] = true;
        }
        GridEngine {
            params: *params,
            spec,
            limit: exclusion_sq(params.radius()),
            mean: cell_mean(params, &spec),
            coords: points.as_flat().to_vec(),
            alive: vec![true; n],
            live: n,
            grid,
            is_bad,
            bad,
            bad_pair_count: pairs.len(),
        }
    }

    pub fn bad_pair_count(&self) -> usize {
        self.bad_pair_count
    }

    pub fn len(&self) -> usize {
        self.live
    }

    pub fn is_empty(&self) -> bool {
        self.live == 0
    }

    #[inline]
    fn slot(&self, i: usize) -> &[f64] {
        let d = self.spec.dim();
        &self.coords[i * d..(i + 1) * d]
    }

    /// Runs one iteration of the loop.
    pub fn step(&mut self, rng: &mut RandomStream) -> Result<IterationWork> {
        if self.bad.is_empty() {
            return Err(Error::Precondition("no bad points to resample"));
        }
        let spec = self.spec;
        let dim = spec.dim();
        let reach = spec.bad_pair_reach();

        let mut bad_cells: Vec<usize> = self.bad.iter().map(|&b| spec.cell_of(self.slot(b))).collect();
        bad_cells.sort_unstable();
        bad_cells.dedup();
        let candidates = spec.neighborhood_union(&bad_cells, spec.resample_reach());

        let mut fresh = Vec::new();
        let generated = {
            let this = &*self;
            resample_cells(
                &spec,
                &candidates,
                this.mean,
                rng,
                |x| {
                    spec.any_neighbor(spec.cell_of(x), reach, |cell| {
                        this.grid
                            .cell(cell)
                            .iter()
                            .any(|&q| this.is_bad[q] && sq_dist(x, this.slot(q)) < this.limit)
                    })
                },
                &mut fresh,
            )
        };

        let removed = self.bad.len();
        for b in std::mem::take(&mut self.bad) {
            let cell = spec.cell_of(self.slot(b));
            let found = self.grid.remove(cell, b);
            debug_assert!(found);
            self.alive[b] = false;
            self.is_bad[b] = false;
        }
        self.live -= removed;

        let first_fresh = self.alive.len();
        for x in fresh.chunks_exact(dim) {
            let slot = self.alive.len();
            self.coords.extend_from_slice(x);
            self.alive.push(true);
            self.is_bad.push(false);
            self.grid.insert(spec.cell_of(x), slot);
        }
        let accepted = self.alive.len() - first_fresh;
        self.live += accepted;

        // New bad pairs all involve a fresh point; a fresh-fresh pair is
        // counted from its lower slot only.
        let mut count = 0;
        let mut bad = Vec::new();
        for f in first_fresh..self.alive.len() {
            let x = self.slot(f);
            spec.for_each_neighbor(spec.cell_of(x), reach, |cell| {
                for &q in self.grid.cell(cell) {
                    if q == f || (q >= first_fresh && q < f) {
                        continue;
                    }
                    if sq_dist(x, self.slot(q)) < self.limit {
                        count += 1;
                        bad.push(f);
                        bad.push(q);
                    }
                }
            });
        }
        bad.sort_unstable();
        bad.dedup();
        for &b in &bad {
            self.is_bad[b] = true;
        }
        self.bad = bad;
        self.bad_pair_count = count;

        Ok(IterationWork {
            removed,
            candidate_cells: candidates.len(),
            generated,
            accepted,
        })
    }

    /// Live points in slot order.
    pub fn points(&self) -> PointSet {
        let d = self.spec.dim();
        let mut out = Vec::with_capacity(self.live * d);
        for (i, _) in self.alive.iter().enumerate().filter(|(_, &a)| a) {
            out.extend_from_slice(self.slot(i));
        }
        PointSet::from_flat_unchecked(d, out)
    }

    /// Compacted point set with a grid re-indexed to match it.
    pub fn snapshot(&self) -> (PointSet, Grid) {
        let mut new_index = vec![usize::MAX; self.alive.len()];
        let mut next = 0;
        for (slot, &a) in self.alive.iter().enumerate() {
            if a {
                new_index[slot] = next;
                next += 1;
            }
        }
        let mut grid = Grid::empty(self.spec);
        for cell in 0..self.spec.cell_count() {
            for &slot in self.grid.cell(cell) {
                grid.insert(cell, new_index[slot]);
            }
        }
        (self.points(), grid)
    }

    /// Recomputes every bad pair from scratch and panics if the incremental
    /// state disagrees.
    pub fn verify(&self) {
        let slots: Vec<usize> = (0..self.alive.len()).filter(|&i| self.alive[i]).collect();
        let (points, grid) = self.snapshot();
        let pairs = grid_bad_pairs(&grid, &points, self.params.radius());
        let expected: Vec<usize> = endpoints(&pairs).into_iter().map(|i| slots[i]).collect();
        assert_eq!(pairs.len(), self.bad_pair_count, "bad pair count drifted");
        assert_eq!(expected, self.bad, "bad point set drifted");
    }
}

/// Samples the hard-core model with the grid path and default settings
/// apart from the iteration cap.
pub fn prs_sample(params: &ModelParams, rng: &mut RandomStream, max_iterations: usize) -> Result<RunOutcome> {
    prs_sample_with(
        params,
        rng,
        &SamplerConfig {
            max_iterations,
            ..SamplerConfig::default()
        },
    )
}

pub fn prs_sample_with(params: &ModelParams, rng: &mut RandomStream, config: &SamplerConfig) -> Result<RunOutcome> {
    if config.max_iterations == 0 {
        return Err(Error::invalid("max_iterations", "must be at least 1"));
    }
    let start = Instant::now();
    let (points, grid) = initialize(params, rng)?;
    let mut stats = RunStats {
        initial_count: points.len(),
        ..RunStats::default()
    };
    let points = match config.implementation {
        Implementation::Grid => run_grid(points, grid, params, rng, config, &mut stats, start)?,
        Implementation::Naive => {
            drop(grid);
            run_naive(points, params, rng, config, &mut stats, start)?
        }
    };

    let spec = GridSpec::new(params)?;
    let mut check = Grid::empty(spec);
    for (i, p) in points.iter().enumerate() {
        check.insert(spec.cell_of(p), i);
    }
    assert!(
        grid_bad_pairs(&check, &points, params.radius()).is_empty(),
        "sampler returned overlapping disks"
    );

    stats.final_count = points.len();
    stats.wall_time_s = start.elapsed().as_secs_f64();
    Ok(RunOutcome { points, stats })
}

fn cap_exceeded(mut stats: RunStats, final_count: usize, start: Instant) -> Error {
    stats.final_count = final_count;
    stats.wall_time_s = start.elapsed().as_secs_f64();
    Error::IterationCapExceeded { stats: Box::new(stats) }
}

fn run_grid(
    points: PointSet,
    grid: Grid,
    params: &ModelParams,
    rng: &mut RandomStream,
    config: &SamplerConfig,
    stats: &mut RunStats,
    start: Instant,
) -> Result<PointSet> {
    let spec = *grid.spec();
    let mut engine = GridEngine::from_parts_unchecked(points, grid, params, spec);
    stats.bad_pair_trace.push(engine.bad_pair_count());
    while engine.bad_pair_count() > 0 {
        if stats.iterations >= config.max_iterations {
            return Err(cap_exceeded(std::mem::take(stats), engine.len(), start));
        }
        let work = engine.step(rng)?;
        if config.verify {
            engine.verify();
        }
        stats.iterations += 1;
        stats.work.push(work);
        stats.bad_pair_trace.push(engine.bad_pair_count());
    }
    Ok(engine.points())
}

fn run_naive(
    mut points: PointSet,
    params: &ModelParams,
    rng: &mut RandomStream,
    config: &SamplerConfig,
    stats: &mut RunStats,
    start: Instant,
) -> Result<PointSet> {
    let spec = GridSpec::new(params)?;
    let mut pairs = bad_pairs(&points, params.radius());
    stats.bad_pair_trace.push(pairs.len());
    while !pairs.is_empty() {
        if stats.iterations >= config.max_iterations {
            return Err(cap_exceeded(std::mem::take(stats), points.len(), start));
        }
        let bad = endpoints(&pairs);
        let (next, work) = naive_step(&points, &bad, params, &spec, rng);
        points = next;
        pairs = bad_pairs(&points, params.radius());
        stats.iterations += 1;
        stats.work.push(work);
        stats.bad_pair_trace.push(pairs.len());
    }
    Ok(points)
}
