//! Perfect sampling of the hard disks and hard spheres models.
//!
//! The target is a Poisson point process on `[0,1]^d` of intensity
//! `λ / (v_d r^d)` conditioned on every pair of centres being at least `2r`
//! apart. [`engine`] implements partial rejection sampling, which refreshes
//! only the neighbourhood of conflicting points each round and still returns
//! an exact sample. A uniform cell grid ([`grid`]) makes each round cost
//! proportional to the number of conflicts.
//!
//! ```
//! use hard_disks::{prs_sample, ModelParams, RandomStream};
//!
//! let params = ModelParams::new(2, 0.02, 0.15).unwrap();
//! let out = prs_sample(&params, &mut RandomStream::new(42), 1_000_000).unwrap();
//! assert!(hard_disks::bad_pairs(&out.points, 0.02).is_empty());
//! ```

pub mod bounds;
pub mod engine;
pub mod error;
pub mod geometry;
pub mod grid;
pub mod io;
pub mod process;
pub mod stats;
pub mod validation;

pub use bounds::{BoundsReport, JjpDimension};
pub use engine::{
    initialize, prs_iteration_grid, prs_iteration_naive, prs_sample, prs_sample_with, GridEngine, Implementation,
    IterationWork, RunOutcome, RunStats, SamplerConfig, DEFAULT_MAX_ITERATIONS,
};
pub use error::{Error, Result};
pub use geometry::{bad_pairs, bad_points, squared_distance, within_resampling_set, BadPair, Point, PointSet};
pub use grid::{build_grid, candidate_cells, grid_bad_pairs, CellIndex, Grid, GridSpec};
pub use process::{derive_seed, poisson_variate, sample_poisson_in_box, BoxRegion, ModelParams, RandomStream};
