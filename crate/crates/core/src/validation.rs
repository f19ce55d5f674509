//! Classical rejection as an independent oracle, density estimation, and the
//! scaling and equivalence experiments built on them.

use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bounds::unit_ball_volume;
use crate::engine::{initialize, prs_sample, RunOutcome, RunStats};
use crate::error::{Error, Result};
use crate::geometry::{endpoints, sq_dist, PointSet};
use crate::grid::{grid_bad_pairs, Grid, GridSpec};
use crate::process::{derive_seed, ModelParams, RandomStream};
use crate::stats::{chi_square_two_sample, ks_two_sample, Histogram, TestStatistic};

/// Redraws the whole configuration until it has no bad pair.
///
/// `stats.iterations` counts rejected attempts and `bad_pair_trace` holds the
/// bad-pair count of every attempt, ending in 0.
pub fn classical_rejection(params: &ModelParams, rng: &mut RandomStream, max_attempts: usize) -> Result<RunOutcome> {
    if max_attempts == 0 {
        return Err(Error::invalid("max_attempts", "must be at least 1"));
    }
    let start = Instant::now();
    let mut trace = Vec::new();
    for _ in 0..max_attempts {
        let (points, grid) = initialize(params, rng)?;
        let z = grid_bad_pairs(&grid, &points, params.radius()).len();
        trace.push(z);
        if z == 0 {
            let stats = RunStats {
                iterations: trace.len() - 1,
                bad_pair_trace: trace,
                work: Vec::new(),
                initial_count: points.len(),
                final_count: points.len(),
                wall_time_s: start.elapsed().as_secs_f64(),
            };
            return Ok(RunOutcome { points, stats });
        }
    }
    Err(Error::AttemptCapExceeded { attempts: max_attempts })
}

/// Deliberately broken sampler for mutation controls: draws the initial
/// configuration, deletes its bad points, and never resamples.
pub fn skip_resample_sample(params: &ModelParams, rng: &mut RandomStream) -> Result<PointSet> {
    let (points, grid) = initialize(params, rng)?;
    let mut removed = vec![false; points.len()];
    for b in endpoints(&grid_bad_pairs(&grid, &points, params.radius())) {
        removed[b] = true;
    }
    Ok(points.without(&removed))
}

fn index_points(points: &PointSet, spec: GridSpec) -> Grid {
    let mut grid = Grid::empty(spec);
    for (i, p) in points.iter().enumerate() {
        grid.insert(spec.cell_of(p), i);
    }
    grid
}

/// Packing density `|P| v_d r^d`, ignoring disks overhanging the boundary.
pub fn estimate_density(points: &PointSet, params: &ModelParams) -> Result<f64> {
    let spec = GridSpec::new(params)?;
    if points.dim() != params.dim() {
        return Err(Error::DimensionMismatch {
            left: params.dim(),
            right: points.dim(),
        });
    }
    if !grid_bad_pairs(&index_points(points, spec), points, params.radius()).is_empty() {
        return Err(Error::Precondition("density needs a configuration without overlaps"));
    }
    Ok(points.len() as f64 * unit_ball_volume(params.dim())? * params.radius().powi(params.dim() as i32))
}

/// Distance from each point to its nearest other point (empty for fewer than
/// two points). Searches rings of grid cells outward until no closer point
/// can remain.
pub fn nearest_neighbor_distances(points: &PointSet, params: &ModelParams) -> Result<Vec<f64>> {
    let spec = GridSpec::new(params)?;
    if points.len() < 2 {
        return Ok(Vec::new());
    }
    let grid = index_points(points, spec);
    let side = spec.side();
    let n = spec.cells_per_axis();
    let mut out = Vec::with_capacity(points.len());
    for (i, x) in points.iter().enumerate() {
        let home = spec.cell_of(x);
        let mut best = f64::INFINITY;
        let mut ring = 0;
        loop {
            spec.for_each_neighbor(home, ring, |cell| {
                for &j in grid.cell(cell) {
                    if j != i {
                        best = best.min(sq_dist(x, points.point(j)));
                    }
                }
            });
            // Cells outside this ring are at least ring·side away.
            let cleared = ring as f64 * side;
            if best <= cleared * cleared || ring >= n {
                break;
            }
            ring += 1;
        }
        out.push(best.sqrt());
    }
    Ok(out)
}

/// Monte Carlo estimate of `E Z_0 = (λ_r²/2) · P(‖X − Y‖ < 2r)` for `X, Y`
/// independent uniform on the cube.
pub fn expected_initial_bad_pairs(params: &ModelParams, samples: usize, rng: &mut RandomStream) -> f64 {
    let d = params.dim();
    let limit = 4.0 * params.radius() * params.radius();
    let mut x = vec![0.0; d];
    let mut y = vec![0.0; d];
    let mut hits = 0usize;
    for _ in 0..samples {
        x.iter_mut().for_each(|c| *c = rng.uniform());
        y.iter_mut().for_each(|c| *c = rng.uniform());
        if sq_dist(&x, &y) < limit {
            hits += 1;
        }
    }
    let intensity = params.intensity();
    0.5 * intensity * intensity * hits as f64 / samples as f64
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    IterationScaling,
    RuntimeScaling,
    OracleEquivalence,
}

/// One replicate of a scaling experiment.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReplicateRow {
    pub radius: f64,
    pub replicate: u64,
    pub seed: u64,
    pub cap_exceeded: bool,
    pub iterations: usize,
    pub wall_time_s: f64,
    pub initial_count: usize,
    pub final_count: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub density: Option<f64>,
}

/// Aggregates over the replicates at one radius.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CellSummary {
    pub radius: f64,
    pub reps: usize,
    pub completed: usize,
    pub cap_failures: usize,
    pub mean_iterations: f64,
    /// Half-width of the normal 95% interval on `mean_iterations`.
    pub iterations_ci95: f64,
    pub mean_wall_time_s: f64,
    pub median_wall_time_s: f64,
    pub mean_density: f64,
    pub mean_initial_count: f64,
    /// Mean of `Z_t` for the first few `t`, with `Z_t = 0` past termination.
    pub mean_z_head: Vec<f64>,
    /// Mean number of fresh points generated at iteration `t + 1`.
    pub mean_generated_by_iteration: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NamedTest {
    pub name: String,
    pub statistic: f64,
    pub p_value: f64,
    pub threshold: f64,
    /// For ordinary tests, `p > threshold`; for expected-failure controls,
    /// `p ≤ threshold`.
    pub passed: bool,
    pub expect_reject: bool,
}

impl NamedTest {
    fn new(name: &str, t: TestStatistic, threshold: f64, expect_reject: bool) -> Self {
        let rejected = t.p_value <= threshold;
        NamedTest {
            name: name.to_string(),
            statistic: t.statistic,
            p_value: t.p_value,
            threshold,
            passed: rejected == expect_reject,
            expect_reject,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub experiment: ExperimentKind,
    pub dim: usize,
    pub lambda: f64,
    pub reps: usize,
    pub seed_base: u64,
    pub cells: Vec<CellSummary>,
    /// `mean T(r_{k+1}) − mean T(r_k)` over consecutive radii.
    pub successive_differences: Vec<f64>,
    /// Median wall time ratio `time(r_{k+1}) / time(r_k)`.
    pub time_ratios: Vec<f64>,
    pub tests: Vec<NamedTest>,
    pub cap_failures: usize,
    pub rows: Vec<ReplicateRow>,
}

impl ExperimentReport {
    pub fn passed(&self) -> bool {
        self.tests.iter().all(|t| t.passed)
    }

    /// Raw replicate rows as CSV.
    pub fn rows_csv(&self) -> String {
        let mut out = String::from(
            "radius,replicate,seed,cap_exceeded,iterations,wall_time_s,initial_count,final_count,density\n",
        );
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{},{}\n",
                r.radius,
                r.replicate,
                r.seed,
                r.cap_exceeded,
                r.iterations,
                r.wall_time_s,
                r.initial_count,
                r.final_count,
                r.density.map(|d| d.to_string()).unwrap_or_default()
            ));
        }
        out
    }
}

/// Parameters shared by the two scaling experiments.
#[derive(Clone, Debug, PartialEq)]
pub struct ScalingConfig {
    pub lambda: f64,
    pub radii: Vec<f64>,
    pub reps: usize,
    pub seed_base: u64,
    pub dim: usize,
    pub max_iterations: usize,
}

impl ScalingConfig {
    pub fn new(lambda: f64, radii: Vec<f64>, reps: usize, seed_base: u64) -> Self {
        ScalingConfig {
            lambda,
            radii,
            reps,
            seed_base,
            dim: 2,
            max_iterations: crate::engine::DEFAULT_MAX_ITERATIONS,
        }
    }

    fn validate(&self) -> Result<Vec<ModelParams>> {
        if self.reps == 0 {
            return Err(Error::invalid("reps", "must be at least 1"));
        }
        if self.radii.is_empty() {
            return Err(Error::invalid("radii", "need at least one radius"));
        }
        self.radii
            .iter()
            .map(|&r| ModelParams::new(self.dim, r, self.lambda))
            .collect()
    }
}

const Z_HEAD: usize = 8;

struct Replicate {
    row: ReplicateRow,
    stats: Option<RunStats>,
}

fn run_replicate(params: &ModelParams, seed_base: u64, index: u64, max_iterations: usize) -> Result<Replicate> {
    let seed = derive_seed(seed_base, index);
    let mut rng = RandomStream::new(seed);
    let mut row = ReplicateRow {
        radius: params.radius(),
        replicate: index,
        seed,
        cap_exceeded: false,
        iterations: 0,
        wall_time_s: 0.0,
        initial_count: 0,
        final_count: 0,
        density: None,
    };
    match prs_sample(params, &mut rng, max_iterations) {
        Ok(out) => {
            row.iterations = out.stats.iterations;
            row.wall_time_s = out.stats.wall_time_s;
            row.initial_count = out.stats.initial_count;
            row.final_count = out.stats.final_count;
            row.density = Some(
                out.points.len() as f64 * unit_ball_volume(params.dim())? * params.radius().powi(params.dim() as i32),
            );
            Ok(Replicate {
                row,
                stats: Some(out.stats),
            })
        }
        Err(Error::IterationCapExceeded { stats }) => {
            row.cap_exceeded = true;
            row.iterations = stats.iterations;
            row.wall_time_s = stats.wall_time_s;
            row.initial_count = stats.initial_count;
            row.final_count = stats.final_count;
            Ok(Replicate { row, stats: None })
        }
        Err(e) => Err(e),
    }
}

fn mean(xs: impl IntoIterator<Item = f64>) -> f64 {
    let (sum, n) = xs.into_iter().fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    if n == 0 {
        f64::NAN
    } else {
        sum / n as f64
    }
}

pub fn median(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m]
    } else {
        0.5 * (v[m - 1] + v[m])
    }
}

fn summarize(radius: f64, reps: &[Replicate]) -> CellSummary {
    let done: Vec<&RunStats> = reps.iter().filter_map(|r| r.stats.as_ref()).collect();
    let iters: Vec<f64> = done.iter().map(|s| s.iterations as f64).collect();
    let mean_t = mean(iters.iter().copied());
    let ci = if iters.len() > 1 {
        let var = iters.iter().map(|t| (t - mean_t).powi(2)).sum::<f64>() / (iters.len() - 1) as f64;
        1.96 * (var / iters.len() as f64).sqrt()
    } else {
        f64::NAN
    };
    let times: Vec<f64> = done.iter().map(|s| s.wall_time_s).collect();
    let longest = done.iter().map(|s| s.work.len()).max().unwrap_or(0);
    CellSummary {
        radius,
        reps: reps.len(),
        completed: done.len(),
        cap_failures: reps.len() - done.len(),
        mean_iterations: mean_t,
        iterations_ci95: ci,
        mean_wall_time_s: mean(times.iter().copied()),
        median_wall_time_s: median(&times),
        mean_density: mean(reps.iter().filter_map(|r| r.row.density)),
        mean_initial_count: mean(done.iter().map(|s| s.initial_count as f64)),
        mean_z_head: (0..Z_HEAD)
            .map(|t| {
                mean(
                    done.iter()
                        .map(|s| s.bad_pair_trace.get(t).copied().unwrap_or(0) as f64),
                )
            })
            .collect(),
        mean_generated_by_iteration: (0..longest)
            .map(|t| mean(done.iter().map(|s| s.work.get(t).map_or(0.0, |w| w.generated as f64))))
            .collect(),
    }
}

fn scaling_report(kind: ExperimentKind, config: &ScalingConfig, per_radius: Vec<Vec<Replicate>>) -> ExperimentReport {
    let cells: Vec<CellSummary> = config
        .radii
        .iter()
        .zip(&per_radius)
        .map(|(&r, reps)| summarize(r, reps))
        .collect();
    let successive_differences = cells
        .windows(2)
        .map(|w| w[1].mean_iterations - w[0].mean_iterations)
        .collect();
    let time_ratios = cells
        .windows(2)
        .map(|w| w[1].median_wall_time_s / w[0].median_wall_time_s)
        .collect();
    let cap_failures = cells.iter().map(|c| c.cap_failures).sum();
    ExperimentReport {
        experiment: kind,
        dim: config.dim,
        lambda: config.lambda,
        reps: config.reps,
        seed_base: config.seed_base,
        cells,
        successive_differences,
        time_ratios,
        tests: Vec::new(),
        cap_failures,
        rows: per_radius.into_iter().flatten().map(|r| r.row).collect(),
    }
}

/// Mean iteration count per radius. Replicates run in parallel; replicate
/// `j` at every radius uses seed `seed_base + j`.
pub fn iteration_scaling_experiment(config: &ScalingConfig) -> Result<ExperimentReport> {
    let params = config.validate()?;
    let per_radius = params
        .iter()
        .map(|p| {
            (0..config.reps as u64)
                .into_par_iter()
                .map(|j| run_replicate(p, config.seed_base, j, config.max_iterations))
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(scaling_report(ExperimentKind::IterationScaling, config, per_radius))
}

/// Wall time per radius. Replicates run one at a time so timings do not
/// compete for cores.
pub fn runtime_scaling_experiment(config: &ScalingConfig) -> Result<ExperimentReport> {
    let params = config.validate()?;
    let per_radius = params
        .iter()
        .map(|p| {
            (0..config.reps as u64)
                .map(|j| run_replicate(p, config.seed_base, j, config.max_iterations))
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(scaling_report(ExperimentKind::RuntimeScaling, config, per_radius))
}

/// Which sampler an equivalence test pits against classical rejection.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SamplerUnderTest {
    #[default]
    Prs,
    /// [`skip_resample_sample`]; the test is expected to reject it.
    SkipResample,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OracleConfig {
    /// Per-test p-value threshold.
    pub threshold: f64,
    pub max_attempts: usize,
    pub max_iterations: usize,
    pub sampler: SamplerUnderTest,
}

impl Default for OracleConfig {
    fn default() -> Self {
        OracleConfig {
            threshold: 1e-3,
            max_attempts: 1_000_000,
            max_iterations: crate::engine::DEFAULT_MAX_ITERATIONS,
            sampler: SamplerUnderTest::Prs,
        }
    }
}

struct SampleSummary {
    count: usize,
    nn: Vec<f64>,
}

fn summarize_sample(points: &PointSet, params: &ModelParams) -> Result<SampleSummary> {
    Ok(SampleSummary {
        count: points.len(),
        nn: nearest_neighbor_distances(points, params)?,
    })
}

/// Compares a sampler against classical rejection: chi-square on the
/// point-count histograms and KS on pooled nearest-neighbour distances.
///
/// Sample `i` of the sampler under test uses seed `seed_base + i`; oracle
/// sample `i` uses `seed_base + n_samples + i`.
pub fn oracle_equivalence_test(
    params: &ModelParams,
    n_samples: usize,
    seed_base: u64,
    config: &OracleConfig,
) -> Result<ExperimentReport> {
    if n_samples == 0 {
        return Err(Error::invalid("n_samples", "must be at least 1"));
    }
    let n = n_samples as u64;
    let tested = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut rng = RandomStream::new(derive_seed(seed_base, i));
            let points = match config.sampler {
                SamplerUnderTest::Prs => prs_sample(params, &mut rng, config.max_iterations)?.points,
                SamplerUnderTest::SkipResample => skip_resample_sample(params, &mut rng)?,
            };
            summarize_sample(&points, params)
        })
        .collect::<Result<Vec<_>>>()?;
    let oracle = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut rng = RandomStream::new(derive_seed(seed_base, n + i));
            let out = classical_rejection(params, &mut rng, config.max_attempts)?;
            summarize_sample(&out.points, params)
        })
        .collect::<Result<Vec<_>>>()?;

    let counts_a: Vec<usize> = tested.iter().map(|s| s.count).collect();
    let counts_b: Vec<usize> = oracle.iter().map(|s| s.count).collect();
    let top = counts_a.iter().chain(&counts_b).copied().max().unwrap_or(0);
    let chi = chi_square_two_sample(
        &Histogram::of_counts(&counts_a, top),
        &Histogram::of_counts(&counts_b, top),
    )?;

    let nn_a: Vec<f64> = tested.iter().flat_map(|s| s.nn.iter().copied()).collect();
    let nn_b: Vec<f64> = oracle.iter().flat_map(|s| s.nn.iter().copied()).collect();
    let expect_reject = config.sampler == SamplerUnderTest::SkipResample;
    let mut tests = vec![NamedTest::new(
        "point_count_chi_square",
        chi,
        config.threshold,
        expect_reject,
    )];
    if !nn_a.is_empty() && !nn_b.is_empty() {
        let ks = ks_two_sample(&nn_a, &nn_b)?;
        // The mutation control is judged on the count test alone.
        let mut t = NamedTest::new("nearest_neighbor_ks", ks, config.threshold, false);
        if expect_reject {
            t.passed = true;
        }
        tests.push(t);
    }

    let mean_count = |v: &[usize]| mean(v.iter().map(|&c| c as f64));
    let density_of =
        |c: f64| c * unit_ball_volume(params.dim()).unwrap_or(f64::NAN) * params.radius().powi(params.dim() as i32);
    let summary = |m: f64| CellSummary {
        radius: params.radius(),
        reps: n_samples,
        completed: n_samples,
        cap_failures: 0,
        mean_iterations: f64::NAN,
        iterations_ci95: f64::NAN,
        mean_wall_time_s: f64::NAN,
        median_wall_time_s: f64::NAN,
        mean_density: density_of(m),
        mean_initial_count: f64::NAN,
        mean_z_head: Vec::new(),
        mean_generated_by_iteration: Vec::new(),
    };
    Ok(ExperimentReport {
        experiment: ExperimentKind::OracleEquivalence,
        dim: params.dim(),
        lambda: params.lambda(),
        reps: n_samples,
        seed_base,
        cells: vec![summary(mean_count(&counts_a)), summary(mean_count(&counts_b))],
        successive_differences: Vec::new(),
        time_ratios: Vec::new(),
        tests,
        cap_failures: 0,
        rows: Vec::new(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::bad_pairs;

    #[test]
    fn classical_rejection_trivial_regime() {
        let p = ModelParams::new(2, 0.1, 0.001).unwrap();
        let out = classical_rejection(&p, &mut RandomStream::new(4), 10).unwrap();
        assert_eq!(out.stats.iterations, 0);
        assert!(bad_pairs(&out.points, 0.1).is_empty());
        assert!(classical_rejection(&p, &mut RandomStream::new(4), 0).is_err());
    }

    #[test]
    fn classical_rejection_cap() {
        let p = ModelParams::new(2, 0.01, 0.5).unwrap();
        assert!(matches!(
            classical_rejection(&p, &mut RandomStream::new(4), 3),
            Err(Error::AttemptCapExceeded { attempts: 3 })
        ));
    }

    #[test]
    fn density_examples() {
        let p2 = ModelParams::new(2, 1.0 / 200.0, 0.5).unwrap();
        assert_eq!(estimate_density(&PointSet::new(2).unwrap(), &p2).unwrap(), 0.0);
        let p3 = ModelParams::new(3, 0.1, 0.5).unwrap();
        let one = PointSet::from_points(3, [[0.5, 0.5, 0.5]]).unwrap();
        let expected = 4.0 / 3.0 * std::f64::consts::PI * 1e-3;
        assert!((estimate_density(&one, &p3).unwrap() - expected).abs() < 1e-15);
        let clash = PointSet::from_points(3, [[0.5, 0.5, 0.5], [0.5, 0.5, 0.55]]).unwrap();
        assert!(matches!(estimate_density(&clash, &p3), Err(Error::Precondition(_))));
    }

    #[test]
    fn figure_count_back_solves_to_reported_density() {
        let alpha = 2406.0 * std::f64::consts::PI / 40_000.0;
        assert!((alpha - 0.189).abs() < 1e-3);
    }

    #[test]
    fn nearest_neighbours_match_brute_force() {
        for (dim, r, lambda, seed) in [(2, 0.05, 0.3, 1), (1, 0.02, 0.1, 2), (3, 0.1, 0.2, 3), (2, 0.3, 0.2, 4)] {
            let p = ModelParams::new(dim, r, lambda).unwrap();
            let (pts, _) = initialize(&p, &mut RandomStream::new(seed)).unwrap();
            let fast = nearest_neighbor_distances(&pts, &p).unwrap();
            for (i, &d) in fast.iter().enumerate() {
                let brute = (0..pts.len())
                    .filter(|&j| j != i)
                    .map(|j| sq_dist(pts.point(i), pts.point(j)))
                    .fold(f64::INFINITY, f64::min)
                    .sqrt();
                assert_eq!(d, brute);
            }
        }
    }

    #[test]
    fn scaling_rejects_zero_reps() {
        let cfg = ScalingConfig::new(0.15, vec![0.1], 0, 1);
        assert!(iteration_scaling_experiment(&cfg).is_err());
        assert!(runtime_scaling_experiment(&cfg).is_err());
    }

    #[test]
    fn subcritical_limit_iterations() {
        let cfg = ScalingConfig::new(0.001, vec![1.0 / 64.0, 1.0 / 128.0], 30, 9);
        let rep = iteration_scaling_experiment(&cfg).unwrap();
        for c in &rep.cells {
            assert!(c.mean_iterations < 0.1, "{}", c.mean_iterations);
        }
        assert_eq!(rep.rows.len(), 60);
        assert!(rep.rows_csv().lines().count() == 61);
    }

    #[test]
    fn median_examples() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), 2.5);
        assert!(median(&[]).is_nan());
    }
}
