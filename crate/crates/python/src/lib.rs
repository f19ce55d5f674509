//! Python bindings: `import hard_disks_py`.

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use hard_disks::bounds::{self, JjpDimension};
use hard_disks::io::StatsSidecar;
use hard_disks::{validation, BoundsReport, Error, PointSet, RandomStream, RunOutcome, DEFAULT_MAX_ITERATIONS};

fn to_py(e: Error) -> PyErr {
    match e {
        Error::IterationCapExceeded { .. } | Error::AttemptCapExceeded { .. } => PyRuntimeError::new_err(e.to_string()),
        _ => PyValueError::new_err(e.to_string()),
    }
}

fn json_to_py<'py, T: serde::Serialize>(py: Python<'py>, value: &T) -> PyResult<Bound<'py, PyAny>> {
    let text = serde_json::to_string(value).map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
    py.import("json")?.call_method1("loads", (text,))
}

fn point_set(points: Vec<Vec<f64>>, dim: usize) -> PyResult<PointSet> {
    PointSet::from_points(dim, points).map_err(to_py)
}

fn infer_dim(points: &[Vec<f64>], fallback: usize) -> usize {
    points.first().map_or(fallback, Vec::len)
}

fn rows(points: &PointSet) -> Vec<Vec<f64>> {
    points.iter().map(<[f64]>::to_vec).collect()
}

/// Dimension, disk radius and fugacity of a hard-sphere model on the unit cube.
#[pyclass(frozen, name = "ModelParams")]
struct PyModelParams(hard_disks::ModelParams);

#[pymethods]
impl PyModelParams {
    #[new]
    #[pyo3(signature = (dim, radius, lam))]
    fn new(dim: usize, radius: f64, lam: f64) -> PyResult<Self> {
        hard_disks::ModelParams::new(dim, radius, lam).map(Self).map_err(to_py)
    }

    #[getter]
    fn dim(&self) -> usize {
        self.0.dim()
    }

    #[getter]
    fn radius(&self) -> f64 {
        self.0.radius()
    }

    #[getter]
    fn lam(&self) -> f64 {
        self.0.lambda()
    }

    /// Poisson intensity of the underlying process.
    #[getter]
    fn intensity(&self) -> f64 {
        self.0.intensity()
    }

    fn __repr__(&self) -> String {
        format!(
            "ModelParams(dim={}, radius={}, lam={})",
            self.0.dim(),
            self.0.radius(),
            self.0.lambda()
        )
    }
}

/// A finished run: the configuration plus its run statistics.
#[pyclass(frozen, name = "Sample")]
struct PySample {
    seed: u64,
    params: hard_disks::ModelParams,
    outcome: RunOutcome,
    density: f64,
}

impl PySample {
    fn new(seed: u64, params: &hard_disks::ModelParams, outcome: RunOutcome) -> PyResult<Self> {
        let density = validation::estimate_density(&outcome.points, params).map_err(to_py)?;
        Ok(PySample {
            seed,
            params: *params,
            outcome,
            density,
        })
    }
}

#[pymethods]
impl PySample {
    #[getter]
    fn points(&self) -> Vec<Vec<f64>> {
        rows(&self.outcome.points)
    }

    #[getter]
    fn iterations(&self) -> usize {
        self.outcome.stats.iterations
    }

    #[getter]
    fn bad_pair_trace(&self) -> Vec<usize> {
        self.outcome.stats.bad_pair_trace.clone()
    }

    #[getter]
    fn density(&self) -> f64 {
        self.density
    }

    fn __len__(&self) -> usize {
        self.outcome.points.len()
    }

    /// The same record the command-line tool writes next to its output.
    fn stats<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        json_to_py(
            py,
            &StatsSidecar::new(self.seed, &self.params, &self.outcome.stats, self.density),
        )
    }

    fn to_csv(&self) -> String {
        hard_disks::io::write_csv(&self.outcome.points)
    }

    #[pyo3(signature = (canvas_px = 1000))]
    fn to_svg(&self, canvas_px: u32) -> PyResult<String> {
        hard_disks::io::render_svg(&self.outcome.points, self.params.radius(), canvas_px).map_err(to_py)
    }
}

/// Exact hard-sphere sample by partial rejection sampling.
#[pyfunction]
#[pyo3(signature = (params, seed, max_iterations = DEFAULT_MAX_ITERATIONS))]
fn sample(py: Python<'_>, params: &PyModelParams, seed: u64, max_iterations: usize) -> PyResult<PySample> {
    let p = params.0;
    let outcome = py
        .detach(|| hard_disks::prs_sample(&p, &mut RandomStream::new(seed), max_iterations))
        .map_err(to_py)?;
    PySample::new(seed, &p, outcome)
}

/// Exact sample by redrawing the whole configuration until it has no overlap.
#[pyfunction]
#[pyo3(signature = (params, seed, max_attempts = 1_000_000))]
fn classical_rejection(py: Python<'_>, params: &PyModelParams, seed: u64, max_attempts: usize) -> PyResult<PySample> {
    let p = params.0;
    let outcome = py
        .detach(|| validation::classical_rejection(&p, &mut RandomStream::new(seed), max_attempts))
        .map_err(to_py)?;
    PySample::new(seed, &p, outcome)
}

/// Index pairs `(i, j)`, `i < j`, of points closer than `2 * radius`.
#[pyfunction]
fn bad_pairs(points: Vec<Vec<f64>>, radius: f64) -> PyResult<Vec<(usize, usize)>> {
    let dim = infer_dim(&points, 1);
    let set = point_set(points, dim)?;
    Ok(hard_disks::bad_pairs(&set, radius)
        .into_iter()
        .map(|p| (p.i, p.j))
        .collect())
}

/// `len(points) * v_d * r^d` for an overlap-free configuration.
#[pyfunction]
fn estimate_density(points: Vec<Vec<f64>>, params: &PyModelParams) -> PyResult<f64> {
    let set = point_set(points, params.0.dim())?;
    validation::estimate_density(&set, &params.0).map_err(to_py)
}

/// All analytic constants for one dimension, as a dict.
#[pyfunction]
#[pyo3(signature = (dim, lam = None))]
fn bounds_report<'py>(py: Python<'py>, dim: usize, lam: Option<f64>) -> PyResult<Bound<'py, PyAny>> {
    let lam = match lam {
        Some(l) => l,
        None => bounds::lambda_bar(dim, dim == 2).map_err(to_py)?,
    };
    let report = BoundsReport::new(dim, lam).map_err(to_py)?;
    json_to_py(py, &report)
}

/// Area of the intersection of two unit disks whose centres are `rho` apart.
#[pyfunction]
fn lens_area(rho: f64) -> PyResult<f64> {
    bounds::lens_area(rho).map_err(to_py)
}

#[pyfunction]
#[pyo3(signature = (dim, improved = false))]
fn lambda_bar(dim: usize, improved: bool) -> PyResult<f64> {
    bounds::lambda_bar(dim, improved).map_err(to_py)
}

/// `c_d` for a finite dimension, or its limit when `dim` is `None`.
#[pyfunction]
#[pyo3(signature = (dim = None))]
fn jjp_constant(dim: Option<usize>) -> PyResult<f64> {
    let d = dim.map_or(JjpDimension::Infinite, JjpDimension::Finite);
    bounds::jjp_constant(d).map_err(to_py)
}

#[pyfunction]
#[pyo3(signature = (points, radius, canvas_px = 1000))]
fn render_svg(points: Vec<Vec<f64>>, radius: f64, canvas_px: u32) -> PyResult<String> {
    let set = point_set(points, 2)?;
    hard_disks::io::render_svg(&set, radius, canvas_px).map_err(to_py)
}

#[pymodule]
fn hard_disks_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyModelParams>()?;
    m.add_class::<PySample>()?;
    m.add_function(wrap_pyfunction!(sample, m)?)?;
    m.add_function(wrap_pyfunction!(classical_rejection, m)?)?;
    m.add_function(wrap_pyfunction!(bad_pairs, m)?)?;
    m.add_function(wrap_pyfunction!(estimate_density, m)?)?;
    m.add_function(wrap_pyfunction!(bounds_report, m)?)?;
    m.add_function(wrap_pyfunction!(lens_area, m)?)?;
    m.add_function(wrap_pyfunction!(lambda_bar, m)?)?;
    m.add_function(wrap_pyfunction!(jjp_constant, m)?)?;
    m.add_function(wrap_pyfunction!(render_svg, m)?)?;
    Ok(())
}
