//! Python bindings: complex normal laws, problem files, solves, Monte-Carlo
//! validation and the beamforming experiments.

use cccp::beamform::{self, ExperimentConfig, ExperimentResult};
use cccp::cnormal;
use cccp::files::{self, ProblemFile, ResultFile, SolveMethod, SolveOptions};
use cccp::linalg::{CMat, CVec};
use cccp::normal;
use cccp::validate::{estimate_individual, estimate_joint};
use num_complex::Complex64;
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

fn value_err(e: cccp::Error) -> PyErr {
    match e {
        cccp::Error::Solver(_) => PyRuntimeError::new_err(e.to_string()),
        _ => PyValueError::new_err(e.to_string()),
    }
}

fn to_cvec(v: Vec<Complex64>) -> CVec {
    CVec::from_vec(v)
}

fn to_cmat(rows: Vec<Vec<Complex64>>, n: usize, what: &str) -> PyResult<CMat> {
    if rows.len() != n || rows.iter().any(|r| r.len() != n) {
        return Err(PyValueError::new_err(format!("{what} must be {n}x{n}")));
    }
    Ok(CMat::from_fn(n, n, |i, j| rows[i][j]))
}

/// Complex normal law `N_c(mean, covariance, relation)`.
#[pyclass(name = "ComplexNormal", module = "cccp", frozen)]
struct PyComplexNormal {
    inner: cnormal::ComplexNormal,
}

#[pymethods]
impl PyComplexNormal {
    #[new]
    #[pyo3(signature = (mean, covariance, relation = None))]
    fn new(
        mean: Vec<Complex64>,
        covariance: Vec<Vec<Complex64>>,
        relation: Option<Vec<Vec<Complex64>>>,
    ) -> PyResult<Self> {
        let n = mean.len();
        let cov = to_cmat(covariance, n, "covariance")?;
        let rel = match relation {
            Some(r) => to_cmat(r, n, "relation")?,
            None => CMat::zeros(n, n),
        };
        let inner = cnormal::ComplexNormal::new(to_cvec(mean), cov, rel).map_err(value_err)?;
        inner.augmented_real().map_err(value_err)?;
        Ok(PyComplexNormal { inner })
    }

    #[getter]
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    /// `count` draws, one list per draw.
    fn sample(&self, py: Python<'_>, count: usize, seed: u64) -> PyResult<Vec<Vec<Complex64>>> {
        let m = py.detach(|| self.inner.sample(count, seed)).map_err(value_err)?;
        Ok(m.column_iter().map(|c| c.iter().copied().collect()).collect())
    }

    /// Mean and variance of `Re(cᴴ z)`.
    fn re_inner_stats(&self, z: Vec<Complex64>) -> PyResult<(f64, f64)> {
        let s = self.inner.re_inner_stats(&to_cvec(z)).map_err(value_err)?;
        Ok((s.mean, s.variance))
    }

    fn __repr__(&self) -> String {
        format!("ComplexNormal(dim={})", self.inner.dim())
    }
}

/// A parsed problem document.
#[pyclass(name = "Problem", module = "cccp", frozen)]
struct PyProblem {
    inner: files::Problem,
}

/// A result document.
#[pyclass(name = "SolveResult", module = "cccp", frozen)]
struct PySolveResult {
    inner: ResultFile,
}

#[pymethods]
impl PyProblem {
    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        Ok(PyProblem { inner: ProblemFile::parse(text).map_err(value_err)? })
    }

    #[getter]
    fn kind(&self) -> &'static str {
        match self.inner {
            files::Problem::Individual(_) => "individual",
            files::Problem::Joint(_) => "joint",
        }
    }

    #[getter]
    fn n(&self) -> usize {
        self.inner.dim()
    }

    #[pyo3(signature = (method = "individual", points = 10, grid_step = 0.05))]
    fn solve(&self, py: Python<'_>, method: &str, points: usize, grid_step: f64) -> PyResult<PySolveResult> {
        let method: SolveMethod = method.parse().map_err(value_err)?;
        let opts = SolveOptions { points, grid_step, ..Default::default() };
        let inner = py.detach(|| files::solve_problem(&self.inner, method, &opts)).map_err(value_err)?;
        Ok(PySolveResult { inner })
    }

    /// Monte-Carlo estimates at `z` as a dict with `rows`, `joint` and `pass`.
    #[pyo3(signature = (z, samples = 100_000, seed = 0))]
    fn validate<'py>(
        &self,
        py: Python<'py>,
        z: Vec<Complex64>,
        samples: usize,
        seed: u64,
    ) -> PyResult<Bound<'py, PyDict>> {
        let z = to_cvec(z);
        if z.len() != self.inner.dim() {
            return Err(PyValueError::new_err(format!(
                "z has length {}, problem has dimension {}",
                z.len(),
                self.inner.dim()
            )));
        }
        let report = py
            .detach(|| match &self.inner {
                files::Problem::Individual(p) => estimate_individual(p, &z, samples, seed),
                files::Problem::Joint(p) => estimate_joint(p, &z, samples, seed),
            })
            .map_err(value_err)?;
        let out = PyDict::new(py);
        let rows: Vec<(f64, f64, f64, bool)> =
            report.rows.iter().map(|e| (e.probability, e.half_width, e.target, e.pass)).collect();
        out.set_item("rows", rows)?;
        out.set_item("joint", report.joint.as_ref().map(|e| (e.probability, e.half_width, e.target, e.pass)))?;
        out.set_item("pass", report.pass())?;
        out.set_item("samples", report.samples)?;
        Ok(out)
    }

    fn __repr__(&self) -> String {
        format!("Problem(kind={:?}, n={})", self.kind(), self.n())
    }
}

#[pymethods]
impl PySolveResult {
    #[getter]
    fn status(&self) -> String {
        format!("{:?}", self.inner.status)
    }

    #[getter]
    fn objective(&self) -> Option<f64> {
        self.inner.solution.as_ref().map(|s| s.objective)
    }

    #[getter]
    fn z(&self) -> Option<Vec<Complex64>> {
        self.inner
            .solution
            .as_ref()
            .map(|s| s.z.re.iter().zip(&s.z.im).map(|(&r, &i)| Complex64::new(r, i)).collect())
    }

    #[getter]
    fn y(&self) -> Option<Vec<f64>> {
        self.inner.solution.as_ref().and_then(|s| s.y.clone())
    }

    /// `(lower, upper, gap)` for `joint-bounds`.
    #[getter]
    fn bounds(&self) -> Option<(f64, f64, f64)> {
        self.inner.bounds.as_ref().map(|b| (b.lower, b.upper, b.gap))
    }

    fn to_json(&self) -> PyResult<String> {
        self.inner.to_json().map_err(value_err)
    }

    fn __repr__(&self) -> String {
        format!("SolveResult(status={}, objective={:?})", self.status(), self.objective())
    }
}

#[pyfunction]
fn normal_cdf(x: f64) -> f64 {
    normal::normal_cdf(x)
}

#[pyfunction]
fn normal_quantile(u: f64) -> PyResult<f64> {
    normal::normal_quantile(u).map_err(value_err)
}

/// Uniform linear array response toward `doa_deg`.
#[pyfunction]
fn steering(sensors: usize, spacing: f64, doa_deg: f64) -> PyResult<Vec<Complex64>> {
    Ok(beamform::steering(sensors, spacing, doa_deg).map_err(value_err)?.iter().copied().collect())
}

fn stats_rows<'py>(py: Python<'py>, inr: Option<f64>, r: &ExperimentResult) -> PyResult<Vec<Bound<'py, PyDict>>> {
    r.stats
        .iter()
        .map(|s| {
            let d = PyDict::new(py);
            d.set_item("inr_db", inr)?;
            d.set_item("snr_db", s.snr_db)?;
            d.set_item("method", s.method.as_str())?;
            d.set_item("mean_sinr_db", s.mean_sinr_db)?;
            d.set_item("std_sinr_db", s.std_sinr_db)?;
            d.set_item("runs", s.runs)?;
            d.set_item("failures", s.failures)?;
            Ok(d)
        })
        .collect()
}

/// Runs `"fig1"` or `"fig2"` and returns one dict per (INR, SNR, method).
#[pyfunction]
#[pyo3(signature = (experiment, config_json = None, runs = None))]
fn run_beamform<'py>(
    py: Python<'py>,
    experiment: &str,
    config_json: Option<&str>,
    runs: Option<usize>,
) -> PyResult<Vec<Bound<'py, PyDict>>> {
    let mut config = match (experiment, config_json) {
        (_, Some(text)) => files::from_json::<ExperimentConfig>(text).map_err(value_err)?,
        ("fig1", None) => ExperimentConfig::fig1(),
        ("fig2", None) => ExperimentConfig::fig2(),
        _ => return Err(PyValueError::new_err(format!("unknown experiment {experiment:?}"))),
    };
    if let Some(r) = runs {
        config.scenario.runs = r;
    }
    let run: fn(&beamform::BeamformScenario) -> cccp::Result<ExperimentResult> = match experiment {
        "fig1" => beamform::run_experiment,
        "fig2" => beamform::run_joint_vs_individual,
        _ => return Err(PyValueError::new_err(format!("unknown experiment {experiment:?}"))),
    };
    let results = py
        .detach(|| {
            config
                .scenarios()?
                .into_iter()
                .map(|(inr, sc)| run(&sc).map(|r| (inr, r)))
                .collect::<cccp::Result<Vec<_>>>()
        })
        .map_err(value_err)?;
    let mut out = Vec::new();
    for (inr, r) in &results {
        out.extend(stats_rows(py, *inr, r)?);
    }
    Ok(out)
}

#[pymodule]
pub fn cccp_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyComplexNormal>()?;
    m.add_class::<PyProblem>()?;
    m.add_class::<PySolveResult>()?;
    m.add_function(wrap_pyfunction!(normal_cdf, m)?)?;
    m.add_function(wrap_pyfunction!(normal_quantile, m)?)?;
    m.add_function(wrap_pyfunction!(steering, m)?)?;
    m.add_function(wrap_pyfunction!(run_beamform, m)?)?;
    m.add("__version__", files::TOOL_VERSION)?;
    Ok(())
}
