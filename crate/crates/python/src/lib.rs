//! Python bindings for `nngp-info`.
//!
//! Matrices cross the boundary as lists of rows and labels as sequences of
//! `±1`. Every library error is raised as `NngpError`, whose `code`
//! attribute holds the stable machine-readable code.

use std::collections::BTreeSet;

use nngp_info::kernel::{compose, ArcCosine};
use nngp_info::linalg::normalized_det_root as det_root;
use nngp_info::orthant::DEFAULT_SAMPLES;
use nngp_info::pac_bayes::DEFAULT_DELTA;
use nngp_info::{ArchSpec, CovarianceMatrix, DatasetVariant, LabelVector};
use pyo3::create_exception;
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

create_exception!(
    nngp_info_py,
    NngpError,
    PyValueError,
    "Error raised by nngp-info; `code` names the failure."
);

fn to_py(py: Python<'_>, e: nngp_info::Error) -> PyErr {
    let err = NngpError::new_err(e.to_string());
    if let Err(set) = err.value(py).setattr("code", e.code()) {
        return set;
    }
    err
}

trait IntoPy<T> {
    fn py(self, py: Python<'_>) -> PyResult<T>;
}

impl<T> IntoPy<T> for nngp_info::Result<T> {
    fn py(self, py: Python<'_>) -> PyResult<T> {
        self.map_err(|e| to_py(py, e))
    }
}

pub fn covariance(rows: &[Vec<f64>]) -> nngp_info::Result<CovarianceMatrix> {
    CovarianceMatrix::from_rows(rows)
}

pub fn labels(values: &[f64]) -> nngp_info::Result<LabelVector> {
    LabelVector::from_f64(values)
}

pub fn flat_rows(rows: &[Vec<f64>]) -> nngp_info::Result<(usize, usize, Vec<f64>)> {
    let n = rows.len();
    let d = rows.first().map_or(0, Vec::len);
    if let Some((i, r)) = rows.iter().enumerate().find(|(_, r)| r.len() != d) {
        return Err(nngp_info::Error::DimensionMismatch(format!(
            "row {i} has {} entries, expected {d}",
            r.len()
        )));
    }
    Ok((n, d, rows.concat()))
}

/// Monte-Carlo `C0`, closed-form `C1` and the upper bound, in nats.
#[pyclass(frozen, get_all, module = "nngp_info_py")]
pub struct InfoEstimate {
    n: usize,
    c0_nats: f64,
    c0_std_error: f64,
    c1_nats: f64,
    info_upper_nats: f64,
    samples: usize,
    seed: u64,
    inverse_residual: f64,
}

#[pymethods]
impl InfoEstimate {
    /// `exp(-C0)`.
    fn orthant_probability(&self) -> f64 {
        (-self.c0_nats).exp()
    }

    fn orthant_std_error(&self) -> f64 {
        self.orthant_probability() * self.c0_std_error
    }

    fn __repr__(&self) -> String {
        format!(
            "InfoEstimate(n={}, c0_nats={}, c0_std_error={}, c1_nats={}, info_upper_nats={})",
            self.n, self.c0_nats, self.c0_std_error, self.c1_nats, self.info_upper_nats
        )
    }
}

impl From<nngp_info::InfoEstimate> for InfoEstimate {
    fn from(e: nngp_info::InfoEstimate) -> Self {
        Self {
            n: e.n,
            c0_nats: e.c0_nats,
            c0_std_error: e.c0_std_error,
            c1_nats: e.c1_nats,
            info_upper_nats: e.info_upper_nats,
            samples: e.samples,
            seed: e.seed,
            inverse_residual: e.inverse_residual,
        }
    }
}

#[pyclass(frozen, get_all, module = "nngp_info_py")]
pub struct GeneralisationBound {
    n: usize,
    delta: f64,
    info_nats: f64,
    raw_bound: f64,
    error_bound: f64,
    vacuous: bool,
}

#[pymethods]
impl GeneralisationBound {
    fn __repr__(&self) -> String {
        format!(
            "GeneralisationBound(n={}, delta={}, info_nats={}, raw_bound={}, error_bound={}, vacuous={})",
            self.n,
            self.delta,
            self.info_nats,
            self.raw_bound,
            self.error_bound,
            if self.vacuous { "True" } else { "False" }
        )
    }
}

#[pyclass(frozen, get_all, module = "nngp_info_py")]
pub struct OracleEstimate {
    probability: f64,
    std_error: f64,
    hits: u64,
    trials: u64,
}

#[pymethods]
impl OracleEstimate {
    fn __repr__(&self) -> String {
        format!(
            "OracleEstimate(probability={}, std_error={}, hits={}, trials={})",
            self.probability, self.std_error, self.hits, self.trials
        )
    }
}

#[pyclass(frozen, module = "nngp_info_py")]
pub struct Dataset(nngp_info::Dataset);

#[pymethods]
impl Dataset {
    /// Normalised inputs, one row per example.
    #[getter]
    fn inputs(&self) -> Vec<Vec<f64>> {
        let x = &self.0.inputs;
        (0..x.n()).map(|i| x.row(i).to_vec()).collect()
    }

    #[getter]
    fn labels(&self) -> Vec<i8> {
        self.0.labels.as_slice().to_vec()
    }

    #[getter]
    fn variant(&self) -> &'static str {
        self.0.variant.as_str()
    }

    #[getter]
    fn n(&self) -> usize {
        self.0.n
    }

    #[getter]
    fn seed(&self) -> u64 {
        self.0.seed
    }

    #[getter]
    fn source_digits(&self) -> BTreeSet<u8> {
        self.0.source_digits.clone()
    }

    #[getter]
    fn source_indices(&self) -> Vec<usize> {
        self.0.source_indices.clone()
    }

    /// Kernel matrix of the inputs at the given depth.
    #[pyo3(signature = (depth = 7))]
    fn kernel(&self, py: Python<'_>, depth: usize) -> PyResult<Vec<Vec<f64>>> {
        let x = &self.0.inputs;
        let arch = ArchSpec::for_kernel(depth, x.d0()).py(py)?;
        let sigma = py.detach(|| nngp_info::kernel_matrix(x, &arch)).py(py)?;
        Ok(sigma.matrix().to_rows())
    }

    /// Kernel at `depth`, then `C0` and `C1` for this dataset's labels.
    #[pyo3(signature = (depth = 7, samples = DEFAULT_SAMPLES, seed = None))]
    fn estimate(
        &self,
        py: Python<'_>,
        depth: usize,
        samples: usize,
        seed: Option<u64>,
    ) -> PyResult<InfoEstimate> {
        let seed = seed.unwrap_or(self.0.seed);
        let x = &self.0.inputs;
        let arch = ArchSpec::for_kernel(depth, x.d0()).py(py)?;
        py.detach(|| {
            let sigma = nngp_info::kernel_matrix(x, &arch)?;
            nngp_info::estimate_c0(&sigma, &self.0.labels, samples, seed)
        })
        .py(py)
        .map(Into::into)
    }

    fn __len__(&self) -> usize {
        self.0.n
    }

    fn __repr__(&self) -> String {
        format!(
            "Dataset(variant={}, n={}, seed={})",
            self.0.variant, self.0.n, self.0.seed
        )
    }
}

/// Parsed IDX image and label files.
#[pyclass(frozen, module = "nngp_info_py")]
pub struct RawImageSet(nngp_info::RawImageSet);

#[pymethods]
impl RawImageSet {
    #[getter]
    fn count(&self) -> usize {
        self.0.count
    }

    #[getter]
    fn rows(&self) -> usize {
        self.0.rows
    }

    #[getter]
    fn cols(&self) -> usize {
        self.0.cols
    }

    #[getter]
    fn labels(&self) -> Vec<u8> {
        self.0.labels.clone()
    }

    fn image(&self, py: Python<'_>, index: usize) -> PyResult<Vec<u8>> {
        if index >= self.0.count {
            return Err(to_py(
                py,
                nngp_info::Error::InvalidArgument(format!(
                    "image index {index} out of range 0..{}",
                    self.0.count
                )),
            ));
        }
        Ok(self.0.image(index).to_vec())
    }

    /// Draws a dataset of the named variant.
    fn dataset(&self, py: Python<'_>, variant: &str, n: usize, seed: u64) -> PyResult<Dataset> {
        let v: DatasetVariant = variant.parse().py(py)?;
        nngp_info::build_dataset(&self.0, v, n, seed)
            .py(py)
            .map(Dataset)
    }

    fn __len__(&self) -> usize {
        self.0.count
    }
}

/// `h(t) = (sqrt(1 - t^2) + t (pi - arccos t)) / pi`.
#[pyfunction]
fn arccos_step(py: Python<'_>, t: f64) -> PyResult<f64> {
    nngp_info::arccos_step(t).py(py)
}

/// `h` applied `depth - 1` times.
#[pyfunction]
fn compose_kernel(py: Python<'_>, t: f64, depth: usize) -> PyResult<f64> {
    compose(&ArcCosine, t, depth).py(py)
}

/// Rescales every row to Euclidean norm `sqrt(d0)`.
#[pyfunction]
fn normalize_inputs(py: Python<'_>, rows: Vec<Vec<f64>>) -> PyResult<Vec<Vec<f64>>> {
    let (n, d, flat) = flat_rows(&rows).py(py)?;
    let x = nngp_info::normalize_inputs(n, d, &flat).py(py)?;
    Ok((0..n).map(|i| x.row(i).to_vec()).collect())
}

/// Depth-`depth` relu kernel of raw inputs; rows are normalised first.
#[pyfunction]
#[pyo3(signature = (rows, depth = 7))]
fn kernel_matrix(py: Python<'_>, rows: Vec<Vec<f64>>, depth: usize) -> PyResult<Vec<Vec<f64>>> {
    let (n, d, flat) = flat_rows(&rows).py(py)?;
    let sigma = py
        .detach(|| {
            let x = nngp_info::normalize_inputs(n, d, &flat)?;
            nngp_info::kernel_matrix(&x, &ArchSpec::for_kernel(depth, d)?)
        })
        .py(py)?;
    Ok(sigma.matrix().to_rows())
}

/// Lower Cholesky factor `L` with `L L^T = sigma`.
#[pyfunction]
fn cholesky(py: Python<'_>, sigma: Vec<Vec<f64>>) -> PyResult<Vec<Vec<f64>>> {
    let s = covariance(&sigma).py(py)?;
    Ok(nngp_info::cholesky(&s).py(py)?.lower().to_rows())
}

#[pyfunction]
fn log_det(py: Python<'_>, sigma: Vec<Vec<f64>>) -> PyResult<f64> {
    let s = covariance(&sigma).py(py)?;
    Ok(nngp_info::cholesky(&s).py(py)?.log_det())
}

/// `det(sigma)^(1/n)`.
#[pyfunction]
fn normalized_det_root(py: Python<'_>, sigma: Vec<Vec<f64>>) -> PyResult<f64> {
    let s = covariance(&sigma).py(py)?;
    Ok(det_root(&nngp_info::cholesky(&s).py(py)?))
}

#[pyfunction]
#[pyo3(signature = (sigma, labels, samples = DEFAULT_SAMPLES, seed = 0))]
fn estimate_c0(
    py: Python<'_>,
    sigma: Vec<Vec<f64>>,
    labels: Vec<f64>,
    samples: usize,
    seed: u64,
) -> PyResult<InfoEstimate> {
    let s = covariance(&sigma).py(py)?;
    let c = self::labels(&labels).py(py)?;
    py.detach(|| nngp_info::estimate_c0(&s, &c, samples, seed))
        .py(py)
        .map(Into::into)
}

#[pyfunction]
fn c1_bound(py: Python<'_>, sigma: Vec<Vec<f64>>, labels: Vec<f64>) -> PyResult<f64> {
    let s = covariance(&sigma).py(py)?;
    let c = self::labels(&labels).py(py)?;
    nngp_info::c1_bound(&s, &c).py(py)
}

/// `(n (ln 2 - 1/2) + c1, n / 5 + c1)`.
#[pyfunction]
fn info_upper_bound(py: Python<'_>, n: usize, c1: f64) -> PyResult<(f64, f64)> {
    let b = nngp_info::info_upper_bound(n, c1).py(py)?;
    Ok((b.exact_nats, b.display_nats))
}

#[pyfunction]
#[pyo3(signature = (sigma, labels, trials = 1_000_000, seed = 0))]
fn orthant_oracle(
    py: Python<'_>,
    sigma: Vec<Vec<f64>>,
    labels: Vec<f64>,
    trials: u64,
    seed: u64,
) -> PyResult<OracleEstimate> {
    let s = covariance(&sigma).py(py)?;
    let c = self::labels(&labels).py(py)?;
    let o = py
        .detach(|| nngp_info::orthant_oracle(&s, &c, trials, seed))
        .py(py)?;
    Ok(OracleEstimate {
        probability: o.probability,
        std_error: o.std_error,
        hits: o.hits,
        trials: o.trials,
    })
}

/// `(D sigma D, ones)` with `D = diag(labels)`.
#[pyfunction]
fn sign_flip_canonicalize(
    py: Python<'_>,
    sigma: Vec<Vec<f64>>,
    labels: Vec<f64>,
) -> PyResult<(Vec<Vec<f64>>, Vec<i8>)> {
    let s = covariance(&sigma).py(py)?;
    let c = self::labels(&labels).py(py)?;
    let (flipped, ones) = nngp_info::sign_flip_canonicalize(&s, &c).py(py)?;
    Ok((flipped.matrix().to_rows(), ones.as_slice().to_vec()))
}

#[pyfunction]
#[pyo3(signature = (info_nats, n, delta = DEFAULT_DELTA))]
fn realisable_bound(
    py: Python<'_>,
    info_nats: f64,
    n: usize,
    delta: f64,
) -> PyResult<GeneralisationBound> {
    let b = nngp_info::realisable_bound(info_nats, n, delta).py(py)?;
    Ok(GeneralisationBound {
        n: b.n,
        delta: b.delta,
        info_nats: b.info_nats,
        raw_bound: b.raw_bound,
        error_bound: b.error_bound,
        vacuous: b.vacuous,
    })
}

/// Weight-counting bound for an MLP `input_dim -> widths... -> 1`.
#[pyfunction]
fn symmetry_info_bound(
    py: Python<'_>,
    input_dim: usize,
    widths: Vec<usize>,
    weight_bits: u32,
) -> PyResult<f64> {
    let arch = ArchSpec::new(widths.len() + 1, input_dim, widths, weight_bits).py(py)?;
    nngp_info::symmetry_info_bound(&arch).py(py)
}

#[pyfunction]
#[pyo3(signature = (n, d0, intra_class_cos, seed = 0))]
fn synthetic_dataset(
    py: Python<'_>,
    n: usize,
    d0: usize,
    intra_class_cos: f64,
    seed: u64,
) -> PyResult<Dataset> {
    nngp_info::synthetic_dataset(n, d0, intra_class_cos, seed)
        .py(py)
        .map(Dataset)
}

/// Parses IDX image and label bytes.
#[pyfunction]
fn parse_idx(py: Python<'_>, images: &[u8], labels: &[u8]) -> PyResult<RawImageSet> {
    nngp_info::RawImageSet::from_bytes(images, labels)
        .py(py)
        .map(RawImageSet)
}

#[pyfunction]
fn load_idx(
    py: Python<'_>,
    images_path: std::path::PathBuf,
    labels_path: std::path::PathBuf,
) -> PyResult<RawImageSet> {
    nngp_info::RawImageSet::from_files(images_path, labels_path)
        .py(py)
        .map(RawImageSet)
}

#[pymodule]
pub fn nngp_info_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("__version__", nngp_info::VERSION)?;
    m.add("NngpError", m.py().get_type::<NngpError>())?;
    m.add_class::<InfoEstimate>()?;
    m.add_class::<GeneralisationBound>()?;
    m.add_class::<OracleEstimate>()?;
    m.add_class::<Dataset>()?;
    m.add_class::<RawImageSet>()?;
    m.add_function(wrap_pyfunction!(arccos_step, m)?)?;
    m.add_function(wrap_pyfunction!(compose_kernel, m)?)?;
    m.add_function(wrap_pyfunction!(normalize_inputs, m)?)?;
    m.add_function(wrap_pyfunction!(kernel_matrix, m)?)?;
    m.add_function(wrap_pyfunction!(cholesky, m)?)?;
    m.add_function(wrap_pyfunction!(log_det, m)?)?;
    m.add_function(wrap_pyfunction!(normalized_det_root, m)?)?;
    m.add_function(wrap_pyfunction!(estimate_c0, m)?)?;
    m.add_function(wrap_pyfunction!(c1_bound, m)?)?;
    m.add_function(wrap_pyfunction!(info_upper_bound, m)?)?;
    m.add_function(wrap_pyfunction!(orthant_oracle, m)?)?;
    m.add_function(wrap_pyfunction!(sign_flip_canonicalize, m)?)?;
    m.add_function(wrap_pyfunction!(realisable_bound, m)?)?;
    m.add_function(wrap_pyfunction!(symmetry_info_bound, m)?)?;
    m.add_function(wrap_pyfunction!(synthetic_dataset, m)?)?;
    m.add_function(wrap_pyfunction!(parse_idx, m)?)?;
    m.add_function(wrap_pyfunction!(load_idx, m)?)?;
    Ok(())
}
