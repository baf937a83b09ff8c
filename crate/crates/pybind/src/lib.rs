//! Python bindings for the mesokit core. Matrices cross the boundary as
//! plain lists of float rows, reports as small attribute-only classes, so
//! nothing here depends on numpy.

use pyo3::exceptions::{PyIOError, PyValueError};
use pyo3::prelude::*;

use mesokit::{
    cost_report, divergence_between, knn_search, parse_network_toml, run_network,
    run_network_traced, sample_centroids, simulate, synth_cloud, AuConfig, CloudShape, Error, Mat,
    Mode, NetworkConfig, PointCloud,
};

fn err(e: Error) -> PyErr {
    match e {
        Error::Io { .. } => PyIOError::new_err(e.to_string()),
        _ => PyValueError::new_err(e.to_string()),
    }
}

fn parse_mode(mode: &str) -> PyResult<Mode> {
    match mode {
        "baseline" => Ok(Mode::Baseline),
        "delayed" => Ok(Mode::Delayed),
        _ => Err(PyValueError::new_err(format!(
            "mode must be 'baseline' or 'delayed', got {mode:?}"
        ))),
    }
}

fn rows_of(mat: &Mat) -> Vec<Vec<f32>> {
    (0..mat.rows()).map(|r| mat.row(r).to_vec()).collect()
}

/// A point cloud, or any intermediate feature matrix (one row per point).
#[pyclass(name = "Cloud")]
pub struct PyCloud {
    inner: PointCloud,
}

#[pymethods]
impl PyCloud {
    #[new]
    fn new(rows: Vec<Vec<f32>>) -> PyResult<Self> {
        let mat = Mat::from_rows(&rows).map_err(err)?;
        Ok(PyCloud {
            inner: PointCloud::new(mat).map_err(err)?,
        })
    }

    /// Deterministic synthetic cloud: shape is "uniform-cube" or
    /// "gaussian-clusters".
    #[staticmethod]
    fn synth(n: usize, shape: &str, seed: u64) -> PyResult<Self> {
        let shape = match shape {
            "uniform-cube" => CloudShape::UniformCube,
            "gaussian-clusters" => CloudShape::GaussianClusters,
            _ => {
                return Err(PyValueError::new_err(format!(
                    "shape must be 'uniform-cube' or 'gaussian-clusters', got {shape:?}"
                )))
            }
        };
        Ok(PyCloud {
            inner: synth_cloud(n, shape, seed).map_err(err)?,
        })
    }

    fn rows(&self) -> Vec<Vec<f32>> {
        rows_of(self.inner.mat())
    }

    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    fn __repr__(&self) -> String {
        format!("Cloud({} points, dim {})", self.inner.len(), self.inner.dim())
    }
}

/// A chain of set-abstraction modules parsed from the TOML network format.
#[pyclass(name = "Network")]
pub struct PyNetwork {
    net: NetworkConfig,
    #[pyo3(get)]
    input_dim: usize,
    #[pyo3(get)]
    seed: u64,
}

#[pymethods]
impl PyNetwork {
    /// Parses the same TOML document the command line takes via --net.
    #[staticmethod]
    #[pyo3(signature = (text, fallback_seed = 42))]
    fn from_toml(text: &str, fallback_seed: u64) -> PyResult<Self> {
        let loaded = parse_network_toml(text, "<python>", fallback_seed).map_err(err)?;
        Ok(PyNetwork {
            net: loaded.net,
            input_dim: loaded.input_dim,
            seed: loaded.seed,
        })
    }

    fn module_count(&self) -> usize {
        self.net.modules.len()
    }

    /// (n_out, k, widths) per module, in chain order.
    fn modules(&self) -> Vec<(usize, usize, Vec<usize>)> {
        self.net
            .modules
            .iter()
            .map(|m| (m.n_out, m.k, m.mlp.widths()))
            .collect()
    }

    fn __repr__(&self) -> String {
        format!(
            "Network({} modules, input dim {})",
            self.net.modules.len(),
            self.input_dim
        )
    }
}

/// Elementwise difference between the two orderings of one whole run.
#[pyclass(name = "Divergence")]
pub struct PyDivergence {
    #[pyo3(get)]
    max_abs_diff: f64,
    #[pyo3(get)]
    mean_abs_diff: f64,
    #[pyo3(get)]
    max_rel_diff: f64,
    #[pyo3(get)]
    mean_rel_diff: f64,
}

#[pymethods]
impl PyDivergence {
    fn __repr__(&self) -> String {
        format!(
            "Divergence(max_abs={:e}, mean_abs={:e}, max_rel={:e}, mean_rel={:e})",
            self.max_abs_diff, self.mean_abs_diff, self.max_rel_diff, self.mean_rel_diff
        )
    }
}

/// Analytic cost counters for one module in one mode.
#[pyclass(name = "Cost")]
pub struct PyCost {
    #[pyo3(get)]
    mode: String,
    #[pyo3(get)]
    macs_per_layer: Vec<u64>,
    #[pyo3(get)]
    macs_total: u64,
    #[pyo3(get)]
    activation_bytes_per_layer: Vec<u64>,
    #[pyo3(get)]
    aggregation_working_set_bytes: u64,
    #[pyo3(get)]
    nit_bytes: u64,
    #[pyo3(get)]
    pft_bytes: u64,
}

#[pymethods]
impl PyCost {
    fn __repr__(&self) -> String {
        format!("Cost({}, {} MACs)", self.mode, self.macs_total)
    }
}

/// Aggregation-unit counters for one simulated module.
#[pyclass(name = "AuReport")]
pub struct PyAuReport {
    #[pyo3(get)]
    cycles: u64,
    #[pyo3(get)]
    rounds_total: u64,
    #[pyo3(get)]
    neighbor_read_cycles: u64,
    #[pyo3(get)]
    centroid_read_cycles: u64,
    #[pyo3(get)]
    pft_reads: u64,
    #[pyo3(get)]
    conflict_service_reads: u64,
    #[pyo3(get)]
    nit_entry_reads: u64,
    #[pyo3(get)]
    partitions: u64,
    #[pyo3(get)]
    dram_nit_bytes: u64,
}

#[pymethods]
impl PyAuReport {
    fn __repr__(&self) -> String {
        format!(
            "AuReport({} cycles, {} partitions)",
            self.cycles, self.partitions
        )
    }
}

/// Runs the network end to end; mode is "baseline" or "delayed".
#[pyfunction]
fn run(cloud: &PyCloud, net: &PyNetwork, mode: &str) -> PyResult<PyCloud> {
    let mode = parse_mode(mode)?;
    let out = run_network(&cloud.inner, &net.net, mode).map_err(err)?;
    Ok(PyCloud { inner: out })
}

/// Runs both orderings and measures how far apart the outputs land.
#[pyfunction]
fn divergence(cloud: &PyCloud, net: &PyNetwork) -> PyResult<PyDivergence> {
    let baseline = run_network(&cloud.inner, &net.net, Mode::Baseline).map_err(err)?;
    let delayed = run_network(&cloud.inner, &net.net, Mode::Delayed).map_err(err)?;
    let d = divergence_between(baseline.mat(), delayed.mat()).map_err(err)?;
    Ok(PyDivergence {
        max_abs_diff: d.max_abs_diff,
        mean_abs_diff: d.mean_abs_diff,
        max_rel_diff: d.max_rel_diff,
        mean_rel_diff: d.mean_rel_diff,
    })
}

/// Analytic cost of each module for a run on `n_points` input points.
#[pyfunction]
fn costs(net: &PyNetwork, n_points: usize, mode: &str) -> PyResult<Vec<PyCost>> {
    let mode = parse_mode(mode)?;
    let mut n_in = n_points;
    let mut out = Vec::with_capacity(net.net.modules.len());
    for m in &net.net.modules {
        let r = cost_report(m, n_in, mode);
        out.push(PyCost {
            mode: match r.mode {
                Mode::Baseline => "baseline".into(),
                Mode::Delayed => "delayed".into(),
            },
            macs_per_layer: r.macs_per_layer,
            macs_total: r.macs_total,
            activation_bytes_per_layer: r.activation_bytes_per_layer,
            aggregation_working_set_bytes: r.aggregation_working_set_bytes,
            nit_bytes: r.nit_bytes,
            pft_bytes: r.pft_bytes,
        });
        n_in = m.n_out;
    }
    Ok(out)
}

/// Runs the delayed pipeline and replays each module's aggregation through
/// the banked-buffer model. Returns one report per module.
#[pyfunction]
#[pyo3(signature = (cloud, net, banks = 32, buffer_kb = 64))]
fn simulate_au(
    cloud: &PyCloud,
    net: &PyNetwork,
    banks: usize,
    buffer_kb: usize,
) -> PyResult<Vec<PyAuReport>> {
    let cfg = AuConfig {
        banks,
        pft_buffer_bytes: buffer_kb * 1024,
        ..AuConfig::default()
    };
    let trace = run_network_traced(&cloud.inner, &net.net, Mode::Delayed).map_err(err)?;
    let mut n_in = cloud.inner.len();
    let mut out = Vec::with_capacity(trace.modules.len());
    for (t, m) in trace.modules.iter().zip(&net.net.modules) {
        let s = simulate(&t.nit, n_in, m.mlp.output_width(), &cfg).map_err(err)?;
        out.push(PyAuReport {
            cycles: s.cycles,
            rounds_total: s.rounds_total,
            neighbor_read_cycles: s.neighbor_read_cycles,
            centroid_read_cycles: s.centroid_read_cycles,
            pft_reads: s.pft_reads,
            conflict_service_reads: s.conflict_service_reads,
            nit_entry_reads: s.nit_entry_reads,
            partitions: s.partitions,
            dram_nit_bytes: s.dram_nit_bytes,
        });
        n_in = m.n_out;
    }
    Ok(out)
}

/// Samples `n_out` centroids and finds each one's `k` nearest neighbors.
/// Returns (index_rows, centroid_indices).
#[pyfunction]
fn knn(cloud: &PyCloud, n_out: usize, k: usize, seed: u64) -> PyResult<(Vec<Vec<usize>>, Vec<usize>)> {
    let centroids = sample_centroids(&cloud.inner, n_out, seed).map_err(err)?;
    let nit = knn_search(&cloud.inner, &centroids, k).map_err(err)?;
    let rows = (0..nit.n_out()).map(|c| nit.row(c).to_vec()).collect();
    Ok((rows, centroids))
}

#[pymodule]
fn mesokit_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyCloud>()?;
    m.add_class::<PyNetwork>()?;
    m.add_class::<PyDivergence>()?;
    m.add_class::<PyCost>()?;
    m.add_class::<PyAuReport>()?;
    m.add_function(wrap_pyfunction!(run, m)?)?;
    m.add_function(wrap_pyfunction!(divergence, m)?)?;
    m.add_function(wrap_pyfunction!(costs, m)?)?;
    m.add_function(wrap_pyfunction!(simulate_au, m)?)?;
    m.add_function(wrap_pyfunction!(knn, m)?)?;
    Ok(())
}
