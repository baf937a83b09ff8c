//! Module execution: the classic gather-then-compute ordering and the
//! delayed-aggregation reordering, plus multi-module network composition.
//!
//! A module turns an N_in x M_in cloud into an N_out x M_out cloud in three
//! steps: neighbor search, aggregation into per-centroid offset matrices, and
//! a shared MLP followed by a per-column max. The delayed ordering runs the
//! MLP over the raw input points first (producing the Point Feature Table),
//! then aggregates in feature space: gather the neighbors' feature rows, take
//! the column-wise max, and subtract the centroid's feature row. With an
//! identity activation the two orderings agree exactly; the rectifier makes
//! the reordering an approximation.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{knn_search_in, sample_centroids, NeighborIndexTable, PointCloud};
use crate::tensor::{mlp_forward, reduce_max_rows, sub_rowwise, Mat, Mlp};

/// Which ordering a run uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Baseline,
    Delayed,
}

/// Space the neighbor search measures distances in when modules are chained:
/// the original input coordinates carried through sampling, or the current
/// feature space (the previous module's output).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SearchSpace {
    Coordinates,
    Features,
}

/// One module's parameters.
#[derive(Debug, Clone)]
pub struct ModuleConfig {
    pub n_out: usize,
    pub k: usize,
    pub mlp: Mlp,
    pub search_space: SearchSpace,
    pub seed: u64,
    pub include_self: bool,
}

impl ModuleConfig {
    /// Checks the sampling parameters against an input cloud size.
    pub fn validate_for_len(&self, n: usize) -> Result<()> {
        if self.n_out == 0 || self.n_out > n {
            return Err(Error::Config(format!(
                "n_out = {} but the input cloud has {n} points",
                self.n_out
            )));
        }
        let candidates = if self.include_self { n } else { n.saturating_sub(1) };
        if self.k == 0 || self.k > candidates {
            return Err(Error::Config(format!(
                "k = {} but only {candidates} candidate neighbors exist",
                self.k
            )));
        }
        Ok(())
    }

    /// Checks the config against the cloud it is about to consume.
    pub fn validate_for(&self, cloud: &PointCloud) -> Result<()> {
        self.validate_for_len(cloud.len())?;
        if self.mlp.input_width() != cloud.dim() {
            return Err(Error::Config(format!(
                "module expects {}-dimensional inputs but the cloud is {}-dimensional",
                self.mlp.input_width(),
                cloud.dim()
            )));
        }
        Ok(())
    }
}

/// Per-point MLP outputs for a whole input cloud: N_in x M_out.
#[derive(Debug, Clone, PartialEq)]
pub struct PointFeatureTable {
    mat: Mat,
}

impl PointFeatureTable {
    pub fn new(mat: Mat) -> Self {
        Self { mat }
    }

    pub fn mat(&self) -> &Mat {
        &self.mat
    }

    pub fn into_mat(self) -> Mat {
        self.mat
    }
}

/// An ordered chain of modules.
#[derive(Debug, Clone)]
pub struct NetworkConfig {
    pub modules: Vec<ModuleConfig>,
}

impl NetworkConfig {
    /// Checks that the module widths chain from the given input dimension.
    pub fn validate_chain(&self, input_dim: usize) -> Result<()> {
        if self.modules.is_empty() {
            return Err(Error::Config("a network needs at least one module".into()));
        }
        let mut dim = input_dim;
        for (l, m) in self.modules.iter().enumerate() {
            if m.mlp.input_width() != dim {
                return Err(Error::Config(format!(
                    "module {l} expects {}-dimensional inputs but receives {dim}",
                    m.mlp.input_width()
                )));
            }
            dim = m.mlp.output_width();
        }
        Ok(())
    }
}

/// Everything a delayed-mode module run produces: the output cloud plus the
/// intermediate tables the simulator and cost model consume.
#[derive(Debug, Clone)]
pub struct DelayedRun {
    pub output: PointCloud,
    pub pft: PointFeatureTable,
    pub nit: NeighborIndexTable,
}

/// One Neighbor Feature Matrix per centroid: the K neighbors' feature rows
/// with the centroid's row subtracted from each.
pub fn aggregate_offsets(cloud: &PointCloud, nit: &NeighborIndexTable) -> Result<Vec<Mat>> {
    nit.validate_for(cloud.len())?;
    let mut out = Vec::with_capacity(nit.n_out());
    for c in 0..nit.n_out() {
        let gathered = cloud.mat().gather_rows(nit.row(c));
        let centroid = cloud.mat().gather_rows(&[nit.centroid(c)]);
        out.push(sub_rowwise(&gathered, &centroid)?);
    }
    Ok(out)
}

/// Baseline ordering with an explicit search matrix and centroid list.
/// `search` must have one row per point of `cloud`.
pub fn run_module_baseline_in(
    cloud: &PointCloud,
    search: &Mat,
    centroids: &[usize],
    cfg: &ModuleConfig,
) -> Result<(PointCloud, NeighborIndexTable)> {
    cfg.validate_for(cloud)?;
    let nit = knn_search_in(search, centroids, cfg.k, cfg.include_self)?;
    let nfms = aggregate_offsets(cloud, &nit)?;
    let m_out = cfg.mlp.output_width();
    let mut data = Vec::with_capacity(nit.n_out() * m_out);
    for nfm in &nfms {
        let features = mlp_forward(nfm, &cfg.mlp)?;
        let reduced = reduce_max_rows(&features)?;
        data.extend_from_slice(reduced.data());
    }
    let out = PointCloud::new(Mat::from_vec(nit.n_out(), m_out, data)?)?;
    Ok((out, nit))
}

/// Delayed ordering with an explicit search matrix and centroid list. The
/// neighbor search and the per-point MLP depend only on the immutable inputs,
/// so they run concurrently; aggregation starts once both are done. The MLP
/// runs exactly once, over all N_in input rows.
pub fn run_module_delayed_in(
    cloud: &PointCloud,
    search: &Mat,
    centroids: &[usize],
    cfg: &ModuleConfig,
) -> Result<DelayedRun> {
    cfg.validate_for(cloud)?;
    let (nit, pft) = rayon::join(
        || knn_search_in(search, centroids, cfg.k, cfg.include_self),
        || mlp_forward(cloud.mat(), &cfg.mlp),
    );
    let nit = nit?;
    let pft = PointFeatureTable::new(pft?);

    let m_out = cfg.mlp.output_width();
    let mut data = Vec::with_capacity(nit.n_out() * m_out);
    for c in 0..nit.n_out() {
        let gathered = pft.mat().gather_rows(nit.row(c));
        let reduced = reduce_max_rows(&gathered)?;
        let centroid_row = pft.mat().gather_rows(&[nit.centroid(c)]);
        let out_row = sub_rowwise(&reduced, &centroid_row)?;
        data.extend_from_slice(out_row.data());
    }
    let output = PointCloud::new(Mat::from_vec(nit.n_out(), m_out, data)?)?;
    Ok(DelayedRun { output, pft, nit })
}

/// Runs one module in the baseline ordering, sampling centroids from the
/// config's seed and searching in the cloud's own feature space.
pub fn run_module_baseline(cloud: &PointCloud, cfg: &ModuleConfig) -> Result<PointCloud> {
    cfg.validate_for(cloud)?;
    let centroids = sample_centroids(cloud, cfg.n_out, cfg.seed)?;
    run_module_baseline_in(cloud, cloud.mat(), &centroids, cfg).map(|(out, _)| out)
}

/// Runs one module in the delayed ordering, returning the intermediate
/// feature and index tables alongside the output.
pub fn run_module_delayed(cloud: &PointCloud, cfg: &ModuleConfig) -> Result<DelayedRun> {
    cfg.validate_for(cloud)?;
    let centroids = sample_centroids(cloud, cfg.n_out, cfg.seed)?;
    run_module_delayed_in(cloud, cloud.mat(), &centroids, cfg)
}

/// Intermediate artifacts of one module within a network run.
#[derive(Debug, Clone)]
pub struct ModuleTrace {
    pub nit: NeighborIndexTable,
    /// Present in delayed mode only.
    pub pft: Option<PointFeatureTable>,
}

/// A full network run plus per-module artifacts.
#[derive(Debug, Clone)]
pub struct NetworkTrace {
    pub output: PointCloud,
    pub modules: Vec<ModuleTrace>,
}

/// Folds the modules left to right. In `Coordinates` search space a module
/// measures distances in the original input coordinates of the surviving
/// points (carried through sampling); in `Features` space it measures in its
/// input cloud, i.e. the previous module's output space.
pub fn run_network_traced(
    cloud: &PointCloud,
    net: &NetworkConfig,
    mode: Mode,
) -> Result<NetworkTrace> {
    net.validate_chain(cloud.dim())?;
    let mut features = cloud.clone();
    let mut coords = cloud.mat().clone();
    let mut traces = Vec::with_capacity(net.modules.len());
    for cfg in &net.modules {
        cfg.validate_for(&features)?;
        let centroids = sample_centroids(&features, cfg.n_out, cfg.seed)?;
        let search = match cfg.search_space {
            SearchSpace::Coordinates => &coords,
            SearchSpace::Features => features.mat(),
        };
        let (next, trace) = match mode {
            Mode::Baseline => {
                let (out, nit) = run_module_baseline_in(&features, search, &centroids, cfg)?;
                (out, ModuleTrace { nit, pft: None })
            }
            Mode::Delayed => {
                let run = run_module_delayed_in(&features, search, &centroids, cfg)?;
                (
                    run.output,
                    ModuleTrace {
                        nit: run.nit,
                        pft: Some(run.pft),
                    },
                )
            }
        };
        coords = coords.gather_rows(&centroids);
        features = next;
        traces.push(trace);
    }
    Ok(NetworkTrace {
        output: features,
        modules: traces,
    })
}

/// [`run_network_traced`] without the per-module artifacts.
pub fn run_network(cloud: &PointCloud, net: &NetworkConfig, mode: Mode) -> Result<PointCloud> {
    run_network_traced(cloud, net, mode).map(|t| t.output)
}

/// Measured difference between the two orderings on one module. Pure
/// observation: nothing here asserts a bound, since the rectifier makes the
/// delayed ordering an approximation by design.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DivergenceReport {
    pub max_abs_diff: f64,
    pub mean_abs_diff: f64,
    /// Per-element |b - d| / max(|b|, |d|), 0 where both sides are 0.
    pub max_rel_diff: f64,
    pub mean_rel_diff: f64,
}

/// Summarizes elementwise differences between two equally-shaped matrices,
/// conventionally baseline output vs delayed output.
pub fn divergence_between(baseline: &Mat, delayed: &Mat) -> Result<DivergenceReport> {
    if baseline.rows() != delayed.rows() || baseline.cols() != delayed.cols() {
        return Err(Error::Shape {
            op: "divergence_between",
            left: (baseline.rows(), baseline.cols()),
            right: (delayed.rows(), delayed.cols()),
        });
    }
    let b = baseline.data();
    let d = delayed.data();
    let mut max_abs = 0.0f64;
    let mut sum_abs = 0.0f64;
    let mut max_rel = 0.0f64;
    let mut sum_rel = 0.0f64;
    for (&x, &y) in b.iter().zip(d) {
        let abs = (f64::from(x) - f64::from(y)).abs();
        let denom = f64::from(x.abs().max(y.abs()));
        let rel = if denom == 0.0 { 0.0 } else { abs / denom };
        max_abs = max_abs.max(abs);
        sum_abs += abs;
        max_rel = max_rel.max(rel);
        sum_rel += rel;
    }
    let n = b.len() as f64;
    Ok(DivergenceReport {
        max_abs_diff: max_abs,
        mean_abs_diff: sum_abs / n,
        max_rel_diff: max_rel,
        mean_rel_diff: sum_rel / n,
    })
}

/// Runs both orderings on the same module (same seed, hence same centroids
/// and neighbor lists) and summarizes the elementwise differences.
pub fn divergence_report(cloud: &PointCloud, cfg: &ModuleConfig) -> Result<DivergenceReport> {
    let baseline = run_module_baseline(cloud, cfg)?;
    let delayed = run_module_delayed(cloud, cfg)?.output;
    divergence_between(baseline.mat(), delayed.mat())
}
