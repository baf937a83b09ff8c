//! Centroid sampling and brute-force k-nearest-neighbor search.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::rng::Xorshift64Star;
use crate::tensor::Mat;

/// A point cloud: N rows of M-dimensional feature vectors. Raw input clouds
/// carry exactly the 3 spatial coordinates; module outputs carry learned
/// features of whatever width the module produces.
#[derive(Debug, Clone, PartialEq)]
pub struct PointCloud {
    mat: Mat,
}

impl PointCloud {
    pub fn new(mat: Mat) -> Result<Self> {
        if mat.rows() == 0 {
            return Err(Error::Argument("a point cloud needs at least one point".into()));
        }
        Ok(Self { mat })
    }

    /// A raw spatial cloud; must have exactly 3 columns.
    pub fn new_raw(mat: Mat) -> Result<Self> {
        if mat.cols() != 3 {
            return Err(Error::Argument(format!(
                "raw clouds have 3 coordinate columns, got {}",
                mat.cols()
            )));
        }
        Self::new(mat)
    }

    pub fn len(&self) -> usize {
        self.mat.rows()
    }

    pub fn is_empty(&self) -> bool {
        false // N >= 1 by construction
    }

    pub fn dim(&self) -> usize {
        self.mat.cols()
    }

    pub fn mat(&self) -> &Mat {
        &self.mat
    }

    pub fn into_mat(self) -> Mat {
        self.mat
    }
}

/// Per-centroid neighbor lists: `n_out` rows of `k` indices into the searched
/// cloud, each row sorted ascending by (squared distance, index).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NeighborIndexTable {
    n_out: usize,
    k: usize,
    indices: Vec<usize>,
    centroids: Vec<usize>,
}

impl NeighborIndexTable {
    /// Assembles a table from per-row data. `indices` is row-major n_out x k.
    pub fn new(n_out: usize, k: usize, indices: Vec<usize>, centroids: Vec<usize>) -> Result<Self> {
        if indices.len() != n_out * k {
            return Err(Error::Argument(format!(
                "index table length {} does not match {n_out}x{k}",
                indices.len()
            )));
        }
        if centroids.len() != n_out {
            return Err(Error::Argument(format!(
                "centroid list length {} does not match n_out {n_out}",
                centroids.len()
            )));
        }
        Ok(Self {
            n_out,
            k,
            indices,
            centroids,
        })
    }

    pub fn n_out(&self) -> usize {
        self.n_out
    }

    pub fn k(&self) -> usize {
        self.k
    }

    /// Neighbor indices of entry `c`.
    pub fn row(&self, c: usize) -> &[usize] {
        &self.indices[c * self.k..(c + 1) * self.k]
    }

    pub fn centroid(&self, c: usize) -> usize {
        self.centroids[c]
    }

    pub fn centroids(&self) -> &[usize] {
        &self.centroids
    }

    /// Checks every index against the size of the cloud the table points into.
    pub fn validate_for(&self, n_points: usize) -> Result<()> {
        for c in 0..self.n_out {
            if self.centroids[c] >= n_points {
                return Err(Error::CorruptNit {
                    entry: c,
                    index: self.centroids[c],
                    n_points,
                });
            }
            for &i in self.row(c) {
                if i >= n_points {
                    return Err(Error::CorruptNit {
                        entry: c,
                        index: i,
                        n_points,
                    });
                }
            }
        }
        Ok(())
    }
}

/// Draws `n_out` distinct point indices without replacement.
///
/// The draw is a partial Fisher-Yates shuffle over `0..N` driven by the
/// seeded [`Xorshift64Star`] stream: at step `i` the candidate at position
/// `i + rng.next_index(N - i)` is swapped into place. Identical
/// (cloud size, n_out, seed) triples produce identical output on every
/// platform.
pub fn sample_centroids(cloud: &PointCloud, n_out: usize, seed: u64) -> Result<Vec<usize>> {
    let n = cloud.len();
    if n_out == 0 || n_out > n {
        return Err(Error::Argument(format!(
            "cannot sample {n_out} centroids from {n} points"
        )));
    }
    let mut rng = Xorshift64Star::new(seed);
    let mut pool: Vec<usize> = (0..n).collect();
    for i in 0..n_out {
        let j = i + rng.next_index(n - i);
        pool.swap(i, j);
    }
    pool.truncate(n_out);
    Ok(pool)
}

/// Squared Euclidean distance between two feature rows, accumulated in f64.
#[inline]
fn dist2(a: &[f32], b: &[f32]) -> f64 {
    let mut acc = 0.0f64;
    for (x, y) in a.iter().zip(b) {
        let d = f64::from(*x) - f64::from(*y);
        acc += d * d;
    }
    acc
}

/// K-nearest-neighbor search over `search` (one row per point) for the given
/// centroid rows. Each output row holds the `k` nearest points by
/// (squared distance, index), ascending; the centroid itself is an eligible
/// neighbor at distance zero. Rows are computed independently and may be
/// computed in parallel; assembly order is fixed by the centroid list.
pub fn knn_search_in(
    search: &Mat,
    centroid_indices: &[usize],
    k: usize,
    include_self: bool,
) -> Result<NeighborIndexTable> {
    let n = search.rows();
    if centroid_indices.is_empty() {
        return Err(Error::Argument("empty centroid list".into()));
    }
    let candidates = if include_self { n } else { n.saturating_sub(1) };
    if k == 0 || k > candidates {
        return Err(Error::Argument(format!(
            "k = {k} but only {candidates} candidate points are available"
        )));
    }
    for &c in centroid_indices {
        if c >= n {
            return Err(Error::Argument(format!(
                "centroid index {c} out of range for {n} points"
            )));
        }
    }

    let rows: Vec<Vec<usize>> = centroid_indices
        .par_iter()
        .map(|&c| {
            let crow = search.row(c);
            let mut dists: Vec<(f64, usize)> = (0..n)
                .filter(|&i| include_self || i != c)
                .map(|i| (dist2(search.row(i), crow), i))
                .collect();
            let cmp = |a: &(f64, usize), b: &(f64, usize)| {
                a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1))
            };
            if k < dists.len() {
                dists.select_nth_unstable_by(k - 1, cmp);
                dists.truncate(k);
            }
            dists.sort_unstable_by(cmp);
            dists.into_iter().map(|(_, i)| i).collect()
        })
        .collect();

    let mut indices = Vec::with_capacity(centroid_indices.len() * k);
    for row in rows {
        indices.extend(row);
    }
    NeighborIndexTable::new(centroid_indices.len(), k, indices, centroid_indices.to_vec())
}

/// [`knn_search_in`] over the cloud's own feature space with self-inclusion.
pub fn knn_search(
    cloud: &PointCloud,
    centroid_indices: &[usize],
    k: usize,
) -> Result<NeighborIndexTable> {
    knn_search_in(cloud.mat(), centroid_indices, k, true)
}
