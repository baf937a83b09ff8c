//! Deterministic synthetic point clouds for experiments and tests.

use crate::error::{Error, Result};
use crate::geometry::PointCloud;
use crate::rng::Xorshift64Star;
use crate::tensor::Mat;

/// Spatial structure of a generated cloud.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CloudShape {
    /// Points uniform in the unit cube.
    UniformCube,
    /// Four cluster centers uniform in the unit cube, points scattered
    /// around a uniformly chosen center with per-axis deviation 0.02.
    GaussianClusters,
}

const CLUSTERS: usize = 4;
const CLUSTER_SIGMA: f32 = 0.02;

/// Generate `n` three-dimensional points. The same `(n, shape, seed)` triple
/// produces bit-identical output on every platform.
pub fn synth_cloud(n: usize, shape: CloudShape, seed: u64) -> Result<PointCloud> {
    if n == 0 {
        return Err(Error::Argument("cannot generate an empty cloud".into()));
    }
    let mut rng = Xorshift64Star::new(seed);
    let mut data = Vec::with_capacity(n * 3);
    match shape {
        CloudShape::UniformCube => {
            for _ in 0..n * 3 {
                data.push(rng.next_f32());
            }
        }
        CloudShape::GaussianClusters => {
            let centers: Vec<f32> = (0..CLUSTERS * 3).map(|_| rng.next_f32()).collect();
            for _ in 0..n {
                let c = rng.next_index(CLUSTERS);
                for axis in 0..3 {
                    data.push(centers[c * 3 + axis] + CLUSTER_SIGMA * rng.next_gaussian());
                }
            }
        }
    }
    PointCloud::new_raw(Mat::from_vec(n, 3, data)?)
}
