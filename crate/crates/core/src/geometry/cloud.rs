use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{GeometryError, Pose, Vec3};
use crate::rng::derive_rng;

/// A set of points in meters, optionally with per-point RGB in [0,1]^3.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointCloud {
    pub points: Vec<Vec3>,
    pub colors: Option<Vec<[f32; 3]>>,
}

impl PointCloud {
    pub fn new(points: Vec<Vec3>) -> Self {
        PointCloud { points, colors: None }
    }

    pub fn with_colors(points: Vec<Vec3>, colors: Vec<[f32; 3]>) -> Self {
        assert_eq!(points.len(), colors.len());
        PointCloud { points, colors: Some(colors) }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn centroid(&self) -> Vec3 {
        let n = self.points.len() as f64;
        self.points
            .iter()
            .fold(Vec3::ZERO, |acc, p| acc.add(*p))
            .scale(1.0 / n)
    }
}

/// Applies a rigid transform to every point; colors pass through.
pub fn transform_cloud(cloud: &PointCloud, pose: &Pose) -> Result<PointCloud, GeometryError> {
    if cloud.is_empty() {
        return Err(GeometryError::EmptyCloud);
    }
    Ok(PointCloud {
        points: cloud.points.iter().map(|p| pose.apply(*p)).collect(),
        colors: cloud.colors.clone(),
    })
}

/// Farthest-point sampling down (or padding up) to exactly `n` points.
///
/// The start index is drawn from the seed; every subsequent pick is the
/// point maximizing its distance to the already-selected set. Ties break
/// toward the lower index, so the output is fully determined by
/// `(cloud, n, seed)`.
pub fn farthest_point_sample(
    cloud: &PointCloud,
    n: usize,
    seed: u64,
) -> Result<PointCloud, GeometryError> {
    if cloud.is_empty() {
        return Err(GeometryError::EmptyCloud);
    }
    assert!(n >= 1, "sample count must be at least 1");
    let len = cloud.points.len();

    let mut picked: Vec<usize> = Vec::with_capacity(n);
    if n >= len {
        // keep everything, then cycle to pad
        picked.extend(0..len);
        let mut i = 0;
        while picked.len() < n {
            picked.push(i % len);
            i += 1;
        }
    } else {
        let mut rng = derive_rng(seed, "fps", 0);
        let start = rng.gen_range(0..len);
        picked.push(start);
        let mut best_dist: Vec<f64> = cloud
            .points
            .iter()
            .map(|p| p.sub(cloud.points[start]).dot(p.sub(cloud.points[start])))
            .collect();
        while picked.len() < n {
            let mut far = 0;
            let mut far_d = -1.0;
            for (i, &d) in best_dist.iter().enumerate() {
                if d > far_d {
                    far_d = d;
                    far = i;
                }
            }
            picked.push(far);
            for (i, d) in best_dist.iter_mut().enumerate() {
                let delta = cloud.points[i].sub(cloud.points[far]);
                *d = d.min(delta.dot(delta));
            }
        }
    }

    Ok(PointCloud {
        points: picked.iter().map(|&i| cloud.points[i]).collect(),
        colors: cloud
            .colors
            .as_ref()
            .map(|cs| picked.iter().map(|&i| cs[i]).collect()),
    })
}
