//! Point-cloud normalization and normal estimation.

use nalgebra::{Matrix3, SymmetricEigen};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::spatial::KdTree;
use crate::types::{Aabb, LabeledPointCloud, Vec3};

/// Isotropic similarity `x' = (x - offset) / extent`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Similarity {
    pub offset: Vec3,
    pub extent: f64,
}

impl Similarity {
    pub fn identity() -> Self {
        Similarity {
            offset: Vec3::zeros(),
            extent: 1.0,
        }
    }

    pub fn scale(&self) -> f64 {
        1.0 / self.extent
    }

    pub fn apply(&self, p: &Vec3) -> Vec3 {
        (p - self.offset) / self.extent
    }

    pub fn invert(&self, p: &Vec3) -> Vec3 {
        p * self.extent + self.offset
    }

    pub fn is_identity(&self) -> bool {
        self.offset == Vec3::zeros() && self.extent == 1.0
    }
}

/// Maps the cloud into the unit box: min corner to the origin, longest
/// bounding-box axis to length 1. Normals are unaffected.
pub fn normalize_cloud(cloud: &LabeledPointCloud) -> Result<(LabeledPointCloud, Similarity)> {
    if cloud.is_empty() {
        return Err(Error::EmptyInput);
    }
    let bbox = Aabb::from_points(&cloud.points);
    let longest = bbox.extent().max();
    let transform = Similarity {
        offset: bbox.min,
        // division (not multiplication by a reciprocal) keeps the longest side
        // at exactly 1 and makes the operation idempotent
        extent: if longest > 0.0 { longest } else { 1.0 },
    };
    let mut out = cloud.clone();
    for p in out.points.iter_mut() {
        *p = transform.apply(p);
    }
    Ok((out, transform))
}

/// Per-point PCA normal over the `k` nearest neighbors (plus the point itself),
/// oriented away from the neighborhood centroid.
pub fn estimate_normals(cloud: &LabeledPointCloud, k: usize) -> Result<LabeledPointCloud> {
    if k < 3 {
        return Err(Error::Config(format!("normal estimation needs k >= 3, got {k}")));
    }
    if cloud.len() < k + 1 {
        return Err(Error::TooFewPoints {
            needed: k + 1,
            got: cloud.len(),
        });
    }
    let tree = KdTree::new(&cloud.points);
    let normals: Result<Vec<Vec3>> = cloud
        .points
        .par_iter()
        .enumerate()
        .map(|(i, p)| {
            let nbrs = tree.knn(p, k + 1);
            let centroid =
                nbrs.iter().map(|(j, _)| cloud.points[*j]).sum::<Vec3>() / nbrs.len() as f64;
            let mut cov = Matrix3::zeros();
            for (j, _) in &nbrs {
                let d = cloud.points[*j] - centroid;
                cov += d * d.transpose();
            }
            let eig = SymmetricEigen::new(cov);
            let mut order = [0usize, 1, 2];
            order.sort_by(|a, b| eig.eigenvalues[*a].total_cmp(&eig.eigenvalues[*b]));
            let (l0, l1, l2) = (
                eig.eigenvalues[order[0]],
                eig.eigenvalues[order[1]],
                eig.eigenvalues[order[2]],
            );
            if l2 <= 0.0 || l1 <= 1e-12 * l2 || (l1 - l0) <= 1e-12 * l2 {
                return Err(Error::DegenerateNeighborhood(i));
            }
            let mut n: Vec3 = eig.eigenvectors.column(order[0]).into_owned().normalize();
            if n.dot(&(p - centroid)) < 0.0 {
                n = -n;
            }
            Ok(n)
        })
        .collect();
    let mut out = cloud.clone();
    out.normals = Some(normals?);
    Ok(out)
}
