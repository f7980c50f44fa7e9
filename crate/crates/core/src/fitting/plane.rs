use nalgebra::{Matrix3, SymmetricEigen};

use super::{consensus, finalize, refit, PrimitiveFit, RansacConfig};
use crate::error::{Error, Result};
use crate::types::{Surface, Vec3};

/// Plane through three points, `None` when they are (numerically) collinear.
pub(crate) fn plane_from_three(a: &Vec3, b: &Vec3, c: &Vec3) -> Option<Surface> {
    let ab = b - a;
    let ac = c - a;
    let n = ab.cross(&ac);
    let scale = ab.norm() * ac.norm();
    if scale == 0.0 || n.norm() <= 1e-10 * scale {
        return None;
    }
    let n = n.normalize();
    Some(Surface::Plane {
        normal: n,
        offset: n.dot(a),
    })
}

/// Total least squares: centroid plus the smallest-eigenvalue direction.
pub(crate) fn plane_tls(points: &[Vec3], indices: &[usize]) -> Option<Surface> {
    if indices.len() < 3 {
        return None;
    }
    let centroid = indices.iter().map(|&i| points[i]).sum::<Vec3>() / indices.len() as f64;
    let mut cov = Matrix3::zeros();
    for &i in indices {
        let d = points[i] - centroid;
        cov += d * d.transpose();
    }
    let eig = SymmetricEigen::new(cov);
    let k = eig.eigenvalues.imin();
    let n: Vec3 = eig.eigenvectors.column(k).into_owned().normalize();
    Some(Surface::Plane {
        normal: n,
        offset: n.dot(&centroid),
    })
}

pub fn fit_plane_ransac(points: &[Vec3], cfg: &RansacConfig) -> Result<PrimitiveFit> {
    cfg.validate()?;
    if points.len() < 3 {
        return Err(Error::TooFewPoints {
            needed: 3,
            got: points.len(),
        });
    }
    let hyp = consensus(points, 3, cfg, |s| {
        plane_from_three(&points[s[0]], &points[s[1]], &points[s[2]])
    })
    .ok_or_else(|| Error::DegeneratePatch("all sampled triples are collinear".into()))?;
    let refined = refit(&hyp, points, cfg.inlier_threshold, 3, |idx, _| plane_tls(points, idx));
    Ok(finalize(refined, points, cfg.inlier_threshold))
}
