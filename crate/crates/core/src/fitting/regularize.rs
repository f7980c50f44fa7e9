use nalgebra::{Matrix3, SymmetricEigen};

use super::{refine_cylinder_fixed_axis, PrimitiveFit, RansacConfig};
use crate::types::{Surface, Vec3};

fn direction_of(s: &Surface) -> Option<Vec3> {
    match s {
        Surface::Plane { normal, .. } => Some(*normal),
        Surface::Cylinder { axis, .. } => Some(*axis),
        Surface::Sphere { .. } => None,
    }
}

fn find(parent: &mut [usize], mut i: usize) -> usize {
    while parent[i] != i {
        parent[i] = parent[parent[i]];
        i = parent[i];
    }
    i
}

/// Snaps plane normals and cylinder axes that are within
/// `cfg.parallel_snap_deg` of each other (up to sign) onto their weighted mean
/// direction, then re-estimates the remaining parameters with the direction
/// fixed and recollects inliers. `patches[k]` holds the points of `fits[k]`.
///
/// Nearly parallel surfaces become exactly parallel, which lets the analytic
/// intersection cases (e.g. cap plane ⟂ cylinder axis) apply to fitted data.
pub fn regularize_directions(fits: &mut [PrimitiveFit], patches: &[&[Vec3]], cfg: &RansacConfig) {
    if cfg.parallel_snap_deg <= 0.0 {
        return;
    }
    let cos_tol = cfg.parallel_snap_deg.to_radians().cos();
    let dirs: Vec<Option<Vec3>> = fits.iter().map(|f| direction_of(&f.primitive.surface)).collect();
    let mut parent: Vec<usize> = (0..fits.len()).collect();
    for i in 0..fits.len() {
        for j in i + 1..fits.len() {
            if let (Some(a), Some(b)) = (dirs[i], dirs[j]) {
                if a.dot(&b).abs() >= cos_tol {
                    let (ri, rj) = (find(&mut parent, i), find(&mut parent, j));
                    if ri != rj {
                        parent[rj.max(ri)] = ri.min(rj);
                    }
                }
            }
        }
    }
    for root in 0..fits.len() {
        let members: Vec<usize> = (0..fits.len())
            .filter(|&k| dirs[k].is_some() && find(&mut parent, k) == root)
            .collect();
        if members.len() < 2 {
            continue;
        }
        let mut scatter = Matrix3::zeros();
        for &k in &members {
            let d = dirs[k].unwrap();
            scatter += d * d.transpose() * fits[k].primitive.inlier_count.max(1) as f64;
        }
        let eig = SymmetricEigen::new(scatter);
        let shared: Vec3 = eig.eigenvectors.column(eig.eigenvalues.imax()).into_owned().normalize();
        for &k in &members {
            let old = dirs[k].unwrap();
            let dir = if shared.dot(&old) < 0.0 { -shared } else { shared };
            let pts = patches[k];
            let idx = &fits[k].inlier_indices;
            let surface = match fits[k].primitive.surface {
                Surface::Plane { .. } => {
                    let offset = idx.iter().map(|&i| dir.dot(&pts[i])).sum::<f64>() / idx.len().max(1) as f64;
                    Surface::Plane { normal: dir, offset }
                }
                Surface::Cylinder { axis_point, radius, .. } => {
                    let (a, r) = refine_cylinder_fixed_axis(pts, idx, axis_point, dir, radius);
                    Surface::Cylinder {
                        axis_point: a,
                        axis: dir,
                        radius: r,
                    }
                }
                s => s,
            };
            fits[k] = PrimitiveFit::from_surface(surface, pts, cfg.inlier_threshold);
        }
    }
}
