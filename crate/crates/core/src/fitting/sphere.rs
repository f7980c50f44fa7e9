use nalgebra::{DVector, Matrix3};

use super::lsq::{gauss_newton, Linearization};
use super::{consensus, finalize, refit, PrimitiveFit, RansacConfig, MAX_RADIUS};
use crate::error::{Error, Result};
use crate::types::{Surface, Vec3};

/// Sphere through four points from the linear system
/// `2 (x_i - x_0) · c = |x_i|² - |x_0|²`; `None` when coplanar or near-plane.
pub(crate) fn sphere_from_four(p: [&Vec3; 4]) -> Option<Surface> {
    let rows = [p[1] - p[0], p[2] - p[0], p[3] - p[0]];
    let scale = rows.iter().map(|r| r.norm()).product::<f64>();
    let a = Matrix3::from_rows(&[
        (rows[0] * 2.0).transpose(),
        (rows[1] * 2.0).transpose(),
        (rows[2] * 2.0).transpose(),
    ]);
    if scale == 0.0 || a.determinant().abs() <= 8.0 * 1e-9 * scale {
        return None;
    }
    let b = Vec3::new(
        p[1].norm_squared() - p[0].norm_squared(),
        p[2].norm_squared() - p[0].norm_squared(),
        p[3].norm_squared() - p[0].norm_squared(),
    );
    let center = a.lu().solve(&b)?;
    let radius = (p[0] - center).norm();
    if !(radius > 0.0) || radius > MAX_RADIUS {
        return None;
    }
    Some(Surface::Sphere { center, radius })
}

pub(crate) fn refine_sphere(points: &[Vec3], indices: &[usize], init: (Vec3, f64)) -> (Vec3, f64) {
    let sse = |s: &(Vec3, f64)| {
        indices
            .iter()
            .map(|&i| ((points[i] - s.0).norm() - s.1).powi(2))
            .sum::<f64>()
    };
    gauss_newton(
        init,
        |s| {
            let mut lin = Linearization::new(4);
            for &i in indices {
                let d = points[i] - s.0;
                let len = d.norm();
                if len == 0.0 {
                    continue;
                }
                let u = d / len;
                lin.add_row(len - s.1, &[-u.x, -u.y, -u.z, -1.0]);
            }
            lin
        },
        sse,
        |s, step: &DVector<f64>| (s.0 + Vec3::new(step[0], step[1], step[2]), s.1 + step[3]),
    )
}

pub fn fit_sphere_ransac(points: &[Vec3], cfg: &RansacConfig) -> Result<PrimitiveFit> {
    cfg.validate()?;
    if points.len() < 4 {
        return Err(Error::TooFewPoints {
            needed: 4,
            got: points.len(),
        });
    }
    let hyp = consensus(points, 4, cfg, |s| {
        sphere_from_four([&points[s[0]], &points[s[1]], &points[s[2]], &points[s[3]]])
    })
    .ok_or_else(|| Error::DegeneratePatch("all sampled quadruples are coplanar".into()))?;
    let refined = refit(&hyp, points, cfg.inlier_threshold, 4, |idx, s| {
        let Surface::Sphere { center, radius } = *s else { unreachable!() };
        let (c, r) = refine_sphere(points, idx, (center, radius));
        (r > 0.0).then_some(Surface::Sphere { center: c, radius: r })
    });
    Ok(finalize(refined, points, cfg.inlier_threshold))
}
