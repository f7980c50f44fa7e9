use nalgebra::{DVector, Matrix2, Vector2};

use super::lsq::{gauss_newton, Linearization};
use super::{consensus, finalize, refit, PrimitiveFit, RansacConfig, MAX_RADIUS};
use crate::error::{Error, Result};
use crate::types::{plane_basis, Surface, Vec3};

/// Minimum `|n1 × n2|` for a usable two-normal sample.
const MIN_NORMAL_CROSS: f64 = 1e-3;

/// Cylinder from two oriented points: the axis is `n1 × n2`; the axis point
/// is where the two normal lines meet in the plane orthogonal to it.
pub(crate) fn cylinder_from_two(p1: &Vec3, n1: &Vec3, p2: &Vec3, n2: &Vec3) -> Option<Surface> {
    let axis = n1.cross(n2);
    if axis.norm() < MIN_NORMAL_CROSS {
        return None;
    }
    let v = axis.normalize();
    let flat = |x: &Vec3| x - v * x.dot(&v);
    let (q1, q2, m1, m2) = (flat(p1), flat(p2), flat(n1), flat(n2));
    // q1 + s m1 = q2 + t m2 in the least-squares sense
    let a = Matrix2::new(m1.dot(&m1), -m1.dot(&m2), -m1.dot(&m2), m2.dot(&m2));
    let d = q2 - q1;
    let b = Vector2::new(m1.dot(&d), -m2.dot(&d));
    let st = a.lu().solve(&b)?;
    let center = (q1 + m1 * st[0] + q2 + m2 * st[1]) * 0.5;
    let radius = 0.5 * ((q1 - center).norm() + (q2 - center).norm());
    if !(radius > 1e-9) || radius > MAX_RADIUS {
        return None;
    }
    Some(Surface::Cylinder {
        axis_point: center,
        axis: v,
        radius,
    })
}

/// Moves the axis point to the projection of the inlier centroid.
pub(crate) fn anchor_axis(a: Vec3, v: Vec3, points: &[Vec3], indices: &[usize]) -> Vec3 {
    if indices.is_empty() {
        return a;
    }
    let centroid = indices.iter().map(|&i| points[i]).sum::<Vec3>() / indices.len() as f64;
    a + v * (centroid - a).dot(&v)
}

#[derive(Clone)]
struct CylParams {
    a: Vec3,
    v: Vec3,
    r: f64,
}

fn cylinder_sse(points: &[Vec3], indices: &[usize], c: &CylParams) -> f64 {
    indices
        .iter()
        .map(|&i| {
            let w = points[i] - c.a;
            ((w - c.v * w.dot(&c.v)).norm() - c.r).powi(2)
        })
        .sum()
}

/// Gauss–Newton over axis point, axis direction and radius.
pub(crate) fn refine_cylinder(points: &[Vec3], indices: &[usize], a: Vec3, v: Vec3, r: f64) -> (Vec3, Vec3, f64) {
    let out = gauss_newton(
        CylParams { a, v, r },
        |c| {
            let (b1, b2) = plane_basis(&c.v);
            let mut lin = Linearization::new(5);
            for &i in indices {
                let w = points[i] - c.a;
                let s = w.dot(&c.v);
                let p = w - c.v * s;
                let d = p.norm();
                if d == 0.0 {
                    continue;
                }
                let (pb1, pb2) = (p.dot(&b1) / d, p.dot(&b2) / d);
                lin.add_row(d - c.r, &[-s * pb1, -s * pb2, -pb1, -pb2, -1.0]);
            }
            lin
        },
        |c| cylinder_sse(points, indices, c),
        |c, step: &DVector<f64>| {
            let (b1, b2) = plane_basis(&c.v);
            CylParams {
                v: (c.v + b1 * step[0] + b2 * step[1]).normalize(),
                a: c.a + b1 * step[2] + b2 * step[3],
                r: c.r + step[4],
            }
        },
    );
    (anchor_axis(out.a, out.v, points, indices), out.v, out.r)
}

/// Re-estimates axis position and radius with the direction held fixed.
pub fn refine_cylinder_fixed_axis(points: &[Vec3], indices: &[usize], a: Vec3, v: Vec3, r: f64) -> (Vec3, f64) {
    let (b1, b2) = plane_basis(&v);
    let out = gauss_newton(
        CylParams { a, v, r },
        |c| {
            let mut lin = Linearization::new(3);
            for &i in indices {
                let w = points[i] - c.a;
                let p = w - v * w.dot(&v);
                let d = p.norm();
                if d == 0.0 {
                    continue;
                }
                lin.add_row(d - c.r, &[-p.dot(&b1) / d, -p.dot(&b2) / d, -1.0]);
            }
            lin
        },
        |c| cylinder_sse(points, indices, c),
        |c, step: &DVector<f64>| CylParams {
            v,
            a: c.a + b1 * step[0] + b2 * step[1],
            r: c.r + step[2],
        },
    );
    (anchor_axis(out.a, v, points, indices), out.r)
}

pub fn fit_cylinder_ransac(points: &[Vec3], normals: Option<&[Vec3]>, cfg: &RansacConfig) -> Result<PrimitiveFit> {
    cfg.validate()?;
    let normals = normals.ok_or(Error::MissingNormals)?;
    if normals.len() != points.len() {
        return Err(Error::MissingNormals);
    }
    if points.len() < 2 {
        return Err(Error::TooFewPoints {
            needed: 2,
            got: points.len(),
        });
    }
    let hyp = consensus(points, 2, cfg, |s| {
        cylinder_from_two(&points[s[0]], &normals[s[0]], &points[s[1]], &normals[s[1]])
    })
    .ok_or_else(|| Error::DegeneratePatch("every sampled normal pair is near-parallel".into()))?;
    let refined = refit(&hyp, points, cfg.inlier_threshold, 5, |idx, s| {
        let Surface::Cylinder { axis_point, axis, radius } = *s else { unreachable!() };
        let (a, v, r) = refine_cylinder(points, idx, axis_point, axis, radius);
        (r > 0.0 && r <= MAX_RADIUS).then_some(Surface::Cylinder {
            axis_point: a,
            axis: v,
            radius: r,
        })
    });
    Ok(finalize(refined, points, cfg.inlier_threshold))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cloud::estimate_normals;
    use crate::synthetic;
    use crate::types::LabeledPointCloud;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn cyl_of(fit: &PrimitiveFit) -> (Vec3, Vec3, f64) {
        match fit.primitive.surface {
            Surface::Cylinder {
                axis_point,
                axis,
                radius,
            } => (axis_point, axis, radius),
            _ => panic!("not a cylinder"),
        }
    }

    fn axis_angle_deg(a: &Vec3, b: &Vec3) -> f64 {
        a.dot(b).abs().min(1.0).acos().to_degrees()
    }

    #[test]
    fn exact_cylinder() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let s = synthetic::sample_cylinder(&mut rng, Vec3::new(0.5, 0.5, 0.2), Vec3::z(), 0.15, 0.6, 800, 0.0, 1.0);
        let fit = fit_cylinder_ransac(&s.points, Some(&s.normals), &RansacConfig::default()).unwrap();
        let (a, v, r) = cyl_of(&fit);
        assert!(axis_angle_deg(&v, &Vec3::z()) < 1e-6 / std::f64::consts::PI * 180.0);
        assert!((r - 0.15).abs() < 1e-9);
        assert!(((a - Vec3::new(0.5, 0.5, 0.0)).xy()).norm() < 1e-9);
    }

    #[test]
    fn noisy_cylinder_with_estimated_normals() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let s = synthetic::sample_cylinder(&mut rng, Vec3::new(0.5, 0.5, 0.2), Vec3::z(), 0.15, 0.6, 2000, 0.005, 1.0);
        let est = estimate_normals(&LabeledPointCloud::from_points(s.points.clone()), 16).unwrap();
        let fit = fit_cylinder_ransac(&s.points, est.normals.as_deref(), &RansacConfig::default()).unwrap();
        let (_, v, r) = cyl_of(&fit);
        assert!(axis_angle_deg(&v, &Vec3::z()) < 1.0);
        assert!((r - 0.15).abs() < 3e-3, "r = {r}");
    }

    #[test]
    fn quarter_arc_coverage() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let axis = Vec3::new(0.2, 1.0, 0.1).normalize();
        let s = synthetic::sample_cylinder(&mut rng, Vec3::new(0.5, 0.2, 0.5), axis, 0.25, 0.6, 2000, 0.005, 0.25);
        let est = estimate_normals(&LabeledPointCloud::from_points(s.points.clone()), 16).unwrap();
        let fit = fit_cylinder_ransac(&s.points, est.normals.as_deref(), &RansacConfig::default()).unwrap();
        let (_, v, r) = cyl_of(&fit);
        assert!(axis_angle_deg(&v, &axis) < 2.0);
        assert!((r - 0.25).abs() < 6e-3, "r = {r}");
    }

    #[test]
    fn normals_required() {
        let pts = vec![Vec3::zeros(), Vec3::x(), Vec3::y()];
        assert!(matches!(
            fit_cylinder_ransac(&pts, None, &RansacConfig::default()),
            Err(Error::MissingNormals)
        ));
    }

    #[test]
    fn parallel_normals_skipped() {
        assert!(cylinder_from_two(&Vec3::zeros(), &Vec3::z(), &Vec3::x(), &Vec3::z()).is_none());
        let pts: Vec<Vec3> = (0..10).map(|i| Vec3::new(i as f64 * 0.1, 0.0, 0.0)).collect();
        let n = vec![Vec3::z(); 10];
        assert!(matches!(
            fit_cylinder_ransac(&pts, Some(&n), &RansacConfig::default()),
            Err(Error::DegeneratePatch(_))
        ));
    }

    #[test]
    fn fixed_axis_refinement() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let s = synthetic::sample_cylinder(&mut rng, Vec3::new(0.3, 0.6, 0.1), Vec3::z(), 0.2, 0.5, 600, 0.0, 1.0);
        let idx: Vec<usize> = (0..s.points.len()).collect();
        let (a, r) = refine_cylinder_fixed_axis(&s.points, &idx, Vec3::new(0.32, 0.58, 0.0), Vec3::z(), 0.18);
        assert!((r - 0.2).abs() < 1e-9);
        assert!((a.xy() - Vec3::new(0.3, 0.6, 0.0).xy()).norm() < 1e-9);
    }
}
