use nalgebra::Matrix2;

use super::TraceConfig;
use crate::types::{Aabb, Surface, Vec3};

/// Below this `|∇f_a × ∇f_b|` the surfaces are tangent and marching stops.
const TANGENT_TOL: f64 = 1e-6;

/// Newton projection onto `f_a = f_b = 0` with the minimum-norm step.
fn project_to_curve(a: &Surface, b: &Surface, mut x: Vec3) -> Option<Vec3> {
    for _ in 0..50 {
        let f = [a.implicit(&x), b.implicit(&x)];
        if f[0].abs() < 1e-14 && f[1].abs() < 1e-14 {
            return Some(x);
        }
        let (ga, gb) = (a.gradient(&x), b.gradient(&x));
        let jjt = Matrix2::new(ga.dot(&ga), ga.dot(&gb), gb.dot(&ga), gb.dot(&gb));
        let lambda = jjt.lu().solve(&nalgebra::Vector2::new(f[0], f[1]))?;
        let dx = ga * lambda[0] + gb * lambda[1];
        x -= dx;
        if dx.norm() < 1e-15 {
            break;
        }
    }
    let ok = a.distance(&x) < 1e-10 && b.distance(&x) < 1e-10;
    ok.then_some(x)
}

fn tangent(a: &Surface, b: &Surface, x: &Vec3) -> Option<Vec3> {
    let t = a.gradient(x).cross(&b.gradient(x));
    let n = t.norm();
    (n >= TANGENT_TOL).then(|| t / n)
}

enum Stop {
    Closed,
    Exit,
    Tangent,
    Exhausted,
}

/// Marches from `start` along `sign * tangent`, returning visited points
/// (excluding `start`) and why it stopped.
fn march(a: &Surface, b: &Surface, start: Vec3, sign: f64, domain: &Aabb, cfg: &TraceConfig) -> (Vec<Vec3>, Stop) {
    let mut out = Vec::new();
    let mut x = start;
    let Some(t0) = tangent(a, b, &x) else { return (out, Stop::Tangent) };
    let mut dir = t0 * sign;
    for k in 0..cfg.max_steps {
        let mut h = cfg.step;
        let next = loop {
            if let Some(p) = project_to_curve(a, b, x + dir * h) {
                // reject corrector jumps onto another branch
                if (p - x).norm() < 2.0 * h {
                    break Some(p);
                }
            }
            h *= 0.5;
            if h < cfg.step * 1e-3 {
                break None;
            }
        };
        let Some(p) = next else { return (out, Stop::Tangent) };
        if !domain.contains(&p) {
            return (out, Stop::Exit);
        }
        if k >= 2 && (p - start).norm() < 0.75 * cfg.step {
            return (out, Stop::Closed);
        }
        let Some(t) = tangent(a, b, &p) else {
            log::warn!("intersection trace truncated at a tangential point {p:?}");
            out.push(p);
            return (out, Stop::Tangent);
        };
        dir = if t.dot(&dir) >= 0.0 { t } else { -t };
        out.push(p);
        x = p;
    }
    (out, Stop::Exhausted)
}

fn near_polyline(p: &Vec3, poly: &[Vec3], radius: f64) -> bool {
    poly.iter().any(|q| (q - p).norm() <= radius)
}

/// Traces every branch of `a ∩ b` reachable from seeds lying within
/// `cfg.seed_tolerance` of both surfaces. Closed branches repeat their first
/// vertex at the end. Branches already covered by an earlier trace are skipped.
pub fn trace_intersection_numeric(
    a: &Surface,
    b: &Surface,
    seeds: &[Vec3],
    domain: &Aabb,
    cfg: &TraceConfig,
) -> Vec<Vec<Vec3>> {
    let mut branches: Vec<Vec<Vec3>> = Vec::new();
    for s in seeds {
        if a.distance(s) >= cfg.seed_tolerance || b.distance(s) >= cfg.seed_tolerance {
            continue;
        }
        let Some(x0) = project_to_curve(a, b, *s) else { continue };
        if !domain.contains(&x0) || branches.iter().any(|br| near_polyline(&x0, br, 2.0 * cfg.step)) {
            continue;
        }
        let (fwd, stop) = march(a, b, x0, 1.0, domain, cfg);
        let mut poly = Vec::with_capacity(fwd.len() + 1);
        if matches!(stop, Stop::Closed) {
            poly.push(x0);
            poly.extend(fwd);
            poly.push(x0);
        } else {
            let (bwd, _) = march(a, b, x0, -1.0, domain, cfg);
            poly.extend(bwd.into_iter().rev());
            poly.push(x0);
            poly.extend(fwd);
        }
        if matches!(stop, Stop::Exhausted) {
            log::warn!("intersection trace hit the step limit");
        }
        if poly.len() >= 4 {
            branches.push(poly);
        }
    }
    branches
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::TAU;

    fn unit_box() -> Aabb {
        Aabb {
            min: Vec3::zeros(),
            max: Vec3::new(1.0, 1.0, 1.0),
        }
    }

    #[test]
    fn perpendicular_plane_cylinder_matches_circle() {
        let cyl = Surface::Cylinder {
            axis_point: Vec3::new(0.5, 0.5, 0.0),
            axis: Vec3::z(),
            radius: 0.2,
        };
        let pl = Surface::Plane {
            normal: Vec3::z(),
            offset: 0.5,
        };
        let seeds = [Vec3::new(0.705, 0.5, 0.505)];
        let polys = trace_intersection_numeric(&cyl, &pl, &seeds, &unit_box(), &TraceConfig::default());
        assert_eq!(polys.len(), 1);
        let p = &polys[0];
        assert_eq!(p.first(), p.last());
        // analytic circle: center (0.5,0.5,0.5), radius 0.2, in z = 0.5
        for q in p {
            let d = Vec3::new(q.x - 0.5, q.y - 0.5, 0.0);
            let off = ((d.norm() - 0.2).powi(2) + (q.z - 0.5).powi(2)).sqrt();
            assert!(off < 1e-6, "{off}");
        }
        // the polyline goes all the way around
        let arc: f64 = p.windows(2).map(|w| (w[1] - w[0]).norm()).sum();
        assert!((arc - TAU * 0.2).abs() < 0.01, "arc {arc}");
    }

    #[test]
    fn perpendicular_equal_cylinders() {
        let a = Surface::Cylinder {
            axis_point: Vec3::new(0.5, 0.5, 0.5),
            axis: Vec3::z(),
            radius: 0.2,
        };
        let b = Surface::Cylinder {
            axis_point: Vec3::new(0.5, 0.5, 0.5),
            axis: Vec3::x(),
            radius: 0.2,
        };
        // x² + y² = y² + z² = r² around the common center: z = ±x
        let y = (0.04f64 - 0.01).sqrt();
        let seeds = [
            Vec3::new(0.5, 0.7, 0.5), // singular crossing point: no valid seed
            Vec3::new(0.6, 0.5 + y, 0.6),
            Vec3::new(0.6, 0.5 - y, 0.4),
        ];
        let polys = trace_intersection_numeric(&a, &b, &seeds, &unit_box(), &TraceConfig::default());
        assert!(!polys.is_empty());
        for q in polys.iter().flatten() {
            assert!(a.distance(q) < 1e-6 && b.distance(q) < 1e-6);
        }
    }

    #[test]
    fn disjoint_gives_nothing() {
        let a = Surface::Sphere {
            center: Vec3::new(0.2, 0.5, 0.5),
            radius: 0.1,
        };
        let b = Surface::Cylinder {
            axis_point: Vec3::new(0.8, 0.5, 0.5),
            axis: Vec3::z(),
            radius: 0.1,
        };
        let seeds = [Vec3::new(0.5, 0.5, 0.5)];
        assert!(trace_intersection_numeric(&a, &b, &seeds, &unit_box(), &TraceConfig::default()).is_empty());
    }

    #[test]
    fn branch_dedup() {
        let cyl = Surface::Cylinder {
            axis_point: Vec3::new(0.5, 0.5, 0.0),
            axis: Vec3::z(),
            radius: 0.2,
        };
        let sph = Surface::Sphere {
            center: Vec3::new(0.5, 0.5, 0.5),
            radius: 0.25,
        };
        // two circles at z = 0.5 ± 0.15; many seeds on each
        let mut seeds = Vec::new();
        for k in 0..20 {
            let a = k as f64 * 0.3;
            for z in [0.35, 0.65] {
                seeds.push(Vec3::new(0.5 + 0.2 * a.cos(), 0.5 + 0.2 * a.sin(), z));
            }
        }
        let polys = trace_intersection_numeric(&cyl, &sph, &seeds, &unit_box(), &TraceConfig::default());
        assert_eq!(polys.len(), 2);
    }
}
