use nalgebra::Matrix3;

use super::{CandidateCurve, PairIntersection, COINCIDENT_TOL};
use crate::types::{canonical_sign, CurveGeometry, Surface, Vec3};

/// Directions closer than this (as `|a × b|` or `|a · b|`) count as exactly
/// parallel / perpendicular.
const ALIGN_TOL: f64 = 1e-9;

fn curve(geometry: CurveGeometry, faces: [usize; 2]) -> CandidateCurve {
    CandidateCurve {
        geometry,
        source_faces: faces,
        is_analytic: true,
    }
}

fn circle(center: Vec3, normal: Vec3, radius: f64) -> CurveGeometry {
    CurveGeometry::Circle {
        center,
        normal: normal * canonical_sign(&normal),
        radius,
    }
}

fn plane_plane(n1: Vec3, d1: f64, n2: Vec3, d2: f64) -> Option<CurveGeometry> {
    let u = n1.cross(&n2);
    if u.norm() < ALIGN_TOL {
        return None;
    }
    let u = u.normalize();
    // point of the line closest to the origin
    let m = Matrix3::from_rows(&[n1.transpose(), n2.transpose(), u.transpose()]);
    let p = m.lu().solve(&Vec3::new(d1, d2, 0.0))?;
    Some(CurveGeometry::Line {
        origin: p,
        direction: u * canonical_sign(&u),
    })
}

fn plane_sphere(n: Vec3, d: f64, c: Vec3, r: f64) -> Option<CurveGeometry> {
    let h = n.dot(&c) - d;
    let rho2 = r * r - h * h;
    if rho2 <= 0.0 {
        return None;
    }
    Some(circle(c - n * h, n, rho2.sqrt()))
}

fn sphere_sphere(c1: Vec3, r1: f64, c2: Vec3, r2: f64) -> Option<CurveGeometry> {
    let w = c2 - c1;
    let dist = w.norm();
    if dist == 0.0 || dist >= r1 + r2 || dist <= (r1 - r2).abs() {
        return None;
    }
    let u = w / dist;
    let a = (dist * dist + r1 * r1 - r2 * r2) / (2.0 * dist);
    let rho2 = r1 * r1 - a * a;
    if rho2 <= 0.0 {
        return None;
    }
    Some(circle(c1 + u * a, u, rho2.sqrt()))
}

enum PlaneCylinder {
    Curves(Vec<CurveGeometry>),
    Oblique,
}

fn plane_cylinder(n: Vec3, d: f64, a: Vec3, v: Vec3, r: f64) -> PlaneCylinder {
    let nv = n.dot(&v);
    if n.cross(&v).norm() < ALIGN_TOL {
        // axis perpendicular to the plane
        let center = a + v * ((d - n.dot(&a)) / nv);
        return PlaneCylinder::Curves(vec![circle(center, n, r)]);
    }
    if nv.abs() < ALIGN_TOL {
        // axis parallel to the plane: 0, 1 or 2 rulings
        let h = n.dot(&a) - d;
        if h.abs() > r {
            return PlaneCylinder::Curves(Vec::new());
        }
        let foot = a - n * h;
        let w = v.cross(&n).normalize();
        let gap = r * r - h * h;
        let half = gap.max(0.0).sqrt();
        let dir = v * canonical_sign(&v);
        let lines = if gap <= 1e-12 * r * r {
            vec![foot]
        } else {
            vec![foot - w * half, foot + w * half]
        };
        return PlaneCylinder::Curves(
            lines
                .into_iter()
                .map(|origin| CurveGeometry::Line { origin, direction: dir })
                .collect(),
        );
    }
    PlaneCylinder::Oblique
}

/// Closed-form intersection, or `None` when the pair needs numeric tracing
/// (oblique plane∩cylinder, cylinder∩cylinder, cylinder∩sphere).
pub fn intersect_analytic(a: &Surface, b: &Surface, faces: [usize; 2]) -> Option<PairIntersection> {
    if a.coincides_with(b, COINCIDENT_TOL) {
        return Some(PairIntersection::Coincident);
    }
    let wrap = |g: Option<CurveGeometry>| {
        PairIntersection::Curves(g.into_iter().map(|g| curve(g, faces)).collect())
    };
    match (*a, *b) {
        (Surface::Plane { normal: n1, offset: d1 }, Surface::Plane { normal: n2, offset: d2 }) => {
            Some(wrap(plane_plane(n1, d1, n2, d2)))
        }
        (Surface::Plane { normal, offset }, Surface::Sphere { center, radius })
        | (Surface::Sphere { center, radius }, Surface::Plane { normal, offset }) => {
            Some(wrap(plane_sphere(normal, offset, center, radius)))
        }
        (Surface::Sphere { center: c1, radius: r1 }, Surface::Sphere { center: c2, radius: r2 }) => {
            Some(wrap(sphere_sphere(c1, r1, c2, r2)))
        }
        (
            Surface::Plane { normal, offset },
            Surface::Cylinder {
                axis_point,
                axis,
                radius,
            },
        )
        | (
            Surface::Cylinder {
                axis_point,
                axis,
                radius,
            },
            Surface::Plane { normal, offset },
        ) => match plane_cylinder(normal, offset, axis_point, axis, radius) {
            PlaneCylinder::Curves(gs) => Some(PairIntersection::Curves(
                gs.into_iter().map(|g| curve(g, faces)).collect(),
            )),
            PlaneCylinder::Oblique => None,
        },
        _ => None,
    }
}
