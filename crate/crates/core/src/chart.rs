//! 2-d parameter charts of the primitive surfaces, used for loop orientation,
//! tessellation and trimmed sampling.

use std::f64::consts::{PI, TAU};

use nalgebra::Vector2;

use crate::types::{plane_basis, Surface, Vec3};

pub type Uv = Vector2<f64>;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Chart {
    /// In-plane coordinates along `plane_basis(normal)`.
    Plane { origin: Vec3, e1: Vec3, e2: Vec3 },
    /// `(θ, h)`: angle around the axis and height along it. θ is periodic.
    Cylinder {
        axis_point: Vec3,
        axis: Vec3,
        e1: Vec3,
        e2: Vec3,
        radius: f64,
    },
    /// Stereographic projection from `-pole`; the pole maps to the origin.
    Sphere {
        center: Vec3,
        radius: f64,
        pole: Vec3,
        e1: Vec3,
        e2: Vec3,
    },
}

impl Chart {
    /// `reference` is a point the chart should be centered on (e.g. the face
    /// centroid); it only matters for spheres.
    pub fn new(surface: &Surface, reference: Vec3) -> Chart {
        match *surface {
            Surface::Plane { normal, offset } => {
                let (e1, e2) = plane_basis(&normal);
                Chart::Plane {
                    origin: normal * offset,
                    e1,
                    e2,
                }
            }
            Surface::Cylinder {
                axis_point,
                axis,
                radius,
            } => {
                let (e1, e2) = plane_basis(&axis);
                Chart::Cylinder {
                    axis_point,
                    axis,
                    e1,
                    e2,
                    radius,
                }
            }
            Surface::Sphere { center, radius } => {
                let d = reference - center;
                let pole = if d.norm() > 1e-9 * radius.max(1e-300) { d.normalize() } else { Vec3::z() };
                let (e1, e2) = plane_basis(&pole);
                Chart::Sphere {
                    center,
                    radius,
                    pole,
                    e1,
                    e2,
                }
            }
        }
    }

    /// Period of the first coordinate, if any.
    pub fn period(&self) -> Option<f64> {
        match self {
            Chart::Cylinder { .. } => Some(TAU),
            _ => None,
        }
    }

    pub fn uv(&self, x: &Vec3) -> Uv {
        match *self {
            Chart::Plane { origin, e1, e2 } => {
                let w = x - origin;
                Uv::new(w.dot(&e1), w.dot(&e2))
            }
            Chart::Cylinder {
                axis_point,
                axis,
                e1,
                e2,
                ..
            } => {
                let w = x - axis_point;
                Uv::new(w.dot(&e2).atan2(w.dot(&e1)), w.dot(&axis))
            }
            Chart::Sphere {
                center,
                pole,
                e1,
                e2,
                ..
            } => {
                let d = (x - center).normalize();
                let den = (1.0 + d.dot(&pole)).max(1e-12);
                Uv::new(d.dot(&e1) / den, d.dot(&e2) / den)
            }
        }
    }

    /// Inverse of [`Chart::uv`]; the result lies exactly on the surface up to
    /// rounding.
    pub fn point(&self, uv: &Uv) -> Vec3 {
        match *self {
            Chart::Plane { origin, e1, e2 } => origin + e1 * uv.x + e2 * uv.y,
            Chart::Cylinder {
                axis_point,
                axis,
                e1,
                e2,
                radius,
            } => axis_point + axis * uv.y + (e1 * uv.x.cos() + e2 * uv.x.sin()) * radius,
            Chart::Sphere {
                center,
                radius,
                pole,
                e1,
                e2,
            } => {
                let s = uv.norm_squared();
                let d = (e1 * (2.0 * uv.x) + e2 * (2.0 * uv.y) + pole * (1.0 - s)) / (1.0 + s);
                center + d.normalize() * radius
            }
        }
    }

    /// Maps a 3-d polyline into the chart, unwrapping the periodic coordinate
    /// so consecutive samples never jump by more than half a period.
    pub fn unwrap(&self, points: &[Vec3]) -> Vec<Uv> {
        let mut out: Vec<Uv> = Vec::with_capacity(points.len());
        for p in points {
            let mut uv = self.uv(p);
            if let (Some(period), Some(prev)) = (self.period(), out.last()) {
                uv.x += period * ((prev.x - uv.x) / period).round();
            }
            out.push(uv);
        }
        out
    }

    /// Chart-space difference `b - a`, wrapped for periodic charts.
    pub fn delta(&self, a: &Uv, b: &Uv) -> Uv {
        let mut d = b - a;
        if self.period().is_some() {
            d.x = (d.x + PI).rem_euclid(TAU) - PI;
        }
        d
    }
}

/// Shoelace area of a closed uv polygon (positive when counter-clockwise).
pub fn signed_area(poly: &[Uv]) -> f64 {
    let n = poly.len();
    if n < 3 {
        return 0.0;
    }
    let mut a = 0.0;
    for i in 0..n {
        let (p, q) = (poly[i], poly[(i + 1) % n]);
        a += p.x * q.y - q.x * p.y;
    }
    0.5 * a
}

/// Even-odd point-in-polygon test.
pub fn point_in_polygon(p: &Uv, poly: &[Uv]) -> bool {
    let n = poly.len();
    let mut inside = false;
    let mut j = n.wrapping_sub(1);
    for i in 0..n {
        let (a, b) = (poly[i], poly[j]);
        if (a.y > p.y) != (b.y > p.y) && p.x < (b.x - a.x) * (p.y - a.y) / (b.y - a.y) + a.x {
            inside = !inside;
        }
        j = i;
    }
    inside
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trips() {
        let surfaces = [
            Surface::Plane {
                normal: Vec3::new(0.3, -0.4, 0.866).normalize(),
                offset: 0.2,
            },
            Surface::Cylinder {
                axis_point: Vec3::new(0.5, 0.5, 0.0),
                axis: Vec3::new(0.1, 0.2, 1.0).normalize(),
                radius: 0.3,
            },
            Surface::Sphere {
                center: Vec3::new(0.5, 0.4, 0.3),
                radius: 0.25,
            },
        ];
        for s in &surfaces {
            let chart = Chart::new(s, Vec3::new(0.9, 0.5, 0.5));
            for k in 0..20 {
                let uv = Uv::new(-0.4 + 0.04 * k as f64, 0.3 - 0.025 * k as f64);
                let x = chart.point(&uv);
                assert!(s.distance(&x) < 1e-12);
                assert!((chart.uv(&x) - uv).norm() < 1e-12, "{s:?} {uv:?}");
            }
        }
    }

    #[test]
    fn area_and_containment() {
        let sq = [Uv::new(0.0, 0.0), Uv::new(1.0, 0.0), Uv::new(1.0, 1.0), Uv::new(0.0, 1.0)];
        assert_eq!(signed_area(&sq), 1.0);
        assert!(point_in_polygon(&Uv::new(0.5, 0.5), &sq));
        assert!(!point_in_polygon(&Uv::new(1.5, 0.5), &sq));
    }
}
