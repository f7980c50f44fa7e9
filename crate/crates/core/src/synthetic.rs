//! Synthetic shape samplers used by tests, benchmarks and demos.

use std::f64::consts::TAU;

use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::types::{plane_basis, LabeledPointCloud, Vec3};

/// Sampled points with their exact (pre-noise) surface normals.
#[derive(Debug, Clone, Default)]
pub struct Sampled {
    pub points: Vec<Vec3>,
    pub normals: Vec<Vec3>,
}

fn jitter<R: Rng>(rng: &mut R, sigma: f64) -> Vec3 {
    if sigma <= 0.0 {
        return Vec3::zeros();
    }
    let n = Normal::new(0.0, sigma).unwrap();
    Vec3::new(n.sample(rng), n.sample(rng), n.sample(rng))
}

/// Uniform random unit vector.
pub fn random_direction<R: Rng>(rng: &mut R) -> Vec3 {
    let z: f64 = rng.random_range(-1.0..1.0);
    let phi: f64 = rng.random_range(0.0..TAU);
    let s = (1.0 - z * z).sqrt();
    Vec3::new(s * phi.cos(), s * phi.sin(), z)
}

/// Square patch of side `size` centered at `center`, isotropic noise `sigma`.
pub fn sample_plane_patch<R: Rng>(rng: &mut R, center: Vec3, normal: Vec3, size: f64, n: usize, sigma: f64) -> Sampled {
    let normal = normal.normalize();
    let (e1, e2) = plane_basis(&normal);
    let mut out = Sampled::default();
    for _ in 0..n {
        let u: f64 = rng.random_range(-0.5..0.5);
        let v: f64 = rng.random_range(-0.5..0.5);
        out.points.push(center + (e1 * u + e2 * v) * size + jitter(rng, sigma));
        out.normals.push(normal);
    }
    out
}

/// Area-uniform samples on the cap of the sphere covering `coverage` of its
/// area (1 = full sphere, 0.5 = the +z hemisphere).
pub fn sample_sphere<R: Rng>(rng: &mut R, center: Vec3, radius: f64, n: usize, sigma: f64, coverage: f64) -> Sampled {
    let zmin = 1.0 - 2.0 * coverage.clamp(0.0, 1.0);
    let mut out = Sampled::default();
    for _ in 0..n {
        let z: f64 = rng.random_range(zmin..=1.0);
        let phi: f64 = rng.random_range(0.0..TAU);
        let s = (1.0 - z * z).max(0.0).sqrt();
        let d = Vec3::new(s * phi.cos(), s * phi.sin(), z);
        out.points.push(center + d * radius + jitter(rng, sigma));
        out.normals.push(d);
    }
    out
}

/// Cylinder side from `base` along `axis` for `height`, over `arc_fraction`
/// of the full turn.
#[allow(clippy::too_many_arguments)]
pub fn sample_cylinder<R: Rng>(
    rng: &mut R,
    base: Vec3,
    axis: Vec3,
    radius: f64,
    height: f64,
    n: usize,
    sigma: f64,
    arc_fraction: f64,
) -> Sampled {
    let axis = axis.normalize();
    let (e1, e2) = plane_basis(&axis);
    let span = TAU * arc_fraction.clamp(0.0, 1.0);
    let mut out = Sampled::default();
    for _ in 0..n {
        let a: f64 = rng.random_range(0.0..span.max(1e-12));
        let h: f64 = rng.random_range(0.0..height);
        let radial = e1 * a.cos() + e2 * a.sin();
        out.points.push(base + axis * h + radial * radius + jitter(rng, sigma));
        out.normals.push(radial);
    }
    out
}

/// Unit cube `[0,1]^3` with one patch per face (labels 0..6 in the order
/// x=0, x=1, y=0, y=1, z=0, z=1). Points within `edge_band` of a face
/// boundary get edge flag 1.
pub fn cube_cloud<R: Rng>(rng: &mut R, per_face: usize, sigma: f64, edge_band: f64) -> LabeledPointCloud {
    let mut cloud = LabeledPointCloud::default();
    let mut normals = Vec::new();
    for face in 0..6u32 {
        let axis = (face / 2) as usize;
        let side = (face % 2) as f64;
        let (ua, va) = ((axis + 1) % 3, (axis + 2) % 3);
        for _ in 0..per_face {
            let u: f64 = rng.random();
            let v: f64 = rng.random();
            let mut p = Vec3::zeros();
            p[axis] = side;
            p[ua] = u;
            p[va] = v;
            let border = u.min(1.0 - u).min(v).min(1.0 - v);
            let mut n = Vec3::zeros();
            n[axis] = if side == 0.0 { -1.0 } else { 1.0 };
            cloud.points.push(p + jitter(rng, sigma));
            cloud.patch_ids.push(Some(face));
            cloud.edge_flags.push(if border <= edge_band { 1.0 } else { 0.0 });
            normals.push(n);
        }
    }
    cloud.normals = Some(normals);
    cloud
}

/// Closed cylinder: side (label 0) plus bottom (1) and top (2) caps. Points
/// within `edge_band` of either rim get edge flag 1.
#[allow(clippy::too_many_arguments)]
pub fn capped_cylinder_cloud<R: Rng>(
    rng: &mut R,
    base: Vec3,
    radius: f64,
    height: f64,
    n_side: usize,
    n_cap: usize,
    sigma: f64,
    edge_band: f64,
) -> LabeledPointCloud {
    let mut cloud = LabeledPointCloud::default();
    let mut normals = Vec::new();
    for _ in 0..n_side {
        let a: f64 = rng.random_range(0.0..TAU);
        let h: f64 = rng.random_range(0.0..height);
        let radial = Vec3::new(a.cos(), a.sin(), 0.0);
        cloud.points.push(base + Vec3::z() * h + radial * radius + jitter(rng, sigma));
        cloud.patch_ids.push(Some(0));
        cloud.edge_flags.push(if h.min(height - h) <= edge_band { 1.0 } else { 0.0 });
        normals.push(radial);
    }
    for (label, z, nz) in [(1u32, 0.0, -1.0), (2u32, height, 1.0)] {
        for _ in 0..n_cap {
            // area-uniform on the disk
            let rho = radius * rng.random::<f64>().sqrt();
            let a: f64 = rng.random_range(0.0..TAU);
            let p = base + Vec3::new(rho * a.cos(), rho * a.sin(), z);
            cloud.points.push(p + jitter(rng, sigma));
            cloud.patch_ids.push(Some(label));
            cloud.edge_flags.push(if radius - rho <= edge_band { 1.0 } else { 0.0 });
            normals.push(Vec3::new(0.0, 0.0, nz));
        }
    }
    cloud.normals = Some(normals);
    cloud
}
