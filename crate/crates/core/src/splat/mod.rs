//! CPU reference for flat (2D) Gaussian splats: orthographic rendering with
//! front-to-back alpha compositing of color, edge and feature channels, the
//! image/edge/contrastive losses, analytic gradients, and the conversion of
//! splats to a labeled point cloud.

mod grad;
mod image;
mod loss;
mod render;
mod sample;
mod scene;
pub mod verify;

use nalgebra::{Rotation3, Vector2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::Vec3;

pub use grad::{backward, stage1_loss_and_grad, triplet_loss_and_grad, GaussianGrad, PixelGrads};
pub use image::{write_pfm, write_png, Image};
pub use loss::{
    cosine_distance, loss_edge, loss_geo, loss_geo_with_grad, loss_stage1, sample_triplets, ssim, triplet_loss,
    triplet_loss_on, Stage1Targets, Triplet,
};
pub use render::{render_channels, sort_front_to_back, Channels, RenderOutput, MIN_CONTRIBUTION};
pub use sample::{sample_gaussians_to_points, SamplingConfig};
pub use scene::{parse_scene, write_scene, Scene};

/// Tangent orthogonality / unit-length tolerance.
const FRAME_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct Gaussian2D {
    pub center: Vec3,
    pub t_u: Vec3,
    pub t_v: Vec3,
    pub scale: [f64; 2],
    pub opacity: f64,
    pub color: Vec3,
    pub edge: f64,
    pub feature: Vec<f64>,
}

/// Number of scalar parameters of a Gaussian with feature dimension `d`, in
/// the order center, rotation (axis-angle), scale, opacity, color, edge, feature.
pub fn param_count(d: usize) -> usize {
    13 + d
}

impl Gaussian2D {
    pub fn normal(&self) -> Vec3 {
        self.t_u.cross(&self.t_v)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidScene(m.to_string()));
        if (self.t_u.norm() - 1.0).abs() > FRAME_TOL || (self.t_v.norm() - 1.0).abs() > FRAME_TOL {
            return bad("tangents must have unit length");
        }
        if self.t_u.dot(&self.t_v).abs() >= FRAME_TOL {
            return bad("tangents must be orthogonal");
        }
        if !(self.scale[0] > 0.0 && self.scale[1] > 0.0) {
            return bad("scales must be positive");
        }
        if !(0.0..=1.0).contains(&self.opacity) || !(0.0..=1.0).contains(&self.edge) {
            return bad("opacity and edge value must lie in [0, 1]");
        }
        if self.color.iter().any(|c| !(0.0..=1.0).contains(c)) {
            return bad("color must lie in [0, 1]^3");
        }
        let finite = self.center.iter().all(|v| v.is_finite()) && self.feature.iter().all(|v| v.is_finite());
        if !finite {
            return bad("non-finite value");
        }
        Ok(())
    }

    /// Copy with parameter `k` (see [`param_count`]) moved by `delta`.
    /// Rotation parameters rotate both tangents by `delta` about an axis.
    pub fn perturbed(&self, k: usize, delta: f64) -> Gaussian2D {
        let mut g = self.clone();
        match k {
            0..=2 => g.center[k] += delta,
            3..=5 => {
                let mut w = Vec3::zeros();
                w[k - 3] = delta;
                let r = Rotation3::new(w);
                g.t_u = r * g.t_u;
                g.t_v = r * g.t_v;
            }
            6 | 7 => g.scale[k - 6] += delta,
            8 => g.opacity += delta,
            9..=11 => g.color[k - 9] += delta,
            12 => g.edge += delta,
            _ => g.feature[k - 13] += delta,
        }
        g
    }
}

/// Orthographic camera. Pixel `(i, j)` (column, row from the top) casts a ray
/// from `origin + (i + ½)·pixel_size·right − (j + ½)·pixel_size·up` along `view`.
#[derive(Debug, Clone, PartialEq)]
pub struct Camera {
    pub origin: Vec3,
    pub right: Vec3,
    pub up: Vec3,
    pub view: Vec3,
    pub width: usize,
    pub height: usize,
    pub pixel_size: f64,
}

impl Camera {
    /// Looks along +z at the unit square `[0,1]²` from `z = -1`.
    pub fn unit_square(width: usize, height: usize) -> Camera {
        Camera {
            origin: Vec3::new(0.0, 1.0, -1.0),
            right: Vec3::x(),
            up: Vec3::y(),
            view: Vec3::z(),
            width,
            height,
            pixel_size: 1.0 / width.max(height) as f64,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let unit = |v: &Vec3| (v.norm() - 1.0).abs() <= FRAME_TOL;
        let ortho = self.right.dot(&self.up).abs() < FRAME_TOL
            && self.right.dot(&self.view).abs() < FRAME_TOL
            && self.up.dot(&self.view).abs() < FRAME_TOL;
        if !(unit(&self.right) && unit(&self.up) && unit(&self.view) && ortho) {
            return Err(Error::InvalidScene("camera frame must be orthonormal".into()));
        }
        if self.width == 0 || self.height == 0 || !(self.pixel_size > 0.0) {
            return Err(Error::InvalidScene("camera resolution and pixel size must be positive".into()));
        }
        Ok(())
    }

    pub fn pixel_count(&self) -> usize {
        self.width * self.height
    }

    pub fn ray_origin(&self, i: usize, j: usize) -> Vec3 {
        self.origin + self.right * ((i as f64 + 0.5) * self.pixel_size) - self.up * ((j as f64 + 0.5) * self.pixel_size)
    }

    /// Ray origin of flat pixel index `idx = j·width + i`.
    pub fn ray_origin_at(&self, idx: usize) -> Vec3 {
        self.ray_origin(idx % self.width, idx / self.width)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Stage1LossConfig {
    /// D-SSIM mixing weight λ.
    pub lambda: f64,
    pub edge_weight: f64,
}

impl Default for Stage1LossConfig {
    fn default() -> Self {
        Stage1LossConfig {
            lambda: 0.2,
            edge_weight: 0.1,
        }
    }
}

impl Stage1LossConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.lambda) {
            return Err(Error::Config("loss.lambda must be in [0, 1]".into()));
        }
        if !(self.edge_weight >= 0.0) {
            return Err(Error::Config("loss.edge_weight must be >= 0".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TripletConfig {
    pub margin: f64,
    pub triplets_per_mask: usize,
    /// Negatives drawn from each other mask.
    pub negatives_per_mask: usize,
}

impl Default for TripletConfig {
    fn default() -> Self {
        TripletConfig {
            margin: 0.3,
            triplets_per_mask: 16,
            negatives_per_mask: 64,
        }
    }
}

impl TripletConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.margin > 0.0) {
            return Err(Error::Config("triplet.margin must be > 0".into()));
        }
        if self.triplets_per_mask == 0 || self.negatives_per_mask == 0 {
            return Err(Error::Config("triplet sample counts must be >= 1".into()));
        }
        Ok(())
    }
}

/// `exp(-(u² + v²) / 2)`.
pub fn gaussian_kernel(u: &Vector2<f64>) -> f64 {
    (-0.5 * u.norm_squared()).exp()
}

/// Where the ray through `ray_origin` meets the splat plane, in units of the
/// scaled tangents. `None` when the ray is (nearly) parallel to the plane.
pub fn local_coords_from(g: &Gaussian2D, view: &Vec3, ray_origin: &Vec3) -> Option<Vector2<f64>> {
    let n = g.normal();
    let nv = n.dot(view);
    if nv.abs() <= 1e-9 {
        return None;
    }
    let lambda = n.dot(&(g.center - ray_origin)) / nv;
    let r = ray_origin + view * lambda - g.center;
    Some(Vector2::new(g.t_u.dot(&r) / g.scale[0], g.t_v.dot(&r) / g.scale[1]))
}

/// Local splat coordinates `u(x)` of pixel `(i, j)`.
pub fn pixel_local_coords(g: &Gaussian2D, cam: &Camera, i: usize, j: usize) -> Option<Vector2<f64>> {
    local_coords_from(g, &cam.view, &cam.ray_origin(i, j))
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::Matrix3;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    pub(crate) fn flat(center: Vec3, s: f64) -> Gaussian2D {
        Gaussian2D {
            center,
            t_u: Vec3::x(),
            t_v: Vec3::y(),
            scale: [s, s],
            opacity: 1.0,
            color: Vec3::new(0.2, 0.4, 0.6),
            edge: 0.7,
            feature: vec![1.0, 0.0],
        }
    }

    #[test]
    fn kernel_values() {
        assert_eq!(gaussian_kernel(&Vector2::zeros()), 1.0);
        assert_eq!(gaussian_kernel(&Vector2::new(1.0, 0.0)), (-0.5f64).exp());
        assert!((gaussian_kernel(&Vector2::new(1.0, 0.0)) - 0.6065).abs() < 1e-4);
        assert_eq!(gaussian_kernel(&Vector2::new(3.0, 4.0)), (-12.5f64).exp());
    }

    #[test]
    fn local_coords_at_center_and_axis() {
        let cam = Camera::unit_square(8, 8);
        let c = cam.ray_origin(3, 5) + Vec3::z() * 1.5;
        let mut g = flat(c, 0.1);
        let u = pixel_local_coords(&g, &cam, 3, 5).unwrap();
        assert!(u.norm() < 1e-15);
        g.center -= Vec3::x() * 0.1;
        let u = pixel_local_coords(&g, &cam, 3, 5).unwrap();
        assert!((u - Vector2::new(1.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn parallel_ray_skipped() {
        let cam = Camera::unit_square(4, 4);
        let mut g = flat(Vec3::new(0.5, 0.5, 0.0), 0.1);
        g.t_v = Vec3::z();
        assert!(pixel_local_coords(&g, &cam, 1, 1).is_none());
    }

    #[test]
    fn local_coords_match_linear_solve() {
        // oracle: solve o + λ·view = p + a·t_u + b·t_v as a 3×3 system
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let cam = Camera::unit_square(16, 16);
        for _ in 0..200 {
            let axis = crate::synthetic::random_direction(&mut rng) * rng.random_range(0.0..1.2);
            let r = Rotation3::new(axis);
            let g = Gaussian2D {
                center: Vec3::new(rng.random(), rng.random(), rng.random_range(-0.5..0.5)),
                t_u: r * Vec3::x(),
                t_v: r * Vec3::y(),
                scale: [rng.random_range(0.05..0.5), rng.random_range(0.05..0.5)],
                ..flat(Vec3::zeros(), 1.0)
            };
            let (i, j) = (rng.random_range(0..16), rng.random_range(0..16));
            let o = cam.ray_origin(i, j);
            let m = Matrix3::from_columns(&[cam.view, -g.t_u, -g.t_v]);
            let sol = m.lu().solve(&(g.center - o)).unwrap();
            let want = Vector2::new(sol[1] / g.scale[0], sol[2] / g.scale[1]);
            let got = pixel_local_coords(&g, &cam, i, j).unwrap();
            assert!((got - want).norm() <= 1e-12 * (1.0 + want.norm()), "{got} {want}");
        }
    }

    #[test]
    fn validation() {
        assert!(flat(Vec3::zeros(), 0.1).validate().is_ok());
        let mut g = flat(Vec3::zeros(), 0.1);
        g.t_v = Vec3::new(0.1, 1.0, 0.0).normalize();
        assert!(g.validate().is_err());
        let mut g = flat(Vec3::zeros(), 0.1);
        g.opacity = 1.5;
        assert!(g.validate().is_err());
        assert!(Camera::unit_square(4, 4).validate().is_ok());
    }

    #[test]
    fn perturbed_rotation_keeps_frame() {
        let g = flat(Vec3::zeros(), 0.1).perturbed(4, 0.3);
        assert!(g.validate().is_ok());
        assert!((g.t_u.dot(&Vec3::z()) + 0.3f64.sin()).abs() < 1e-15);
    }
}
