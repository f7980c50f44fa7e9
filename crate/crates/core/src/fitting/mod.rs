//! RANSAC estimation of plane / cylinder / sphere primitives per patch, with
//! least-squares refinement and simplicity-biased model selection.

mod cylinder;
pub(crate) mod lsq;
mod plane;
mod regularize;
mod sphere;

use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::{Aabb, Primitive, Surface, Vec3};

pub use cylinder::{fit_cylinder_ransac, refine_cylinder_fixed_axis};
pub use plane::fit_plane_ransac;
pub use regularize::regularize_directions;
pub use sphere::fit_sphere_ransac;

/// Radius beyond which a cylinder or sphere hypothesis is treated as a plane.
pub const MAX_RADIUS: f64 = 10.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RansacConfig {
    pub max_iterations: usize,
    /// Inlier distance threshold ε.
    pub inlier_threshold: f64,
    pub min_inlier_ratio: f64,
    pub seed: u64,
    /// A simpler primitive wins when its inlier ratio is within this margin of the best.
    pub type_preference_margin: f64,
    /// Plane normals and cylinder axes closer than this angle (degrees) are
    /// snapped to a shared direction before intersection. 0 disables it.
    pub parallel_snap_deg: f64,
}

impl Default for RansacConfig {
    fn default() -> Self {
        RansacConfig {
            max_iterations: 1024,
            inlier_threshold: 0.01,
            min_inlier_ratio: 0.5,
            seed: 0,
            type_preference_margin: 0.02,
            parallel_snap_deg: 2.0,
        }
    }
}

impl RansacConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.inlier_threshold > 0.0) {
            return Err(Error::Config("ransac.inlier_threshold must be > 0".into()));
        }
        if !(self.min_inlier_ratio > 0.0 && self.min_inlier_ratio <= 1.0) {
            return Err(Error::Config("ransac.min_inlier_ratio must be in (0, 1]".into()));
        }
        if self.max_iterations < 1 {
            return Err(Error::Config("ransac.max_iterations must be >= 1".into()));
        }
        if !(self.type_preference_margin >= 0.0) || !(self.parallel_snap_deg >= 0.0) {
            return Err(Error::Config("ransac margins must be non-negative".into()));
        }
        Ok(())
    }

    /// Copy of this config whose seed is mixed with a stream id, so every
    /// patch gets an independent deterministic random stream.
    pub fn for_stream(&self, stream: u64) -> RansacConfig {
        RansacConfig {
            seed: derive_seed(self.seed, stream),
            ..self.clone()
        }
    }
}

/// SplitMix64 finalizer over `seed ^ stream`.
pub fn derive_seed(seed: u64, stream: u64) -> u64 {
    let mut z = seed ^ stream.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(0x6A09_E667_F3BC_C909);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[derive(Debug, Clone, PartialEq)]
pub struct PrimitiveFit {
    pub primitive: Primitive,
    /// Sorted, unique indices into the fitted point slice.
    pub inlier_indices: Vec<usize>,
    /// Unsigned distances of the inliers, all within ε.
    pub residuals: Vec<f64>,
}

impl PrimitiveFit {
    pub fn inlier_ratio(&self, total: usize) -> f64 {
        if total == 0 {
            0.0
        } else {
            self.inlier_indices.len() as f64 / total as f64
        }
    }

    /// Builds a fit from a surface by collecting all points within `eps`.
    pub fn from_surface(surface: Surface, points: &[Vec3], eps: f64) -> PrimitiveFit {
        let mut inlier_indices = Vec::new();
        let mut residuals = Vec::new();
        for (i, p) in points.iter().enumerate() {
            let d = surface.distance(p);
            if d <= eps {
                inlier_indices.push(i);
                residuals.push(d);
            }
        }
        let rms_residual = rms(&residuals);
        PrimitiveFit {
            primitive: Primitive {
                surface: surface.canonical(),
                inlier_count: inlier_indices.len(),
                rms_residual,
            },
            inlier_indices,
            residuals,
        }
    }
}

/// A patch's chosen primitive together with its inlier points.
#[derive(Debug, Clone, PartialEq)]
pub struct FittedPatch {
    pub patch_id: u32,
    pub fit: PrimitiveFit,
    pub inliers: Vec<Vec3>,
    pub bbox: Aabb,
}

impl FittedPatch {
    /// `points` are the patch points the fit's inlier indices refer to.
    pub fn new(patch_id: u32, fit: PrimitiveFit, points: &[Vec3]) -> Self {
        let inliers: Vec<Vec3> = fit.inlier_indices.iter().map(|&i| points[i]).collect();
        let bbox = Aabb::from_points(&inliers);
        FittedPatch {
            patch_id,
            fit,
            inliers,
            bbox,
        }
    }

    pub fn surface(&self) -> &Surface {
        &self.fit.primitive.surface
    }

    pub fn centroid(&self) -> Vec3 {
        if self.inliers.is_empty() {
            return Vec3::zeros();
        }
        self.inliers.iter().sum::<Vec3>() / self.inliers.len() as f64
    }
}

pub(crate) fn rms(values: &[f64]) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    (values.iter().map(|v| v * v).sum::<f64>() / values.len() as f64).sqrt()
}

#[cfg(test)]
pub(crate) fn rms_on(surface: &Surface, points: &[Vec3], indices: &[usize]) -> f64 {
    let r: Vec<f64> = indices.iter().map(|&i| surface.distance(&points[i])).collect();
    rms(&r)
}

fn count_inliers(surface: &Surface, points: &[Vec3], eps: f64) -> usize {
    points.iter().filter(|p| surface.distance(p) <= eps).count()
}

/// Outcome of the hypothesis loop before refinement.
pub(crate) struct Consensus {
    pub surface: Surface,
    pub inliers: Vec<usize>,
}

/// Samples `sample_size` distinct indices per iteration, scores every valid
/// hypothesis by inlier count and keeps the first best one. The sequence of
/// sampled indices depends only on `(n, cfg.seed)`.
pub(crate) fn consensus(
    points: &[Vec3],
    sample_size: usize,
    cfg: &RansacConfig,
    mut hypothesize: impl FnMut(&[usize]) -> Option<Surface>,
) -> Option<Consensus> {
    let n = points.len();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut best: Option<(Surface, usize)> = None;
    let mut sample = vec![0usize; sample_size];
    for _ in 0..cfg.max_iterations {
        for (slot, i) in sample.iter_mut().zip(index::sample(&mut rng, n, sample_size)) {
            *slot = i;
        }
        let Some(surface) = hypothesize(&sample) else { continue };
        let count = count_inliers(&surface, points, cfg.inlier_threshold);
        if best.as_ref().is_none_or(|(_, c)| count > *c) {
            best = Some((surface, count));
            if count == n {
                break;
            }
        }
    }
    best.map(|(surface, _)| Consensus {
        inliers: inlier_set(&surface, points, cfg.inlier_threshold),
        surface,
    })
}

pub(crate) fn inlier_set(surface: &Surface, points: &[Vec3], eps: f64) -> Vec<usize> {
    (0..points.len())
        .filter(|&i| surface.distance(&points[i]) <= eps)
        .collect()
}

/// Least-squares refit of a RANSAC hypothesis. The inliers of a slightly-off
/// hypothesis cut the noise band asymmetrically, which biases a single refit,
/// so inliers are re-selected around each refit until the set settles.
pub(crate) fn refit(
    hypothesis: &Consensus,
    points: &[Vec3],
    eps: f64,
    min_points: usize,
    mut refine: impl FnMut(&[usize], &Surface) -> Option<Surface>,
) -> Surface {
    let mut surface = hypothesis.surface;
    let mut inliers = hypothesis.inliers.clone();
    for _ in 0..REFIT_ROUNDS {
        let Some(next) = refine(&inliers, &surface) else { break };
        surface = next;
        let selected = inlier_set(&surface, points, eps);
        if selected == inliers || selected.len() < min_points {
            break;
        }
        inliers = selected;
    }
    surface
}

const REFIT_ROUNDS: usize = 5;

/// The refined surface with its own inlier set. The least-squares refit may
/// hold a few points fewer within ε than the raw hypothesis (which maximized
/// that count); it is kept regardless, being the better estimate.
pub(crate) fn finalize(refined: Surface, points: &[Vec3], eps: f64) -> PrimitiveFit {
    PrimitiveFit::from_surface(refined, points, eps)
}

/// Runs all three fitters and picks the highest inlier ratio, preferring
/// Plane over Cylinder over Sphere when within the preference margin.
pub fn select_primitive(points: &[Vec3], normals: &[Vec3], cfg: &RansacConfig) -> Result<PrimitiveFit> {
    cfg.validate()?;
    if points.len() < 4 {
        return Err(Error::TooFewPoints {
            needed: 4,
            got: points.len(),
        });
    }
    let n = points.len();
    let candidates = [
        fit_plane_ransac(points, &cfg.for_stream(0)).ok(),
        fit_cylinder_ransac(points, Some(normals), &cfg.for_stream(1)).ok(),
        fit_sphere_ransac(points, &cfg.for_stream(2)).ok(),
    ];
    let ratios: Vec<f64> = candidates
        .iter()
        .map(|c| c.as_ref().map_or(0.0, |f| f.inlier_ratio(n)))
        .collect();
    let best = ratios.iter().cloned().fold(0.0, f64::max);
    if best < cfg.min_inlier_ratio {
        return Err(Error::UnfittablePatch {
            best,
            required: cfg.min_inlier_ratio,
        });
    }
    let chosen = (0..3)
        .find(|&k| candidates[k].is_some() && ratios[k] >= best - cfg.type_preference_margin)
        .expect("the best candidate always qualifies");
    Ok(candidates[chosen].clone().unwrap())
}
