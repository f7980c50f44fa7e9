use nalgebra::Vector2;
use rayon::prelude::*;

use super::{gaussian_kernel, local_coords_from, Camera, Gaussian2D, Image};
use crate::error::{Error, Result};
use crate::types::Vec3;

/// Contributions with `α·G` below this are skipped.
pub const MIN_CONTRIBUTION: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Channels {
    pub color: bool,
    pub edge: bool,
    pub feature: bool,
}

impl Channels {
    pub fn all() -> Self {
        Channels {
            color: true,
            edge: true,
            feature: true,
        }
    }
}

/// Unselected channels are left as empty images.
#[derive(Debug, Clone, PartialEq)]
pub struct RenderOutput {
    pub color: Image,
    pub edge: Image,
    pub feature: Image,
    /// Accumulated opacity `1 − Π(1 − α_i G_i)`.
    pub alpha: Image,
}

/// Sorts by center depth along the view direction, nearest first (stable).
pub fn sort_front_to_back(gaussians: &mut [Gaussian2D], cam: &Camera) {
    gaussians.sort_by(|a, b| cam.view.dot(&a.center).total_cmp(&cam.view.dot(&b.center)));
}

/// One splat's effect on one pixel.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Hit {
    pub index: usize,
    /// `α·G(u)`
    pub a: f64,
    pub u: Vector2<f64>,
    /// Transmittance in front of this splat.
    pub transmittance: f64,
}

/// Visible contributions at a pixel, in compositing order.
pub(crate) fn pixel_hits(gaussians: &[Gaussian2D], view: &Vec3, origin: &Vec3) -> Vec<Hit> {
    let mut t = 1.0;
    let mut hits = Vec::new();
    for (index, g) in gaussians.iter().enumerate() {
        let Some(u) = local_coords_from(g, view, origin) else { continue };
        let a = g.opacity * gaussian_kernel(&u);
        if a < MIN_CONTRIBUTION {
            continue;
        }
        hits.push(Hit {
            index,
            a,
            u,
            transmittance: t,
        });
        t *= 1.0 - a;
    }
    hits
}

pub(crate) fn feature_dim(gaussians: &[Gaussian2D]) -> Result<usize> {
    let d = gaussians.first().map_or(0, |g| g.feature.len());
    if gaussians.iter().any(|g| g.feature.len() != d) {
        return Err(Error::DimensionMismatch("gaussians have different feature lengths".into()));
    }
    Ok(d)
}

/// Composites the (already depth-sorted) splats: each pixel accumulates
/// `w_i = α_i G_i Π_{j<i}(1 − α_j G_j)` times color, edge value and feature.
pub fn render_channels(gaussians: &[Gaussian2D], cam: &Camera, channels: Channels) -> Result<RenderOutput> {
    let d = feature_dim(gaussians)?;
    let (w, h) = (cam.width, cam.height);
    let dims = |on: bool, c: usize| if on { (w, h, c) } else { (0, 0, c) };
    let per_pixel: Vec<(Vec3, f64, Vec<f64>, f64)> = (0..w * h)
        .into_par_iter()
        .map(|p| {
            let hits = pixel_hits(gaussians, &cam.view, &cam.ray_origin_at(p));
            let mut color = Vec3::zeros();
            let mut edge = 0.0;
            let mut feat = vec![0.0; if channels.feature { d } else { 0 }];
            let mut t = 1.0;
            for hit in &hits {
                let g = &gaussians[hit.index];
                let wgt = hit.a * hit.transmittance;
                color += g.color * wgt;
                edge += g.edge * wgt;
                for (f, gf) in feat.iter_mut().zip(&g.feature) {
                    *f += gf * wgt;
                }
                t *= 1.0 - hit.a;
            }
            (color, edge, feat, 1.0 - t)
        })
        .collect();
    let mk = |(w, h, c): (usize, usize, usize), f: &dyn Fn(usize, usize) -> f64| Image::from_fn(w, h, c, f);
    Ok(RenderOutput {
        color: mk(dims(channels.color, 3), &|p, c| per_pixel[p].0[c]),
        edge: mk(dims(channels.edge, 1), &|p, _| per_pixel[p].1),
        feature: mk(dims(channels.feature, d), &|p, c| per_pixel[p].2[c]),
        alpha: mk((w, h, 1), &|p, _| per_pixel[p].3),
    })
}
