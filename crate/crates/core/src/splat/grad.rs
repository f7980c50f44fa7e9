use rayon::prelude::*;

use super::loss::{cosine_distance, hardest_negative, loss_edge, loss_geo_with_grad, norm};
use super::render::{feature_dim, pixel_hits};
use super::{render_channels, Camera, Channels, Gaussian2D, Image, Stage1LossConfig, Stage1Targets, Triplet};
use crate::error::Result;
use crate::types::Vec3;

/// Loss gradient for one Gaussian. `rotation` is w.r.t. an infinitesimal
/// axis-angle rotation of the tangent frame.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianGrad {
    pub center: Vec3,
    pub rotation: Vec3,
    pub scale: [f64; 2],
    pub opacity: f64,
    pub color: Vec3,
    pub edge: f64,
    pub feature: Vec<f64>,
}

impl GaussianGrad {
    pub fn zeros(d: usize) -> Self {
        GaussianGrad {
            center: Vec3::zeros(),
            rotation: Vec3::zeros(),
            scale: [0.0; 2],
            opacity: 0.0,
            color: Vec3::zeros(),
            edge: 0.0,
            feature: vec![0.0; d],
        }
    }

    /// Flattened in the order of [`Gaussian2D::perturbed`].
    pub fn to_vec(&self) -> Vec<f64> {
        let mut v: Vec<f64> = self.center.iter().chain(self.rotation.iter()).copied().collect();
        v.extend(self.scale);
        v.push(self.opacity);
        v.extend(self.color.iter());
        v.push(self.edge);
        v.extend(&self.feature);
        v
    }

    fn add(&mut self, o: &GaussianGrad) {
        self.center += o.center;
        self.rotation += o.rotation;
        self.scale[0] += o.scale[0];
        self.scale[1] += o.scale[1];
        self.opacity += o.opacity;
        self.color += o.color;
        self.edge += o.edge;
        for (a, b) in self.feature.iter_mut().zip(&o.feature) {
            *a += b;
        }
    }
}

/// Loss gradients w.r.t. the rendered channels. Empty images count as zero.
#[derive(Debug, Clone, PartialEq)]
pub struct PixelGrads {
    pub color: Image,
    pub edge: Image,
    pub feature: Image,
}

fn value_or_zero(img: &Image, p: usize, c: usize) -> f64 {
    if img.data.is_empty() {
        0.0
    } else {
        img.data[p * img.channels + c]
    }
}

/// Reverse pass through the compositing: per pixel, back to front, then
/// through the kernel and the ray–plane mapping. Rows are reduced in order,
/// so the result does not depend on the thread count.
pub fn backward(gaussians: &[Gaussian2D], cam: &Camera, pg: &PixelGrads) -> Result<Vec<GaussianGrad>> {
    let d = feature_dim(gaussians)?;
    let n = gaussians.len();
    let rows: Vec<Vec<GaussianGrad>> = (0..cam.height)
        .into_par_iter()
        .map(|j| {
            let mut acc = vec![GaussianGrad::zeros(d); n];
            for i in 0..cam.width {
                let p = j * cam.width + i;
                pixel_backward(gaussians, cam, pg, p, d, &mut acc);
            }
            acc
        })
        .collect();
    let mut total = vec![GaussianGrad::zeros(d); n];
    for row in &rows {
        for (t, r) in total.iter_mut().zip(row) {
            t.add(r);
        }
    }
    Ok(total)
}

fn pixel_backward(gaussians: &[Gaussian2D], cam: &Camera, pg: &PixelGrads, p: usize, d: usize, acc: &mut [GaussianGrad]) {
    let view = cam.view;
    let hits = pixel_hits(gaussians, &view, &cam.ray_origin_at(p));
    if hits.is_empty() {
        return;
    }
    let dc = Vec3::new(
        value_or_zero(&pg.color, p, 0),
        value_or_zero(&pg.color, p, 1),
        value_or_zero(&pg.color, p, 2),
    );
    let de = value_or_zero(&pg.edge, p, 0);
    let df: Vec<f64> = (0..d).map(|c| value_or_zero(&pg.feature, p, c)).collect();

    // dL/dw_i
    let gw: Vec<f64> = hits
        .iter()
        .map(|h| {
            let g = &gaussians[h.index];
            dc.dot(&g.color) + de * g.edge + df.iter().zip(&g.feature).map(|(a, b)| a * b).sum::<f64>()
        })
        .collect();
    let mut behind = 0.0;
    for (k, h) in hits.iter().enumerate().rev() {
        let g = &gaussians[h.index];
        let out = &mut acc[h.index];
        let w = h.a * h.transmittance;
        out.color += dc * w;
        out.edge += de * w;
        for (o, v) in out.feature.iter_mut().zip(&df) {
            *o += v * w;
        }
        let da = h.transmittance * (gw[k] - behind);
        behind = gw[k] * h.a + (1.0 - h.a) * behind;

        // a = α·G(u), ∂G/∂u = −G·u
        let kernel = h.a / g.opacity;
        out.opacity += da * kernel;
        let du = [-da * h.a * h.u.x, -da * h.a * h.u.y];

        let nrm = g.normal();
        let nv = nrm.dot(&view);
        let r = g.t_u * (h.u.x * g.scale[0]) + g.t_v * (h.u.y * g.scale[1]);
        for (axis, t, s, uk) in [(0, g.t_u, g.scale[0], h.u.x), (1, g.t_v, g.scale[1], h.u.y)] {
            let tv = t.dot(&view) / nv;
            out.center += (nrm * tv - t) * (du[axis] / s);
            out.rotation += (t.cross(&r) - nrm.cross(&r) * tv) * (du[axis] / s);
            out.scale[axis] -= du[axis] * uk / s;
        }
    }
}

/// Stage-one loss of the rendered scene and its gradient.
pub fn stage1_loss_and_grad(
    gaussians: &[Gaussian2D],
    cam: &Camera,
    targets: &Stage1Targets,
    cfg: &Stage1LossConfig,
) -> Result<(f64, Vec<GaussianGrad>)> {
    let out = render_channels(
        gaussians,
        cam,
        Channels {
            color: true,
            edge: true,
            feature: false,
        },
    )?;
    let (geo, color_grad) = loss_geo_with_grad(&out.color, &targets.image, cfg)?;
    let edge = loss_edge(&out.edge, &targets.edge)?;
    let edge_grad = Image::from_fn(cam.width, cam.height, 1, |p, _| {
        let t = targets.edge.data[p];
        if t >= 0.5 {
            cfg.edge_weight * 2.0 * (out.edge.data[p] - t)
        } else {
            0.0
        }
    });
    let pg = PixelGrads {
        color: color_grad,
        edge: edge_grad,
        feature: Image::zeros(0, 0, 0),
    };
    Ok((geo + cfg.edge_weight * edge, backward(gaussians, cam, &pg)?))
}

/// `∂d(a, b)/∂a` for the cosine distance.
fn cosine_grad(a: &[f64], b: &[f64]) -> Vec<f64> {
    let (na, nb) = (norm(a), norm(b));
    let c: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>() / (na * nb);
    a.iter().zip(b).map(|(x, y)| -(y / nb - c * x / na) / na).collect()
}

/// Triplet loss of the rendered feature map over fixed sampled triplets, and
/// its gradient.
pub fn triplet_loss_and_grad(
    gaussians: &[Gaussian2D],
    cam: &Camera,
    triplets: &[Triplet],
    margin: f64,
) -> Result<(f64, Vec<GaussianGrad>)> {
    let out = render_channels(
        gaussians,
        cam,
        Channels {
            color: false,
            edge: false,
            feature: true,
        },
    )?;
    let f = &out.feature;
    let mut fg = Image::zeros(f.width, f.height, f.channels);
    let scale = 1.0 / triplets.len().max(1) as f64;
    let mut loss = 0.0;
    for (k, t) in triplets.iter().enumerate() {
        let dap = cosine_distance(f.pixel(t.anchor), f.pixel(t.positive))?;
        let (neg, dan) = hardest_negative(f, t)?;
        let hinge = (dap - dan + margin).max(0.0);
        loss += (hinge - loss) / (k + 1) as f64;
        if hinge == 0.0 {
            continue;
        }
        let (a, p, n) = (f.pixel(t.anchor), f.pixel(t.positive), f.pixel(neg));
        let terms = [
            (t.anchor, cosine_grad(a, p), scale),
            (t.positive, cosine_grad(p, a), scale),
            (t.anchor, cosine_grad(a, n), -scale),
            (neg, cosine_grad(n, a), -scale),
        ];
        for (pix, g, s) in terms {
            for (o, v) in fg.pixel_mut(pix).iter_mut().zip(g) {
                *o += s * v;
            }
        }
    }
    let pg = PixelGrads {
        color: Image::zeros(0, 0, 0),
        edge: Image::zeros(0, 0, 0),
        feature: fg,
    };
    if triplets.is_empty() {
        return Err(crate::error::Error::TooFewMasks(0));
    }
    Ok((loss, backward(gaussians, cam, &pg)?))
}
