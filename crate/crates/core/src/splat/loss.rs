use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{Image, RenderOutput, Stage1LossConfig, TripletConfig};
use crate::error::{Error, Result};

const SSIM_RADIUS: usize = 5;
const SSIM_SIGMA: f64 = 1.5;
const C1: f64 = 0.01 * 0.01;
const C2: f64 = 0.03 * 0.03;

fn window() -> [f64; 2 * SSIM_RADIUS + 1] {
    let mut w = [0.0; 2 * SSIM_RADIUS + 1];
    for (k, v) in w.iter_mut().enumerate() {
        let x = k as f64 - SSIM_RADIUS as f64;
        *v = (-x * x / (2.0 * SSIM_SIGMA * SSIM_SIGMA)).exp();
    }
    let s: f64 = w.iter().sum();
    w.map(|v| v / s)
}

/// Separable Gaussian blur of one plane, zero outside the image.
fn blur(plane: &[f64], width: usize, height: usize) -> Vec<f64> {
    let w = window();
    let r = SSIM_RADIUS as isize;
    let mut tmp = vec![0.0; plane.len()];
    for j in 0..height {
        for i in 0..width {
            let mut acc = 0.0;
            for (k, wk) in w.iter().enumerate() {
                let x = i as isize + k as isize - r;
                if x >= 0 && (x as usize) < width {
                    acc += wk * plane[j * width + x as usize];
                }
            }
            tmp[j * width + i] = acc;
        }
    }
    let mut out = vec![0.0; plane.len()];
    for j in 0..height {
        for i in 0..width {
            let mut acc = 0.0;
            for (k, wk) in w.iter().enumerate() {
                let y = j as isize + k as isize - r;
                if y >= 0 && (y as usize) < height {
                    acc += wk * tmp[y as usize * width + i];
                }
            }
            out[j * width + i] = acc;
        }
    }
    out
}

/// Mean SSIM over all pixels and channels (11×11 Gaussian window, σ = 1.5,
/// zero padding), with its gradient w.r.t. `x` when asked.
fn ssim_impl(x: &Image, y: &Image, want_grad: bool) -> Result<(f64, Option<Image>)> {
    x.same_shape(y)?;
    let (w, h, ch) = (x.width, x.height, x.channels);
    let n = (w * h * ch) as f64;
    if n == 0.0 {
        return Err(Error::EmptyInput);
    }
    let mut total = 0.0;
    let mut grad = want_grad.then(|| Image::zeros(w, h, ch));
    for c in 0..ch {
        let xs: Vec<f64> = (0..w * h).map(|p| x.data[p * ch + c]).collect();
        let ys: Vec<f64> = (0..w * h).map(|p| y.data[p * ch + c]).collect();
        let prod = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(p, q)| p * q).collect::<Vec<_>>();
        let mx = blur(&xs, w, h);
        let my = blur(&ys, w, h);
        let mxx = blur(&prod(&xs, &xs), w, h);
        let myy = blur(&prod(&ys, &ys), w, h);
        let mxy = blur(&prod(&xs, &ys), w, h);
        let (mut ga, mut gb, mut gc) = (vec![0.0; w * h], vec![0.0; w * h], vec![0.0; w * h]);
        for p in 0..w * h {
            let (ux, uy) = (mx[p], my[p]);
            let n1 = 2.0 * ux * uy + C1;
            let n2 = 2.0 * (mxy[p] - ux * uy) + C2;
            let d1 = ux * ux + uy * uy + C1;
            let d2 = (mxx[p] - ux * ux) + (myy[p] - uy * uy) + C2;
            let s = n1 * n2 / (d1 * d2);
            total += s;
            if want_grad {
                ga[p] = s * (2.0 * uy / n1 - 2.0 * uy / n2 - 2.0 * ux / d1 + 2.0 * ux / d2);
                gb[p] = -s / d2;
                gc[p] = 2.0 * s / n2;
            }
        }
        if let Some(g) = grad.as_mut() {
            let (ba, bb, bc) = (blur(&ga, w, h), blur(&gb, w, h), blur(&gc, w, h));
            for p in 0..w * h {
                g.data[p * ch + c] = (ba[p] + 2.0 * xs[p] * bb[p] + ys[p] * bc[p]) / n;
            }
        }
    }
    Ok((total / n, grad))
}

pub fn ssim(x: &Image, y: &Image) -> Result<f64> {
    Ok(ssim_impl(x, y, false)?.0)
}

/// `(1 − λ)·L1 + λ·(1 − SSIM)/2`, L1 the mean absolute difference.
pub fn loss_geo(rendered: &Image, target: &Image, cfg: &Stage1LossConfig) -> Result<f64> {
    rendered.same_shape(target)?;
    let l1 = rendered.data.iter().zip(&target.data).map(|(a, b)| (a - b).abs()).sum::<f64>() / rendered.data.len() as f64;
    let s = if cfg.lambda == 0.0 { 1.0 } else { ssim(rendered, target)? };
    Ok((1.0 - cfg.lambda) * l1 + cfg.lambda * (1.0 - s) / 2.0)
}

/// [`loss_geo`] and its gradient w.r.t. the rendered image. The L1 kink uses
/// a zero subgradient.
pub fn loss_geo_with_grad(rendered: &Image, target: &Image, cfg: &Stage1LossConfig) -> Result<(f64, Image)> {
    rendered.same_shape(target)?;
    let n = rendered.data.len() as f64;
    let (s, sg) = ssim_impl(rendered, target, true)?;
    let mut grad = sg.expect("gradient requested");
    let mut l1 = 0.0;
    for (k, g) in grad.data.iter_mut().enumerate() {
        let diff = rendered.data[k] - target.data[k];
        l1 += diff.abs();
        let sign = if diff > 0.0 {
            1.0
        } else if diff < 0.0 {
            -1.0
        } else {
            0.0
        };
        *g = (1.0 - cfg.lambda) * sign / n - cfg.lambda * 0.5 * *g;
    }
    Ok(((1.0 - cfg.lambda) * l1 / n + cfg.lambda * (1.0 - s) / 2.0, grad))
}

/// Sum of squared differences over the edge set `E = {target ≥ 0.5}`.
pub fn loss_edge(rendered: &Image, target: &Image) -> Result<f64> {
    rendered.same_shape(target)?;
    let mut any = false;
    let mut sum = 0.0;
    for (r, t) in rendered.data.iter().zip(&target.data) {
        if *t >= 0.5 {
            any = true;
            sum += (r - t) * (r - t);
        }
    }
    if !any {
        log::warn!("edge loss: empty edge mask");
    }
    Ok(sum)
}

/// Supervision for the first stage.
#[derive(Debug, Clone, PartialEq)]
pub struct Stage1Targets {
    pub image: Image,
    pub edge: Image,
}

/// `loss_geo + edge_weight · loss_edge`.
pub fn loss_stage1(rendered: &RenderOutput, targets: &Stage1Targets, cfg: &Stage1LossConfig) -> Result<f64> {
    Ok(loss_geo(&rendered.color, &targets.image, cfg)? + cfg.edge_weight * loss_edge(&rendered.edge, &targets.edge)?)
}

/// `1 − â·b̂`.
pub fn cosine_distance(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch(format!("{} vs {}", a.len(), b.len())));
    }
    let (aa, bb) = (dot(a, a), dot(b, b));
    if aa == 0.0 || bb == 0.0 {
        return Err(Error::ZeroVector);
    }
    // sqrt(aa·aa) == aa exactly, so identical vectors give exactly 0
    Ok(1.0 - dot(a, b) / (aa * bb).sqrt())
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn norm(a: &[f64]) -> f64 {
    a.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// A sampled anchor/positive pair and the candidate negatives of its mask
/// (pixel indices).
#[derive(Debug, Clone, PartialEq)]
pub struct Triplet {
    pub anchor: usize,
    pub positive: usize,
    pub negatives: Vec<usize>,
}

/// Samples `triplets_per_mask` triplets for every mask with at least two
/// pixels. Each mask's candidate negatives are up to `negatives_per_mask`
/// pixels from every other non-empty mask, drawn once per mask.
pub fn sample_triplets(masks: &[Vec<usize>], cfg: &TripletConfig, seed: u64) -> Result<Vec<Triplet>> {
    let valid: Vec<usize> = (0..masks.len()).filter(|&k| masks[k].len() >= 2).collect();
    if valid.len() < 2 {
        return Err(Error::TooFewMasks(valid.len()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();
    for &k in &valid {
        let mut negatives = Vec::new();
        for (k2, other) in masks.iter().enumerate() {
            if k2 == k || other.is_empty() {
                continue;
            }
            let take = cfg.negatives_per_mask.min(other.len());
            negatives.extend(index::sample(&mut rng, other.len(), take).into_iter().map(|i| other[i]));
        }
        let m = &masks[k];
        for _ in 0..cfg.triplets_per_mask {
            let a = rng.random_range(0..m.len());
            let mut p = rng.random_range(0..m.len() - 1);
            if p >= a {
                p += 1;
            }
            out.push(Triplet {
                anchor: m[a],
                positive: m[p],
                negatives: negatives.clone(),
            });
        }
    }
    Ok(out)
}

/// Hardest negative (first minimum of the anchor distance) and its distance.
pub(crate) fn hardest_negative(features: &Image, t: &Triplet) -> Result<(usize, f64)> {
    let a = features.pixel(t.anchor);
    let mut best = (usize::MAX, f64::INFINITY);
    for &n in &t.negatives {
        let d = cosine_distance(a, features.pixel(n))?;
        if d < best.1 {
            best = (n, d);
        }
    }
    if best.0 == usize::MAX {
        return Err(Error::TooFewMasks(1));
    }
    Ok(best)
}

/// Mean hinge `max(0, d(a,p) − d(a,n) + m)` over the given triplets.
pub fn triplet_loss_on(features: &Image, triplets: &[Triplet], margin: f64) -> Result<f64> {
    if triplets.is_empty() {
        return Err(Error::TooFewMasks(0));
    }
    // running mean: equal terms give exactly that term
    let mut mean = 0.0;
    for (k, t) in triplets.iter().enumerate() {
        let dap = cosine_distance(features.pixel(t.anchor), features.pixel(t.positive))?;
        let (_, dan) = hardest_negative(features, t)?;
        mean += ((dap - dan + margin).max(0.0) - mean) / (k + 1) as f64;
    }
    Ok(mean)
}

/// Triplet loss on a per-pixel feature image with masks given as pixel lists.
pub fn triplet_loss(features: &Image, masks: &[Vec<usize>], cfg: &TripletConfig, seed: u64) -> Result<f64> {
    let triplets = sample_triplets(masks, cfg, seed)?;
    triplet_loss_on(features, &triplets, cfg.margin)
}
