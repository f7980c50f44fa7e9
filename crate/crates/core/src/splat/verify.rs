//! Self-checks of the splat renderer, losses and gradients, plus the scene
//! generators and oracles they use.

use std::ops::Range;

use nalgebra::{Matrix3, Rotation3, Vector2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::Serialize;

use super::*;
use crate::synthetic::random_direction;

/// Outcome of one check; `error` is the measured deviation.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckResult {
    pub name: String,
    pub passed: bool,
    pub error: f64,
    pub tolerance: f64,
}

impl CheckResult {
    fn new(name: &str, error: f64, tolerance: f64) -> Self {
        CheckResult {
            name: name.to_string(),
            passed: error <= tolerance,
            error,
            tolerance,
        }
    }
}

/// Per-pixel compositing written directly from the definitions: the ray–plane
/// hit is solved as a 3×3 linear system.
pub fn naive_render(gaussians: &[Gaussian2D], cam: &Camera) -> RenderOutput {
    let d = gaussians.first().map_or(0, |g| g.feature.len());
    let (w, h) = (cam.width, cam.height);
    let mut color = Image::zeros(w, h, 3);
    let mut edge = Image::zeros(w, h, 1);
    let mut feature = Image::zeros(w, h, d);
    let mut alpha = Image::zeros(w, h, 1);
    for j in 0..h {
        for i in 0..w {
            let p = j * w + i;
            let o = cam.ray_origin(i, j);
            let mut t = 1.0;
            for g in gaussians {
                let m = Matrix3::from_columns(&[cam.view, -g.t_u, -g.t_v]);
                let Some(x) = m.lu().solve(&(g.center - o)) else { continue };
                let (u, v) = (x[1] / g.scale[0], x[2] / g.scale[1]);
                let a = g.opacity * (-(u * u + v * v) / 2.0).exp();
                if a < 1e-4 {
                    continue;
                }
                for c in 0..3 {
                    color.data[3 * p + c] += t * a * g.color[c];
                }
                edge.data[p] += t * a * g.edge;
                for c in 0..d {
                    feature.data[d * p + c] += t * a * g.feature[c];
                }
                t *= 1.0 - a;
            }
            alpha.data[p] = 1.0 - t;
        }
    }
    RenderOutput {
        color,
        edge,
        feature,
        alpha,
    }
}

fn random_frame(rng: &mut ChaCha8Rng, min_facing: f64) -> (Vec3, Vec3) {
    loop {
        let r = Rotation3::new(random_direction(rng) * rng.random_range(0.0..std::f64::consts::PI));
        let (tu, tv) = (r * Vec3::x(), r * Vec3::y());
        if tu.cross(&tv).z.abs() >= min_facing {
            return (tu, tv);
        }
    }
}

fn random_gaussian(rng: &mut ChaCha8Rng, d: usize, xy: Range<f64>, scale: Range<f64>, min_facing: f64) -> Gaussian2D {
    let (t_u, t_v) = random_frame(rng, min_facing);
    Gaussian2D {
        center: Vec3::new(rng.random_range(xy.clone()), rng.random_range(xy), rng.random_range(-0.5..0.5)),
        t_u,
        t_v,
        scale: [rng.random_range(scale.clone()), rng.random_range(scale)],
        opacity: rng.random_range(0.2..0.95),
        color: Vec3::new(rng.random(), rng.random(), rng.random()),
        edge: rng.random(),
        feature: (0..d).map(|_| StandardNormal.sample(rng)).collect(),
    }
}

/// Random splats over the unit square (unsorted).
pub fn random_scene(rng: &mut ChaCha8Rng, n: usize, d: usize, scale: Range<f64>) -> Vec<Gaussian2D> {
    (0..n)
        .map(|_| random_gaussian(rng, d, 0.1..0.9, scale.clone(), 0.3))
        .collect()
}

/// Depth-sorted splats for gradient checks. They are wide and face the
/// camera, so every pixel sees every splat well above the contribution
/// cut-off; small parameter steps then never switch a contribution on or off.
pub fn gradient_scene(rng: &mut ChaCha8Rng, n: usize, d: usize, resolution: usize) -> (Vec<Gaussian2D>, Camera) {
    let cam = Camera::unit_square(resolution, resolution);
    let mut gs: Vec<Gaussian2D> = (0..n)
        .map(|_| {
            let mut g = random_gaussian(rng, d, 0.3..0.7, 0.5..0.9, 0.8);
            g.opacity = rng.random_range(0.3..0.9);
            g.color = Vec3::new(rng.random_range(0.1..0.9), rng.random_range(0.1..0.9), rng.random_range(0.1..0.9));
            g.edge = rng.random_range(0.1..0.9);
            g
        })
        .collect();
    sort_front_to_back(&mut gs, &cam);
    (gs, cam)
}

/// Targets whose colors differ from the current render by 0.1–0.3 per
/// channel, keeping the L1 term away from its kink, and a random edge mask.
pub fn stage1_targets_for(rng: &mut ChaCha8Rng, gaussians: &[Gaussian2D], cam: &Camera) -> Stage1Targets {
    let out = render_channels(gaussians, cam, Channels::all()).expect("consistent scene");
    let mut image = out.color.clone();
    for v in &mut image.data {
        let off = rng.random_range(0.1..0.3);
        *v += if rng.random::<bool>() { off } else { -off };
    }
    let edge = Image::from_fn(cam.width, cam.height, 1, |_, _| {
        if rng.random::<f64>() < 0.3 {
            rng.random_range(0.5..1.0)
        } else {
            0.0
        }
    });
    Stage1Targets { image, edge }
}

/// Pixel index lists of the four image quadrants.
pub fn quadrant_masks(cam: &Camera) -> Vec<Vec<usize>> {
    let (w, h) = (cam.width, cam.height);
    let mut m = vec![Vec::new(); 4];
    for p in 0..w * h {
        let (i, j) = (p % w, p / w);
        m[(i >= w / 2) as usize + 2 * (j >= h / 2) as usize].push(p);
    }
    m
}

/// Drops triplets sitting within `min_gap` of a kink of the loss: a tie for
/// the hardest negative, or a hinge at zero. Finite differences across a
/// kink do not estimate the derivative.
pub fn unambiguous_triplets(features: &Image, triplets: &[Triplet], margin: f64, min_gap: f64) -> Result<Vec<Triplet>> {
    let mut out = Vec::new();
    for t in triplets {
        let a = features.pixel(t.anchor);
        let mut ds = t
            .negatives
            .iter()
            .map(|&n| cosine_distance(a, features.pixel(n)))
            .collect::<Result<Vec<f64>>>()?;
        ds.sort_by(f64::total_cmp);
        let tie = ds.windows(2).next().is_some_and(|w| w[1] - w[0] < min_gap);
        let hinge = cosine_distance(a, features.pixel(t.positive))? - ds[0] + margin;
        if !tie && hinge.abs() >= min_gap {
            out.push(t.clone());
        }
    }
    Ok(out)
}

/// Largest disagreement between analytic and central-difference gradients.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GradientCheck {
    /// Largest relative error among entries whose absolute error exceeds 1e-8.
    pub max_relative_error: f64,
    pub max_absolute_error: f64,
    /// (gaussian, parameter, analytic, numeric) of the worst entry.
    pub worst: Option<(usize, usize, f64, f64)>,
    pub checked: usize,
}

impl GradientCheck {
    pub const RELATIVE_TOL: f64 = 1e-4;
    pub const ABSOLUTE_TOL: f64 = 1e-8;

    pub fn passed(&self) -> bool {
        self.max_relative_error < Self::RELATIVE_TOL
    }
}

/// Central differences with step `h` on every parameter of every splat.
pub fn max_gradient_error(
    gaussians: &[Gaussian2D],
    grads: &[GaussianGrad],
    h: f64,
    f: impl Fn(&[Gaussian2D]) -> f64,
) -> GradientCheck {
    let mut out = GradientCheck {
        max_relative_error: 0.0,
        max_absolute_error: 0.0,
        worst: None,
        checked: 0,
    };
    let mut scene = gaussians.to_vec();
    for (gi, g) in gaussians.iter().enumerate() {
        let analytic = grads[gi].to_vec();
        for (k, a) in analytic.iter().enumerate() {
            scene[gi] = g.perturbed(k, h);
            let fp = f(&scene);
            scene[gi] = g.perturbed(k, -h);
            let fm = f(&scene);
            scene[gi] = g.clone();
            let numeric = (fp - fm) / (2.0 * h);
            let abs = (a - numeric).abs();
            out.checked += 1;
            out.max_absolute_error = out.max_absolute_error.max(abs);
            if abs <= GradientCheck::ABSOLUTE_TOL {
                continue;
            }
            let rel = abs / a.abs().max(numeric.abs());
            if rel > out.max_relative_error {
                out.max_relative_error = rel;
                out.worst = Some((gi, k, *a, numeric));
            }
        }
    }
    out
}

fn max_abs_diff(a: &Image, b: &Image) -> f64 {
    if a.same_shape(b).is_err() {
        return f64::INFINITY;
    }
    a.data.iter().zip(&b.data).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// Configuration of the splat self-check suite.
#[derive(Debug, Clone, PartialEq)]
pub struct SuiteConfig {
    pub loss: Stage1LossConfig,
    pub triplet: TripletConfig,
    pub sampling: SamplingConfig,
    /// Randomized gradient scenes (in addition to the given scene).
    pub gradient_scenes: usize,
    pub seed: u64,
}

impl Default for SuiteConfig {
    fn default() -> Self {
        SuiteConfig {
            loss: Stage1LossConfig::default(),
            triplet: TripletConfig::default(),
            sampling: SamplingConfig::default(),
            gradient_scenes: 4,
            seed: 0,
        }
    }
}

fn gradient_checks(gs: &[Gaussian2D], cam: &Camera, cfg: &SuiteConfig, rng: &mut ChaCha8Rng) -> Result<(GradientCheck, GradientCheck)> {
    let targets = stage1_targets_for(rng, gs, cam);
    let (_, grads) = stage1_loss_and_grad(gs, cam, &targets, &cfg.loss)?;
    let stage1 = max_gradient_error(gs, &grads, 1e-4, |s| {
        render_channels(s, cam, Channels::all())
            .and_then(|o| loss_stage1(&o, &targets, &cfg.loss))
            .unwrap_or(f64::NAN)
    });
    let ts = sample_triplets(&quadrant_masks(cam), &cfg.triplet, rng.random())?;
    let feats = render_channels(gs, cam, Channels::all())?.feature;
    let ts = unambiguous_triplets(&feats, &ts, cfg.triplet.margin, 1e-5)?;
    let (_, grads) = triplet_loss_and_grad(gs, cam, &ts, cfg.triplet.margin)?;
    let triplet = max_gradient_error(gs, &grads, 1e-4, |s| {
        render_channels(s, cam, Channels::all())
            .and_then(|o| triplet_loss_on(&o.feature, &ts, cfg.triplet.margin))
            .unwrap_or(f64::NAN)
    });
    Ok((stage1, triplet))
}

/// Runs every check against `scene` plus freshly generated oracle scenes.
pub fn run_suite(scene: &Scene, cfg: &SuiteConfig) -> Result<Vec<CheckResult>> {
    scene.camera.validate()?;
    for g in &scene.gaussians {
        g.validate()?;
    }
    let cam = &scene.camera;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut out = Vec::new();

    let k = [
        (gaussian_kernel(&Vector2::zeros()) - 1.0).abs(),
        (gaussian_kernel(&Vector2::new(1.0, 0.0)) - (-0.5f64).exp()).abs(),
        (gaussian_kernel(&Vector2::new(3.0, 4.0)) - (-12.5f64).exp()).abs(),
    ];
    out.push(CheckResult::new("kernel values", k.iter().copied().fold(0.0, f64::max), 0.0));

    // ray–splat mapping against a linear solve
    let mut err: f64 = 0.0;
    for g in &scene.gaussians {
        for idx in (0..cam.pixel_count()).step_by((cam.pixel_count() / 64).max(1)) {
            let o = cam.ray_origin_at(idx);
            let Some(u) = local_coords_from(g, &cam.view, &o) else { continue };
            let m = Matrix3::from_columns(&[cam.view, -g.t_u, -g.t_v]);
            if let Some(x) = m.lu().solve(&(g.center - o)) {
                let want = Vector2::new(x[1] / g.scale[0], x[2] / g.scale[1]);
                err = err.max((u - want).norm() / (1.0 + want.norm()));
            }
        }
    }
    out.push(CheckResult::new("pixel coordinates vs plane intersection", err, 1e-12));

    let mut sorted = scene.gaussians.clone();
    sort_front_to_back(&mut sorted, cam);
    let fast = render_channels(&sorted, cam, Channels::all())?;
    let slow = naive_render(&sorted, cam);
    let err = [
        max_abs_diff(&fast.color, &slow.color),
        max_abs_diff(&fast.edge, &slow.edge),
        max_abs_diff(&fast.feature, &slow.feature),
    ]
    .into_iter()
    .fold(0.0, f64::max);
    out.push(CheckResult::new("render vs naive compositing (scene)", err, 1e-10));

    let mut err: f64 = 0.0;
    for _ in 0..3 {
        let rcam = Camera::unit_square(64, 64);
        let mut gs = random_scene(&mut rng, 10, 4, 0.03..0.3);
        sort_front_to_back(&mut gs, &rcam);
        let a = render_channels(&gs, &rcam, Channels::all())?;
        let b = naive_render(&gs, &rcam);
        err = err
            .max(max_abs_diff(&a.color, &b.color))
            .max(max_abs_diff(&a.edge, &b.edge))
            .max(max_abs_diff(&a.feature, &b.feature));
    }
    out.push(CheckResult::new("render vs naive compositing (random 10-splat)", err, 1e-10));

    let outside = fast.edge.data.iter().map(|e| (e - e.clamp(0.0, 1.0)).abs()).fold(0.0, f64::max);
    out.push(CheckResult::new("edge map within [0, 1]", outside, 0.0));

    let mut err: f64 = 0.0;
    for g in scene.gaussians.iter().take(8) {
        let one_cam = Camera::unit_square(3, 3);
        let mut single = g.clone();
        single.opacity = 1.0;
        single.center = one_cam.ray_origin(1, 1) + one_cam.view;
        let o = render_channels(std::slice::from_ref(&single), &one_cam, Channels::all())?;
        let diff = (o.color.pixel(4).iter().zip(single.color.iter()))
            .chain(o.edge.pixel(4).iter().zip(std::iter::once(&single.edge)))
            .chain(o.feature.pixel(4).iter().zip(&single.feature))
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        err = err.max(diff);
    }
    out.push(CheckResult::new("single opaque splat reproduces attributes", err, 0.0));

    let img = fast.color.clone();
    let shifted = Image {
        data: img.data.iter().map(|v| v + 0.1).collect(),
        ..img.clone()
    };
    let pure_l1 = Stage1LossConfig {
        lambda: 0.0,
        ..cfg.loss.clone()
    };
    let err = loss_geo(&img, &img, &cfg.loss)?.abs().max((loss_geo(&img, &shifted, &pure_l1)? - 0.1).abs());
    out.push(CheckResult::new("geometry loss identities", err, 1e-12));

    let targets = stage1_targets_for(&mut rng, &sorted, cam);
    let parts = loss_geo(&fast.color, &targets.image, &cfg.loss)? + 0.1 * loss_edge(&fast.edge, &targets.edge)?;
    let weighted = Stage1LossConfig {
        edge_weight: 0.1,
        ..cfg.loss.clone()
    };
    let err = (loss_stage1(&fast, &targets, &weighted)? - parts).abs();
    out.push(CheckResult::new("stage-1 loss = geo + 0.1·edge", err, 1e-12));

    let masks = quadrant_masks(cam);
    let separated = Image::from_fn(cam.width, cam.height, 4, |p, c| {
        if masks[c].binary_search(&p).is_ok() {
            1.0
        } else {
            0.0
        }
    });
    let constant = Image::from_fn(cam.width, cam.height, 4, |_, c| 1.0 + c as f64);
    let tri_seed = rng.random();
    let sep = triplet_loss(&separated, &masks, &cfg.triplet, tri_seed)?;
    out.push(CheckResult::new("triplet loss on separated features", sep.abs(), 0.0));
    let con = triplet_loss(&constant, &masks, &cfg.triplet, tri_seed)?;
    out.push(CheckResult::new("triplet loss on constant features", (con - cfg.triplet.margin).abs(), 0.0));

    let mut err: f64 = 0.0;
    for _ in 0..100 {
        let a: Vec<f64> = (0..8).map(|_| StandardNormal.sample(&mut rng)).collect();
        let b: Vec<f64> = (0..8).map(|_| StandardNormal.sample(&mut rng)).collect();
        let beta = rng.random_range(0.1..10.0);
        let ab = cosine_distance(&a, &b)?;
        let scaled: Vec<f64> = a.iter().map(|v| v * beta).collect();
        err = err
            .max((ab - cosine_distance(&b, &a)?).abs())
            .max((ab - cosine_distance(&scaled, &b)?).abs())
            .max((ab - ab.clamp(0.0, 2.0)).abs());
    }
    out.push(CheckResult::new("cosine distance symmetry, scale invariance, range", err, 1e-14));

    // zero-loss configuration
    let (zgs, zcam) = gradient_scene(&mut rng, 5, 4, 16);
    let zo = render_channels(&zgs, &zcam, Channels::all())?;
    let ztargets = Stage1Targets {
        image: zo.color.clone(),
        edge: zo.edge.clone(),
    };
    let (_, zg) = stage1_loss_and_grad(&zgs, &zcam, &ztargets, &cfg.loss)?;
    let zmax = zg.iter().flat_map(|g| g.to_vec()).map(f64::abs).fold(0.0, f64::max);
    out.push(CheckResult::new("zero loss has zero gradient", zmax, 1e-12));

    // gradients on the given scene and on random wide-splat scenes
    if !sorted.is_empty() {
        let (s1, tr) = gradient_checks(&sorted, cam, cfg, &mut rng)?;
        out.push(CheckResult::new("stage-1 gradient vs central differences (scene)", s1.max_relative_error, 1e-4));
        out.push(CheckResult::new("triplet gradient vs central differences (scene)", tr.max_relative_error, 1e-4));
    }
    let (mut s1_err, mut tr_err) = (0.0f64, 0.0f64);
    for _ in 0..cfg.gradient_scenes {
        let (gs, gcam) = gradient_scene(&mut rng, 5, 16, 16);
        let (s1, tr) = gradient_checks(&gs, &gcam, cfg, &mut rng)?;
        s1_err = s1_err.max(s1.max_relative_error);
        tr_err = tr_err.max(tr.max_relative_error);
    }
    if cfg.gradient_scenes > 0 {
        out.push(CheckResult::new("stage-1 gradient vs central differences (random)", s1_err, 1e-4));
        out.push(CheckResult::new("triplet gradient vs central differences (random)", tr_err, 1e-4));
    }

    let pts = sample_gaussians_to_points(&scene.gaussians, &cfg.sampling);
    let want: usize = scene
        .gaussians
        .iter()
        .map(|g| {
            if g.scale[0].max(g.scale[1]) / g.scale[0].min(g.scale[1]) <= cfg.sampling.elongation_threshold {
                5
            } else {
                1
            }
        })
        .sum();
    out.push(CheckResult::new(
        "center plus four ellipse points per round splat",
        (pts.len() as f64 - want as f64).abs(),
        0.0,
    ));
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn suite_passes_on_random_scene() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let (gaussians, camera) = gradient_scene(&mut rng, 4, 4, 16);
        let scene = Scene { camera, gaussians };
        let cfg = SuiteConfig {
            gradient_scenes: 1,
            ..Default::default()
        };
        for r in run_suite(&scene, &cfg).unwrap() {
            assert!(r.passed, "{r:?}");
        }
    }
}
