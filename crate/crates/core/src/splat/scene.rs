use std::fmt::Write;

use super::{Camera, Gaussian2D};
use crate::error::{Error, Result};
use crate::types::Vec3;

/// Splats plus the camera that views them.
#[derive(Debug, Clone, PartialEq)]
pub struct Scene {
    pub camera: Camera,
    pub gaussians: Vec<Gaussian2D>,
}

fn vec3(v: &[f64]) -> Vec3 {
    Vec3::new(v[0], v[1], v[2])
}

/// Parses the line-oriented scene format:
///
/// ```text
/// # comment
/// camera ox oy oz  rx ry rz  ux uy uz  vx vy vz  width height pixel_size
/// gaussian px py pz  tux tuy tuz  tvx tvy tvz  su sv  alpha  r g b  edge  f1 .. fd
/// ```
///
/// The camera line is optional (default: 64×64 over the unit square).
pub fn parse_scene(text: &str) -> Result<Scene> {
    let mut camera = None;
    let mut gaussians = Vec::new();
    let mut dim = None;
    for (ln, line) in text.lines().enumerate() {
        let loc = || format!("line {}", ln + 1);
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let mut tokens = line.split_whitespace();
        let kind = tokens.next().unwrap_or_default();
        let nums: Vec<f64> = tokens
            .map(|t| {
                t.parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| Error::parse(loc(), format!("bad number {t:?}")))
            })
            .collect::<Result<_>>()?;
        match kind {
            "camera" => {
                if nums.len() != 15 {
                    return Err(Error::parse(loc(), format!("camera needs 15 values, got {}", nums.len())));
                }
                let count = |v: f64| {
                    (v >= 1.0 && v.fract() == 0.0)
                        .then_some(v as usize)
                        .ok_or_else(|| Error::parse(loc(), "resolution must be a positive integer"))
                };
                let cam = Camera {
                    origin: vec3(&nums[0..3]),
                    right: vec3(&nums[3..6]),
                    up: vec3(&nums[6..9]),
                    view: vec3(&nums[9..12]),
                    width: count(nums[12])?,
                    height: count(nums[13])?,
                    pixel_size: nums[14],
                };
                cam.validate().map_err(|e| Error::parse(loc(), e.to_string()))?;
                camera = Some(cam);
            }
            "gaussian" => {
                if nums.len() < 17 {
                    return Err(Error::parse(loc(), format!("gaussian needs at least 17 values, got {}", nums.len())));
                }
                let g = Gaussian2D {
                    center: vec3(&nums[0..3]),
                    t_u: vec3(&nums[3..6]),
                    t_v: vec3(&nums[6..9]),
                    scale: [nums[9], nums[10]],
                    opacity: nums[11],
                    color: vec3(&nums[12..15]),
                    edge: nums[15],
                    feature: nums[16..].to_vec(),
                };
                if *dim.get_or_insert(g.feature.len()) != g.feature.len() {
                    return Err(Error::parse(loc(), "feature length differs from earlier gaussians"));
                }
                g.validate().map_err(|e| Error::parse(loc(), e.to_string()))?;
                gaussians.push(g);
            }
            other => return Err(Error::parse(loc(), format!("unknown record {other:?}"))),
        }
    }
    Ok(Scene {
        camera: camera.unwrap_or_else(|| Camera::unit_square(64, 64)),
        gaussians,
    })
}

/// Writes a scene in the format read by [`parse_scene`]; numbers use the
/// shortest representation that parses back exactly.
pub fn write_scene(scene: &Scene) -> String {
    let mut s = String::new();
    let c = &scene.camera;
    let v = |v: &Vec3| format!("{} {} {}", v.x, v.y, v.z);
    let _ = writeln!(
        s,
        "camera {}  {}  {}  {}  {} {} {}",
        v(&c.origin),
        v(&c.right),
        v(&c.up),
        v(&c.view),
        c.width,
        c.height,
        c.pixel_size
    );
    for g in &scene.gaussians {
        let _ = write!(
            s,
            "gaussian {}  {}  {}  {} {}  {}  {}  {} ",
            v(&g.center),
            v(&g.t_u),
            v(&g.t_v),
            g.scale[0],
            g.scale[1],
            g.opacity,
            v(&g.color),
            g.edge
        );
        let f: Vec<String> = g.feature.iter().map(|x| x.to_string()).collect();
        let _ = writeln!(s, " {}", f.join(" "));
    }
    s
}
