//! Triangulated previews of B-rep models, written as Wavefront OBJ.

use std::collections::HashMap;
use std::f64::consts::{PI, TAU};
use std::io::Write;

use super::fmt_f64;
use crate::chart::Uv;
use crate::error::Result;
use crate::region::FaceRegion;
use crate::types::{BRepModel, Surface, Vec3};

/// Samples per edge polyline.
const EDGE_POLYLINE: usize = 64;

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Mesh {
    pub vertices: Vec<Vec3>,
    pub triangles: Vec<[usize; 3]>,
    /// Face index of each triangle.
    pub triangle_face: Vec<usize>,
    /// Edge polylines as vertex indices, one per model edge.
    pub polylines: Vec<Vec<usize>>,
}

impl Mesh {
    pub fn area(&self) -> f64 {
        self.triangles
            .iter()
            .map(|t| 0.5 * (self.vertices[t[1]] - self.vertices[t[0]]).cross(&(self.vertices[t[2]] - self.vertices[t[0]])).norm())
            .sum()
    }
}

/// Grid with lazily created vertices, so trimmed-away cells leave no
/// orphan vertices behind.
struct Grid<'a> {
    mesh: &'a mut Mesh,
    ids: HashMap<(usize, usize), usize>,
}

impl Grid<'_> {
    fn vertex(&mut self, key: (usize, usize), p: impl FnOnce() -> Vec3) -> usize {
        *self.ids.entry(key).or_insert_with(|| {
            self.mesh.vertices.push(p());
            self.mesh.vertices.len() - 1
        })
    }
}

fn full_sphere(mesh: &mut Mesh, face: usize, center: Vec3, radius: f64, density: usize) {
    let (nu, nv) = (2 * density, density);
    let mut grid = Grid {
        mesh,
        ids: HashMap::new(),
    };
    let at = |i: usize, j: usize| {
        let (theta, phi) = (TAU * i as f64 / nu as f64, PI * j as f64 / nv as f64);
        center + Vec3::new(phi.sin() * theta.cos(), phi.sin() * theta.sin(), phi.cos()) * radius
    };
    let mut tris = Vec::new();
    for j in 0..nv {
        for i in 0..nu {
            let v = |g: &mut Grid, a: usize, b: usize| {
                // the seam column and the poles collapse onto shared vertices
                let key = if b == 0 || b == nv { (0, b) } else { (a % nu, b) };
                g.vertex(key, || at(a, b))
            };
            let (a, b, c, d) = (v(&mut grid, i, j), v(&mut grid, i + 1, j), v(&mut grid, i + 1, j + 1), v(&mut grid, i, j + 1));
            if j != 0 {
                tris.push([a, c, b]);
            }
            if j != nv - 1 {
                tris.push([a, d, c]);
            }
        }
    }
    for t in tris {
        grid.mesh.triangles.push(t);
        grid.mesh.triangle_face.push(face);
    }
}

/// Triangulates every face on a `density × density` grid over its chart
/// domain, keeping triangles whose chart centroid lies inside the face's
/// loops. Faces without closed loops use their untrimmed support region.
pub fn tessellate(model: &BRepModel, density: usize) -> Mesh {
    let density = density.max(1);
    let mut mesh = Mesh::default();
    for f in 0..model.faces.len() {
        let region = FaceRegion::new(model, f);
        if !region.trimmed {
            log::warn!("face {f} is not watertight; tessellating its untrimmed support region");
        }
        if region.is_full_sphere() {
            if let Surface::Sphere { center, radius } = model.faces[f].primitive.surface {
                full_sphere(&mut mesh, f, center, radius, density);
            }
            continue;
        }
        let Some((lo, hi)) = region.bounds() else {
            log::warn!("face {f} has no usable boundary; skipped");
            continue;
        };
        let n = density;
        let uv = |i: usize, j: usize| {
            Uv::new(
                lo.x + (hi.x - lo.x) * i as f64 / n as f64,
                lo.y + (hi.y - lo.y) * j as f64 / n as f64,
            )
        };
        let mut grid = Grid {
            mesh: &mut mesh,
            ids: HashMap::new(),
        };
        let mut tris = Vec::new();
        for j in 0..n {
            for i in 0..n {
                let quad = [(i, j), (i + 1, j), (i + 1, j + 1), (i, j + 1)];
                for tri in [[quad[0], quad[1], quad[2]], [quad[0], quad[2], quad[3]]] {
                    let c = tri.iter().map(|&(a, b)| uv(a, b)).sum::<Uv>() / 3.0;
                    if !region.contains(&c) {
                        continue;
                    }
                    let ids = tri.map(|(a, b)| grid.vertex((a, b), || region.chart.point(&uv(a, b))));
                    tris.push(ids);
                }
            }
        }
        for t in tris {
            mesh.triangles.push(t);
            mesh.triangle_face.push(f);
        }
    }
    for e in &model.edges {
        let start = mesh.vertices.len();
        mesh.vertices.extend(e.sample(EDGE_POLYLINE));
        mesh.polylines.push((start..mesh.vertices.len()).collect());
    }
    mesh
}

pub fn write_obj<W: Write>(mesh: &Mesh, w: &mut W) -> Result<()> {
    for v in &mesh.vertices {
        writeln!(w, "v {} {} {}", fmt_f64(v.x), fmt_f64(v.y), fmt_f64(v.z))?;
    }
    let mut current = None;
    for (t, &f) in mesh.triangles.iter().zip(&mesh.triangle_face) {
        if current != Some(f) {
            writeln!(w, "o face_{f}")?;
            current = Some(f);
        }
        writeln!(w, "f {} {} {}", t[0] + 1, t[1] + 1, t[2] + 1)?;
    }
    for (e, pl) in mesh.polylines.iter().enumerate() {
        writeln!(w, "o edge_{e}")?;
        let ids: Vec<String> = pl.iter().map(|i| (i + 1).to_string()).collect();
        writeln!(w, "l {}", ids.join(" "))?;
    }
    Ok(())
}
