//! Trimmed face regions in a parameter chart: point membership against the
//! boundary loops, uniform sampling and the uv domain for tessellation.

use std::f64::consts::{PI, TAU};

use rand::Rng;

use crate::assembly::{loop_polygon, winding_turns};
use crate::chart::{Chart, Uv};
use crate::synthetic::random_direction;
use crate::types::{BRepModel, LoopEdge, Surface, Vec3};

const EDGE_SAMPLES: usize = 65;

/// A face's trimmed domain.
#[derive(Debug, Clone)]
pub struct FaceRegion {
    pub chart: Chart,
    /// False when the face had no closed boundary and the region falls back
    /// to the uv bounding box of its edges (the untrimmed support region).
    pub trimmed: bool,
    /// Closed loops that do not wrap around a periodic chart.
    plain: Vec<Vec<Uv>>,
    /// Loops wrapping a cylinder as `(polyline sorted by θ ∈ [0, 2π), turns)`.
    winding: Vec<(Vec<Uv>, i64)>,
    /// uv box of the domain; `None` for a whole sphere or a face without
    /// any usable boundary.
    bounds: Option<(Uv, Uv)>,
    full_sphere: bool,
}

fn loop_points_3d(lp: &[LoopEdge], model: &BRepModel) -> Vec<Vec3> {
    let mut out = Vec::new();
    for le in lp {
        let mut pts = model.edges[le.edge].sample(EDGE_SAMPLES);
        if !le.forward {
            pts.reverse();
        }
        pts.pop();
        out.extend(pts);
    }
    out
}

/// Signed crossing count of `poly` around `p` (counter-clockwise positive).
pub fn winding_number(p: &Uv, poly: &[Uv]) -> i32 {
    let n = poly.len();
    let mut wn = 0;
    for i in 0..n {
        let (a, b) = (poly[i], poly[(i + 1) % n]);
        let side = (b.x - a.x) * (p.y - a.y) - (p.x - a.x) * (b.y - a.y);
        if a.y <= p.y {
            if b.y > p.y && side > 0.0 {
                wn += 1;
            }
        } else if b.y <= p.y && side < 0.0 {
            wn -= 1;
        }
    }
    wn
}

fn bbox(points: impl IntoIterator<Item = Uv>) -> Option<(Uv, Uv)> {
    let mut it = points.into_iter().peekable();
    it.peek()?;
    let (mut lo, mut hi) = (Uv::repeat(f64::INFINITY), Uv::repeat(f64::NEG_INFINITY));
    for p in it {
        lo = lo.inf(&p);
        hi = hi.sup(&p);
    }
    Some((lo, hi))
}

/// Height of a θ-sorted winding polyline at angle `theta`, linear in between
/// and periodic across the seam.
fn height_at(poly: &[Uv], theta: f64) -> f64 {
    let t = theta.rem_euclid(TAU);
    let k = poly.partition_point(|q| q.x <= t);
    let (a, b) = if k == 0 || k == poly.len() {
        let (last, first) = (poly[poly.len() - 1], poly[0]);
        (Uv::new(last.x - TAU, last.y), first)
    } else {
        (poly[k - 1], poly[k])
    };
    let t = if t < a.x { t + TAU } else { t };
    let span = b.x - a.x;
    if span <= 0.0 {
        return a.y;
    }
    a.y + (b.y - a.y) * ((t - a.x) / span)
}

impl FaceRegion {
    pub fn new(model: &BRepModel, face: usize) -> FaceRegion {
        let f = &model.faces[face];
        let surface = f.primitive.surface;
        let boundary: Vec<Vec3> = f
            .loops
            .iter()
            .chain(&f.open_chains)
            .flat_map(|lp| loop_points_3d(lp, model))
            .collect();
        let mean = if boundary.is_empty() {
            Vec3::zeros()
        } else {
            boundary.iter().sum::<Vec3>() / boundary.len() as f64
        };
        let reference = match surface {
            Surface::Sphere { center, .. } => {
                // the loops' vector area points into the region on their left
                let mut area = Vec3::zeros();
                for lp in &f.loops {
                    let pts = loop_points_3d(lp, model);
                    for k in 0..pts.len() {
                        area += (pts[k] - center).cross(&(pts[(k + 1) % pts.len()] - center));
                    }
                }
                if area.norm() > 1e-12 { center + area } else { mean }
            }
            _ => mean,
        };
        let chart = Chart::new(&surface, reference);
        let is_sphere = matches!(surface, Surface::Sphere { .. });
        let trimmed = f.open_chains.is_empty() && (!f.loops.is_empty() || is_sphere);

        let mut region = FaceRegion {
            chart,
            trimmed,
            plain: Vec::new(),
            winding: Vec::new(),
            bounds: None,
            full_sphere: false,
        };
        if is_sphere && (f.loops.is_empty() || !trimmed) {
            region.full_sphere = true;
            region.trimmed = f.loops.is_empty() && trimmed;
            return region;
        }
        if trimmed {
            for lp in &f.loops {
                let poly = loop_polygon(&chart, lp, &model.edges);
                let turns = winding_turns(&chart, &poly);
                if turns == 0 {
                    region.plain.push(poly);
                } else {
                    let mut wrapped: Vec<Uv> = poly.iter().map(|q| Uv::new(q.x.rem_euclid(TAU), q.y)).collect();
                    wrapped.sort_by(|a, b| a.x.total_cmp(&b.x));
                    region.winding.push((wrapped, turns.signum()));
                }
            }
            region.bounds = bbox(region.plain.iter().chain(region.winding.iter().map(|w| &w.0)).flatten().copied());
        } else {
            let per_edge = f
                .loops
                .iter()
                .chain(&f.open_chains)
                .flatten()
                .flat_map(|le| chart.unwrap(&model.edges[le.edge].sample(EDGE_SAMPLES)));
            region.bounds = bbox(per_edge);
        }
        if let (Some(_), Some((lo, hi))) = (chart.period(), region.bounds.as_mut()) {
            if !region.winding.is_empty() || !trimmed {
                lo.x = -PI;
                hi.x = PI;
            }
        }
        if region.bounds.is_some_and(|(lo, hi)| !(hi.x > lo.x && hi.y > lo.y)) {
            region.bounds = None;
        }
        region
    }

    /// True for a sphere face sampled over the whole sphere.
    pub fn is_full_sphere(&self) -> bool {
        self.full_sphere
    }

    /// uv box of the domain (not meaningful for a whole sphere).
    pub fn bounds(&self) -> Option<(Uv, Uv)> {
        self.bounds
    }

    pub fn contains(&self, uv: &Uv) -> bool {
        if self.full_sphere {
            return true;
        }
        let Some((lo, hi)) = self.bounds else {
            return false;
        };
        if !self.trimmed {
            let periodic = self.chart.period().is_some();
            return (periodic || (uv.x >= lo.x && uv.x <= hi.x)) && uv.y >= lo.y && uv.y <= hi.y;
        }
        let shifts: &[f64] = if self.chart.period().is_some() { &[-2.0, -1.0, 0.0, 1.0, 2.0] } else { &[0.0] };
        let mut wn = 0;
        for poly in &self.plain {
            for k in shifts {
                wn += winding_number(&Uv::new(uv.x + k * TAU, uv.y), poly);
            }
        }
        if self.winding.is_empty() {
            return wn > 0;
        }
        wn == 0
            && self.winding.iter().all(|(poly, turns)| {
                let h = height_at(poly, uv.x);
                if *turns > 0 { uv.y > h } else { uv.y < h }
            })
    }

    /// Up to `n` points uniformly distributed over the region by area
    /// (rejection sampling); fewer if the region is empty or tiny.
    pub fn sample<R: Rng>(&self, n: usize, rng: &mut R) -> Vec<Vec3> {
        let mut out = Vec::with_capacity(n);
        let max_attempts = 1000 * n.max(1);
        if let Chart::Sphere { center, radius, .. } = self.chart {
            for _ in 0..max_attempts {
                if out.len() == n {
                    break;
                }
                let x = center + random_direction(rng) * radius;
                if self.contains(&self.chart.uv(&x)) {
                    out.push(x);
                }
            }
            return out;
        }
        let Some((lo, hi)) = self.bounds else {
            return out;
        };
        for _ in 0..max_attempts {
            if out.len() == n {
                break;
            }
            // uniform in (u, v) is uniform in area for planes and for (θ, h) on cylinders
            let uv = Uv::new(rng.random_range(lo.x..hi.x), rng.random_range(lo.y..hi.y));
            if self.contains(&uv) {
                out.push(self.chart.point(&uv));
            }
        }
        out
    }
}
