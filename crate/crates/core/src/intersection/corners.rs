use std::cmp::Ordering;

use nalgebra::Matrix3;

use super::TrimConfig;
use crate::spatial::KdTree;
use crate::types::{CurveGeometry, CurveSegment, Surface, Vec3};

/// Plane triples with a worse condition number are skipped.
const MAX_CONDITION: f64 = 1e6;

fn plane_triple(planes: [(Vec3, f64); 3]) -> Option<Vec3> {
    let m = Matrix3::from_rows(&[planes[0].0.transpose(), planes[1].0.transpose(), planes[2].0.transpose()]);
    let sv = m.singular_values();
    let (hi, lo) = (sv.max(), sv.min());
    if lo <= 0.0 || hi / lo >= MAX_CONDITION {
        return None;
    }
    m.lu().solve(&Vec3::new(planes[0].1, planes[1].1, planes[2].1))
}

/// Closest-approach midpoint of two lines and the parameters of its feet.
fn line_pair(o1: Vec3, u1: Vec3, o2: Vec3, u2: Vec3) -> Option<(Vec3, f64, f64, f64)> {
    let w = o1 - o2;
    let b = u1.dot(&u2);
    let den = 1.0 - b * b;
    if den < 1e-12 {
        return None;
    }
    let (d, e) = (u1.dot(&w), u2.dot(&w));
    let s = (b * e - d) / den;
    let t = (e - b * d) / den;
    let (p, q) = (o1 + u1 * s, o2 + u2 * t);
    Some(((p + q) * 0.5, (p - q).norm(), s, t))
}

/// Corner candidates: well-conditioned plane triples, close line-segment
/// pairs, and the endpoints of open curved segments.
///
/// When `bounds` is given (one box per surface), a plane-triple solution is
/// kept only if it lies inside all three boxes; this drops intersections of
/// planes whose patches are far apart.
pub fn corner_candidates(
    surfaces: &[Surface],
    bounds: Option<&[crate::types::Aabb]>,
    segments: &[CurveSegment],
    cfg: &TrimConfig,
) -> Vec<Vec3> {
    let mut out = Vec::new();
    let planes: Vec<(usize, Vec3, f64)> = surfaces
        .iter()
        .enumerate()
        .filter_map(|(i, s)| match *s {
            Surface::Plane { normal, offset } => Some((i, normal, offset)),
            _ => None,
        })
        .collect();
    for a in 0..planes.len() {
        for b in a + 1..planes.len() {
            for c in b + 1..planes.len() {
                let idx = [planes[a].0, planes[b].0, planes[c].0];
                let Some(p) = plane_triple([
                    (planes[a].1, planes[a].2),
                    (planes[b].1, planes[b].2),
                    (planes[c].1, planes[c].2),
                ]) else {
                    continue;
                };
                if let Some(bx) = bounds {
                    if !idx.iter().all(|&i| bx[i].contains(&p)) {
                        continue;
                    }
                }
                out.push(p);
            }
        }
    }
    let eta = cfg.projection_threshold;
    let lines: Vec<(Vec3, Vec3, (f64, f64))> = segments
        .iter()
        .filter_map(|s| match s.geometry {
            CurveGeometry::Line { origin, direction } => Some((origin, direction, s.t_range)),
            _ => None,
        })
        .collect();
    let inside = |t: f64, r: (f64, f64)| t >= r.0 - eta && t <= r.1 + eta;
    for i in 0..lines.len() {
        for j in i + 1..lines.len() {
            let (o1, u1, r1) = lines[i];
            let (o2, u2, r2) = lines[j];
            if let Some((mid, dist, s, t)) = line_pair(o1, u1, o2, u2) {
                if dist < eta && inside(s, r1) && inside(t, r2) {
                    out.push(mid);
                }
            }
        }
    }
    for s in segments.iter().filter(|s| !s.geometry.is_line() && !s.closed) {
        out.push(s.start());
        out.push(s.end());
    }
    out
}

fn lex(a: &Vec3, b: &Vec3) -> Ordering {
    a.x.total_cmp(&b.x).then(a.y.total_cmp(&b.y)).then(a.z.total_cmp(&b.z))
}

fn find(parent: &mut [usize], mut i: usize) -> usize {
    while parent[i] != i {
        parent[i] = parent[parent[i]];
        i = parent[i];
    }
    i
}

/// Single-linkage clustering with inclusive merge radius `r_c`. Each corner is
/// the centroid of its cluster (members summed in lexicographic order, so the
/// result does not depend on input order); output sorted lexicographically.
pub fn cluster_corners(candidates: &[Vec3], cfg: &TrimConfig) -> Vec<Vec3> {
    if candidates.is_empty() {
        return Vec::new();
    }
    let tree = KdTree::new(candidates);
    let mut parent: Vec<usize> = (0..candidates.len()).collect();
    for (i, p) in candidates.iter().enumerate() {
        for j in tree.within(p, cfg.corner_cluster_radius) {
            let (a, b) = (find(&mut parent, i), find(&mut parent, j));
            if a != b {
                parent[a.max(b)] = a.min(b);
            }
        }
    }
    let mut groups: std::collections::BTreeMap<usize, Vec<Vec3>> = Default::default();
    for i in 0..candidates.len() {
        let r = find(&mut parent, i);
        groups.entry(r).or_default().push(candidates[i]);
    }
    let mut out: Vec<Vec3> = groups
        .into_values()
        .map(|mut g| {
            g.sort_by(lex);
            g.iter().sum::<Vec3>() / g.len() as f64
        })
        .collect();
    out.sort_by(lex);
    out
}
