use std::f64::consts::TAU;

use super::AssemblyConfig;
use crate::bezier::fit_single;
use crate::intersection::closest_on_curve;
use crate::types::{CurveGeometry, CurveSegment, Vec3};

/// Nearest corner within `radius`; exact ties go to the lower index (corners
/// are sorted lexicographically, so that is the lexicographically smaller one).
fn nearest_corner(p: &Vec3, corners: &[Vec3], radius: f64) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (i, c) in corners.iter().enumerate() {
        let d = (c - p).norm();
        if d <= radius && best.is_none_or(|(_, bd)| d < bd) {
            best = Some((i, d));
        }
    }
    best.map(|(i, _)| i)
}

const BEZIER_RESAMPLE: usize = 64;

fn snap_one(seg: &CurveSegment, corners: &[Vec3], cfg: &AssemblyConfig) -> Option<CurveSegment> {
    let mut out = seg.clone();
    if seg.closed {
        out.endpoint_corners = [None, None];
        return Some(out);
    }
    let ends = [
        nearest_corner(&seg.start(), corners, cfg.snap_radius),
        nearest_corner(&seg.end(), corners, cfg.snap_radius),
    ];
    out.endpoint_corners = ends;
    match seg.geometry {
        CurveGeometry::Line { origin, direction } => match ends {
            [Some(a), Some(b)] => {
                if a == b {
                    return None;
                }
                let span = corners[b] - corners[a];
                out.geometry = CurveGeometry::Line {
                    origin: corners[a],
                    direction: span / span.norm(),
                };
                out.t_range = (0.0, span.norm());
            }
            [Some(c), None] | [None, Some(c)] => {
                // translate the line through the corner, keep the free end's parameter
                let t = (corners[c] - origin).dot(&direction);
                let shift = corners[c] - (origin + direction * t);
                out.geometry = CurveGeometry::Line {
                    origin: origin + shift,
                    direction,
                };
                if ends[0].is_some() {
                    out.t_range.0 = t;
                } else {
                    out.t_range.1 = t;
                }
                if out.t_range.0 >= out.t_range.1 {
                    return None;
                }
            }
            [None, None] => {}
        },
        CurveGeometry::Circle { .. } => {
            let (mut lo, mut hi) = seg.t_range;
            if let Some(c) = ends[0] {
                let (t, _) = closest_on_curve(&seg.geometry, &corners[c]);
                lo = t + TAU * ((lo - t) / TAU).round();
            }
            if let Some(c) = ends[1] {
                let (t, _) = closest_on_curve(&seg.geometry, &corners[c]);
                hi = t + TAU * ((hi - t) / TAU).round();
            }
            if ends[0].is_some() && ends[0] == ends[1] {
                // both ends at one corner: a full turn starting there
                hi = lo + TAU;
            }
            if hi <= lo || hi - lo > TAU + 1e-9 {
                return None;
            }
            let shift = lo.div_euclid(TAU) * TAU;
            out.t_range = (lo - shift, (hi - shift).min(lo - shift + TAU));
        }
        CurveGeometry::Bezier(_) => {
            if ends != [None, None] {
                let mut pts = seg.sample(BEZIER_RESAMPLE);
                if let Some(c) = ends[0] {
                    pts[0] = corners[c];
                }
                if let Some(c) = ends[1] {
                    pts[BEZIER_RESAMPLE - 1] = corners[c];
                }
                let (ctrl, _, _) = fit_single(&pts);
                out.geometry = CurveGeometry::Bezier(ctrl);
                out.t_range = (0.0, 1.0);
            }
        }
    }
    if ends == [None, None] && (out.start() - out.end()).norm() <= cfg.loop_closure_tolerance {
        out.closed = true;
    }
    Some(out)
}

/// Moves segment endpoints within `snap_radius` of a corner onto it and
/// records the corner indices. Lines are re-anchored through their corners,
/// circles re-trimmed to the corner angles, Béziers refitted with the
/// snapped endpoint pinned. Unsnapped curves whose ends meet within
/// `loop_closure_tolerance` are marked closed. Lines collapsing onto a
/// single corner are dropped.
pub fn snap_endpoints(segments: &[CurveSegment], corners: &[Vec3], cfg: &AssemblyConfig) -> Vec<CurveSegment> {
    segments.iter().filter_map(|s| snap_one(s, corners, cfg)).collect()
}
