use std::f64::consts::TAU;

use super::{CandidateCurve, TrimConfig};
use crate::bezier::closest_param;
use crate::types::{plane_basis, CurveGeometry, CurveSegment, Vec3};

/// An edge point supporting a curve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Projection {
    pub index: usize,
    pub t: f64,
    pub distance: f64,
}

/// Closest curve parameter and distance. Circle angles are in `[0, 2π)`.
pub(crate) fn closest_on_curve(geometry: &CurveGeometry, p: &Vec3) -> (f64, f64) {
    match *geometry {
        CurveGeometry::Line { origin, direction } => {
            let t = (p - origin).dot(&direction);
            (t, (origin + direction * t - p).norm())
        }
        CurveGeometry::Circle { center, normal, .. } => {
            let (e1, e2) = plane_basis(&normal);
            let w = p - center;
            let (x, y) = (w.dot(&e1), w.dot(&e2));
            let t = if x == 0.0 && y == 0.0 { 0.0 } else { y.atan2(x).rem_euclid(TAU) };
            let t = if t >= TAU { 0.0 } else { t };
            (t, (geometry.point(t) - p).norm())
        }
        CurveGeometry::Bezier(ctrl) => closest_param(&ctrl, p),
    }
}

/// Edge points within η of the curve, sorted by parameter (ties by index).
pub fn project_edge_points(curve: &CandidateCurve, edge_points: &[Vec3], cfg: &TrimConfig) -> Vec<Projection> {
    let mut out: Vec<Projection> = edge_points
        .iter()
        .enumerate()
        .filter_map(|(index, p)| {
            let (t, distance) = closest_on_curve(&curve.geometry, p);
            (distance <= cfg.projection_threshold).then_some(Projection { index, t, distance })
        })
        .collect();
    out.sort_by(|a, b| a.t.total_cmp(&b.t).then(a.index.cmp(&b.index)));
    out
}

fn segment(curve: &CandidateCurve, t_range: (f64, f64), support_count: usize, closed: bool) -> CurveSegment {
    CurveSegment {
        geometry: curve.geometry,
        t_range,
        support_count,
        endpoint_corners: [None, None],
        source_faces: [Some(curve.source_faces[0]), Some(curve.source_faces[1])],
        closed,
    }
}

/// Splits sorted parameters into runs at gaps larger than `max_gap`.
fn runs(ts: &[f64], max_gap: f64) -> Vec<&[f64]> {
    let mut out = Vec::new();
    let mut start = 0;
    for i in 1..ts.len() {
        if ts[i] - ts[i - 1] > max_gap {
            out.push(&ts[start..i]);
            start = i;
        }
    }
    if !ts.is_empty() {
        out.push(&ts[start..]);
    }
    out
}

fn padded(run: &[f64]) -> (f64, f64) {
    let (lo, hi) = (run[0], run[run.len() - 1]);
    let pad = if run.len() > 1 {
        0.5 * (hi - lo) / (run.len() - 1) as f64
    } else {
        0.0
    };
    (lo - pad, hi + pad)
}

/// Groups supports into trimmed segments: split where consecutive parameters
/// are further apart than `g` times the span (2π for circles, 1 for Béziers,
/// the supported extent for lines), keep runs with at least `m` supports, and
/// pad each range by half its mean gap.
pub fn extract_segments(projections: &[Projection], curve: &CandidateCurve, cfg: &TrimConfig) -> Vec<CurveSegment> {
    let mut ts: Vec<f64> = projections.iter().map(|p| p.t).collect();
    ts.sort_by(f64::total_cmp);
    if ts.len() < cfg.min_support {
        return Vec::new();
    }
    let m = cfg.min_support;
    match curve.geometry {
        CurveGeometry::Circle { .. } => {
            let max_gap = cfg.gap_threshold * TAU;
            // locate the widest gap, wrap-around included
            let n = ts.len();
            let (mut widest, mut at) = (ts[0] + TAU - ts[n - 1], 0);
            for i in 1..n {
                if ts[i] - ts[i - 1] > widest {
                    widest = ts[i] - ts[i - 1];
                    at = i;
                }
            }
            if widest <= max_gap {
                return vec![segment(curve, (0.0, TAU), n, true)];
            }
            // unroll so the widest gap sits at the ends
            let unrolled: Vec<f64> = (0..n)
                .map(|k| {
                    let i = (at + k) % n;
                    if i < at {
                        ts[i] + TAU
                    } else {
                        ts[i]
                    }
                })
                .collect();
            runs(&unrolled, max_gap)
                .into_iter()
                .filter(|r| r.len() >= m)
                .filter_map(|r| {
                    let (lo, hi) = padded(r);
                    let hi = hi.min(lo + TAU);
                    let shift = lo.div_euclid(TAU) * TAU;
                    (hi > lo).then(|| segment(curve, (lo - shift, hi - shift), r.len(), false))
                })
                .collect()
        }
        CurveGeometry::Line { .. } => {
            let extent = ts[ts.len() - 1] - ts[0];
            runs(&ts, cfg.gap_threshold * extent)
                .into_iter()
                .filter(|r| r.len() >= m)
                .filter_map(|r| {
                    let (lo, hi) = padded(r);
                    (hi > lo).then(|| segment(curve, (lo, hi), r.len(), false))
                })
                .collect()
        }
        CurveGeometry::Bezier(_) => runs(&ts, cfg.gap_threshold)
            .into_iter()
            .filter(|r| r.len() >= m)
            .filter_map(|r| {
                let (lo, hi) = padded(r);
                let (lo, hi) = (lo.max(0.0), hi.min(1.0));
                (hi > lo).then(|| segment(curve, (lo, hi), r.len(), false))
            })
            .collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    fn line_x() -> CandidateCurve {
        CandidateCurve {
            geometry: CurveGeometry::Line {
                origin: Vec3::zeros(),
                direction: Vec3::x(),
            },
            source_faces: [0, 1],
            is_analytic: true,
        }
    }

    fn circle() -> CandidateCurve {
        CandidateCurve {
            geometry: CurveGeometry::Circle {
                center: Vec3::new(0.5, 0.5, 0.5),
                normal: Vec3::z(),
                radius: 0.2,
            },
            source_faces: [0, 1],
            is_analytic: true,
        }
    }

    #[test]
    fn on_line_and_threshold() {
        let cfg = TrimConfig::default();
        let pts = [Vec3::new(0.3, 0.0, 0.0), Vec3::new(0.5, 0.04, 0.0)];
        let pr = project_edge_points(&line_x(), &pts, &cfg);
        assert_eq!(pr.len(), 1);
        assert_eq!(pr[0].index, 0);
        assert_eq!(pr[0].distance, 0.0);
        assert_eq!(pr[0].t, 0.3);
    }

    #[test]
    fn noisy_circle_supports() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let noise = Normal::new(0.0, 0.003).unwrap();
        let pts: Vec<Vec3> = (0..100)
            .map(|_| {
                let a: f64 = rng.random_range(0.0..TAU);
                Vec3::new(0.5 + 0.2 * a.cos(), 0.5 + 0.2 * a.sin(), 0.5)
                    + Vec3::new(noise.sample(&mut rng), noise.sample(&mut rng), noise.sample(&mut rng))
            })
            .collect();
        let cfg = TrimConfig::default();
        let pr = project_edge_points(&circle(), &pts, &cfg);
        assert!(pr.len() >= 95);
        let segs = extract_segments(&pr, &circle(), &cfg);
        assert_eq!(segs.len(), 1);
        assert!(segs[0].closed);
        assert_eq!(segs[0].t_range, (0.0, TAU));
    }

    #[test]
    fn gap_splits_bezier_supports() {
        let curve = CandidateCurve {
            geometry: CurveGeometry::Bezier([
                Vec3::zeros(),
                Vec3::new(0.3, 0.1, 0.0),
                Vec3::new(0.6, 0.1, 0.0),
                Vec3::new(1.0, 0.0, 0.0),
            ]),
            source_faces: [0, 1],
            is_analytic: false,
        };
        let mut pr = Vec::new();
        for k in 0..=40 {
            let t = k as f64 / 100.0;
            pr.push(Projection { index: k, t, distance: 0.0 });
            pr.push(Projection { index: 100 + k, t: 0.6 + t, distance: 0.0 });
        }
        pr.sort_by(|a, b| a.t.total_cmp(&b.t));
        let segs = extract_segments(&pr, &curve, &TrimConfig::default());
        assert_eq!(segs.len(), 2);
        assert!(segs[0].t_range.1 < segs[1].t_range.0);
    }

    #[test]
    fn under_min_support() {
        let pr: Vec<Projection> = (0..3)
            .map(|k| Projection {
                index: k,
                t: k as f64 * 0.01,
                distance: 0.0,
            })
            .collect();
        assert!(extract_segments(&pr, &line_x(), &TrimConfig::default()).is_empty());
    }

    #[test]
    fn circle_arc_across_zero() {
        let cfg = TrimConfig::default();
        // arc from -0.5 rad to 1.0 rad
        let pr: Vec<Projection> = (0..=30)
            .map(|k| {
                let a = -0.5 + 1.5 * k as f64 / 30.0;
                Projection {
                    index: k,
                    t: a.rem_euclid(TAU),
                    distance: 0.0,
                }
            })
            .collect::<Vec<_>>();
        let mut pr = pr;
        pr.sort_by(|a, b| a.t.total_cmp(&b.t));
        let segs = extract_segments(&pr, &circle(), &cfg);
        assert_eq!(segs.len(), 1);
        let (lo, hi) = segs[0].t_range;
        assert!(!segs[0].closed);
        assert!((hi - lo - 1.5 - 0.05).abs() < 1e-9, "{lo} {hi}");
        assert!((0.0..TAU).contains(&lo));
    }
}
