use super::AssemblyConfig;
use crate::chart::{signed_area, Chart, Uv};
use crate::types::{CurveSegment, LoopEdge, Vec3};

/// Boundary of one face.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct FaceLoops {
    /// Closed loops; the outer one first (counter-clockwise in the chart),
    /// holes after it (clockwise).
    pub loops: Vec<Vec<LoopEdge>>,
    /// Chains that could not be closed.
    pub open_chains: Vec<Vec<LoopEdge>>,
}

impl FaceLoops {
    pub fn watertight(&self) -> bool {
        self.open_chains.is_empty()
    }
}

/// Samples per edge when mapping loops into a chart.
const EDGE_SAMPLES: usize = 65;

/// Polyline of an edge use, without its last point.
fn edge_points(seg: &CurveSegment, forward: bool) -> Vec<Vec3> {
    let mut pts = seg.sample(EDGE_SAMPLES);
    if !forward {
        pts.reverse();
    }
    pts.pop();
    pts
}

fn loop_points(chart: &Chart, lp: &[LoopEdge], segments: &[CurveSegment]) -> Vec<Uv> {
    let pts: Vec<Vec3> = lp
        .iter()
        .flat_map(|le| edge_points(&segments[le.edge], le.forward))
        .collect();
    chart.unwrap(&pts)
}

/// Chart direction leaving corner end `which` of `seg` (0 = start).
fn departure(chart: &Chart, seg: &CurveSegment, which: usize) -> Uv {
    let (here, near) = if which == 0 {
        (seg.point_at(0.0), seg.point_at(0.02))
    } else {
        (seg.point_at(1.0), seg.point_at(0.98))
    };
    chart.delta(&chart.uv(&here), &chart.uv(&near))
}

fn turn(incoming: &Uv, outgoing: &Uv) -> f64 {
    let cross = incoming.x * outgoing.y - incoming.y * outgoing.x;
    cross.atan2(incoming.dot(outgoing))
}

fn reversed(lp: &[LoopEdge]) -> Vec<LoopEdge> {
    lp.iter()
        .rev()
        .map(|le| LoopEdge {
            edge: le.edge,
            forward: !le.forward,
        })
        .collect()
}

fn loop_closes(lp: &[LoopEdge], segments: &[CurveSegment], tol: f64) -> bool {
    (0..lp.len()).all(|k| {
        let (a, b) = (&lp[k], &lp[(k + 1) % lp.len()]);
        let end = segments[a.edge].endpoint(if a.forward { 1 } else { 0 });
        let start = segments[b.edge].endpoint(if b.forward { 0 } else { 1 });
        (end - start).norm() <= tol
    })
}

/// Extracts the boundary loops of face `face` from the segments that name
/// it as a source face.
///
/// Closed segments form single-edge loops. The remaining segments are walked
/// greedily from the lowest unvisited index: at each corner the walk takes
/// the unvisited incident segment turning most sharply to the left in the
/// face chart (ties by segment index). Walks that cannot return to their
/// start, and segments with an unsnapped end, become open chains.
///
/// Loops are then oriented in the chart: the outer loop counter-clockwise,
/// holes clockwise. On a cylinder, loops that wind around the axis are
/// oriented so the face centroid `reference` lies to their left.
pub fn build_face_loops(
    face: usize,
    chart: &Chart,
    reference: &Vec3,
    segments: &[CurveSegment],
    cfg: &AssemblyConfig,
) -> FaceLoops {
    let mine: Vec<usize> = (0..segments.len())
        .filter(|&i| segments[i].source_faces.contains(&Some(face)))
        .collect();
    let mut out = FaceLoops::default();
    let mut raw_loops: Vec<Vec<LoopEdge>> = Vec::new();
    let mut graph_edges = Vec::new();
    for &i in &mine {
        let s = &segments[i];
        match s.endpoint_corners {
            _ if s.closed => raw_loops.push(vec![LoopEdge { edge: i, forward: true }]),
            [Some(_), Some(_)] => graph_edges.push(i),
            _ => out.open_chains.push(vec![LoopEdge { edge: i, forward: true }]),
        }
    }
    let mut used = vec![false; segments.len()];
    for &first in &graph_edges {
        if used[first] {
            continue;
        }
        used[first] = true;
        let start_corner = segments[first].endpoint_corners[0];
        let mut chain = vec![LoopEdge { edge: first, forward: true }];
        let mut at = segments[first].endpoint_corners[1];
        let mut incoming = -departure(chart, &segments[first], 1);
        let mut closed = at == start_corner;
        while !closed {
            let mut best: Option<(f64, usize, usize)> = None;
            for &j in &graph_edges {
                if used[j] {
                    continue;
                }
                for which in 0..2 {
                    if segments[j].endpoint_corners[which] != at {
                        continue;
                    }
                    let angle = turn(&incoming, &departure(chart, &segments[j], which));
                    if best.is_none_or(|(ba, bj, _)| angle > ba || (angle == ba && j < bj)) {
                        best = Some((angle, j, which));
                    }
                }
            }
            let Some((_, j, which)) = best else { break };
            used[j] = true;
            let forward = which == 0;
            chain.push(LoopEdge { edge: j, forward });
            let other = 1 - which;
            at = segments[j].endpoint_corners[other];
            incoming = -departure(chart, &segments[j], other);
            closed = at == start_corner;
        }
        if closed && loop_closes(&chain, segments, cfg.loop_closure_tolerance) {
            raw_loops.push(chain);
        } else {
            out.open_chains.push(chain);
        }
    }

    // orientation
    let ref_uv = chart.uv(reference);
    let mut winding = Vec::new();
    let mut plain = Vec::new();
    for lp in raw_loops {
        let uv = loop_points(chart, &lp, segments);
        let turns = winding_turns(chart, &uv);
        if turns != 0 {
            let mean_h = uv.iter().map(|q| q.y).sum::<f64>() / uv.len() as f64;
            // face above the loop wants +θ travel, below wants −θ
            let want_positive = ref_uv.y > mean_h;
            winding.push(if (turns > 0) == want_positive { lp } else { reversed(&lp) });
        } else {
            let area = signed_area(&uv);
            plain.push((area, lp));
        }
    }
    let outer = if winding.is_empty() {
        plain
            .iter()
            .enumerate()
            .max_by(|a, b| a.1 .0.abs().total_cmp(&b.1 .0.abs()).then(b.0.cmp(&a.0)))
            .map(|(i, _)| i)
    } else {
        None
    };
    let mut loops = Vec::new();
    if let Some(o) = outer {
        let (area, lp) = &plain[o];
        loops.push(if *area >= 0.0 { lp.clone() } else { reversed(lp) });
    }
    loops.extend(winding);
    for (i, (area, lp)) in plain.iter().enumerate() {
        if Some(i) == outer {
            continue;
        }
        loops.push(if *area <= 0.0 { lp.clone() } else { reversed(lp) });
    }
    out.loops = loops;
    out
}

/// Loop polyline in the chart, for callers that trim against loops.
pub fn loop_polygon(chart: &Chart, lp: &[LoopEdge], segments: &[CurveSegment]) -> Vec<Uv> {
    loop_points(chart, lp, segments)
}

/// Net number of turns of a chart polygon around the periodic coordinate.
pub fn winding_turns(chart: &Chart, uv: &[Uv]) -> i64 {
    match (chart.period(), uv.first(), uv.last()) {
        (Some(p), Some(a), Some(b)) => {
            let close = chart.delta(b, a);
            ((b.x + close.x - a.x) / p).round() as i64
        }
        _ => 0,
    }
}
