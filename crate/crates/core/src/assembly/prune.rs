use super::AssemblyConfig;
use crate::types::{BRepModel, LoopEdge};

/// Drops faces with fewer than `min_face_inliers` inliers, then edges left
/// without any source face, then corners no surviving edge uses. All indices
/// are remapped; edge references to removed faces become `None`.
pub fn prune_fragments(model: &BRepModel, cfg: &AssemblyConfig) -> BRepModel {
    let face_map: Vec<Option<usize>> = {
        let mut next = 0;
        model
            .faces
            .iter()
            .map(|f| {
                (f.primitive.inlier_count >= cfg.min_face_inliers).then(|| {
                    next += 1;
                    next - 1
                })
            })
            .collect()
    };
    let remap_face = |f: Option<usize>| f.and_then(|f| face_map[f]);

    let mut edge_map = vec![None; model.edges.len()];
    let mut edges = Vec::new();
    for (i, e) in model.edges.iter().enumerate() {
        let faces = e.source_faces.map(remap_face);
        if faces == [None, None] {
            continue;
        }
        let mut e = e.clone();
        e.source_faces = faces;
        edge_map[i] = Some(edges.len());
        edges.push(e);
    }

    let mut used = vec![false; model.corners.len()];
    for c in edges.iter().flat_map(|e| e.endpoint_corners.iter().flatten()) {
        used[*c] = true;
    }
    let mut corner_map = vec![0; model.corners.len()];
    let mut corners = Vec::new();
    for (i, c) in model.corners.iter().enumerate() {
        if used[i] {
            corner_map[i] = corners.len();
            corners.push(*c);
        }
    }
    for e in &mut edges {
        for c in e.endpoint_corners.iter_mut().flatten() {
            *c = corner_map[*c];
        }
    }

    let remap_chain = |lp: &Vec<LoopEdge>| -> Option<Vec<LoopEdge>> {
        lp.iter()
            .map(|le| {
                edge_map[le.edge].map(|edge| LoopEdge {
                    edge,
                    forward: le.forward,
                })
            })
            .collect()
    };
    let faces = model
        .faces
        .iter()
        .zip(&face_map)
        .filter(|(_, m)| m.is_some())
        .map(|(f, _)| {
            let mut f = f.clone();
            f.loops = f.loops.iter().filter_map(remap_chain).collect();
            f.open_chains = f.open_chains.iter().filter_map(remap_chain).collect();
            f
        })
        .collect();
    BRepModel { corners, edges, faces }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::{BRepFace, CurveGeometry, CurveSegment, Primitive, Surface, Vec3};

    fn face(inliers: usize, loops: Vec<Vec<LoopEdge>>) -> BRepFace {
        BRepFace {
            patch_id: 0,
            primitive: Primitive {
                surface: Surface::Plane {
                    normal: Vec3::z(),
                    offset: 0.0,
                },
                inlier_count: inliers,
                rms_residual: 0.0,
            },
            loops,
            open_chains: Vec::new(),
        }
    }

    fn edge(corners: [usize; 2], faces: [usize; 2]) -> CurveSegment {
        CurveSegment {
            geometry: CurveGeometry::Line {
                origin: Vec3::zeros(),
                direction: Vec3::x(),
            },
            t_range: (0.0, 1.0),
            support_count: 10,
            endpoint_corners: [Some(corners[0]), Some(corners[1])],
            source_faces: [Some(faces[0]), Some(faces[1])],
            closed: false,
        }
    }

    fn fwd(edge: usize) -> LoopEdge {
        LoopEdge { edge, forward: true }
    }

    #[test]
    fn small_face_removed() {
        let m = BRepModel {
            corners: vec![Vec3::zeros(), Vec3::x()],
            edges: vec![edge([0, 1], [0, 1])],
            faces: vec![face(100, vec![vec![fwd(0)]]), face(10, vec![vec![fwd(0)]])],
        };
        let p = prune_fragments(&m, &AssemblyConfig::default());
        assert_eq!(p.faces.len(), 1);
        assert_eq!(p.edges.len(), 1);
        assert_eq!(p.edges[0].source_faces, [Some(0), None]);
        assert_eq!(p.corners.len(), 2);
    }

    #[test]
    fn cascade_and_reindex() {
        // face 0 is a fragment; edge 0 belongs to it alone (with a removed
        // neighbour), edge 1 is shared by the survivors
        let m = BRepModel {
            corners: vec![Vec3::zeros(), Vec3::x(), Vec3::y(), Vec3::z()],
            edges: vec![edge([0, 1], [0, 0]), edge([2, 3], [1, 2])],
            faces: vec![
                face(5, vec![vec![fwd(0)]]),
                face(50, vec![vec![fwd(1)]]),
                face(50, vec![vec![fwd(1)]]),
            ],
        };
        let p = prune_fragments(&m, &AssemblyConfig::default());
        assert_eq!(p.faces.len(), 2);
        assert_eq!(p.edges.len(), 1);
        assert_eq!(p.edges[0].source_faces, [Some(0), Some(1)]);
        assert_eq!(p.edges[0].endpoint_corners, [Some(0), Some(1)]);
        assert_eq!(p.corners, vec![Vec3::y(), Vec3::z()]);
        assert_eq!(p.faces[0].loops, vec![vec![fwd(0)]]);
    }

    #[test]
    fn clean_model_unchanged() {
        let m = BRepModel {
            corners: vec![Vec3::zeros(), Vec3::x()],
            edges: vec![edge([0, 1], [0, 1])],
            faces: vec![face(100, vec![vec![fwd(0)]]), face(100, vec![vec![fwd(0)]])],
        };
        assert_eq!(prune_fragments(&m, &AssemblyConfig::default()), m);
    }
}
