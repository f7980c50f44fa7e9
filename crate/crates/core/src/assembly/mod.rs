//! Snapping, per-face loop trimming and fragment pruning.

mod loops;
mod prune;
mod snap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::chart::Chart;
use crate::error::{Error, Result};
use crate::fitting::FittedPatch;
use crate::types::{BRepFace, BRepModel, CurveSegment, Vec3};

pub use loops::{build_face_loops, loop_polygon, winding_turns, FaceLoops};
pub use prune::prune_fragments;
pub use snap::snap_endpoints;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AssemblyConfig {
    pub snap_radius: f64,
    pub min_face_inliers: usize,
    pub loop_closure_tolerance: f64,
}

impl Default for AssemblyConfig {
    fn default() -> Self {
        AssemblyConfig {
            snap_radius: 0.02,
            min_face_inliers: 30,
            loop_closure_tolerance: 0.01,
        }
    }
}

impl AssemblyConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.snap_radius > 0.0) || !(self.loop_closure_tolerance > 0.0) || self.min_face_inliers == 0 {
            return Err(Error::Config("assembly parameters must be > 0".into()));
        }
        Ok(())
    }
}

/// A face that did not close.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FlaggedFace {
    pub face: usize,
    pub patch_id: u32,
    pub open_chains: usize,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct WatertightReport {
    pub flagged_faces: Vec<FlaggedFace>,
    /// Edges not shared by exactly two faces.
    pub unpaired_edges: Vec<usize>,
}

impl WatertightReport {
    pub fn of(model: &BRepModel) -> Self {
        let flagged_faces = model
            .faces
            .iter()
            .enumerate()
            .filter(|(_, f)| !f.watertight())
            .map(|(face, f)| FlaggedFace {
                face,
                patch_id: f.patch_id,
                open_chains: f.open_chains.len(),
            })
            .collect();
        let unpaired_edges = model
            .adjacency()
            .iter()
            .enumerate()
            .filter(|(_, f)| f.len() != 2)
            .map(|(i, _)| i)
            .collect();
        WatertightReport {
            flagged_faces,
            unpaired_edges,
        }
    }

    pub fn is_watertight(&self) -> bool {
        self.flagged_faces.is_empty() && self.unpaired_edges.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Assembly {
    pub model: BRepModel,
    pub report: WatertightReport,
}

/// Snap → per-face loops → prune.
///
/// `segments[i].source_faces` index into `patches`; `corners` come from
/// corner clustering. Faces whose boundary does not close are kept and
/// listed in the report.
pub fn assemble_brep(
    patches: &[FittedPatch],
    segments: &[CurveSegment],
    corners: &[Vec3],
    cfg: &AssemblyConfig,
) -> Result<Assembly> {
    cfg.validate()?;
    if patches.is_empty() {
        return Err(Error::EmptyModel);
    }
    let edges = snap_endpoints(segments, corners, cfg);
    let faces: Vec<BRepFace> = patches
        .par_iter()
        .enumerate()
        .map(|(i, p)| {
            let reference = p.centroid();
            let chart = Chart::new(p.surface(), reference);
            let fl = build_face_loops(i, &chart, &reference, &edges, cfg);
            BRepFace {
                patch_id: p.patch_id,
                primitive: p.fit.primitive,
                loops: fl.loops,
                open_chains: fl.open_chains,
            }
        })
        .collect();
    let draft = BRepModel {
        corners: corners.to_vec(),
        edges,
        faces,
    };
    let model = prune_fragments(&draft, cfg);
    if let Err(e) = model.check_invariants(cfg.loop_closure_tolerance) {
        log::warn!("assembled model violates an invariant: {e}");
    }
    let report = WatertightReport::of(&model);
    for f in &report.flagged_faces {
        log::info!("face {} (patch {}) is not watertight", f.face, f.patch_id);
    }
    Ok(Assembly { model, report })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fitting::PrimitiveFit;
    use crate::synthetic::cube_cloud;
    use crate::types::{CurveGeometry, Surface};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    /// Face order x0, x1, y0, y1, z0, z1 as in `cube_cloud`.
    fn cube_patches(skip: Option<u32>) -> Vec<FittedPatch> {
        let cloud = cube_cloud(&mut ChaCha8Rng::seed_from_u64(5), 400, 0.0, 0.02);
        let groups = cloud.patches();
        groups
            .iter()
            .filter(|(id, _)| Some(**id) != skip)
            .map(|(&id, idx)| {
                let axis = id as usize / 2;
                let mut n = Vec3::zeros();
                n[axis] = 1.0;
                let surface = Surface::Plane {
                    normal: n,
                    offset: (id % 2) as f64,
                };
                let pts: Vec<Vec3> = idx.iter().map(|&i| cloud.points[i]).collect();
                FittedPatch::new(id, PrimitiveFit::from_surface(surface, &pts, 0.01), &pts)
            })
            .collect()
    }

    /// Slightly short cube edges between the kept faces; indices into `patches`.
    fn cube_edges(patches: &[FittedPatch]) -> (Vec<CurveSegment>, Vec<Vec3>) {
        let corners: Vec<Vec3> = (0..8)
            .map(|i| Vec3::new((i >> 2 & 1) as f64, (i >> 1 & 1) as f64, (i & 1) as f64))
            .collect();
        let face_of = |id: u32| patches.iter().position(|p| p.patch_id == id);
        let mut segs = Vec::new();
        for a in 0..8 {
            for axis in 0..3 {
                let mut b = corners[a];
                if b[axis] != 0.0 {
                    continue;
                }
                b[axis] = 1.0;
                let o = corners[a];
                let others: Vec<u32> = (0..3)
                    .filter(|&k| k != axis)
                    .map(|k| 2 * k as u32 + o[k] as u32)
                    .collect();
                let (Some(f0), Some(f1)) = (face_of(others[0]), face_of(others[1])) else { continue };
                let mut dir = Vec3::zeros();
                dir[axis] = 1.0;
                segs.push(CurveSegment {
                    geometry: CurveGeometry::Line { origin: o, direction: dir },
                    t_range: (0.008, 0.991),
                    support_count: 20,
                    endpoint_corners: [None, None],
                    source_faces: [Some(f0), Some(f1)],
                    closed: false,
                });
            }
        }
        (segs, corners)
    }

    #[test]
    fn cube_assembles_watertight() {
        let patches = cube_patches(None);
        let (segs, corners) = cube_edges(&patches);
        assert_eq!(segs.len(), 12);
        let a = assemble_brep(&patches, &segs, &corners, &AssemblyConfig::default()).unwrap();
        assert_eq!(a.model.faces.len(), 6);
        assert_eq!(a.model.edges.len(), 12);
        assert_eq!(a.model.corners.len(), 8);
        assert!(a.report.is_watertight(), "{:?}", a.report);
        assert!(a.model.is_watertight());
        a.model.check_invariants(1e-12).unwrap();
        for f in &a.model.faces {
            assert_eq!(f.loops.len(), 1);
            assert_eq!(f.loops[0].len(), 4);
        }
    }

    #[test]
    fn ablated_cube_flags_side_faces() {
        let patches = cube_patches(Some(5));
        let (segs, corners) = cube_edges(&patches);
        let a = assemble_brep(&patches, &segs, &corners, &AssemblyConfig::default()).unwrap();
        assert_eq!(a.model.faces.len(), 5);
        let flagged: Vec<u32> = a.report.flagged_faces.iter().map(|f| f.patch_id).collect();
        assert_eq!(flagged, vec![0, 1, 2, 3]);
        // the top corners are still used by the vertical edges
        assert_eq!(a.model.corners.len(), 8);
    }

    #[test]
    fn empty_input_is_an_error() {
        assert!(matches!(
            assemble_brep(&[], &[], &[], &AssemblyConfig::default()),
            Err(Error::EmptyModel)
        ));
    }

    #[test]
    fn deterministic() {
        let patches = cube_patches(None);
        let (segs, corners) = cube_edges(&patches);
        let a = assemble_brep(&patches, &segs, &corners, &AssemblyConfig::default()).unwrap();
        let b = assemble_brep(&patches, &segs, &corners, &AssemblyConfig::default()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn config_validation() {
        assert!(AssemblyConfig::default().validate().is_ok());
        let bad = AssemblyConfig {
            snap_radius: 0.0,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
    }
}
