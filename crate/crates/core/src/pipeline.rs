//! End-to-end reconstruction: labeled cloud → fitted primitives →
//! intersection curves → corners → B-rep.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::assembly::{assemble_brep, AssemblyConfig, WatertightReport};
use crate::cloud::{estimate_normals, normalize_cloud, Similarity};
use crate::error::{Error, Result};
use crate::fitting::{regularize_directions, select_primitive, FittedPatch, PrimitiveFit, RansacConfig};
use crate::intersection::{
    cluster_corners, corner_candidates, extract_segments, intersect_primitives, project_edge_points, TraceConfig,
    TrimConfig,
};
use crate::types::{
    Aabb, BRepModel, CurveGeometry, CurveSegment, LabeledPointCloud, PrimitiveKind, Surface, Vec3,
};

const EDGE_FLAG_THRESHOLD: f64 = 0.5;

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReconstructConfig {
    pub ransac: RansacConfig,
    pub trim: TrimConfig,
    pub trace: TraceConfig,
    pub assembly: AssemblyConfig,
    pub normals: NormalConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NormalConfig {
    /// Neighbors for PCA normals when the input has none.
    pub neighbors: usize,
}

impl Default for NormalConfig {
    fn default() -> Self {
        NormalConfig { neighbors: 16 }
    }
}

impl ReconstructConfig {
    pub fn validate(&self) -> Result<()> {
        self.ransac.validate()?;
        self.trim.validate()?;
        self.trace.validate()?;
        self.assembly.validate()?;
        if self.normals.neighbors < 3 {
            return Err(Error::Config("normals.neighbors must be >= 3".into()));
        }
        Ok(())
    }
}

/// Pipeline stage, for error reporting.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Input,
    Normals,
    Fitting,
    Intersection,
    Corners,
    Assembly,
}

impl std::fmt::Display for Stage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Stage::Input => "input",
            Stage::Normals => "normals",
            Stage::Fitting => "fitting",
            Stage::Intersection => "intersection",
            Stage::Corners => "corners",
            Stage::Assembly => "assembly",
        };
        f.write_str(s)
    }
}

#[derive(Debug)]
pub struct StageError {
    pub stage: Stage,
    pub error: Error,
}

impl std::fmt::Display for StageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "[{}] {}", self.stage, self.error)
    }
}

impl std::error::Error for StageError {}

fn at(stage: Stage) -> impl FnOnce(Error) -> StageError {
    move |error| StageError { stage, error }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FitSummary {
    pub patch_id: u32,
    pub kind: PrimitiveKind,
    pub points: usize,
    pub inliers: usize,
    pub rms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SkippedPatch {
    pub patch_id: u32,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Summary {
    pub points: usize,
    pub patches: usize,
    pub fits: Vec<FitSummary>,
    pub skipped: Vec<SkippedPatch>,
    pub edge_points: usize,
    /// True when edge points were inferred because the input had no flags.
    pub inferred_edge_points: bool,
    pub candidate_curves: usize,
    pub segments: usize,
    pub faces: usize,
    pub edges: usize,
    pub corners: usize,
    pub watertight: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Reconstruction {
    /// In the input's coordinates.
    pub model: BRepModel,
    pub report: WatertightReport,
    pub summary: Summary,
    pub transform: Similarity,
}

/// Maps a model built in normalized coordinates back through `sim`.
pub fn denormalize_model(model: &BRepModel, sim: &Similarity) -> BRepModel {
    if sim.is_identity() {
        return model.clone();
    }
    let s = sim.extent;
    let back = |p: &Vec3| sim.invert(p);
    let mut out = model.clone();
    for c in &mut out.corners {
        *c = back(c);
    }
    for e in &mut out.edges {
        e.geometry = match e.geometry {
            CurveGeometry::Line { origin, direction } => {
                e.t_range = (e.t_range.0 * s, e.t_range.1 * s);
                CurveGeometry::Line {
                    origin: back(&origin),
                    direction,
                }
            }
            CurveGeometry::Circle {
                center,
                normal,
                radius,
            } => CurveGeometry::Circle {
                center: back(&center),
                normal,
                radius: radius * s,
            },
            CurveGeometry::Bezier(c) => CurveGeometry::Bezier(c.map(|p| back(&p))),
        };
    }
    for f in &mut out.faces {
        let p = &mut f.primitive;
        p.rms_residual *= s;
        p.surface = match p.surface {
            Surface::Plane { normal, offset } => Surface::Plane {
                normal,
                offset: offset * s + normal.dot(&sim.offset),
            },
            Surface::Cylinder {
                axis_point,
                axis,
                radius,
            } => Surface::Cylinder {
                axis_point: back(&axis_point),
                axis,
                radius: radius * s,
            },
            Surface::Sphere { center, radius } => Surface::Sphere {
                center: back(&center),
                radius: radius * s,
            },
        };
    }
    out
}

/// Points of one patch lying within `tol` of another patch's surface and
/// inside that patch's box — a stand-in for edge flags.
fn infer_edge_points(points: &[Vec3], owner: &[Option<usize>], fitted: &[FittedPatch], tol: f64) -> Vec<Vec3> {
    let boxes: Vec<Aabb> = fitted.iter().map(|p| p.bbox.expanded(tol)).collect();
    points
        .iter()
        .zip(owner)
        .filter(|(p, o)| {
            fitted
                .iter()
                .enumerate()
                .any(|(j, f)| Some(j) != **o && boxes[j].contains(p) && f.surface().distance(p) <= tol)
        })
        .map(|(p, _)| *p)
        .collect()
}

/// Runs the full reconstruction on a labeled cloud.
///
/// The cloud is normalized to the unit box, normals are estimated if
/// missing, every patch gets its best primitive (patches that cannot be
/// fitted are skipped and reported), directions are regularized, every
/// pair of nearby faces is intersected and trimmed against the edge points
/// near both, corners are clustered and the B-rep assembled. The result is
/// mapped back to the input frame. Output does not depend on thread count.
pub fn reconstruct(cloud: &LabeledPointCloud, cfg: &ReconstructConfig) -> std::result::Result<Reconstruction, StageError> {
    cfg.validate().map_err(at(Stage::Input))?;
    cloud.validate().map_err(|m| StageError {
        stage: Stage::Input,
        error: Error::Domain(m),
    })?;
    let groups = cloud.patches();
    if groups.is_empty() {
        return Err(StageError {
            stage: Stage::Input,
            error: Error::NoLabeledPatches,
        });
    }
    let (norm, sim) = normalize_cloud(cloud).map_err(at(Stage::Input))?;
    let norm = if norm.normals.is_some() {
        norm
    } else {
        estimate_normals(&norm, cfg.normals.neighbors).map_err(at(Stage::Normals))?
    };
    let normals = norm.normals.as_ref().expect("normals present");

    // per-patch fitting, one random stream per patch id
    let groups: Vec<(u32, Vec<usize>)> = groups.into_iter().collect();
    let results: Vec<(u32, Vec<Vec3>, Result<PrimitiveFit>)> = groups
        .par_iter()
        .map(|(id, idx)| {
            let pts: Vec<Vec3> = idx.iter().map(|&i| norm.points[i]).collect();
            let nrm: Vec<Vec3> = idx.iter().map(|&i| normals[i]).collect();
            let fit = if idx.len() < cfg.assembly.min_face_inliers {
                Err(Error::TooFewPoints {
                    needed: cfg.assembly.min_face_inliers,
                    got: idx.len(),
                })
            } else {
                select_primitive(&pts, &nrm, &cfg.ransac.for_stream(*id as u64))
            };
            (*id, pts, fit)
        })
        .collect();
    let mut skipped = Vec::new();
    let mut kept: Vec<(u32, Vec<Vec3>, PrimitiveFit)> = Vec::new();
    for (id, pts, fit) in results {
        match fit {
            Ok(f) => kept.push((id, pts, f)),
            Err(e) => {
                log::warn!("patch {id} skipped: {e}");
                skipped.push(SkippedPatch {
                    patch_id: id,
                    reason: e.to_string(),
                });
            }
        }
    }
    if kept.is_empty() {
        return Err(StageError {
            stage: Stage::Fitting,
            error: Error::Domain("no patch could be fitted".into()),
        });
    }
    let mut fits: Vec<PrimitiveFit> = kept.iter().map(|k| k.2.clone()).collect();
    {
        let refs: Vec<&[Vec3]> = kept.iter().map(|k| k.1.as_slice()).collect();
        regularize_directions(&mut fits, &refs, &cfg.ransac);
    }
    let fitted: Vec<FittedPatch> = kept
        .iter()
        .zip(fits)
        .map(|((id, pts, _), fit)| FittedPatch::new(*id, fit, pts))
        .collect();
    let fits_summary = fitted
        .iter()
        .zip(&kept)
        .map(|(f, k)| FitSummary {
            patch_id: f.patch_id,
            kind: f.fit.primitive.kind(),
            points: k.1.len(),
            inliers: f.fit.inlier_indices.len(),
            rms: f.fit.primitive.rms_residual * sim.extent,
        })
        .collect();

    // edge points, inferred from the fits when the input has no flags
    let eps = cfg.ransac.inlier_threshold;
    let eta = cfg.trim.projection_threshold;
    let flagged = norm.edge_indices(EDGE_FLAG_THRESHOLD);
    let inferred = flagged.is_empty();
    let edge_points: Vec<Vec3> = if inferred {
        let slot = |id: Option<u32>| id.and_then(|id| fitted.iter().position(|f| f.patch_id == id));
        let owner: Vec<Option<usize>> = norm.patch_ids.iter().map(|&id| slot(id)).collect();
        let pts = infer_edge_points(&norm.points, &owner, &fitted, 2.0 * eps);
        log::info!("input has no edge flags; inferred {} edge points from the fits", pts.len());
        pts
    } else {
        flagged.iter().map(|&i| norm.points[i]).collect()
    };

    // pairwise intersections, gated by expanded patch boxes
    let gate: Vec<Aabb> = fitted.iter().map(|f| f.bbox.expanded(eta + 3.0 * eps)).collect();
    let pairs: Vec<(usize, usize)> = (0..fitted.len())
        .flat_map(|i| (i + 1..fitted.len()).map(move |j| (i, j)))
        .filter(|&(i, j)| gate[i].intersects(&gate[j]))
        .collect();
    let per_pair: Vec<(usize, Vec<CurveSegment>)> = pairs
        .par_iter()
        .map(|&(i, j)| {
            let (a, b) = (fitted[i].surface(), fitted[j].surface());
            let near: Vec<Vec3> = edge_points
                .iter()
                .filter(|p| gate[i].contains(p) && gate[j].contains(p) && a.distance(p) <= eta && b.distance(p) <= eta)
                .copied()
                .collect();
            if near.len() < cfg.trim.min_support {
                return (0, Vec::new());
            }
            let mut domain = fitted[i].bbox;
            domain.insert(&fitted[j].bbox.min);
            domain.insert(&fitted[j].bbox.max);
            let inter = intersect_primitives(a, b, [i, j], &near, &domain.expanded(eta), &cfg.trace);
            let mut segs = Vec::new();
            for curve in inter.curves() {
                let proj = project_edge_points(curve, &near, &cfg.trim);
                segs.extend(extract_segments(&proj, curve, &cfg.trim));
            }
            (inter.curves().len(), segs)
        })
        .collect();
    let candidate_curves = per_pair.iter().map(|p| p.0).sum();
    let segments: Vec<CurveSegment> = per_pair.into_iter().flat_map(|p| p.1).collect();

    let surfaces: Vec<Surface> = fitted.iter().map(|f| *f.surface()).collect();
    let candidates = corner_candidates(&surfaces, Some(&gate), &segments, &cfg.trim);
    let corners = cluster_corners(&candidates, &cfg.trim);

    let assembly = assemble_brep(&fitted, &segments, &corners, &cfg.assembly).map_err(at(Stage::Assembly))?;
    let model = denormalize_model(&assembly.model, &sim);
    let summary = Summary {
        points: cloud.len(),
        patches: groups.len(),
        fits: fits_summary,
        skipped,
        edge_points: edge_points.len(),
        inferred_edge_points: inferred,
        candidate_curves,
        segments: segments.len(),
        faces: model.faces.len(),
        edges: model.edges.len(),
        corners: model.corners.len(),
        watertight: assembly.report.is_watertight(),
    };
    Ok(Reconstruction {
        model,
        report: assembly.report,
        summary,
        transform: sim,
    })
}
