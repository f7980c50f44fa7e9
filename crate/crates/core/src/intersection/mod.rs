//! Surface–surface intersection, trimming of candidate curves against edge
//! points, and corner derivation.

mod analytic;
mod corners;
mod trace;
mod trim;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::{Aabb, CurveGeometry, Surface, Vec3};

pub use crate::bezier::fit_bezier;
pub use analytic::intersect_analytic;
pub use corners::{cluster_corners, corner_candidates};
pub use trace::trace_intersection_numeric;
pub use trim::{extract_segments, project_edge_points, Projection};
pub(crate) use trim::closest_on_curve;

/// An untrimmed intersection curve between two faces.
#[derive(Debug, Clone, PartialEq)]
pub struct CandidateCurve {
    pub geometry: CurveGeometry,
    pub source_faces: [usize; 2],
    /// `false` for Bézier pieces fitted to a numerically traced polyline.
    pub is_analytic: bool,
}

/// Result of intersecting two surfaces.
#[derive(Debug, Clone, PartialEq)]
pub enum PairIntersection {
    Curves(Vec<CandidateCurve>),
    /// Both surfaces describe the same point set (within 1e-6).
    Coincident,
}

impl PairIntersection {
    pub fn curves(&self) -> &[CandidateCurve] {
        match self {
            PairIntersection::Curves(c) => c,
            PairIntersection::Coincident => &[],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrimConfig {
    /// η: max distance of an edge point to a curve for it to count as support.
    pub projection_threshold: f64,
    /// g: split gap, as a fraction of the parameter span.
    pub gap_threshold: f64,
    /// m: minimum supports per segment.
    pub min_support: usize,
    /// r_c: single-linkage merge radius for corner candidates.
    pub corner_cluster_radius: f64,
}

impl Default for TrimConfig {
    fn default() -> Self {
        TrimConfig {
            projection_threshold: 0.02,
            gap_threshold: 0.05,
            min_support: 5,
            corner_cluster_radius: 0.02,
        }
    }
}

impl TrimConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.projection_threshold > 0.0 && self.gap_threshold > 0.0 && self.corner_cluster_radius > 0.0)
            || self.min_support == 0
        {
            return Err(Error::Config("trim parameters must be strictly positive".into()));
        }
        Ok(())
    }
}

/// Settings of the numeric marcher used for non-analytic pairs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TraceConfig {
    /// Arc-length step between polyline vertices.
    pub step: f64,
    /// Seeds must lie within this distance of both surfaces (2ε by default).
    pub seed_tolerance: f64,
    /// Max deviation of the fitted Bézier chain from the traced polyline.
    pub fit_tolerance: f64,
    /// Hard cap on marching steps per direction.
    pub max_steps: usize,
}

impl Default for TraceConfig {
    fn default() -> Self {
        TraceConfig {
            step: 0.005,
            seed_tolerance: 0.02,
            fit_tolerance: 5e-4,
            max_steps: 20_000,
        }
    }
}

impl TraceConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.step > 0.0 && self.seed_tolerance > 0.0 && self.fit_tolerance > 0.0) || self.max_steps == 0 {
            return Err(Error::Config("trace parameters must be strictly positive".into()));
        }
        Ok(())
    }
}

/// Tolerance for treating two surfaces as the same.
pub const COINCIDENT_TOL: f64 = 1e-6;

/// Intersects two surfaces. Analytic cases are solved in closed form; the
/// others are traced from `seeds` inside `domain` and fitted with Bézier
/// chains.
pub fn intersect_primitives(
    a: &Surface,
    b: &Surface,
    faces: [usize; 2],
    seeds: &[Vec3],
    domain: &Aabb,
    cfg: &TraceConfig,
) -> PairIntersection {
    if let Some(result) = intersect_analytic(a, b, faces) {
        return result;
    }
    let mut curves = Vec::new();
    for poly in trace_intersection_numeric(a, b, seeds, domain, cfg) {
        let Ok(chain) = fit_bezier(&poly, cfg.fit_tolerance) else { continue };
        curves.extend(chain.into_iter().map(|ctrl| CandidateCurve {
            geometry: CurveGeometry::Bezier(ctrl),
            source_faces: faces,
            is_analytic: false,
        }));
    }
    PairIntersection::Curves(curves)
}
