//! Segmentation precision/recall/F1 over patch sets, and Chamfer/Hausdorff
//! distances for reconstructed surfaces and edges.
//!
//! Nearest-neighbor queries go through a k-d tree whose results equal a
//! brute-force scan bit for bit, so every metric here matches its quadratic
//! definition exactly.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fitting::derive_seed;
use crate::region::FaceRegion;
use crate::spatial::KdTree;
use crate::types::{BRepModel, LabeledPointCloud, Vec3};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MetricConfig {
    /// Matching threshold τ in unit length.
    pub tau: f64,
    /// Samples per face for CAD metrics.
    pub surface_samples: usize,
    /// Samples per edge for CAD metrics.
    pub curve_samples: usize,
}

impl Default for MetricConfig {
    fn default() -> Self {
        MetricConfig {
            tau: 0.08,
            surface_samples: 4096,
            curve_samples: 512,
        }
    }
}

impl MetricConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tau > 0.0) || !self.tau.is_finite() {
            return Err(Error::Config(format!("metrics.tau must be > 0, got {}", self.tau)));
        }
        if self.surface_samples == 0 || self.curve_samples == 0 {
            return Err(Error::Config("metrics sample densities must be > 0".into()));
        }
        Ok(())
    }
}

/// A list of non-empty point sets.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PatchSet {
    patches: Vec<Vec<Vec3>>,
}

impl PatchSet {
    pub fn new(patches: Vec<Vec<Vec3>>) -> Result<Self> {
        if let Some(i) = patches.iter().position(Vec::is_empty) {
            return Err(Error::Domain(format!("patch {i} is empty")));
        }
        Ok(PatchSet { patches })
    }

    /// Groups the labeled points of a cloud by patch id (ascending);
    /// unlabeled points belong to no patch.
    pub fn from_cloud(cloud: &LabeledPointCloud) -> Self {
        let patches = cloud
            .patches()
            .into_values()
            .map(|idx| idx.iter().map(|&i| cloud.points[i]).collect())
            .collect();
        PatchSet { patches }
    }

    pub fn patches(&self) -> &[Vec<Vec3>] {
        &self.patches
    }

    pub fn len(&self) -> usize {
        self.patches.len()
    }

    pub fn is_empty(&self) -> bool {
        self.patches.is_empty()
    }
}

/// Precomputed index over one point set.
struct Indexed {
    tree: KdTree,
}

impl Indexed {
    fn new(points: &[Vec3]) -> Self {
        Indexed {
            tree: KdTree::new(points),
        }
    }

    fn nn_distance(&self, p: &Vec3) -> f64 {
        self.tree.nearest(p).map(|(_, d2)| d2.sqrt()).unwrap_or(f64::INFINITY)
    }

    /// Mean over `from` of the distance to the nearest indexed point.
    fn mean_from(&self, from: &[Vec3]) -> f64 {
        let sum: f64 = from.iter().map(|p| self.nn_distance(p)).sum();
        sum / from.len() as f64
    }

    fn max_from(&self, from: &[Vec3]) -> f64 {
        from.iter().map(|p| self.nn_distance(p)).fold(0.0, f64::max)
    }
}

fn non_empty(a: &[Vec3], b: &[Vec3]) -> Result<()> {
    if a.is_empty() || b.is_empty() {
        Err(Error::EmptyInput)
    } else {
        Ok(())
    }
}

/// D(S, G): mean over `s` of the distance to the closest point of `g`.
pub fn mean_min_distance(s: &[Vec3], g: &[Vec3]) -> Result<f64> {
    non_empty(s, g)?;
    Ok(Indexed::new(g).mean_from(s))
}

/// Fraction of `from` patches whose D to some `to` patch is within τ.
fn matched_fraction(from: &PatchSet, to: &PatchSet, tau: f64) -> f64 {
    let index: Vec<Indexed> = to.patches.iter().map(|p| Indexed::new(p)).collect();
    let matched = from
        .patches
        .par_iter()
        .filter(|s| index.iter().any(|g| g.mean_from(s) <= tau))
        .count();
    matched as f64 / from.len() as f64
}

/// Fraction of predicted patches S_i with min_j D(S_i, G_j) ≤ τ.
pub fn patch_precision(pred: &PatchSet, gt: &PatchSet, cfg: &MetricConfig) -> Result<f64> {
    cfg.validate()?;
    if pred.is_empty() {
        return Err(Error::EmptyInput);
    }
    Ok(matched_fraction(pred, gt, cfg.tau))
}

/// Fraction of ground-truth patches G_j with min_i D(G_j, S_i) ≤ τ. The
/// distance is measured from the ground-truth side.
pub fn patch_recall(pred: &PatchSet, gt: &PatchSet, cfg: &MetricConfig) -> Result<f64> {
    cfg.validate()?;
    if gt.is_empty() {
        return Err(Error::EmptyInput);
    }
    Ok(matched_fraction(gt, pred, cfg.tau))
}

/// Harmonic mean; `f1(0, 0) = 0` by convention.
pub fn f1(precision: f64, recall: f64) -> f64 {
    if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    }
}

/// ½·D(A, B) + ½·D(B, A).
pub fn chamfer(a: &[Vec3], b: &[Vec3]) -> Result<f64> {
    non_empty(a, b)?;
    Ok(0.5 * Indexed::new(b).mean_from(a) + 0.5 * Indexed::new(a).mean_from(b))
}

/// Largest nearest-neighbor distance in either direction.
pub fn hausdorff(a: &[Vec3], b: &[Vec3]) -> Result<f64> {
    non_empty(a, b)?;
    Ok(Indexed::new(b).max_from(a).max(Indexed::new(a).max_from(b)))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Prf {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

impl Prf {
    pub fn new(precision: f64, recall: f64) -> Self {
        Prf {
            precision,
            recall,
            f1: f1(precision, recall),
        }
    }

    /// Mean precision and recall over several models; F1 is recomputed from
    /// the means.
    pub fn mean(items: &[Prf]) -> Option<Prf> {
        if items.is_empty() {
            return None;
        }
        let n = items.len() as f64;
        let p = items.iter().map(|x| x.precision).sum::<f64>() / n;
        let r = items.iter().map(|x| x.recall).sum::<f64>() / n;
        Some(Prf::new(p, r))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegReport {
    pub pred_patches: usize,
    pub gt_patches: usize,
    pub patches: Prf,
    /// Edge points (edge flag ≥ 0.5) as one patch on each side. `None` when
    /// neither cloud has edge points; all zeros when only one side has them.
    pub edges: Option<Prf>,
}

const EDGE_FLAG_THRESHOLD: f64 = 0.5;

/// Patch and edge precision/recall/F1 of a predicted labeling against ground
/// truth.
pub fn evaluate_segmentation(pred: &LabeledPointCloud, gt: &LabeledPointCloud, cfg: &MetricConfig) -> Result<SegReport> {
    cfg.validate()?;
    let (ps, gs) = (PatchSet::from_cloud(pred), PatchSet::from_cloud(gt));
    if ps.is_empty() || gs.is_empty() {
        return Err(Error::NoLabeledPatches);
    }
    let patches = Prf::new(patch_precision(&ps, &gs, cfg)?, patch_recall(&ps, &gs, cfg)?);
    let edge_set = |c: &LabeledPointCloud| -> Vec<Vec3> {
        c.edge_indices(EDGE_FLAG_THRESHOLD).iter().map(|&i| c.points[i]).collect()
    };
    let (pe, ge) = (edge_set(pred), edge_set(gt));
    let edges = match (pe.is_empty(), ge.is_empty()) {
        (true, true) => None,
        (false, false) => {
            let (pe, ge) = (PatchSet { patches: vec![pe] }, PatchSet { patches: vec![ge] });
            Some(Prf::new(patch_precision(&pe, &ge, cfg)?, patch_recall(&pe, &ge, cfg)?))
        }
        _ => Some(Prf::new(0.0, 0.0)),
    };
    Ok(SegReport {
        pred_patches: ps.len(),
        gt_patches: gs.len(),
        patches,
        edges,
    })
}

/// `per_face` samples on every face, uniform over its trimmed region. Each
/// face draws from its own stream, so the result does not depend on thread
/// scheduling.
pub fn sample_model_surfaces(model: &BRepModel, per_face: usize, seed: u64) -> Vec<Vec3> {
    let per: Vec<Vec<Vec3>> = (0..model.faces.len())
        .into_par_iter()
        .map(|f| {
            let region = FaceRegion::new(model, f);
            if !region.trimmed {
                log::warn!("face {f} is not watertight; sampling its untrimmed support region");
            }
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, f as u64));
            let pts = region.sample(per_face, &mut rng);
            if pts.len() < per_face {
                log::warn!("face {f}: only {} of {per_face} samples landed inside its loops", pts.len());
            }
            pts
        })
        .collect();
    per.concat()
}

/// `per_edge` samples uniform in parameter along every edge.
pub fn sample_model_edges(model: &BRepModel, per_edge: usize) -> Vec<Vec3> {
    model.edges.iter().flat_map(|e| e.sample(per_edge)).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Distances {
    pub chamfer: f64,
    pub hausdorff: f64,
}

impl Distances {
    pub fn between(a: &[Vec3], b: &[Vec3]) -> Result<Distances> {
        Ok(Distances {
            chamfer: chamfer(a, b)?,
            hausdorff: hausdorff(a, b)?,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CadReport {
    pub faces: usize,
    pub edges: usize,
    pub surface: Distances,
    /// Model edges against ground-truth edge points; `None` when either side
    /// has no edges.
    pub curve: Option<Distances>,
}

/// Surface and curve Chamfer/Hausdorff distances of a model against a
/// ground-truth cloud (all points for surfaces, edge-flagged points for
/// curves).
pub fn evaluate_cad(model: &BRepModel, gt: &LabeledPointCloud, cfg: &MetricConfig, seed: u64) -> Result<CadReport> {
    cfg.validate()?;
    if model.faces.is_empty() {
        return Err(Error::EmptyModel);
    }
    if gt.is_empty() {
        return Err(Error::EmptyInput);
    }
    let surf = sample_model_surfaces(model, cfg.surface_samples, seed);
    if surf.is_empty() {
        return Err(Error::Domain("no face of the model could be sampled".into()));
    }
    let surface = Distances::between(&surf, &gt.points)?;
    let gt_edges: Vec<Vec3> = gt.edge_indices(EDGE_FLAG_THRESHOLD).iter().map(|&i| gt.points[i]).collect();
    let model_edges = sample_model_edges(model, cfg.curve_samples);
    let curve = if gt_edges.is_empty() || model_edges.is_empty() {
        None
    } else {
        Some(Distances::between(&model_edges, &gt_edges)?)
    };
    Ok(CadReport {
        faces: model.faces.len(),
        edges: model.edges.len(),
        surface,
        curve,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn brute_mean(s: &[Vec3], g: &[Vec3]) -> f64 {
        let mut sum = 0.0;
        for p in s {
            let mut best = f64::INFINITY;
            for q in g {
                best = best.min((p - q).norm());
            }
            sum += best;
        }
        sum / s.len() as f64
    }

    fn cloud(rng: &mut ChaCha8Rng, n: usize) -> Vec<Vec3> {
        (0..n).map(|_| Vec3::new(rng.random(), rng.random(), rng.random())).collect()
    }

    #[test]
    fn mean_min_distance_examples() {
        let s = [Vec3::zeros()];
        let g = [Vec3::new(0.1, 0.0, 0.0), Vec3::new(5.0, 5.0, 5.0)];
        assert_eq!(mean_min_distance(&s, &g).unwrap(), 0.1);
        assert_eq!(mean_min_distance(&g, &g).unwrap(), 0.0);
        // asymmetric: the far point of g only counts from g's side
        assert!(mean_min_distance(&g, &s).unwrap() > 4.0);
        assert!(matches!(mean_min_distance(&[], &g), Err(Error::EmptyInput)));
    }

    #[test]
    fn distances_match_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for (na, nb) in [(1, 1), (50, 300), (2000, 1500)] {
            let a = cloud(&mut rng, na);
            let b = cloud(&mut rng, nb);
            assert_eq!(mean_min_distance(&a, &b).unwrap(), brute_mean(&a, &b));
            assert_eq!(chamfer(&a, &b).unwrap(), 0.5 * brute_mean(&a, &b) + 0.5 * brute_mean(&b, &a));
        }
    }

    #[test]
    fn hausdorff_far_extra_point() {
        let a = vec![Vec3::zeros(), Vec3::x()];
        let mut b = a.clone();
        b.push(Vec3::new(0.0, 3.0, 0.0));
        assert_eq!(hausdorff(&a, &b).unwrap(), 3.0);
        assert_eq!(hausdorff(&a, &a).unwrap(), 0.0);
        assert_eq!(chamfer(&[Vec3::zeros()], &[Vec3::x()]).unwrap(), 1.0);
    }

    /// Two dense unit squares far apart.
    fn two_patches() -> PatchSet {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut square = |dx: f64| -> Vec<Vec3> {
            (0..400).map(|_| Vec3::new(dx + rng.random::<f64>(), rng.random(), 0.0)).collect()
        };
        let (a, b) = (square(0.0), square(3.0));
        PatchSet::new(vec![a, b]).unwrap()
    }

    #[test]
    fn precision_recall_examples() {
        let cfg = MetricConfig::default();
        let gt = two_patches();
        assert_eq!(patch_precision(&gt, &gt, &cfg).unwrap(), 1.0);
        assert_eq!(patch_recall(&gt, &gt, &cfg).unwrap(), 1.0);

        let mut moved = gt.patches().to_vec();
        for p in &mut moved[1] {
            *p += Vec3::new(0.0, 0.0, 1.0);
        }
        let pred = PatchSet::new(moved).unwrap();
        assert_eq!(patch_precision(&pred, &gt, &cfg).unwrap(), 0.5);

        let half = PatchSet::new(vec![gt.patches()[0].clone()]).unwrap();
        assert_eq!(patch_recall(&half, &gt, &cfg).unwrap(), 0.5);
        assert_eq!(patch_precision(&half, &gt, &cfg).unwrap(), 1.0);

        assert!(patch_precision(&PatchSet::default(), &gt, &cfg).is_err());
        assert!(patch_recall(&gt, &PatchSet::default(), &cfg).is_err());
        assert!(PatchSet::new(vec![vec![]]).is_err());
    }

    #[test]
    fn over_segmentation_keeps_both_scores() {
        let cfg = MetricConfig::default();
        let gt = two_patches();
        let mut split = Vec::new();
        // interleaved halves: each still covers its whole patch densely
        for p in gt.patches() {
            split.push(p.iter().step_by(2).copied().collect());
            split.push(p.iter().skip(1).step_by(2).copied().collect());
        }
        let pred = PatchSet::new(split).unwrap();
        assert_eq!(patch_precision(&pred, &gt, &cfg).unwrap(), 1.0);
        assert_eq!(patch_recall(&pred, &gt, &cfg).unwrap(), 1.0);

        // a spatial cut keeps precision but loses recall, measured from G
        let mut cut = Vec::new();
        for p in gt.patches() {
            let (l, r): (Vec<Vec3>, Vec<Vec3>) = p.iter().partition(|q| q.y < 0.5);
            cut.push(l);
            cut.push(r);
        }
        let pred = PatchSet::new(cut).unwrap();
        assert_eq!(patch_precision(&pred, &gt, &cfg).unwrap(), 1.0);
        assert_eq!(patch_recall(&pred, &gt, &cfg).unwrap(), 0.0);
    }

    #[test]
    fn f1_values() {
        assert_eq!(f1(1.0, 1.0), 1.0);
        assert_eq!(f1(1.0, 0.0), 0.0);
        assert_eq!(f1(0.0, 0.0), 0.0);
        assert!((f1(0.8903, 0.9181) - 0.9040).abs() < 5e-5);
    }

    #[test]
    fn segmentation_report_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let cube = crate::synthetic::cube_cloud(&mut rng, 300, 0.0, 0.03);
        let r = evaluate_segmentation(&cube, &cube, &MetricConfig::default()).unwrap();
        assert_eq!(r.patches, Prf::new(1.0, 1.0));
        assert_eq!(r.edges, Some(Prf::new(1.0, 1.0)));
        assert_eq!((r.pred_patches, r.gt_patches), (6, 6));

        let unlabeled = LabeledPointCloud::from_points(cube.points.clone());
        assert!(matches!(
            evaluate_segmentation(&unlabeled, &cube, &MetricConfig::default()),
            Err(Error::NoLabeledPatches)
        ));
    }

    #[test]
    fn cad_requires_faces() {
        let gt = LabeledPointCloud::from_points(vec![Vec3::zeros()]);
        let empty = BRepModel {
            corners: vec![],
            edges: vec![],
            faces: vec![],
        };
        assert!(matches!(evaluate_cad(&empty, &gt, &MetricConfig::default(), 0), Err(Error::EmptyModel)));
    }
}
