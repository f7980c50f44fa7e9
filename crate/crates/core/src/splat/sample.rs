use serde::{Deserialize, Serialize};

use super::loss::norm;
use super::Gaussian2D;
use crate::error::{Error, Result};
use crate::types::LabeledPointCloud;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SamplingConfig {
    /// Splats with `max(s)/min(s)` above this emit only their center (ρ).
    pub elongation_threshold: f64,
    /// Features closer than this cosine distance share a patch.
    pub merge_distance: f64,
}

impl Default for SamplingConfig {
    fn default() -> Self {
        SamplingConfig {
            elongation_threshold: 4.0,
            merge_distance: 0.5,
        }
    }
}

impl SamplingConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.elongation_threshold >= 1.0) || !(self.merge_distance > 0.0) {
            return Err(Error::Config(
                "sampling.elongation_threshold must be >= 1 and merge_distance > 0".into(),
            ));
        }
        Ok(())
    }
}

fn find(parent: &mut [usize], mut i: usize) -> usize {
    while parent[i] != i {
        parent[i] = parent[parent[i]];
        i = parent[i];
    }
    i
}

/// Single-linkage grouping of splat features: pairs closer than
/// `merge_distance` (cosine) are merged. Labels are numbered by first
/// appearance; splats with a zero feature stay unlabeled.
fn feature_labels(gaussians: &[Gaussian2D], merge_distance: f64) -> Vec<Option<u32>> {
    let unit: Vec<Option<Vec<f64>>> = gaussians
        .iter()
        .map(|g| {
            let n = norm(&g.feature);
            (n > 0.0).then(|| g.feature.iter().map(|v| v / n).collect())
        })
        .collect();
    let mut parent: Vec<usize> = (0..gaussians.len()).collect();
    for i in 0..gaussians.len() {
        let Some(a) = &unit[i] else { continue };
        for j in i + 1..gaussians.len() {
            let Some(b) = &unit[j] else { continue };
            let d = 1.0 - a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
            if d < merge_distance {
                let (ra, rb) = (find(&mut parent, i), find(&mut parent, j));
                if ra != rb {
                    parent[ra.max(rb)] = ra.min(rb);
                }
            }
        }
    }
    let mut ids = std::collections::HashMap::new();
    (0..gaussians.len())
        .map(|i| {
            unit[i].as_ref()?;
            let r = find(&mut parent, i);
            let next = ids.len() as u32;
            Some(*ids.entry(r).or_insert(next))
        })
        .collect()
}

/// Every splat emits its center; splats no more elongated than ρ also emit
/// `p ± s_u·t_u` and `p ± s_v·t_v`. Points inherit the splat's edge value,
/// feature and unit normal.
pub fn sample_gaussians_to_points(gaussians: &[Gaussian2D], cfg: &SamplingConfig) -> LabeledPointCloud {
    let labels = feature_labels(gaussians, cfg.merge_distance);
    let mut cloud = LabeledPointCloud::default();
    let mut normals = Vec::new();
    let mut features = Vec::new();
    for (g, label) in gaussians.iter().zip(labels) {
        let [su, sv] = g.scale;
        let mut pts = vec![g.center];
        if su.max(sv) / su.min(sv) <= cfg.elongation_threshold {
            pts.extend([
                g.center + g.t_u * su,
                g.center - g.t_u * su,
                g.center + g.t_v * sv,
                g.center - g.t_v * sv,
            ]);
        }
        let n = g.normal().normalize();
        for p in pts {
            cloud.points.push(p);
            cloud.patch_ids.push(label);
            cloud.edge_flags.push(g.edge);
            normals.push(n);
            features.push(g.feature.clone());
        }
    }
    cloud.normals = Some(normals);
    cloud.features = Some(features);
    cloud
}
