//! Shared geometric and pipeline data types.

use std::collections::BTreeMap;
use std::f64::consts::TAU;

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

pub type Vec3 = Vector3<f64>;

/// Axis-aligned bounding box.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Aabb {
    pub min: Vec3,
    pub max: Vec3,
}

impl Aabb {
    pub fn empty() -> Self {
        Aabb {
            min: Vec3::repeat(f64::INFINITY),
            max: Vec3::repeat(f64::NEG_INFINITY),
        }
    }

    pub fn from_points<'a>(points: impl IntoIterator<Item = &'a Vec3>) -> Self {
        let mut b = Aabb::empty();
        for p in points {
            b.insert(p);
        }
        b
    }

    pub fn insert(&mut self, p: &Vec3) {
        self.min = self.min.inf(p);
        self.max = self.max.sup(p);
    }

    pub fn is_empty(&self) -> bool {
        self.min.x > self.max.x
    }

    pub fn expanded(&self, margin: f64) -> Self {
        Aabb {
            min: self.min.add_scalar(-margin),
            max: self.max.add_scalar(margin),
        }
    }

    pub fn contains(&self, p: &Vec3) -> bool {
        (0..3).all(|i| p[i] >= self.min[i] && p[i] <= self.max[i])
    }

    pub fn intersects(&self, other: &Aabb) -> bool {
        (0..3).all(|i| self.min[i] <= other.max[i] && other.min[i] <= self.max[i])
    }

    pub fn extent(&self) -> Vec3 {
        self.max - self.min
    }
}

/// Point cloud with per-point patch labels and edge probabilities.
///
/// `patch_ids[i] == None` is the unlabeled sentinel: such points never vote in
/// fitting and belong to no patch in metrics.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct LabeledPointCloud {
    pub points: Vec<Vec3>,
    pub normals: Option<Vec<Vec3>>,
    pub patch_ids: Vec<Option<u32>>,
    pub edge_flags: Vec<f64>,
    /// Per-point feature embeddings, carried over from splat sampling.
    pub features: Option<Vec<Vec<f64>>>,
}

impl LabeledPointCloud {
    /// Unlabeled, non-edge cloud.
    pub fn from_points(points: Vec<Vec3>) -> Self {
        let n = points.len();
        LabeledPointCloud {
            points,
            normals: None,
            patch_ids: vec![None; n],
            edge_flags: vec![0.0; n],
            features: None,
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Checks array lengths and the value-range invariants.
    pub fn validate(&self) -> Result<(), String> {
        let n = self.points.len();
        if self.patch_ids.len() != n || self.edge_flags.len() != n {
            return Err("per-point arrays differ in length".into());
        }
        if let Some(pos) = self.points.iter().position(|p| !p.iter().all(|c| c.is_finite())) {
            return Err(format!("non-finite coordinate at point {pos}"));
        }
        if let Some(normals) = &self.normals {
            if normals.len() != n {
                return Err("normals length differs from points".into());
            }
            if let Some(pos) = normals.iter().position(|v| (v.norm() - 1.0).abs() > 1e-6) {
                return Err(format!("normal {pos} is not unit length"));
            }
        }
        if let Some(pos) = self.edge_flags.iter().position(|e| !(0.0..=1.0).contains(e)) {
            return Err(format!("edge flag {pos} outside [0, 1]"));
        }
        if let Some(features) = &self.features {
            if features.len() != n {
                return Err("features length differs from points".into());
            }
        }
        Ok(())
    }

    /// Point indices grouped by patch label, in ascending label order.
    pub fn patches(&self) -> BTreeMap<u32, Vec<usize>> {
        let mut out: BTreeMap<u32, Vec<usize>> = BTreeMap::new();
        for (i, id) in self.patch_ids.iter().enumerate() {
            if let Some(id) = id {
                out.entry(*id).or_default().push(i);
            }
        }
        out
    }

    /// Renumbers labels to `0..K` preserving their relative order.
    pub fn compact_labels(&mut self) {
        let remap: BTreeMap<u32, u32> = self
            .patches()
            .keys()
            .enumerate()
            .map(|(new, old)| (*old, new as u32))
            .collect();
        for id in self.patch_ids.iter_mut().flatten() {
            *id = remap[id];
        }
    }

    pub fn edge_indices(&self, threshold: f64) -> Vec<usize> {
        (0..self.len())
            .filter(|&i| self.edge_flags[i] >= threshold)
            .collect()
    }

    pub fn select(&self, indices: &[usize]) -> LabeledPointCloud {
        LabeledPointCloud {
            points: indices.iter().map(|&i| self.points[i]).collect(),
            normals: self
                .normals
                .as_ref()
                .map(|n| indices.iter().map(|&i| n[i]).collect()),
            patch_ids: indices.iter().map(|&i| self.patch_ids[i]).collect(),
            edge_flags: indices.iter().map(|&i| self.edge_flags[i]).collect(),
            features: self
                .features
                .as_ref()
                .map(|f| indices.iter().map(|&i| f[i].clone()).collect()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum PrimitiveKind {
    Plane,
    Cylinder,
    Sphere,
}

impl std::fmt::Display for PrimitiveKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            PrimitiveKind::Plane => "plane",
            PrimitiveKind::Cylinder => "cylinder",
            PrimitiveKind::Sphere => "sphere",
        })
    }
}

/// Analytic surface. Implicit functions are signed distances, so their
/// gradients have unit length away from the axis/center.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Surface {
    /// `normal · x = offset`
    Plane { normal: Vec3, offset: f64 },
    Cylinder {
        axis_point: Vec3,
        axis: Vec3,
        radius: f64,
    },
    Sphere { center: Vec3, radius: f64 },
}

/// Flips `v` so its first component with magnitude above 1e-12 is positive.
pub fn canonical_sign(v: &Vec3) -> f64 {
    for c in v.iter() {
        if c.abs() > 1e-12 {
            return c.signum();
        }
    }
    1.0
}

impl Surface {
    pub fn kind(&self) -> PrimitiveKind {
        match self {
            Surface::Plane { .. } => PrimitiveKind::Plane,
            Surface::Cylinder { .. } => PrimitiveKind::Cylinder,
            Surface::Sphere { .. } => PrimitiveKind::Sphere,
        }
    }

    /// Signed distance.
    pub fn implicit(&self, x: &Vec3) -> f64 {
        match *self {
            Surface::Plane { normal, offset } => normal.dot(x) - offset,
            Surface::Cylinder {
                axis_point,
                axis,
                radius,
            } => {
                let w = x - axis_point;
                (w - axis * w.dot(&axis)).norm() - radius
            }
            Surface::Sphere { center, radius } => (x - center).norm() - radius,
        }
    }

    pub fn distance(&self, x: &Vec3) -> f64 {
        self.implicit(x).abs()
    }

    pub fn gradient(&self, x: &Vec3) -> Vec3 {
        match *self {
            Surface::Plane { normal, .. } => normal,
            Surface::Cylinder {
                axis_point, axis, ..
            } => {
                let w = x - axis_point;
                let radial = w - axis * w.dot(&axis);
                let n = radial.norm();
                if n > 0.0 {
                    radial / n
                } else {
                    Vec3::zeros()
                }
            }
            Surface::Sphere { center, .. } => {
                let d = x - center;
                let n = d.norm();
                if n > 0.0 {
                    d / n
                } else {
                    Vec3::zeros()
                }
            }
        }
    }

    /// Closest point on the surface.
    pub fn project(&self, x: &Vec3) -> Vec3 {
        let g = self.gradient(x);
        x - g * self.implicit(x)
    }

    /// Sign-fixes the plane normal / cylinder axis.
    pub fn canonical(&self) -> Surface {
        match *self {
            Surface::Plane { normal, offset } => {
                let s = canonical_sign(&normal);
                Surface::Plane {
                    normal: normal * s,
                    offset: offset * s,
                }
            }
            Surface::Cylinder {
                axis_point,
                axis,
                radius,
            } => Surface::Cylinder {
                axis_point,
                axis: axis * canonical_sign(&axis),
                radius,
            },
            s => s,
        }
    }

    /// Applies `x -> rotation * x + translation`.
    pub fn transformed(&self, rotation: &nalgebra::Rotation3<f64>, translation: &Vec3) -> Surface {
        match *self {
            Surface::Plane { normal, offset } => {
                let n = rotation * normal;
                Surface::Plane {
                    normal: n,
                    offset: offset + n.dot(translation),
                }
            }
            Surface::Cylinder {
                axis_point,
                axis,
                radius,
            } => Surface::Cylinder {
                axis_point: rotation * axis_point + translation,
                axis: rotation * axis,
                radius,
            },
            Surface::Sphere { center, radius } => Surface::Sphere {
                center: rotation * center + translation,
                radius,
            },
        }
    }

    /// Whether both describe the same point set within `tol`.
    pub fn coincides_with(&self, other: &Surface, tol: f64) -> bool {
        match (*self, *other) {
            (
                Surface::Plane { normal: n1, offset: d1 },
                Surface::Plane { normal: n2, offset: d2 },
            ) => {
                let s = n1.dot(&n2).signum();
                (n1 - n2 * s).norm() < tol && (d1 - d2 * s).abs() < tol
            }
            (
                Surface::Cylinder {
                    axis_point: a1,
                    axis: v1,
                    radius: r1,
                },
                Surface::Cylinder {
                    axis_point: a2,
                    axis: v2,
                    radius: r2,
                },
            ) => {
                let w = a2 - a1;
                v1.cross(&v2).norm() < tol
                    && (w - v1 * w.dot(&v1)).norm() < tol
                    && (r1 - r2).abs() < tol
            }
            (
                Surface::Sphere { center: c1, radius: r1 },
                Surface::Sphere { center: c2, radius: r2 },
            ) => (c1 - c2).norm() < tol && (r1 - r2).abs() < tol,
            _ => false,
        }
    }
}

/// Fitted surface with its support statistics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Primitive {
    pub surface: Surface,
    pub inlier_count: usize,
    pub rms_residual: f64,
}

impl Primitive {
    pub fn kind(&self) -> PrimitiveKind {
        self.surface.kind()
    }
}

/// Unit vectors spanning the plane orthogonal to `n`. The first one is the
/// projection of global +x (or +y when `n` is parallel to x).
pub fn plane_basis(n: &Vec3) -> (Vec3, Vec3) {
    let mut e1 = Vec3::x() - n * n.x;
    if e1.norm() < 1e-9 {
        e1 = Vec3::y() - n * n.y;
    }
    let e1 = e1.normalize();
    (e1, n.cross(&e1))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CurveGeometry {
    /// `origin + t * direction`
    Line { origin: Vec3, direction: Vec3 },
    /// `t` is the angle from the reference direction of [`plane_basis`].
    Circle {
        center: Vec3,
        normal: Vec3,
        radius: f64,
    },
    /// Cubic Bézier with `t` in `[0, 1]`.
    Bezier([Vec3; 4]),
}

impl CurveGeometry {
    pub fn point(&self, t: f64) -> Vec3 {
        match *self {
            CurveGeometry::Line { origin, direction } => origin + direction * t,
            CurveGeometry::Circle {
                center,
                normal,
                radius,
            } => {
                let (e1, e2) = plane_basis(&normal);
                center + (e1 * t.cos() + e2 * t.sin()) * radius
            }
            CurveGeometry::Bezier(ctrl) => crate::bezier::eval(&ctrl, t),
        }
    }

    pub fn tangent(&self, t: f64) -> Vec3 {
        match *self {
            CurveGeometry::Line { direction, .. } => direction,
            CurveGeometry::Circle { normal, radius, .. } => {
                let (e1, e2) = plane_basis(&normal);
                (e2 * t.cos() - e1 * t.sin()) * radius
            }
            CurveGeometry::Bezier(ctrl) => crate::bezier::derivative(&ctrl, t),
        }
    }

    pub fn is_line(&self) -> bool {
        matches!(self, CurveGeometry::Line { .. })
    }

    pub fn kind_name(&self) -> &'static str {
        match self {
            CurveGeometry::Line { .. } => "line",
            CurveGeometry::Circle { .. } => "circle",
            CurveGeometry::Bezier(_) => "bezier",
        }
    }

    /// Natural parameter domain, if bounded.
    pub fn period(&self) -> Option<f64> {
        match self {
            CurveGeometry::Circle { .. } => Some(TAU),
            _ => None,
        }
    }
}

/// A trimmed curve.
#[derive(Debug, Clone, PartialEq)]
pub struct CurveSegment {
    pub geometry: CurveGeometry,
    pub t_range: (f64, f64),
    pub support_count: usize,
    pub endpoint_corners: [Option<usize>; 2],
    /// Indices into the model's faces of the two surfaces this curve lies on.
    pub source_faces: [Option<usize>; 2],
    pub closed: bool,
}

impl CurveSegment {
    pub fn start(&self) -> Vec3 {
        self.geometry.point(self.t_range.0)
    }

    pub fn end(&self) -> Vec3 {
        self.geometry.point(self.t_range.1)
    }

    pub fn endpoint(&self, which: usize) -> Vec3 {
        if which == 0 {
            self.start()
        } else {
            self.end()
        }
    }

    /// Point at normalized position `s` in `[0, 1]` along the trimmed range.
    pub fn point_at(&self, s: f64) -> Vec3 {
        let (lo, hi) = self.t_range;
        self.geometry.point(lo + (hi - lo) * s)
    }

    pub fn sample(&self, count: usize) -> Vec<Vec3> {
        let count = count.max(2);
        (0..count)
            .map(|i| self.point_at(i as f64 / (count - 1) as f64))
            .collect()
    }
}

/// One edge use inside a face boundary loop.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LoopEdge {
    pub edge: usize,
    pub forward: bool,
}

impl LoopEdge {
    /// 1-based signed index: `+(edge + 1)` forward, `-(edge + 1)` reversed.
    pub fn signed(&self) -> i64 {
        let i = self.edge as i64 + 1;
        if self.forward {
            i
        } else {
            -i
        }
    }

    pub fn from_signed(s: i64) -> Option<Self> {
        if s == 0 {
            return None;
        }
        Some(LoopEdge {
            edge: (s.unsigned_abs() - 1) as usize,
            forward: s > 0,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BRepFace {
    pub patch_id: u32,
    pub primitive: Primitive,
    pub loops: Vec<Vec<LoopEdge>>,
    /// Chains that failed to close; non-empty means the face is not watertight.
    pub open_chains: Vec<Vec<LoopEdge>>,
}

impl BRepFace {
    /// Every chain closed, and the face is bounded (a sphere may be whole).
    pub fn watertight(&self) -> bool {
        self.open_chains.is_empty() && (!self.loops.is_empty() || self.primitive.kind() == PrimitiveKind::Sphere)
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct BRepModel {
    pub corners: Vec<Vec3>,
    pub edges: Vec<CurveSegment>,
    pub faces: Vec<BRepFace>,
}

impl BRepModel {
    /// Face indices referencing each edge through their loops.
    pub fn adjacency(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.edges.len()];
        for (fi, face) in self.faces.iter().enumerate() {
            for le in face.loops.iter().chain(face.open_chains.iter()).flatten() {
                if !adj[le.edge].contains(&fi) {
                    adj[le.edge].push(fi);
                }
            }
        }
        adj
    }

    /// Watertight when every face closes and every edge has exactly two faces.
    pub fn is_watertight(&self) -> bool {
        self.faces.iter().all(BRepFace::watertight)
            && self.adjacency().iter().all(|f| f.len() == 2)
    }

    /// Checks the structural invariants; returns the first violation.
    pub fn check_invariants(&self, tol: f64) -> Result<(), String> {
        let nc = self.corners.len();
        for (i, e) in self.edges.iter().enumerate() {
            for c in e.endpoint_corners.iter().flatten() {
                if *c >= nc {
                    return Err(format!("edge {i} references missing corner {c}"));
                }
            }
            if e.t_range.0 >= e.t_range.1 {
                return Err(format!("edge {i} has an empty parameter range"));
            }
            if let Some(f) = e.source_faces.iter().flatten().find(|f| **f >= self.faces.len()) {
                return Err(format!("edge {i} references missing face {f}"));
            }
        }
        for (fi, face) in self.faces.iter().enumerate() {
            for lp in face.loops.iter().chain(face.open_chains.iter()) {
                if let Some(le) = lp.iter().find(|le| le.edge >= self.edges.len()) {
                    return Err(format!("face {fi} references missing edge {}", le.edge));
                }
            }
            for (li, lp) in face.loops.iter().enumerate() {
                for k in 0..lp.len() {
                    let a = &lp[k];
                    let b = &lp[(k + 1) % lp.len()];
                    let end = self.edges[a.edge].endpoint(if a.forward { 1 } else { 0 });
                    let start = self.edges[b.edge].endpoint(if b.forward { 0 } else { 1 });
                    if (end - start).norm() > tol {
                        return Err(format!("face {fi} loop {li} is not closed at position {k}"));
                    }
                }
            }
        }
        Ok(())
    }
}
