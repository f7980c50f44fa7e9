//! The B-rep document: JSON with a fixed field order and every real printed
//! with 17 significant digits, so identical models give identical bytes.

use std::fmt::Write as _;

use serde_json::Value;

use crate::error::{Error, Result};
use crate::types::{
    BRepFace, BRepModel, CurveGeometry, CurveSegment, LoopEdge, Primitive, Surface, Vec3,
};

pub const FORMAT_TAG: &str = "brepsplat-brep";
pub const VERSION: u64 = 1;

fn num(x: f64) -> Result<String> {
    if !x.is_finite() {
        return Err(Error::Domain(format!("cannot serialize non-finite value {x}")));
    }
    Ok(format!("{x:.16e}"))
}

fn vec3(v: &Vec3) -> Result<String> {
    Ok(format!("[{}, {}, {}]", num(v.x)?, num(v.y)?, num(v.z)?))
}

fn opt(i: Option<usize>) -> String {
    i.map_or_else(|| "null".to_string(), |i| i.to_string())
}

fn chains(lps: &[Vec<LoopEdge>]) -> String {
    let inner: Vec<String> = lps
        .iter()
        .map(|lp| {
            let s: Vec<String> = lp.iter().map(|le| le.signed().to_string()).collect();
            format!("[{}]", s.join(", "))
        })
        .collect();
    format!("[{}]", inner.join(", "))
}

fn geometry(g: &CurveGeometry) -> Result<String> {
    Ok(match g {
        CurveGeometry::Line { origin, direction } => {
            format!("\"kind\": \"line\", \"origin\": {}, \"direction\": {}", vec3(origin)?, vec3(direction)?)
        }
        CurveGeometry::Circle {
            center,
            normal,
            radius,
        } => format!(
            "\"kind\": \"circle\", \"center\": {}, \"normal\": {}, \"radius\": {}",
            vec3(center)?,
            vec3(normal)?,
            num(*radius)?
        ),
        CurveGeometry::Bezier(c) => format!(
            "\"kind\": \"bezier\", \"control\": [{}, {}, {}, {}]",
            vec3(&c[0])?,
            vec3(&c[1])?,
            vec3(&c[2])?,
            vec3(&c[3])?
        ),
    })
}

fn surface(s: &Surface) -> Result<String> {
    Ok(match s {
        Surface::Plane { normal, offset } => {
            format!("\"kind\": \"plane\", \"normal\": {}, \"offset\": {}", vec3(normal)?, num(*offset)?)
        }
        Surface::Cylinder {
            axis_point,
            axis,
            radius,
        } => format!(
            "\"kind\": \"cylinder\", \"axis_point\": {}, \"axis\": {}, \"radius\": {}",
            vec3(axis_point)?,
            vec3(axis)?,
            num(*radius)?
        ),
        Surface::Sphere { center, radius } => {
            format!("\"kind\": \"sphere\", \"center\": {}, \"radius\": {}", vec3(center)?, num(*radius)?)
        }
    })
}

pub fn brep_to_string(model: &BRepModel) -> Result<String> {
    let mut s = String::new();
    let _ = writeln!(s, "{{");
    let _ = writeln!(s, "  \"format\": \"{FORMAT_TAG}\",");
    let _ = writeln!(s, "  \"version\": {VERSION},");
    let _ = writeln!(s, "  \"watertight\": {},", model.is_watertight());
    let list = |s: &mut String, key: &str, items: Vec<String>, last: bool| {
        if items.is_empty() {
            let _ = write!(s, "  \"{key}\": []");
        } else {
            let _ = writeln!(s, "  \"{key}\": [");
            let _ = write!(s, "    {}", items.join(",\n    "));
            let _ = write!(s, "\n  ]");
        }
        let _ = writeln!(s, "{}", if last { "" } else { "," });
    };
    let corners = model.corners.iter().map(vec3).collect::<Result<Vec<_>>>()?;
    list(&mut s, "corners", corners, false);
    let edges = model
        .edges
        .iter()
        .map(|e| {
            Ok(format!(
                "{{{}, \"t_range\": [{}, {}], \"corners\": [{}, {}], \"faces\": [{}, {}], \"closed\": {}, \"support\": {}}}",
                geometry(&e.geometry)?,
                num(e.t_range.0)?,
                num(e.t_range.1)?,
                opt(e.endpoint_corners[0]),
                opt(e.endpoint_corners[1]),
                opt(e.source_faces[0]),
                opt(e.source_faces[1]),
                e.closed,
                e.support_count
            ))
        })
        .collect::<Result<Vec<_>>>()?;
    list(&mut s, "edges", edges, false);
    let faces = model
        .faces
        .iter()
        .map(|f| {
            Ok(format!(
                "{{\"patch_id\": {}, \"surface\": {{{}}}, \"inliers\": {}, \"rms\": {}, \"loops\": {}, \"open_chains\": {}, \"watertight\": {}}}",
                f.patch_id,
                surface(&f.primitive.surface)?,
                f.primitive.inlier_count,
                num(f.primitive.rms_residual)?,
                chains(&f.loops),
                chains(&f.open_chains),
                f.watertight()
            ))
        })
        .collect::<Result<Vec<_>>>()?;
    list(&mut s, "faces", faces, true);
    s.push_str("}\n");
    Ok(s)
}

struct Reader<'a> {
    path: String,
    v: &'a Value,
}

impl<'a> Reader<'a> {
    fn err(&self, msg: impl Into<String>) -> Error {
        Error::parse(if self.path.is_empty() { "document".to_string() } else { self.path.clone() }, msg)
    }

    fn field(&self, key: &str) -> Result<Reader<'a>> {
        let path = if self.path.is_empty() { key.to_string() } else { format!("{}.{key}", self.path) };
        match self.v.get(key) {
            Some(v) => Ok(Reader { path, v }),
            None => Err(Error::parse(path, "missing field")),
        }
    }

    fn items(&self) -> Result<Vec<Reader<'a>>> {
        let arr = self.v.as_array().ok_or_else(|| self.err("expected an array"))?;
        Ok(arr
            .iter()
            .enumerate()
            .map(|(i, v)| Reader {
                path: format!("{}[{i}]", self.path),
                v,
            })
            .collect())
    }

    fn f64(&self) -> Result<f64> {
        self.v.as_f64().filter(|x| x.is_finite()).ok_or_else(|| self.err("expected a finite number"))
    }

    fn usize(&self) -> Result<usize> {
        self.v
            .as_u64()
            .and_then(|x| usize::try_from(x).ok())
            .ok_or_else(|| self.err("expected a non-negative integer"))
    }

    fn opt_usize(&self) -> Result<Option<usize>> {
        if self.v.is_null() { Ok(None) } else { self.usize().map(Some) }
    }

    fn bool(&self) -> Result<bool> {
        self.v.as_bool().ok_or_else(|| self.err("expected true or false"))
    }

    fn str(&self) -> Result<&'a str> {
        self.v.as_str().ok_or_else(|| self.err("expected a string"))
    }

    fn vec3(&self) -> Result<Vec3> {
        let it = self.items()?;
        if it.len() != 3 {
            return Err(self.err("expected 3 numbers"));
        }
        Ok(Vec3::new(it[0].f64()?, it[1].f64()?, it[2].f64()?))
    }

    fn pair<T>(&self, f: impl Fn(&Reader<'a>) -> Result<T>) -> Result<[T; 2]> {
        let it = self.items()?;
        if it.len() != 2 {
            return Err(self.err("expected 2 entries"));
        }
        Ok([f(&it[0])?, f(&it[1])?])
    }

    fn chains(&self, edges: usize) -> Result<Vec<Vec<LoopEdge>>> {
        self.items()?
            .iter()
            .map(|lp| {
                lp.items()?
                    .iter()
                    .map(|s| {
                        let k = s.v.as_i64().ok_or_else(|| s.err("expected a signed edge index"))?;
                        match LoopEdge::from_signed(k) {
                            Some(le) if le.edge < edges => Ok(le),
                            _ => Err(s.err(format!("signed edge index {k} out of range 1..={edges}"))),
                        }
                    })
                    .collect()
            })
            .collect()
    }
}

fn read_edge(e: &Reader, corners: usize) -> Result<CurveSegment> {
    let geometry = match e.field("kind")?.str()? {
        "line" => CurveGeometry::Line {
            origin: e.field("origin")?.vec3()?,
            direction: e.field("direction")?.vec3()?,
        },
        "circle" => CurveGeometry::Circle {
            center: e.field("center")?.vec3()?,
            normal: e.field("normal")?.vec3()?,
            radius: e.field("radius")?.f64()?,
        },
        "bezier" => {
            let c = e.field("control")?;
            let pts = c.items()?;
            if pts.len() != 4 {
                return Err(c.err("expected 4 control points"));
            }
            CurveGeometry::Bezier([pts[0].vec3()?, pts[1].vec3()?, pts[2].vec3()?, pts[3].vec3()?])
        }
        other => return Err(e.field("kind")?.err(format!("unknown curve kind '{other}'"))),
    };
    let [t0, t1] = e.field("t_range")?.pair(Reader::f64)?;
    let cr = e.field("corners")?;
    let endpoint_corners = cr.pair(Reader::opt_usize)?;
    if endpoint_corners.iter().flatten().any(|&c| c >= corners) {
        return Err(cr.err("corner index out of range"));
    }
    Ok(CurveSegment {
        geometry,
        t_range: (t0, t1),
        support_count: e.field("support")?.usize()?,
        endpoint_corners,
        source_faces: e.field("faces")?.pair(Reader::opt_usize)?,
        closed: e.field("closed")?.bool()?,
    })
}

fn read_face(f: &Reader, edges: usize) -> Result<BRepFace> {
    let s = f.field("surface")?;
    let surface = match s.field("kind")?.str()? {
        "plane" => Surface::Plane {
            normal: s.field("normal")?.vec3()?,
            offset: s.field("offset")?.f64()?,
        },
        "cylinder" => Surface::Cylinder {
            axis_point: s.field("axis_point")?.vec3()?,
            axis: s.field("axis")?.vec3()?,
            radius: s.field("radius")?.f64()?,
        },
        "sphere" => Surface::Sphere {
            center: s.field("center")?.vec3()?,
            radius: s.field("radius")?.f64()?,
        },
        other => return Err(s.field("kind")?.err(format!("unknown surface kind '{other}'"))),
    };
    let pid = f.field("patch_id")?;
    Ok(BRepFace {
        patch_id: u32::try_from(pid.usize()?).map_err(|_| pid.err("patch id out of range"))?,
        primitive: Primitive {
            surface,
            inlier_count: f.field("inliers")?.usize()?,
            rms_residual: f.field("rms")?.f64()?,
        },
        loops: f.field("loops")?.chains(edges)?,
        open_chains: f.field("open_chains")?.chains(edges)?,
    })
}

pub fn brep_from_str(text: &str) -> Result<BRepModel> {
    let v: Value = serde_json::from_str(text)
        .map_err(|e| Error::parse(format!("line {}, column {}", e.line(), e.column()), e.to_string()))?;
    let root = Reader {
        path: String::new(),
        v: &v,
    };
    let tag = root.field("format")?;
    if tag.str()? != FORMAT_TAG {
        return Err(tag.err(format!("expected '{FORMAT_TAG}'")));
    }
    let ver = root.field("version")?;
    if ver.usize()? as u64 != VERSION {
        return Err(ver.err(format!("unsupported version, expected {VERSION}")));
    }
    let corners = root.field("corners")?.items()?.iter().map(Reader::vec3).collect::<Result<Vec<_>>>()?;
    let edges = root
        .field("edges")?
        .items()?
        .iter()
        .map(|e| read_edge(e, corners.len()))
        .collect::<Result<Vec<_>>>()?;
    let faces = root
        .field("faces")?
        .items()?
        .iter()
        .map(|f| read_face(f, edges.len()))
        .collect::<Result<Vec<_>>>()?;
    let nf = faces.len();
    for (i, e) in edges.iter().enumerate() {
        if e.source_faces.iter().flatten().any(|&f| f >= nf) {
            return Err(Error::parse(format!("edges[{i}].faces"), "face index out of range"));
        }
    }
    Ok(BRepModel { corners, edges, faces })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::TAU;

    fn model() -> BRepModel {
        let e0 = CurveSegment {
            geometry: CurveGeometry::Line {
                origin: Vec3::new(0.1, 0.2, 0.3),
                direction: Vec3::new(1.0, 2.0, 2.0) / 3.0,
            },
            t_range: (0.0, 0.7),
            support_count: 40,
            endpoint_corners: [Some(0), Some(1)],
            source_faces: [Some(0), Some(1)],
            closed: false,
        };
        let e1 = CurveSegment {
            geometry: CurveGeometry::Circle {
                center: Vec3::new(0.5, 0.5, 0.0),
                normal: Vec3::z(),
                radius: 1.0 / 3.0,
            },
            t_range: (0.0, TAU),
            support_count: 90,
            endpoint_corners: [None, None],
            source_faces: [Some(2), None],
            closed: true,
        };
        let e2 = CurveSegment {
            geometry: CurveGeometry::Bezier([Vec3::zeros(), Vec3::x(), Vec3::y(), Vec3::new(1.0, 1.0, -0.0)]),
            t_range: (0.0, 1.0),
            support_count: 7,
            endpoint_corners: [Some(1), None],
            source_faces: [Some(1), Some(2)],
            closed: false,
        };
        let face = |surface, loops, open| BRepFace {
            patch_id: 3,
            primitive: Primitive {
                surface,
                inlier_count: 123,
                rms_residual: 0.00123,
            },
            loops,
            open_chains: open,
        };
        let le = |edge, forward| LoopEdge { edge, forward };
        BRepModel {
            corners: vec![Vec3::new(0.1, 0.2, 0.3), Vec3::new(1e-17, -2.5, 1.0 / 7.0)],
            edges: vec![e0, e1, e2],
            faces: vec![
                face(
                    Surface::Plane {
                        normal: Vec3::z(),
                        offset: -0.25,
                    },
                    vec![vec![le(0, true), le(2, false)]],
                    vec![],
                ),
                face(
                    Surface::Cylinder {
                        axis_point: Vec3::new(0.5, 0.5, 0.0),
                        axis: Vec3::z(),
                        radius: 0.3,
                    },
                    vec![],
                    vec![vec![le(2, true)]],
                ),
                face(
                    Surface::Sphere {
                        center: Vec3::zeros(),
                        radius: 2.0,
                    },
                    vec![vec![le(1, false)]],
                    vec![],
                ),
            ],
        }
    }

    #[test]
    fn round_trip_is_identical() {
        let m = model();
        let text = brep_to_string(&m).unwrap();
        let back = brep_from_str(&text).unwrap();
        assert_eq!(back, m);
        assert_eq!(brep_to_string(&back).unwrap(), text);
    }

    #[test]
    fn empty_model_document() {
        let text = brep_to_string(&BRepModel::default()).unwrap();
        assert!(text.contains("\"corners\": []"));
        assert_eq!(brep_from_str(&text).unwrap(), BRepModel::default());
    }

    #[test]
    fn numbers_have_17_digits() {
        let text = brep_to_string(&model()).unwrap();
        assert!(text.contains("-2.5000000000000000e0"), "{text}");
        assert!(text.contains("\"offset\": -2.5000000000000000e-1"));
    }

    #[test]
    fn errors_name_the_field() {
        let text = brep_to_string(&model()).unwrap().replace("\"radius\": 3.3333333333333331e-1", "\"radius\": \"x\"");
        match brep_from_str(&text) {
            Err(Error::Parse { location, .. }) => assert_eq!(location, "edges[1].radius"),
            other => panic!("{other:?}"),
        }
        let text = brep_to_string(&model()).unwrap().replace("[[1, -3]]", "[[1, -9]]");
        match brep_from_str(&text) {
            Err(Error::Parse { location, .. }) => assert_eq!(location, "faces[0].loops[0][1]"),
            other => panic!("{other:?}"),
        }
        assert!(matches!(brep_from_str("{"), Err(Error::Parse { .. })));
    }
}
