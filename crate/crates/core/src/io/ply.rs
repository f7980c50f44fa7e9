//! PLY point clouds with per-vertex labels.
//!
//! Recognized vertex properties: `x y z` (required), `nx ny nz` (optional,
//! all or none), `patch_id` (integer, −1 = unlabeled), `edge` (in [0, 1],
//! defaults to 0) and `feat_0 … feat_{d-1}` (optional feature vector).
//! Other properties and elements are skipped.

use std::io::Write;

use crate::error::{Error, Result};
use crate::types::{LabeledPointCloud, Vec3};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlyEncoding {
    Ascii,
    BinaryLittleEndian,
    BinaryBigEndian,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Scalar {
    I8,
    U8,
    I16,
    U16,
    I32,
    U32,
    F32,
    F64,
}

impl Scalar {
    fn parse(name: &str) -> Option<Scalar> {
        Some(match name {
            "char" | "int8" => Scalar::I8,
            "uchar" | "uint8" => Scalar::U8,
            "short" | "int16" => Scalar::I16,
            "ushort" | "uint16" => Scalar::U16,
            "int" | "int32" => Scalar::I32,
            "uint" | "uint32" => Scalar::U32,
            "float" | "float32" => Scalar::F32,
            "double" | "float64" => Scalar::F64,
            _ => return None,
        })
    }

    fn size(self) -> usize {
        match self {
            Scalar::I8 | Scalar::U8 => 1,
            Scalar::I16 | Scalar::U16 => 2,
            Scalar::I32 | Scalar::U32 | Scalar::F32 => 4,
            Scalar::F64 => 8,
        }
    }

    fn read(self, b: &[u8], le: bool) -> f64 {
        macro_rules! get {
            ($t:ty, $n:expr) => {{
                let arr: [u8; $n] = b[..$n].try_into().unwrap();
                (if le { <$t>::from_le_bytes(arr) } else { <$t>::from_be_bytes(arr) }) as f64
            }};
        }
        match self {
            Scalar::I8 => b[0] as i8 as f64,
            Scalar::U8 => b[0] as f64,
            Scalar::I16 => get!(i16, 2),
            Scalar::U16 => get!(u16, 2),
            Scalar::I32 => get!(i32, 4),
            Scalar::U32 => get!(u32, 4),
            Scalar::F32 => get!(f32, 4),
            Scalar::F64 => get!(f64, 8),
        }
    }
}

#[derive(Debug, Clone)]
enum Prop {
    Scalar(String, Scalar),
    List(Scalar, Scalar),
}

#[derive(Debug, Clone)]
struct Element {
    name: String,
    count: usize,
    props: Vec<Prop>,
}

struct Header {
    encoding: PlyEncoding,
    elements: Vec<Element>,
    /// Byte offset of the body and the number of header lines.
    body: usize,
    lines: usize,
}

fn parse_header(bytes: &[u8]) -> Result<Header> {
    let mut pos = 0;
    let mut line_no = 0;
    let mut encoding = None;
    let mut elements: Vec<Element> = Vec::new();
    loop {
        let rest = &bytes[pos..];
        let Some(nl) = rest.iter().position(|&c| c == b'\n') else {
            return Err(Error::parse(format!("line {}", line_no + 1), "header is not terminated by end_header"));
        };
        line_no += 1;
        let loc = format!("line {line_no}");
        let line = std::str::from_utf8(&rest[..nl])
            .map_err(|_| Error::parse(&loc, "header is not valid UTF-8"))?
            .trim_end_matches('\r');
        pos += nl + 1;
        let tok: Vec<&str> = line.split_whitespace().collect();
        if line_no == 1 {
            if line != "ply" {
                return Err(Error::parse(loc, "missing 'ply' magic"));
            }
            continue;
        }
        match tok.first().copied() {
            None | Some("comment") | Some("obj_info") => {}
            Some("format") => {
                encoding = Some(match tok.get(1).copied() {
                    Some("ascii") => PlyEncoding::Ascii,
                    Some("binary_little_endian") => PlyEncoding::BinaryLittleEndian,
                    Some("binary_big_endian") => PlyEncoding::BinaryBigEndian,
                    other => return Err(Error::parse(loc, format!("unknown format {other:?}"))),
                });
            }
            Some("element") => {
                let (Some(name), Some(count)) = (tok.get(1), tok.get(2)) else {
                    return Err(Error::parse(loc, "element needs a name and a count"));
                };
                let count = count
                    .parse()
                    .map_err(|_| Error::parse(&loc, format!("bad element count '{count}'")))?;
                elements.push(Element {
                    name: name.to_string(),
                    count,
                    props: Vec::new(),
                });
            }
            Some("property") => {
                let Some(el) = elements.last_mut() else {
                    return Err(Error::parse(loc, "property before any element"));
                };
                let scalar = |s: Option<&&str>| {
                    s.and_then(|s| Scalar::parse(s))
                        .ok_or_else(|| Error::parse(&loc, format!("bad property type in '{line}'")))
                };
                let prop = if tok.get(1) == Some(&"list") {
                    let (c, i) = (scalar(tok.get(2))?, scalar(tok.get(3))?);
                    tok.get(4).ok_or_else(|| Error::parse(&loc, "list property needs a name"))?;
                    Prop::List(c, i)
                } else {
                    let s = scalar(tok.get(1))?;
                    let name = tok.get(2).ok_or_else(|| Error::parse(&loc, "property needs a name"))?;
                    Prop::Scalar(name.to_string(), s)
                };
                el.props.push(prop);
            }
            Some("end_header") => break,
            Some(other) => return Err(Error::parse(loc, format!("unexpected header keyword '{other}'"))),
        }
    }
    let encoding = encoding.ok_or_else(|| Error::parse("header", "missing format line"))?;
    Ok(Header {
        encoding,
        elements,
        body: pos,
        lines: line_no,
    })
}

/// Where each recognized vertex field sits in the property list.
#[derive(Default)]
struct Layout {
    xyz: [Option<usize>; 3],
    normal: [Option<usize>; 3],
    patch: Option<usize>,
    edge: Option<usize>,
    features: Vec<usize>,
}

impl Layout {
    fn of(el: &Element) -> Result<Layout> {
        let mut l = Layout::default();
        let mut feats: Vec<(usize, usize)> = Vec::new();
        for (k, p) in el.props.iter().enumerate() {
            let Prop::Scalar(name, _) = p else { continue };
            match name.as_str() {
                "x" => l.xyz[0] = Some(k),
                "y" => l.xyz[1] = Some(k),
                "z" => l.xyz[2] = Some(k),
                "nx" => l.normal[0] = Some(k),
                "ny" => l.normal[1] = Some(k),
                "nz" => l.normal[2] = Some(k),
                "patch_id" => l.patch = Some(k),
                "edge" => l.edge = Some(k),
                n => {
                    if let Some(j) = n.strip_prefix("feat_").and_then(|j| j.parse::<usize>().ok()) {
                        feats.push((j, k));
                    }
                }
            }
        }
        if l.xyz.iter().any(Option::is_none) {
            return Err(Error::parse("header", "vertex element needs x, y and z properties"));
        }
        let nn = l.normal.iter().filter(|n| n.is_some()).count();
        if nn != 0 && nn != 3 {
            return Err(Error::parse("header", "normals need all of nx, ny, nz"));
        }
        feats.sort_unstable();
        if feats.iter().enumerate().any(|(i, (j, _))| i != *j) {
            return Err(Error::parse("header", "feature properties must be feat_0 … feat_{d-1}"));
        }
        l.features = feats.into_iter().map(|(_, k)| k).collect();
        Ok(l)
    }
}

struct Rows {
    cloud: LabeledPointCloud,
    normals: Vec<Vec3>,
    features: Vec<Vec<f64>>,
}

impl Rows {
    fn push(&mut self, l: &Layout, v: &[f64], row: usize, loc: &str) -> Result<()> {
        let bad = |what: &str| Error::parse(loc, format!("vertex {row}: {what}"));
        let p = Vec3::new(v[l.xyz[0].unwrap()], v[l.xyz[1].unwrap()], v[l.xyz[2].unwrap()]);
        if !p.iter().all(|c| c.is_finite()) {
            return Err(bad("non-finite coordinate"));
        }
        self.cloud.points.push(p);
        if let [Some(a), Some(b), Some(c)] = l.normal {
            let n = Vec3::new(v[a], v[b], v[c]);
            if !n.iter().all(|c| c.is_finite()) {
                return Err(bad("non-finite normal"));
            }
            self.normals.push(n);
        }
        let id = match l.patch {
            Some(k) => {
                let id = v[k];
                if id == -1.0 {
                    None
                } else if id.fract() == 0.0 && (0.0..=u32::MAX as f64).contains(&id) {
                    Some(id as u32)
                } else {
                    return Err(bad(&format!("patch_id {id} is not −1 or a non-negative integer")));
                }
            }
            None => None,
        };
        self.cloud.patch_ids.push(id);
        let e = l.edge.map_or(0.0, |k| v[k]);
        if !(0.0..=1.0).contains(&e) {
            return Err(bad(&format!("edge flag {e} outside [0, 1]")));
        }
        self.cloud.edge_flags.push(e);
        if !l.features.is_empty() {
            let f: Vec<f64> = l.features.iter().map(|&k| v[k]).collect();
            if !f.iter().all(|x| x.is_finite()) {
                return Err(bad("non-finite feature"));
            }
            self.features.push(f);
        }
        Ok(())
    }
}

pub fn read_ply(bytes: &[u8]) -> Result<LabeledPointCloud> {
    let h = parse_header(bytes)?;
    let Some(vi) = h.elements.iter().position(|e| e.name == "vertex") else {
        return Err(Error::parse("header", "no vertex element"));
    };
    let layout = Layout::of(&h.elements[vi])?;
    if layout.patch.is_some() && layout.edge.is_none() {
        log::warn!("PLY has patch_id but no edge property; edge flags default to 0");
    }
    let mut rows = Rows {
        cloud: LabeledPointCloud::default(),
        normals: Vec::new(),
        features: Vec::new(),
    };
    let body = &bytes[h.body..];
    match h.encoding {
        PlyEncoding::Ascii => {
            let text = std::str::from_utf8(body).map_err(|e| {
                Error::parse(format!("byte offset {}", h.body + e.valid_up_to()), "ASCII body is not valid UTF-8")
            })?;
            let mut lines = text
                .lines()
                .enumerate()
                .map(|(i, l)| (h.lines + i + 1, l))
                .filter(|(_, l)| !l.trim().is_empty());
            for (ei, el) in h.elements.iter().enumerate().take(vi + 1) {
                for row in 0..el.count {
                    let Some((no, line)) = lines.next() else {
                        return Err(Error::parse(
                            "end of file",
                            format!("expected {} {} rows, found {row}", el.count, el.name),
                        ));
                    };
                    let loc = format!("line {no}");
                    if ei != vi {
                        continue;
                    }
                    let mut tok = line.split_whitespace();
                    let mut vals = Vec::with_capacity(el.props.len());
                    for p in &el.props {
                        let mut next = || -> Result<f64> {
                            let t = tok.next().ok_or_else(|| Error::parse(&loc, "too few values"))?;
                            t.parse::<f64>()
                                .map_err(|_| Error::parse(&loc, format!("vertex {row}: bad number '{t}'")))
                        };
                        match p {
                            Prop::Scalar(..) => vals.push(next()?),
                            Prop::List(..) => {
                                let n = next()?;
                                for _ in 0..n as usize {
                                    next()?;
                                }
                                vals.push(f64::NAN);
                            }
                        }
                    }
                    if tok.next().is_some() {
                        return Err(Error::parse(&loc, format!("vertex {row}: too many values")));
                    }
                    rows.push(&layout, &vals, row, &loc)?;
                }
            }
        }
        PlyEncoding::BinaryLittleEndian | PlyEncoding::BinaryBigEndian => {
            let le = h.encoding == PlyEncoding::BinaryLittleEndian;
            let mut off = 0usize;
            let take = |off: &mut usize, s: Scalar, what: &str| -> Result<f64> {
                let n = s.size();
                if *off + n > body.len() {
                    return Err(Error::parse(
                        format!("byte offset {}", h.body + *off),
                        format!("unexpected end of data in {what}"),
                    ));
                }
                let v = s.read(&body[*off..], le);
                *off += n;
                Ok(v)
            };
            for (ei, el) in h.elements.iter().enumerate().take(vi + 1) {
                for row in 0..el.count {
                    let start = off;
                    let what = format!("{} {row}", el.name);
                    let mut vals = Vec::with_capacity(el.props.len());
                    for p in &el.props {
                        match *p {
                            Prop::Scalar(_, s) => vals.push(take(&mut off, s, &what)?),
                            Prop::List(c, i) => {
                                let n = take(&mut off, c, &what)?;
                                for _ in 0..n as usize {
                                    take(&mut off, i, &what)?;
                                }
                                vals.push(f64::NAN);
                            }
                        }
                    }
                    if ei == vi {
                        rows.push(&layout, &vals, row, &format!("byte offset {}", h.body + start))?;
                    }
                }
            }
        }
    }
    let mut cloud = rows.cloud;
    if layout.normal[0].is_some() {
        cloud.normals = Some(rows.normals);
    }
    if !layout.features.is_empty() {
        cloud.features = Some(rows.features);
    }
    Ok(cloud)
}

pub fn write_ply<W: Write>(cloud: &LabeledPointCloud, w: &mut W, encoding: PlyEncoding) -> Result<()> {
    let fmt = match encoding {
        PlyEncoding::Ascii => "ascii",
        PlyEncoding::BinaryLittleEndian => "binary_little_endian",
        PlyEncoding::BinaryBigEndian => "binary_big_endian",
    };
    let dim = cloud.features.as_ref().and_then(|f| f.first()).map_or(0, Vec::len);
    writeln!(w, "ply\nformat {fmt} 1.0\nelement vertex {}", cloud.len())?;
    writeln!(w, "property double x\nproperty double y\nproperty double z")?;
    if cloud.normals.is_some() {
        writeln!(w, "property double nx\nproperty double ny\nproperty double nz")?;
    }
    writeln!(w, "property int patch_id\nproperty double edge")?;
    for k in 0..dim {
        writeln!(w, "property double feat_{k}")?;
    }
    writeln!(w, "end_header")?;
    for i in 0..cloud.len() {
        let mut vals: Vec<f64> = cloud.points[i].iter().copied().collect();
        if let Some(n) = &cloud.normals {
            vals.extend(n[i].iter());
        }
        let id = cloud.patch_ids[i].map_or(-1i64, i64::from);
        if id > i32::MAX as i64 {
            return Err(Error::Domain(format!("patch id {id} does not fit a PLY int")));
        }
        let feats = cloud.features.as_ref().map(|f| f[i].as_slice()).unwrap_or(&[]);
        match encoding {
            PlyEncoding::Ascii => {
                let mut line: Vec<String> = vals.iter().map(|v| v.to_string()).collect();
                line.push(id.to_string());
                line.push(cloud.edge_flags[i].to_string());
                line.extend(feats.iter().map(|v| v.to_string()));
                writeln!(w, "{}", line.join(" "))?;
            }
            PlyEncoding::BinaryLittleEndian | PlyEncoding::BinaryBigEndian => {
                let le = encoding == PlyEncoding::BinaryLittleEndian;
                let f = |v: f64| if le { v.to_le_bytes() } else { v.to_be_bytes() };
                for v in &vals {
                    w.write_all(&f(*v))?;
                }
                let id = id as i32;
                w.write_all(&if le { id.to_le_bytes() } else { id.to_be_bytes() })?;
                w.write_all(&f(cloud.edge_flags[i]))?;
                for v in feats {
                    w.write_all(&f(*v))?;
                }
            }
        }
    }
    Ok(())
}
