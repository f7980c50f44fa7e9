//! File formats: labeled clouds (PLY, XYZL), the B-rep document and OBJ
//! previews.

mod brep;
mod obj;
mod ply;
mod xyzl;

use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

pub use brep::{brep_from_str, brep_to_string, FORMAT_TAG, VERSION};
pub use obj::{tessellate, write_obj, Mesh};
pub use ply::{read_ply, write_ply, PlyEncoding};
pub use xyzl::{read_xyzl, write_xyzl};

use crate::error::{Error, Result};
use crate::types::{BRepModel, LabeledPointCloud};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CloudFormat {
    Ply(PlyEncoding),
    Xyzl,
}

impl CloudFormat {
    /// `.ply` → binary little-endian PLY, anything else → XYZL text.
    pub fn for_path(path: &Path) -> CloudFormat {
        match path.extension().and_then(|e| e.to_str()) {
            Some(e) if e.eq_ignore_ascii_case("ply") => CloudFormat::Ply(PlyEncoding::BinaryLittleEndian),
            _ => CloudFormat::Xyzl,
        }
    }
}

/// Shortest round-trip decimal; exponent form for very large or small
/// magnitudes.
pub(crate) fn fmt_f64(x: f64) -> String {
    let a = x.abs();
    if a == 0.0 || (1e-5..1e16).contains(&a) {
        format!("{x}")
    } else {
        format!("{x:e}")
    }
}

/// Parses a cloud, detecting PLY by its magic line and treating anything
/// else as XYZL.
pub fn parse_cloud(bytes: &[u8]) -> Result<LabeledPointCloud> {
    if bytes.starts_with(b"ply\n") || bytes.starts_with(b"ply\r\n") {
        read_ply(bytes)
    } else {
        let text = std::str::from_utf8(bytes)
            .map_err(|e| Error::parse(format!("byte offset {}", e.valid_up_to()), "XYZL file is not valid UTF-8"))?;
        read_xyzl(text)
    }
}

pub fn read_cloud(path: impl AsRef<Path>) -> Result<LabeledPointCloud> {
    parse_cloud(&fs::read(path)?)
}

pub fn write_cloud(path: impl AsRef<Path>, cloud: &LabeledPointCloud, format: CloudFormat) -> Result<()> {
    let mut w = BufWriter::new(fs::File::create(path)?);
    match format {
        CloudFormat::Ply(enc) => write_ply(cloud, &mut w, enc)?,
        CloudFormat::Xyzl => write_xyzl(cloud, &mut w)?,
    }
    w.flush()?;
    Ok(())
}

pub fn write_brep(model: &BRepModel, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, brep_to_string(model)?)?;
    Ok(())
}

pub fn read_brep(path: impl AsRef<Path>) -> Result<BRepModel> {
    brep_from_str(&fs::read_to_string(path)?)
}

/// Tessellates `model` and writes the OBJ preview.
pub fn write_model_obj(model: &BRepModel, density: usize, path: impl AsRef<Path>) -> Result<()> {
    let mesh = tessellate(model, density);
    let mut w = BufWriter::new(fs::File::create(path)?);
    write_obj(&mesh, &mut w)?;
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sniffs_format() {
        let c = parse_cloud(b"0 0 0 1 0\n").unwrap();
        assert_eq!(c.patch_ids, vec![Some(1)]);
        assert!(matches!(parse_cloud(b"ply\nformat ascii 1.0\n"), Err(Error::Parse { .. })));
        assert_eq!(CloudFormat::for_path(Path::new("a/b.PLY")), CloudFormat::Ply(PlyEncoding::BinaryLittleEndian));
        assert_eq!(CloudFormat::for_path(Path::new("b.xyzl")), CloudFormat::Xyzl);
    }

    #[test]
    fn float_text_round_trips() {
        for x in [0.1, -0.0, 1e-300, 123456.789, 1e20, f64::MIN_POSITIVE, 1.0 / 3.0] {
            assert_eq!(fmt_f64(x).parse::<f64>().unwrap().to_bits(), x.to_bits());
        }
    }
}
