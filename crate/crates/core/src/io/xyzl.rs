//! Plain-text clouds: one `x y z patch_id edge` row per point. Blank lines
//! and `#` comments are ignored; `patch_id` −1 marks an unlabeled point.

use std::io::Write;

use super::fmt_f64;
use crate::error::{Error, Result};
use crate::types::{LabeledPointCloud, Vec3};

pub fn read_xyzl(text: &str) -> Result<LabeledPointCloud> {
    let mut cloud = LabeledPointCloud::default();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let loc = format!("line {}", i + 1);
        let tok: Vec<&str> = line.split_whitespace().collect();
        if tok.len() != 5 {
            return Err(Error::parse(loc, format!("expected 5 columns 'x y z patch_id edge', got {}", tok.len())));
        }
        let mut v = [0.0; 3];
        for k in 0..3 {
            v[k] = tok[k]
                .parse::<f64>()
                .ok()
                .filter(|x| x.is_finite())
                .ok_or_else(|| Error::parse(&loc, format!("row {}: bad coordinate '{}'", cloud.len(), tok[k])))?;
        }
        let id: i64 = tok[3]
            .parse()
            .map_err(|_| Error::parse(&loc, format!("bad patch_id '{}'", tok[3])))?;
        let id = match id {
            -1 => None,
            0..=0xFFFF_FFFF => Some(id as u32),
            _ => return Err(Error::parse(&loc, format!("patch_id {id} is not −1 or a non-negative integer"))),
        };
        let edge: f64 = tok[4]
            .parse()
            .ok()
            .filter(|e| (0.0..=1.0).contains(e))
            .ok_or_else(|| Error::parse(&loc, format!("edge flag '{}' is not in [0, 1]", tok[4])))?;
        cloud.points.push(Vec3::from(v));
        cloud.patch_ids.push(id);
        cloud.edge_flags.push(edge);
    }
    Ok(cloud)
}

/// Writes points, labels and edge flags; normals and features are dropped.
pub fn write_xyzl<W: Write>(cloud: &LabeledPointCloud, w: &mut W) -> Result<()> {
    for i in 0..cloud.len() {
        let p = &cloud.points[i];
        let id = cloud.patch_ids[i].map_or(-1i64, i64::from);
        writeln!(
            w,
            "{} {} {} {id} {}",
            fmt_f64(p.x),
            fmt_f64(p.y),
            fmt_f64(p.z),
            fmt_f64(cloud.edge_flags[i])
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn three_rows() {
        let c = read_xyzl("0 0 0 0 0\n# comment\n\n1 0 0 0 1\n0 1 0 -1 0.5 # trailing\n").unwrap();
        assert_eq!(c.len(), 3);
        assert_eq!(c.patch_ids, vec![Some(0), Some(0), None]);
        assert_eq!(c.edge_flags, vec![0.0, 1.0, 0.5]);
    }

    #[test]
    fn nan_names_the_row() {
        match read_xyzl("0 0 0 0 0\n1 NaN 0 0 0\n") {
            Err(Error::Parse { location, message }) => {
                assert_eq!(location, "line 2");
                assert!(message.contains("row 1"));
            }
            other => panic!("{other:?}"),
        }
        assert!(read_xyzl("0 0 0 0\n").is_err());
        assert!(read_xyzl("0 0 0 -2 0\n").is_err());
        assert!(read_xyzl("0 0 0 1 2\n").is_err());
    }

    #[test]
    fn round_trip_is_exact() {
        let c = LabeledPointCloud {
            points: vec![Vec3::new(0.1, 1e-300, -7.25e12), Vec3::new(1.0 / 3.0, -0.0, 2.0)],
            normals: None,
            patch_ids: vec![Some(4_000_000_000), None],
            edge_flags: vec![0.3, 1.0],
            features: None,
        };
        let mut buf = Vec::new();
        write_xyzl(&c, &mut buf).unwrap();
        assert_eq!(read_xyzl(std::str::from_utf8(&buf).unwrap()).unwrap(), c);
    }
}
