use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};

/// Row-major, channel-interleaved float image.
#[derive(Debug, Clone, PartialEq)]
pub struct Image {
    pub width: usize,
    pub height: usize,
    pub channels: usize,
    pub data: Vec<f64>,
}

impl Image {
    pub fn zeros(width: usize, height: usize, channels: usize) -> Image {
        Image {
            width,
            height,
            channels,
            data: vec![0.0; width * height * channels],
        }
    }

    pub fn from_fn(width: usize, height: usize, channels: usize, mut f: impl FnMut(usize, usize) -> f64) -> Image {
        let mut img = Image::zeros(width, height, channels);
        for p in 0..width * height {
            for c in 0..channels {
                img.data[p * channels + c] = f(p, c);
            }
        }
        img
    }

    pub fn pixel_count(&self) -> usize {
        self.width * self.height
    }

    pub fn pixel(&self, p: usize) -> &[f64] {
        &self.data[p * self.channels..(p + 1) * self.channels]
    }

    pub fn pixel_mut(&mut self, p: usize) -> &mut [f64] {
        &mut self.data[p * self.channels..(p + 1) * self.channels]
    }

    pub fn same_shape(&self, other: &Image) -> Result<()> {
        if (self.width, self.height, self.channels) != (other.width, other.height, other.channels) {
            return Err(Error::DimensionMismatch(format!(
                "{}x{}x{} vs {}x{}x{}",
                self.width, self.height, self.channels, other.width, other.height, other.channels
            )));
        }
        Ok(())
    }

    /// One channel as a single-channel image.
    pub fn channel(&self, c: usize) -> Image {
        Image::from_fn(self.width, self.height, 1, |p, _| self.data[p * self.channels + c])
    }
}

/// Portable float map, little-endian, bottom row first. One or three channels.
pub fn write_pfm(path: &Path, img: &Image) -> Result<()> {
    let tag = match img.channels {
        1 => "Pf",
        3 => "PF",
        c => return Err(Error::DimensionMismatch(format!("PFM needs 1 or 3 channels, got {c}"))),
    };
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    write!(out, "{tag}\n{} {}\n-1.0\n", img.width, img.height)?;
    let row = img.width * img.channels;
    for j in (0..img.height).rev() {
        for v in &img.data[j * row..(j + 1) * row] {
            out.write_all(&(*v as f32).to_le_bytes())?;
        }
    }
    out.flush()?;
    Ok(())
}

/// 8-bit preview; values are clamped to [0, 1].
pub fn write_png(path: &Path, img: &Image) -> Result<()> {
    let bytes: Vec<u8> = img.data.iter().map(|v| (v.clamp(0.0, 1.0) * 255.0).round() as u8).collect();
    let (w, h) = (img.width as u32, img.height as u32);
    let res = match img.channels {
        1 => image::GrayImage::from_raw(w, h, bytes).map(|b| b.save(path)),
        3 => image::RgbImage::from_raw(w, h, bytes).map(|b| b.save(path)),
        c => return Err(Error::DimensionMismatch(format!("PNG needs 1 or 3 channels, got {c}"))),
    };
    match res {
        Some(Ok(())) => Ok(()),
        Some(Err(e)) => Err(Error::Io(std::io::Error::other(e))),
        None => Err(Error::DimensionMismatch("buffer size".into())),
    }
}
