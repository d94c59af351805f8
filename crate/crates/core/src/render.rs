//! 8-bit portable graymap (binary `P5`) output for images and membership fields.
//!
//! Header layout:
//!
//! ```text
//! P5
//! # min=<lo> max=<hi>
//! <n_u> <n_v>
//! 255
//! ```
//!
//! Pixel value is `round(255·(v − lo)/(hi − lo))`, clamped to `0..=255`;
//! a flat image (`hi == lo`) renders as all zeros. The first pixel row is
//! the top grid row (highest `v`), so the picture is upright for a vertical
//! grid plane.

use std::io::Write;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum GrayScale {
    /// Normalize each image to its own min/max.
    #[default]
    PerFrame,
    /// Shared range, for frame-to-frame comparability.
    Fixed { min: f64, max: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Graymap {
    pub width: usize,
    pub height: usize,
    pub min: f64,
    pub max: f64,
    /// Row-major, top row first.
    pub pixels: Vec<u8>,
}

pub fn to_graymap(values: &[f64], n_u: usize, n_v: usize, scale: GrayScale) -> Result<Graymap> {
    if values.len() != n_u * n_v || n_u == 0 {
        return Err(Error::arg(format!(
            "{} values do not fill a {n_u}x{n_v} raster",
            values.len()
        )));
    }
    let (min, max) = match scale {
        GrayScale::PerFrame => values
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v))),
        GrayScale::Fixed { min, max } => (min, max),
    };
    if !min.is_finite() || !max.is_finite() || max < min {
        return Err(Error::arg(format!("bad gray range [{min}, {max}]")));
    }
    let span = max - min;
    let mut pixels = Vec::with_capacity(values.len());
    for row in values.chunks(n_u).rev() {
        pixels.extend(row.iter().map(|&v| {
            if span == 0.0 {
                0
            } else {
                (255.0 * (v - min) / span).round().clamp(0.0, 255.0) as u8
            }
        }));
    }
    Ok(Graymap {
        width: n_u,
        height: n_v,
        min,
        max,
        pixels,
    })
}

/// Members render black (0), non-members white (255).
pub fn membership_graymap(field: &[bool], n_u: usize, n_v: usize) -> Result<Graymap> {
    let values: Vec<f64> = field.iter().map(|&m| if m { 0.0 } else { 1.0 }).collect();
    to_graymap(&values, n_u, n_v, GrayScale::Fixed { min: 0.0, max: 1.0 })
}

impl Graymap {
    pub fn write<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        write!(
            out,
            "P5\n# min={} max={}\n{} {}\n255\n",
            self.min, self.max, self.width, self.height
        )?;
        out.write_all(&self.pixels)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut buf = Vec::with_capacity(self.pixels.len() + 64);
        self.write(&mut buf).expect("writing to a Vec cannot fail");
        buf
    }

    /// Parses the layout written by [`Graymap::write`].
    pub fn parse(bytes: &[u8]) -> Result<Graymap> {
        let mut pos = 0;
        let mut line = || -> Result<&str> {
            let rest = &bytes[pos..];
            let end = rest
                .iter()
                .position(|&b| b == b'\n')
                .ok_or_else(|| Error::Format("truncated graymap header".into()))?;
            pos += end + 1;
            std::str::from_utf8(&rest[..end]).map_err(|_| Error::Format("graymap header is not UTF-8".into()))
        };
        if line()? != "P5" {
            return Err(Error::Format("graymap magic must be P5".into()));
        }
        let comment = line()?;
        let (min, max) = comment
            .strip_prefix("# min=")
            .and_then(|s| s.split_once(" max="))
            .and_then(|(a, b)| Some((a.parse::<f64>().ok()?, b.parse::<f64>().ok()?)))
            .ok_or_else(|| Error::Format(format!("bad graymap range comment {comment:?}")))?;
        let dims = line()?;
        let (width, height) = dims
            .split_once(' ')
            .and_then(|(a, b)| Some((a.parse::<usize>().ok()?, b.parse::<usize>().ok()?)))
            .ok_or_else(|| Error::Format(format!("bad graymap dimensions {dims:?}")))?;
        if line()? != "255" {
            return Err(Error::Format("graymap maxval must be 255".into()));
        }
        let pixels = bytes[pos..].to_vec();
        if pixels.len() != width * height {
            return Err(Error::Format(format!(
                "graymap has {} pixels, header says {width}x{height}",
                pixels.len()
            )));
        }
        Ok(Graymap {
            width,
            height,
            min,
            max,
            pixels,
        })
    }
}
