//! 8-bit PNG export of linear HDR maps.

use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::map::Map;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Tonemap {
    /// Clamp to `[0, 1]`, then `v^(1/2.2)`.
    Gamma22,
    /// `v / (1 + v)`, then gamma 2.2.
    Reinhard,
    /// Clamp only.
    None,
}

impl FromStr for Tonemap {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gamma22" => Ok(Tonemap::Gamma22),
            "reinhard" => Ok(Tonemap::Reinhard),
            "none" => Ok(Tonemap::None),
            other => Err(Error::Config(format!(
                "unknown tonemap {other:?} (expected gamma22, reinhard or none)"
            ))),
        }
    }
}

impl Tonemap {
    /// Display value in `[0, 1]`.
    pub fn apply(self, v: f64) -> f64 {
        let v = if v.is_nan() { 0.0 } else { v.max(0.0) };
        match self {
            Tonemap::Gamma22 => v.min(1.0).powf(1.0 / 2.2),
            Tonemap::Reinhard => (v / (1.0 + v)).powf(1.0 / 2.2),
            Tonemap::None => v.min(1.0),
        }
    }
}

#[inline]
pub fn quantize(v: f64) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0).round() as u8
}

/// RGB8 bytes; one-channel maps are replicated to gray.
pub fn to_rgb8(map: &Map, tonemap: Tonemap) -> Result<Vec<u8>> {
    let c = map.channels();
    if c != 1 && c != 3 {
        return Err(Error::Dimensions(format!("cannot export a {c}-channel map as RGB")));
    }
    let mut out = Vec::with_capacity(map.pixel_count() * 3);
    for px in map.data().chunks(c) {
        for k in 0..3 {
            out.push(quantize(tonemap.apply(px[k.min(c - 1)])));
        }
    }
    Ok(out)
}

pub fn export_png(map: &Map, path: impl AsRef<Path>, tonemap: Tonemap) -> Result<()> {
    let path = path.as_ref();
    let bytes = to_rgb8(map, tonemap)?;
    image::save_buffer(
        path,
        &bytes,
        map.width() as u32,
        map.height() as u32,
        image::ExtendedColorType::Rgb8,
    )
    .map_err(|e| Error::io(path, std::io::Error::other(e)))
}
