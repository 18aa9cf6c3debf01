use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::math::DVec3;

/// Dense row-major image with interleaved channels, stored in `f64`.
///
/// Every per-pixel quantity in the crate (depth, normals, materials, radiance,
/// occlusion) lives in a `Map`. Files store `f32`; see [`crate::gbuffer::io`].
#[derive(Debug, Clone, PartialEq)]
pub struct Map {
    width: usize,
    height: usize,
    channels: usize,
    data: Vec<f64>,
}

impl Map {
    pub fn new(width: usize, height: usize, channels: usize) -> Self {
        Self::filled(width, height, channels, 0.0)
    }

    pub fn filled(width: usize, height: usize, channels: usize, value: f64) -> Self {
        Map {
            width,
            height,
            channels,
            data: vec![value; width * height * channels],
        }
    }

    pub fn from_vec(width: usize, height: usize, channels: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != width * height * channels {
            return Err(Error::Dimensions(format!(
                "{} values for a {width}x{height}x{channels} map",
                data.len()
            )));
        }
        Ok(Map {
            width,
            height,
            channels,
            data,
        })
    }

    /// Map filled with a constant 3-vector.
    pub fn constant3(width: usize, height: usize, v: DVec3) -> Self {
        let mut m = Map::new(width, height, 3);
        for px in m.data.chunks_exact_mut(3) {
            px.copy_from_slice(&v.to_array());
        }
        m
    }

    /// Builds a map by evaluating `f(x, y, out)` for every pixel, row-parallel.
    pub fn from_fn<F>(width: usize, height: usize, channels: usize, f: F) -> Self
    where
        F: Fn(usize, usize, &mut [f64]) + Sync,
    {
        let mut m = Map::new(width, height, channels);
        if width * channels == 0 {
            return m;
        }
        m.data
            .par_chunks_mut(width * channels)
            .enumerate()
            .for_each(|(y, row)| {
                for (x, px) in row.chunks_exact_mut(channels).enumerate() {
                    f(x, y, px);
                }
            });
        m
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn channels(&self) -> usize {
        self.channels
    }

    #[inline]
    pub fn pixel_count(&self) -> usize {
        self.width * self.height
    }

    /// Total number of stored values (pixels times channels).
    #[inline]
    pub fn len(&self) -> usize {
        self.data.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    pub fn data(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    fn offset(&self, x: usize, y: usize) -> usize {
        debug_assert!(x < self.width && y < self.height);
        (y * self.width + x) * self.channels
    }

    #[inline]
    pub fn pixel(&self, x: usize, y: usize) -> &[f64] {
        let o = self.offset(x, y);
        &self.data[o..o + self.channels]
    }

    #[inline]
    pub fn pixel_mut(&mut self, x: usize, y: usize) -> &mut [f64] {
        let o = self.offset(x, y);
        let c = self.channels;
        &mut self.data[o..o + c]
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize, c: usize) -> f64 {
        self.data[self.offset(x, y) + c]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, c: usize, v: f64) {
        let o = self.offset(x, y);
        self.data[o + c] = v;
    }

    /// First three channels as a vector.
    #[inline]
    pub fn get3(&self, x: usize, y: usize) -> DVec3 {
        let p = self.pixel(x, y);
        DVec3::new(p[0], p[1], p[2])
    }

    #[inline]
    pub fn set3(&mut self, x: usize, y: usize, v: DVec3) {
        let p = self.pixel_mut(x, y);
        p[0] = v.x;
        p[1] = v.y;
        p[2] = v.z;
    }

    pub fn same_shape(&self, other: &Map) -> bool {
        self.width == other.width && self.height == other.height && self.channels == other.channels
    }

    pub fn same_size(&self, other: &Map) -> bool {
        self.width == other.width && self.height == other.height
    }

    pub(crate) fn check_size(&self, other: &Map, what: &str) -> Result<()> {
        if self.same_size(other) {
            Ok(())
        } else {
            Err(Error::Dimensions(format!(
                "{what}: {}x{} vs {}x{}",
                self.width, self.height, other.width, other.height
            )))
        }
    }

    pub fn map_values(&self, f: impl Fn(f64) -> f64) -> Map {
        Map {
            width: self.width,
            height: self.height,
            channels: self.channels,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn scaled(&self, s: f64) -> Map {
        self.map_values(|v| v * s)
    }

    pub fn zip_with(&self, other: &Map, f: impl Fn(f64, f64) -> f64) -> Result<Map> {
        if !self.same_shape(other) {
            return Err(Error::Dimensions(format!(
                "{}x{}x{} vs {}x{}x{}",
                self.width, self.height, self.channels, other.width, other.height, other.channels
            )));
        }
        Ok(Map {
            width: self.width,
            height: self.height,
            channels: self.channels,
            data: self.data.iter().zip(&other.data).map(|(&a, &b)| f(a, b)).collect(),
        })
    }

    /// Copies channel range `[start, start + count)` into a new map.
    pub fn channels_slice(&self, start: usize, count: usize) -> Map {
        assert!(start + count <= self.channels);
        let mut out = Map::new(self.width, self.height, count);
        for (dst, src) in out
            .data
            .chunks_exact_mut(count)
            .zip(self.data.chunks_exact(self.channels))
        {
            dst.copy_from_slice(&src[start..start + count]);
        }
        out
    }

    /// Concatenates maps of equal size along the channel axis.
    pub fn concat_channels(maps: &[&Map]) -> Result<Map> {
        let first = maps
            .first()
            .ok_or_else(|| Error::Dimensions("no maps to concatenate".into()))?;
        for m in maps {
            first.check_size(m, "channel concatenation")?;
        }
        let channels: usize = maps.iter().map(|m| m.channels).sum();
        let mut out = Map::new(first.width, first.height, channels);
        for p in 0..first.pixel_count() {
            let mut c0 = 0;
            for m in maps {
                out.data[p * channels + c0..p * channels + c0 + m.channels]
                    .copy_from_slice(&m.data[p * m.channels..(p + 1) * m.channels]);
                c0 += m.channels;
            }
        }
        Ok(out)
    }

    pub fn bit_eq(&self, other: &Map) -> bool {
        self.same_shape(other)
            && self
                .data
                .iter()
                .zip(&other.data)
                .all(|(a, b)| a.to_bits() == b.to_bits())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn layout_is_row_major_interleaved() {
        let m = Map::from_vec(2, 2, 3, (0..12).map(f64::from).collect()).unwrap();
        assert_eq!(m.pixel(1, 0), &[3.0, 4.0, 5.0]);
        assert_eq!(m.get(0, 1, 2), 8.0);
        assert_eq!(m.get3(1, 1), DVec3::new(9.0, 10.0, 11.0));
    }

    #[test]
    fn concat_and_slice_invert() {
        let a = Map::from_fn(3, 2, 2, |x, y, p| {
            p[0] = x as f64;
            p[1] = y as f64;
        });
        let b = Map::filled(3, 2, 1, 7.0);
        let c = Map::concat_channels(&[&a, &b]).unwrap();
        assert_eq!(c.channels(), 3);
        assert_eq!(c.channels_slice(0, 2), a);
        assert_eq!(c.channels_slice(2, 1), b);
    }

    #[test]
    fn from_vec_rejects_wrong_length() {
        assert!(Map::from_vec(2, 2, 1, vec![0.0; 3]).is_err());
    }
}
