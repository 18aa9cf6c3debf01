//! Image-based lighting: equirectangular environment maps, diffuse and
//! specular prefiltering, the split-sum BRDF table and the direct shader.
//!
//! Equirectangular convention: texture coordinate `u` in `[0, 1)` maps to
//! azimuth `phi = 2 pi u` and `v` in `[0, 1]` to polar angle `theta = pi v`
//! measured from +z, giving `(sin t cos p, sin t sin p, cos t)`. Texel
//! `(row i, column j)` has its center at `u = (j + 0.5) / W`,
//! `v = (i + 0.5) / H`.

mod cache;
mod lut;
mod prefilter;
mod shade;

use crate::error::{ensure, Error, Result};
use crate::map::Map;
use crate::math::{spherical_dir, DVec3, PI};

pub use cache::{env_hash, prefilter_cached, CacheManifest};
pub(crate) use lut::cell as mip_cell;
pub use lut::{compute_brdf_lut, BrdfLut};
pub use prefilter::{
    prefilter_diffuse, prefilter_diffuse_adjoint, prefilter_specular, prefilter_specular_adjoint, SpecularChain,
    DIFFUSE_MIN_SAMPLES, SPECULAR_SAMPLES,
};
pub use shade::{grad_direct, pixel_geometry, pixel_lighting, shade_direct, DirectGrad, EnvironmentSet, PixelLighting};

pub const DEFAULT_IRRADIANCE_HEIGHT: usize = 32;
pub const DEFAULT_MIP_COUNT: usize = 5;
pub const DEFAULT_LUT_SIZE: usize = 64;

/// Linear HDR radiance on the sphere, `height x 2 height` texels.
#[derive(Debug, Clone, PartialEq)]
pub struct EnvMap {
    radiance: Map,
}

impl EnvMap {
    pub fn new(radiance: Map) -> Result<Self> {
        ensure!(
            radiance.channels() == 3,
            Dimensions,
            "environment maps have 3 channels, got {}",
            radiance.channels()
        );
        ensure!(
            radiance.height() > 0 && radiance.width() == 2 * radiance.height(),
            Dimensions,
            "environment map must be H x 2H, got {}x{}",
            radiance.height(),
            radiance.width()
        );
        if let Some(v) = radiance.data().iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
            return Err(Error::Precondition(format!(
                "environment radiance {v} is not finite and non-negative"
            )));
        }
        Ok(EnvMap { radiance })
    }

    pub fn constant(height: usize, value: DVec3) -> Self {
        EnvMap {
            radiance: Map::constant3(2 * height, height, value),
        }
    }

    /// Evaluates `f` at every texel-center direction.
    pub fn from_fn(height: usize, f: impl Fn(DVec3) -> DVec3 + Sync) -> Result<Self> {
        let w = 2 * height;
        EnvMap::new(Map::from_fn(w, height, 3, |x, y, p| {
            let v = f(texel_direction(y, x, height, w));
            p.copy_from_slice(&v.to_array());
        }))
    }

    #[inline]
    pub fn radiance(&self) -> &Map {
        &self.radiance
    }

    pub fn into_map(self) -> Map {
        self.radiance
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.radiance.height()
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.radiance.width()
    }

    #[inline]
    pub fn sample(&self, dir: DVec3) -> DVec3 {
        sample_equirect(&self.radiance, dir)
    }

    pub fn scaled(&self, s: f64) -> EnvMap {
        EnvMap {
            radiance: self.radiance.scaled(s),
        }
    }
}

/// Direction through the center of texel `(row, col)` of an `h x w` map.
#[inline]
pub fn texel_direction(row: usize, col: usize, h: usize, w: usize) -> DVec3 {
    let theta = PI * (row as f64 + 0.5) / h as f64;
    let phi = 2.0 * PI * (col as f64 + 0.5) / w as f64;
    spherical_dir(theta.sin(), theta.cos(), phi)
}

/// Texture coordinates `(u, v)` of a unit direction.
#[inline]
pub fn direction_uv(dir: DVec3) -> (f64, f64) {
    let mut u = dir.y.atan2(dir.x) / (2.0 * PI);
    if u < 0.0 {
        u += 1.0;
    }
    if u >= 1.0 {
        u = 0.0;
    }
    let v = dir.z.clamp(-1.0, 1.0).acos() / PI;
    (u, v)
}

/// The four bilinear taps (flat texel index, weight) for `dir`.
#[inline]
pub fn bilinear_taps(w: usize, h: usize, dir: DVec3) -> [(usize, f64); 4] {
    let (u, v) = direction_uv(dir);
    let x = u * w as f64 - 0.5;
    let y = v * h as f64 - 0.5;
    let (xf, yf) = (x.floor(), y.floor());
    let (fx, fy) = (x - xf, y - yf);
    let x0 = (xf as isize).rem_euclid(w as isize) as usize;
    let x1 = (x0 + 1) % w;
    let y0 = (yf as isize).clamp(0, h as isize - 1) as usize;
    let y1 = (yf as isize + 1).clamp(0, h as isize - 1) as usize;
    [
        (y0 * w + x0, (1.0 - fx) * (1.0 - fy)),
        (y0 * w + x1, fx * (1.0 - fy)),
        (y1 * w + x0, (1.0 - fx) * fy),
        (y1 * w + x1, fx * fy),
    ]
}

/// Bilinear lookup with azimuthal wraparound and clamping at the poles.
/// `dir` is assumed unit length.
#[inline]
pub fn sample_equirect(map: &Map, dir: DVec3) -> DVec3 {
    let data = map.data();
    let c = map.channels();
    let mut out = DVec3::ZERO;
    for (i, wt) in bilinear_taps(map.width(), map.height(), dir) {
        out += wt * DVec3::new(data[i * c], data[i * c + 1], data[i * c + 2]);
    }
    out
}

/// Checked form of [`sample_equirect`].
pub fn sample_env(map: &Map, dir: DVec3) -> Result<DVec3> {
    ensure!(
        (dir.length() - 1.0).abs() <= 1e-4,
        Precondition,
        "lookup direction {dir} is not unit length"
    );
    ensure!(map.channels() >= 3, Dimensions, "environment lookup needs 3 channels");
    Ok(sample_equirect(map, dir))
}
