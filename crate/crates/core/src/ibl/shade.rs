use super::lut::cell;
use super::{compute_brdf_lut, prefilter_diffuse, prefilter_specular, sample_equirect, BrdfLut, EnvMap, SpecularChain};
use crate::brdf::{Material, DIELECTRIC_F0};
use crate::error::{ensure, Error, Result};
use crate::gbuffer::GBuffer;
use crate::map::Map;
use crate::math::{reflect, DVec3, PI};

/// Everything the direct shader needs from the light: the source map, its
/// irradiance, the specular chain and the BRDF table.
#[derive(Debug, Clone, PartialEq)]
pub struct EnvironmentSet {
    pub env: EnvMap,
    pub irradiance: EnvMap,
    pub specular: SpecularChain,
    pub lut: BrdfLut,
}

impl EnvironmentSet {
    pub fn build(env: EnvMap, irradiance_height: usize, mip_count: usize, lut_size: usize) -> Result<Self> {
        let lut = compute_brdf_lut(lut_size)?;
        Self::with_lut(env, irradiance_height, mip_count, lut)
    }

    /// Prefilters `env` and reuses an existing table (it does not depend on the light).
    pub fn with_lut(env: EnvMap, irradiance_height: usize, mip_count: usize, lut: BrdfLut) -> Result<Self> {
        let irradiance = prefilter_diffuse(&env, irradiance_height);
        let specular = prefilter_specular(&env, mip_count)?;
        Ok(EnvironmentSet {
            env,
            irradiance,
            specular,
            lut,
        })
    }

    pub fn with_defaults(env: EnvMap) -> Result<Self> {
        Self::build(
            env,
            super::DEFAULT_IRRADIANCE_HEIGHT,
            super::DEFAULT_MIP_COUNT,
            super::DEFAULT_LUT_SIZE,
        )
    }

    pub fn validate(&self) -> Result<()> {
        ensure!(
            self.specular.mip_count() >= 2,
            Config,
            "environment set has {} specular mips (need at least 2)",
            self.specular.mip_count()
        );
        ensure!(
            self.specular.mips[0].height() == self.env.height(),
            Config,
            "specular mip 0 must match the source map"
        );
        ensure!(self.lut.size() >= 2, Config, "environment set lacks a BRDF table");
        ensure!(
            self.irradiance.height() > 0,
            Config,
            "environment set lacks an irradiance map"
        );
        Ok(())
    }

    /// Lighting terms for a surface with world normal `n`, world reflection
    /// direction `r` and `n.v = cos`.
    pub fn lighting(&self, n: DVec3, r: DVec3, cos: f64) -> PixelLighting {
        PixelLighting {
            i_dir: sample_equirect(self.irradiance.radiance(), n),
            spec: self
                .specular
                .mips
                .iter()
                .map(|m| sample_equirect(m.radiance(), r))
                .collect(),
            lut: self.lut.row_at(cos),
        }
    }

    /// Direct shading of one world-space point seen from direction `wo`
    /// (unit, surface to viewer). Same model as [`PixelLighting::shade`]
    /// without building the per-pixel tables.
    pub fn shade_point(&self, n: DVec3, wo: DVec3, mat: &Material, occlusion: f64) -> DVec3 {
        let r = reflect(-wo, n).normalize();
        let cos = n.dot(wo).clamp(MIN_COS, 1.0);
        let m = self.specular.mip_count();
        let (i, f) = cell(mat.roughness, m);
        let i_s = sample_equirect(self.specular.mips[i].radiance(), r) * (1.0 - f)
            + sample_equirect(self.specular.mips[i + 1].radiance(), r) * f;
        let (a, b) = self.lut.lookup(cos, mat.roughness);
        let i_dir = sample_equirect(self.irradiance.radiance(), n);
        mat.diffuse() * occlusion * i_dir + (a * mat.f0() + DVec3::splat(b)) * i_s
    }
}

/// Light-side quantities at one pixel. Geometry is baked in; the material
/// is not, so these can be reused across material updates.
#[derive(Debug, Clone, PartialEq)]
pub struct PixelLighting {
    /// Irradiance at the normal.
    pub i_dir: DVec3,
    /// Specular radiance at the reflection direction, one value per mip.
    pub spec: Vec<DVec3>,
    /// `(A, B)` at this pixel's `n.v` for every roughness node.
    pub lut: Vec<[f64; 2]>,
}

/// Analytic derivatives of one pixel of the direct image. Each field holds
/// the derivative of the three output channels; albedo enters channel-wise,
/// so its Jacobian is diagonal.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DirectGrad {
    pub albedo: DVec3,
    pub metallic: DVec3,
    pub roughness: DVec3,
}

impl PixelLighting {
    /// Specular radiance at `roughness` and its derivative, linear between mips.
    pub fn specular(&self, roughness: f64) -> (DVec3, DVec3) {
        let m = self.spec.len();
        let (i, f) = cell(roughness, m);
        let (a, b) = (self.spec[i], self.spec[i + 1]);
        (a * (1.0 - f) + b * f, (b - a) * (m - 1) as f64)
    }

    /// `(A, B)` at `roughness` and their derivatives.
    pub fn split_sum(&self, roughness: f64) -> ([f64; 2], [f64; 2]) {
        let n = self.lut.len();
        let (j, f) = cell(roughness, n);
        let (a, b) = (self.lut[j], self.lut[j + 1]);
        let s = (n - 1) as f64;
        (
            [a[0] * (1.0 - f) + b[0] * f, a[1] * (1.0 - f) + b[1] * f],
            [(b[0] - a[0]) * s, (b[1] - a[1]) * s],
        )
    }

    /// `(1 - m)(a / pi) O I_dir + (A f0 + B) I_s`.
    pub fn shade(&self, mat: &Material, occlusion: f64) -> DVec3 {
        let (i_s, _) = self.specular(mat.roughness);
        let ([a, b], _) = self.split_sum(mat.roughness);
        mat.diffuse() * occlusion * self.i_dir + (a * mat.f0() + DVec3::splat(b)) * i_s
    }

    pub fn grad(&self, mat: &Material, occlusion: f64) -> DirectGrad {
        let (i_s, di_s) = self.specular(mat.roughness);
        let ([a, b], [da, db]) = self.split_sum(mat.roughness);
        let f0 = mat.f0();
        let lit = occlusion * self.i_dir / PI;
        DirectGrad {
            albedo: (1.0 - mat.metallic) * lit + a * mat.metallic * i_s,
            metallic: -mat.albedo * lit + a * (mat.albedo - DVec3::splat(DIELECTRIC_F0)) * i_s,
            roughness: (da * f0 + DVec3::splat(db)) * i_s + (a * f0 + DVec3::splat(b)) * di_s,
        }
    }
}

/// Minimum `n.v` used for table lookups; pseudo-normals can face slightly away.
const MIN_COS: f64 = 1e-4;

/// World-space normal, world reflection direction and `n.v` at a pixel.
pub fn pixel_geometry(gb: &GBuffer, x: usize, y: usize) -> (DVec3, DVec3, f64) {
    let n = gb.normal_at(x, y);
    let wo = -gb.view_point(x, y).normalize();
    let r = reflect(-wo, n);
    let cos = n.dot(wo).clamp(MIN_COS, 1.0);
    (gb.pose.dir_to_world(n), gb.pose.dir_to_world(r).normalize(), cos)
}

/// Lighting terms of every masked pixel (row-major, `None` where unmasked).
pub fn pixel_lighting(gb: &GBuffer, env: &EnvironmentSet) -> Result<Vec<Option<PixelLighting>>> {
    env.validate()?;
    let w = gb.width();
    let rows: Vec<Vec<Option<PixelLighting>>> = {
        use rayon::prelude::*;
        (0..gb.height())
            .into_par_iter()
            .map(|y| {
                (0..w)
                    .map(|x| {
                        gb.is_masked(x, y).then(|| {
                            let (n, r, cos) = pixel_geometry(gb, x, y);
                            env.lighting(n, r, cos)
                        })
                    })
                    .collect()
            })
            .collect()
    };
    Ok(rows.into_iter().flatten().collect())
}

fn check_occlusion(gb: &GBuffer, occl: &Map) -> Result<()> {
    ensure!(occl.channels() == 1, Dimensions, "occlusion map must have 1 channel");
    gb.depth.check_size(occl, "G-buffer vs occlusion")?;
    if let Some(v) = occl.data().iter().find(|v| !(0.0..=1.0).contains(*v)) {
        return Err(Error::Precondition(format!("occlusion value {v} outside [0, 1]")));
    }
    Ok(())
}

/// Direct lighting of every masked pixel; unmasked pixels are black.
pub fn shade_direct(gb: &GBuffer, env: &EnvironmentSet, occl: &Map) -> Result<Map> {
    env.validate()?;
    check_occlusion(gb, occl)?;
    Ok(Map::from_fn(gb.width(), gb.height(), 3, |x, y, p| {
        if !gb.is_masked(x, y) {
            return;
        }
        let (n, r, cos) = pixel_geometry(gb, x, y);
        let v = env.lighting(n, r, cos).shade(&gb.material(x, y), occl.get(x, y, 0));
        p.copy_from_slice(&v.to_array());
    }))
}

/// Derivatives of the direct image at `(x, y)` with respect to the pixel's
/// albedo, metallic and roughness.
pub fn grad_direct(gb: &GBuffer, env: &EnvironmentSet, occl: &Map, x: usize, y: usize) -> Result<DirectGrad> {
    env.validate()?;
    check_occlusion(gb, occl)?;
    if x >= gb.width() || y >= gb.height() || !gb.is_masked(x, y) {
        return Err(Error::Unmasked { x, y });
    }
    let (n, r, cos) = pixel_geometry(gb, x, y);
    Ok(env.lighting(n, r, cos).grad(&gb.material(x, y), occl.get(x, y, 0)))
}
