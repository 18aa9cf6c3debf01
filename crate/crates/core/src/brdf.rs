//! Cook-Torrance microfacet BRDF: GGX distribution, Schlick Fresnel and
//! Smith geometry with the Schlick-GGX `k = alpha / 2` remapping.

use serde::{Deserialize, Serialize};

use crate::error::{ensure, Result};
use crate::math::{mix, DVec3, PI};

/// Lower bound on `alpha = roughness^2` so the GGX lobe stays finite.
pub const MIN_ALPHA: f64 = 1e-4;

/// Regularizer added to the specular denominator.
pub const SPECULAR_EPS: f64 = 1e-6;

/// Reflectance of dielectrics at normal incidence.
pub const DIELECTRIC_F0: f64 = 0.04;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Material {
    pub albedo: DVec3,
    pub roughness: f64,
    pub metallic: f64,
}

impl Material {
    pub const fn new(albedo: DVec3, roughness: f64, metallic: f64) -> Self {
        Material {
            albedo,
            roughness,
            metallic,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let unit = |v: f64| (0.0..=1.0).contains(&v);
        ensure!(
            self.albedo.to_array().iter().all(|&c| unit(c)) && unit(self.roughness) && unit(self.metallic),
            Precondition,
            "material channels must lie in [0, 1]: {self:?}"
        );
        Ok(())
    }

    /// Normal-incidence Fresnel reflectance.
    #[inline]
    pub fn f0(&self) -> DVec3 {
        mix(DVec3::splat(DIELECTRIC_F0), self.albedo, self.metallic)
    }

    /// Lambertian part `(1 - m) a / pi`.
    #[inline]
    pub fn diffuse(&self) -> DVec3 {
        (1.0 - self.metallic) * self.albedo / PI
    }
}

#[inline]
pub fn alpha(roughness: f64) -> f64 {
    (roughness.clamp(0.0, 1.0) * roughness.clamp(0.0, 1.0)).max(MIN_ALPHA)
}

/// Geometry of one shading evaluation. All vectors point away from the surface.
#[derive(Debug, Clone, Copy)]
pub struct ShadingFrame {
    pub n: DVec3,
    pub wo: DVec3,
    pub wi: DVec3,
    pub h: DVec3,
}

impl ShadingFrame {
    /// Builds the frame; `h` falls back to `n` when `wi = -wo`.
    pub fn new(n: DVec3, wo: DVec3, wi: DVec3) -> Self {
        let h = (wi + wo).try_normalize().unwrap_or(n);
        ShadingFrame { n, wo, wi, h }
    }
}

/// GGX / Trowbridge-Reitz normal distribution.
#[inline]
pub fn ndf_ggx(n_dot_h: f64, roughness: f64) -> f64 {
    let a2 = alpha(roughness).powi(2);
    let c = n_dot_h.clamp(0.0, 1.0);
    let d = c * c * (a2 - 1.0) + 1.0;
    a2 / (PI * d * d)
}

#[inline]
pub fn fresnel_schlick(v_dot_h: f64, f0: DVec3) -> DVec3 {
    let w = (1.0 - v_dot_h.clamp(0.0, 1.0)).powi(5);
    f0 + (DVec3::ONE - f0) * w
}

/// Schlick-GGX masking for one direction.
#[inline]
pub fn g1_schlick(n_dot_x: f64, k: f64) -> f64 {
    let x = n_dot_x.clamp(0.0, 1.0);
    if x == 0.0 {
        return 0.0;
    }
    x / (x * (1.0 - k) + k)
}

#[inline]
pub fn geometry_smith(n_dot_v: f64, n_dot_l: f64, roughness: f64) -> f64 {
    let k = alpha(roughness) / 2.0;
    g1_schlick(n_dot_v, k) * g1_schlick(n_dot_l, k)
}

/// Specular microfacet term `D F G / (4 (n.wi)(n.wo) + eps)`.
pub fn specular_eval(frame: &ShadingFrame, mat: &Material) -> DVec3 {
    let n_i = frame.n.dot(frame.wi);
    let n_o = frame.n.dot(frame.wo);
    if n_i <= 0.0 || n_o <= 0.0 {
        return DVec3::ZERO;
    }
    let d = ndf_ggx(frame.n.dot(frame.h), mat.roughness);
    let f = fresnel_schlick(frame.wo.dot(frame.h), mat.f0());
    let g = geometry_smith(n_o, n_i, mat.roughness);
    d * g * f / (4.0 * n_i * n_o + SPECULAR_EPS)
}

/// Full BRDF value; zero when either direction is below the horizon.
pub fn brdf_eval(frame: &ShadingFrame, mat: &Material) -> DVec3 {
    if frame.n.dot(frame.wi) <= 0.0 || frame.n.dot(frame.wo) <= 0.0 {
        return DVec3::ZERO;
    }
    mat.diffuse() + specular_eval(frame, mat)
}
