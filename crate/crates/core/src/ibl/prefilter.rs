use rayon::prelude::*;

use super::{bilinear_taps, sample_equirect, texel_direction, EnvMap};
use crate::brdf::alpha;
use crate::error::{ensure, Result};
use crate::map::Map;
use crate::math::{ggx_half_vector, hammersley, DVec3, Frame, PI};

/// Lower bound on quadrature points per irradiance texel.
pub const DIFFUSE_MIN_SAMPLES: usize = 4096;

/// GGX samples per texel of every rough mip.
pub const SPECULAR_SAMPLES: u32 = 1024;

/// Smallest mip height; coarser mips stop shrinking here.
const MIN_MIP_HEIGHT: usize = 8;

/// One quadrature point of the source sphere.
#[derive(Clone, Copy)]
struct SourcePoint {
    dir: DVec3,
    solid_angle: f64,
    texel: usize,
}

/// Midpoints of an `s x s` subdivision of every source texel, with `s` the
/// smallest value giving at least [`DIFFUSE_MIN_SAMPLES`] points.
fn source_points(h: usize, w: usize) -> Vec<SourcePoint> {
    let mut s = 1;
    while h * w * s * s < DIFFUSE_MIN_SAMPLES {
        s += 1;
    }
    let (hs, ws) = ((h * s) as f64, (w * s) as f64);
    let d_theta = PI / hs;
    let d_phi = 2.0 * PI / ws;
    let mut out = Vec::with_capacity(h * w * s * s);
    for i in 0..h * s {
        let theta = PI * (i as f64 + 0.5) / hs;
        let (st, ct) = theta.sin_cos();
        for j in 0..w * s {
            let phi = 2.0 * PI * (j as f64 + 0.5) / ws;
            out.push(SourcePoint {
                dir: DVec3::new(st * phi.cos(), st * phi.sin(), ct),
                solid_angle: st * d_theta * d_phi,
                texel: (i / s) * w + j / s,
            });
        }
    }
    out
}

/// Cosine-weighted irradiance `I(n) = int L(w) max(0, w.n) dw` at every
/// texel of an `out_height x 2 out_height` map.
///
/// The quadrature treats each source texel as constant over its footprint
/// and rescales the weights so they integrate the cosine lobe to exactly
/// `pi`; a constant map therefore yields `pi L` up to rounding.
pub fn prefilter_diffuse(env: &EnvMap, out_height: usize) -> EnvMap {
    let points = source_points(env.height(), env.width());
    let src = env.radiance().data();
    let map = Map::from_fn(2 * out_height, out_height, 3, |x, y, p| {
        let n = texel_direction(y, x, out_height, 2 * out_height);
        let mut acc = DVec3::ZERO;
        let mut sw = 0.0;
        for sp in &points {
            let c = n.dot(sp.dir);
            if c > 0.0 {
                let w = c * sp.solid_angle;
                let t = 3 * sp.texel;
                acc += w * DVec3::new(src[t], src[t + 1], src[t + 2]);
                sw += w;
            }
        }
        let v = if sw > 0.0 { acc * (PI / sw) } else { DVec3::ZERO };
        p.copy_from_slice(&v.to_array());
    });
    EnvMap { radiance: map }
}

/// Transpose of [`prefilter_diffuse`] as a linear map from source texels to
/// irradiance texels: given `dLoss/dIrradiance`, returns `dLoss/dEnv`.
pub fn prefilter_diffuse_adjoint(env_height: usize, grad_irradiance: &Map) -> Map {
    let (oh, ow) = (grad_irradiance.height(), grad_irradiance.width());
    let (h, w) = (env_height, 2 * env_height);
    let points = source_points(h, w);
    let outputs: Vec<DVec3> = (0..oh * ow).map(|k| texel_direction(k / ow, k % ow, oh, ow)).collect();
    // Per-output normalization pi / sum(w).
    let norm: Vec<f64> = outputs
        .par_iter()
        .map(|n| {
            let sw: f64 = points.iter().map(|sp| n.dot(sp.dir).max(0.0) * sp.solid_angle).sum();
            if sw > 0.0 {
                PI / sw
            } else {
                0.0
            }
        })
        .collect();
    let g = grad_irradiance.data();
    let scaled: Vec<DVec3> = (0..oh * ow)
        .map(|k| norm[k] * DVec3::new(g[3 * k], g[3 * k + 1], g[3 * k + 2]))
        .collect();
    // Gather per source texel: sum over its sub-points and every output.
    let mut by_texel: Vec<Vec<SourcePoint>> = vec![Vec::new(); h * w];
    for sp in points {
        by_texel[sp.texel].push(sp);
    }
    Map::from_fn(w, h, 3, |x, y, p| {
        let mut acc = DVec3::ZERO;
        for sp in &by_texel[y * w + x] {
            for (n, gs) in outputs.iter().zip(&scaled) {
                let c = n.dot(sp.dir);
                if c > 0.0 {
                    acc += (c * sp.solid_angle) * *gs;
                }
            }
        }
        p.copy_from_slice(&acc.to_array());
    })
}

/// Roughness-indexed prefiltered radiance; mip `l` of `M` has roughness
/// `l / (M - 1)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpecularChain {
    pub mips: Vec<EnvMap>,
}

impl SpecularChain {
    #[inline]
    pub fn mip_count(&self) -> usize {
        self.mips.len()
    }

    pub fn roughness_of(&self, level: usize) -> f64 {
        level as f64 / (self.mips.len() - 1) as f64
    }
}

pub fn mip_height(source_height: usize, level: usize) -> usize {
    (source_height >> level.min(63)).max(MIN_MIP_HEIGHT).min(source_height)
}

/// Reflected directions and their `n.l` weights for the split-sum
/// assumption `n = v = r = +z`.
fn lobe_samples(roughness: f64) -> Vec<(DVec3, f64)> {
    let a = alpha(roughness);
    (0..SPECULAR_SAMPLES)
        .filter_map(|k| {
            let h = ggx_half_vector(hammersley(k, SPECULAR_SAMPLES), a);
            let l = 2.0 * h.z * h - DVec3::Z;
            (l.z > 0.0).then_some((l, l.z))
        })
        .collect()
}

pub fn prefilter_specular(env: &EnvMap, mip_count: usize) -> Result<SpecularChain> {
    ensure!(
        mip_count >= 2,
        Precondition,
        "specular chain needs at least 2 mips, got {mip_count}"
    );
    let mut mips = vec![env.clone()];
    for level in 1..mip_count {
        let rho = level as f64 / (mip_count - 1) as f64;
        let lobe = lobe_samples(rho);
        let h = mip_height(env.height(), level);
        let src = env.radiance();
        let map = Map::from_fn(2 * h, h, 3, |x, y, p| {
            let r = texel_direction(y, x, h, 2 * h);
            let frame = Frame::new(r);
            let mut acc = DVec3::ZERO;
            let mut sw = 0.0;
            for &(l, nl) in &lobe {
                acc += nl * sample_equirect(src, frame.to_world(l));
                sw += nl;
            }
            p.copy_from_slice(&(acc / sw).to_array());
        });
        mips.push(EnvMap { radiance: map });
    }
    Ok(SpecularChain { mips })
}

/// Transpose of [`prefilter_specular`]: maps per-mip gradients back onto
/// the source texels.
pub fn prefilter_specular_adjoint(env_height: usize, grad_mips: &[Map]) -> Map {
    let (h, w) = (env_height, 2 * env_height);
    let m = grad_mips.len();
    let mut total = grad_mips[0].clone();
    for (level, g) in grad_mips.iter().enumerate().skip(1) {
        let lobe = lobe_samples(level as f64 / (m - 1) as f64);
        let sw: f64 = lobe.iter().map(|s| s.1).sum();
        let (mh, mw) = (g.height(), g.width());
        // One scatter buffer per mip row, summed in row order afterwards.
        let rows: Vec<Vec<f64>> = (0..mh)
            .into_par_iter()
            .map(|y| {
                let mut buf = vec![0.0; h * w * 3];
                for x in 0..mw {
                    let gv = g.get3(x, y);
                    if gv == DVec3::ZERO {
                        continue;
                    }
                    let frame = Frame::new(texel_direction(y, x, mh, mw));
                    for &(l, nl) in &lobe {
                        let s = nl / sw;
                        for (i, wt) in bilinear_taps(w, h, frame.to_world(l)) {
                            let k = s * wt;
                            buf[3 * i] += k * gv.x;
                            buf[3 * i + 1] += k * gv.y;
                            buf[3 * i + 2] += k * gv.z;
                        }
                    }
                }
                buf
            })
            .collect();
        let data = total.data_mut();
        for row in rows {
            for (d, r) in data.iter_mut().zip(row) {
                *d += r;
            }
        }
    }
    total
}
