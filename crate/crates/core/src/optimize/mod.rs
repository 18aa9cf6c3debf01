//! Per-pixel inverse rendering: recover material maps (and optionally a
//! low-resolution environment map) from rendered images of known geometry.
//!
//! The loss is the masked L1 photometric error plus edge-aware material
//! smoothness and plain environment smoothness. Occlusion is traced once.
//! Indirect irradiance is recomputed every `freeze_indirect_every`
//! iterations from the current direct render and held constant in
//! between; only the receiving pixel's own lambertian factor is
//! differentiated.

mod losses;

use std::io::Write;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use losses::{
    color_l1, decomposition_loss, normal_loss, tv_edge_aware, tv_plain, tv_plain_grad, EdgeWeights, LossBreakdown,
    LossWeights,
};

use crate::brdf::Material;
use crate::error::{ensure, Error, Result};
use crate::gbuffer::{GBuffer, MaterialMaps, ViewPose};
use crate::ibl::{
    bilinear_taps, pixel_geometry, pixel_lighting, prefilter_diffuse_adjoint, prefilter_specular_adjoint, EnvMap,
    EnvironmentSet, PixelLighting,
};
use crate::map::Map;
use crate::math::{DVec3, PI};
use crate::pipeline::{render, RenderBundle};
use crate::tracing::{trace, TraceHooks, TraceResult, TracingConfig};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OptimizeConfig {
    pub iterations: usize,
    pub lr_initial: f64,
    pub lr_final: f64,
    pub optimize_env: bool,
    /// Indirect light refresh cadence in iterations.
    pub freeze_indirect_every: usize,
    pub weights: LossWeights,
}

impl Default for OptimizeConfig {
    fn default() -> Self {
        OptimizeConfig {
            iterations: 2000,
            lr_initial: 0.05,
            lr_final: 0.005,
            optimize_env: false,
            freeze_indirect_every: 50,
            weights: LossWeights::default(),
        }
    }
}

impl OptimizeConfig {
    pub fn validate(&self) -> Result<()> {
        ensure!(
            self.lr_final > 0.0 && self.lr_final <= self.lr_initial,
            Config,
            "learning rates must satisfy 0 < final <= initial (got {} -> {})",
            self.lr_initial,
            self.lr_final
        );
        ensure!(
            self.freeze_indirect_every >= 1,
            Config,
            "indirect refresh cadence must be at least 1"
        );
        self.weights.validate()
    }

    /// `lr_initial (lr_final / lr_initial)^(i / iterations)`, written as a
    /// geometric blend so both endpoints are exact.
    pub fn lr(&self, i: usize) -> f64 {
        if self.iterations == 0 {
            return self.lr_initial;
        }
        let s = i as f64 / self.iterations as f64;
        self.lr_initial.powf(1.0 - s) * self.lr_final.powf(s)
    }
}

/// One observed image. Views share the G-buffer's pixel grid; `pose`
/// orients the environment relative to the camera for this shot.
#[derive(Debug, Clone, PartialEq)]
pub struct GtView {
    pub image: Map,
    pub pose: ViewPose,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub iteration: usize,
    #[serde(flatten)]
    pub loss: LossBreakdown,
    pub lr: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizeResult {
    pub materials: MaterialMaps,
    /// Refined lighting when environment optimization was enabled.
    pub env: Option<EnvMap>,
    /// One row per evaluated iterate, `iterations + 1` in total.
    pub trace: Vec<TraceRow>,
}

impl OptimizeResult {
    /// CSV with columns `iteration,color,material_tv,light_tv,total,lr`.
    pub fn write_trace_csv(&self, out: &mut impl Write) -> std::io::Result<()> {
        writeln!(out, "iteration,color,material_tv,light_tv,total,lr")?;
        for r in &self.trace {
            writeln!(
                out,
                "{},{},{},{},{},{}",
                r.iteration, r.loss.color, r.loss.material_tv, r.loss.light_tv, r.loss.total, r.lr
            )?;
        }
        Ok(())
    }

    pub fn save_trace_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut f = std::io::BufWriter::new(std::fs::File::create(path).map_err(|e| Error::io(path, e))?);
        self.write_trace_csv(&mut f).map_err(|e| Error::io(path, e))
    }
}

/// Per-view state that depends on the light but not on the materials.
struct ViewState {
    gb: GBuffer,
    gt: Map,
    lighting: Vec<Option<PixelLighting>>,
    /// Incoming bounce irradiance, refreshed periodically.
    bounce: Map,
}

/// Per-pixel derivative of the photometric loss, with the sign pattern of
/// the residual needed by the environment gradient.
struct PixelEval {
    render: DVec3,
    abs_err: f64,
    /// `d(sum_c |r_c|) / d(albedo, metallic, roughness)`.
    g_albedo: DVec3,
    g_metallic: f64,
    g_roughness: f64,
    sign: DVec3,
}

fn eval_pixel(pl: &PixelLighting, mat: &Material, occl: f64, bounce: DVec3, gt: DVec3) -> PixelEval {
    let render = pl.shade(mat, occl) + mat.diffuse() * bounce;
    let r = render - gt;
    let sign = DVec3::new(sgn(r.x), sgn(r.y), sgn(r.z));
    let g = pl.grad(mat, occl);
    let ga = g.albedo + (1.0 - mat.metallic) / PI * bounce;
    let gm = g.metallic - mat.albedo / PI * bounce;
    PixelEval {
        render,
        abs_err: r.abs().element_sum(),
        g_albedo: sign * ga,
        g_metallic: sign.dot(gm),
        g_roughness: sign.dot(g.roughness),
        sign,
    }
}

#[inline]
fn sgn(v: f64) -> f64 {
    if v > 0.0 {
        1.0
    } else if v < 0.0 {
        -1.0
    } else {
        0.0
    }
}

fn view_gbuffer(geometry: &GBuffer, materials: &MaterialMaps, pose: ViewPose) -> GBuffer {
    GBuffer {
        materials: materials.clone(),
        pose,
        ..geometry.clone()
    }
}

/// Unoccluded direct image: the bounce source shades hits with `O = 1`.
fn first_pass_image(v: &ViewState, materials: &MaterialMaps) -> Map {
    let w = v.gb.width();
    Map::from_fn(w, v.gb.height(), 3, |x, y, p| {
        if let Some(pl) = &v.lighting[y * w + x] {
            let c = pl.shade(&materials.at(x, y), 1.0);
            p.copy_from_slice(&c.to_array());
        }
    })
}

fn refresh_bounce(views: &mut [ViewState], tr: &TraceResult, materials: &MaterialMaps) {
    for v in views.iter_mut() {
        let direct = first_pass_image(v, materials);
        let w = v.gb.width();
        v.bounce = tr.gather(w, v.gb.height(), |src| direct.get3(src as usize % w, src as usize / w));
    }
}

/// Sums of `sign * d render / d I_dir` over irradiance texels and of
/// `sign * d render / d I_s` over each mip's texels, for one view.
fn light_gradient(
    v: &ViewState,
    materials: &MaterialMaps,
    occl: &Map,
    signs: &[DVec3],
    env: &EnvironmentSet,
    grad_irr: &mut Map,
    grad_mips: &mut [Map],
) {
    let w = v.gb.width();
    let m = env.specular.mip_count();
    for (i, pl) in v.lighting.iter().enumerate() {
        if pl.is_none() || signs[i] == DVec3::ZERO {
            continue;
        }
        let (x, y) = (i % w, i / w);
        let mat = materials.at(x, y);
        let (n, r, cos) = pixel_geometry(&v.gb, x, y);
        let o = occl.get(x, y, 0);
        let d_irr = signs[i] * mat.diffuse() * o;
        let irr = env.irradiance.radiance();
        for (t, wt) in bilinear_taps(irr.width(), irr.height(), n) {
            let g = &mut grad_irr.data_mut()[3 * t..3 * t + 3];
            for c in 0..3 {
                g[c] += wt * d_irr[c];
            }
        }
        let (a, b) = env.lut.lookup(cos, mat.roughness);
        let s = signs[i] * (a * mat.f0() + DVec3::splat(b));
        let (lvl, f) = crate::ibl::mip_cell(mat.roughness, m);
        for (l, lw) in [(lvl, 1.0 - f), (lvl + 1, f)] {
            if lw == 0.0 {
                continue;
            }
            let mip = &mut grad_mips[l];
            for (t, wt) in bilinear_taps(mip.width(), mip.height(), r) {
                let g = &mut mip.data_mut()[3 * t..3 * t + 3];
                for c in 0..3 {
                    g[c] += lw * wt * s[c];
                }
            }
        }
    }
}

/// Gradient descent on the decomposition loss.
///
/// `geometry` supplies depth, normals, mask, camera and the starting
/// materials. Each view renders the same pixel grid; its pose orients the
/// environment. Returns the final materials, the refined environment when
/// `cfg.optimize_env` is set, and the per-iteration loss trace.
pub fn optimize_materials(
    geometry: &GBuffer,
    views: &[GtView],
    env_init: &EnvironmentSet,
    tracing: &TracingConfig,
    cfg: &OptimizeConfig,
) -> Result<OptimizeResult> {
    cfg.validate()?;
    geometry.validate()?;
    env_init.validate()?;
    ensure!(
        !views.is_empty(),
        Precondition,
        "at least one ground-truth view is required"
    );
    for v in views {
        geometry.depth.check_size(&v.image, "G-buffer vs ground truth")?;
        ensure!(v.image.channels() == 3, Dimensions, "ground truth must have 3 channels");
        v.pose.validate()?;
    }
    let (w, h) = (geometry.width(), geometry.height());
    let npix = w * h;
    let masked = geometry.masked_count();
    ensure!(masked > 0, Precondition, "G-buffer has no masked pixels");

    let tr = trace(geometry, tracing, TraceHooks::default())?;
    let occl = tr.occlusion.clone();
    let mut materials = geometry.materials.clone();
    let mut env = env_init.clone();
    let irr_h = env.irradiance.height();
    let mip_count = env.specular.mip_count();
    let edges = EdgeWeights::new(&views[0].image);

    let mut states: Vec<ViewState> = views
        .iter()
        .map(|v| {
            let gb = view_gbuffer(geometry, &materials, v.pose);
            Ok(ViewState {
                lighting: pixel_lighting(&gb, &env)?,
                gt: v.image.clone(),
                bounce: Map::new(w, h, 3),
                gb,
            })
        })
        .collect::<Result<_>>()?;
    refresh_bounce(&mut states, &tr, &materials);

    // Step scale: per-pixel parameters under a mean-reduced loss.
    let precond = masked as f64;
    let color_norm = 1.0 / (3 * masked) as f64;
    let mut trace_rows = Vec::with_capacity(cfg.iterations + 1);
    let mut initial = None;

    for it in 0..=cfg.iterations {
        if it > 0 && it % cfg.freeze_indirect_every == 0 {
            refresh_bounce(&mut states, &tr, &materials);
        }
        // Photometric term and material gradients, summed over views.
        let mut g_mat = MaterialMaps {
            albedo: Map::new(w, h, 3),
            roughness: Map::new(w, h, 1),
            metallic: Map::new(w, h, 1),
        };
        let mut color = 0.0;
        let mut view_signs = Vec::with_capacity(states.len());
        for v in &states {
            let rows: Vec<Vec<Option<PixelEval>>> = (0..h)
                .into_par_iter()
                .map(|y| {
                    (0..w)
                        .map(|x| {
                            let i = y * w + x;
                            v.lighting[i].as_ref().map(|pl| {
                                eval_pixel(
                                    pl,
                                    &materials.at(x, y),
                                    occl.get(x, y, 0),
                                    v.bounce.get3(x, y),
                                    v.gt.get3(x, y),
                                )
                            })
                        })
                        .collect()
                })
                .collect();
            let mut err = 0.0;
            let mut signs = vec![DVec3::ZERO; npix];
            for (i, e) in rows.into_iter().flatten().enumerate() {
                if let Some(e) = e {
                    err += e.abs_err;
                    signs[i] = e.sign;
                    let (x, y) = (i % w, i / w);
                    let ga = g_mat.albedo.get3(x, y) + e.g_albedo * color_norm;
                    g_mat.albedo.set3(x, y, ga);
                    g_mat.metallic.data_mut()[i] += e.g_metallic * color_norm;
                    g_mat.roughness.data_mut()[i] += e.g_roughness * color_norm;
                    debug_assert!(e.render.is_finite());
                }
            }
            color += err * color_norm;
            view_signs.push(signs);
        }

        // Material smoothness on the stacked (albedo, roughness, metallic) maps.
        let stacked = materials.stacked();
        let mut g_stacked = Map::new(w, h, 5);
        let material_tv = edges.apply(&stacked, Some(&mut g_stacked));
        let (light_tv, g_env_tv) = tv_plain_grad(&env.env);
        let loss = LossBreakdown::new(color, material_tv, light_tv, &cfg.weights);
        let lr = cfg.lr(it);
        trace_rows.push(TraceRow {
            iteration: it,
            loss,
            lr,
        });
        let init = *initial.get_or_insert(loss.total);
        if !loss.total.is_finite() || loss.total > 10.0 * init {
            return Err(Error::Diverged {
                iteration: it,
                loss: loss.total,
                initial: init,
            });
        }
        if it == cfg.iterations {
            break;
        }

        // Lighting gradient at the current iterate, before materials move.
        let new_radiance = if cfg.optimize_env {
            let mut grad_irr = Map::new(2 * irr_h, irr_h, 3);
            let mut grad_mips: Vec<Map> = env
                .specular
                .mips
                .iter()
                .map(|m| Map::new(m.width(), m.height(), 3))
                .collect();
            for (v, signs) in states.iter().zip(&view_signs) {
                light_gradient(v, &materials, &occl, signs, &env, &mut grad_irr, &mut grad_mips);
            }
            let eh = env.env.height();
            let d = prefilter_diffuse_adjoint(eh, &grad_irr);
            let s = prefilter_specular_adjoint(eh, &grad_mips);
            let texels = env.env.radiance().pixel_count() as f64;
            let le = cfg.weights.light_tv;
            let mut radiance = env.env.radiance().clone();
            for (k, v) in radiance.data_mut().iter_mut().enumerate() {
                let g = (d.data()[k] + s.data()[k]) * color_norm + le * g_env_tv.data()[k];
                *v = (*v - lr * texels * g).max(0.0);
            }
            Some(radiance)
        } else {
            None
        };

        let step = lr * precond;
        let lm = cfg.weights.material_tv;
        for i in 0..npix {
            let gs = &g_stacked.data()[5 * i..5 * i + 5];
            let a = &mut materials.albedo.data_mut()[3 * i..3 * i + 3];
            for c in 0..3 {
                a[c] = (a[c] - step * (g_mat.albedo.data()[3 * i + c] + lm * gs[c])).clamp(0.0, 1.0);
            }
            let r = &mut materials.roughness.data_mut()[i];
            *r = (*r - step * (g_mat.roughness.data()[i] + lm * gs[3])).clamp(0.0, 1.0);
            let m = &mut materials.metallic.data_mut()[i];
            *m = (*m - step * (g_mat.metallic.data()[i] + lm * gs[4])).clamp(0.0, 1.0);
        }

        if let Some(radiance) = new_radiance {
            env = EnvironmentSet::with_lut(EnvMap::new(radiance)?, irr_h, mip_count, env.lut.clone())?;
            for (st, view) in states.iter_mut().zip(views) {
                st.gb = view_gbuffer(geometry, &materials, view.pose);
                st.lighting = pixel_lighting(&st.gb, &env)?;
            }
        }
    }
    Ok(OptimizeResult {
        materials,
        env: cfg.optimize_env.then(|| env.env.clone()),
        trace: trace_rows,
    })
}

/// Renders `geometry` with `materials` under a new environment: direct
/// light, occlusion, bounce light from the new direct image, composite.
pub fn relight(
    geometry: &GBuffer,
    materials: &MaterialMaps,
    env: &EnvironmentSet,
    tracing: &TracingConfig,
) -> Result<RenderBundle> {
    render(&geometry.with_materials(materials.clone())?, env, tracing, None)
}

/// Albedo PSNR over masked pixels, `10 log10(1 / mse)`.
pub fn albedo_psnr(a: &MaterialMaps, b: &MaterialMaps, mask: &[bool]) -> f64 {
    crate::metrics::psnr_masked(&a.albedo, &b.albedo, mask)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ibl::{grad_direct, shade_direct};
    use crate::oracle::{preset, synth_gbuffer};

    fn small_scene(size: usize) -> (GBuffer, EnvironmentSet, TracingConfig) {
        let p = preset("box_interior", size).unwrap();
        let gb = synth_gbuffer(&p.scene, &p.pose, &p.intrinsics).unwrap();
        let env = EnvironmentSet::build(crate::oracle::sky_env(16), 8, 4, 32).unwrap();
        let cfg = TracingConfig::default_for(&gb.intrinsics);
        (gb, env, cfg)
    }

    #[test]
    fn lr_endpoints_exact() {
        let c = OptimizeConfig::default();
        assert_eq!(c.lr(0), 0.05);
        assert_eq!(c.lr(2000), 0.005);
        assert!((c.lr(1000) - 0.05 * 0.1f64.sqrt()).abs() < 1e-15);
        for i in 1..2000 {
            assert!(c.lr(i) < c.lr(i - 1));
        }
    }

    #[test]
    fn zero_iterations_echo_init() {
        let (gb, env, tcfg) = small_scene(24);
        let gt = relight(&gb, &gb.materials, &env, &tcfg).unwrap().composite;
        let mut init = gb.clone();
        init.materials = MaterialMaps::uniform(24, 24, Material::new(DVec3::splat(0.5), 0.5, 0.5));
        let cfg = OptimizeConfig {
            iterations: 0,
            ..Default::default()
        };
        let views = [GtView {
            image: gt,
            pose: gb.pose,
        }];
        let r = optimize_materials(&init, &views, &env, &tcfg, &cfg).unwrap();
        assert_eq!(r.materials, init.materials);
        assert_eq!(r.trace.len(), 1);
        assert!(r.env.is_none());
        let mut csv = Vec::new();
        r.write_trace_csv(&mut csv).unwrap();
        assert_eq!(String::from_utf8(csv).unwrap().lines().count(), 2);
    }

    #[test]
    fn loss_breakdown_matches_decomposition_loss() {
        let (gb, env, tcfg) = small_scene(24);
        let gt = relight(&gb, &gb.materials, &env, &tcfg).unwrap().composite;
        let mut init = gb.clone();
        init.materials = MaterialMaps::uniform(24, 24, Material::new(DVec3::splat(0.5), 0.5, 0.5));
        let cfg = OptimizeConfig {
            iterations: 0,
            ..Default::default()
        };
        let views = [GtView {
            image: gt.clone(),
            pose: gb.pose,
        }];
        let r = optimize_materials(&init, &views, &env, &tcfg, &cfg).unwrap();
        let render = relight(&init, &init.materials, &env, &tcfg).unwrap().composite;
        let l = decomposition_loss(&render, &gt, &gb.mask, &init.materials, &env.env, &cfg.weights).unwrap();
        assert!(
            (r.trace[0].loss.total - l.total).abs() < 1e-9,
            "{:?} vs {:?}",
            r.trace[0].loss,
            l
        );
    }

    #[test]
    fn short_run_reduces_loss_and_stays_in_range() {
        let (gb, env, tcfg) = small_scene(24);
        let gt = relight(&gb, &gb.materials, &env, &tcfg).unwrap().composite;
        let mut init = gb.clone();
        init.materials = MaterialMaps::uniform(24, 24, Material::new(DVec3::splat(0.5), 0.5, 0.5));
        let cfg = OptimizeConfig {
            iterations: 100,
            freeze_indirect_every: 10,
            ..Default::default()
        };
        let views = [GtView {
            image: gt,
            pose: gb.pose,
        }];
        let r = optimize_materials(&init, &views, &env, &tcfg, &cfg).unwrap();
        assert_eq!(r.trace.len(), 101);
        assert!(r.trace[100].loss.total < 0.5 * r.trace[0].loss.total);
        r.materials.validate().unwrap();
        let before = albedo_psnr(&init.materials, &gb.materials, &gb.mask);
        let after = albedo_psnr(&r.materials, &gb.materials, &gb.mask);
        assert!(after > before + 3.0, "{before} -> {after}");
    }

    #[test]
    fn env_refinement_moves_toward_truth() {
        let (gb, env, tcfg) = small_scene(24);
        let gt = relight(&gb, &gb.materials, &env, &tcfg).unwrap().composite;
        let start = EnvironmentSet::with_lut(env.env.scaled(0.5), 8, 4, env.lut.clone()).unwrap();
        let cfg = OptimizeConfig {
            iterations: 30,
            lr_initial: 0.01,
            lr_final: 0.005,
            optimize_env: true,
            freeze_indirect_every: 5,
            weights: LossWeights::default(),
        };
        let views = [GtView {
            image: gt,
            pose: gb.pose,
        }];
        let r = optimize_materials(&gb, &views, &start, &tcfg, &cfg).unwrap();
        let refined = r.env.unwrap();
        let dist = |e: &EnvMap| {
            e.radiance()
                .data()
                .iter()
                .zip(env.env.radiance().data())
                .map(|(a, b)| (a - b).abs())
                .sum::<f64>()
        };
        assert!(dist(&refined) < dist(&start.env));
        assert!(r.trace.last().unwrap().loss.color < r.trace[0].loss.color);
    }

    #[test]
    fn divergence_guard_trips() {
        let (gb, env, tcfg) = small_scene(16);
        let gt = relight(&gb, &gb.materials, &env, &tcfg).unwrap().composite;
        // Starting at the truth, the only gradient is the smoothness term at
        // material edges; an absurd step throws those pixels to the bounds.
        let cfg = OptimizeConfig {
            iterations: 20,
            lr_initial: 1e6,
            lr_final: 1e6,
            ..Default::default()
        };
        let init = gb.clone();
        let views = [GtView {
            image: gt,
            pose: gb.pose,
        }];
        let r = optimize_materials(&init, &views, &env, &tcfg, &cfg);
        assert!(matches!(r, Err(Error::Diverged { .. })), "{r:?}");
    }

    #[test]
    fn gradient_matches_render_difference() {
        // The optimizer's per-pixel model is the direct shader plus the
        // frozen bounce; its material derivative at zero bounce is grad_direct.
        let (gb, env, tcfg) = small_scene(24);
        let occl = trace(&gb, &tcfg, TraceHooks::default()).unwrap().occlusion;
        let lighting = pixel_lighting(&gb, &env).unwrap();
        let direct = shade_direct(&gb, &env, &occl).unwrap();
        for (x, y) in [(12, 20), (5, 12), (18, 6)] {
            let pl = lighting[y * 24 + x].as_ref().unwrap();
            let mat = gb.material(x, y);
            let gt = direct.get3(x, y) - DVec3::splat(1.0);
            let e = eval_pixel(pl, &mat, occl.get(x, y, 0), DVec3::ZERO, gt);
            let g = grad_direct(&gb, &env, &occl, x, y).unwrap();
            assert_eq!(e.g_albedo, g.albedo);
            assert_eq!(e.g_metallic, g.metallic.element_sum());
        }
    }
}
