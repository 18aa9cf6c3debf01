//! Screen-space ray marching against the depth buffer: ambient occlusion
//! and one-bounce diffuse indirect light.
//!
//! Every pixel marches its hemisphere rays once. The pass yields the
//! occlusion map directly and keeps a compact list of hits (source pixel,
//! sample index) so indirect light can be gathered afterwards from any
//! radiance image without marching again.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{ensure, Error, Result};
use crate::gbuffer::{CameraIntrinsics, GBuffer};
use crate::map::Map;
use crate::math::{DVec3, Frame, PI};

/// Offset applied along the normal before marching.
pub const NORMAL_OFFSET: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Sampler {
    /// `n1` azimuth by `n2` polar midpoints, weights `cos sin`.
    StratifiedSpherical { n1: usize, n2: usize },
    /// Fibonacci lattice on the hemisphere, weights `cos`.
    Fibonacci { n: usize },
}

impl Sampler {
    pub fn sample_count(&self) -> usize {
        match *self {
            Sampler::StratifiedSpherical { n1, n2 } => n1 * n2,
            Sampler::Fibonacci { n } => n,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TracingConfig {
    /// Base step length in scene units.
    pub t0: f64,
    pub max_steps: usize,
    /// Surface thickness for the hit test.
    pub delta: f64,
    pub sampler: Sampler,
}

pub const DEFAULT_SAMPLES: usize = 64;
pub const DEFAULT_MAX_STEPS: usize = 32;

impl TracingConfig {
    /// `t0 = 0.02 (z_far - z_near)`, 32 steps, `delta = 4 t0`, 64 Fibonacci rays.
    pub fn default_for(intr: &CameraIntrinsics) -> Self {
        let t0 = 0.02 * intr.depth_range();
        TracingConfig {
            t0,
            max_steps: DEFAULT_MAX_STEPS,
            delta: 4.0 * t0,
            sampler: Sampler::Fibonacci { n: DEFAULT_SAMPLES },
        }
    }

    pub fn with_sampler(self, sampler: Sampler) -> Self {
        TracingConfig { sampler, ..self }
    }

    pub fn sample_count(&self) -> usize {
        self.sampler.sample_count()
    }

    pub fn validate(&self) -> Result<()> {
        ensure!(
            self.t0 > 0.0 && self.t0.is_finite(),
            Config,
            "t0 must be positive, got {}",
            self.t0
        );
        ensure!(
            self.delta >= 0.0,
            Config,
            "thickness must be non-negative, got {}",
            self.delta
        );
        ensure!(self.max_steps >= 1, Config, "max_steps must be at least 1");
        ensure!(
            self.sample_count() >= 1,
            Config,
            "sampler must produce at least one ray"
        );
        ensure!(
            self.sample_count() <= u16::MAX as usize + 1,
            Config,
            "at most 65536 rays per pixel"
        );
        Ok(())
    }

    /// Distance covered by a full march from depth `z0`.
    pub fn reach(&self, z0: f64, intr: &CameraIntrinsics) -> f64 {
        self.max_steps as f64 * adaptive_step(z0, self.t0, intr)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RayHit {
    pub hit: bool,
    /// Pixel of the hit; `(0, 0)` when `hit` is false.
    pub pixel: (usize, usize),
    pub steps_taken: usize,
}

impl RayHit {
    fn miss(steps_taken: usize) -> RayHit {
        RayHit {
            hit: false,
            pixel: (0, 0),
            steps_taken,
        }
    }
}

/// Directions and weights around +z for `sampler`.
pub fn local_samples(sampler: &Sampler) -> Vec<(DVec3, f64)> {
    match *sampler {
        Sampler::StratifiedSpherical { n1, n2 } => {
            let mut out = Vec::with_capacity(n1 * n2);
            for j in 0..n2 {
                let theta = 0.5 * PI * (j as f64 + 0.5) / n2 as f64;
                let (st, ct) = theta.sin_cos();
                for i in 0..n1 {
                    let phi = 2.0 * PI * (i as f64 + 0.5) / n1 as f64;
                    out.push((DVec3::new(st * phi.cos(), st * phi.sin(), ct), ct * st));
                }
            }
            out
        }
        Sampler::Fibonacci { n } => {
            let golden = PI * (3.0 - 5f64.sqrt());
            (0..n)
                .map(|k| {
                    let ct = 1.0 - (k as f64 + 0.5) / n as f64;
                    let st = (1.0 - ct * ct).max(0.0).sqrt();
                    let phi = golden * k as f64;
                    (DVec3::new(st * phi.cos(), st * phi.sin(), ct), ct)
                })
                .collect()
        }
    }
}

/// Hemisphere directions around `n` with their quadrature weights.
pub fn hemisphere_samples(n: DVec3, sampler: &Sampler) -> Result<Vec<(DVec3, f64)>> {
    ensure!(
        (n.length() - 1.0).abs() <= 1e-4,
        Precondition,
        "normal {n} is not unit length"
    );
    let frame = Frame::new(n);
    Ok(local_samples(sampler)
        .into_iter()
        .map(|(d, w)| (frame.to_world(d), w))
        .collect())
}

/// `t0 (1 + z0 / (z_far - z_near))^2`.
#[inline]
pub fn adaptive_step(z0: f64, t0: f64, intr: &CameraIntrinsics) -> f64 {
    let s = 1.0 + z0 / intr.depth_range();
    t0 * (s * s)
}

/// Marches from `x0` (offset along `n`) in direction `dir` through the
/// depth buffer of `gb`. Unmasked texels never register hits.
pub fn march_ray(x0: DVec3, n: DVec3, dir: DVec3, gb: &GBuffer, cfg: &TracingConfig) -> Result<RayHit> {
    let intr = &gb.intrinsics;
    ensure!(
        (dir.length() - 1.0).abs() <= 1e-4,
        Precondition,
        "direction {dir} is not unit length"
    );
    let inside = x0.z > 0.0 && {
        let (u, v, _) = intr.project_unchecked(x0);
        intr.contains_pixel(u, v)
    };
    ensure!(inside, Precondition, "ray origin {x0} does not project into the image");
    let t = adaptive_step(x0.z, cfg.t0, intr);
    Ok(march(x0, n, dir, t, gb, cfg))
}

#[inline]
fn march(x0: DVec3, n: DVec3, dir: DVec3, t: f64, gb: &GBuffer, cfg: &TracingConfig) -> RayHit {
    let intr = &gb.intrinsics;
    let start = x0 + NORMAL_OFFSET * n;
    let step = dir * t;
    let depth = gb.depth.data();
    let w = intr.width;
    for k in 1..=cfg.max_steps {
        let x = start + step * k as f64;
        if x.z <= intr.z_near || x.z >= intr.z_far {
            return RayHit::miss(k);
        }
        let (u, v, z) = intr.project_unchecked(x);
        let Some((px, py)) = intr.texel(u, v) else {
            return RayHit::miss(k);
        };
        let i = py * w + px;
        if !gb.mask[i] {
            continue;
        }
        let zd = depth[i];
        if zd < z && z < zd + cfg.delta {
            return RayHit {
                hit: true,
                pixel: (px, py),
                steps_taken: k,
            };
        }
    }
    RayHit::miss(cfg.max_steps)
}

/// Test instrumentation for [`trace`].
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct TraceHooks {
    /// Replaces every visibility result. Forced hits carry no source pixel,
    /// so they contribute to occlusion only.
    pub force_visibility: Option<bool>,
    /// Emit the per-pixel hit count map.
    pub record_hit_counts: bool,
}

/// Hits of one trace pass, grouped by receiving pixel in row-major order.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct HitList {
    offsets: Vec<usize>,
    /// `(source texel index, sample index)`.
    hits: Vec<(u32, u16)>,
}

impl HitList {
    fn from_rows(rows: Vec<Vec<Vec<(u32, u16)>>>) -> Self {
        let mut offsets = vec![0];
        let mut hits = Vec::new();
        for row in rows {
            for px in row {
                hits.extend_from_slice(&px);
                offsets.push(hits.len());
            }
        }
        HitList { offsets, hits }
    }

    pub fn pixel_hits(&self, i: usize) -> &[(u32, u16)] {
        &self.hits[self.offsets[i]..self.offsets[i + 1]]
    }

    pub fn total(&self) -> usize {
        self.hits.len()
    }
}

/// Result of marching every masked pixel once.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceResult {
    pub occlusion: Map,
    pub hits: HitList,
    /// Quadrature weights of the sampler, shared by every pixel.
    pub weights: Vec<f64>,
    pub hit_counts: Option<Map>,
}

impl TraceResult {
    /// Incoming indirect irradiance `(pi / sum w) sum V w L(hit)` per pixel,
    /// with `radiance(source)` giving the outgoing radiance at a hit.
    pub fn gather(&self, width: usize, height: usize, radiance: impl Fn(u32) -> DVec3 + Sync) -> Map {
        let norm = PI / self.weights.iter().sum::<f64>();
        Map::from_fn(width, height, 3, |x, y, p| {
            let hits = self.hits.pixel_hits(y * width + x);
            if hits.is_empty() {
                return;
            }
            let mut acc = DVec3::ZERO;
            for &(src, j) in hits {
                acc += self.weights[j as usize] * radiance(src);
            }
            p.copy_from_slice(&(acc * norm).to_array());
        })
    }

    /// Indirect light `(1 - m)(a / pi) E` of every masked pixel from the
    /// screen-space image `direct`.
    pub fn indirect(&self, gb: &GBuffer, direct: &Map) -> Result<Map> {
        ensure!(direct.channels() == 3, Dimensions, "direct image must have 3 channels");
        gb.depth.check_size(direct, "G-buffer vs direct image")?;
        let e = self.gather(gb.width(), gb.height(), |src| {
            let s = src as usize;
            DVec3::new(direct.data()[3 * s], direct.data()[3 * s + 1], direct.data()[3 * s + 2])
        });
        Ok(modulate(gb, &e))
    }
}

/// Multiplies incoming irradiance by each pixel's lambertian factor.
pub fn modulate(gb: &GBuffer, irradiance: &Map) -> Map {
    Map::from_fn(gb.width(), gb.height(), 3, |x, y, p| {
        if gb.is_masked(x, y) {
            let v = gb.material(x, y).diffuse() * irradiance.get3(x, y);
            p.copy_from_slice(&v.to_array());
        }
    })
}

/// Marches all rays of every masked pixel. `march_one(x, y, dir_view)`
/// returns the hit source index, if any; screen-space and cubemap tracing
/// differ only in this callback.
pub(crate) fn trace_with<F>(gb: &GBuffer, cfg: &TracingConfig, hooks: TraceHooks, march_one: F) -> Result<TraceResult>
where
    F: Fn(usize, usize, DVec3, DVec3, DVec3) -> Option<u32> + Sync,
{
    cfg.validate()?;
    let local = local_samples(&cfg.sampler);
    let weights: Vec<f64> = local.iter().map(|s| s.1).collect();
    let wsum: f64 = weights.iter().sum();
    let (w, h) = (gb.width(), gb.height());
    type Row = (Vec<f64>, Vec<Vec<(u32, u16)>>);
    let rows: Vec<Row> = (0..h)
        .into_par_iter()
        .map(|y| {
            let mut occl = vec![1.0; w];
            let mut row_hits = vec![Vec::new(); w];
            for x in 0..w {
                if !gb.is_masked(x, y) {
                    continue;
                }
                let x0 = gb.view_point(x, y);
                let n = gb.normal_at(x, y);
                let frame = Frame::new(n);
                let mut vsum = 0.0;
                for (j, &(d, wt)) in local.iter().enumerate() {
                    let dir = frame.to_world(d);
                    let hit = match hooks.force_visibility {
                        Some(true) => {
                            vsum += wt;
                            continue;
                        }
                        Some(false) => None,
                        None => march_one(x, y, x0, n, dir),
                    };
                    if let Some(src) = hit {
                        vsum += wt;
                        row_hits[x].push((src, j as u16));
                    }
                }
                occl[x] = 1.0 - vsum / wsum;
            }
            (occl, row_hits)
        })
        .collect();
    let mut occlusion = Map::new(w, h, 1);
    let mut hit_rows = Vec::with_capacity(h);
    for (y, (occl, hits)) in rows.into_iter().enumerate() {
        for (x, o) in occl.into_iter().enumerate() {
            occlusion.set(x, y, 0, o);
        }
        hit_rows.push(hits);
    }
    let hits = HitList::from_rows(hit_rows);
    let hit_counts = hooks.record_hit_counts.then(|| {
        Map::from_vec(w, h, 1, (0..w * h).map(|i| hits.pixel_hits(i).len() as f64).collect())
            .expect("one count per pixel")
    });
    Ok(TraceResult {
        occlusion,
        hits,
        weights,
        hit_counts,
    })
}

/// Screen-space pass over the G-buffer's own depth.
pub fn trace(gb: &GBuffer, cfg: &TracingConfig, hooks: TraceHooks) -> Result<TraceResult> {
    let intr = &gb.intrinsics;
    let w = intr.width;
    trace_with(gb, cfg, hooks, |_, _, x0, n, dir| {
        let t = adaptive_step(x0.z, cfg.t0, intr);
        let r = march(x0, n, dir, t, gb, cfg);
        r.hit.then(|| (r.pixel.1 * w + r.pixel.0) as u32)
    })
}

/// `O = 1 - sum V w / sum w` per masked pixel; unmasked pixels get 1.
pub fn occlusion_map(gb: &GBuffer, cfg: &TracingConfig) -> Result<Map> {
    Ok(trace(gb, cfg, TraceHooks::default())?.occlusion)
}

/// One-bounce diffuse light gathered from `direct` at the hit pixels.
pub fn indirect_map(gb: &GBuffer, direct: &Map, cfg: &TracingConfig) -> Result<Map> {
    trace(gb, cfg, TraceHooks::default())?.indirect(gb, direct)
}

/// `direct + indirect`, no clamping.
pub fn composite(direct: &Map, indirect: &Map) -> Result<Map> {
    if !direct.same_shape(indirect) {
        return Err(Error::Dimensions(format!(
            "direct {}x{}x{} vs indirect {}x{}x{}",
            direct.width(),
            direct.height(),
            direct.channels(),
            indirect.width(),
            indirect.height(),
            indirect.channels()
        )));
    }
    direct.zip_with(indirect, |a, b| a + b)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::brdf::Material;
    use crate::gbuffer::{MaterialMaps, ViewPose};
    use proptest::prelude::*;

    fn plane_gb() -> GBuffer {
        let intr = CameraIntrinsics::from_fov(32, 32, 60.0, 0.1, 10.0).unwrap();
        GBuffer {
            depth: Map::filled(32, 32, 1, 3.0),
            normal: Map::constant3(32, 32, DVec3::new(0.0, 0.0, -1.0)),
            materials: MaterialMaps::uniform(32, 32, Material::new(DVec3::splat(0.5), 0.5, 0.0)),
            mask: vec![true; 32 * 32],
            intrinsics: intr,
            pose: ViewPose::IDENTITY,
        }
    }

    #[test]
    fn step_formula_values() {
        let intr = CameraIntrinsics::new(10.0, 10.0, 5.0, 5.0, 10, 10, 0.5, 8.5).unwrap();
        let t0 = 0.3;
        assert_eq!(adaptive_step(0.0, t0, &intr), t0);
        assert_eq!(adaptive_step(8.0, t0, &intr), 4.0 * t0);
        assert_eq!(adaptive_step(4.0, t0, &intr), 2.25 * t0);
    }

    #[test]
    fn fibonacci_mean_is_normal() {
        let n = DVec3::new(0.2, -0.5, 0.7).normalize();
        let s = hemisphere_samples(n, &Sampler::Fibonacci { n: 64 }).unwrap();
        let mean: DVec3 = s.iter().map(|p| p.0).sum::<DVec3>().normalize();
        assert!(mean.dot(n).acos().to_degrees() < 2.0);
    }

    proptest! {
        #[test]
        fn samples_are_unit_and_above(x in -1.0f64..1.0, y in -1.0f64..1.0, z in -1.0f64..1.0) {
            let v = DVec3::new(x, y, z);
            prop_assume!(v.length() > 1e-3);
            let n = v.normalize();
            for sampler in [Sampler::Fibonacci { n: 64 }, Sampler::StratifiedSpherical { n1: 8, n2: 4 }] {
                for (d, w) in hemisphere_samples(n, &sampler).unwrap() {
                    prop_assert!(d.dot(n) > 0.0);
                    prop_assert!((d.length() - 1.0).abs() < 1e-5);
                    prop_assert!(w > 0.0);
                }
            }
        }
    }

    #[test]
    fn plane_is_unoccluded() {
        let gb = plane_gb();
        let cfg = TracingConfig::default_for(&gb.intrinsics);
        let tr = trace(&gb, &cfg, TraceHooks::default()).unwrap();
        assert!(tr.occlusion.data().iter().all(|&o| o == 1.0));
        assert_eq!(tr.hits.total(), 0);
        let ind = tr.indirect(&gb, &Map::filled(32, 32, 3, 5.0)).unwrap();
        assert!(ind.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn forced_visibility_gives_zero() {
        let gb = plane_gb();
        let cfg =
            TracingConfig::default_for(&gb.intrinsics).with_sampler(Sampler::StratifiedSpherical { n1: 8, n2: 8 });
        let hooks = TraceHooks {
            force_visibility: Some(true),
            ..Default::default()
        };
        let tr = trace(&gb, &cfg, hooks).unwrap();
        assert!(tr.occlusion.data().iter().all(|&o| o == 0.0));
    }

    #[test]
    fn zero_thickness_never_hits() {
        // A step wall: the right half is much closer, so left pixels see it.
        let mut gb = plane_gb();
        for y in 0..32 {
            for x in 16..32 {
                gb.depth.set(x, y, 0, 1.5);
            }
        }
        let mut cfg = TracingConfig::default_for(&gb.intrinsics);
        let with = trace(&gb, &cfg, TraceHooks::default()).unwrap();
        assert!(with.hits.total() > 0);
        cfg.delta = 0.0;
        let without = trace(&gb, &cfg, TraceHooks::default()).unwrap();
        assert_eq!(without.hits.total(), 0);
    }

    #[test]
    fn origin_outside_image_rejected() {
        let gb = plane_gb();
        let cfg = TracingConfig::default_for(&gb.intrinsics);
        let r = march_ray(DVec3::new(100.0, 0.0, 1.0), -DVec3::Z, DVec3::Z, &gb, &cfg);
        assert!(matches!(r, Err(Error::Precondition(_))));
    }

    #[test]
    fn composite_adds() {
        let a = Map::filled(4, 4, 3, 0.25);
        assert_eq!(composite(&a, &a).unwrap(), Map::filled(4, 4, 3, 0.5));
        assert_eq!(composite(&a, &Map::new(4, 4, 3)).unwrap(), a);
        assert!(composite(&a, &Map::new(4, 3, 3)).is_err());
    }
}
