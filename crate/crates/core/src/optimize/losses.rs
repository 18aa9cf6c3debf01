//! Reconstruction and smoothness losses, with gradients where the
//! optimizer needs them.

use serde::{Deserialize, Serialize};

use crate::error::{ensure, Result};
use crate::gbuffer::MaterialMaps;
use crate::ibl::EnvMap;
use crate::map::Map;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossWeights {
    /// Normal smoothness (only used by [`normal_loss`]).
    pub normal_tv: f64,
    pub material_tv: f64,
    pub light_tv: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        LossWeights {
            normal_tv: 5.0,
            material_tv: 1.0,
            light_tv: 0.01,
        }
    }
}

impl LossWeights {
    pub fn validate(&self) -> Result<()> {
        ensure!(
            self.normal_tv >= 0.0 && self.material_tv >= 0.0 && self.light_tv >= 0.0,
            Config,
            "loss weights must be non-negative: {self:?}"
        );
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct LossBreakdown {
    pub color: f64,
    pub material_tv: f64,
    pub light_tv: f64,
    /// Always 0 here: geometry is not optimized.
    pub normal: f64,
    pub total: f64,
}

impl LossBreakdown {
    pub fn new(color: f64, material_tv: f64, light_tv: f64, w: &LossWeights) -> Self {
        LossBreakdown {
            color,
            material_tv,
            light_tv,
            normal: 0.0,
            total: color + w.material_tv * material_tv + w.light_tv * light_tv,
        }
    }
}

/// Edge weights `exp(-mean_c |I_p - I_q|)` toward the upper and left
/// neighbor of every pixel (zero on the first row / column).
pub struct EdgeWeights {
    up: Vec<f64>,
    left: Vec<f64>,
}

impl EdgeWeights {
    pub fn new(guide: &Map) -> Self {
        let (w, h, c) = (guide.width(), guide.height(), guide.channels());
        let d = guide.data();
        let diff = |i: usize, j: usize| {
            let s: f64 = (0..c).map(|k| (d[i * c + k] - d[j * c + k]).abs()).sum();
            (-s / c as f64).exp()
        };
        let mut up = vec![0.0; w * h];
        let mut left = vec![0.0; w * h];
        for y in 0..h {
            for x in 0..w {
                let i = y * w + x;
                if y > 0 {
                    up[i] = diff(i, i - w);
                }
                if x > 0 {
                    left[i] = diff(i, i - 1);
                }
            }
        }
        EdgeWeights { up, left }
    }

    /// Uniform weights: plain total variation.
    pub fn flat(width: usize, height: usize) -> Self {
        let mut up = vec![1.0; width * height];
        let mut left = vec![1.0; width * height];
        up[..width].fill(0.0);
        for y in 0..height {
            left[y * width] = 0.0;
        }
        EdgeWeights { up, left }
    }

    /// Loss value and, if `grad` is given, its gradient added into it.
    pub fn apply(&self, map: &Map, mut grad: Option<&mut Map>) -> f64 {
        let (w, h, c) = (map.width(), map.height(), map.channels());
        let d = map.data();
        let norm = 1.0 / (w * h) as f64;
        let mut total = 0.0;
        for y in 0..h {
            for x in 0..w {
                let i = y * w + x;
                for (wt, j) in [(self.up[i], i.wrapping_sub(w)), (self.left[i], i.wrapping_sub(1))] {
                    if wt == 0.0 {
                        continue;
                    }
                    for k in 0..c {
                        let diff = d[i * c + k] - d[j * c + k];
                        total += wt * diff * diff;
                        if let Some(g) = grad.as_deref_mut() {
                            let gd = 2.0 * norm * wt * diff;
                            g.data_mut()[i * c + k] += gd;
                            g.data_mut()[j * c + k] -= gd;
                        }
                    }
                }
            }
        }
        total * norm
    }
}

/// Guide-damped total variation: `(1/|map|) sum exp(-|dI|) |dM|^2` over
/// vertical and horizontal neighbor pairs.
pub fn tv_edge_aware(map: &Map, guide: &Map) -> Result<f64> {
    map.check_size(guide, "TV map vs guide")?;
    Ok(EdgeWeights::new(guide).apply(map, None))
}

/// Plain total variation of an environment map (no azimuthal wrap).
pub fn tv_plain(env: &EnvMap) -> f64 {
    let m = env.radiance();
    EdgeWeights::flat(m.width(), m.height()).apply(m, None)
}

pub fn tv_plain_grad(env: &EnvMap) -> (f64, Map) {
    let m = env.radiance();
    let mut g = Map::new(m.width(), m.height(), m.channels());
    let v = EdgeWeights::flat(m.width(), m.height()).apply(m, Some(&mut g));
    (v, g)
}

/// Mean per-pixel distance between two normal maps plus weighted
/// edge-aware smoothness of `n`.
pub fn normal_loss(n: &Map, n_hat: &Map, guide: &Map, normal_tv: f64) -> Result<f64> {
    ensure!(
        n.channels() == 3 && n.same_shape(n_hat),
        Dimensions,
        "normal maps must share a 3-channel shape"
    );
    let dist: f64 = n
        .data()
        .chunks(3)
        .zip(n_hat.data().chunks(3))
        .map(|(a, b)| ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)).sqrt())
        .sum();
    Ok(dist / n.pixel_count() as f64 + normal_tv * tv_edge_aware(n, guide)?)
}

/// Mean absolute difference over the channels of masked pixels.
pub fn color_l1(render: &Map, gt: &Map, mask: &[bool]) -> Result<f64> {
    ensure!(
        render.same_shape(gt),
        Dimensions,
        "render and ground truth differ in shape"
    );
    ensure!(mask.len() == render.pixel_count(), Dimensions, "mask size mismatch");
    let c = render.channels();
    let (mut sum, mut count) = (0.0, 0usize);
    for (i, _) in mask.iter().enumerate().filter(|m| *m.1) {
        for k in 0..c {
            sum += (render.data()[i * c + k] - gt.data()[i * c + k]).abs();
        }
        count += c;
    }
    Ok(if count == 0 { 0.0 } else { sum / count as f64 })
}

/// Photometric loss plus material and lighting smoothness.
pub fn decomposition_loss(
    render: &Map,
    gt: &Map,
    mask: &[bool],
    materials: &MaterialMaps,
    env: &EnvMap,
    w: &LossWeights,
) -> Result<LossBreakdown> {
    let color = color_l1(render, gt, mask)?;
    let material_tv = tv_edge_aware(&materials.stacked(), gt)?;
    Ok(LossBreakdown::new(color, material_tv, tv_plain(env), w))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::brdf::Material;
    use crate::math::DVec3;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_map(rng: &mut ChaCha8Rng, w: usize, h: usize, c: usize) -> Map {
        Map::from_vec(w, h, c, (0..w * h * c).map(|_| rng.gen::<f64>()).collect()).unwrap()
    }

    /// Straightforward double loop over neighbor pairs.
    fn tv_reference(map: &Map, guide: Option<&Map>) -> f64 {
        let (w, h) = (map.width(), map.height());
        let mut s = 0.0;
        for y in 0..h {
            for x in 0..w {
                for (ok, xx, yy) in [(y > 0, x, y.wrapping_sub(1)), (x > 0, x.wrapping_sub(1), y)] {
                    if !ok {
                        continue;
                    }
                    let g = guide.map_or(1.0, |g| {
                        let a = g.pixel(x, y);
                        let b = g.pixel(xx, yy);
                        let mad = a.iter().zip(b).map(|(p, q)| (p - q).abs()).sum::<f64>() / a.len() as f64;
                        (-mad).exp()
                    });
                    let d2: f64 = map
                        .pixel(x, y)
                        .iter()
                        .zip(map.pixel(xx, yy))
                        .map(|(p, q)| (p - q) * (p - q))
                        .sum();
                    s += g * d2;
                }
            }
        }
        s / (w * h) as f64
    }

    #[test]
    fn constant_maps_have_zero_tv() {
        let m = Map::filled(9, 7, 5, 0.3);
        let g = Map::filled(9, 7, 3, 0.7);
        assert_eq!(tv_edge_aware(&m, &g).unwrap(), 0.0);
        assert_eq!(tv_plain(&EnvMap::constant(4, DVec3::ONE)), 0.0);
    }

    #[test]
    fn single_step_closed_form() {
        // One unit step between columns 3 and 4.
        let (w, h) = (8, 5);
        let m = Map::from_fn(w, h, 1, |x, _, p| p[0] = if x >= 4 { 1.0 } else { 0.0 });
        let flat = Map::filled(w, h, 3, 0.2);
        let expect = h as f64 / (w * h) as f64;
        assert!((tv_edge_aware(&m, &flat).unwrap() - expect).abs() < 1e-15);
        let s = 3.0;
        assert!((tv_edge_aware(&m.scaled(s), &flat).unwrap() - s * s * expect).abs() < 1e-13);
        // Guide edge of magnitude 3 at the same place.
        let edge = Map::from_fn(w, h, 3, |x, _, p| p.fill(if x >= 4 { 3.0 } else { 0.0 }));
        let damped = tv_edge_aware(&m, &edge).unwrap();
        assert!((damped - expect * (-3.0f64).exp()).abs() < 1e-15);
    }

    #[test]
    fn checkerboard_env() {
        let env = EnvMap::new(Map::from_fn(8, 4, 3, |x, y, p| p.fill(((x + y) % 2) as f64))).unwrap();
        let pairs = (4 - 1) * 8 + 4 * (8 - 1);
        let expect = 3.0 * pairs as f64 / 32.0;
        assert!((tv_plain(&env) - expect).abs() < 1e-12);
        assert!((tv_plain(&env.scaled(2.0)) - 4.0 * expect).abs() < 1e-12);
    }

    #[test]
    fn tv_matches_reference_and_gradient() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let m = random_map(&mut rng, 11, 6, 5);
        let g = random_map(&mut rng, 11, 6, 3);
        assert!((tv_edge_aware(&m, &g).unwrap() - tv_reference(&m, Some(&g))).abs() < 1e-12);
        let env = EnvMap::new(random_map(&mut rng, 12, 6, 3)).unwrap();
        let (v, grad) = tv_plain_grad(&env);
        assert!((v - tv_reference(env.radiance(), None)).abs() < 1e-12);
        for i in [0usize, 17, 100, 215] {
            let h = 1e-6;
            let bump = |s: f64| {
                let mut r = env.radiance().clone();
                r.data_mut()[i] += s;
                tv_reference(&r, None)
            };
            let fd = (bump(h) - bump(-h)) / (2.0 * h);
            assert!((fd - grad.data()[i]).abs() < 1e-6, "{i}: {fd} vs {}", grad.data()[i]);
        }
    }

    #[test]
    fn normal_loss_cases() {
        let n = Map::constant3(6, 5, DVec3::new(0.0, 0.6, -0.8));
        let guide = Map::filled(6, 5, 3, 0.5);
        assert_eq!(normal_loss(&n, &n, &guide, 5.0).unwrap(), 0.0);
        let anti = n.scaled(-1.0);
        assert!((normal_loss(&n, &anti, &guide, 5.0).unwrap() - 2.0).abs() < 1e-12);

        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let unit = |rng: &mut ChaCha8Rng| {
            let v: Vec<f64> = (0..28)
                .flat_map(|_| {
                    let d =
                        DVec3::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5).normalize();
                    d.to_array()
                })
                .collect();
            Map::from_vec(7, 4, 3, v).unwrap()
        };
        let (a, b) = (unit(&mut rng), unit(&mut rng));
        let g = random_map(&mut rng, 7, 4, 3);
        let mut dist = 0.0;
        for y in 0..4 {
            for x in 0..7 {
                dist += (a.get3(x, y) - b.get3(x, y)).length();
            }
        }
        let expect = dist / 28.0 + 5.0 * tv_reference(&a, Some(&g));
        assert!((normal_loss(&a, &b, &g, 5.0).unwrap() - expect).abs() < 1e-6);
    }

    #[test]
    fn decomposition_identities() {
        let w = LossWeights::default();
        assert_eq!((w.normal_tv, w.material_tv, w.light_tv), (5.0, 1.0, 0.01));
        let gt = Map::filled(6, 6, 3, 0.0);
        let mask = vec![true; 36];
        let mats = MaterialMaps::uniform(6, 6, Material::new(DVec3::splat(0.5), 0.5, 0.5));
        let env = EnvMap::constant(4, DVec3::splat(2.0));
        let l = decomposition_loss(&gt, &gt, &mask, &mats, &env, &w).unwrap();
        assert_eq!(l.total, 0.0);
        let l = decomposition_loss(&gt.map_values(|v| v + 0.1), &gt, &mask, &mats, &env, &w).unwrap();
        assert!((l.color - 0.1).abs() < 1e-12);

        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let render = random_map(&mut rng, 6, 6, 3);
        let gt = random_map(&mut rng, 6, 6, 3);
        let mask: Vec<bool> = (0..36).map(|i| i % 3 != 0).collect();
        let mats = MaterialMaps {
            albedo: random_map(&mut rng, 6, 6, 3),
            roughness: random_map(&mut rng, 6, 6, 1),
            metallic: random_map(&mut rng, 6, 6, 1),
        };
        let env = EnvMap::new(random_map(&mut rng, 8, 4, 3)).unwrap();
        let l = decomposition_loss(&render, &gt, &mask, &mats, &env, &w).unwrap();
        let mut color = 0.0;
        let mut n = 0.0;
        for i in (0..36).filter(|i| mask[*i]) {
            for c in 0..3 {
                color += (render.data()[3 * i + c] - gt.data()[3 * i + c]).abs();
                n += 1.0;
            }
        }
        color /= n;
        let expect = color + tv_reference(&mats.stacked(), Some(&gt)) + 0.01 * tv_reference(env.radiance(), None);
        assert!((l.total - expect).abs() < 1e-6);
        assert!((l.total - (l.color + l.material_tv + 0.01 * l.light_tv)).abs() < 1e-9);
    }
}
