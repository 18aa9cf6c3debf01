//! Reference integrators: cosine-weighted hemisphere sampling against the
//! exact scene geometry.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::SceneOracle;
use crate::brdf::Material;
use crate::gbuffer::{CameraIntrinsics, ViewPose};
use crate::ibl::EnvironmentSet;
use crate::math::{cosine_hemisphere, hammersley, DVec2, DVec3, Frame, PI};

/// Offset along the normal before shooting reference rays.
const ORIGIN_OFFSET: f64 = 1e-4;

const SEED: u64 = 0x6a09_e667_f3bc_c908;

fn point_seed(p: DVec3, n: DVec3) -> u64 {
    let mut h = SEED;
    for v in [p.x, p.y, p.z, n.x, n.y, n.z] {
        // splitmix64 step folded over the coordinate bits
        h ^= v.to_bits();
        h = h.wrapping_add(0x9e37_79b9_7f4a_7c15);
        let mut z = h;
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
        h = z ^ (z >> 31);
    }
    h
}

/// `samples` cosine-distributed directions around `n`: a Hammersley set
/// under a random toroidal shift seeded by the point, so the sequence is
/// stratified, deterministic and decorrelated between points.
pub fn stratified_cosine_dirs(p: DVec3, n: DVec3, samples: usize) -> impl Iterator<Item = DVec3> {
    let mut rng = ChaCha8Rng::seed_from_u64(point_seed(p, n));
    let shift = DVec2::new(rng.gen(), rng.gen());
    let frame = Frame::new(n);
    let count = samples as u32;
    (0..count).map(move |k| {
        let u = hammersley(k, count) + shift;
        let u = DVec2::new(u.x.fract(), u.y.fract());
        frame.to_world(cosine_hemisphere(u))
    })
}

/// Reference ambient occlusion `1 - (1/N) sum V` at `p` with normal `n`.
/// Occluders farther than `clip` are ignored.
pub fn mc_occlusion(scene: &SceneOracle, p: DVec3, n: DVec3, samples: usize, clip: Option<f64>) -> f64 {
    let origin = p + ORIGIN_OFFSET * n;
    let t_max = clip.unwrap_or(f64::INFINITY);
    let hits = stratified_cosine_dirs(p, n, samples)
        .filter(|&d| scene.intersect_within(origin, d, t_max).is_some())
        .count();
    1.0 - hits as f64 / samples as f64
}

/// Direct radiance leaving each hit toward the receiver, summed over the
/// reference rays. `hit_occlusion` decides the occlusion used at the hit.
fn gather_hits(
    scene: &SceneOracle,
    p: DVec3,
    n: DVec3,
    env: &EnvironmentSet,
    samples: usize,
    clip: Option<f64>,
    hit_occlusion: impl Fn(DVec3, DVec3) -> f64,
) -> DVec3 {
    let origin = p + ORIGIN_OFFSET * n;
    let t_max = clip.unwrap_or(f64::INFINITY);
    let mut sum = DVec3::ZERO;
    for d in stratified_cosine_dirs(p, n, samples) {
        if let Some(hit) = scene.intersect_within(origin, d, t_max) {
            let nh = if hit.normal.dot(d) > 0.0 {
                -hit.normal
            } else {
                hit.normal
            };
            sum += env.shade_point(nh, -d, &hit.material, hit_occlusion(hit.point, nh));
        }
    }
    sum * (PI / samples as f64)
}

/// One-bounce diffuse light at `p` with the tracer's first-pass semantics:
/// every hit is shaded direct-only with `O = 1`.
pub fn mc_one_bounce(
    scene: &SceneOracle,
    p: DVec3,
    n: DVec3,
    mat: &Material,
    env: &EnvironmentSet,
    samples: usize,
    clip: Option<f64>,
) -> DVec3 {
    mat.diffuse() * gather_hits(scene, p, n, env, samples, clip, |_, _| 1.0)
}

/// One-bounce diffuse light with hits shaded using their true occlusion
/// (estimated with `occlusion_samples` rays each).
#[allow(clippy::too_many_arguments)]
pub fn mc_one_bounce_full(
    scene: &SceneOracle,
    p: DVec3,
    n: DVec3,
    mat: &Material,
    env: &EnvironmentSet,
    samples: usize,
    occlusion_samples: usize,
    clip: Option<f64>,
) -> DVec3 {
    mat.diffuse()
        * gather_hits(scene, p, n, env, samples, clip, |q, nq| {
            mc_occlusion(scene, q, nq, occlusion_samples, clip)
        })
}

/// Share of the (cosine-weighted) occluded directions at `p` whose first
/// hit is the surface the camera sees at that hit's pixel. Zero when
/// nothing is hit.
pub fn in_frame_fraction(
    scene: &SceneOracle,
    p: DVec3,
    n: DVec3,
    pose: &ViewPose,
    intr: &CameraIntrinsics,
    samples: usize,
    clip: Option<f64>,
) -> f64 {
    let origin = p + ORIGIN_OFFSET * n;
    let t_max = clip.unwrap_or(f64::INFINITY);
    let eye = pose.center();
    let (mut hits, mut visible) = (0usize, 0usize);
    for d in stratified_cosine_dirs(p, n, samples) {
        let Some(hit) = scene.intersect_within(origin, d, t_max) else {
            continue;
        };
        hits += 1;
        let q = pose.to_view(hit.point);
        if q.z <= intr.z_near || q.z >= intr.z_far {
            continue;
        }
        let (u, v, _) = intr.project_unchecked(q);
        if !intr.contains_pixel(u, v) {
            continue;
        }
        let to = hit.point - eye;
        let dist = to.length();
        if let Some(first) = scene.intersect(eye, to / dist) {
            if (first.t - dist).abs() <= 1e-6 * dist.max(1.0) + 1e-9 {
                visible += 1;
            }
        }
    }
    if hits == 0 {
        0.0
    } else {
        visible as f64 / hits as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ibl::EnvMap;
    use crate::oracle::{presets, Primitive, Shape};

    fn white() -> Material {
        Material::new(DVec3::splat(0.8), 0.8, 0.0)
    }

    fn lone_plane() -> SceneOracle {
        SceneOracle::new(
            vec![Primitive {
                shape: Shape::Plane {
                    point: DVec3::new(0.0, 1.0, 0.0),
                    normal: -DVec3::Y,
                },
                material: 0,
            }],
            vec![white()],
        )
        .unwrap()
    }

    #[test]
    fn cosine_dirs_are_cosine_distributed() {
        let n = DVec3::new(0.3, -0.8, 0.2).normalize();
        let dirs: Vec<DVec3> = stratified_cosine_dirs(DVec3::ONE, n, 4096).collect();
        assert!(dirs.iter().all(|d| d.dot(n) >= 0.0 && (d.length() - 1.0).abs() < 1e-12));
        // E[cos] = 2/3 under the cosine density.
        let mean_cos = dirs.iter().map(|d| d.dot(n)).sum::<f64>() / 4096.0;
        assert!((mean_cos - 2.0 / 3.0).abs() < 1e-3, "{mean_cos}");
        let again: Vec<DVec3> = stratified_cosine_dirs(DVec3::ONE, n, 4096).collect();
        assert_eq!(dirs, again);
    }

    #[test]
    fn isolated_plane_is_open() {
        let s = lone_plane();
        let p = DVec3::new(0.3, 1.0, 2.0);
        assert_eq!(mc_occlusion(&s, p, -DVec3::Y, 1000, None), 1.0);
        let env = EnvironmentSet::build(EnvMap::constant(8, DVec3::ONE), 4, 3, 16).unwrap();
        assert_eq!(mc_one_bounce(&s, p, -DVec3::Y, &white(), &env, 1000, None), DVec3::ZERO);
    }

    #[test]
    fn closed_box_is_dark() {
        let s = presets::closed_room();
        let n = 4096;
        let o = mc_occlusion(&s, DVec3::new(0.2, 1.0, 0.1), -DVec3::Y, n, None);
        assert!(o.abs() <= 1.0 / (n as f64).sqrt(), "{o}");
    }

    #[test]
    fn one_bounce_is_linear_in_light() {
        let p = presets::preset("box_interior", 32).unwrap();
        let env = EnvMap::from_fn(16, |d| DVec3::new(1.0 + d.x.max(0.0), 0.5, 0.25 - 0.2 * d.y)).unwrap();
        let a = EnvironmentSet::build(env.clone(), 8, 4, 16).unwrap();
        let b = EnvironmentSet::build(env.scaled(2.0), 8, 4, 16).unwrap();
        let q = DVec3::new(0.1, 1.0, 3.0);
        let la = mc_one_bounce(&p.scene, q, -DVec3::Y, &white(), &a, 2000, None);
        let lb = mc_one_bounce(&p.scene, q, -DVec3::Y, &white(), &b, 2000, None);
        assert!(la.min_element() > 0.0);
        assert_eq!(lb, 2.0 * la);
    }

    #[test]
    fn error_shrinks_with_samples() {
        let s = presets::preset("corner90", 32).unwrap().scene;
        let points: Vec<DVec3> = (0..16)
            .map(|i| DVec3::new(-0.5 + 0.06 * i as f64, 1.0, 3.2 + 0.04 * i as f64))
            .collect();
        let err = |n: usize| {
            points
                .iter()
                .map(|&p| {
                    let reference = mc_occlusion(&s, p + DVec3::new(1e-7, 0.0, 0.0), -DVec3::Y, 1 << 18, None);
                    (mc_occlusion(&s, p, -DVec3::Y, n, None) - reference).abs()
                })
                .sum::<f64>()
                / points.len() as f64
        };
        let (e1, e4) = (err(64), err(256));
        assert!(e4 < 0.75 * e1, "{e1} -> {e4}");
    }

    #[test]
    fn clip_limits_reach() {
        let s = presets::preset("corner90", 32).unwrap().scene;
        // Floor point 1 unit in front of the wall.
        let p = DVec3::new(0.0, 1.0, 3.0);
        let near = mc_occlusion(&s, p, -DVec3::Y, 1024, Some(0.5));
        let far = mc_occlusion(&s, p, -DVec3::Y, 1024, None);
        assert_eq!(near, 1.0);
        assert!(far < 0.9);
    }

    #[test]
    fn in_frame_fraction_sees_front_wall() {
        let p = presets::preset("corner90", 64).unwrap();
        let f = in_frame_fraction(
            &p.scene,
            DVec3::new(0.0, 1.0, 3.5),
            -DVec3::Y,
            &p.pose,
            &p.intrinsics,
            512,
            None,
        );
        assert!(f > 0.9, "{f}");
        let w = presets::preset("box_with_offscreen_wall", 64).unwrap();
        let f = in_frame_fraction(
            &w.scene,
            DVec3::new(0.0, 1.0, 2.0),
            -DVec3::Y,
            &w.pose,
            &w.intrinsics,
            512,
            None,
        );
        assert!(f < 0.05, "{f}");
    }
}
