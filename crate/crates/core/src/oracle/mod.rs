//! Analytic scenes with exact ray intersection, and brute-force Monte Carlo
//! references for occlusion and one-bounce indirect light.

mod mc;
pub mod presets;

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::brdf::Material;
use crate::error::{Error, Result};
use crate::gbuffer::{CameraIntrinsics, GBuffer, MaterialMaps, ViewPose};
use crate::map::Map;
use crate::math::DVec3;

pub use mc::{in_frame_fraction, mc_occlusion, mc_one_bounce, mc_one_bounce_full, stratified_cosine_dirs};
pub use presets::{closed_room, preset, sky_env, Preset, PRESET_NAMES};

/// Hits closer than this are ignored.
pub const T_MIN: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Shape {
    /// Infinite plane; hits report `normal` as given.
    Plane {
        point: DVec3,
        normal: DVec3,
    },
    Sphere {
        center: DVec3,
        radius: f64,
    },
    /// Axis-aligned box.
    Box {
        min: DVec3,
        max: DVec3,
    },
}

impl Shape {
    pub fn validate(&self) -> Result<()> {
        match *self {
            Shape::Plane { point, normal } => {
                if !(point.is_finite() && (normal.length() - 1.0).abs() < 1e-6) {
                    return Err(Error::Scene(format!("plane needs a unit normal, got {normal}")));
                }
            }
            Shape::Sphere { center, radius } => {
                if !(center.is_finite() && radius > 0.0) {
                    return Err(Error::Scene(format!("sphere radius must be positive, got {radius}")));
                }
            }
            Shape::Box { min, max } => {
                if !(min.is_finite() && max.is_finite() && min.cmplt(max).all()) {
                    return Err(Error::Scene(format!(
                        "box needs min < max componentwise, got {min} / {max}"
                    )));
                }
            }
        }
        Ok(())
    }

    /// Nearest `(t, outward normal)` with `t > T_MIN`.
    pub fn intersect(&self, o: DVec3, d: DVec3) -> Option<(f64, DVec3)> {
        match *self {
            Shape::Plane { point, normal } => {
                let denom = normal.dot(d);
                if denom.abs() < 1e-12 {
                    return None;
                }
                let t = normal.dot(point - o) / denom;
                (t > T_MIN).then_some((t, normal))
            }
            Shape::Sphere { center, radius } => {
                let oc = o - center;
                let b = oc.dot(d);
                let c = oc.length_squared() - radius * radius;
                let disc = b * b - c;
                if disc < 0.0 {
                    return None;
                }
                let s = disc.sqrt();
                let t = if -b - s > T_MIN { -b - s } else { -b + s };
                (t > T_MIN).then(|| (t, (o + d * t - center) / radius))
            }
            Shape::Box { min, max } => {
                let inv = d.recip();
                let (mut t_enter, mut t_exit) = (f64::NEG_INFINITY, f64::INFINITY);
                let (mut enter_axis, mut exit_axis) = (0, 0);
                for a in 0..3 {
                    let (t1, t2) = if inv[a].is_finite() {
                        let t1 = (min[a] - o[a]) * inv[a];
                        let t2 = (max[a] - o[a]) * inv[a];
                        (t1.min(t2), t1.max(t2))
                    } else if o[a] < min[a] || o[a] > max[a] {
                        return None;
                    } else {
                        continue;
                    };
                    if t1 > t_enter {
                        t_enter = t1;
                        enter_axis = a;
                    }
                    if t2 < t_exit {
                        t_exit = t2;
                        exit_axis = a;
                    }
                }
                if t_enter > t_exit {
                    return None;
                }
                let axis_normal = |a: usize, sign: f64| {
                    let mut n = DVec3::ZERO;
                    n[a] = sign;
                    n
                };
                if t_enter > T_MIN {
                    // Entering through the face opposing the ray.
                    Some((t_enter, axis_normal(enter_axis, -d[enter_axis].signum())))
                } else if t_exit > T_MIN {
                    Some((t_exit, axis_normal(exit_axis, d[exit_axis].signum())))
                } else {
                    None
                }
            }
        }
    }

    /// Whether `p` lies strictly inside a solid (spheres and boxes only).
    pub fn contains(&self, p: DVec3) -> bool {
        match *self {
            Shape::Plane { .. } => false,
            Shape::Sphere { center, radius } => (p - center).length() < radius,
            Shape::Box { min, max } => p.cmpgt(min).all() && p.cmplt(max).all(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Primitive {
    #[serde(flatten)]
    pub shape: Shape,
    /// Index into the scene's material list.
    pub material: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Hit {
    pub t: f64,
    pub point: DVec3,
    /// Geometric normal as reported by the primitive (outward for solids).
    pub normal: DVec3,
    pub material: Material,
}

/// A handful of analytic primitives. Lighting comes from an environment map
/// supplied separately; `env` optionally records where it lives.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneOracle {
    pub primitives: Vec<Primitive>,
    pub materials: Vec<Material>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub env: Option<PathBuf>,
}

impl SceneOracle {
    pub fn new(primitives: Vec<Primitive>, materials: Vec<Material>) -> Result<Self> {
        let s = SceneOracle {
            primitives,
            materials,
            env: None,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        for (i, p) in self.primitives.iter().enumerate() {
            p.shape.validate()?;
            if p.material >= self.materials.len() {
                return Err(Error::Scene(format!(
                    "primitive {i} uses material {} but only {} are defined",
                    p.material,
                    self.materials.len()
                )));
            }
        }
        for m in &self.materials {
            m.validate().map_err(|e| Error::Scene(e.to_string()))?;
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let s: SceneOracle = serde_json::from_str(text).map_err(|e| Error::json("<scene>", e))?;
        s.validate()?;
        Ok(s)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let s: SceneOracle = serde_json::from_str(&text).map_err(|e| Error::json(path, e))?;
        s.validate()?;
        Ok(s)
    }

    /// Nearest intersection along a unit-direction ray.
    pub fn intersect(&self, origin: DVec3, dir: DVec3) -> Option<Hit> {
        self.intersect_within(origin, dir, f64::INFINITY)
    }

    pub fn intersect_within(&self, origin: DVec3, dir: DVec3, t_max: f64) -> Option<Hit> {
        let mut best: Option<(f64, DVec3, usize)> = None;
        for p in &self.primitives {
            if let Some((t, n)) = p.shape.intersect(origin, dir) {
                if t < t_max && best.is_none_or(|b| t < b.0) {
                    best = Some((t, n, p.material));
                }
            }
        }
        best.map(|(t, normal, m)| Hit {
            t,
            point: origin + dir * t,
            normal,
            material: self.materials[m],
        })
    }

    /// Whether any solid contains `p`.
    pub fn inside_solid(&self, p: DVec3) -> bool {
        self.primitives.iter().any(|prim| prim.shape.contains(p))
    }
}

/// Renders exact depth, normals and materials for one camera. Pixels whose
/// nearest hit is missing or outside the clip range are unmasked.
pub fn synth_gbuffer(scene: &SceneOracle, pose: &ViewPose, intr: &CameraIntrinsics) -> Result<GBuffer> {
    scene.validate()?;
    pose.validate()?;
    intr.validate()?;
    let (w, h) = (intr.width, intr.height);
    let origin = pose.center();
    // depth, normal (3), albedo (3), roughness, metallic, mask
    let packed = Map::from_fn(w, h, 10, |x, y, p| {
        let ray_view = intr.pixel_ray(x, y);
        let dir = pose.dir_to_world(ray_view.normalize());
        let Some(hit) = scene.intersect(origin, dir) else {
            return;
        };
        let z = hit.t * ray_view.z / ray_view.length();
        if !intr.contains_depth(z) {
            return;
        }
        let n_world = if hit.normal.dot(dir) > 0.0 {
            -hit.normal
        } else {
            hit.normal
        };
        let n = pose.dir_to_view(n_world).normalize();
        p[0] = z;
        p[1..4].copy_from_slice(&n.to_array());
        p[4..7].copy_from_slice(&hit.material.albedo.to_array());
        p[7] = hit.material.roughness;
        p[8] = hit.material.metallic;
        p[9] = 1.0;
    });
    let mask: Vec<bool> = packed.data().chunks(10).map(|p| p[9] == 1.0).collect();
    let mut normal = packed.channels_slice(1, 3);
    for (i, &m) in mask.iter().enumerate() {
        if !m {
            normal.data_mut()[3 * i..3 * i + 3].copy_from_slice(&[0.0, 0.0, -1.0]);
        }
    }
    let gb = GBuffer {
        depth: packed.channels_slice(0, 1),
        normal,
        materials: MaterialMaps {
            albedo: packed.channels_slice(4, 3),
            roughness: packed.channels_slice(7, 1),
            metallic: packed.channels_slice(8, 1),
        },
        mask,
        intrinsics: *intr,
        pose: *pose,
    };
    gb.validate()?;
    Ok(gb)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gbuffer::pseudo_normal;

    fn mat() -> Material {
        Material::new(DVec3::splat(0.5), 0.5, 0.0)
    }

    #[test]
    fn plane_hit() {
        let s = Shape::Plane {
            point: DVec3::new(0.0, 0.0, 5.0),
            normal: DVec3::new(0.0, 0.0, -1.0),
        };
        let (t, n) = s.intersect(DVec3::ZERO, DVec3::Z).unwrap();
        assert_eq!(t, 5.0);
        assert_eq!(n, DVec3::new(0.0, 0.0, -1.0));
    }

    #[test]
    fn sphere_from_center() {
        let s = Shape::Sphere {
            center: DVec3::new(1.0, 2.0, 3.0),
            radius: 0.75,
        };
        let d = DVec3::new(0.3, -0.4, 0.5).normalize();
        let (t, n) = s.intersect(DVec3::new(1.0, 2.0, 3.0), d).unwrap();
        assert!((t - 0.75).abs() < 1e-12);
        assert!((n - d).length() < 1e-12);
    }

    #[test]
    fn box_slab_cases() {
        let b = Shape::Box {
            min: DVec3::new(-1.0, -1.0, 2.0),
            max: DVec3::new(1.0, 1.0, 4.0),
        };
        // Straight on: enters the z = 2 face.
        let (t, n) = b.intersect(DVec3::ZERO, DVec3::Z).unwrap();
        assert_eq!((t, n), (2.0, DVec3::new(0.0, 0.0, -1.0)));
        // Diagonal (1, 0, 2)/sqrt5: slabs give x in [-inf, sqrt5], z in [2 sqrt5 / 2, 4 sqrt5 / 2].
        let d = DVec3::new(1.0, 0.0, 2.0).normalize();
        let (t, n) = b.intersect(DVec3::ZERO, d).unwrap();
        assert!((t - 5f64.sqrt()).abs() < 1e-12);
        assert_eq!(n, DVec3::new(0.0, 0.0, -1.0));
        // From inside, exiting through x = 1.
        let (t, n) = b.intersect(DVec3::new(0.0, 0.0, 3.0), DVec3::X).unwrap();
        assert_eq!((t, n), (1.0, DVec3::X));
        // Miss beside the box.
        assert!(b.intersect(DVec3::new(2.0, 0.0, 0.0), DVec3::Z).is_none());
    }

    #[test]
    fn nearest_primitive_wins() {
        let s = SceneOracle::new(
            vec![
                Primitive {
                    shape: Shape::Plane {
                        point: DVec3::new(0.0, 0.0, 5.0),
                        normal: -DVec3::Z,
                    },
                    material: 0,
                },
                Primitive {
                    shape: Shape::Sphere {
                        center: DVec3::new(0.0, 0.0, 3.0),
                        radius: 1.0,
                    },
                    material: 0,
                },
            ],
            vec![mat()],
        )
        .unwrap();
        let h = s.intersect(DVec3::ZERO, DVec3::Z).unwrap();
        assert!((h.t - 2.0).abs() < 1e-12);
        assert!(s.intersect_within(DVec3::ZERO, DVec3::Z, 1.5).is_none());
    }

    #[test]
    fn scene_json_round_trip_and_errors() {
        let s = preset("box_interior", 32).unwrap().scene;
        let text = serde_json::to_string(&s).unwrap();
        assert_eq!(SceneOracle::from_json(&text).unwrap(), s);
        assert!(SceneOracle::from_json(r#"{"primitives": [{"type": "sphere", "center": [0,0,0], "radius": -1, "material": 0}], "materials": [{"albedo": [1,1,1], "roughness": 0.5, "metallic": 0}]}"#).is_err());
        assert!(SceneOracle::from_json(
            r#"{"primitives": [], "materials": [{"albedo": [1,1,1], "roughness": 0.5, "metallic": 0}], "#
        )
        .is_err());
    }

    #[test]
    fn synth_fronto_parallel_plane() {
        let p = preset("plane", 32).unwrap();
        let gb = synth_gbuffer(&p.scene, &p.pose, &p.intrinsics).unwrap();
        assert!(gb.mask.iter().all(|&m| m));
        for y in 0..32 {
            for x in 0..32 {
                assert!((gb.depth.get(x, y, 0) - 3.0).abs() < 1e-12);
                assert_eq!(gb.normal_at(x, y), DVec3::new(0.0, 0.0, -1.0));
            }
        }
    }

    #[test]
    fn synth_depth_matches_ray_parameter() {
        let p = preset("sphere_on_plane", 48).unwrap();
        let gb = synth_gbuffer(&p.scene, &p.pose, &p.intrinsics).unwrap();
        for y in (0..48).step_by(5) {
            for x in (0..48).step_by(5) {
                if !gb.is_masked(x, y) {
                    continue;
                }
                let r = p.intrinsics.pixel_ray(x, y);
                let d = p.pose.dir_to_world(r.normalize());
                let hit = p.scene.intersect(p.pose.center(), d).unwrap();
                assert!((gb.depth.get(x, y, 0) - hit.t * r.z / r.length()).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn pseudo_normals_agree_on_smooth_regions() {
        let p = preset("corner90", 64).unwrap();
        let gb = synth_gbuffer(&p.scene, &p.pose, &p.intrinsics).unwrap();
        let pn = pseudo_normal(&gb.depth, &gb.mask, &gb.intrinsics);
        let (w, h) = (64usize, 64usize);
        let mut checked = 0;
        for y in 2..h - 2 {
            for x in 2..w - 2 {
                // Smooth: the whole 5x5 neighbourhood shares one analytic normal.
                let n = gb.normal_at(x, y);
                let smooth = (y - 2..=y + 2)
                    .all(|yy| (x - 2..=x + 2).all(|xx| gb.is_masked(xx, yy) && gb.normal_at(xx, yy) == n));
                if smooth {
                    let d = pn.normals.get3(x, y) - n;
                    assert!(d.abs().max_element() < 1e-3, "({x}, {y}) {d}");
                    checked += 1;
                }
            }
        }
        assert!(checked > 500);
    }

    #[test]
    fn sphere_silhouette() {
        let p = preset("sphere_on_plane", 96).unwrap();
        let gb = synth_gbuffer(&p.scene, &p.pose, &p.intrinsics).unwrap();
        let Shape::Sphere { center, radius } = p
            .scene
            .primitives
            .iter()
            .find_map(|q| match q.shape {
                s @ Shape::Sphere { .. } => Some(s),
                _ => None,
            })
            .unwrap()
        else {
            unreachable!()
        };
        let c = p.pose.to_view(center);
        let intr = &p.intrinsics;
        // Angular radius of the sphere as seen from the camera.
        let sin_a = radius / c.length();
        for y in 0..96 {
            for x in 0..96 {
                let r = intr.pixel_ray(x, y).normalize();
                let ang = r.dot(c.normalize()).clamp(-1.0, 1.0).acos();
                let a = sin_a.asin();
                // One pixel of angular slack at this focal length.
                let px = 1.5 / intr.fx;
                if ang > a + px {
                    // Outside the disc: whatever is hit is not the sphere.
                    let d = p.pose.dir_to_world(r);
                    let hit = p.scene.intersect(p.pose.center(), d);
                    assert!(hit.is_none_or(|h| (h.point - center).length() > radius + 1e-9));
                } else if ang < a - px {
                    assert!(gb.is_masked(x, y));
                    let pt = gb.view_point(x, y);
                    assert!(((pt - c).length() - radius).abs() < 1e-6, "({x}, {y})");
                }
            }
        }
    }
}
