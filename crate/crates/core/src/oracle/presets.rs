//! Built-in test scenes. Every preset is framed by a camera at the origin
//! looking down +z (identity pose) with a 60 degree vertical field of view
//! and clip range `[0.1, 10]`. World +y points down, as in view space.

use super::{Primitive, SceneOracle, Shape};
use crate::brdf::Material;
use crate::error::{Error, Result};
use crate::gbuffer::{CameraIntrinsics, ViewPose};
use crate::ibl::EnvMap;
use crate::math::DVec3;

pub const PRESET_NAMES: [&str; 5] = [
    "plane",
    "corner90",
    "box_interior",
    "sphere_on_plane",
    "box_with_offscreen_wall",
];

pub const FOV_Y_DEG: f64 = 60.0;
pub const Z_NEAR: f64 = 0.1;
pub const Z_FAR: f64 = 10.0;

/// Height of the preset environment map (width is twice this).
pub const ENV_HEIGHT: usize = 64;

#[derive(Debug, Clone)]
pub struct Preset {
    pub name: &'static str,
    pub scene: SceneOracle,
    pub pose: ViewPose,
    pub intrinsics: CameraIntrinsics,
    pub env: EnvMap,
}

/// Overcast sky, brightest overhead (-y), with a warm ground below the horizon.
pub fn sky_env(height: usize) -> EnvMap {
    EnvMap::from_fn(height, |d| {
        let up = (-d.y).max(0.0);
        let down = d.y.max(0.0);
        DVec3::new(0.55, 0.6, 0.7) + DVec3::new(1.2, 1.1, 0.9) * up * up + DVec3::new(-0.25, -0.3, -0.4) * down
    })
    .expect("sky radiance is finite and positive")
}

fn slab(min: [f64; 3], max: [f64; 3], material: usize) -> Primitive {
    Primitive {
        shape: Shape::Box {
            min: DVec3::from_array(min),
            max: DVec3::from_array(max),
        },
        material,
    }
}

fn scene(primitives: Vec<Primitive>, materials: Vec<Material>) -> SceneOracle {
    SceneOracle::new(primitives, materials).expect("preset scenes are valid")
}

const WHITE: Material = Material::new(DVec3::new(0.8, 0.8, 0.8), 0.8, 0.0);

fn plane() -> SceneOracle {
    scene(
        vec![Primitive {
            shape: Shape::Plane {
                point: DVec3::new(0.0, 0.0, 3.0),
                normal: DVec3::new(0.0, 0.0, -1.0),
            },
            material: 0,
        }],
        vec![Material::new(DVec3::ONE, 1.0, 0.0)],
    )
}

/// Floor meeting a back wall at a right angle.
fn corner90() -> SceneOracle {
    scene(
        vec![
            slab([-1.0, 1.0, 2.0], [1.0, 1.2, 4.0], 0),
            slab([-1.0, -1.0, 4.0], [1.0, 1.2, 4.2], 0),
        ],
        vec![WHITE],
    )
}

/// Box open toward the camera: interior `[-1, 1]^2 x [2, 4]`, red left
/// wall, green right wall.
fn box_interior() -> SceneOracle {
    scene(
        vec![
            slab([-1.1, 1.0, 2.0], [1.1, 1.1, 4.1], 0),
            slab([-1.1, -1.1, 2.0], [1.1, -1.0, 4.1], 0),
            slab([-1.1, -1.1, 4.0], [1.1, 1.1, 4.1], 0),
            slab([-1.1, -1.1, 2.0], [-1.0, 1.1, 4.1], 1),
            slab([1.0, -1.1, 2.0], [1.1, 1.1, 4.1], 2),
        ],
        vec![
            WHITE,
            Material::new(DVec3::new(0.8, 0.15, 0.1), 0.7, 0.0),
            Material::new(DVec3::new(0.15, 0.7, 0.15), 0.9, 0.0),
        ],
    )
}

fn sphere_on_plane() -> SceneOracle {
    scene(
        vec![
            slab([-2.0, 1.0, 1.5], [2.0, 1.2, 5.0], 0),
            Primitive {
                shape: Shape::Sphere {
                    center: DVec3::new(0.0, 0.5, 3.5),
                    radius: 0.5,
                },
                material: 1,
            },
        ],
        vec![
            Material::new(DVec3::new(0.6, 0.6, 0.6), 0.7, 0.0),
            Material::new(DVec3::new(0.9, 0.6, 0.2), 0.4, 0.5),
        ],
    )
}

/// Floor running under the camera and a bright wall behind it, outside
/// the view frustum.
fn box_with_offscreen_wall() -> SceneOracle {
    scene(
        vec![
            slab([-1.5, 1.0, -1.5], [1.5, 1.2, 5.0], 0),
            slab([-10.0, -10.0, -1.5], [10.0, 1.0, -1.2], 1),
        ],
        vec![
            Material::new(DVec3::new(0.7, 0.7, 0.7), 0.8, 0.0),
            Material::new(DVec3::new(0.95, 0.95, 0.95), 0.9, 0.0),
        ],
    )
}

/// Closed room around the origin, interior `[-1.5, 2] x [-1, 1] x [-2, 3]`.
pub fn closed_room() -> SceneOracle {
    let (lo, hi) = ([-1.5, -1.0, -2.0], [2.0, 1.0, 3.0]);
    let t = 0.1;
    let mut walls = Vec::new();
    for axis in 0..3 {
        let (mut a_min, mut a_max) = ([lo[0] - t, lo[1] - t, lo[2] - t], [hi[0] + t, hi[1] + t, hi[2] + t]);
        a_max[axis] = lo[axis];
        walls.push(slab(a_min, a_max, 0));
        a_min[axis] = hi[axis];
        a_max[axis] = hi[axis] + t;
        walls.push(slab(a_min, a_max, 0));
    }
    scene(walls, vec![WHITE])
}

/// Builds a named preset rendered at `size x size` pixels.
pub fn preset(name: &str, size: usize) -> Result<Preset> {
    let (name, scene) = match name {
        "plane" => ("plane", plane()),
        "corner90" => ("corner90", corner90()),
        "box_interior" => ("box_interior", box_interior()),
        "sphere_on_plane" => ("sphere_on_plane", sphere_on_plane()),
        "box_with_offscreen_wall" => ("box_with_offscreen_wall", box_with_offscreen_wall()),
        other => {
            return Err(Error::Scene(format!(
                "unknown preset {other:?}; expected one of {}",
                PRESET_NAMES.join(", ")
            )))
        }
    };
    Ok(Preset {
        name,
        scene,
        pose: ViewPose::IDENTITY,
        intrinsics: CameraIntrinsics::from_fov(size, size, FOV_Y_DEG, Z_NEAR, Z_FAR)?,
        env: sky_env(ENV_HEIGHT),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn all_presets_build() {
        for name in PRESET_NAMES {
            let p = preset(name, 16).unwrap();
            assert_eq!(p.name, name);
            assert!(!p.scene.inside_solid(p.pose.center()));
        }
        assert!(matches!(preset("teapot", 16), Err(Error::Scene(_))));
    }

    #[test]
    fn closed_room_encloses_origin() {
        let s = closed_room();
        for d in [
            DVec3::X,
            -DVec3::X,
            DVec3::Y,
            -DVec3::Y,
            DVec3::Z,
            -DVec3::Z,
            DVec3::ONE.normalize(),
        ] {
            assert!(s.intersect(DVec3::ZERO, d).is_some());
        }
        assert!((s.intersect(DVec3::ZERO, -DVec3::Z).unwrap().t - 2.0).abs() < 1e-12);
    }
}
