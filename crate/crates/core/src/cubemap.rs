//! Six-face G-buffer cube around a camera center, for tracing occluders
//! and bounce light that lie outside the primary view.
//!
//! Face axes are expressed in the center pose's view frame. Each face
//! camera has a 90 degree field of view (`fx = fy = cx = cy = size / 2`).
//! Faces carry direct-only renders (occlusion 1).

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{ensure, Error, Result};
use crate::gbuffer::io::{load_gbuffer, load_map, read_json, save_gbuffer, store_with_sidecar, write_json};
use crate::gbuffer::{CameraIntrinsics, GBuffer, ViewPose};
use crate::ibl::{shade_direct, EnvironmentSet};
use crate::map::Map;
use crate::math::{DMat3, DVec3};
use crate::oracle::{synth_gbuffer, SceneOracle};
use crate::tracing::{
    adaptive_step, modulate, trace_with, RayHit, TraceHooks, TraceResult, TracingConfig, NORMAL_OFFSET,
};

pub const FACE_NAMES: [&str; 6] = ["+x", "-x", "+y", "-y", "+z", "-z"];

pub const MIN_FACE_SIZE: usize = 64;

/// Rows (right, down, forward) of face `k` in the center view frame.
pub fn face_axes(k: usize) -> DMat3 {
    let (right, down, forward) = match k {
        0 => (-DVec3::Z, DVec3::Y, DVec3::X),
        1 => (DVec3::Z, DVec3::Y, -DVec3::X),
        2 => (-DVec3::X, DVec3::Z, DVec3::Y),
        3 => (-DVec3::X, -DVec3::Z, -DVec3::Y),
        4 => (DVec3::X, DVec3::Y, DVec3::Z),
        5 => (-DVec3::X, DVec3::Y, -DVec3::Z),
        _ => panic!("cube face index {k} out of range"),
    };
    DMat3::from_cols(right, down, forward).transpose()
}

/// Face holding direction `q` (center view frame): the dominant axis, ties
/// resolved in the order x, y, z.
#[inline]
pub fn select_face(q: DVec3) -> usize {
    let a = q.abs();
    if a.x >= a.y && a.x >= a.z {
        if q.x >= 0.0 {
            0
        } else {
            1
        }
    } else if a.y >= a.z {
        if q.y >= 0.0 {
            2
        } else {
            3
        }
    } else if q.z >= 0.0 {
        4
    } else {
        5
    }
}

pub fn face_intrinsics(size: usize, z_near: f64, z_far: f64) -> Result<CameraIntrinsics> {
    let h = 0.5 * size as f64;
    CameraIntrinsics::new(h, h, h, h, size, size, z_near, z_far)
}

#[derive(Debug, Clone, PartialEq)]
pub struct CubeFace {
    pub gbuffer: GBuffer,
    /// Direct-only render of the face.
    pub direct: Map,
    pub pose: ViewPose,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CubemapBundle {
    /// In the order of [`FACE_NAMES`].
    pub faces: Vec<CubeFace>,
    pub center_pose: ViewPose,
}

impl CubemapBundle {
    pub fn size(&self) -> usize {
        self.faces[0].gbuffer.width()
    }

    pub fn center(&self) -> DVec3 {
        self.center_pose.center()
    }

    pub fn intrinsics(&self) -> &CameraIntrinsics {
        &self.faces[0].gbuffer.intrinsics
    }

    pub fn validate(&self) -> Result<()> {
        ensure!(
            self.faces.len() == 6,
            Dimensions,
            "cube needs 6 faces, got {}",
            self.faces.len()
        );
        let size = self.size();
        let c = self.center();
        for (k, f) in self.faces.iter().enumerate() {
            f.gbuffer.validate()?;
            let i = &f.gbuffer.intrinsics;
            ensure!(
                i.width == size && i.height == size,
                Dimensions,
                "face {} is {}x{}, expected {size}x{size}",
                FACE_NAMES[k],
                i.width,
                i.height
            );
            ensure!(
                (f.pose.center() - c).length() <= 1e-9 * c.length().max(1.0),
                Precondition,
                "face {} does not share the cube center",
                FACE_NAMES[k]
            );
            ensure!(
                f.gbuffer.pose == f.pose,
                Precondition,
                "face {} pose mismatch",
                FACE_NAMES[k]
            );
            f.gbuffer.depth.check_size(&f.direct, "face depth vs direct")?;
        }
        Ok(())
    }

    /// Pose of face `k` around `center_pose`.
    pub fn face_pose(center_pose: &ViewPose, k: usize) -> Result<ViewPose> {
        ViewPose::from_center(face_axes(k) * center_pose.rotation, center_pose.center())
    }

    pub fn save(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let mut faces = Vec::new();
        for (k, f) in self.faces.iter().enumerate() {
            let sub = format!("face_{k}");
            save_gbuffer(&f.gbuffer, dir.join(&sub))?;
            store_with_sidecar(
                &f.direct,
                &dir.join(&sub),
                "direct",
                "direct",
                Some(&f.gbuffer.intrinsics),
            )?;
            faces.push(FaceEntry {
                name: FACE_NAMES[k].to_string(),
                dir: sub,
                pose: f.pose,
            });
        }
        write_json(
            &CubeManifest {
                size: self.size(),
                center_pose: self.center_pose,
                faces,
            },
            dir.join("manifest.json"),
        )
    }

    pub fn load(dir: impl AsRef<Path>) -> Result<Self> {
        let dir = dir.as_ref();
        let m: CubeManifest = read_json(dir.join("manifest.json"))?;
        ensure!(
            m.faces.len() == 6,
            Config,
            "cube manifest lists {} faces",
            m.faces.len()
        );
        let faces = m
            .faces
            .iter()
            .map(|e| {
                let sub = dir.join(&e.dir);
                let gbuffer = load_gbuffer(&sub)?;
                Ok(CubeFace {
                    direct: load_map(sub.join("direct.gigt"))?,
                    pose: gbuffer.pose,
                    gbuffer,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let cube = CubemapBundle {
            faces,
            center_pose: m.center_pose,
        };
        cube.validate()?;
        Ok(cube)
    }
}

#[derive(Serialize, Deserialize)]
struct FaceEntry {
    name: String,
    dir: String,
    pose: ViewPose,
}

#[derive(Serialize, Deserialize)]
struct CubeManifest {
    size: usize,
    center_pose: ViewPose,
    faces: Vec<FaceEntry>,
}

/// Renders the six faces of `scene` around `center_pose` analytically and
/// shades them direct-only.
pub fn build_cubemap(
    scene: &SceneOracle,
    center_pose: &ViewPose,
    face_size: usize,
    z_near: f64,
    z_far: f64,
    env: &EnvironmentSet,
) -> Result<CubemapBundle> {
    ensure!(
        face_size >= MIN_FACE_SIZE,
        Precondition,
        "cube faces must be at least {MIN_FACE_SIZE} pixels, got {face_size}"
    );
    if scene.inside_solid(center_pose.center()) {
        return Err(Error::Scene(format!(
            "cube center {} lies inside solid geometry",
            center_pose.center()
        )));
    }
    let intr = face_intrinsics(face_size, z_near, z_far)?;
    let ones = Map::filled(face_size, face_size, 1, 1.0);
    let faces = (0..6)
        .map(|k| {
            let pose = CubemapBundle::face_pose(center_pose, k)?;
            let gbuffer = synth_gbuffer(scene, &pose, &intr)?;
            let direct = shade_direct(&gbuffer, env, &ones)?;
            Ok(CubeFace { gbuffer, direct, pose })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(CubemapBundle {
        faces,
        center_pose: *center_pose,
    })
}

/// A hit on one face of the cube.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CubeHit {
    pub face: usize,
    pub ray: RayHit,
}

#[inline]
fn cube_march(x0: DVec3, dir: DVec3, cube: &CubemapBundle, cfg: &TracingConfig) -> CubeHit {
    let intr = cube.intrinsics();
    let size = intr.width;
    let center = cube.center();
    let to_center_view = cube.center_pose.rotation;
    let t = adaptive_step((x0 - center).length(), cfg.t0, intr);
    let step = dir * t;
    for k in 1..=cfg.max_steps {
        let q = to_center_view * (x0 + step * k as f64 - center);
        let f = select_face(q);
        let face = &cube.faces[f];
        let p = face_axes(f) * q;
        if p.z >= intr.z_far {
            break;
        }
        if p.z <= intr.z_near {
            continue;
        }
        let (u, v, z) = intr.project_unchecked(p);
        // Seam samples can land a rounding error outside the face.
        let px = (u.max(0.0) as usize).min(size - 1);
        let py = (v.max(0.0) as usize).min(size - 1);
        let i = py * size + px;
        if !face.gbuffer.mask[i] {
            continue;
        }
        let zd = face.gbuffer.depth.data()[i];
        if zd < z && z < zd + cfg.delta {
            return CubeHit {
                face: f,
                ray: RayHit {
                    hit: true,
                    pixel: (px, py),
                    steps_taken: k,
                },
            };
        }
    }
    CubeHit {
        face: 0,
        ray: RayHit {
            hit: false,
            pixel: (0, 0),
            steps_taken: cfg.max_steps,
        },
    }
}

/// Marches a world-space ray through the cube. The step length follows the
/// origin's distance to the cube center; the origin is not offset.
pub fn world_march_ray(
    x0_world: DVec3,
    dir_world: DVec3,
    cube: &CubemapBundle,
    cfg: &TracingConfig,
) -> Result<CubeHit> {
    ensure!(
        (dir_world.length() - 1.0).abs() <= 1e-4,
        Precondition,
        "direction {dir_world} is not unit length"
    );
    cfg.validate()?;
    Ok(cube_march(x0_world, dir_world, cube, cfg))
}

/// World position of a cube hit, from the face depth.
pub fn hit_position(cube: &CubemapBundle, hit: &CubeHit) -> DVec3 {
    let face = &cube.faces[hit.face];
    let (x, y) = hit.ray.pixel;
    face.pose.to_world(face.gbuffer.view_point(x, y))
}

/// Occlusion and hit list for `front` using the cube's depth instead of
/// the front view's own.
pub fn world_trace(
    front: &GBuffer,
    cube: &CubemapBundle,
    cfg: &TracingConfig,
    hooks: TraceHooks,
) -> Result<TraceResult> {
    cube.validate()?;
    let s2 = cube.size() * cube.size();
    ensure!(6 * s2 <= u32::MAX as usize, Dimensions, "cube too large to index");
    trace_with(front, cfg, hooks, |_, _, x0, n, dir| {
        let start = front.pose.to_world(x0 + NORMAL_OFFSET * n);
        let h = cube_march(start, front.pose.dir_to_world(dir), cube, cfg);
        h.ray
            .hit
            .then(|| (h.face * s2 + h.ray.pixel.1 * cube.size() + h.ray.pixel.0) as u32)
    })
}

/// World-space occlusion and one-bounce indirect light for `front`; bounce
/// radiance comes from the faces' direct images.
pub fn world_occlusion_indirect(front: &GBuffer, cube: &CubemapBundle, cfg: &TracingConfig) -> Result<(Map, Map)> {
    let tr = world_trace(front, cube, cfg, TraceHooks::default())?;
    let e = world_gather(&tr, front, cube);
    Ok((tr.occlusion, modulate(front, &e)))
}

/// Incoming bounce irradiance for a trace made with [`world_trace`].
pub fn world_gather(tr: &TraceResult, front: &GBuffer, cube: &CubemapBundle) -> Map {
    let s2 = cube.size() * cube.size();
    tr.gather(front.width(), front.height(), |src| {
        let (f, i) = (src as usize / s2, src as usize % s2);
        let d = cube.faces[f].direct.data();
        DVec3::new(d[3 * i], d[3 * i + 1], d[3 * i + 2])
    })
}
