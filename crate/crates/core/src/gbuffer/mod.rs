//! G-buffer data model and pinhole camera math.
//!
//! View space is right-handed with +x right, +y down and +z into the screen.
//! Pixel `(x, y)` covers `[x, x+1) x [y, y+1)` in continuous image
//! coordinates, so its center sits at `(x + 0.5, y + 0.5)`. Normals stored in
//! a G-buffer face the camera (negative z hemisphere for fronto-parallel
//! surfaces).

pub mod io;
mod normals;

use serde::{Deserialize, Serialize};

use crate::brdf::Material;
use crate::error::{ensure, Error, Result};
use crate::map::Map;
use crate::math::{DMat3, DVec3};

pub use normals::{pseudo_normal, PseudoNormals};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CameraIntrinsics {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: usize,
    pub height: usize,
    pub z_near: f64,
    pub z_far: f64,
}

impl CameraIntrinsics {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        fx: f64,
        fy: f64,
        cx: f64,
        cy: f64,
        width: usize,
        height: usize,
        z_near: f64,
        z_far: f64,
    ) -> Result<Self> {
        let intr = CameraIntrinsics {
            fx,
            fy,
            cx,
            cy,
            width,
            height,
            z_near,
            z_far,
        };
        intr.validate()?;
        Ok(intr)
    }

    /// Centered camera with the given vertical field of view and square pixels.
    pub fn from_fov(width: usize, height: usize, fov_y_deg: f64, z_near: f64, z_far: f64) -> Result<Self> {
        let f = 0.5 * height as f64 / (0.5 * fov_y_deg.to_radians()).tan();
        Self::new(
            f,
            f,
            0.5 * width as f64,
            0.5 * height as f64,
            width,
            height,
            z_near,
            z_far,
        )
    }

    pub fn validate(&self) -> Result<()> {
        ensure!(
            self.fx > 0.0 && self.fy > 0.0,
            Precondition,
            "focal lengths must be positive (fx = {}, fy = {})",
            self.fx,
            self.fy
        );
        ensure!(
            self.width > 0 && self.height > 0,
            Precondition,
            "image size must be non-zero"
        );
        ensure!(
            (0.0..self.width as f64).contains(&self.cx) && (0.0..self.height as f64).contains(&self.cy),
            Precondition,
            "principal point ({}, {}) outside the {}x{} image",
            self.cx,
            self.cy,
            self.width,
            self.height
        );
        ensure!(
            self.z_near > 0.0 && self.z_far > self.z_near,
            Precondition,
            "clip range must satisfy 0 < z_near < z_far (got {}, {})",
            self.z_near,
            self.z_far
        );
        Ok(())
    }

    #[inline]
    pub fn depth_range(&self) -> f64 {
        self.z_far - self.z_near
    }

    #[inline]
    pub fn contains_depth(&self, z: f64) -> bool {
        self.z_near < z && z < self.z_far
    }

    #[inline]
    pub fn contains_pixel(&self, u: f64, v: f64) -> bool {
        u >= 0.0 && v >= 0.0 && u < self.width as f64 && v < self.height as f64
    }

    /// View-space point at continuous pixel `(u, v)` and depth `z`.
    pub fn unproject(&self, u: f64, v: f64, z: f64) -> Result<DVec3> {
        ensure!(
            self.contains_depth(z),
            Precondition,
            "depth {z} outside ({}, {})",
            self.z_near,
            self.z_far
        );
        ensure!(
            self.contains_pixel(u, v),
            Precondition,
            "pixel ({u}, {v}) outside the {}x{} image",
            self.width,
            self.height
        );
        Ok(self.unproject_unchecked(u, v, z))
    }

    #[inline]
    pub fn unproject_unchecked(&self, u: f64, v: f64, z: f64) -> DVec3 {
        DVec3::new(z * (u - self.cx) / self.fx, z * (v - self.cy) / self.fy, z)
    }

    /// Continuous pixel coordinates and depth of a view-space point. The
    /// result may fall outside the image.
    pub fn project(&self, p: DVec3) -> Result<(f64, f64, f64)> {
        if p.z <= 0.0 {
            return Err(Error::BehindCamera { z: p.z });
        }
        Ok(self.project_unchecked(p))
    }

    #[inline]
    pub fn project_unchecked(&self, p: DVec3) -> (f64, f64, f64) {
        (self.fx * p.x / p.z + self.cx, self.fy * p.y / p.z + self.cy, p.z)
    }

    /// Direction through the center of pixel `(x, y)` scaled to unit depth.
    #[inline]
    pub fn pixel_ray(&self, x: usize, y: usize) -> DVec3 {
        DVec3::new(
            (x as f64 + 0.5 - self.cx) / self.fx,
            (y as f64 + 0.5 - self.cy) / self.fy,
            1.0,
        )
    }

    /// Integer pixel containing a projected point, if inside the image.
    #[inline]
    pub fn texel(&self, u: f64, v: f64) -> Option<(usize, usize)> {
        if self.contains_pixel(u, v) {
            Some((u as usize, v as usize))
        } else {
            None
        }
    }
}

/// Free-function form of [`CameraIntrinsics::unproject`].
pub fn unproject(u: f64, v: f64, z: f64, intr: &CameraIntrinsics) -> Result<DVec3> {
    intr.unproject(u, v, z)
}

/// Free-function form of [`CameraIntrinsics::project`].
pub fn project(p: DVec3, intr: &CameraIntrinsics) -> Result<(f64, f64, f64)> {
    intr.project(p)
}

/// Rigid view-from-world transform: `x_view = rotation * x_world + translation`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ViewPose {
    pub rotation: DMat3,
    pub translation: DVec3,
}

impl Default for ViewPose {
    fn default() -> Self {
        ViewPose::IDENTITY
    }
}

impl ViewPose {
    pub const IDENTITY: ViewPose = ViewPose {
        rotation: DMat3::IDENTITY,
        translation: DVec3::ZERO,
    };

    pub fn new(rotation: DMat3, translation: DVec3) -> Result<Self> {
        let pose = ViewPose { rotation, translation };
        pose.validate()?;
        Ok(pose)
    }

    /// Camera at `center` whose view axes (right, down, forward) are the
    /// rows of `axes`, given in world coordinates.
    pub fn from_center(axes: DMat3, center: DVec3) -> Result<Self> {
        ViewPose::new(axes, -(axes * center))
    }

    /// Camera at `eye` looking at `target`, with `down` roughly the image +y.
    pub fn look_at(eye: DVec3, target: DVec3, down: DVec3) -> Result<Self> {
        let forward = (target - eye).normalize();
        let right = down.cross(forward).normalize();
        let down = forward.cross(right);
        ViewPose::from_center(DMat3::from_cols(right, down, forward).transpose(), eye)
    }

    pub fn validate(&self) -> Result<()> {
        let rtr = self.rotation.transpose() * self.rotation;
        let err = (rtr - DMat3::IDENTITY)
            .to_cols_array()
            .iter()
            .fold(0.0f64, |m, v| m.max(v.abs()));
        ensure!(err <= 1e-6, Precondition, "rotation is not orthonormal (error {err:e})");
        let det = self.rotation.determinant();
        ensure!(
            (det - 1.0).abs() <= 1e-6,
            Precondition,
            "rotation has determinant {det}"
        );
        ensure!(self.translation.is_finite(), Precondition, "non-finite translation");
        Ok(())
    }

    /// Camera center in world space.
    pub fn center(&self) -> DVec3 {
        -(self.rotation.transpose() * self.translation)
    }

    #[inline]
    pub fn to_view(&self, p: DVec3) -> DVec3 {
        self.rotation * p + self.translation
    }

    #[inline]
    pub fn to_world(&self, p: DVec3) -> DVec3 {
        self.rotation.transpose() * (p - self.translation)
    }

    #[inline]
    pub fn dir_to_view(&self, d: DVec3) -> DVec3 {
        self.rotation * d
    }

    #[inline]
    pub fn dir_to_world(&self, d: DVec3) -> DVec3 {
        self.rotation.transpose() * d
    }

    /// Row-major rotation rows, the layout used in JSON files.
    pub fn rotation_rows(&self) -> [[f64; 3]; 3] {
        let t = self.rotation.transpose();
        [t.x_axis.to_array(), t.y_axis.to_array(), t.z_axis.to_array()]
    }

    pub fn from_rows(rows: [[f64; 3]; 3], translation: [f64; 3]) -> Result<Self> {
        let rot = DMat3::from_cols(
            DVec3::from_array(rows[0]),
            DVec3::from_array(rows[1]),
            DVec3::from_array(rows[2]),
        )
        .transpose();
        ViewPose::new(rot, DVec3::from_array(translation))
    }
}

#[derive(Serialize, Deserialize)]
struct PoseJson {
    rotation: [[f64; 3]; 3],
    translation: [f64; 3],
}

impl Serialize for ViewPose {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        PoseJson {
            rotation: self.rotation_rows(),
            translation: self.translation.to_array(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for ViewPose {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let j = PoseJson::deserialize(d)?;
        ViewPose::from_rows(j.rotation, j.translation).map_err(serde::de::Error::custom)
    }
}

/// Per-pixel material channels: albedo (3), roughness (1), metallic (1).
#[derive(Debug, Clone, PartialEq)]
pub struct MaterialMaps {
    pub albedo: Map,
    pub roughness: Map,
    pub metallic: Map,
}

impl MaterialMaps {
    pub fn uniform(width: usize, height: usize, m: Material) -> Self {
        MaterialMaps {
            albedo: Map::constant3(width, height, m.albedo),
            roughness: Map::filled(width, height, 1, m.roughness),
            metallic: Map::filled(width, height, 1, m.metallic),
        }
    }

    #[inline]
    pub fn at(&self, x: usize, y: usize) -> Material {
        Material {
            albedo: self.albedo.get3(x, y),
            roughness: self.roughness.get(x, y, 0),
            metallic: self.metallic.get(x, y, 0),
        }
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, m: Material) {
        self.albedo.set3(x, y, m.albedo);
        self.roughness.set(x, y, 0, m.roughness);
        self.metallic.set(x, y, 0, m.metallic);
    }

    pub fn width(&self) -> usize {
        self.albedo.width()
    }

    pub fn height(&self) -> usize {
        self.albedo.height()
    }

    /// Channels concatenated as (albedo, roughness, metallic).
    pub fn stacked(&self) -> Map {
        Map::concat_channels(&[&self.albedo, &self.roughness, &self.metallic]).expect("material maps share a size")
    }

    pub fn validate(&self) -> Result<()> {
        ensure!(
            self.albedo.channels() == 3 && self.roughness.channels() == 1 && self.metallic.channels() == 1,
            Dimensions,
            "material channel counts must be 3/1/1"
        );
        self.albedo.check_size(&self.roughness, "albedo vs roughness")?;
        self.albedo.check_size(&self.metallic, "albedo vs metallic")?;
        for (name, m) in [
            ("albedo", &self.albedo),
            ("roughness", &self.roughness),
            ("metallic", &self.metallic),
        ] {
            if let Some(v) = m.data().iter().find(|v| !(0.0..=1.0).contains(*v)) {
                return Err(Error::Precondition(format!("{name} value {v} outside [0, 1]")));
            }
        }
        Ok(())
    }
}

/// Geometry and material maps of one view.
#[derive(Debug, Clone, PartialEq)]
pub struct GBuffer {
    /// View-space z; meaningless where `mask` is false.
    pub depth: Map,
    /// Unit view-space normals facing the camera.
    pub normal: Map,
    pub materials: MaterialMaps,
    pub mask: Vec<bool>,
    pub intrinsics: CameraIntrinsics,
    /// Orientation of the view in the world frame the environment map lives in.
    pub pose: ViewPose,
}

impl GBuffer {
    #[inline]
    pub fn width(&self) -> usize {
        self.intrinsics.width
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.intrinsics.height
    }

    #[inline]
    pub fn is_masked(&self, x: usize, y: usize) -> bool {
        self.mask[y * self.width() + x]
    }

    pub fn masked_count(&self) -> usize {
        self.mask.iter().filter(|&&m| m).count()
    }

    /// View-space position of the surface seen through pixel `(x, y)`.
    #[inline]
    pub fn view_point(&self, x: usize, y: usize) -> DVec3 {
        self.intrinsics.pixel_ray(x, y) * self.depth.get(x, y, 0)
    }

    #[inline]
    pub fn normal_at(&self, x: usize, y: usize) -> DVec3 {
        self.normal.get3(x, y)
    }

    #[inline]
    pub fn material(&self, x: usize, y: usize) -> Material {
        self.materials.at(x, y)
    }

    pub fn with_materials(&self, materials: MaterialMaps) -> Result<GBuffer> {
        materials.validate()?;
        self.depth.check_size(&materials.albedo, "G-buffer vs materials")?;
        Ok(GBuffer {
            materials,
            ..self.clone()
        })
    }

    /// Checks every documented invariant of the container.
    pub fn validate(&self) -> Result<()> {
        self.intrinsics.validate()?;
        self.pose.validate()?;
        let (w, h) = (self.width(), self.height());
        for (name, m, c) in [("depth", &self.depth, 1), ("normal", &self.normal, 3)] {
            ensure!(
                m.width() == w && m.height() == h && m.channels() == c,
                Dimensions,
                "{name} map is {}x{}x{}, expected {w}x{h}x{c}",
                m.width(),
                m.height(),
                m.channels()
            );
        }
        ensure!(
            self.mask.len() == w * h,
            Dimensions,
            "mask has {} entries",
            self.mask.len()
        );
        self.materials.validate()?;
        self.depth.check_size(&self.materials.albedo, "depth vs materials")?;
        for y in 0..h {
            for x in 0..w {
                if !self.is_masked(x, y) {
                    continue;
                }
                let z = self.depth.get(x, y, 0);
                ensure!(
                    self.intrinsics.contains_depth(z),
                    Precondition,
                    "depth {z} at ({x}, {y}) outside the clip range"
                );
                let n = self.normal_at(x, y);
                ensure!(
                    (n.length() - 1.0).abs() <= 1e-5,
                    Precondition,
                    "normal at ({x}, {y}) has length {}",
                    n.length()
                );
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn intr() -> CameraIntrinsics {
        CameraIntrinsics::new(500.0, 500.0, 320.0, 240.0, 640, 480, 0.1, 100.0).unwrap()
    }

    #[test]
    fn principal_point_ray() {
        let p = unproject(320.0, 240.0, 2.0, &intr()).unwrap();
        assert_eq!(p, DVec3::new(0.0, 0.0, 2.0));
    }

    #[test]
    fn half_fov_ray() {
        let i = intr();
        let p = unproject(i.cx + 0.5 * i.fx, i.cy, 2.0, &i).unwrap();
        assert_eq!(p, DVec3::new(1.0, 0.0, 2.0));
        let (u, v, z) = project(DVec3::new(1.0, 0.0, 2.0), &i).unwrap();
        assert_eq!((u, v, z), (570.0, 240.0, 2.0));
    }

    #[test]
    fn unproject_off_center_value() {
        // z (u - cx) / fx = 3.7 * -2.5 / 500, z (v - cy) / fy = 3.7 * -117.75 / 500
        let p = unproject(317.5, 122.25, 3.7, &intr()).unwrap();
        assert!((p.x - -0.0185).abs() < 1e-15);
        assert!((p.y - -0.871_35).abs() < 1e-12);
        assert_eq!(p.z, 3.7);
        let (u, v, z) = project(p, &intr()).unwrap();
        assert!((u - 317.5).abs() < 1e-9 && (v - 122.25).abs() < 1e-9 && z == 3.7);
    }

    #[test]
    fn project_principal_axis() {
        assert_eq!(
            project(DVec3::new(0.0, 0.0, 5.0), &intr()).unwrap(),
            (320.0, 240.0, 5.0)
        );
    }

    #[test]
    fn preconditions_are_enforced() {
        let i = intr();
        assert!(matches!(unproject(10.0, 10.0, 0.05, &i), Err(Error::Precondition(_))));
        assert!(matches!(unproject(10.0, 10.0, 100.0, &i), Err(Error::Precondition(_))));
        assert!(matches!(unproject(640.0, 10.0, 1.0, &i), Err(Error::Precondition(_))));
        assert!(matches!(unproject(-0.1, 10.0, 1.0, &i), Err(Error::Precondition(_))));
        assert!(matches!(
            project(DVec3::new(0.0, 0.0, 0.0), &i),
            Err(Error::BehindCamera { .. })
        ));
        assert!(matches!(
            project(DVec3::new(0.0, 0.0, -1.0), &i),
            Err(Error::BehindCamera { .. })
        ));
    }

    #[test]
    fn invalid_intrinsics_rejected() {
        assert!(CameraIntrinsics::new(0.0, 1.0, 1.0, 1.0, 4, 4, 0.1, 1.0).is_err());
        assert!(CameraIntrinsics::new(1.0, 1.0, 4.0, 1.0, 4, 4, 0.1, 1.0).is_err());
        assert!(CameraIntrinsics::new(1.0, 1.0, 1.0, 1.0, 4, 4, 1.0, 1.0).is_err());
    }

    #[test]
    fn look_at_pose_is_rigid() {
        let pose = ViewPose::look_at(DVec3::new(1.0, -2.0, 0.5), DVec3::new(0.0, 0.0, 4.0), DVec3::Y).unwrap();
        let target = pose.to_view(DVec3::new(0.0, 0.0, 4.0));
        assert!(target.x.abs() < 1e-12 && target.y.abs() < 1e-12 && target.z > 0.0);
        let p = DVec3::new(0.3, 0.2, -0.9);
        assert!((pose.to_world(pose.to_view(p)) - p).length() < 1e-12);
        assert!((pose.center() - DVec3::new(1.0, -2.0, 0.5)).length() < 1e-12);
    }

    #[test]
    fn pose_json_round_trip_and_validation() {
        let pose = ViewPose::look_at(DVec3::ZERO, DVec3::X, DVec3::Y).unwrap();
        let s = serde_json::to_string(&pose).unwrap();
        let back: ViewPose = serde_json::from_str(&s).unwrap();
        assert!((back.rotation - pose.rotation).abs_diff_eq(DMat3::ZERO, 1e-15));
        let reflect = r#"{"rotation":[[-1,0,0],[0,1,0],[0,0,1]],"translation":[0,0,0]}"#;
        assert!(serde_json::from_str::<ViewPose>(reflect).is_err());
    }
}
