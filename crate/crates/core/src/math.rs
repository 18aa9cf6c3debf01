//! Small vector helpers shared by the shading, prefiltering and tracing code.

pub use glam::{DMat3, DVec2, DVec3};

pub const PI: f64 = std::f64::consts::PI;

/// Van der Corput radical inverse in base 2.
#[inline]
pub fn radical_inverse(i: u32) -> f64 {
    i.reverse_bits() as f64 * (1.0 / 4_294_967_296.0)
}

/// `i`-th point of the `n`-point Hammersley set in the unit square.
#[inline]
pub fn hammersley(i: u32, n: u32) -> DVec2 {
    DVec2::new((i as f64 + 0.5) / n as f64, radical_inverse(i))
}

/// Frame with `n` as the third axis. Deterministic and continuous except at
/// `n.z = -0`, following Duff et al.'s branchless construction.
#[derive(Debug, Clone, Copy)]
pub struct Frame {
    pub tangent: DVec3,
    pub bitangent: DVec3,
    pub normal: DVec3,
}

impl Frame {
    pub fn new(normal: DVec3) -> Self {
        let (tangent, bitangent) = normal.any_orthonormal_pair();
        Frame {
            tangent,
            bitangent,
            normal,
        }
    }

    #[inline]
    pub fn to_world(&self, local: DVec3) -> DVec3 {
        self.tangent * local.x + self.bitangent * local.y + self.normal * local.z
    }

    #[inline]
    pub fn to_local(&self, world: DVec3) -> DVec3 {
        DVec3::new(
            world.dot(self.tangent),
            world.dot(self.bitangent),
            world.dot(self.normal),
        )
    }
}

/// Mirror `d` about `n` (both unit; `d` points toward the surface).
#[inline]
pub fn reflect(d: DVec3, n: DVec3) -> DVec3 {
    d - 2.0 * d.dot(n) * n
}

/// Unit vector from polar angle `theta` (from +z) and azimuth `phi`.
#[inline]
pub fn spherical_dir(sin_theta: f64, cos_theta: f64, phi: f64) -> DVec3 {
    DVec3::new(sin_theta * phi.cos(), sin_theta * phi.sin(), cos_theta)
}

/// Cosine-weighted hemisphere direction around +z for a point in the unit square.
#[inline]
pub fn cosine_hemisphere(u: DVec2) -> DVec3 {
    let r = u.x.sqrt();
    let phi = 2.0 * PI * u.y;
    DVec3::new(r * phi.cos(), r * phi.sin(), (1.0 - u.x).max(0.0).sqrt())
}

/// GGX half-vector sample around +z, distributed as `D(h) (n.h)`.
#[inline]
pub fn ggx_half_vector(u: DVec2, alpha: f64) -> DVec3 {
    let phi = 2.0 * PI * u.x;
    let a2 = alpha * alpha;
    let cos_theta = ((1.0 - u.y) / (1.0 + (a2 - 1.0) * u.y)).max(0.0).sqrt();
    let sin_theta = (1.0 - cos_theta * cos_theta).max(0.0).sqrt();
    spherical_dir(sin_theta, cos_theta, phi)
}

pub fn is_unit(v: DVec3, tol: f64) -> bool {
    (v.length() - 1.0).abs() <= tol
}

#[inline]
pub fn mix(a: DVec3, b: DVec3, t: f64) -> DVec3 {
    a * (1.0 - t) + b * t
}
