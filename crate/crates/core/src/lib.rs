//! Deferred-shading global illumination on G-buffers.
//!
//! The crate renders per-pixel geometry and material maps under image-based
//! lighting (split-sum specular, prefiltered diffuse irradiance), estimates
//! ambient occlusion and one-bounce diffuse indirect light by marching rays
//! against the depth buffer, and inverts the same shading model to recover
//! per-pixel materials by projected gradient descent.
//!
//! Module map:
//! - [`gbuffer`]: camera model, G-buffer container, pseudo-normals, tensor files.
//! - [`brdf`]: Cook-Torrance kernels (GGX, Schlick, Smith).
//! - [`ibl`]: environment maps, prefiltering, BRDF LUT, direct shading.
//! - [`tracing`]: screen-space ray marching, occlusion and indirect light.
//! - [`cubemap`]: six-face world-space extension of the tracer.
//! - [`optimize`]: losses, analytic gradients, material recovery, relighting.
//! - [`oracle`]: analytic scenes and brute-force reference integrators.
//! - [`metrics`] and [`export`]: image comparison and PNG output.

pub mod brdf;
pub mod cubemap;
pub mod error;
pub mod export;
pub mod gbuffer;
pub mod ibl;
pub mod map;
pub mod math;
pub mod metrics;
pub mod optimize;
pub mod oracle;
pub mod pipeline;
pub mod tracing;

pub use error::{Error, Result};
pub use map::Map;
