//! The forward renderer: trace, shade direct light, gather one bounce and
//! composite.

use std::fs;
use std::path::Path;

use serde_json::{json, Value};

use crate::cubemap::{world_gather, world_trace, CubemapBundle};
use crate::error::{Error, Result};
use crate::gbuffer::io::store_with_sidecar;
use crate::gbuffer::io::write_json;
use crate::gbuffer::GBuffer;
use crate::ibl::{shade_direct, EnvironmentSet};
use crate::map::Map;
use crate::tracing::{composite, modulate, trace, TraceHooks, TraceResult, TracingConfig};

/// All images of one rendered view.
#[derive(Debug, Clone, PartialEq)]
pub struct RenderBundle {
    pub direct: Map,
    pub occlusion: Map,
    pub indirect: Map,
    pub composite: Map,
    /// `{inputs: {path: sha256}, config: {...}, version}`.
    pub provenance: Value,
}

impl RenderBundle {
    /// Writes the four images as GIGT files plus `provenance.json`.
    pub fn save(&self, dir: impl AsRef<Path>, gb: &GBuffer) -> Result<()> {
        let dir = dir.as_ref();
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let intr = Some(&gb.intrinsics);
        store_with_sidecar(&self.direct, dir, "direct", "direct", intr)?;
        store_with_sidecar(&self.occlusion, dir, "occlusion", "occlusion", intr)?;
        store_with_sidecar(&self.indirect, dir, "indirect", "indirect", intr)?;
        store_with_sidecar(&self.composite, dir, "composite", "composite", intr)?;
        write_json(&self.provenance, dir.join("provenance.json"))
    }
}

pub fn provenance(inputs: Value, config: Value) -> Value {
    json!({
        "inputs": inputs,
        "config": config,
        "version": env!("CARGO_PKG_VERSION"),
    })
}

/// Traces the view, in screen space or against `cube`.
pub fn trace_view(gb: &GBuffer, cfg: &TracingConfig, cube: Option<&CubemapBundle>) -> Result<TraceResult> {
    match cube {
        Some(c) => world_trace(gb, c, cfg, TraceHooks::default()),
        None => trace(gb, cfg, TraceHooks::default()),
    }
}

/// Renders from an existing trace. The bounce light is gathered from this
/// view's first-pass image (direct light with `O = 1`) or from the cube
/// faces, which are shaded the same way.
pub fn render_traced(
    gb: &GBuffer,
    env: &EnvironmentSet,
    tr: &TraceResult,
    cube: Option<&CubemapBundle>,
) -> Result<RenderBundle> {
    let direct = shade_direct(gb, env, &tr.occlusion)?;
    let indirect = match cube {
        Some(c) => modulate(gb, &world_gather(tr, gb, c)),
        None => {
            let first_pass = shade_direct(gb, env, &Map::filled(gb.width(), gb.height(), 1, 1.0))?;
            tr.indirect(gb, &first_pass)?
        }
    };
    let composite = composite(&direct, &indirect)?;
    Ok(RenderBundle {
        direct,
        occlusion: tr.occlusion.clone(),
        indirect,
        composite,
        provenance: Value::Null,
    })
}

/// Full forward pass for one view.
pub fn render(
    gb: &GBuffer,
    env: &EnvironmentSet,
    cfg: &TracingConfig,
    cube: Option<&CubemapBundle>,
) -> Result<RenderBundle> {
    gb.validate()?;
    let tr = trace_view(gb, cfg, cube)?;
    let mut bundle = render_traced(gb, env, &tr, cube)?;
    bundle.provenance = provenance(json!({}), json!({ "tracing": cfg, "cubemap": cube.is_some() }));
    Ok(bundle)
}
