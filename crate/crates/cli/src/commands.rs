use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, ValueEnum};
use serde::Deserialize;
use serde_json::json;

use gigi::brdf::Material;
use gigi::cubemap::{build_cubemap, CubemapBundle};
use gigi::export::{export_png, Tonemap};
use gigi::gbuffer::io::{
    load_gbuffer, load_image, load_materials, save_gbuffer, save_materials, store_map, store_pfm, write_json,
};
use gigi::gbuffer::{CameraIntrinsics, GBuffer, MaterialMaps, ViewPose};
use gigi::ibl::{
    env_hash, prefilter_cached, EnvMap, EnvironmentSet, DEFAULT_IRRADIANCE_HEIGHT, DEFAULT_LUT_SIZE, DEFAULT_MIP_COUNT,
};
use gigi::math::DVec3;
use gigi::metrics;
use gigi::optimize::{albedo_psnr, optimize_materials, relight as relight_view, GtView, OptimizeConfig};
use gigi::oracle::presets::{preset, FOV_Y_DEG, Z_FAR, Z_NEAR};
use gigi::oracle::{synth_gbuffer, SceneOracle};
use gigi::pipeline::{self, RenderBundle};
use gigi::tracing::{Sampler, TracingConfig, DEFAULT_MAX_STEPS, DEFAULT_SAMPLES};
use gigi::Map;

use crate::provenance::hash_inputs;

/// Bad flags or inputs detected by the CLI itself (exit code 2).
#[derive(Debug)]
pub struct InputError(pub String);

/// A produced output failed a sanity check (exit code 4).
#[derive(Debug)]
pub struct Invariant(pub String);

impl fmt::Display for InputError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl fmt::Display for Invariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "internal invariant violated: {}", self.0)
    }
}

impl std::error::Error for InputError {}
impl std::error::Error for Invariant {}

pub fn exit_code(e: &anyhow::Error) -> u8 {
    for cause in e.chain() {
        if cause.is::<Invariant>() {
            return 4;
        }
        if let Some(g) = cause.downcast_ref::<gigi::Error>() {
            return match g {
                gigi::Error::Diverged { .. } => 3,
                _ => 2,
            };
        }
    }
    2
}

fn input_error(msg: impl Into<String>) -> anyhow::Error {
    InputError(msg.into()).into()
}

fn parse_size(s: &str) -> Result<(usize, usize), String> {
    let (w, h) = s
        .split_once(['x', 'X'])
        .ok_or_else(|| format!("expected WxH, got {s:?}"))?;
    let w: usize = w.trim().parse().map_err(|_| format!("bad width in {s:?}"))?;
    let h: usize = h.trim().parse().map_err(|_| format!("bad height in {s:?}"))?;
    if w == 0 || h == 0 {
        return Err("image size must be positive".into());
    }
    Ok((w, h))
}

fn parse_tonemap(s: &str) -> Result<Tonemap, String> {
    s.parse().map_err(|e: gigi::Error| e.to_string())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum OnOff {
    On,
    Off,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SamplerKind {
    Fibonacci,
    /// Azimuth by polar grid; `--ns` is split into its most square factors.
    Stratified,
}

#[derive(Args, Debug)]
pub struct TraceArgs {
    /// Rays per pixel.
    #[arg(long, default_value_t = DEFAULT_SAMPLES)]
    ns: usize,
    /// Base march step (default: 2% of the clip range).
    #[arg(long)]
    t0: Option<f64>,
    #[arg(long, default_value_t = DEFAULT_MAX_STEPS)]
    steps: usize,
    /// Surface thickness (default: 4 t0).
    #[arg(long)]
    delta: Option<f64>,
    #[arg(long, value_enum, default_value = "fibonacci")]
    sampler: SamplerKind,
}

impl TraceArgs {
    fn config(&self, intr: &CameraIntrinsics) -> Result<TracingConfig> {
        let base = TracingConfig::default_for(intr);
        let t0 = self.t0.unwrap_or(base.t0);
        let sampler = match self.sampler {
            SamplerKind::Fibonacci => Sampler::Fibonacci { n: self.ns },
            SamplerKind::Stratified => {
                let n2 = (1..=self.ns.max(1))
                    .take_while(|k| k * k <= self.ns)
                    .filter(|&k| self.ns.is_multiple_of(k))
                    .last()
                    .unwrap_or(1);
                Sampler::StratifiedSpherical { n1: self.ns / n2, n2 }
            }
        };
        let cfg = TracingConfig {
            t0,
            max_steps: self.steps,
            delta: self.delta.unwrap_or(4.0 * t0),
            sampler,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Args, Debug)]
#[group(id = "source", required = true, multiple = false)]
pub struct SceneSource {
    /// Scene JSON: `{primitives, materials, env}`.
    #[arg(long, group = "source")]
    scene: Option<PathBuf>,
    /// Built-in scene: plane, corner90, box_interior, sphere_on_plane, box_with_offscreen_wall.
    #[arg(long, group = "source")]
    preset: Option<String>,
}

struct LoadedScene {
    scene: SceneOracle,
    env: Option<EnvMap>,
}

impl SceneSource {
    fn load(&self) -> Result<LoadedScene> {
        if let Some(name) = &self.preset {
            let p = preset(name, 1)?;
            return Ok(LoadedScene {
                scene: p.scene,
                env: Some(p.env),
            });
        }
        let path = self.scene.as_ref().expect("clap enforces one source");
        let scene = SceneOracle::load(path)?;
        let env = match &scene.env {
            Some(e) => {
                let e = path.parent().unwrap_or(Path::new(".")).join(e);
                Some(EnvMap::new(load_image(&e)?)?)
            }
            None => None,
        };
        Ok(LoadedScene { scene, env })
    }

    fn path(&self) -> Option<&Path> {
        self.scene.as_deref()
    }
}

fn load_pose(path: Option<&Path>) -> Result<ViewPose> {
    match path {
        Some(p) => Ok(gigi::gbuffer::io::read_json(p)?),
        None => Ok(ViewPose::IDENTITY),
    }
}

fn cache_dir(env: &EnvMap, irradiance: usize, mips: usize, lut: usize) -> Option<PathBuf> {
    let root = std::env::var_os("GIGI_CACHE")?;
    let hash = env_hash(env);
    Some(PathBuf::from(root).join(format!("{}-i{irradiance}-m{mips}-l{lut}", &hash[..16])))
}

/// A prefiltered directory, or an image prefiltered with default sizes
/// (through the `GIGI_CACHE` directory when set).
fn load_env(path: &Path) -> Result<EnvironmentSet> {
    if path.is_dir() {
        return Ok(EnvironmentSet::load(path)?);
    }
    let env = EnvMap::new(load_image(path)?)?;
    match cache_dir(&env, DEFAULT_IRRADIANCE_HEIGHT, DEFAULT_MIP_COUNT, DEFAULT_LUT_SIZE) {
        Some(dir) => Ok(prefilter_cached(
            &env,
            DEFAULT_IRRADIANCE_HEIGHT,
            DEFAULT_MIP_COUNT,
            DEFAULT_LUT_SIZE,
            dir,
        )?
        .0),
        None => Ok(EnvironmentSet::with_defaults(env)?),
    }
}

fn check_finite(name: &str, m: &Map) -> Result<()> {
    if m.data().iter().any(|v| !v.is_finite()) {
        bail!(Invariant(format!("{name} has non-finite values")));
    }
    Ok(())
}

fn check_bundle(b: &RenderBundle) -> Result<()> {
    check_finite("direct", &b.direct)?;
    check_finite("indirect", &b.indirect)?;
    check_finite("composite", &b.composite)?;
    if b.occlusion.data().iter().any(|o| !(0.0..=1.0).contains(o)) {
        bail!(Invariant("occlusion outside [0, 1]".into()));
    }
    Ok(())
}

fn masked_mean(m: &Map, mask: &[bool]) -> f64 {
    let c = m.channels();
    let (mut s, mut n) = (0.0, 0usize);
    for (i, _) in mask.iter().enumerate().filter(|p| *p.1) {
        s += m.data()[i * c..(i + 1) * c].iter().sum::<f64>();
        n += c;
    }
    if n == 0 {
        0.0
    } else {
        s / n as f64
    }
}

#[derive(Args, Debug)]
pub struct SynthArgs {
    #[command(flatten)]
    source: SceneSource,
    /// Camera pose JSON `{rotation, translation}` (default: identity).
    #[arg(long)]
    pose: Option<PathBuf>,
    #[arg(long, value_parser = parse_size, default_value = "256x256")]
    size: (usize, usize),
    /// Vertical field of view in degrees.
    #[arg(long, default_value_t = FOV_Y_DEG)]
    fov: f64,
    #[arg(long, default_value_t = Z_NEAR)]
    z_near: f64,
    #[arg(long, default_value_t = Z_FAR)]
    z_far: f64,
    /// Also write the scene's environment map (.pfm or .gigt).
    #[arg(long)]
    env_out: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

pub fn synth(a: SynthArgs) -> Result<()> {
    let loaded = a.source.load()?;
    let pose = load_pose(a.pose.as_deref())?;
    let intr = CameraIntrinsics::from_fov(a.size.0, a.size.1, a.fov, a.z_near, a.z_far)?;
    let gb = synth_gbuffer(&loaded.scene, &pose, &intr)?;
    save_gbuffer(&gb, &a.out)?;
    if let Some(path) = &a.env_out {
        let env = loaded
            .env
            .ok_or_else(|| input_error("scene has no environment map to write"))?;
        match path.extension().and_then(|e| e.to_str()) {
            Some("pfm") => store_pfm(env.radiance(), path)?,
            _ => store_map(env.radiance(), path)?,
        }
    }
    let inputs = hash_inputs(a.source.path().into_iter().chain(a.pose.as_deref()))?;
    let config = json!({ "preset": a.source.preset, "intrinsics": intr, "pose": pose });
    write_json(&pipeline::provenance(inputs, config), a.out.join("provenance.json"))?;
    println!(
        "wrote {}x{} G-buffer ({} masked pixels) to {}",
        intr.width,
        intr.height,
        gb.masked_count(),
        a.out.display()
    );
    Ok(())
}

#[derive(Args, Debug)]
pub struct PrefilterArgs {
    /// Equirectangular radiance (.pfm or .gigt).
    #[arg(long)]
    env: PathBuf,
    #[arg(long, default_value_t = DEFAULT_MIP_COUNT)]
    mips: usize,
    /// BRDF table resolution.
    #[arg(long, default_value_t = DEFAULT_LUT_SIZE)]
    lut: usize,
    /// Height of the irradiance map.
    #[arg(long, default_value_t = DEFAULT_IRRADIANCE_HEIGHT)]
    irradiance: usize,
    /// Output directory (default: a subdirectory of $GIGI_CACHE).
    #[arg(long)]
    out: Option<PathBuf>,
}

pub fn prefilter(a: PrefilterArgs) -> Result<()> {
    let env = EnvMap::new(load_image(&a.env)?)?;
    let dir = match a.out.clone().or_else(|| cache_dir(&env, a.irradiance, a.mips, a.lut)) {
        Some(d) => d,
        None => bail!(InputError("no --out given and GIGI_CACHE is not set".into())),
    };
    let (_, fresh) = prefilter_cached(&env, a.irradiance, a.mips, a.lut, &dir)?;
    let inputs = hash_inputs([a.env.as_path()])?;
    let config = json!({ "mips": a.mips, "lut": a.lut, "irradiance": a.irradiance });
    write_json(&pipeline::provenance(inputs, config), dir.join("provenance.json"))?;
    println!("{} {}", if fresh { "computed" } else { "cached" }, dir.display());
    Ok(())
}

#[derive(Args, Debug)]
pub struct CubemapArgs {
    #[command(flatten)]
    source: SceneSource,
    /// Pose of the center camera (default: identity).
    #[arg(long)]
    pose: Option<PathBuf>,
    /// Face resolution; match the front view with `2 fx`.
    #[arg(long, default_value_t = 128)]
    face_size: usize,
    /// Environment used to shade the faces (prefiltered directory or image).
    #[arg(long)]
    env: PathBuf,
    #[arg(long, default_value_t = Z_NEAR)]
    z_near: f64,
    #[arg(long, default_value_t = Z_FAR)]
    z_far: f64,
    #[arg(long)]
    out: PathBuf,
}

pub fn cubemap(a: CubemapArgs) -> Result<()> {
    let loaded = a.source.load()?;
    let pose = load_pose(a.pose.as_deref())?;
    let env = load_env(&a.env)?;
    let cube = build_cubemap(&loaded.scene, &pose, a.face_size, a.z_near, a.z_far, &env)?;
    cube.save(&a.out)?;
    let inputs = hash_inputs(
        a.source
            .path()
            .into_iter()
            .chain(a.pose.as_deref())
            .chain([a.env.as_path()]),
    )?;
    let config = json!({ "preset": a.source.preset, "face_size": a.face_size, "z_near": a.z_near, "z_far": a.z_far });
    write_json(&pipeline::provenance(inputs, config), a.out.join("provenance.json"))?;
    println!("wrote 6 faces of {0}x{0} to {1}", a.face_size, a.out.display());
    Ok(())
}

#[derive(Args, Debug)]
pub struct RenderArgs {
    #[arg(long)]
    gbuffer: PathBuf,
    /// Prefiltered directory or equirectangular image.
    #[arg(long)]
    env: PathBuf,
    #[command(flatten)]
    trace: TraceArgs,
    /// Cube directory for world-space tracing, or `none`.
    #[arg(long, default_value = "none")]
    cubemap: String,
    #[arg(long)]
    out: PathBuf,
}

fn summarize(b: &RenderBundle, gb: &GBuffer, out: &Path) {
    println!(
        "mean occlusion {:.4}, mean composite {:.4} over {} pixels; wrote {}",
        masked_mean(&b.occlusion, &gb.mask),
        masked_mean(&b.composite, &gb.mask),
        gb.masked_count(),
        out.display()
    );
}

pub fn render(a: RenderArgs) -> Result<()> {
    let gb = load_gbuffer(&a.gbuffer)?;
    let env = load_env(&a.env)?;
    let cfg = a.trace.config(&gb.intrinsics)?;
    let cube_dir = (a.cubemap != "none").then(|| PathBuf::from(&a.cubemap));
    let cube = cube_dir.as_ref().map(CubemapBundle::load).transpose()?;
    let mut bundle = pipeline::render(&gb, &env, &cfg, cube.as_ref())?;
    check_bundle(&bundle)?;
    let inputs = hash_inputs(
        [a.gbuffer.as_path(), a.env.as_path()]
            .into_iter()
            .chain(cube_dir.as_deref()),
    )?;
    bundle.provenance = pipeline::provenance(inputs, json!({ "tracing": cfg, "cubemap": cube.is_some() }));
    bundle.save(&a.out, &gb)?;
    summarize(&bundle, &gb, &a.out);
    Ok(())
}

#[derive(Args, Debug)]
pub struct RelightArgs {
    #[arg(long)]
    gbuffer: PathBuf,
    /// Material maps (default: those of the G-buffer).
    #[arg(long)]
    materials: Option<PathBuf>,
    /// New lighting: prefiltered directory or equirectangular image.
    #[arg(long)]
    env: PathBuf,
    #[command(flatten)]
    trace: TraceArgs,
    /// Rescale each albedo channel so its masked mean matches this
    /// material directory before relighting.
    #[arg(long)]
    albedo_reference: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

fn rescale_albedo(m: &mut MaterialMaps, reference: &MaterialMaps, mask: &[bool]) -> Result<()> {
    if !m.albedo.same_size(&reference.albedo) {
        bail!(InputError("albedo reference has a different size".into()));
    }
    for c in 0..3 {
        let (mut num, mut den) = (0.0, 0.0);
        for (i, _) in mask.iter().enumerate().filter(|p| *p.1) {
            num += reference.albedo.data()[3 * i + c];
            den += m.albedo.data()[3 * i + c];
        }
        let s = if den > 0.0 { num / den } else { 1.0 };
        for px in m.albedo.data_mut().chunks_mut(3) {
            px[c] = (px[c] * s).clamp(0.0, 1.0);
        }
    }
    Ok(())
}

pub fn relight(a: RelightArgs) -> Result<()> {
    let gb = load_gbuffer(&a.gbuffer)?;
    let mut materials = match &a.materials {
        Some(d) => load_materials(d)?,
        None => gb.materials.clone(),
    };
    if let Some(r) = &a.albedo_reference {
        rescale_albedo(&mut materials, &load_materials(r)?, &gb.mask)?;
    }
    let env = load_env(&a.env)?;
    let cfg = a.trace.config(&gb.intrinsics)?;
    let mut bundle = relight_view(&gb, &materials, &env, &cfg)?;
    check_bundle(&bundle)?;
    let inputs = hash_inputs(
        [a.gbuffer.as_path(), a.env.as_path()]
            .into_iter()
            .chain(a.materials.as_deref())
            .chain(a.albedo_reference.as_deref()),
    )?;
    bundle.provenance = pipeline::provenance(
        inputs,
        json!({ "tracing": cfg, "albedo_rescaled": a.albedo_reference.is_some() }),
    );
    bundle.save(&a.out, &gb)?;
    summarize(&bundle, &gb, &a.out);
    Ok(())
}

#[derive(Args, Debug)]
pub struct OptimizeArgs {
    /// Geometry (and starting materials).
    #[arg(long)]
    gbuffer: PathBuf,
    /// Ground truth: one image (G-buffer pose), or a JSON manifest
    /// `{"views": [{"image": path, "pose": {...}}]}` with paths relative to it.
    #[arg(long)]
    gt: PathBuf,
    /// Starting lighting: prefiltered directory or equirectangular image.
    #[arg(long)]
    env_init: PathBuf,
    #[arg(long, default_value_t = 2000)]
    iters: usize,
    #[arg(long, value_enum, default_value = "off")]
    optimize_env: OnOff,
    #[arg(long, default_value_t = 0.05)]
    lr_initial: f64,
    #[arg(long, default_value_t = 0.005)]
    lr_final: f64,
    /// Iterations between indirect light refreshes.
    #[arg(long, default_value_t = 50)]
    refresh_every: usize,
    /// Start from uniform materials with this value in every channel.
    #[arg(long)]
    init_uniform: Option<f64>,
    /// Material directory to report albedo PSNR against.
    #[arg(long)]
    truth: Option<PathBuf>,
    #[command(flatten)]
    trace: TraceArgs,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Deserialize)]
struct GtManifest {
    views: Vec<GtEntry>,
}

#[derive(Deserialize)]
struct GtEntry {
    image: PathBuf,
    pose: Option<ViewPose>,
}

fn load_views(path: &Path, default_pose: ViewPose) -> Result<(Vec<GtView>, Vec<PathBuf>)> {
    if path.extension().and_then(|e| e.to_str()) != Some("json") {
        return Ok((
            vec![GtView {
                image: load_image(path)?,
                pose: default_pose,
            }],
            vec![path.to_path_buf()],
        ));
    }
    let m: GtManifest = gigi::gbuffer::io::read_json(path)?;
    if m.views.is_empty() {
        bail!(InputError(format!("{} lists no views", path.display())));
    }
    let base = path.parent().unwrap_or(Path::new("."));
    let mut views = Vec::new();
    let mut files = vec![path.to_path_buf()];
    for v in m.views {
        let p = base.join(&v.image);
        views.push(GtView {
            image: load_image(&p)?,
            pose: v.pose.unwrap_or(default_pose),
        });
        files.push(p);
    }
    Ok((views, files))
}

pub fn optimize(a: OptimizeArgs) -> Result<()> {
    let mut gb = load_gbuffer(&a.gbuffer)?;
    let (views, gt_files) = load_views(&a.gt, gb.pose)?;
    if let Some(v) = a.init_uniform {
        if !(0.0..=1.0).contains(&v) {
            bail!(InputError(format!("--init-uniform must lie in [0, 1], got {v}")));
        }
        gb = gb.with_materials(MaterialMaps::uniform(
            gb.width(),
            gb.height(),
            Material::new(DVec3::splat(v), v, v),
        ))?;
    }
    let env = load_env(&a.env_init)?;
    let tracing = a.trace.config(&gb.intrinsics)?;
    let cfg = OptimizeConfig {
        iterations: a.iters,
        lr_initial: a.lr_initial,
        lr_final: a.lr_final,
        optimize_env: a.optimize_env == OnOff::On,
        freeze_indirect_every: a.refresh_every,
        ..OptimizeConfig::default()
    };
    let result = optimize_materials(&gb, &views, &env, &tracing, &cfg)?;
    for r in &result.trace {
        if !r.loss.total.is_finite() {
            bail!(Invariant(format!("loss is not finite at iteration {}", r.iteration)));
        }
    }
    fs::create_dir_all(&a.out).with_context(|| format!("creating {}", a.out.display()))?;
    save_materials(&result.materials, &a.out, Some(&gb.intrinsics))?;
    result.save_trace_csv(a.out.join("loss.csv"))?;
    if let Some(e) = &result.env {
        store_map(e.radiance(), a.out.join("env.gigt"))?;
    }
    let inputs = hash_inputs(
        [a.gbuffer.as_path(), a.env_init.as_path()]
            .into_iter()
            .chain(gt_files.iter().map(PathBuf::as_path))
            .chain(a.truth.as_deref()),
    )?;
    let config = json!({ "optimize": cfg, "tracing": tracing, "init_uniform": a.init_uniform });
    write_json(&pipeline::provenance(inputs, config), a.out.join("provenance.json"))?;
    let last = result.trace.last().expect("trace has iterations + 1 rows");
    println!(
        "iterations {}: loss {:.6} -> {:.6} (color {:.6}, material tv {:.6}, light tv {:.6})",
        a.iters,
        result.trace[0].loss.total,
        last.loss.total,
        last.loss.color,
        last.loss.material_tv,
        last.loss.light_tv
    );
    if let Some(t) = &a.truth {
        let truth = load_materials(t)?;
        println!(
            "albedo psnr {}",
            fmt_db(albedo_psnr(&result.materials, &truth, &gb.mask))
        );
    }
    Ok(())
}

#[derive(Args, Debug)]
pub struct DiffArgs {
    #[arg(long)]
    a: PathBuf,
    #[arg(long)]
    b: PathBuf,
    /// Comma-separated subset of psnr, ssim, mae.
    #[arg(long, default_value = "psnr,ssim,mae")]
    metrics: String,
    /// Compare raw linear values instead of clamped, gamma-encoded ones.
    #[arg(long)]
    linear: bool,
}

fn fmt_db(v: f64) -> String {
    if v.is_infinite() {
        "inf".into()
    } else {
        format!("{v:.6}")
    }
}

pub fn diff(a: DiffArgs) -> Result<()> {
    let x = load_image(&a.a)?;
    let y = load_image(&a.b)?;
    let names: Vec<&str> = a.metrics.split(',').map(str::trim).filter(|s| !s.is_empty()).collect();
    if let Some(bad) = names.iter().find(|n| !["psnr", "ssim", "mae"].contains(n)) {
        bail!(InputError(format!(
            "unknown metric {bad:?} (expected psnr, ssim or mae)"
        )));
    }
    for n in names {
        let line = match n {
            "psnr" => fmt_db(metrics::psnr(&x, &y, a.linear)?),
            "ssim" => format!("{:.6}", metrics::ssim(&x, &y, a.linear)?),
            _ => {
                if a.linear {
                    format!("{:.6}", metrics::mae(&x, &y)?)
                } else {
                    let t = |m: &Map| m.map_values(metrics::tonemap_value);
                    format!("{:.6}", metrics::mae(&t(&x), &t(&y))?)
                }
            }
        };
        println!("{n} {line}");
    }
    Ok(())
}

#[derive(Args, Debug)]
pub struct ExportArgs {
    /// Map to export (.gigt or .pfm), 1 or 3 channels.
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// gamma22, reinhard or none.
    #[arg(long, value_parser = parse_tonemap, default_value = "gamma22")]
    tonemap: Tonemap,
}

pub fn export(a: ExportArgs) -> Result<()> {
    let map = match a.input.extension().and_then(|e| e.to_str()) {
        Some("pfm") => load_image(&a.input)?,
        _ => gigi::gbuffer::io::load_map(&a.input)?,
    };
    export_png(&map, &a.out, a.tonemap)?;
    println!("wrote {}", a.out.display());
    Ok(())
}
