//! Tensor files ("GIGT v1"), JSON sidecars, PFM import and G-buffer folders.
//!
//! GIGT layout, all little-endian:
//!
//! ```text
//! offset 0   b"GIGT"
//! offset 4   u32 height
//! offset 8   u32 width
//! offset 12  u32 channels
//! offset 16  height * width * channels f32, row-major, channels interleaved
//! ```

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{CameraIntrinsics, GBuffer, MaterialMaps, ViewPose};
use crate::error::{Error, Result};
use crate::map::Map;

pub const MAGIC: &[u8; 4] = b"GIGT";
const HEADER_LEN: usize = 16;

/// Raw `f32` tensor exactly as stored on disk.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    pub height: usize,
    pub width: usize,
    pub channels: usize,
    pub data: Vec<f32>,
}

impl Tensor {
    pub fn from_map(map: &Map) -> Tensor {
        Tensor {
            height: map.height(),
            width: map.width(),
            channels: map.channels(),
            data: map.data().iter().map(|&v| v as f32).collect(),
        }
    }

    pub fn to_map(&self) -> Map {
        Map::from_vec(
            self.width,
            self.height,
            self.channels,
            self.data.iter().map(|&v| f64::from(v)).collect(),
        )
        .expect("tensor length matches its header")
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(HEADER_LEN + 4 * self.data.len());
        out.extend_from_slice(MAGIC);
        for d in [self.height, self.width, self.channels] {
            out.extend_from_slice(&(d as u32).to_le_bytes());
        }
        for v in &self.data {
            out.extend_from_slice(&v.to_bits().to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Tensor> {
        let format = |offset: usize, reason: String| Error::Format {
            offset: offset as u64,
            reason,
        };
        if bytes.len() < 4 || &bytes[..4] != MAGIC {
            return Err(format(0, "bad magic (expected \"GIGT\")".into()));
        }
        if bytes.len() < HEADER_LEN {
            return Err(format(bytes.len(), "truncated header".into()));
        }
        let dim = |i: usize| u32::from_le_bytes(bytes[4 + 4 * i..8 + 4 * i].try_into().unwrap()) as usize;
        let (height, width, channels) = (dim(0), dim(1), dim(2));
        let payload = height
            .checked_mul(width)
            .and_then(|n| n.checked_mul(channels))
            .and_then(|n| n.checked_mul(4))
            .ok_or_else(|| format(4, format!("dimensions {height}x{width}x{channels} overflow")))?;
        let available = bytes.len() - HEADER_LEN;
        if available < payload {
            return Err(format(
                bytes.len(),
                format!("truncated payload: {available} of {payload} bytes"),
            ));
        }
        if available > payload {
            return Err(format(
                HEADER_LEN + payload,
                format!("{} trailing bytes", available - payload),
            ));
        }
        let data = bytes[HEADER_LEN..]
            .chunks_exact(4)
            .map(|c| f32::from_bits(u32::from_le_bytes(c.try_into().unwrap())))
            .collect();
        Ok(Tensor {
            height,
            width,
            channels,
            data,
        })
    }
}

pub fn store_tensor(tensor: &Tensor, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, tensor.to_bytes()).map_err(|e| Error::io(path, e))
}

pub fn load_tensor(path: impl AsRef<Path>) -> Result<Tensor> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    Tensor::from_bytes(&bytes)
}

pub fn store_map(map: &Map, path: impl AsRef<Path>) -> Result<()> {
    store_tensor(&Tensor::from_map(map), path)
}

pub fn load_map(path: impl AsRef<Path>) -> Result<Map> {
    Ok(load_tensor(path)?.to_map())
}

/// `<name>.json` next to a tensor file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sidecar {
    pub role: String,
    #[serde(flatten, skip_serializing_if = "Option::is_none")]
    pub intrinsics: Option<CameraIntrinsics>,
}

pub fn sidecar_path(tensor_path: &Path) -> PathBuf {
    tensor_path.with_extension("json")
}

pub fn write_json<T: Serialize>(value: &T, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let text = serde_json::to_string_pretty(value).map_err(|e| Error::json(path, e))?;
    fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: impl AsRef<Path>) -> Result<T> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::json(path, e))
}

/// Writes `map` as `<dir>/<name>.gigt` plus its sidecar.
pub fn store_with_sidecar(
    map: &Map,
    dir: &Path,
    name: &str,
    role: &str,
    intrinsics: Option<&CameraIntrinsics>,
) -> Result<PathBuf> {
    let path = dir.join(format!("{name}.gigt"));
    store_map(map, &path)?;
    write_json(
        &Sidecar {
            role: role.to_string(),
            intrinsics: intrinsics.copied(),
        },
        sidecar_path(&path),
    )?;
    Ok(path)
}

/// Reads a color PFM ("PF"). Rows are stored bottom-first; the returned map
/// is top-first like every other map.
pub fn load_pfm(path: impl AsRef<Path>) -> Result<Map> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    parse_pfm(&bytes)
}

pub fn parse_pfm(bytes: &[u8]) -> Result<Map> {
    let format = |offset: usize, reason: &str| Error::Format {
        offset: offset as u64,
        reason: reason.to_string(),
    };
    // Three whitespace-terminated header tokens after the magic line.
    let mut pos = 0;
    let token = |pos: &mut usize| -> Result<String> {
        while *pos < bytes.len() && bytes[*pos].is_ascii_whitespace() {
            *pos += 1;
        }
        let start = *pos;
        while *pos < bytes.len() && !bytes[*pos].is_ascii_whitespace() {
            *pos += 1;
        }
        if start == *pos {
            return Err(format(start, "truncated PFM header"));
        }
        Ok(String::from_utf8_lossy(&bytes[start..*pos]).into_owned())
    };
    let magic = token(&mut pos)?;
    let channels = match magic.as_str() {
        "PF" => 3,
        "Pf" => 1,
        _ => return Err(format(0, "bad PFM magic")),
    };
    let width: usize = token(&mut pos)?.parse().map_err(|_| format(pos, "bad PFM width"))?;
    let height: usize = token(&mut pos)?.parse().map_err(|_| format(pos, "bad PFM height"))?;
    let scale: f64 = token(&mut pos)?.parse().map_err(|_| format(pos, "bad PFM scale"))?;
    // Exactly one whitespace byte separates the header from the payload.
    pos += 1;
    let little = scale < 0.0;
    let n = width
        .checked_mul(height)
        .and_then(|v| v.checked_mul(channels))
        .ok_or_else(|| format(3, "PFM dimensions overflow"))?;
    if bytes.len() < pos + 4 * n {
        return Err(format(bytes.len(), "truncated PFM payload"));
    }
    let mut map = Map::new(width, height, 3);
    for row in 0..height {
        let y = height - 1 - row;
        for x in 0..width {
            for c in 0..3 {
                let src = if channels == 3 { c } else { 0 };
                let o = pos + 4 * ((row * width + x) * channels + src);
                let raw: [u8; 4] = bytes[o..o + 4].try_into().unwrap();
                let v = if little {
                    f32::from_le_bytes(raw)
                } else {
                    f32::from_be_bytes(raw)
                };
                map.set(x, y, c, f64::from(v));
            }
        }
    }
    Ok(map)
}

/// Writes a little-endian color PFM.
pub fn store_pfm(map: &Map, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    if map.channels() != 3 {
        return Err(Error::Dimensions("PFM export needs 3 channels".into()));
    }
    let mut out = format!("PF\n{} {}\n-1.0\n", map.width(), map.height()).into_bytes();
    for y in (0..map.height()).rev() {
        for x in 0..map.width() {
            for &v in map.pixel(x, y) {
                out.extend_from_slice(&(v as f32).to_le_bytes());
            }
        }
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

/// Loads a 3-channel image from `.pfm` or `.gigt`, chosen by extension.
pub fn load_image(path: impl AsRef<Path>) -> Result<Map> {
    let path = path.as_ref();
    match path.extension().and_then(|e| e.to_str()) {
        Some("pfm") | Some("PFM") => load_pfm(path),
        _ => load_map(path),
    }
}

pub const GBUFFER_FILES: [&str; 5] = ["depth", "normal", "albedo", "roughness", "metallic"];

/// Writes a G-buffer as five GIGT files with sidecars plus `pose.json`.
/// Coverage is encoded in the depth map: unmasked pixels store depth 0.
pub fn save_gbuffer(gb: &GBuffer, dir: impl AsRef<Path>) -> Result<()> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut depth = gb.depth.clone();
    for (i, &m) in gb.mask.iter().enumerate() {
        if !m {
            depth.data_mut()[i] = 0.0;
        }
    }
    let intr = Some(&gb.intrinsics);
    store_with_sidecar(&depth, dir, "depth", "depth", intr)?;
    store_with_sidecar(&gb.normal, dir, "normal", "normal", intr)?;
    save_materials(&gb.materials, dir, intr)?;
    write_json(&gb.pose, dir.join("pose.json"))
}

pub fn save_materials(m: &MaterialMaps, dir: impl AsRef<Path>, intr: Option<&CameraIntrinsics>) -> Result<()> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    store_with_sidecar(&m.albedo, dir, "albedo", "albedo", intr)?;
    store_with_sidecar(&m.roughness, dir, "roughness", "roughness", intr)?;
    store_with_sidecar(&m.metallic, dir, "metallic", "metallic", intr)?;
    Ok(())
}

pub fn load_materials(dir: impl AsRef<Path>) -> Result<MaterialMaps> {
    let dir = dir.as_ref();
    let m = MaterialMaps {
        albedo: load_map(dir.join("albedo.gigt"))?,
        roughness: load_map(dir.join("roughness.gigt"))?,
        metallic: load_map(dir.join("metallic.gigt"))?,
    };
    m.validate()?;
    Ok(m)
}

pub fn load_gbuffer(dir: impl AsRef<Path>) -> Result<GBuffer> {
    let dir = dir.as_ref();
    let depth_path = dir.join("depth.gigt");
    let sidecar: Sidecar = read_json(sidecar_path(&depth_path))?;
    let intrinsics = sidecar
        .intrinsics
        .ok_or_else(|| Error::Config(format!("{} lacks camera intrinsics", depth_path.display())))?;
    let depth = load_map(&depth_path)?;
    let mask = depth.data().iter().map(|&z| z > 0.0).collect();
    let pose_path = dir.join("pose.json");
    let pose = if pose_path.exists() {
        read_json(&pose_path)?
    } else {
        ViewPose::IDENTITY
    };
    let gb = GBuffer {
        depth,
        normal: load_map(dir.join("normal.gigt"))?,
        materials: load_materials(dir)?,
        mask,
        intrinsics,
        pose,
    };
    gb.validate()?;
    Ok(gb)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_tensor_round_trips_bitwise() {
        let t = Tensor {
            height: 2,
            width: 2,
            channels: 3,
            data: (0..12).map(|v| v as f32).collect(),
        };
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("t.gigt");
        store_tensor(&t, &p).unwrap();
        let back = load_tensor(&p).unwrap();
        assert_eq!(back.to_bytes(), t.to_bytes());
        assert_eq!(fs::read(&p).unwrap().len(), 16 + 48);
    }

    #[test]
    fn nan_payload_preserved() {
        let nan = f32::from_bits(0x7fc0_1234);
        let t = Tensor {
            height: 1,
            width: 1,
            channels: 1,
            data: vec![nan],
        };
        let back = Tensor::from_bytes(&t.to_bytes()).unwrap();
        assert_eq!(back.data[0].to_bits(), 0x7fc0_1234);
    }

    #[test]
    fn bad_magic_reports_offset_zero() {
        let mut bytes = Tensor {
            height: 1,
            width: 1,
            channels: 1,
            data: vec![1.0],
        }
        .to_bytes();
        bytes[3] = b'X';
        match Tensor::from_bytes(&bytes) {
            Err(Error::Format { offset: 0, .. }) => {}
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn truncated_and_overflowing_headers() {
        let bytes = Tensor {
            height: 2,
            width: 2,
            channels: 1,
            data: vec![1.0; 4],
        }
        .to_bytes();
        match Tensor::from_bytes(&bytes[..bytes.len() - 1]) {
            Err(Error::Format { offset, .. }) => assert_eq!(offset as usize, bytes.len() - 1),
            other => panic!("{other:?}"),
        }
        assert!(matches!(
            Tensor::from_bytes(&bytes[..10]),
            Err(Error::Format { offset: 10, .. })
        ));
        let mut huge = b"GIGT".to_vec();
        for _ in 0..3 {
            huge.extend_from_slice(&u32::MAX.to_le_bytes());
        }
        #[cfg(target_pointer_width = "64")]
        {
            // 2^96 bytes does not fit in usize.
            assert!(matches!(
                Tensor::from_bytes(&huge),
                Err(Error::Format { offset: 4, .. })
            ));
        }
    }

    #[test]
    fn pfm_rows_are_flipped() {
        let map = Map::from_fn(3, 2, 3, |x, y, p| {
            p[0] = x as f64;
            p[1] = y as f64;
            p[2] = 0.5;
        });
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("e.pfm");
        store_pfm(&map, &p).unwrap();
        let raw = fs::read(&p).unwrap();
        assert!(raw.starts_with(b"PF\n3 2\n-1.0\n"));
        // First stored pixel is the bottom-left one.
        let first = f32::from_le_bytes(raw[12 + 4..12 + 8].try_into().unwrap());
        assert_eq!(first, 1.0);
        assert_eq!(load_pfm(&p).unwrap(), map);
    }

    #[test]
    fn sidecar_schema() {
        let intr = CameraIntrinsics::new(10.0, 10.0, 4.0, 4.0, 8, 8, 0.1, 5.0).unwrap();
        let s = Sidecar {
            role: "depth".into(),
            intrinsics: Some(intr),
        };
        let v: serde_json::Value = serde_json::to_value(&s).unwrap();
        for key in ["role", "fx", "fy", "cx", "cy", "width", "height", "z_near", "z_far"] {
            assert!(v.get(key).is_some(), "missing {key}");
        }
        let env = serde_json::to_value(Sidecar {
            role: "env".into(),
            intrinsics: None,
        })
        .unwrap();
        assert_eq!(env, serde_json::json!({"role": "env"}));
        let back: Sidecar = serde_json::from_value(v).unwrap();
        assert_eq!(back, s);
    }
}
