//! On-disk prefiltered environment sets.
//!
//! A cache directory holds `env.gigt`, `irradiance.gigt`, `specular_<l>.gigt`
//! for every mip, `lut.gigt` and `manifest.json`. Values are stored as `f32`.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{BrdfLut, EnvMap, EnvironmentSet, SpecularChain};
use crate::error::{Error, Result};
use crate::gbuffer::io::{load_map, read_json, store_with_sidecar, write_json, Tensor};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CacheManifest {
    pub mip_count: usize,
    pub lut_size: usize,
    /// SHA-256 of the source map's GIGT encoding.
    pub source_hash: String,
    pub irradiance_height: usize,
}

pub fn env_hash(env: &EnvMap) -> String {
    hex::encode(Sha256::digest(Tensor::from_map(env.radiance()).to_bytes()))
}

impl EnvironmentSet {
    pub fn save(&self, dir: impl AsRef<Path>) -> Result<CacheManifest> {
        let dir = dir.as_ref();
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        store_with_sidecar(self.env.radiance(), dir, "env", "env", None)?;
        store_with_sidecar(self.irradiance.radiance(), dir, "irradiance", "irradiance", None)?;
        for (l, mip) in self.specular.mips.iter().enumerate() {
            store_with_sidecar(mip.radiance(), dir, &format!("specular_{l}"), "specular", None)?;
        }
        store_with_sidecar(&self.lut.table, dir, "lut", "brdf_lut", None)?;
        let manifest = CacheManifest {
            mip_count: self.specular.mip_count(),
            lut_size: self.lut.size(),
            source_hash: env_hash(&self.env),
            irradiance_height: self.irradiance.height(),
        };
        write_json(&manifest, dir.join("manifest.json"))?;
        Ok(manifest)
    }

    pub fn load(dir: impl AsRef<Path>) -> Result<Self> {
        let dir = dir.as_ref();
        let manifest: CacheManifest = read_json(dir.join("manifest.json"))?;
        let env = EnvMap::new(load_map(dir.join("env.gigt"))?)?;
        let mips = (0..manifest.mip_count)
            .map(|l| EnvMap::new(load_map(dir.join(format!("specular_{l}.gigt")))?))
            .collect::<Result<Vec<_>>>()?;
        let set = EnvironmentSet {
            env,
            irradiance: EnvMap::new(load_map(dir.join("irradiance.gigt"))?)?,
            specular: SpecularChain { mips },
            lut: BrdfLut::from_map(load_map(dir.join("lut.gigt"))?)?,
        };
        set.validate()?;
        Ok(set)
    }
}

/// Loads the set from `dir` when its manifest matches `env` and the
/// requested sizes; otherwise prefilters and writes it. The flag reports
/// whether anything was recomputed.
pub fn prefilter_cached(
    env: &EnvMap,
    irradiance_height: usize,
    mip_count: usize,
    lut_size: usize,
    dir: impl AsRef<Path>,
) -> Result<(EnvironmentSet, bool)> {
    let dir = dir.as_ref();
    let wanted = CacheManifest {
        mip_count,
        lut_size,
        source_hash: env_hash(env),
        irradiance_height,
    };
    if let Ok(found) = read_json::<CacheManifest>(dir.join("manifest.json")) {
        if found == wanted {
            if let Ok(set) = EnvironmentSet::load(dir) {
                return Ok((set, false));
            }
        }
    }
    let set = EnvironmentSet::build(env.clone(), irradiance_height, mip_count, lut_size)?;
    set.save(dir)?;
    // Reload so callers see the stored precision either way.
    Ok((EnvironmentSet::load(dir)?, true))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::math::DVec3;

    #[test]
    fn cache_hit_skips_work_and_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let env = EnvMap::from_fn(8, |d| DVec3::new(1.0, 2.0 + d.z, 0.5)).unwrap();
        let env = EnvMap::new(Tensor::from_map(env.radiance()).to_map()).unwrap();
        let (a, fresh) = prefilter_cached(&env, 4, 3, 16, dir.path()).unwrap();
        assert!(fresh);
        let (b, fresh) = prefilter_cached(&env, 4, 3, 16, dir.path()).unwrap();
        assert!(!fresh);
        assert_eq!(a, b);
        let (_, fresh) = prefilter_cached(&env, 4, 4, 16, dir.path()).unwrap();
        assert!(fresh);
        let m: CacheManifest = read_json(dir.path().join("manifest.json")).unwrap();
        assert_eq!(m.mip_count, 4);
        assert_eq!(m.source_hash.len(), 64);
    }
}
