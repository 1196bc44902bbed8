//! Binary scene files.
//!
//! Little-endian layout: `"FOBJ"`, `u32` version (1), `u32` point count,
//! `u32` feature dimension (0 when absent), then xyz as `f32` triples, rgb as
//! `u8` triples, the feature block as `f32`, and instance ids as `i32`.
//!
//! An optional UTF-8 sidecar `<file>.meta` carries `key=value` lines
//! (`scene_id`, `provenance`, and anything else a producer wants to keep).

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use super::Scene;
use crate::error::{Error, Result};

pub const SCENE_MAGIC: &[u8; 4] = b"FOBJ";
pub const SCENE_VERSION: u32 = 1;

pub fn encode_scene(scene: &Scene) -> Result<Vec<u8>> {
    scene.validate()?;
    let n = scene.len();
    let mut buf = Vec::with_capacity(16 + n * (12 + 3 + 4 + 4 * scene.feat_dim));
    buf.extend_from_slice(SCENE_MAGIC);
    buf.extend_from_slice(&SCENE_VERSION.to_le_bytes());
    buf.extend_from_slice(&(n as u32).to_le_bytes());
    buf.extend_from_slice(&(scene.feat_dim as u32).to_le_bytes());
    for p in &scene.points {
        for c in p {
            buf.extend_from_slice(&c.to_le_bytes());
        }
    }
    for c in &scene.colors {
        buf.extend_from_slice(c);
    }
    for f in &scene.features {
        buf.extend_from_slice(&f.to_le_bytes());
    }
    for id in &scene.instances {
        buf.extend_from_slice(&id.to_le_bytes());
    }
    Ok(buf)
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.bytes.len())
            .ok_or_else(|| {
                Error::format(format!(
                    "truncated scene file: need {n} bytes for {what} at offset {}, have {}",
                    self.pos,
                    self.bytes.len() - self.pos
                ))
            })?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().unwrap()))
    }
}

pub fn decode_scene(bytes: &[u8], scene_id: &str) -> Result<Scene> {
    let mut r = Reader { bytes, pos: 0 };
    let magic = r.take(4, "magic")?;
    if magic != SCENE_MAGIC {
        return Err(Error::format("bad magic"));
    }
    let version = r.u32("version")?;
    if version != SCENE_VERSION {
        return Err(Error::format(format!("unsupported scene version {version}")));
    }
    let n = r.u32("point count")? as usize;
    let feat_dim = r.u32("feature dim")? as usize;

    let xyz = r.take(n * 12, "xyz block")?;
    let points = xyz
        .chunks_exact(12)
        .map(|c| {
            [
                f32::from_le_bytes(c[0..4].try_into().unwrap()),
                f32::from_le_bytes(c[4..8].try_into().unwrap()),
                f32::from_le_bytes(c[8..12].try_into().unwrap()),
            ]
        })
        .collect();
    let rgb = r.take(n * 3, "rgb block")?;
    let colors = rgb.chunks_exact(3).map(|c| [c[0], c[1], c[2]]).collect();
    let fb = r.take(n * feat_dim * 4, "feature block")?;
    let features = fb
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
        .collect();
    let ib = r.take(n * 4, "instance block")?;
    let instances = ib
        .chunks_exact(4)
        .map(|c| i32::from_le_bytes(c.try_into().unwrap()))
        .collect();
    if r.pos != bytes.len() {
        return Err(Error::format(format!(
            "{} trailing bytes after instance block",
            bytes.len() - r.pos
        )));
    }
    let scene = Scene {
        scene_id: scene_id.to_string(),
        points,
        colors,
        feat_dim,
        features,
        instances,
    };
    scene.validate()?;
    Ok(scene)
}

pub fn meta_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".meta");
    PathBuf::from(s)
}

/// Writes the scene file and a sidecar with `scene_id` plus `extra` keys.
pub fn save_scene_with_meta(scene: &Scene, path: &Path, extra: &BTreeMap<String, String>) -> Result<()> {
    write_atomic(path, &encode_scene(scene)?)?;
    let mut meta = BTreeMap::new();
    meta.insert("scene_id".to_string(), scene.scene_id.clone());
    meta.extend(extra.iter().map(|(k, v)| (k.clone(), v.clone())));
    let text: String = meta.iter().map(|(k, v)| format!("{k}={v}\n")).collect();
    write_atomic(&meta_path(path), text.as_bytes())
}

pub fn save_scene(scene: &Scene, path: &Path) -> Result<()> {
    save_scene_with_meta(scene, path, &BTreeMap::new())
}

pub fn read_meta(path: &Path) -> Result<BTreeMap<String, String>> {
    let mp = meta_path(path);
    if !mp.exists() {
        return Ok(BTreeMap::new());
    }
    let text = fs::read_to_string(&mp)?;
    let mut out = BTreeMap::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::format(format!("{}:{}: expected key=value", mp.display(), lineno + 1)))?;
        out.insert(k.trim().to_string(), v.trim().to_string());
    }
    Ok(out)
}

/// Loads a scene; its id comes from the sidecar when present, otherwise
/// from the file stem.
pub fn load_scene(path: &Path) -> Result<Scene> {
    let bytes = fs::read(path)?;
    let meta = read_meta(path)?;
    let id = meta.get("scene_id").cloned().unwrap_or_else(|| {
        path.file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default()
    });
    decode_scene(&bytes, &id).map_err(|e| match e {
        Error::Format(m) => Error::Format(format!("{}: {m}", path.display())),
        other => other,
    })
}

/// Scene files (`*.fobj`) in a directory, sorted by name.
pub fn list_scene_files(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut out: Vec<PathBuf> = fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|e| e == "fobj"))
        .collect();
    out.sort();
    Ok(out)
}

pub(crate) fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}
