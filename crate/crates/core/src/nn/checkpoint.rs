//! Binary weight files: magic, version, a text meta block, a tensor manifest
//! and little-endian f32 weights.

use super::Params;
use crate::error::{Error, Result};
use crate::tensor::{Mat, Real};

pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TensorEntry {
    pub name: String,
    pub rows: usize,
    pub cols: usize,
}

#[derive(Clone, Debug)]
pub struct Checkpoint {
    pub meta: String,
    pub manifest: Vec<TensorEntry>,
    pub weights: Vec<f32>,
}

pub fn encode_checkpoint<T: Real>(magic: &[u8; 4], meta: &str, params: &impl Params<T>) -> Vec<u8> {
    let mut manifest = Vec::new();
    let mut weights: Vec<f32> = Vec::new();
    params.visit(&mut |name, m: &Mat<T>| {
        manifest.push(TensorEntry {
            name: name.to_string(),
            rows: m.rows,
            cols: m.cols,
        });
        weights.extend(m.data.iter().map(|v| v.f64() as f32));
    });
    let mut out = Vec::new();
    out.extend_from_slice(magic);
    out.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
    put_str(&mut out, meta);
    out.extend_from_slice(&(manifest.len() as u32).to_le_bytes());
    for e in &manifest {
        put_str(&mut out, &e.name);
        out.extend_from_slice(&(e.rows as u32).to_le_bytes());
        out.extend_from_slice(&(e.cols as u32).to_le_bytes());
    }
    for w in weights {
        out.extend_from_slice(&w.to_le_bytes());
    }
    out
}

fn put_str(out: &mut Vec<u8>, s: &str) {
    out.extend_from_slice(&(s.len() as u32).to_le_bytes());
    out.extend_from_slice(s.as_bytes());
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl Reader<'_> {
    fn take(&mut self, n: usize) -> Result<&[u8]> {
        if self.pos + n > self.bytes.len() {
            return Err(Error::format(format!("truncated checkpoint at byte {}", self.pos)));
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn string(&mut self) -> Result<String> {
        let n = self.u32()? as usize;
        String::from_utf8(self.take(n)?.to_vec()).map_err(|_| Error::format("checkpoint string is not UTF-8"))
    }
}

pub fn decode_checkpoint(bytes: &[u8], magic: &[u8; 4]) -> Result<Checkpoint> {
    let mut r = Reader { bytes, pos: 0 };
    if r.take(4)? != magic {
        return Err(Error::format("bad magic"));
    }
    let version = r.u32()?;
    if version != CHECKPOINT_VERSION {
        return Err(Error::format(format!("unsupported checkpoint version {version}")));
    }
    let meta = r.string()?;
    let n = r.u32()? as usize;
    let mut manifest = Vec::with_capacity(n.min(1024));
    let mut total = 0usize;
    for _ in 0..n {
        let name = r.string()?;
        let rows = r.u32()? as usize;
        let cols = r.u32()? as usize;
        total += rows * cols;
        manifest.push(TensorEntry { name, rows, cols });
    }
    let raw = r.take(total * 4)?;
    let weights = raw
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
        .collect();
    if r.pos != bytes.len() {
        return Err(Error::format("trailing bytes after checkpoint weights"));
    }
    Ok(Checkpoint {
        meta,
        manifest,
        weights,
    })
}

impl Checkpoint {
    /// Copies weights into `params`, which must have the same manifest.
    pub fn load_into<T: Real>(&self, params: &mut impl Params<T>) -> Result<()> {
        let mut idx = 0usize;
        let mut off = 0usize;
        let mut err = None;
        params.visit_mut(&mut |name, m| {
            if err.is_some() {
                return;
            }
            match self.manifest.get(idx) {
                Some(e) if e.name == name && e.rows == m.rows && e.cols == m.cols => {
                    for (d, w) in m.data.iter_mut().zip(&self.weights[off..off + e.rows * e.cols]) {
                        *d = T::c(*w as f64);
                    }
                    off += e.rows * e.cols;
                }
                other => {
                    err = Some(Error::format(format!(
                        "checkpoint manifest mismatch at tensor {idx} ({name} {}x{}): found {other:?}",
                        m.rows, m.cols
                    )))
                }
            }
            idx += 1;
        });
        if let Some(e) = err {
            return Err(e);
        }
        if idx != self.manifest.len() {
            return Err(Error::format("checkpoint has extra tensors"));
        }
        Ok(())
    }

    /// Value of `key` in the `key=value` meta block.
    pub fn meta_value(&self, key: &str) -> Option<&str> {
        self.meta.lines().find_map(|l| l.strip_prefix(key)?.strip_prefix('='))
    }

    pub fn meta_usize(&self, key: &str) -> Result<usize> {
        self.meta_value(key)
            .and_then(|v| v.parse().ok())
            .ok_or_else(|| Error::format(format!("checkpoint meta lacks integer `{key}`")))
    }
}
