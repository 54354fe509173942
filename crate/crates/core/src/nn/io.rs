//! Parameter files.
//!
//! Layout, little-endian:
//!
//! ```text
//! b"BPNN"  u32 version  [u8; 32] fingerprint  u32 array count
//! repeated: u64 length, length × f32
//! ```
//!
//! The fingerprint is the SHA-256 of the JSON layer graph, so a file only
//! loads into the architecture that wrote it.

use std::fs;
use std::path::Path;

use sha2::{Digest, Sha256};

use super::{NetConfig, Network, NnError, Result, Scalar, Tensor};

const MAGIC: &[u8; 4] = b"BPNN";
const VERSION: u32 = 1;

pub fn fingerprint(config: &NetConfig) -> Result<[u8; 32]> {
    let specs = config.layer_specs()?;
    let text = serde_json::to_string(&(config.input, &specs)).map_err(|e| NnError::Format(e.to_string()))?;
    Ok(Sha256::digest(text.as_bytes()).into())
}

pub fn write_params<T: Scalar>(net: &Network<T>) -> Result<Vec<u8>> {
    let mut out = Vec::with_capacity(48 + 4 * net.parameter_count());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&fingerprint(&net.config)?);
    out.extend_from_slice(&(net.params.len() as u32).to_le_bytes());
    for p in &net.params {
        out.extend_from_slice(&(p.len() as u64).to_le_bytes());
        for v in &p.data {
            out.extend_from_slice(&(v.to_f64() as f32).to_le_bytes());
        }
    }
    Ok(out)
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        let end = end.ok_or_else(|| NnError::Format(format!("file truncated at byte {}", self.pos)))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }
}

/// Parses a parameter file for the architecture `config`.
pub fn read_params<T: Scalar>(config: &NetConfig, bytes: &[u8]) -> Result<Network<T>> {
    let mut r = Reader { bytes, pos: 0 };
    if r.take(4)? != MAGIC {
        return Err(NnError::Format("missing magic bytes".into()));
    }
    let version = r.u32()?;
    if version != VERSION {
        return Err(NnError::Format(format!("unsupported version {version}")));
    }
    if r.take(32)? != fingerprint(config)? {
        return Err(NnError::Fingerprint);
    }
    let template = Network::<T>::new(config.clone(), 0)?;
    let count = r.u32()? as usize;
    if count != template.params.len() {
        return Err(NnError::Format(format!("expected {} arrays, found {count}", template.params.len())));
    }
    let mut params = Vec::with_capacity(count);
    for t in &template.params {
        let n = r.u64()? as usize;
        if n != t.len() {
            return Err(NnError::Format(format!("array of {n} values where {} are expected", t.len())));
        }
        let raw = r.take(4 * n)?;
        let data = raw
            .chunks_exact(4)
            .map(|b| T::from_f64(f32::from_le_bytes(b.try_into().expect("4 bytes")) as f64))
            .collect();
        params.push(Tensor {
            shape: t.shape.clone(),
            data,
        });
    }
    if r.pos != bytes.len() {
        return Err(NnError::Format("trailing bytes after the last array".into()));
    }
    Ok(Network {
        config: config.clone(),
        params,
    })
}

pub fn save_params<T: Scalar>(net: &Network<T>, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, write_params(net)?).map_err(|source| NnError::Io {
        path: path.display().to_string(),
        source,
    })
}

pub fn load_params<T: Scalar>(config: &NetConfig, path: impl AsRef<Path>) -> Result<Network<T>> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|source| NnError::Io {
        path: path.display().to_string(),
        source,
    })?;
    read_params(config, &bytes)
}
