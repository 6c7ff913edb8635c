//! Binary parameter checkpoints.
//!
//! Layout (all integers little-endian):
//!
//! ```text
//! magic        8 bytes   "IPPTNSR\0"
//! version      u32       1
//! meta_len     u32       byte length of the metadata block
//! metadata     meta_len  UTF-8, one `key=value` per line
//! count        u32       number of tensors
//! manifest     count x { name_len u32, name bytes, ndim u32, dims u64 x ndim }
//! data         for each tensor in manifest order: numel x f64 (IEEE-754 LE)
//! ```

use std::io::{Read, Write};

use crate::error::{Result, TensorError};
use crate::params::ParamStore;
use crate::tensor::Tensor;

pub const MAGIC: &[u8; 8] = b"IPPTNSR\0";
pub const VERSION: u32 = 1;

/// Key/value pairs stored alongside the tensors.
pub type Metadata = Vec<(String, String)>;

pub fn write_checkpoint<W: Write>(w: &mut W, store: &ParamStore, meta: &Metadata) -> Result<()> {
    w.write_all(MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    let mut text = String::new();
    for (k, v) in meta {
        if k.contains(['=', '\n']) || v.contains('\n') {
            return Err(TensorError::Checkpoint(format!("metadata entry {k:?} is not representable")));
        }
        text.push_str(k);
        text.push('=');
        text.push_str(v);
        text.push('\n');
    }
    w.write_all(&(text.len() as u32).to_le_bytes())?;
    w.write_all(text.as_bytes())?;
    w.write_all(&(store.len() as u32).to_le_bytes())?;
    for id in store.ids() {
        let name = store.name(id).as_bytes();
        w.write_all(&(name.len() as u32).to_le_bytes())?;
        w.write_all(name)?;
        let shape = store.value(id).shape();
        w.write_all(&(shape.len() as u32).to_le_bytes())?;
        for &d in shape {
            w.write_all(&(d as u64).to_le_bytes())?;
        }
    }
    for id in store.ids() {
        for x in store.value(id).data() {
            w.write_all(&x.to_le_bytes())?;
        }
    }
    Ok(())
}

fn read_u32<R: Read>(r: &mut R) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn read_u64<R: Read>(r: &mut R) -> Result<u64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(u64::from_le_bytes(b))
}

pub fn read_checkpoint<R: Read>(r: &mut R) -> Result<(ParamStore, Metadata)> {
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(TensorError::Checkpoint("bad magic".into()));
    }
    let version = read_u32(r)?;
    if version != VERSION {
        return Err(TensorError::Checkpoint(format!("unsupported version {version}")));
    }
    let meta_len = read_u32(r)? as usize;
    let mut meta_bytes = vec![0u8; meta_len];
    r.read_exact(&mut meta_bytes)?;
    let text = String::from_utf8(meta_bytes)
        .map_err(|_| TensorError::Checkpoint("metadata is not UTF-8".into()))?;
    let meta = text
        .lines()
        .map(|line| {
            line.split_once('=')
                .map(|(k, v)| (k.to_string(), v.to_string()))
                .ok_or_else(|| TensorError::Checkpoint(format!("malformed metadata line {line:?}")))
        })
        .collect::<Result<Metadata>>()?;
    let count = read_u32(r)? as usize;
    let mut manifest = Vec::with_capacity(count);
    for _ in 0..count {
        let len = read_u32(r)? as usize;
        let mut name = vec![0u8; len];
        r.read_exact(&mut name)?;
        let name = String::from_utf8(name)
            .map_err(|_| TensorError::Checkpoint("tensor name is not UTF-8".into()))?;
        let ndim = read_u32(r)? as usize;
        let shape = (0..ndim)
            .map(|_| read_u64(r).map(|d| d as usize))
            .collect::<Result<Vec<_>>>()?;
        manifest.push((name, shape));
    }
    let mut store = ParamStore::new();
    for (name, shape) in manifest {
        let n: usize = shape.iter().product();
        let mut data = Vec::with_capacity(n);
        for _ in 0..n {
            let mut b = [0u8; 8];
            r.read_exact(&mut b)?;
            data.push(f64::from_le_bytes(b));
        }
        store.add(name, Tensor::from_vec(&shape, data)?);
    }
    Ok((store, meta))
}

/// Loads checkpoint values into an existing store whose manifest must match.
pub fn load_into<R: Read>(r: &mut R, store: &mut ParamStore) -> Result<Metadata> {
    let (loaded, meta) = read_checkpoint(r)?;
    store
        .copy_values_from(&loaded)
        .map_err(|e| TensorError::Checkpoint(e.to_string()))?;
    Ok(meta)
}

pub fn meta_get<'a>(meta: &'a Metadata, key: &str) -> Option<&'a str> {
    meta.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
}
