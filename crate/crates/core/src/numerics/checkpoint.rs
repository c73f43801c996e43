//! Binary parameter checkpoints.
//!
//! Layout (all integers little-endian):
//!
//! ```text
//! "HKT-CKPT v1\n"
//! u32 metadata_len, metadata_len bytes of UTF-8 `key = value` lines
//! u32 tensor_count
//! repeated tensor_count times:
//!     u32 name_len, name bytes (UTF-8)
//!     u32 ndim, ndim x u64 dims
//!     product(dims) x f64 payload
//! ```

use std::io::{Read, Write};

use super::{NumericsError, ParamStore, Tensor};

pub const CHECKPOINT_MAGIC: &[u8] = b"HKT-CKPT v1\n";

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Checkpoint {
    /// Free-form `key = value` metadata, kept in insertion order.
    pub metadata: Vec<(String, String)>,
    pub params: ParamStore,
}

impl Checkpoint {
    pub fn meta(&self, key: &str) -> Option<&str> {
        self.metadata
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
    }
}

pub fn write_checkpoint<W: Write>(mut w: W, ckpt: &Checkpoint) -> Result<(), NumericsError> {
    w.write_all(CHECKPOINT_MAGIC)?;
    let meta: String = ckpt
        .metadata
        .iter()
        .map(|(k, v)| format!("{k} = {v}\n"))
        .collect();
    write_u32(&mut w, meta.len())?;
    w.write_all(meta.as_bytes())?;
    write_u32(&mut w, ckpt.params.len())?;
    for (name, t) in ckpt.params.iter() {
        write_u32(&mut w, name.len())?;
        w.write_all(name.as_bytes())?;
        write_u32(&mut w, 2)?;
        w.write_all(&(t.rows() as u64).to_le_bytes())?;
        w.write_all(&(t.cols() as u64).to_le_bytes())?;
        for v in t.data() {
            w.write_all(&v.to_le_bytes())?;
        }
    }
    Ok(())
}

pub fn read_checkpoint<R: Read>(mut r: R) -> Result<Checkpoint, NumericsError> {
    let mut magic = vec![0u8; CHECKPOINT_MAGIC.len()];
    r.read_exact(&mut magic)?;
    if magic != CHECKPOINT_MAGIC {
        return Err(NumericsError::Checkpoint("missing HKT-CKPT v1 header".into()));
    }
    let meta_len = read_u32(&mut r)? as usize;
    let mut meta = vec![0u8; meta_len];
    r.read_exact(&mut meta)?;
    let meta = String::from_utf8(meta)
        .map_err(|_| NumericsError::Checkpoint("metadata is not UTF-8".into()))?;
    let metadata = meta
        .lines()
        .filter_map(|line| {
            line.split_once(" = ")
                .map(|(k, v)| (k.to_string(), v.to_string()))
        })
        .collect();

    let count = read_u32(&mut r)?;
    let mut params = ParamStore::new();
    for _ in 0..count {
        let name_len = read_u32(&mut r)? as usize;
        let mut name = vec![0u8; name_len];
        r.read_exact(&mut name)?;
        let name = String::from_utf8(name)
            .map_err(|_| NumericsError::Checkpoint("tensor name is not UTF-8".into()))?;
        let ndim = read_u32(&mut r)? as usize;
        let mut dims = Vec::with_capacity(ndim);
        for _ in 0..ndim {
            let mut b = [0u8; 8];
            r.read_exact(&mut b)?;
            dims.push(u64::from_le_bytes(b) as usize);
        }
        let (rows, cols) = match dims.as_slice() {
            [n] => (1, *n),
            [r, c] => (*r, *c),
            _ => {
                return Err(NumericsError::Checkpoint(format!(
                    "tensor `{name}` has unsupported rank {ndim}"
                )))
            }
        };
        let mut data = Vec::with_capacity(rows * cols);
        for _ in 0..rows * cols {
            let mut b = [0u8; 8];
            r.read_exact(&mut b)?;
            data.push(f64::from_le_bytes(b));
        }
        params.add(name, Tensor::new(rows, cols, data)?);
    }
    Ok(Checkpoint { metadata, params })
}

fn write_u32<W: Write>(w: &mut W, n: usize) -> Result<(), NumericsError> {
    let n = u32::try_from(n).map_err(|_| NumericsError::Checkpoint("length overflows u32".into()))?;
    w.write_all(&n.to_le_bytes())?;
    Ok(())
}

fn read_u32<R: Read>(r: &mut R) -> Result<u32, NumericsError> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}
