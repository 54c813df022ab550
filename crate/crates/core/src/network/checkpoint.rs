//! Binary parameter checkpoints and a CSV debug dump.
//!
//! Binary layout, all integers and floats little-endian:
//!
//! ```text
//! magic        8 bytes  "ERRFREE1"
//! layer count  u32      number of layer sizes that follow (L + 1)
//! sizes        u32 * (L + 1)
//! activation   u8       0 = relu, 1 = switch
//! scale        f64      softmax scale s
//! init range   f64      r
//! param count  u64      N
//! values       f64 * N  layer 0 weights (row-major), layer 0 biases, layer 1 ...
//! ```

use std::fs;
use std::io::{self, Read, Write};
use std::path::Path;

use thiserror::Error;

use super::{Activation, ModelConfig, NetworkError, Params};

pub const MAGIC: &[u8; 8] = b"ERRFREE1";

#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: io::Error,
    },
    #[error("not a checkpoint (bad magic)")]
    BadMagic,
    #[error("truncated checkpoint")]
    Truncated,
    #[error("unknown activation tag {0}")]
    UnknownActivation(u8),
    #[error("trailing bytes after parameter block")]
    Trailing,
    #[error(transparent)]
    Network(#[from] NetworkError),
}

pub fn encode(config: &ModelConfig, params: &Params) -> Vec<u8> {
    let sizes = config.layer_sizes();
    let mut out = Vec::with_capacity(40 + 4 * sizes.len() + 8 * params.len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&(sizes.len() as u32).to_le_bytes());
    for &n in sizes {
        out.extend_from_slice(&(n as u32).to_le_bytes());
    }
    out.push(config.activation().tag());
    out.extend_from_slice(&config.softmax_scale().to_le_bytes());
    out.extend_from_slice(&config.init_range().to_le_bytes());
    out.extend_from_slice(&(params.len() as u64).to_le_bytes());
    for v in params.flat() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

struct Cursor<'a> {
    bytes: &'a [u8],
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], CheckpointError> {
        if self.bytes.len() < n {
            return Err(CheckpointError::Truncated);
        }
        let (head, tail) = self.bytes.split_at(n);
        self.bytes = tail;
        Ok(head)
    }

    fn u32(&mut self) -> Result<u32, CheckpointError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self) -> Result<u64, CheckpointError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn f64(&mut self) -> Result<f64, CheckpointError> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }
}

pub fn decode(bytes: &[u8]) -> Result<(ModelConfig, Params), CheckpointError> {
    let mut cur = Cursor { bytes };
    if cur.take(MAGIC.len()).map_err(|_| CheckpointError::BadMagic)? != MAGIC {
        return Err(CheckpointError::BadMagic);
    }
    let layers = cur.u32()? as usize;
    if layers > bytes.len() / 4 {
        return Err(CheckpointError::Truncated);
    }
    let sizes = (0..layers)
        .map(|_| cur.u32().map(|v| v as usize))
        .collect::<Result<Vec<_>, _>>()?;
    let tag = cur.take(1)?[0];
    let activation = Activation::from_tag(tag).ok_or(CheckpointError::UnknownActivation(tag))?;
    let scale = cur.f64()?;
    let range = cur.f64()?;
    let config = ModelConfig::with_options(sizes, activation, scale, range)?;
    let n = cur.u64()? as usize;
    if n != config.param_count() {
        return Err(NetworkError::ParamLength {
            expected: config.param_count(),
            found: n,
        }
        .into());
    }
    let values = (0..n).map(|_| cur.f64()).collect::<Result<Vec<_>, _>>()?;
    if !cur.bytes.is_empty() {
        return Err(CheckpointError::Trailing);
    }
    let params = Params::from_flat(&config, values)?;
    Ok((config, params))
}

pub fn write_checkpoint<W: Write>(mut out: W, config: &ModelConfig, params: &Params) -> io::Result<()> {
    out.write_all(&encode(config, params))
}

pub fn read_checkpoint<R: Read>(mut input: R) -> Result<(ModelConfig, Params), CheckpointError> {
    let mut bytes = Vec::new();
    input.read_to_end(&mut bytes).map_err(|source| CheckpointError::Io {
        path: "<reader>".into(),
        source,
    })?;
    decode(&bytes)
}

pub fn save(path: impl AsRef<Path>, config: &ModelConfig, params: &Params) -> Result<(), CheckpointError> {
    let path = path.as_ref();
    fs::write(path, encode(config, params)).map_err(|source| CheckpointError::Io {
        path: path.display().to_string(),
        source,
    })
}

pub fn load(path: impl AsRef<Path>) -> Result<(ModelConfig, Params), CheckpointError> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|source| CheckpointError::Io {
        path: path.display().to_string(),
        source,
    })?;
    decode(&bytes)
}

/// One row per parameter: `layer,kind,row,col,value` with `kind` either
/// `w` or `b` (bias rows use `col = 0`).
pub fn write_params_csv<W: Write>(mut out: W, params: &Params) -> io::Result<()> {
    writeln!(out, "layer,kind,row,col,value")?;
    for l in 0..params.layer_count() {
        let n_in = params.layer_sizes()[l];
        for (i, w) in params.weights(l).iter().enumerate() {
            writeln!(out, "{l},w,{},{},{w}", i / n_in, i % n_in)?;
        }
        for (j, b) in params.biases(l).iter().enumerate() {
            writeln!(out, "{l},b,{j},0,{b}")?;
        }
    }
    Ok(())
}
