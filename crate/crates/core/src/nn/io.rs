//! Flat binary parameter snapshots.
//!
//! Layout: magic bytes `TECN`, version `u32`, layer-dim count `u32`, the
//! dims as `u32`s, then the parameters as row-major little-endian `f64`s
//! (weights then biases, layer by layer). Multi-net checkpoints concatenate
//! one such block per network.

use std::io::{Read, Write};

use crate::error::{Error, Result};
use crate::nn::{Activation, DenseNet};

const MAGIC: &[u8; 4] = b"TECN";
const VERSION: u32 = 1;

fn write_u32<W: Write>(w: &mut W, v: u32) -> Result<()> {
    w.write_all(&v.to_le_bytes())?;
    Ok(())
}

fn read_u32<R: Read>(r: &mut R) -> Result<u32> {
    let mut buf = [0u8; 4];
    r.read_exact(&mut buf)?;
    Ok(u32::from_le_bytes(buf))
}

/// Writes a length-prefixed block of `f64`s (used for extra checkpoint
/// sections such as temperatures and log-stds).
pub fn write_f64_block<W: Write>(w: &mut W, values: &[f64]) -> Result<()> {
    write_u32(w, values.len() as u32)?;
    for v in values {
        w.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

/// Counterpart of [`write_f64_block`].
pub fn read_f64_block<R: Read>(r: &mut R) -> Result<Vec<f64>> {
    let n = read_u32(r)? as usize;
    let mut out = Vec::with_capacity(n);
    let mut buf = [0u8; 8];
    for _ in 0..n {
        r.read_exact(&mut buf)?;
        out.push(f64::from_le_bytes(buf));
    }
    Ok(out)
}

impl DenseNet {
    /// Serializes this network as one `TECN` block.
    pub fn write_to<W: Write>(&self, w: &mut W) -> Result<()> {
        w.write_all(MAGIC)?;
        write_u32(w, VERSION)?;
        let dims = self.layer_dims();
        write_u32(w, dims.len() as u32)?;
        for &d in dims {
            write_u32(w, d as u32)?;
        }
        for v in self.params_flat() {
            w.write_all(&v.to_le_bytes())?;
        }
        Ok(())
    }

    /// Reads one `TECN` block. The activation is not part of the snapshot
    /// and must be supplied by the caller.
    pub fn read_from<R: Read>(r: &mut R, activation: Activation) -> Result<Self> {
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)?;
        if &magic != MAGIC {
            return Err(Error::config("bad magic bytes, not a TECN snapshot"));
        }
        let version = read_u32(r)?;
        if version != VERSION {
            return Err(Error::config(format!("unsupported TECN version {version}")));
        }
        let n_dims = read_u32(r)? as usize;
        if n_dims < 2 {
            return Err(Error::config("TECN snapshot needs at least two dims"));
        }
        let mut dims = Vec::with_capacity(n_dims);
        for _ in 0..n_dims {
            dims.push(read_u32(r)? as usize);
        }
        let mut net = DenseNet::zeros(&dims, activation)?;
        let mut flat = vec![0.0; net.param_count()];
        let mut buf = [0u8; 8];
        for v in flat.iter_mut() {
            r.read_exact(&mut buf)?;
            *v = f64::from_le_bytes(buf);
        }
        if flat.iter().any(|v| !v.is_finite()) {
            return Err(Error::numerical("non-finite parameter in TECN snapshot"));
        }
        net.set_params_flat(&flat)?;
        Ok(net)
    }

    pub fn save(&self, path: &std::path::Path) -> Result<()> {
        let mut f = std::fs::File::create(path)?;
        self.write_to(&mut f)
    }

    pub fn load(path: &std::path::Path, activation: Activation) -> Result<Self> {
        let mut f = std::fs::File::open(path)?;
        Self::read_from(&mut f, activation)
    }
}
