//! `CBNN` | u32 version | u64 descriptor length | JSON architecture | f64 LE params.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::network::{Architecture, Network};
use crate::error::{Error, Result};

pub const CHECKPOINT_MAGIC: &[u8; 4] = b"CBNN";
pub const CHECKPOINT_VERSION: u32 = 1;

pub fn checkpoint_bytes(net: &Network) -> Result<Vec<u8>> {
    let desc = serde_json::to_vec(net.architecture())?;
    let params = net.params_flat();
    let mut out = Vec::with_capacity(16 + desc.len() + 8 * params.len());
    out.extend_from_slice(CHECKPOINT_MAGIC);
    out.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
    out.extend_from_slice(&(desc.len() as u64).to_le_bytes());
    out.extend_from_slice(&desc);
    for p in params {
        out.extend_from_slice(&p.to_le_bytes());
    }
    Ok(out)
}

pub fn network_from_bytes(bytes: &[u8]) -> Result<Network> {
    if bytes.len() < 16 || &bytes[..4] != CHECKPOINT_MAGIC {
        return Err(Error::Corrupt("not a network checkpoint".into()));
    }
    let version = u32::from_le_bytes(bytes[4..8].try_into().expect("4 bytes"));
    if version != CHECKPOINT_VERSION {
        return Err(Error::Version { found: version, expected: CHECKPOINT_VERSION });
    }
    let dlen = u64::from_le_bytes(bytes[8..16].try_into().expect("8 bytes"));
    let rest = &bytes[16..];
    if (rest.len() as u64) < dlen {
        return Err(Error::Corrupt("truncated architecture descriptor".into()));
    }
    let (desc, body) = rest.split_at(dlen as usize);
    let arch: Architecture =
        serde_json::from_slice(desc).map_err(|e| Error::Corrupt(format!("architecture descriptor: {e}")))?;
    let mut net = Network::zeroed(arch)?;
    if body.len() != 8 * net.param_count() {
        return Err(Error::Corrupt(format!("{} parameter bytes, architecture needs {}", body.len(), 8 * net.param_count())));
    }
    let params: Vec<f64> = body.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes"))).collect();
    net.set_params_flat(&params)?;
    Ok(net)
}

pub fn save_checkpoint(net: &Network, path: &Path) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    out.write_all(&checkpoint_bytes(net)?)?;
    out.flush()?;
    Ok(())
}

pub fn load_checkpoint(path: &Path) -> Result<Network> {
    let mut bytes = Vec::new();
    BufReader::new(File::open(path)?).read_to_end(&mut bytes)?;
    network_from_bytes(&bytes)
}

/// Loads and insists on a specific architecture (the seed is ignored).
pub fn load_checkpoint_for(path: &Path, expected: &Architecture) -> Result<Network> {
    let net = load_checkpoint(path)?;
    let got = net.architecture();
    if got.input_shape != expected.input_shape || got.layers != expected.layers {
        return Err(Error::shape("checkpoint architecture differs from the expected one"));
    }
    Ok(net)
}
