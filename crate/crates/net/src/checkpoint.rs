//! Binary checkpoints: magic `SGED`, a format version, the configuration and
//! little-endian `f64` blobs for parameters, running statistics and RMSprop
//! state, in layout order.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::network::{EdConfig, EdNetwork};
use crate::tensor::NetScalar;

pub const MAGIC: &[u8; 4] = b"SGED";
pub const VERSION: u32 = 1;

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |source| Error::Io { path: path.to_path_buf(), source }
}

pub fn write_network<T: NetScalar, W: Write>(net: &EdNetwork<T>, mut w: W) -> std::io::Result<()> {
    let c = &net.config;
    w.write_all(MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    for v in [c.depth, c.base_features, c.in_channels, c.out_channels, c.grid_size] {
        w.write_all(&(v as u32).to_le_bytes())?;
    }
    w.write_all(&c.dropout_rate.to_le_bytes())?;
    w.write_all(&c.seed.to_le_bytes())?;
    for blob in [&net.params, &net.stats, &net.rms] {
        w.write_all(&(blob.len() as u64).to_le_bytes())?;
        for v in blob.iter() {
            w.write_all(&v.to_f64_lossless().to_le_bytes())?;
        }
    }
    w.flush()
}

fn read_array<const N: usize>(r: &mut impl Read) -> Result<[u8; N]> {
    let mut buf = [0u8; N];
    r.read_exact(&mut buf).map_err(|e| Error::Checkpoint(format!("truncated: {e}")))?;
    Ok(buf)
}

fn read_u32(r: &mut impl Read) -> Result<u32> {
    Ok(u32::from_le_bytes(read_array(r)?))
}

fn read_u64(r: &mut impl Read) -> Result<u64> {
    Ok(u64::from_le_bytes(read_array(r)?))
}

fn read_f64(r: &mut impl Read) -> Result<f64> {
    Ok(f64::from_le_bytes(read_array(r)?))
}

pub fn read_network<T: NetScalar, R: Read>(mut r: R) -> Result<EdNetwork<T>> {
    if &read_array::<4>(&mut r)? != MAGIC {
        return Err(Error::Checkpoint("bad magic".into()));
    }
    let version = read_u32(&mut r)?;
    if version != VERSION {
        return Err(Error::Checkpoint(format!("unsupported version {version}")));
    }
    let mut dims = [0usize; 5];
    for d in &mut dims {
        *d = read_u32(&mut r)? as usize;
    }
    let config = EdConfig {
        depth: dims[0],
        base_features: dims[1],
        in_channels: dims[2],
        out_channels: dims[3],
        grid_size: dims[4],
        dropout_rate: read_f64(&mut r)?,
        seed: read_u64(&mut r)?,
    };
    let mut net = EdNetwork::<T>::new(config)?;
    for (name, blob) in [("parameters", &mut net.params), ("statistics", &mut net.stats), ("rms state", &mut net.rms)] {
        let len = read_u64(&mut r)? as usize;
        if len != blob.len() {
            return Err(Error::Checkpoint(format!("{name}: {len} values, layout needs {}", blob.len())));
        }
        for v in blob.iter_mut() {
            *v = T::of(read_f64(&mut r)?);
        }
    }
    let mut rest = [0u8; 1];
    if r.read(&mut rest).map_err(|e| Error::Checkpoint(e.to_string()))? != 0 {
        return Err(Error::Checkpoint("trailing bytes".into()));
    }
    Ok(net)
}

pub fn save<T: NetScalar>(net: &EdNetwork<T>, path: &Path) -> Result<()> {
    let file = File::create(path).map_err(io_err(path))?;
    write_network(net, BufWriter::new(file)).map_err(io_err(path))
}

pub fn load<T: NetScalar>(path: &Path) -> Result<EdNetwork<T>> {
    let file = File::open(path).map_err(io_err(path))?;
    read_network(BufReader::new(file))
}

/// Loads a checkpoint whose architecture must match `expected`.
pub fn load_matching<T: NetScalar>(path: &Path, expected: &EdConfig) -> Result<EdNetwork<T>> {
    let net = load::<T>(path)?;
    let c = &net.config;
    let got = [c.depth, c.base_features, c.in_channels, c.out_channels, c.grid_size];
    let want =
        [expected.depth, expected.base_features, expected.in_channels, expected.out_channels, expected.grid_size];
    if got != want {
        return Err(Error::ConfigMismatch(format!(
            "checkpoint has depth/features/in/out/grid {got:?}, expected {want:?}"
        )));
    }
    Ok(net)
}
