//! Binary checkpoint files holding every trained network of a run. The
//! format is versioned and self-describing: named networks with explicit
//! layer shapes, all integers and floats little-endian, so a checkpoint
//! restores bit-identical weights on any platform.

use crate::config::Algorithm;
use crate::dqn::{Activation, Layer, NetworkWeights};
use crate::error::CoreError;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

const MAGIC: &[u8; 8] = b"RQNCKPT\0";
const VERSION: u16 = 1;
/// Upper bound on any serialized dimension; corrupt headers fail fast
/// instead of allocating gigabytes.
const MAX_DIM: u64 = 10_000_000;

/// Everything needed to resume or evaluate a run: the algorithm tag, the
/// fleet size, and each network (online and target) under a stable name
/// such as `global/online` or `local2/target`.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub algorithm: Algorithm,
    pub num_robots: u32,
    pub nets: Vec<(String, NetworkWeights)>,
}

fn algo_byte(algo: Algorithm) -> u8 {
    match algo {
        Algorithm::Fdrl => 0,
        Algorithm::Central => 1,
        Algorithm::OmaFdrl => 2,
        Algorithm::QoeFdrl => 3,
    }
}

fn algo_from_byte(b: u8) -> Result<Algorithm, CoreError> {
    match b {
        0 => Ok(Algorithm::Fdrl),
        1 => Ok(Algorithm::Central),
        2 => Ok(Algorithm::OmaFdrl),
        3 => Ok(Algorithm::QoeFdrl),
        _ => Err(CoreError::Checkpoint(format!("unknown algorithm tag {b}"))),
    }
}

fn read_exact_buf<R: Read>(r: &mut R, n: usize) -> Result<Vec<u8>, CoreError> {
    let mut buf = vec![0u8; n];
    r.read_exact(&mut buf)
        .map_err(|e| CoreError::Checkpoint(format!("truncated checkpoint: {e}")))?;
    Ok(buf)
}

fn read_u16<R: Read>(r: &mut R) -> Result<u16, CoreError> {
    Ok(u16::from_le_bytes(read_exact_buf(r, 2)?.try_into().unwrap()))
}

fn read_u32<R: Read>(r: &mut R) -> Result<u32, CoreError> {
    Ok(u32::from_le_bytes(read_exact_buf(r, 4)?.try_into().unwrap()))
}

fn read_f64_vec<R: Read>(r: &mut R, len: usize) -> Result<Vec<f64>, CoreError> {
    let bytes = read_exact_buf(r, len * 8)?;
    Ok(bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect())
}

fn checked_dim(v: u32, what: &str) -> Result<usize, CoreError> {
    if v as u64 > MAX_DIM {
        return Err(CoreError::Checkpoint(format!(
            "implausible {what} {v} in checkpoint header"
        )));
    }
    Ok(v as usize)
}

impl Checkpoint {
    pub fn save(&self, path: &Path) -> Result<(), CoreError> {
        let mut w = BufWriter::new(File::create(path)?);
        self.write_to(&mut w)?;
        w.flush()?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, CoreError> {
        Self::read_from(&mut BufReader::new(File::open(path)?))
    }

    pub fn write_to<W: Write>(&self, w: &mut W) -> Result<(), CoreError> {
        w.write_all(MAGIC)?;
        w.write_all(&VERSION.to_le_bytes())?;
        w.write_all(&[algo_byte(self.algorithm)])?;
        w.write_all(&self.num_robots.to_le_bytes())?;
        w.write_all(&(self.nets.len() as u32).to_le_bytes())?;
        for (name, net) in &self.nets {
            let name_bytes = name.as_bytes();
            if name_bytes.len() > u16::MAX as usize {
                return Err(CoreError::Checkpoint("network name too long".into()));
            }
            w.write_all(&(name_bytes.len() as u16).to_le_bytes())?;
            w.write_all(name_bytes)?;
            w.write_all(&(net.layers.len() as u32).to_le_bytes())?;
            for layer in &net.layers {
                let act = match layer.activation {
                    Activation::Linear => 0u8,
                    Activation::Relu => 1u8,
                };
                w.write_all(&[act])?;
                w.write_all(&(layer.out_dim as u32).to_le_bytes())?;
                w.write_all(&(layer.in_dim as u32).to_le_bytes())?;
                for v in &layer.weights {
                    w.write_all(&v.to_le_bytes())?;
                }
                for v in &layer.bias {
                    w.write_all(&v.to_le_bytes())?;
                }
            }
        }
        Ok(())
    }

    pub fn read_from<R: Read>(r: &mut R) -> Result<Self, CoreError> {
        let magic = read_exact_buf(r, 8)?;
        if magic != MAGIC {
            return Err(CoreError::Checkpoint(
                "bad magic bytes: not a checkpoint file".into(),
            ));
        }
        let version = read_u16(r)?;
        if version != VERSION {
            return Err(CoreError::Checkpoint(format!(
                "unsupported checkpoint version {version}, expected {VERSION}"
            )));
        }
        let algorithm = algo_from_byte(read_exact_buf(r, 1)?[0])?;
        let num_robots = read_u32(r)?;
        let n_nets = checked_dim(read_u32(r)?, "network count")?;
        let mut nets = Vec::with_capacity(n_nets.min(1024));
        for _ in 0..n_nets {
            let name_len = read_u16(r)? as usize;
            let name = String::from_utf8(read_exact_buf(r, name_len)?)
                .map_err(|_| CoreError::Checkpoint("network name is not UTF-8".into()))?;
            let n_layers = checked_dim(read_u32(r)?, "layer count")?;
            let mut layers = Vec::with_capacity(n_layers.min(1024));
            for _ in 0..n_layers {
                let activation = match read_exact_buf(r, 1)?[0] {
                    0 => Activation::Linear,
                    1 => Activation::Relu,
                    b => {
                        return Err(CoreError::Checkpoint(format!(
                            "unknown activation tag {b}"
                        )))
                    }
                };
                let out_dim = checked_dim(read_u32(r)?, "layer width")?;
                let in_dim = checked_dim(read_u32(r)?, "layer width")?;
                let weights = read_f64_vec(r, out_dim * in_dim)?;
                let bias = read_f64_vec(r, out_dim)?;
                layers.push(Layer {
                    in_dim,
                    out_dim,
                    weights,
                    bias,
                    activation,
                });
            }
            let net = NetworkWeights { layers };
            net.validate()
                .map_err(|e| CoreError::Checkpoint(format!("invalid network {name:?}: {e}")))?;
            nets.push((name, net));
        }
        let mut trailer = [0u8; 1];
        if r.read(&mut trailer)? != 0 {
            return Err(CoreError::Checkpoint(
                "trailing bytes after last network".into(),
            ));
        }
        Ok(Checkpoint {
            algorithm,
            num_robots,
            nets,
        })
    }

    pub fn net(&self, name: &str) -> Option<&NetworkWeights> {
        self.nets
            .iter()
            .find_map(|(n, w)| (n == name).then_some(w))
    }
}
