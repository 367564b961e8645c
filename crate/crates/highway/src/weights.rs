//! Binary weights file: magic, version, algorithm tag, per-network layer
//! dims, raw little-endian f64 parameters, trailing SHA-256 checksum.
//! Round-trips bit-exactly.

use std::io::Write;
use std::path::Path;

use sha2::{Digest, Sha256};

use crate::agent::Algorithm;
use crate::error::{Error, Result};
use crate::neural::{Activation, DuelingAgg, DuelingNet, Mlp, QNetwork};

const MAGIC: &[u8; 4] = b"HWYW";
const VERSION: u32 = 1;
const CHECKSUM_LEN: usize = 32;

fn algo_tag(a: Algorithm) -> u8 {
    match a {
        Algorithm::Tabular => 0,
        Algorithm::Dqn => 1,
        Algorithm::Ddqn => 2,
        Algorithm::Reference => 3,
    }
}

fn tag_algo(t: u8) -> Result<Algorithm> {
    match t {
        1 => Ok(Algorithm::Dqn),
        2 => Ok(Algorithm::Ddqn),
        _ => Err(Error::Format(format!("unsupported algorithm tag {t}"))),
    }
}

fn write_mlp(out: &mut Vec<u8>, m: &Mlp) {
    out.extend_from_slice(&(m.dims.len() as u32).to_le_bytes());
    for &d in &m.dims {
        out.extend_from_slice(&(d as u32).to_le_bytes());
    }
    for l in 0..m.layer_count() {
        for &w in &m.weights[l] {
            out.extend_from_slice(&w.to_le_bytes());
        }
        for &b in &m.biases[l] {
            out.extend_from_slice(&b.to_le_bytes());
        }
    }
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.pos + n > self.buf.len() {
            return Err(Error::Format("truncated weights file".into()));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}

fn read_mlp(r: &mut Reader, output_activation: Activation) -> Result<Mlp> {
    let n_dims = r.u32()? as usize;
    if !(2..=64).contains(&n_dims) {
        return Err(Error::Format("implausible layer count".into()));
    }
    let mut dims = Vec::with_capacity(n_dims);
    for _ in 0..n_dims {
        dims.push(r.u32()? as usize);
    }
    let mut weights = Vec::new();
    let mut biases = Vec::new();
    for l in 0..n_dims - 1 {
        let mut w = Vec::with_capacity(dims[l] * dims[l + 1]);
        for _ in 0..dims[l] * dims[l + 1] {
            w.push(r.f64()?);
        }
        let mut b = Vec::with_capacity(dims[l + 1]);
        for _ in 0..dims[l + 1] {
            b.push(r.f64()?);
        }
        weights.push(w);
        biases.push(b);
    }
    Ok(Mlp {
        dims,
        weights,
        biases,
        output_activation,
    })
}

pub fn save_weights(path: &Path, algorithm: Algorithm, net: &QNetwork) -> Result<()> {
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.push(algo_tag(algorithm));
    match net {
        QNetwork::Mlp(m) => {
            out.push(1);
            write_mlp(&mut out, m);
        }
        QNetwork::Dueling(d) => {
            out.push(3);
            out.push(match d.agg {
                DuelingAgg::Max => 0,
                DuelingAgg::Mean => 1,
            });
            write_mlp(&mut out, &d.trunk);
            write_mlp(&mut out, &d.value);
            write_mlp(&mut out, &d.advantage);
        }
    }
    let digest = Sha256::digest(&out);
    out.extend_from_slice(&digest);
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent).map_err(|e| Error::io(parent.display().to_string(), e))?;
        }
    }
    std::fs::File::create(path)
        .and_then(|mut f| f.write_all(&out))
        .map_err(|e| Error::io(path.display().to_string(), e))
}

pub fn load_weights(path: &Path) -> Result<(Algorithm, QNetwork)> {
    let buf = std::fs::read(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    if buf.len() < 4 + 4 + 2 + CHECKSUM_LEN {
        return Err(Error::Format("weights file too short".into()));
    }
    let (body, checksum) = buf.split_at(buf.len() - CHECKSUM_LEN);
    let digest = Sha256::digest(body);
    if digest.as_slice() != checksum {
        return Err(Error::Format("weights checksum mismatch".into()));
    }
    let mut r = Reader { buf: body, pos: 0 };
    if r.take(4)? != MAGIC {
        return Err(Error::Format("bad magic bytes".into()));
    }
    let version = r.u32()?;
    if version != VERSION {
        return Err(Error::Format(format!("unsupported weights version {version}")));
    }
    let algorithm = tag_algo(r.u8()?)?;
    let net_count = r.u8()?;
    let net = match (algorithm, net_count) {
        (Algorithm::Dqn, 1) => QNetwork::Mlp(read_mlp(&mut r, Activation::Identity)?),
        (Algorithm::Ddqn, 3) => {
            let agg = match r.u8()? {
                0 => DuelingAgg::Max,
                1 => DuelingAgg::Mean,
                other => return Err(Error::Format(format!("unknown aggregation tag {other}"))),
            };
            let trunk = read_mlp(&mut r, Activation::Relu)?;
            let value = read_mlp(&mut r, Activation::Identity)?;
            let advantage = read_mlp(&mut r, Activation::Identity)?;
            QNetwork::Dueling(DuelingNet {
                trunk,
                value,
                advantage,
                agg,
            })
        }
        _ => {
            return Err(Error::Format(
                "network layout does not match the algorithm tag".into(),
            ))
        }
    };
    if r.pos != body.len() {
        return Err(Error::Format("trailing bytes in weights file".into()));
    }
    Ok((algorithm, net))
}
