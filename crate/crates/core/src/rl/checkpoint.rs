//! Length-prefixed container of named `f64` tensors.
//!
//! Layout (little endian): magic `WLLMTNSR`, format version `u32`, tensor
//! count `u32`, then per tensor a `u32` name length, the UTF-8 name, a `u64`
//! element count and the values.

use std::io::{Read, Write};

use super::mlp::Mlp;
use super::policy::Policy;
use super::ppo::Adam;
use super::RlError;

const MAGIC: &[u8; 8] = b"WLLMTNSR";
const VERSION: u32 = 1;

pub type Tensor = (String, Vec<f64>);

pub fn write_tensors<W: Write>(mut w: W, tensors: &[Tensor]) -> Result<(), RlError> {
    let io = |e: std::io::Error| RlError::Checkpoint(e.to_string());
    w.write_all(MAGIC).map_err(io)?;
    w.write_all(&VERSION.to_le_bytes()).map_err(io)?;
    w.write_all(&(tensors.len() as u32).to_le_bytes()).map_err(io)?;
    for (name, values) in tensors {
        w.write_all(&(name.len() as u32).to_le_bytes()).map_err(io)?;
        w.write_all(name.as_bytes()).map_err(io)?;
        w.write_all(&(values.len() as u64).to_le_bytes()).map_err(io)?;
        for v in values {
            w.write_all(&v.to_le_bytes()).map_err(io)?;
        }
    }
    w.flush().map_err(io)
}

fn read_array<R: Read, const N: usize>(r: &mut R) -> Result<[u8; N], RlError> {
    let mut buf = [0u8; N];
    r.read_exact(&mut buf)
        .map_err(|e| RlError::Checkpoint(format!("truncated checkpoint: {e}")))?;
    Ok(buf)
}

pub fn read_tensors<R: Read>(mut r: R) -> Result<Vec<Tensor>, RlError> {
    if &read_array::<_, 8>(&mut r)? != MAGIC {
        return Err(RlError::Checkpoint("not a tensor checkpoint".into()));
    }
    let version = u32::from_le_bytes(read_array(&mut r)?);
    if version != VERSION {
        return Err(RlError::Checkpoint(format!("unsupported version {version}")));
    }
    let count = u32::from_le_bytes(read_array(&mut r)?);
    let mut out = Vec::new();
    for _ in 0..count {
        let len = u32::from_le_bytes(read_array(&mut r)?) as usize;
        let mut name = vec![0u8; len];
        r.read_exact(&mut name)
            .map_err(|e| RlError::Checkpoint(format!("truncated checkpoint: {e}")))?;
        let name = String::from_utf8(name)
            .map_err(|_| RlError::Checkpoint("tensor name is not UTF-8".into()))?;
        let n = u64::from_le_bytes(read_array(&mut r)?) as usize;
        let mut values = Vec::with_capacity(n.min(1 << 24));
        for _ in 0..n {
            values.push(f64::from_le_bytes(read_array(&mut r)?));
        }
        out.push((name, values));
    }
    Ok(out)
}

fn net_tensors(prefix: &str, net: &Mlp, out: &mut Vec<Tensor>) {
    out.push((
        format!("{prefix}.sizes"),
        net.sizes().iter().map(|&s| s as f64).collect(),
    ));
    for (name, values) in net.tensors() {
        out.push((format!("{prefix}.{name}"), values.to_vec()));
    }
}

/// Policy parameters and optimizer state as named tensors.
pub fn to_tensors(policy: &Policy, adam: &Adam) -> Vec<Tensor> {
    let mut out = Vec::new();
    net_tensors("actor", &policy.actor, &mut out);
    net_tensors("critic", &policy.critic, &mut out);
    out.push(("adam.m".into(), adam.m.clone()));
    out.push(("adam.v".into(), adam.v.clone()));
    out.push(("adam.t".into(), vec![adam.t as f64]));
    out
}

fn take<'a>(tensors: &'a [Tensor], name: &str) -> Result<&'a [f64], RlError> {
    tensors
        .iter()
        .find(|(n, _)| n == name)
        .map(|(_, v)| v.as_slice())
        .ok_or_else(|| RlError::Checkpoint(format!("missing tensor {name}")))
}

fn net_from(prefix: &str, tensors: &[Tensor]) -> Result<Mlp, RlError> {
    let sizes: Vec<usize> = take(tensors, &format!("{prefix}.sizes"))?
        .iter()
        .map(|&s| s as usize)
        .collect();
    let mut theta = Vec::new();
    for l in 0..sizes.len().saturating_sub(1) {
        theta.extend_from_slice(take(tensors, &format!("{prefix}.l{l}.weight"))?);
        theta.extend_from_slice(take(tensors, &format!("{prefix}.l{l}.bias"))?);
    }
    Mlp::from_parts(sizes, theta)
        .ok_or_else(|| RlError::Checkpoint(format!("{prefix} tensors have inconsistent shapes")))
}

pub fn from_tensors(tensors: &[Tensor]) -> Result<(Policy, Adam), RlError> {
    let policy = Policy {
        actor: net_from("actor", tensors)?,
        critic: net_from("critic", tensors)?,
    };
    let mut adam = Adam::new(policy.n_params());
    adam.m = take(tensors, "adam.m")?.to_vec();
    adam.v = take(tensors, "adam.v")?.to_vec();
    adam.t = take(tensors, "adam.t")?.first().copied().unwrap_or(0.0) as u64;
    if adam.m.len() != policy.n_params() || adam.v.len() != policy.n_params() {
        return Err(RlError::Checkpoint("optimizer state does not match the policy".into()));
    }
    Ok((policy, adam))
}

pub fn save_checkpoint(path: &std::path::Path, policy: &Policy, adam: &Adam) -> Result<(), RlError> {
    let file = std::fs::File::create(path).map_err(|e| RlError::Checkpoint(e.to_string()))?;
    write_tensors(std::io::BufWriter::new(file), &to_tensors(policy, adam))
}

pub fn load_checkpoint(path: &std::path::Path) -> Result<(Policy, Adam), RlError> {
    let file = std::fs::File::open(path).map_err(|e| RlError::Checkpoint(e.to_string()))?;
    from_tensors(&read_tensors(std::io::BufReader::new(file))?)
}
