//! Binary model store for network parameters.
//!
//! Layout: an 8-byte little-endian `u64` header length, a UTF-8 JSON header
//! describing the network and the block shapes, then every parameter as a
//! little-endian `f64` in declaration order (`W_1, β_1, …, W_H, β_H, W_0, β_0`,
//! matrices row-major).

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::{NetworkParams, NetworkSpec};
use crate::Scalar;

const FORMAT: &str = "bifid-network";
const VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BlockShape {
    pub name: String,
    pub shape: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StoreHeader {
    pub format: String,
    pub version: u32,
    pub dtype: String,
    pub spec: NetworkSpec<f64>,
    pub blocks: Vec<BlockShape>,
    /// Free-form metadata, e.g. the input/output standardization used.
    #[serde(default)]
    pub meta: serde_json::Value,
}

fn block_shapes<T: Scalar>(params: &NetworkParams<T>) -> Vec<BlockShape> {
    let depth = params.depth();
    let mut out = Vec::with_capacity(2 * (depth + 1));
    for (k, b) in params.blocks().iter().enumerate() {
        let idx = if k == depth { 0 } else { k + 1 };
        out.push(BlockShape {
            name: format!("W{idx}"),
            shape: vec![b.rows, b.cols],
        });
        out.push(BlockShape {
            name: format!("b{idx}"),
            shape: vec![b.rows],
        });
    }
    out
}

fn spec_to_f64<T: Scalar>(spec: &NetworkSpec<T>) -> NetworkSpec<f64> {
    NetworkSpec {
        input_dim: spec.input_dim,
        hidden_widths: spec.hidden_widths.clone(),
        hidden_activations: spec
            .hidden_activations
            .iter()
            .map(|a| crate::nn::Activation {
                kind: a.kind,
                alpha: a.alpha.to_f64_lossy(),
            })
            .collect(),
        skips: spec.skips.clone(),
    }
}

fn spec_from_f64<T: Scalar>(spec: &NetworkSpec<f64>) -> NetworkSpec<T> {
    NetworkSpec {
        input_dim: spec.input_dim,
        hidden_widths: spec.hidden_widths.clone(),
        hidden_activations: spec
            .hidden_activations
            .iter()
            .map(|a| crate::nn::Activation {
                kind: a.kind,
                alpha: T::of(a.alpha),
            })
            .collect(),
        skips: spec.skips.clone(),
    }
}

pub fn write_params<T: Scalar, W: Write>(
    mut w: W,
    spec: &NetworkSpec<T>,
    params: &NetworkParams<T>,
    meta: serde_json::Value,
) -> Result<()> {
    params.check_spec(spec)?;
    let header = StoreHeader {
        format: FORMAT.to_string(),
        version: VERSION,
        dtype: "f64le".to_string(),
        spec: spec_to_f64(spec),
        blocks: block_shapes(params),
        meta,
    };
    let json = serde_json::to_vec(&header).map_err(|e| Error::Store(e.to_string()))?;
    w.write_all(&(json.len() as u64).to_le_bytes())?;
    w.write_all(&json)?;
    for v in params.values() {
        w.write_all(&v.to_f64_lossy().to_le_bytes())?;
    }
    Ok(())
}

pub fn read_params<T: Scalar, R: Read>(mut r: R) -> Result<(NetworkSpec<T>, NetworkParams<T>, StoreHeader)> {
    let mut len = [0u8; 8];
    r.read_exact(&mut len)?;
    let len = u64::from_le_bytes(len);
    if len > 1 << 24 {
        return Err(Error::Store(format!("header length {len} is implausible")));
    }
    let mut json = vec![0u8; len as usize];
    r.read_exact(&mut json)?;
    let header: StoreHeader = serde_json::from_slice(&json).map_err(|e| Error::Store(e.to_string()))?;
    if header.format != FORMAT || header.version != VERSION || header.dtype != "f64le" {
        return Err(Error::Store(format!(
            "unsupported store {} v{} ({})",
            header.format, header.version, header.dtype
        )));
    }
    let spec: NetworkSpec<T> = spec_from_f64(&header.spec);
    spec.validate_with_cap(usize::MAX)?;
    let expected = block_shapes(&NetworkParams::<T>::zeros(&spec));
    if expected != header.blocks {
        return Err(Error::Store("block shapes disagree with the stored spec".into()));
    }
    let n = spec.param_count();
    let mut values = Vec::with_capacity(n);
    let mut buf = [0u8; 8];
    for _ in 0..n {
        r.read_exact(&mut buf)?;
        values.push(T::of(f64::from_le_bytes(buf)));
    }
    let mut trailing = [0u8; 1];
    if r.read(&mut trailing)? != 0 {
        return Err(Error::Store("trailing bytes after parameter data".into()));
    }
    let params = NetworkParams::from_flat(&spec, values)?;
    Ok((spec, params, header))
}
