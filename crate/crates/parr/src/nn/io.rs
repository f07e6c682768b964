//! Network checkpoint format.
//!
//! Layout (all integers and floats little-endian):
//!
//! ```text
//! magic   8 bytes  "PARRNET\0"
//! version u32      1
//! n_sizes u32      number of layer sizes
//! sizes   u64 * n  layer widths, input first
//! slope   f64      leaky-rectifier negative slope
//! linear  u8       1 if the final layer is linear
//! layers  per weight layer: weights row-major f64 (out*in), biases f64 (out)
//! ```

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::wire;

use super::{AdamConfig, AdamState, GradSet, NetSpec, ParamSet};

const MAGIC: &[u8; 8] = b"PARRNET\0";
const VERSION: u32 = 1;

pub fn save_params(w: &mut dyn Write, spec: &NetSpec, params: &ParamSet) -> Result<()> {
    if !params.matches_spec(spec) {
        return Err(Error::Contract(
            "parameters do not match spec; refusing to serialize".into(),
        ));
    }
    w.write_all(MAGIC)?;
    wire::write_u32(w, VERSION)?;
    wire::write_u32(w, spec.layer_sizes().len() as u32)?;
    for &s in spec.layer_sizes() {
        wire::write_u64(w, s as u64)?;
    }
    wire::write_f64(w, spec.activation_slope())?;
    wire::write_bool(w, spec.final_layer_linear())?;
    for layer in &params.layers {
        wire::write_f64_slice(w, &layer.weights)?;
        wire::write_f64_slice(w, &layer.biases)?;
    }
    Ok(())
}

pub fn load_params(r: &mut dyn Read) -> Result<(NetSpec, ParamSet)> {
    wire::expect_magic(r, MAGIC)?;
    wire::expect_version(r, VERSION)?;
    let n_sizes = wire::read_u32(r)? as usize;
    if n_sizes < 2 || n_sizes > 1024 {
        return Err(Error::Format(format!("implausible layer count {n_sizes}")));
    }
    let mut sizes = Vec::with_capacity(n_sizes);
    for _ in 0..n_sizes {
        sizes.push(wire::read_u64(r)? as usize);
    }
    let slope = wire::read_f64(r)?;
    let linear = wire::read_bool(r)?;
    let spec = NetSpec::new(sizes, slope, linear)
        .map_err(|e| Error::Format(format!("stored spec invalid: {e}")))?;

    let mut params = ParamSet::zeros(&spec);
    for layer in &mut params.layers {
        layer.weights = wire::read_f64_vec(r, layer.in_dim * layer.out_dim)?;
        layer.biases = wire::read_f64_vec(r, layer.out_dim)?;
    }
    if !params.is_finite() {
        return Err(Error::Format("stored parameters contain non-finite values".into()));
    }
    Ok((spec, params))
}

/// Optimizer state: hyperparameters, step counter, then both moment
/// accumulators in the same per-layer layout as the parameters.
pub fn save_adam(w: &mut dyn Write, spec: &NetSpec, state: &AdamState) -> Result<()> {
    wire::write_f64(w, state.cfg.lr)?;
    wire::write_f64(w, state.cfg.beta1)?;
    wire::write_f64(w, state.cfg.beta2)?;
    wire::write_f64(w, state.cfg.eps)?;
    wire::write_u64(w, state.step)?;
    for grads in [&state.m, &state.v] {
        if grads.layers.len() != spec.num_layers() {
            return Err(Error::Contract("optimizer moments do not match spec".into()));
        }
        for layer in &grads.layers {
            wire::write_f64_slice(w, &layer.weights)?;
            wire::write_f64_slice(w, &layer.biases)?;
        }
    }
    Ok(())
}

pub fn load_adam(r: &mut dyn Read, spec: &NetSpec) -> Result<AdamState> {
    let cfg = AdamConfig {
        lr: wire::read_f64(r)?,
        beta1: wire::read_f64(r)?,
        beta2: wire::read_f64(r)?,
        eps: wire::read_f64(r)?,
    };
    let step = wire::read_u64(r)?;
    let mut moments = Vec::with_capacity(2);
    for _ in 0..2 {
        let mut grads = GradSet::zeros(spec);
        for layer in &mut grads.layers {
            let n_w = layer.weights.len();
            let n_b = layer.biases.len();
            layer.weights = wire::read_f64_vec(r, n_w)?;
            layer.biases = wire::read_f64_vec(r, n_b)?;
        }
        moments.push(grads);
    }
    let v = moments.pop().unwrap();
    let m = moments.pop().unwrap();
    Ok(AdamState { cfg, step, m, v })
}

pub fn save_params_file(path: &Path, spec: &NetSpec, params: &ParamSet) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    save_params(&mut w, spec, params)?;
    w.flush()?;
    Ok(())
}

pub fn load_params_file(path: &Path) -> Result<(NetSpec, ParamSet)> {
    let mut r = BufReader::new(File::open(path)?);
    load_params(&mut r)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::init_params;

    #[test]
    fn round_trip_is_bit_exact() {
        let spec = NetSpec::new(vec![4, 7, 3], 0.05, true).unwrap();
        let params = init_params(&spec, 77);
        let mut buf = Vec::new();
        save_params(&mut buf, &spec, &params).unwrap();
        let (spec2, params2) = load_params(&mut &buf[..]).unwrap();
        assert_eq!(spec, spec2);
        assert_eq!(params, params2);
    }

    #[test]
    fn truncated_file_is_rejected() {
        let spec = NetSpec::with_linear_head(vec![3, 2]).unwrap();
        let params = init_params(&spec, 1);
        let mut buf = Vec::new();
        save_params(&mut buf, &spec, &params).unwrap();
        buf.truncate(buf.len() - 4);
        assert!(load_params(&mut &buf[..]).is_err());
    }

    #[test]
    fn wrong_magic_is_rejected() {
        let mut buf = b"NOTANETX".to_vec();
        buf.extend_from_slice(&[0u8; 64]);
        assert!(matches!(
            load_params(&mut &buf[..]),
            Err(Error::Format(_))
        ));
    }
}
