#![allow(dead_code)]

use mstcn_core::tensorcore::{Conv1dSpec, Result, Tape, Tensor, Var};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_tensor(rng: &mut ChaCha8Rng, shape: &[usize], lo: f64, hi: f64) -> Tensor<f64> {
    let n = shape.iter().product();
    Tensor::new(
        shape.to_vec(),
        (0..n).map(|_| rng.gen_range(lo..hi)).collect(),
    )
    .unwrap()
}

/// Direct convolution with explicit zero padding, independent of the
/// library's im2col and grouped kernels.
pub fn naive_conv1d(
    x: &[f64],
    c_in: usize,
    t_in: usize,
    w: &[f64],
    c_out: usize,
    k: usize,
    bias: Option<&[f64]>,
    spec: Conv1dSpec,
) -> Vec<f64> {
    let padded_len = t_in + spec.pad_left + spec.pad_right;
    let mut padded = vec![0.0; c_in * padded_len];
    for c in 0..c_in {
        for t in 0..t_in {
            padded[c * padded_len + spec.pad_left + t] = x[c * t_in + t];
        }
    }
    let t_out = padded_len - (k - 1) * spec.dilation;
    let cin_g = c_in / spec.groups;
    let cout_g = c_out / spec.groups;
    let mut out = vec![0.0; c_out * t_out];
    for co in 0..c_out {
        let g = co / cout_g;
        for t in 0..t_out {
            let mut acc = bias.map_or(0.0, |b| b[co]);
            for cl in 0..cin_g {
                let ci = g * cin_g + cl;
                for kk in 0..k {
                    acc += w[(co * cin_g + cl) * k + kk]
                        * padded[ci * padded_len + t + kk * spec.dilation];
                }
            }
            out[co * t_out + t] = acc;
        }
    }
    out
}

/// `Σ y ⊙ r` for a fixed random `r`, so gradient checks see non-uniform
/// upstream gradients.
pub fn weighted_sum(tape: &mut Tape<'_, f64>, y: Var, seed: u64) -> Result<Var> {
    let shape = tape.value(y).shape().to_vec();
    let mut r = rng(seed ^ 0xA5A5);
    let weights = random_tensor(&mut r, &shape, -1.0, 1.0);
    let w = tape.constant(weights)?;
    let prod = tape.mul(y, w)?;
    Ok(tape.sum(prod))
}
