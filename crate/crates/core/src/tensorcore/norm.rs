//! Global and cumulative layer normalization over `[C × T]` feature maps.
//!
//! Statistics are accumulated in `f64` regardless of the element type.
//! gLN uses one mean/variance over all `C·T` entries; cLN uses, for column
//! `t`, the mean/variance over all channels of columns `0..=t`, so its
//! column `t` never reads a later column.

use super::{Float, Result, Tensor, TensorError};

pub const NORM_EPS: f64 = 1e-8;

/// Per-column `(mean, 1/sqrt(var + eps))`; a single entry for gLN.
#[derive(Clone, Debug)]
pub(crate) struct NormStats {
    pub mean: Vec<f64>,
    pub inv_std: Vec<f64>,
}

impl NormStats {
    fn column(&self, t: usize) -> (f64, f64) {
        if self.mean.len() == 1 {
            (self.mean[0], self.inv_std[0])
        } else {
            (self.mean[t], self.inv_std[t])
        }
    }
}

pub(crate) fn check_affine<F: Float>(
    op: &'static str,
    x: &Tensor<F>,
    gain: &Tensor<F>,
    bias: &Tensor<F>,
) -> Result<(usize, usize)> {
    let (c, t) = x.dims2(op)?;
    if t == 0 {
        return Err(TensorError::Invalid {
            op,
            reason: "needs at least one time step".into(),
        });
    }
    for (dim, p) in [("gain channels", gain), ("bias channels", bias)] {
        if p.len() != c {
            return Err(TensorError::ShapeMismatch {
                op,
                dim,
                expected: c,
                found: p.len(),
            });
        }
    }
    Ok((c, t))
}

pub(crate) fn global_stats<F: Float>(x: &[F]) -> NormStats {
    let n = x.len() as f64;
    let mean = x.iter().map(|v| v.f64()).sum::<f64>() / n;
    let var = x.iter().map(|v| (v.f64() - mean).powi(2)).sum::<f64>() / n;
    NormStats {
        mean: vec![mean],
        inv_std: vec![1.0 / (var + NORM_EPS).sqrt()],
    }
}

pub(crate) fn cumulative_stats<F: Float>(x: &[F], c: usize, t: usize) -> NormStats {
    let mut mean = Vec::with_capacity(t);
    let mut inv_std = Vec::with_capacity(t);
    let (mut s, mut q) = (0.0f64, 0.0f64);
    for col in 0..t {
        for ch in 0..c {
            let v = x[ch * t + col].f64();
            s += v;
            q += v * v;
        }
        let n = (c * (col + 1)) as f64;
        let m = s / n;
        let var = (q / n - m * m).max(0.0);
        mean.push(m);
        inv_std.push(1.0 / (var + NORM_EPS).sqrt());
    }
    NormStats { mean, inv_std }
}

pub(crate) fn apply<F: Float>(
    x: &[F],
    c: usize,
    t: usize,
    gain: &[F],
    bias: &[F],
    stats: &NormStats,
) -> Vec<F> {
    let mut out = vec![F::zero(); c * t];
    for ch in 0..c {
        let (g, b) = (gain[ch].f64(), bias[ch].f64());
        for col in 0..t {
            let (m, r) = stats.column(col);
            let i = ch * t + col;
            out[i] = F::of(g * (x[i].f64() - m) * r + b);
        }
    }
    out
}

pub(crate) struct NormGrads<F> {
    pub input: Option<Vec<F>>,
    pub gain: Option<Vec<F>>,
    pub bias: Option<Vec<F>>,
}

fn affine_grads<F: Float>(
    x: &[F],
    dy: &[F],
    c: usize,
    t: usize,
    stats: &NormStats,
) -> (Vec<F>, Vec<F>) {
    let mut dg = vec![F::zero(); c];
    let mut db = vec![F::zero(); c];
    for ch in 0..c {
        let (mut sg, mut sb) = (0.0, 0.0);
        for col in 0..t {
            let (m, r) = stats.column(col);
            let i = ch * t + col;
            sg += dy[i].f64() * (x[i].f64() - m) * r;
            sb += dy[i].f64();
        }
        dg[ch] = F::of(sg);
        db[ch] = F::of(sb);
    }
    (dg, db)
}

pub(crate) fn global_backward<F: Float>(
    x: &[F],
    gain: &[F],
    dy: &[F],
    c: usize,
    t: usize,
    stats: &NormStats,
    want: (bool, bool, bool),
) -> NormGrads<F> {
    let (m, r) = stats.column(0);
    let n = (c * t) as f64;
    let input = want.0.then(|| {
        let (mut sum_d, mut sum_dx) = (0.0, 0.0);
        for ch in 0..c {
            let g = gain[ch].f64();
            for col in 0..t {
                let i = ch * t + col;
                let d = dy[i].f64() * g;
                sum_d += d;
                sum_dx += d * (x[i].f64() - m) * r;
            }
        }
        let (mean_d, mean_dx) = (sum_d / n, sum_dx / n);
        let mut dx = vec![F::zero(); c * t];
        for ch in 0..c {
            let g = gain[ch].f64();
            for col in 0..t {
                let i = ch * t + col;
                let xhat = (x[i].f64() - m) * r;
                dx[i] = F::of(r * (dy[i].f64() * g - mean_d - xhat * mean_dx));
            }
        }
        dx
    });
    let (gain_g, bias_g) = if want.1 || want.2 {
        let (dg, db) = affine_grads(x, dy, c, t, stats);
        (want.1.then_some(dg), want.2.then_some(db))
    } else {
        (None, None)
    };
    NormGrads {
        input,
        gain: gain_g,
        bias: bias_g,
    }
}

pub(crate) fn cumulative_backward<F: Float>(
    x: &[F],
    gain: &[F],
    dy: &[F],
    c: usize,
    t: usize,
    stats: &NormStats,
    want: (bool, bool, bool),
) -> NormGrads<F> {
    let input = want.0.then(|| {
        // Per column: gradients w.r.t. the running sum S_t and sum of squares Q_t.
        let mut d_sum = vec![0.0f64; t];
        let mut d_sq = vec![0.0f64; t];
        let mut dx = vec![0.0f64; c * t];
        for col in 0..t {
            let (m, r) = stats.column(col);
            let n = (c * (col + 1)) as f64;
            let (mut sum_a, mut sum_ax) = (0.0, 0.0);
            for ch in 0..c {
                let i = ch * t + col;
                let a = dy[i].f64() * gain[ch].f64();
                sum_a += a;
                sum_ax += a * (x[i].f64() - m);
                dx[i] = a * r;
            }
            let d_var = -0.5 * r * r * r * sum_ax;
            let d_mean = -r * sum_a - 2.0 * m * d_var;
            d_sum[col] = d_mean / n;
            d_sq[col] = d_var / n;
        }
        let (mut acc_s, mut acc_q) = (0.0, 0.0);
        for col in (0..t).rev() {
            acc_s += d_sum[col];
            acc_q += d_sq[col];
            for ch in 0..c {
                let i = ch * t + col;
                dx[i] += acc_s + 2.0 * x[i].f64() * acc_q;
            }
        }
        dx.into_iter().map(F::of).collect()
    });
    let (gain_g, bias_g) = if want.1 || want.2 {
        let (dg, db) = affine_grads(x, dy, c, t, stats);
        (want.1.then_some(dg), want.2.then_some(db))
    } else {
        (None, None)
    };
    NormGrads {
        input,
        gain: gain_g,
        bias: bias_g,
    }
}

/// gLN: `gain·(x − mean)/sqrt(var + eps) + bias` with joint statistics.
pub fn global_layer_norm<F: Float>(
    x: &Tensor<F>,
    gain: &Tensor<F>,
    bias: &Tensor<F>,
) -> Result<Tensor<F>> {
    let (c, t) = check_affine("global_layer_norm", x, gain, bias)?;
    let stats = global_stats(x.values());
    let out = apply(x.values(), c, t, gain.values(), bias.values(), &stats);
    Ok(Tensor::from_parts(vec![c, t], out))
}

/// cLN: column `t` normalized with statistics of columns `0..=t`.
pub fn cumulative_layer_norm<F: Float>(
    x: &Tensor<F>,
    gain: &Tensor<F>,
    bias: &Tensor<F>,
) -> Result<Tensor<F>> {
    let (c, t) = check_affine("cumulative_layer_norm", x, gain, bias)?;
    let stats = cumulative_stats(x.values(), c, t);
    let out = apply(x.values(), c, t, gain.values(), bias.values(), &stats);
    Ok(Tensor::from_parts(vec![c, t], out))
}
