//! Dilated, grouped 1-d convolution over `[channels × time]` tensors.
//!
//! `groups == 1` goes through im2col + GEMM; grouped (and in particular
//! depthwise) convolutions use direct loops, which are cheap at `C_in/groups`
//! input channels per output.

use super::linalg::{gemm, MatRef};
use super::{check_finite, Float, Result, Tensor, TensorError};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Conv1dSpec {
    pub dilation: usize,
    pub groups: usize,
    pub pad_left: usize,
    pub pad_right: usize,
}

impl Default for Conv1dSpec {
    fn default() -> Self {
        Self {
            dilation: 1,
            groups: 1,
            pad_left: 0,
            pad_right: 0,
        }
    }
}

impl Conv1dSpec {
    pub fn pointwise() -> Self {
        Self::default()
    }

    pub fn depthwise(channels: usize, dilation: usize, pad: (usize, usize)) -> Self {
        Self {
            dilation,
            groups: channels,
            pad_left: pad.0,
            pad_right: pad.1,
        }
    }
}

#[derive(Clone, Copy, Debug)]
pub(crate) struct Geometry {
    pub c_in: usize,
    pub c_out: usize,
    pub k: usize,
    pub t_in: usize,
    pub t_out: usize,
    pub spec: Conv1dSpec,
}

impl Geometry {
    pub fn resolve<F: Float>(
        input: &Tensor<F>,
        weight: &Tensor<F>,
        bias: Option<&Tensor<F>>,
        spec: Conv1dSpec,
    ) -> Result<Self> {
        const OP: &str = "conv1d";
        let (c_in, t_in) = input.dims2(OP)?;
        let (c_out, c_in_g, k) = match weight.shape()[..] {
            [a, b, c] => (a, b, c),
            _ => {
                return Err(TensorError::Rank {
                    op: OP,
                    expected: 3,
                    found: weight.shape().to_vec(),
                })
            }
        };
        if spec.dilation == 0 || spec.groups == 0 || k == 0 {
            return Err(TensorError::Invalid {
                op: OP,
                reason: "dilation, groups and kernel size must be positive".into(),
            });
        }
        if c_in % spec.groups != 0 {
            return Err(TensorError::Invalid {
                op: OP,
                reason: format!(
                    "input channels {c_in} not divisible by groups {}",
                    spec.groups
                ),
            });
        }
        if c_out % spec.groups != 0 {
            return Err(TensorError::Invalid {
                op: OP,
                reason: format!(
                    "output channels {c_out} not divisible by groups {}",
                    spec.groups
                ),
            });
        }
        if c_in_g != c_in / spec.groups {
            return Err(TensorError::ShapeMismatch {
                op: OP,
                dim: "weight input channels per group",
                expected: c_in / spec.groups,
                found: c_in_g,
            });
        }
        if let Some(b) = bias {
            if b.shape() != [c_out] {
                return Err(TensorError::ShapeMismatch {
                    op: OP,
                    dim: "bias length",
                    expected: c_out,
                    found: b.len(),
                });
            }
        }
        let span = (k - 1) * spec.dilation;
        let padded = t_in + spec.pad_left + spec.pad_right;
        if padded < span + 1 {
            return Err(TensorError::ShapeMismatch {
                op: OP,
                dim: "padded time length",
                expected: span + 1,
                found: padded,
            });
        }
        Ok(Self {
            c_in,
            c_out,
            k,
            t_in,
            t_out: padded - span,
            spec,
        })
    }

    /// Input index offset of tap `kk` relative to the output position.
    fn offset(&self, kk: usize) -> isize {
        (kk * self.spec.dilation) as isize - self.spec.pad_left as isize
    }

    /// Output positions `t` whose tap `kk` lands inside the input.
    fn valid_range(&self, kk: usize) -> (usize, usize) {
        let off = self.offset(kk);
        let lo = (-off).max(0) as usize;
        let hi = (self.t_in as isize - off).clamp(0, self.t_out as isize) as usize;
        (lo.min(hi), hi)
    }

    fn is_plain_pointwise(&self) -> bool {
        self.k == 1 && self.spec.groups == 1 && self.spec.pad_left == 0 && self.spec.pad_right == 0
    }

    fn im2col<F: Float>(&self, x: &[F]) -> Vec<F> {
        let mut col = vec![F::zero(); self.c_in * self.k * self.t_out];
        for ci in 0..self.c_in {
            let row_in = &x[ci * self.t_in..(ci + 1) * self.t_in];
            for kk in 0..self.k {
                let (lo, hi) = self.valid_range(kk);
                let off = self.offset(kk);
                let row = &mut col[(ci * self.k + kk) * self.t_out..][..self.t_out];
                for t in lo..hi {
                    row[t] = row_in[(t as isize + off) as usize];
                }
            }
        }
        col
    }

    fn col2im<F: Float>(&self, col: &[F], dx: &mut [F]) {
        for ci in 0..self.c_in {
            let row_out = &mut dx[ci * self.t_in..(ci + 1) * self.t_in];
            for kk in 0..self.k {
                let (lo, hi) = self.valid_range(kk);
                let off = self.offset(kk);
                let row = &col[(ci * self.k + kk) * self.t_out..][..self.t_out];
                for t in lo..hi {
                    row_out[(t as isize + off) as usize] += row[t];
                }
            }
        }
    }
}

/// Forward convolution. Output length is `T + left + right − (K−1)·dilation`.
pub fn conv1d<F: Float>(
    input: &Tensor<F>,
    weight: &Tensor<F>,
    bias: Option<&Tensor<F>>,
    spec: Conv1dSpec,
) -> Result<Tensor<F>> {
    let g = Geometry::resolve(input, weight, bias, spec)?;
    check_finite("conv1d input", input.values())?;
    Ok(forward(
        &g,
        input.values(),
        weight.values(),
        bias.map(|b| b.values()),
    ))
}

pub(crate) fn forward<F: Float>(g: &Geometry, x: &[F], w: &[F], bias: Option<&[F]>) -> Tensor<F> {
    let mut out = vec![F::zero(); g.c_out * g.t_out];
    if let Some(b) = bias {
        for (co, &bv) in b.iter().enumerate() {
            out[co * g.t_out..(co + 1) * g.t_out]
                .iter_mut()
                .for_each(|v| *v = bv);
        }
    }
    if g.spec.groups == 1 {
        let ck = g.c_in * g.k;
        if g.is_plain_pointwise() {
            gemm(
                g.c_out,
                ck,
                g.t_out,
                MatRef::new(w),
                MatRef::new(x),
                &mut out,
                true,
            );
        } else {
            let col = g.im2col(x);
            gemm(
                g.c_out,
                ck,
                g.t_out,
                MatRef::new(w),
                MatRef::new(&col),
                &mut out,
                true,
            );
        }
    } else {
        let cin_g = g.c_in / g.spec.groups;
        let cout_g = g.c_out / g.spec.groups;
        for co in 0..g.c_out {
            let grp = co / cout_g;
            let out_row = &mut out[co * g.t_out..(co + 1) * g.t_out];
            for cl in 0..cin_g {
                let ci = grp * cin_g + cl;
                let in_row = &x[ci * g.t_in..(ci + 1) * g.t_in];
                for kk in 0..g.k {
                    let wv = w[(co * cin_g + cl) * g.k + kk];
                    let (lo, hi) = g.valid_range(kk);
                    if lo == hi {
                        continue;
                    }
                    let off = g.offset(kk);
                    let src = &in_row[(lo as isize + off) as usize..(hi as isize + off) as usize];
                    for (o, &s) in out_row[lo..hi].iter_mut().zip(src) {
                        *o += wv * s;
                    }
                }
            }
        }
    }
    Tensor::from_parts(vec![g.c_out, g.t_out], out)
}

pub(crate) struct ConvGrads<F> {
    pub input: Option<Vec<F>>,
    pub weight: Option<Vec<F>>,
    pub bias: Option<Vec<F>>,
}

pub(crate) fn backward<F: Float>(
    g: &Geometry,
    x: &[F],
    w: &[F],
    dy: &[F],
    want: (bool, bool, bool),
) -> ConvGrads<F> {
    let (want_x, want_w, want_b) = want;
    let bias = want_b.then(|| {
        dy.chunks(g.t_out)
            .map(|row| row.iter().copied().sum())
            .collect()
    });
    if g.spec.groups == 1 {
        let ck = g.c_in * g.k;
        let plain = g.is_plain_pointwise();
        let weight = want_w.then(|| {
            let mut dw = vec![F::zero(); g.c_out * ck];
            if plain {
                gemm(
                    g.c_out,
                    g.t_out,
                    ck,
                    MatRef::new(dy),
                    MatRef::t(x),
                    &mut dw,
                    false,
                );
            } else {
                let col = g.im2col(x);
                gemm(
                    g.c_out,
                    g.t_out,
                    ck,
                    MatRef::new(dy),
                    MatRef::t(&col),
                    &mut dw,
                    false,
                );
            }
            dw
        });
        let input = want_x.then(|| {
            let mut dcol = vec![F::zero(); ck * g.t_out];
            gemm(
                ck,
                g.c_out,
                g.t_out,
                MatRef::t(w),
                MatRef::new(dy),
                &mut dcol,
                false,
            );
            if plain {
                dcol
            } else {
                let mut dx = vec![F::zero(); g.c_in * g.t_in];
                g.col2im(&dcol, &mut dx);
                dx
            }
        });
        return ConvGrads {
            input,
            weight,
            bias,
        };
    }

    let cin_g = g.c_in / g.spec.groups;
    let cout_g = g.c_out / g.spec.groups;
    let mut dx = want_x.then(|| vec![F::zero(); g.c_in * g.t_in]);
    let mut dw = want_w.then(|| vec![F::zero(); w.len()]);
    for co in 0..g.c_out {
        let grp = co / cout_g;
        let dy_row = &dy[co * g.t_out..(co + 1) * g.t_out];
        for cl in 0..cin_g {
            let ci = grp * cin_g + cl;
            for kk in 0..g.k {
                let widx = (co * cin_g + cl) * g.k + kk;
                let (lo, hi) = g.valid_range(kk);
                if lo == hi {
                    continue;
                }
                let off = g.offset(kk);
                let a = (lo as isize + off) as usize;
                let b = (hi as isize + off) as usize;
                if let Some(dw) = dw.as_mut() {
                    let src = &x[ci * g.t_in..][a..b];
                    dw[widx] += dy_row[lo..hi].iter().zip(src).map(|(&d, &s)| d * s).sum();
                }
                if let Some(dx) = dx.as_mut() {
                    let wv = w[widx];
                    let dst = &mut dx[ci * g.t_in..][a..b];
                    for (o, &d) in dst.iter_mut().zip(&dy_row[lo..hi]) {
                        *o += wv * d;
                    }
                }
            }
        }
    }
    ConvGrads {
        input: dx,
        weight: dw,
        bias,
    }
}
