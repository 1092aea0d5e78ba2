//! Append-only computation tape.
//!
//! Every operation pushes a node holding its value and enough saved state to
//! run its vector-Jacobian product. Nodes only ever reference earlier nodes,
//! so reverse index order is a valid topological order for `backward`.

use super::conv::{self, Conv1dSpec, Geometry};
use super::linalg::{gemm, MatRef};
use super::norm::{self, NormStats};
use super::{
    check_finite, clamp_probability, sigmoid, softmax, Float, Result, Tensor, TensorError,
};

/// Handle to a node on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

enum Slot<'p, F> {
    Owned(Tensor<F>),
    Borrowed(&'p Tensor<F>),
}

impl<F> Slot<'_, F> {
    fn get(&self) -> &Tensor<F> {
        match self {
            Slot::Owned(t) => t,
            Slot::Borrowed(t) => t,
        }
    }
}

enum Op<F> {
    Leaf,
    Conv1d {
        input: Var,
        weight: Var,
        bias: Option<Var>,
        geometry: Geometry,
    },
    MatMul {
        a: Var,
        b: Var,
        dims: (usize, usize, usize),
    },
    Relu(Var),
    Prelu {
        x: Var,
        alpha: Var,
    },
    Norm {
        x: Var,
        gain: Var,
        bias: Var,
        cumulative: bool,
        stats: NormStats,
    },
    Linear {
        x: Var,
        weight: Var,
        bias: Var,
    },
    Sigmoid(Var),
    Softmax(Var),
    Bce {
        p: Var,
        target: Vec<F>,
    },
    Add(Var, Var),
    Mul(Var, Var),
    Scale(Var, F),
    Sum(Var),
    MeanTime(Var),
    ConcatRows(Vec<Var>),
}

impl<F> Op<F> {
    fn inputs(&self) -> Vec<Var> {
        match self {
            Op::Leaf => vec![],
            Op::Conv1d {
                input,
                weight,
                bias,
                ..
            } => {
                let mut v = vec![*input, *weight];
                v.extend(bias);
                v
            }
            Op::MatMul { a, b, .. } | Op::Add(a, b) | Op::Mul(a, b) => vec![*a, *b],
            Op::Prelu { x, alpha } => vec![*x, *alpha],
            Op::Norm { x, gain, bias, .. }
            | Op::Linear {
                x,
                weight: gain,
                bias,
            } => vec![*x, *gain, *bias],
            Op::Relu(x)
            | Op::Sigmoid(x)
            | Op::Softmax(x)
            | Op::Scale(x, _)
            | Op::Sum(x)
            | Op::MeanTime(x) => {
                vec![*x]
            }
            Op::Bce { p, .. } => vec![*p],
            Op::ConcatRows(parts) => parts.clone(),
        }
    }
}

struct Node<'p, F> {
    value: Slot<'p, F>,
    op: Op<F>,
    needs_grad: bool,
}

/// Records a forward pass for later differentiation.
///
/// `'p` is the lifetime of borrowed parameter tensors, which lets many tapes
/// read one frozen parameter set without copying it.
pub struct Tape<'p, F: Float> {
    nodes: Vec<Node<'p, F>>,
}

impl<F: Float> Default for Tape<'_, F> {
    fn default() -> Self {
        Self::new()
    }
}

impl<'p, F: Float> Tape<'p, F> {
    pub fn new() -> Self {
        Self { nodes: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, value: Slot<'p, F>, op: Op<F>) -> Var {
        let needs_grad = match &op {
            Op::Leaf => value.get().requires_grad(),
            op => op.inputs().iter().any(|v| self.nodes[v.0].needs_grad),
        };
        self.nodes.push(Node {
            value,
            op,
            needs_grad,
        });
        Var(self.nodes.len() - 1)
    }

    fn push_owned(&mut self, value: Tensor<F>, op: Op<F>) -> Var {
        self.push(Slot::Owned(value), op)
    }

    /// Owned leaf; gradients are tracked when `tensor.requires_grad()`.
    pub fn leaf(&mut self, tensor: Tensor<F>) -> Result<Var> {
        check_finite("leaf", tensor.values())?;
        Ok(self.push(Slot::Owned(tensor), Op::Leaf))
    }

    /// Owned leaf that never receives a gradient.
    pub fn constant(&mut self, tensor: Tensor<F>) -> Result<Var> {
        self.leaf(tensor.with_requires_grad(false))
    }

    /// Borrowed leaf, typically a model parameter.
    pub fn param(&mut self, tensor: &'p Tensor<F>) -> Var {
        self.push(Slot::Borrowed(tensor), Op::Leaf)
    }

    pub fn value(&self, v: Var) -> &Tensor<F> {
        self.nodes[v.0].value.get()
    }

    pub fn requires_grad(&self, v: Var) -> bool {
        self.nodes[v.0].needs_grad
    }

    pub fn conv1d(
        &mut self,
        input: Var,
        weight: Var,
        bias: Option<Var>,
        spec: Conv1dSpec,
    ) -> Result<Var> {
        let geometry = Geometry::resolve(
            self.value(input),
            self.value(weight),
            bias.map(|b| self.value(b)),
            spec,
        )?;
        check_finite("conv1d input", self.value(input).values())?;
        let out = conv::forward(
            &geometry,
            self.value(input).values(),
            self.value(weight).values(),
            bias.map(|b| self.value(b).values()),
        );
        Ok(self.push_owned(
            out,
            Op::Conv1d {
                input,
                weight,
                bias,
                geometry,
            },
        ))
    }

    /// `[m×k] · [k×n]` matrix product.
    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (m, k) = self.value(a).dims2("matmul")?;
        let (k2, n) = self.value(b).dims2("matmul")?;
        if k != k2 {
            return Err(TensorError::ShapeMismatch {
                op: "matmul",
                dim: "inner dimension",
                expected: k,
                found: k2,
            });
        }
        let mut out = vec![F::zero(); m * n];
        gemm(
            m,
            k,
            n,
            MatRef::new(self.value(a).values()),
            MatRef::new(self.value(b).values()),
            &mut out,
            false,
        );
        Ok(self.push_owned(
            Tensor::from_parts(vec![m, n], out),
            Op::MatMul {
                a,
                b,
                dims: (m, k, n),
            },
        ))
    }

    pub fn relu(&mut self, x: Var) -> Var {
        let out = super::relu(self.value(x));
        self.push_owned(out, Op::Relu(x))
    }

    /// PReLU with a single learnable slope (`alpha` has one element).
    pub fn prelu(&mut self, x: Var, alpha: Var) -> Result<Var> {
        let a = self.value(alpha);
        if a.len() != 1 {
            return Err(TensorError::ShapeMismatch {
                op: "prelu",
                dim: "alpha length",
                expected: 1,
                found: a.len(),
            });
        }
        let out = super::prelu(self.value(x), a.values()[0]);
        Ok(self.push_owned(out, Op::Prelu { x, alpha }))
    }

    pub fn global_layer_norm(&mut self, x: Var, gain: Var, bias: Var) -> Result<Var> {
        self.layer_norm(x, gain, bias, false)
    }

    pub fn cumulative_layer_norm(&mut self, x: Var, gain: Var, bias: Var) -> Result<Var> {
        self.layer_norm(x, gain, bias, true)
    }

    fn layer_norm(&mut self, x: Var, gain: Var, bias: Var, cumulative: bool) -> Result<Var> {
        let op_name = if cumulative {
            "cumulative_layer_norm"
        } else {
            "global_layer_norm"
        };
        let (xv, gv, bv) = (self.value(x), self.value(gain), self.value(bias));
        let (c, t) = norm::check_affine(op_name, xv, gv, bv)?;
        let stats = if cumulative {
            norm::cumulative_stats(xv.values(), c, t)
        } else {
            norm::global_stats(xv.values())
        };
        let out = norm::apply(xv.values(), c, t, gv.values(), bv.values(), &stats);
        Ok(self.push_owned(
            Tensor::from_parts(vec![c, t], out),
            Op::Norm {
                x,
                gain,
                bias,
                cumulative,
                stats,
            },
        ))
    }

    pub fn linear(&mut self, x: Var, weight: Var, bias: Var) -> Result<Var> {
        let out = super::linear(self.value(x), self.value(weight), self.value(bias))?;
        Ok(self.push_owned(out, Op::Linear { x, weight, bias }))
    }

    pub fn sigmoid(&mut self, x: Var) -> Var {
        let xv = self.value(x);
        let out = Tensor::from_parts(
            xv.shape().to_vec(),
            xv.values().iter().map(|&v| sigmoid(v)).collect(),
        );
        self.push_owned(out, Op::Sigmoid(x))
    }

    pub fn softmax(&mut self, x: Var) -> Result<Var> {
        let xv = self.value(x);
        xv.dims1("softmax")?;
        let out = Tensor::from_parts(xv.shape().to_vec(), softmax(xv.values()));
        Ok(self.push_owned(out, Op::Softmax(x)))
    }

    /// Summed binary cross-entropy against a fixed 0/1 target.
    pub fn binary_cross_entropy(&mut self, p: Var, target: &[F]) -> Result<Var> {
        let loss = super::binary_cross_entropy(self.value(p).values(), target)?;
        Ok(self.push_owned(
            Tensor::scalar(loss),
            Op::Bce {
                p,
                target: target.to_vec(),
            },
        ))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let (av, bv) = (self.value(a), self.value(b));
        same_shape("add", av, bv)?;
        let out: Vec<F> = av
            .values()
            .iter()
            .zip(bv.values())
            .map(|(&x, &y)| x + y)
            .collect();
        Ok(self.push_owned(Tensor::from_parts(av.shape().to_vec(), out), Op::Add(a, b)))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (av, bv) = (self.value(a), self.value(b));
        same_shape("mul", av, bv)?;
        let out: Vec<F> = av
            .values()
            .iter()
            .zip(bv.values())
            .map(|(&x, &y)| x * y)
            .collect();
        Ok(self.push_owned(Tensor::from_parts(av.shape().to_vec(), out), Op::Mul(a, b)))
    }

    pub fn scale(&mut self, x: Var, factor: F) -> Var {
        let xv = self.value(x);
        let out = Tensor::from_parts(
            xv.shape().to_vec(),
            xv.values().iter().map(|&v| v * factor).collect(),
        );
        self.push_owned(out, Op::Scale(x, factor))
    }

    /// Sum of all elements as a one-element tensor.
    pub fn sum(&mut self, x: Var) -> Var {
        let total = self.value(x).values().iter().copied().sum();
        self.push_owned(Tensor::scalar(total), Op::Sum(x))
    }

    /// `[C×T] → [C]` mean over time.
    pub fn mean_time(&mut self, x: Var) -> Result<Var> {
        let xv = self.value(x);
        let (c, t) = xv.dims2("mean_time")?;
        if t == 0 {
            return Err(TensorError::Invalid {
                op: "mean_time",
                reason: "no frames to pool".into(),
            });
        }
        let scale = F::one() / F::of(t as f64);
        let out = xv
            .values()
            .chunks(t)
            .map(|row| row.iter().copied().sum::<F>() * scale)
            .collect();
        Ok(self.push_owned(Tensor::from_parts(vec![c], out), Op::MeanTime(x)))
    }

    /// Concatenates `[C_i×T]` tensors along the channel axis.
    pub fn concat_rows(&mut self, parts: &[Var]) -> Result<Var> {
        let Some(&first) = parts.first() else {
            return Err(TensorError::Invalid {
                op: "concat_rows",
                reason: "nothing to concatenate".into(),
            });
        };
        let (_, t) = self.value(first).dims2("concat_rows")?;
        let mut rows = 0;
        let mut out = Vec::new();
        for &p in parts {
            let (c, tp) = self.value(p).dims2("concat_rows")?;
            if tp != t {
                return Err(TensorError::ShapeMismatch {
                    op: "concat_rows",
                    dim: "time steps",
                    expected: t,
                    found: tp,
                });
            }
            rows += c;
            out.extend_from_slice(self.value(p).values());
        }
        Ok(self.push_owned(
            Tensor::from_parts(vec![rows, t], out),
            Op::ConcatRows(parts.to_vec()),
        ))
    }

    /// Reverse sweep from a scalar `loss`.
    pub fn backward(&self, loss: Var) -> Result<Gradients<F>> {
        let lv = self.value(loss);
        if lv.len() != 1 {
            return Err(TensorError::NonScalarLoss(lv.shape().to_vec()));
        }
        check_finite("loss", lv.values())?;
        let mut grads: Vec<Option<Vec<F>>> = (0..self.nodes.len()).map(|_| None).collect();
        grads[loss.0] = Some(vec![F::one()]);
        for idx in (0..=loss.0).rev() {
            let node = &self.nodes[idx];
            for input in node.op.inputs() {
                if input.0 >= idx {
                    return Err(TensorError::Cycle {
                        node: idx,
                        input: input.0,
                    });
                }
            }
            if !node.needs_grad {
                continue;
            }
            let Some(dy) = grads[idx].take() else {
                continue;
            };
            self.propagate(idx, &dy, &mut grads);
            grads[idx] = Some(dy);
        }
        Ok(Gradients { grads })
    }

    fn wants(&self, v: Var) -> bool {
        self.nodes[v.0].needs_grad
    }

    fn propagate(&self, idx: usize, dy: &[F], grads: &mut [Option<Vec<F>>]) {
        let node = &self.nodes[idx];
        let out = node.value.get().values();
        match &node.op {
            Op::Leaf => {}
            Op::Conv1d {
                input,
                weight,
                bias,
                geometry,
            } => {
                let want = (
                    self.wants(*input),
                    self.wants(*weight),
                    bias.is_some_and(|b| self.wants(b)),
                );
                let g = conv::backward(
                    geometry,
                    self.value(*input).values(),
                    self.value(*weight).values(),
                    dy,
                    want,
                );
                accumulate(grads, *input, g.input);
                accumulate(grads, *weight, g.weight);
                if let Some(b) = bias {
                    accumulate(grads, *b, g.bias);
                }
            }
            Op::MatMul {
                a,
                b,
                dims: (m, k, n),
            } => {
                if self.wants(*a) {
                    let mut da = vec![F::zero(); m * k];
                    gemm(
                        *m,
                        *n,
                        *k,
                        MatRef::new(dy),
                        MatRef::t(self.value(*b).values()),
                        &mut da,
                        false,
                    );
                    accumulate(grads, *a, Some(da));
                }
                if self.wants(*b) {
                    let mut db = vec![F::zero(); k * n];
                    gemm(
                        *k,
                        *m,
                        *n,
                        MatRef::t(self.value(*a).values()),
                        MatRef::new(dy),
                        &mut db,
                        false,
                    );
                    accumulate(grads, *b, Some(db));
                }
            }
            Op::Relu(x) => {
                let xv = self.value(*x).values();
                let dx = xv
                    .iter()
                    .zip(dy)
                    .map(|(&x, &d)| if x > F::zero() { d } else { F::zero() })
                    .collect();
                accumulate(grads, *x, Some(dx));
            }
            Op::Prelu { x, alpha } => {
                let xv = self.value(*x).values();
                let a = self.value(*alpha).values()[0];
                if self.wants(*x) {
                    let dx = xv
                        .iter()
                        .zip(dy)
                        .map(|(&x, &d)| {
                            if x > F::zero() {
                                d
                            } else if x < F::zero() {
                                a * d
                            } else {
                                F::zero()
                            }
                        })
                        .collect();
                    accumulate(grads, *x, Some(dx));
                }
                if self.wants(*alpha) {
                    let da = xv
                        .iter()
                        .zip(dy)
                        .filter(|(&x, _)| x < F::zero())
                        .map(|(&x, &d)| x * d)
                        .sum();
                    accumulate(grads, *alpha, Some(vec![da]));
                }
            }
            Op::Norm {
                x,
                gain,
                bias,
                cumulative,
                stats,
            } => {
                let (c, t) = self.value(*x).dims2("norm").expect("validated in forward");
                let want = (self.wants(*x), self.wants(*gain), self.wants(*bias));
                let xv = self.value(*x).values();
                let gv = self.value(*gain).values();
                let g = if *cumulative {
                    norm::cumulative_backward(xv, gv, dy, c, t, stats, want)
                } else {
                    norm::global_backward(xv, gv, dy, c, t, stats, want)
                };
                accumulate(grads, *x, g.input);
                accumulate(grads, *gain, g.gain);
                accumulate(grads, *bias, g.bias);
            }
            Op::Linear { x, weight, bias } => {
                let xv = self.value(*x).values();
                let wv = self.value(*weight).values();
                let (dout, din) = (dy.len(), xv.len());
                if self.wants(*x) {
                    let mut dx = vec![F::zero(); din];
                    gemm(din, dout, 1, MatRef::t(wv), MatRef::new(dy), &mut dx, false);
                    accumulate(grads, *x, Some(dx));
                }
                if self.wants(*weight) {
                    let mut dw = vec![F::zero(); dout * din];
                    gemm(
                        dout,
                        1,
                        din,
                        MatRef::new(dy),
                        MatRef::new(xv),
                        &mut dw,
                        false,
                    );
                    accumulate(grads, *weight, Some(dw));
                }
                if self.wants(*bias) {
                    accumulate(grads, *bias, Some(dy.to_vec()));
                }
            }
            Op::Sigmoid(x) => {
                let dx = out
                    .iter()
                    .zip(dy)
                    .map(|(&s, &d)| d * s * (F::one() - s))
                    .collect();
                accumulate(grads, *x, Some(dx));
            }
            Op::Softmax(x) => {
                let dot: F = out.iter().zip(dy).map(|(&s, &d)| s * d).sum();
                let dx = out.iter().zip(dy).map(|(&s, &d)| s * (d - dot)).collect();
                accumulate(grads, *x, Some(dx));
            }
            Op::Bce { p, target } => {
                // Derivative taken at the clamped probability.
                let dx = self
                    .value(*p)
                    .values()
                    .iter()
                    .zip(target)
                    .map(|(&p, &y)| {
                        let p = clamp_probability(p);
                        dy[0] * (-(y / p) + (F::one() - y) / (F::one() - p))
                    })
                    .collect();
                accumulate(grads, *p, Some(dx));
            }
            Op::Add(a, b) => {
                if self.wants(*a) {
                    accumulate(grads, *a, Some(dy.to_vec()));
                }
                if self.wants(*b) {
                    accumulate(grads, *b, Some(dy.to_vec()));
                }
            }
            Op::Mul(a, b) => {
                let (av, bv) = (self.value(*a).values(), self.value(*b).values());
                if self.wants(*a) {
                    accumulate(
                        grads,
                        *a,
                        Some(dy.iter().zip(bv).map(|(&d, &y)| d * y).collect()),
                    );
                }
                if self.wants(*b) {
                    accumulate(
                        grads,
                        *b,
                        Some(dy.iter().zip(av).map(|(&d, &x)| d * x).collect()),
                    );
                }
            }
            Op::Scale(x, factor) => {
                accumulate(grads, *x, Some(dy.iter().map(|&d| d * *factor).collect()));
            }
            Op::Sum(x) => {
                let n = self.value(*x).len();
                accumulate(grads, *x, Some(vec![dy[0]; n]));
            }
            Op::MeanTime(x) => {
                let (c, t) = self
                    .value(*x)
                    .dims2("mean_time")
                    .expect("validated in forward");
                let scale = F::one() / F::of(t as f64);
                let mut dx = Vec::with_capacity(c * t);
                for &d in dy.iter().take(c) {
                    dx.extend(std::iter::repeat_n(d * scale, t));
                }
                accumulate(grads, *x, Some(dx));
            }
            Op::ConcatRows(parts) => {
                let mut offset = 0;
                for &p in parts {
                    let n = self.value(p).len();
                    if self.wants(p) {
                        accumulate(grads, p, Some(dy[offset..offset + n].to_vec()));
                    }
                    offset += n;
                }
            }
        }
    }
}

fn same_shape<F: Float>(op: &'static str, a: &Tensor<F>, b: &Tensor<F>) -> Result<()> {
    if a.shape() != b.shape() {
        return Err(TensorError::ShapeMismatch {
            op,
            dim: "element count",
            expected: a.len(),
            found: b.len(),
        });
    }
    Ok(())
}

fn accumulate<F: Float>(grads: &mut [Option<Vec<F>>], v: Var, g: Option<Vec<F>>) {
    let Some(g) = g else { return };
    match &mut grads[v.0] {
        Some(existing) => existing.iter_mut().zip(&g).for_each(|(e, &x)| *e += x),
        slot @ None => *slot = Some(g),
    }
}

/// Gradients produced by [`Tape::backward`], indexed by [`Var`].
pub struct Gradients<F> {
    grads: Vec<Option<Vec<F>>>,
}

impl<F: Float> Gradients<F> {
    pub fn get(&self, v: Var) -> Option<&[F]> {
        self.grads.get(v.0).and_then(|g| g.as_deref())
    }

    pub fn take(&mut self, v: Var) -> Option<Vec<F>> {
        self.grads.get_mut(v.0).and_then(Option::take)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn leaf(tape: &mut Tape<'_, f64>, v: &[f64]) -> Var {
        tape.leaf(Tensor::vector(v).unwrap().with_requires_grad(true))
            .unwrap()
    }

    #[test]
    fn sum_gradient_is_ones() {
        let mut tape = Tape::new();
        let x = leaf(&mut tape, &[1.0, -2.0, 3.5]);
        let s = tape.sum(x);
        let g = tape.backward(s).unwrap();
        assert_eq!(g.get(x).unwrap(), &[1.0, 1.0, 1.0]);
    }

    #[test]
    fn sum_of_squares_gradient_is_twice_x() {
        let mut tape = Tape::new();
        let x = leaf(&mut tape, &[1.0, -2.0, 3.5]);
        let sq = tape.mul(x, x).unwrap();
        let s = tape.sum(sq);
        let g = tape.backward(s).unwrap();
        assert_eq!(g.get(x).unwrap(), &[2.0, -4.0, 7.0]);
    }

    #[test]
    fn relu_gradient() {
        let mut tape = Tape::new();
        let x = leaf(&mut tape, &[3.0, -1.0, 0.0]);
        let y = tape.relu(x);
        let s = tape.sum(y);
        let g = tape.backward(s).unwrap();
        assert_eq!(g.get(x).unwrap(), &[1.0, 0.0, 0.0]);
    }

    #[test]
    fn prelu_alpha_gradient_at_negative_input() {
        let mut tape = Tape::new();
        let x = leaf(&mut tape, &[-2.0]);
        let alpha = tape
            .leaf(Tensor::scalar(0.25).with_requires_grad(true))
            .unwrap();
        let y = tape.prelu(x, alpha).unwrap();
        assert_eq!(tape.value(y).values(), &[-0.5]);
        let s = tape.sum(y);
        let g = tape.backward(s).unwrap();
        assert_eq!(g.get(alpha).unwrap(), &[-2.0]);
        assert_eq!(g.get(x).unwrap(), &[0.25]);
    }

    #[test]
    fn non_scalar_loss_rejected() {
        let mut tape = Tape::new();
        let x = leaf(&mut tape, &[1.0, 2.0]);
        assert!(matches!(
            tape.backward(x),
            Err(TensorError::NonScalarLoss(_))
        ));
    }

    #[test]
    fn constants_receive_no_gradient() {
        let mut tape = Tape::new();
        let x = leaf(&mut tape, &[1.0, 2.0]);
        let c = tape.constant(Tensor::vector(&[3.0, 4.0]).unwrap()).unwrap();
        let y = tape.mul(x, c).unwrap();
        let s = tape.sum(y);
        let g = tape.backward(s).unwrap();
        assert_eq!(g.get(x).unwrap(), &[3.0, 4.0]);
        assert!(g.get(c).is_none());
    }

    #[test]
    fn shared_input_accumulates() {
        let mut tape = Tape::new();
        let x = leaf(&mut tape, &[2.0]);
        let a = tape.scale(x, 3.0);
        let b = tape.add(a, x).unwrap();
        let s = tape.sum(b);
        let g = tape.backward(s).unwrap();
        assert_eq!(g.get(x).unwrap(), &[4.0]);
    }

    #[test]
    fn leaf_rejects_non_finite() {
        let mut tape = Tape::<f64>::new();
        let t = Tensor::from_parts(vec![1], vec![f64::NAN]);
        assert!(matches!(tape.leaf(t), Err(TensorError::NonFinite { .. })));
    }
}
