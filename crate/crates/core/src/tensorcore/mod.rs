//! Dense tensors with a tape-based reverse-mode differentiator.
//!
//! Only the operations the network needs are provided: dilated grouped 1-D
//! convolution, matrix products, ReLU/PReLU, global and cumulative layer
//! normalization, linear layers, sigmoid/softmax, binary cross-entropy and
//! the Adam optimizer. Everything is generic over [`Float`] so that the same
//! code path trains in `f32` and is gradient-checked in `f64`.

mod conv;
mod gradcheck;
pub mod linalg;
mod norm;
mod optim;
mod tape;

use std::fmt::{Debug, Display};
use std::iter::Sum;
use std::ops::{AddAssign, MulAssign, SubAssign};

use thiserror::Error;

pub use conv::{conv1d, Conv1dSpec};
pub use gradcheck::{grad_check, relative_error};
pub use norm::{cumulative_layer_norm, global_layer_norm, NORM_EPS};
pub use optim::{adam_step, exp_lr_schedule, AdamState};
pub use tape::{Gradients, Tape, Var};

/// Scalar element type of a [`Tensor`].
pub trait Float:
    num_traits::Float
    + num_traits::FromPrimitive
    + Default
    + Debug
    + Display
    + Send
    + Sync
    + Sum
    + AddAssign
    + SubAssign
    + MulAssign
    + 'static
{
    /// Raw strided GEMM: `c = a·b + beta·c`.
    ///
    /// # Safety
    /// Pointers and strides must describe valid, non-aliasing `m×k`, `k×n`
    /// and `m×n` matrices.
    #[allow(clippy::too_many_arguments)]
    unsafe fn gemm_raw(
        m: usize,
        k: usize,
        n: usize,
        a: *const Self,
        rsa: isize,
        csa: isize,
        b: *const Self,
        rsb: isize,
        csb: isize,
        beta: Self,
        c: *mut Self,
        rsc: isize,
        csc: isize,
    );

    fn of(v: f64) -> Self {
        Self::from_f64(v).expect("f64 is representable")
    }

    fn f64(self) -> f64 {
        self.to_f64().expect("float converts to f64")
    }
}

impl Float for f32 {
    unsafe fn gemm_raw(
        m: usize,
        k: usize,
        n: usize,
        a: *const f32,
        rsa: isize,
        csa: isize,
        b: *const f32,
        rsb: isize,
        csb: isize,
        beta: f32,
        c: *mut f32,
        rsc: isize,
        csc: isize,
    ) {
        matrixmultiply::sgemm(m, k, n, 1.0, a, rsa, csa, b, rsb, csb, beta, c, rsc, csc)
    }
}

impl Float for f64 {
    unsafe fn gemm_raw(
        m: usize,
        k: usize,
        n: usize,
        a: *const f64,
        rsa: isize,
        csa: isize,
        b: *const f64,
        rsb: isize,
        csb: isize,
        beta: f64,
        c: *mut f64,
        rsc: isize,
        csc: isize,
    ) {
        matrixmultiply::dgemm(m, k, n, 1.0, a, rsa, csa, b, rsb, csb, beta, c, rsc, csc)
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TensorError {
    #[error("shape {shape:?} holds {expected} values but {actual} were supplied")]
    ValueCount {
        shape: Vec<usize>,
        expected: usize,
        actual: usize,
    },
    #[error("{op}: {dim} mismatch (expected {expected}, found {found})")]
    ShapeMismatch {
        op: &'static str,
        dim: &'static str,
        expected: usize,
        found: usize,
    },
    #[error("{op}: expected a {expected}-d tensor, found shape {found:?}")]
    Rank {
        op: &'static str,
        expected: usize,
        found: Vec<usize>,
    },
    #[error("{op}: non-finite value at index {index}")]
    NonFinite { op: &'static str, index: usize },
    #[error("{op}: {reason}")]
    Invalid { op: &'static str, reason: String },
    #[error("computation graph cycle: node {node} depends on node {input}")]
    Cycle { node: usize, input: usize },
    #[error("backward needs a scalar loss, found shape {0:?}")]
    NonScalarLoss(Vec<usize>),
    #[error("binary cross-entropy target {value} at index {index} is not 0 or 1")]
    BadTarget { index: usize, value: f64 },
}

pub type Result<T, E = TensorError> = std::result::Result<T, E>;

/// Dense row-major tensor with an optional gradient slot.
#[derive(Clone, Debug, PartialEq)]
pub struct Tensor<F = f32> {
    shape: Vec<usize>,
    values: Vec<F>,
    grad: Option<Vec<F>>,
    requires_grad: bool,
}

impl<F: Float> Tensor<F> {
    /// Builds a tensor, rejecting a value count that disagrees with `shape`
    /// and any NaN or infinity.
    pub fn new(shape: impl Into<Vec<usize>>, values: Vec<F>) -> Result<Self> {
        let shape = shape.into();
        let expected: usize = shape.iter().product();
        if expected != values.len() {
            return Err(TensorError::ValueCount {
                shape,
                expected,
                actual: values.len(),
            });
        }
        check_finite("tensor", &values)?;
        Ok(Self {
            shape,
            values,
            grad: None,
            requires_grad: false,
        })
    }

    pub fn zeros(shape: impl Into<Vec<usize>>) -> Self {
        let shape = shape.into();
        let len = shape.iter().product();
        Self {
            shape,
            values: vec![F::zero(); len],
            grad: None,
            requires_grad: false,
        }
    }

    pub fn full(shape: impl Into<Vec<usize>>, value: F) -> Self {
        let mut t = Self::zeros(shape);
        t.values.iter_mut().for_each(|v| *v = value);
        t
    }

    pub fn scalar(value: F) -> Self {
        Self {
            shape: vec![1],
            values: vec![value],
            grad: None,
            requires_grad: false,
        }
    }

    /// 1-d tensor from a slice.
    pub fn vector(values: &[F]) -> Result<Self> {
        Self::new(vec![values.len()], values.to_vec())
    }

    /// Internal constructor for op outputs whose shape is known to agree.
    pub(crate) fn from_parts(shape: Vec<usize>, values: Vec<F>) -> Self {
        debug_assert_eq!(shape.iter().product::<usize>(), values.len());
        Self {
            shape,
            values,
            grad: None,
            requires_grad: false,
        }
    }

    pub fn with_requires_grad(mut self, flag: bool) -> Self {
        self.requires_grad = flag;
        self
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn values(&self) -> &[F] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [F] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<F> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn requires_grad(&self) -> bool {
        self.requires_grad
    }

    pub fn set_requires_grad(&mut self, flag: bool) {
        self.requires_grad = flag;
    }

    pub fn grad(&self) -> Option<&[F]> {
        self.grad.as_deref()
    }

    /// Installs a gradient; it must have one entry per value.
    pub fn set_grad(&mut self, grad: Vec<F>) -> Result<()> {
        if grad.len() != self.values.len() {
            return Err(TensorError::ShapeMismatch {
                op: "set_grad",
                dim: "gradient length",
                expected: self.values.len(),
                found: grad.len(),
            });
        }
        self.grad = Some(grad);
        Ok(())
    }

    pub fn take_grad(&mut self) -> Option<Vec<F>> {
        self.grad.take()
    }

    pub fn zero_grad(&mut self) {
        self.grad = None;
    }

    /// `(rows, cols)` of a 2-d tensor.
    pub fn dims2(&self, op: &'static str) -> Result<(usize, usize)> {
        match self.shape[..] {
            [r, c] => Ok((r, c)),
            _ => Err(TensorError::Rank {
                op,
                expected: 2,
                found: self.shape.clone(),
            }),
        }
    }

    /// Length of a 1-d tensor.
    pub fn dims1(&self, op: &'static str) -> Result<usize> {
        match self.shape[..] {
            [n] => Ok(n),
            _ => Err(TensorError::Rank {
                op,
                expected: 1,
                found: self.shape.clone(),
            }),
        }
    }

    pub fn reshape(mut self, shape: impl Into<Vec<usize>>) -> Result<Self> {
        let shape = shape.into();
        let expected: usize = shape.iter().product();
        if expected != self.values.len() {
            return Err(TensorError::ValueCount {
                shape,
                expected,
                actual: self.values.len(),
            });
        }
        self.shape = shape;
        if self.grad.is_some() {
            self.grad = None;
        }
        Ok(self)
    }

    /// Converts element type, e.g. `f32` parameters into `f64` for checking.
    pub fn cast<G: Float>(&self) -> Tensor<G> {
        Tensor {
            shape: self.shape.clone(),
            values: self.values.iter().map(|v| G::of(v.f64())).collect(),
            grad: self
                .grad
                .as_ref()
                .map(|g| g.iter().map(|v| G::of(v.f64())).collect()),
            requires_grad: self.requires_grad,
        }
    }
}

pub(crate) fn check_finite<F: Float>(op: &'static str, values: &[F]) -> Result<()> {
    match values.iter().position(|v| !v.is_finite()) {
        Some(index) => Err(TensorError::NonFinite { op, index }),
        None => Ok(()),
    }
}

/// Elementwise `max(x, 0)`.
pub fn relu<F: Float>(x: &Tensor<F>) -> Tensor<F> {
    let v = x.values.iter().map(|&v| v.max(F::zero())).collect();
    Tensor::from_parts(x.shape.clone(), v)
}

/// `x` for `x ≥ 0`, `alpha·x` otherwise.
pub fn prelu<F: Float>(x: &Tensor<F>, alpha: F) -> Tensor<F> {
    let v = x
        .values
        .iter()
        .map(|&v| if v >= F::zero() { v } else { alpha * v })
        .collect();
    Tensor::from_parts(x.shape.clone(), v)
}

pub fn sigmoid<F: Float>(x: F) -> F {
    if x >= F::zero() {
        F::one() / (F::one() + (-x).exp())
    } else {
        let e = x.exp();
        e / (F::one() + e)
    }
}

/// Max-subtracted softmax over a 1-d slice.
pub fn softmax<F: Float>(x: &[F]) -> Vec<F> {
    let max = x.iter().copied().fold(F::neg_infinity(), F::max);
    let exps: Vec<F> = x.iter().map(|&v| (v - max).exp()).collect();
    let total: F = exps.iter().copied().sum();
    exps.into_iter().map(|e| e / total).collect()
}

/// `weight·x + bias` for a 1-d `x`.
pub fn linear<F: Float>(x: &Tensor<F>, weight: &Tensor<F>, bias: &Tensor<F>) -> Result<Tensor<F>> {
    let din = x.dims1("linear")?;
    let (dout, win) = weight.dims2("linear")?;
    if win != din {
        return Err(TensorError::ShapeMismatch {
            op: "linear",
            dim: "input features",
            expected: win,
            found: din,
        });
    }
    if bias.dims1("linear")? != dout {
        return Err(TensorError::ShapeMismatch {
            op: "linear",
            dim: "bias length",
            expected: dout,
            found: bias.len(),
        });
    }
    let mut out = bias.values.clone();
    linalg::gemm(
        dout,
        din,
        1,
        linalg::MatRef::new(&weight.values),
        linalg::MatRef::new(&x.values),
        &mut out,
        true,
    );
    Ok(Tensor::from_parts(vec![dout], out))
}

/// Clamp applied to probabilities before taking logarithms.
pub const BCE_CLAMP: f64 = 1e-7;

/// `−Σ y·ln p + (1−y)·ln(1−p)` with `p` clamped into `[1e−7, 1−1e−7]`.
pub fn binary_cross_entropy<F: Float>(p: &[F], y: &[F]) -> Result<F> {
    if p.len() != y.len() {
        return Err(TensorError::ShapeMismatch {
            op: "binary_cross_entropy",
            dim: "class count",
            expected: p.len(),
            found: y.len(),
        });
    }
    check_targets(y)?;
    Ok(p.iter()
        .zip(y)
        .map(|(&p, &y)| {
            let p = clamp_probability(p);
            -(y * p.ln() + (F::one() - y) * (F::one() - p).ln())
        })
        .sum())
}

/// Clamps into `[BCE_CLAMP, 1 - BCE_CLAMP]`, letting NaN through.
pub(crate) fn clamp_probability<F: Float>(p: F) -> F {
    let lo = F::of(BCE_CLAMP);
    let hi = F::one() - lo;
    if p < lo {
        lo
    } else if p > hi {
        hi
    } else {
        p
    }
}

pub(crate) fn check_targets<F: Float>(y: &[F]) -> Result<()> {
    for (index, &v) in y.iter().enumerate() {
        if v != F::zero() && v != F::one() {
            return Err(TensorError::BadTarget {
                index,
                value: v.f64(),
            });
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn new_rejects_bad_count_and_non_finite() {
        assert!(matches!(
            Tensor::<f32>::new(vec![2, 2], vec![0.0; 3]),
            Err(TensorError::ValueCount {
                expected: 4,
                actual: 3,
                ..
            })
        ));
        assert!(matches!(
            Tensor::new(vec![2], vec![1.0f32, f32::NAN]),
            Err(TensorError::NonFinite { index: 1, .. })
        ));
        assert!(Tensor::new(vec![1], vec![f64::INFINITY]).is_err());
    }

    #[test]
    fn grad_slot_must_match_shape() {
        let mut t = Tensor::<f32>::zeros(vec![2, 3]);
        assert!(t.set_grad(vec![0.0; 5]).is_err());
        t.set_grad(vec![1.0; 6]).unwrap();
        assert_eq!(t.grad().unwrap().len(), 6);
    }

    #[test]
    fn relu_examples() {
        let x = Tensor::vector(&[-1.0f64, 0.0, 2.0]).unwrap();
        assert_eq!(relu(&x).values(), &[0.0, 0.0, 2.0]);
        let neg = Tensor::vector(&[-3.0f64, -0.5, -1e-9]).unwrap();
        assert!(relu(&neg).values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn prelu_examples() {
        let x = Tensor::vector(&[-2.0f64, 5.0]).unwrap();
        assert_eq!(prelu(&x, 0.25).values(), &[-0.5, 5.0]);
        assert_eq!(prelu(&x, 7.0).values()[1], 5.0);
    }

    #[test]
    fn sigmoid_and_softmax() {
        assert_eq!(sigmoid(0.0f64), 0.5);
        assert_eq!(softmax(&[0.0f64, 0.0]), vec![0.5, 0.5]);
        let s = softmax(&[1000.0f64, 0.0]);
        assert!(s.iter().all(|v| v.is_finite()));
        assert!((s[0] - 1.0).abs() < 1e-12 && s[1] < 1e-300_f64.max(1e-12));
        assert!(sigmoid(-800.0f64) >= 0.0 && sigmoid(800.0f64) <= 1.0);
    }

    #[test]
    fn linear_identity_and_bias_only() {
        let x = Tensor::vector(&[1.0f64, -2.0, 3.0]).unwrap();
        let eye = Tensor::new(
            vec![3, 3],
            vec![1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0],
        )
        .unwrap();
        let zero_b = Tensor::zeros(vec![3]);
        assert_eq!(linear(&x, &eye, &zero_b).unwrap().values(), x.values());
        let b = Tensor::vector(&[0.5, 0.25, -1.0]).unwrap();
        let zero_w = Tensor::zeros(vec![3, 3]);
        assert_eq!(linear(&x, &zero_w, &b).unwrap().values(), b.values());
    }

    #[test]
    fn linear_rejects_mismatch() {
        let x = Tensor::<f64>::zeros(vec![4]);
        let w = Tensor::zeros(vec![3, 5]);
        let b = Tensor::zeros(vec![3]);
        assert!(matches!(
            linear(&x, &w, &b),
            Err(TensorError::ShapeMismatch {
                dim: "input features",
                ..
            })
        ));
    }

    #[test]
    fn bce_examples() {
        let l = binary_cross_entropy(&[0.5f64], &[1.0]).unwrap();
        assert!((l - std::f64::consts::LN_2).abs() < 1e-12);
        let near = binary_cross_entropy(&[1.0 - 1e-7f64], &[1.0]).unwrap();
        assert!((near - 1e-7).abs() < 1e-9);
        assert!(matches!(
            binary_cross_entropy(&[0.3f64], &[0.5]),
            Err(TensorError::BadTarget { index: 0, .. })
        ));
    }
}
