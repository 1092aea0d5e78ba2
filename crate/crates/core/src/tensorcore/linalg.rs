//! Thin wrapper over `matrixmultiply` for row-major buffers.

use super::Float;

/// A row-major matrix operand, optionally read transposed.
#[derive(Clone, Copy)]
pub struct MatRef<'a, F> {
    pub data: &'a [F],
    pub transposed: bool,
}

impl<'a, F> MatRef<'a, F> {
    pub fn new(data: &'a [F]) -> Self {
        Self {
            data,
            transposed: false,
        }
    }

    pub fn t(data: &'a [F]) -> Self {
        Self {
            data,
            transposed: true,
        }
    }
}

/// `c = op(a) · op(b)` (or `c += ...` when `accumulate`), where `op(a)` is
/// `m×k`, `op(b)` is `k×n` and `c` is `m×n`, all row-major.
pub fn gemm<F: Float>(
    m: usize,
    k: usize,
    n: usize,
    a: MatRef<'_, F>,
    b: MatRef<'_, F>,
    c: &mut [F],
    accumulate: bool,
) {
    assert_eq!(a.data.len(), m * k, "gemm: lhs has wrong length");
    assert_eq!(b.data.len(), k * n, "gemm: rhs has wrong length");
    assert_eq!(c.len(), m * n, "gemm: output has wrong length");
    if m == 0 || n == 0 {
        return;
    }
    if k == 0 {
        if !accumulate {
            c.iter_mut().for_each(|v| *v = F::zero());
        }
        return;
    }
    // a stored m×k: (rs, cs) = (k, 1); stored k×m and read transposed: (1, m)
    let (rsa, csa) = if a.transposed { (1, m) } else { (k, 1) };
    let (rsb, csb) = if b.transposed { (1, k) } else { (n, 1) };
    let beta = if accumulate { F::one() } else { F::zero() };
    // SAFETY: the length asserts above guarantee every strided access stays
    // inside the three slices, and `c` does not alias `a` or `b`.
    unsafe {
        F::gemm_raw(
            m,
            k,
            n,
            a.data.as_ptr(),
            rsa as isize,
            csa as isize,
            b.data.as_ptr(),
            rsb as isize,
            csb as isize,
            beta,
            c.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}
