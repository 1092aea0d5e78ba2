//! Shared inputs for the benchmarks.

use mstcn_core::Tensor;

/// A deterministic broadband test signal.
pub fn signal(len: usize) -> Vec<f32> {
    (0..len)
        .map(|i| {
            let t = i as f32;
            0.3 * (t * 0.031).sin() + 0.2 * (t * 0.437).sin() + 0.1 * (t * 1.913).cos()
        })
        .collect()
}

/// A `[rows, cols]` tensor filled from [`signal`].
pub fn matrix(rows: usize, cols: usize) -> Tensor<f32> {
    Tensor::new(vec![rows, cols], signal(rows * cols)).expect("shape matches length")
}
