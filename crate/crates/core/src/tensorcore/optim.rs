use super::{Float, Result, Tensor, TensorError};

/// Adam moments for a fixed list of parameter tensors.
#[derive(Clone, Debug)]
pub struct AdamState<F = f32> {
    first_moment: Vec<Vec<F>>,
    second_moment: Vec<Vec<F>>,
    step_count: u64,
    pub beta1: F,
    pub beta2: F,
    pub epsilon: F,
}

impl<F: Float> AdamState<F> {
    /// Zeroed moments shaped like `params`, betas (0.9, 0.999), epsilon 1e-8.
    pub fn new(params: &[Tensor<F>]) -> Self {
        Self {
            first_moment: params.iter().map(|p| vec![F::zero(); p.len()]).collect(),
            second_moment: params.iter().map(|p| vec![F::zero(); p.len()]).collect(),
            step_count: 0,
            beta1: F::of(0.9),
            beta2: F::of(0.999),
            epsilon: F::of(1e-8),
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step_count
    }

    pub fn first_moment(&self) -> &[Vec<F>] {
        &self.first_moment
    }

    pub fn second_moment(&self) -> &[Vec<F>] {
        &self.second_moment
    }
}

/// One bias-corrected Adam update using each parameter's gradient slot.
/// Parameters without a gradient are left untouched.
pub fn adam_step<F: Float>(
    params: &mut [Tensor<F>],
    state: &mut AdamState<F>,
    lr: F,
) -> Result<()> {
    if params.len() != state.first_moment.len() {
        return Err(TensorError::ShapeMismatch {
            op: "adam_step",
            dim: "parameter count",
            expected: state.first_moment.len(),
            found: params.len(),
        });
    }
    for (i, p) in params.iter().enumerate() {
        if p.len() != state.first_moment[i].len() {
            return Err(TensorError::ShapeMismatch {
                op: "adam_step",
                dim: "parameter length",
                expected: state.first_moment[i].len(),
                found: p.len(),
            });
        }
    }
    state.step_count += 1;
    let t = state.step_count as i32;
    let (b1, b2, eps) = (state.beta1, state.beta2, state.epsilon);
    let c1 = F::one() - b1.powi(t);
    let c2 = F::one() - b2.powi(t);
    for (i, p) in params.iter_mut().enumerate() {
        let Some(grad) = p.take_grad() else { continue };
        let m = &mut state.first_moment[i];
        let v = &mut state.second_moment[i];
        for (j, value) in p.values_mut().iter_mut().enumerate() {
            let g = grad[j];
            m[j] = b1 * m[j] + (F::one() - b1) * g;
            v[j] = b2 * v[j] + (F::one() - b2) * g * g;
            let m_hat = m[j] / c1;
            let v_hat = v[j] / c2;
            *value -= lr * m_hat / (v_hat.sqrt() + eps);
        }
        p.set_grad(grad)?;
    }
    Ok(())
}

/// Learning rate decaying geometrically from `lr_start` at epoch 0 to
/// `lr_end` at the last epoch.
pub fn exp_lr_schedule(epoch: usize, total_epochs: usize, lr_start: f64, lr_end: f64) -> f64 {
    if total_epochs < 2 {
        return lr_start;
    }
    let frac = epoch as f64 / (total_epochs - 1) as f64;
    lr_start * (lr_end / lr_start).powf(frac)
}
