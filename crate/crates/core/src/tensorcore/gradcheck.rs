use super::{Result, Tape, Tensor, Var};

/// Magnitude below which gradient components are compared absolutely.
const GRAD_FLOOR: f64 = 1e-3;

/// `|a − b| / max(|a|, |b|, 1e-3)`.
pub fn relative_error(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(GRAD_FLOOR)
}

/// Compares reverse-mode gradients of a scalar function against central
/// differences `(f(x+ε) − f(x−ε)) / 2ε`, returning the largest relative error
/// over all components of `x`.
pub fn grad_check<Fun>(f: Fun, x: &Tensor<f64>, epsilon: f64) -> Result<f64>
where
    Fun: Fn(&mut Tape<'_, f64>, Var) -> Result<Var>,
{
    let analytic = {
        let mut tape = Tape::new();
        let xv = tape.leaf(x.clone().with_requires_grad(true))?;
        let loss = f(&mut tape, xv)?;
        let grads = tape.backward(loss)?;
        grads
            .get(xv)
            .map(<[f64]>::to_vec)
            .unwrap_or_else(|| vec![0.0; x.len()])
    };
    let eval = |values: Vec<f64>| -> Result<f64> {
        let mut tape = Tape::new();
        let xv = tape.leaf(Tensor::new(x.shape().to_vec(), values)?)?;
        let loss = f(&mut tape, xv)?;
        Ok(tape.value(loss).values()[0])
    };
    let mut worst = 0.0f64;
    for (i, &a) in analytic.iter().enumerate() {
        let mut plus = x.values().to_vec();
        plus[i] += epsilon;
        let mut minus = x.values().to_vec();
        minus[i] -= epsilon;
        let numeric = (eval(plus)? - eval(minus)?) / (2.0 * epsilon);
        worst = worst.max(relative_error(a, numeric));
    }
    Ok(worst)
}
