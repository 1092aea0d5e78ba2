//! Signal levels and FFT convolution.

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use crate::{Error, Result};

/// Powers below this are treated as silence.
pub const SILENCE_POWER: f64 = 1e-12;

/// Mean square over the full length.
pub fn power(x: &[f64]) -> f64 {
    if x.is_empty() {
        return 0.0;
    }
    x.iter().map(|v| v * v).sum::<f64>() / x.len() as f64
}

pub fn db(ratio: f64) -> f64 {
    10.0 * ratio.log10()
}

fn check_audible(what: &str, p: f64) -> Result<()> {
    if p > SILENCE_POWER {
        Ok(())
    } else {
        Err(Error::Simulation(format!(
            "{what} is silent (power {p:.3e})"
        )))
    }
}

/// Amplitude gain that brings `interferer` to `snr_db` below `reference`.
pub fn snr_gain(reference: &[f64], interferer: &[f64], snr_db: f64) -> Result<f64> {
    let (pr, pi) = (power(reference), power(interferer));
    check_audible("reference", pr)?;
    check_audible("interferer", pi)?;
    Ok((pr / (pi * 10f64.powf(snr_db / 10.0))).sqrt())
}

/// `interferer` scaled so that `10·log10(P_ref / P_interf) = snr_db`.
pub fn scale_to_snr(reference: &[f64], interferer: &[f64], snr_db: f64) -> Result<Vec<f64>> {
    let g = snr_gain(reference, interferer, snr_db)?;
    Ok(interferer.iter().map(|v| v * g).collect())
}

/// Scales `x` in place to mean-square `target`.
pub fn set_power(x: &mut [f64], target: f64) -> Result<f64> {
    let p = power(x);
    check_audible("signal", p)?;
    let g = (target / p).sqrt();
    x.iter_mut().for_each(|v| *v *= g);
    Ok(g)
}

/// First `out_len` samples of the linear convolution `x * h`.
pub fn fft_convolve(x: &[f64], h: &[f64], out_len: usize) -> Vec<f64> {
    if x.is_empty() || h.is_empty() {
        return vec![0.0; out_len];
    }
    let full = x.len() + h.len() - 1;
    let n = full.next_power_of_two();
    let mut planner = FftPlanner::<f64>::new();
    let fwd = planner.plan_fft_forward(n);
    let inv = planner.plan_fft_inverse(n);
    let load = |s: &[f64]| {
        let mut v: Vec<Complex<f64>> = s.iter().map(|&r| Complex::new(r, 0.0)).collect();
        v.resize(n, Complex::new(0.0, 0.0));
        v
    };
    let (mut a, mut b) = (load(x), load(h));
    fwd.process(&mut a);
    fwd.process(&mut b);
    for (p, q) in a.iter_mut().zip(&b) {
        *p *= q;
    }
    inv.process(&mut a);
    let scale = 1.0 / n as f64;
    let mut out: Vec<f64> = a
        .iter()
        .take(out_len.min(full))
        .map(|c| c.re * scale)
        .collect();
    out.resize(out_len, 0.0);
    out
}
