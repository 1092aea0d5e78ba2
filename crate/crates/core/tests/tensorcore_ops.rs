mod common;

use common::{naive_conv1d, random_tensor, rng, weighted_sum};
use mstcn_core::tensorcore::{
    adam_step, conv1d, cumulative_layer_norm, global_layer_norm, grad_check, prelu, relu, softmax,
    AdamState, Conv1dSpec, Tensor,
};
use proptest::prelude::*;
use rand::Rng;

const EPS: f64 = 1e-4;
const TOL: f64 = 1e-4;
const SEEDS: u64 = 10;

fn random_conv_case(seed: u64) -> (Tensor<f64>, Tensor<f64>, Tensor<f64>, Conv1dSpec, usize) {
    let mut r = rng(seed);
    let c = r.gen_range(1..=4usize);
    let depthwise = r.gen_bool(0.5);
    let groups = if depthwise { c } else { 1 };
    let c_out = if depthwise { c } else { r.gen_range(1..=4) };
    let k = r.gen_range(1..=3usize);
    let dilation = r.gen_range(1..=4usize);
    let span = (k - 1) * dilation;
    let t = r.gen_range(span.max(1)..=16usize.max(span + 1));
    let pad_left = r.gen_range(0..=span);
    let pad_right = r.gen_range(0..=span);
    let spec = Conv1dSpec {
        dilation,
        groups,
        pad_left,
        pad_right,
    };
    let x = random_tensor(&mut r, &[c, t], -2.0, 2.0);
    let w = random_tensor(&mut r, &[c_out, c / groups, k], -1.0, 1.0);
    let b = random_tensor(&mut r, &[c_out], -0.5, 0.5);
    (x, w, b, spec, k)
}

#[test]
fn conv1d_matches_naive_oracle_on_random_cases() {
    for seed in 0..200 {
        let (x, w, b, spec, k) = random_conv_case(seed);
        let (c_in, t) = x.dims2("x").unwrap();
        let c_out = w.shape()[0];
        let got = conv1d(&x, &w, Some(&b), spec).unwrap();
        let want = naive_conv1d(
            x.values(),
            c_in,
            t,
            w.values(),
            c_out,
            k,
            Some(b.values()),
            spec,
        );
        assert_eq!(got.len(), want.len(), "seed {seed}");
        for (a, e) in got.values().iter().zip(&want) {
            assert!((a - e).abs() < 1e-6, "seed {seed}: {a} vs {e}");
        }
    }
}

#[test]
fn conv1d_padding_wider_than_input() {
    let mut r = rng(77);
    for (groups, c) in [(1, 2), (3, 3)] {
        let x = random_tensor(&mut r, &[c, 3], -1.0, 1.0);
        let w = random_tensor(&mut r, &[c, c / groups, 3], -1.0, 1.0);
        for spec in [
            Conv1dSpec {
                dilation: 8,
                groups,
                pad_left: 16,
                pad_right: 0,
            },
            Conv1dSpec {
                dilation: 8,
                groups,
                pad_left: 8,
                pad_right: 8,
            },
        ] {
            let got = conv1d(&x, &w, None, spec).unwrap();
            let want = naive_conv1d(x.values(), c, 3, w.values(), c, 3, None, spec);
            for (a, e) in got.values().iter().zip(&want) {
                assert!((a - e).abs() < 1e-12);
            }
            let wc = w.clone();
            let err = grad_check(
                |tape, xv| {
                    let wv = tape.leaf(wc.clone().with_requires_grad(true))?;
                    let y = tape.conv1d(xv, wv, None, spec)?;
                    weighted_sum(tape, y, 5)
                },
                &x,
                EPS,
            )
            .unwrap();
            assert!(err < 1e-6);
        }
    }
}

#[test]
fn conv1d_gradients_match_finite_differences() {
    for seed in 0..SEEDS {
        let (x, w, b, spec, _) = random_conv_case(seed + 1000);
        let (wc, bc) = (w.clone(), b.clone());
        let err_x = grad_check(
            |tape, xv| {
                let wv = tape.constant(wc.clone())?;
                let bv = tape.constant(bc.clone())?;
                let y = tape.conv1d(xv, wv, Some(bv), spec)?;
                weighted_sum(tape, y, seed)
            },
            &x,
            EPS,
        )
        .unwrap();
        let xc = x.clone();
        let err_w = grad_check(
            |tape, wv| {
                let xv = tape.constant(xc.clone())?;
                let bv = tape.constant(bc.clone())?;
                let y = tape.conv1d(xv, wv, Some(bv), spec)?;
                weighted_sum(tape, y, seed)
            },
            &w,
            EPS,
        )
        .unwrap();
        let err_b = grad_check(
            |tape, bv| {
                let xv = tape.constant(xc.clone())?;
                let wv = tape.constant(w.clone())?;
                let y = tape.conv1d(xv, wv, Some(bv), spec)?;
                weighted_sum(tape, y, seed)
            },
            &b,
            EPS,
        )
        .unwrap();
        assert!(
            err_x < TOL && err_w < TOL && err_b < TOL,
            "seed {seed}: {err_x} {err_w} {err_b}"
        );
    }
}

#[test]
fn matmul_and_linear_gradients() {
    for seed in 0..SEEDS {
        let mut r = rng(seed);
        let a = random_tensor(&mut r, &[3, 4], -1.0, 1.0);
        let b = random_tensor(&mut r, &[4, 5], -1.0, 1.0);
        let bc = b.clone();
        let err = grad_check(
            |tape, av| {
                let bv = tape.constant(bc.clone())?;
                let y = tape.matmul(av, bv)?;
                weighted_sum(tape, y, seed)
            },
            &a,
            EPS,
        )
        .unwrap();
        assert!(err < TOL, "matmul lhs seed {seed}: {err}");
        let ac = a.clone();
        let err = grad_check(
            |tape, bv| {
                let av = tape.constant(ac.clone())?;
                let y = tape.matmul(av, bv)?;
                weighted_sum(tape, y, seed)
            },
            &b,
            EPS,
        )
        .unwrap();
        assert!(err < TOL, "matmul rhs seed {seed}: {err}");

        let x = random_tensor(&mut r, &[4], -1.0, 1.0);
        let w = random_tensor(&mut r, &[3, 4], -1.0, 1.0);
        let bias = random_tensor(&mut r, &[3], -1.0, 1.0);
        let (wc, biasc) = (w.clone(), bias.clone());
        let err = grad_check(
            |tape, xv| {
                let wv = tape.constant(wc.clone())?;
                let bv = tape.constant(biasc.clone())?;
                let y = tape.linear(xv, wv, bv)?;
                weighted_sum(tape, y, seed)
            },
            &x,
            EPS,
        )
        .unwrap();
        assert!(err < TOL, "linear x seed {seed}: {err}");
        let xc = x.clone();
        let err = grad_check(
            |tape, wv| {
                let xv = tape.constant(xc.clone())?;
                let bv = tape.constant(biasc.clone())?;
                let y = tape.linear(xv, wv, bv)?;
                weighted_sum(tape, y, seed)
            },
            &w,
            EPS,
        )
        .unwrap();
        assert!(err < TOL, "linear w seed {seed}: {err}");
    }
}

#[test]
fn linear_matches_direct_matmul_oracle() {
    let mut r = rng(77);
    let x = random_tensor(&mut r, &[4], -1.0, 1.0);
    let w = random_tensor(&mut r, &[3, 4], -1.0, 1.0);
    let b = random_tensor(&mut r, &[3], -1.0, 1.0);
    let y = mstcn_core::tensorcore::linear(&x, &w, &b).unwrap();
    for o in 0..3 {
        let mut acc = b.values()[o];
        for i in 0..4 {
            acc += w.values()[o * 4 + i] * x.values()[i];
        }
        assert!((y.values()[o] - acc).abs() < 1e-6);
    }
}

#[test]
fn activation_gradients() {
    for seed in 0..SEEDS {
        let mut r = rng(seed + 50);
        // keep inputs away from the kink at zero
        let vals: Vec<f64> = (0..8)
            .map(|_| {
                let v: f64 = r.gen_range(0.05..2.0);
                if r.gen_bool(0.5) {
                    -v
                } else {
                    v
                }
            })
            .collect();
        let x = Tensor::new(vec![8], vals).unwrap();
        let alpha = Tensor::scalar(r.gen_range(0.05..0.5));

        let err = grad_check(
            |t, xv| {
                let y = t.relu(xv);
                weighted_sum(t, y, seed)
            },
            &x,
            EPS,
        )
        .unwrap();
        assert!(err < TOL, "relu {seed}: {err}");

        let ac = alpha.clone();
        let err = grad_check(
            |t, xv| {
                let a = t.constant(ac.clone())?;
                let y = t.prelu(xv, a)?;
                weighted_sum(t, y, seed)
            },
            &x,
            EPS,
        )
        .unwrap();
        assert!(err < TOL, "prelu x {seed}: {err}");
        let xc = x.clone();
        let err = grad_check(
            |t, a| {
                let xv = t.constant(xc.clone())?;
                let y = t.prelu(xv, a)?;
                weighted_sum(t, y, seed)
            },
            &alpha,
            EPS,
        )
        .unwrap();
        assert!(err < TOL, "prelu alpha {seed}: {err}");

        let err = grad_check(
            |t, xv| {
                let y = t.sigmoid(xv);
                weighted_sum(t, y, seed)
            },
            &x,
            EPS,
        )
        .unwrap();
        assert!(err < TOL, "sigmoid {seed}: {err}");
        let err = grad_check(
            |t, xv| {
                let y = t.softmax(xv)?;
                weighted_sum(t, y, seed)
            },
            &x,
            EPS,
        )
        .unwrap();
        assert!(err < TOL, "softmax {seed}: {err}");
    }
}

#[test]
fn prelu_derivative_in_alpha_at_minus_two() {
    let alpha = Tensor::scalar(0.25);
    let err = grad_check(
        |t, a| {
            let x = t.constant(Tensor::scalar(-2.0))?;
            let y = t.prelu(x, a)?;
            Ok(t.sum(y))
        },
        &alpha,
        EPS,
    )
    .unwrap();
    assert!(err < 1e-8);
}

#[test]
fn normalization_gradients() {
    for seed in 0..SEEDS {
        let mut r = rng(seed + 300);
        let (c, t) = (3, 6);
        let x = random_tensor(&mut r, &[c, t], -2.0, 2.0);
        let gain = random_tensor(&mut r, &[c, 1], 0.5, 1.5);
        let bias = random_tensor(&mut r, &[c, 1], -0.5, 0.5);
        for cumulative in [false, true] {
            let norm = |tape: &mut mstcn_core::tensorcore::Tape<'_, f64>, x, g, b| {
                if cumulative {
                    tape.cumulative_layer_norm(x, g, b)
                } else {
                    tape.global_layer_norm(x, g, b)
                }
            };
            let (gc, bc, xc) = (gain.clone(), bias.clone(), x.clone());
            let ex = grad_check(
                |tape, xv| {
                    let g = tape.constant(gc.clone())?;
                    let b = tape.constant(bc.clone())?;
                    let y = norm(tape, xv, g, b)?;
                    weighted_sum(tape, y, seed)
                },
                &x,
                EPS,
            )
            .unwrap();
            let eg = grad_check(
                |tape, g| {
                    let xv = tape.constant(xc.clone())?;
                    let b = tape.constant(bc.clone())?;
                    let y = norm(tape, xv, g, b)?;
                    weighted_sum(tape, y, seed)
                },
                &gain,
                EPS,
            )
            .unwrap();
            let eb = grad_check(
                |tape, b| {
                    let xv = tape.constant(xc.clone())?;
                    let g = tape.constant(gc.clone())?;
                    let y = norm(tape, xv, g, b)?;
                    weighted_sum(tape, y, seed)
                },
                &bias,
                EPS,
            )
            .unwrap();
            assert!(
                ex < TOL && eg < TOL && eb < TOL,
                "cumulative={cumulative} seed {seed}: {ex} {eg} {eb}"
            );
        }
    }
}

#[test]
fn bce_gradient_through_sigmoid_logits() {
    for seed in 0..SEEDS {
        let mut r = rng(seed + 900);
        let logits = random_tensor(&mut r, &[2], -3.0, 3.0);
        let target = [r.gen_range(0..2) as f64, r.gen_range(0..2) as f64];
        let err = grad_check(
            |tape, z| {
                let p = tape.sigmoid(z);
                tape.binary_cross_entropy(p, &target)
            },
            &logits,
            EPS,
        )
        .unwrap();
        assert!(err < TOL, "seed {seed}: {err}");
    }
}

#[test]
fn pooling_concat_and_elementwise_gradients() {
    for seed in 0..SEEDS {
        let mut r = rng(seed + 1300);
        let x = random_tensor(&mut r, &[3, 5], -1.0, 1.0);
        let other = random_tensor(&mut r, &[2, 5], -1.0, 1.0);
        let err = grad_check(
            |tape, xv| {
                let o = tape.constant(other.clone())?;
                let cat = tape.concat_rows(&[xv, o, xv])?;
                let pooled = tape.mean_time(cat)?;
                let sq = tape.mul(pooled, pooled)?;
                let y = tape.scale(sq, 0.5);
                weighted_sum(tape, y, seed)
            },
            &x,
            EPS,
        )
        .unwrap();
        assert!(err < TOL, "seed {seed}: {err}");
    }
}

proptest! {
    #[test]
    fn gln_scale_invariance(c in 1usize..5, t in 2usize..12, seed in 0u64..1000, scale_idx in 0usize..3) {
        let scale = [0.5, 2.0, 100.0][scale_idx];
        let mut r = rng(seed);
        let x = random_tensor(&mut r, &[c, t], -3.0, 3.0);
        let g = Tensor::full(vec![c, 1], 1.0);
        let b = Tensor::zeros(vec![c, 1]);
        let xs = Tensor::new(vec![c, t], x.values().iter().map(|v| v * scale).collect()).unwrap();
        let y0 = global_layer_norm(&x, &g, &b).unwrap();
        let y1 = global_layer_norm(&xs, &g, &b).unwrap();
        for (a, e) in y0.values().iter().zip(y1.values()) {
            prop_assert!((a - e).abs() < 1e-5);
        }
    }

    #[test]
    fn cln_causal_under_future_perturbation(c in 1usize..4, t in 2usize..10, seed in 0u64..1000) {
        let mut r = rng(seed);
        let x = random_tensor(&mut r, &[c, t], -3.0, 3.0);
        let cut = r.gen_range(0..t - 1);
        let mut pert = x.values().to_vec();
        for ch in 0..c {
            for col in cut + 1..t {
                pert[ch * t + col] += r.gen_range(-5.0..5.0);
            }
        }
        let g = Tensor::full(vec![c, 1], 1.0);
        let b = Tensor::zeros(vec![c, 1]);
        let y0 = cumulative_layer_norm(&x, &g, &b).unwrap();
        let y1 = cumulative_layer_norm(&Tensor::new(vec![c, t], pert).unwrap(), &g, &b).unwrap();
        for ch in 0..c {
            for col in 0..=cut {
                prop_assert_eq!(y0.values()[ch * t + col].to_bits(), y1.values()[ch * t + col].to_bits());
            }
        }
    }

    #[test]
    fn softmax_is_a_distribution(v in prop::collection::vec(-1000.0f64..1000.0, 1..8)) {
        let s = softmax(&v);
        prop_assert!((s.iter().sum::<f64>() - 1.0).abs() < 1e-6);
        prop_assert!(s.iter().all(|&p| p >= 0.0 && p.is_finite()));
    }

    #[test]
    fn prelu_with_zero_alpha_is_relu(v in prop::collection::vec(-10.0f64..10.0, 1..16)) {
        let x = Tensor::vector(&v).unwrap();
        let (a, b) = (prelu(&x, 0.0), relu(&x));
        prop_assert_eq!(a.values(), b.values());
    }

    #[test]
    fn adam_zero_gradient_no_op(v in prop::collection::vec(-10.0f64..10.0, 1..16)) {
        let mut p = Tensor::vector(&v).unwrap();
        p.set_grad(vec![0.0; v.len()]).unwrap();
        let mut params = vec![p];
        let mut state = AdamState::new(&params);
        adam_step(&mut params, &mut state, 1e-2).unwrap();
        prop_assert_eq!(params[0].values(), &v[..]);
    }
}
