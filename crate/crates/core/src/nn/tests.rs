use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use super::*;
use crate::channel::rng_from_seed;

const FD_EPS: f64 = 1e-4;
const FD_TOL: f64 = 1e-4;

fn randn(shape: [usize; 3], rng: &mut impl Rng) -> Tensor3<f64> {
    Tensor3::from_fn(shape, |_, _, _| StandardNormal.sample(rng))
}

fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-3)
}

/// Scalar probe `<layer(x), r>` used for finite differences.
fn probe<L: Layer<f64>>(layer: &mut L, x: &Tensor3<f64>, r: &Tensor3<f64>) -> f64 {
    layer.forward(x, Mode::Train).unwrap().dot(r)
}

/// Checks input and parameter gradients of `layer` against central
/// differences; returns the worst relative error seen.
fn grad_check<L: Layer<f64> + Clone>(layer: &mut L, x: &Tensor3<f64>, rng: &mut impl Rng) -> f64 {
    let y = layer.forward(x, Mode::Train).unwrap();
    let r = randn(y.shape(), rng);
    layer.zero_grad();
    let gx = layer.backward(&r).unwrap();
    let mut worst = 0.0f64;

    for i in 0..x.data().len() {
        let mut xp = x.clone();
        xp.data_mut()[i] += FD_EPS;
        let mut xm = x.clone();
        xm.data_mut()[i] -= FD_EPS;
        let num = (probe(&mut layer.clone(), &xp, &r) - probe(&mut layer.clone(), &xm, &r)) / (2.0 * FD_EPS);
        worst = worst.max(rel_err(gx.data()[i], num));
    }

    let analytic: Vec<Vec<f64>> = layer.params().iter().map(|p| p.grad.to_vec()).collect();
    for (pi, grads) in analytic.iter().enumerate() {
        for (j, &g) in grads.iter().enumerate() {
            let mut lp = layer.clone();
            lp.params()[pi].param[j] += FD_EPS;
            let mut lm = layer.clone();
            lm.params()[pi].param[j] -= FD_EPS;
            let num = (probe(&mut lp, x, &r) - probe(&mut lm, x, &r)) / (2.0 * FD_EPS);
            worst = worst.max(rel_err(g, num));
        }
    }
    worst
}

fn random_conv(in_ch: usize, out_ch: usize, kernel: usize, rng: &mut impl Rng) -> Conv1d<f64> {
    let w = (0..out_ch * in_ch * kernel).map(|_| StandardNormal.sample(rng)).collect();
    let b = (0..out_ch).map(|_| StandardNormal.sample(rng)).collect();
    Conv1d::from_params(in_ch, out_ch, kernel, w, b).unwrap()
}

fn random_deconv(in_ch: usize, out_ch: usize, k: usize, rng: &mut impl Rng) -> Deconv1d<f64> {
    let w = (0..out_ch * in_ch * k).map(|_| StandardNormal.sample(rng)).collect();
    let b = (0..out_ch).map(|_| StandardNormal.sample(rng)).collect();
    Deconv1d::from_params(in_ch, out_ch, k, k, 0, w, b).unwrap()
}

#[test]
fn conv_identity_kernel() {
    let mut c = Conv1d::<f64>::from_params(1, 1, 3, vec![0.0, 1.0, 0.0], vec![0.0]).unwrap();
    let x = Tensor3::from_vec([1, 1, 5], vec![0.3, -1.0, 2.0, 4.0, -7.5]).unwrap();
    assert_eq!(c.forward(&x, Mode::Infer).unwrap(), x);
}

#[test]
fn conv_box_kernel_hand_value() {
    let mut c = Conv1d::<f64>::from_params(1, 1, 3, vec![1.0; 3], vec![0.0]).unwrap();
    let x = Tensor3::from_vec([1, 1, 3], vec![1.0, 2.0, 3.0]).unwrap();
    assert_eq!(c.forward(&x, Mode::Infer).unwrap().data(), &[3.0, 6.0, 5.0]);
}

#[test]
fn conv_rejects_channel_mismatch() {
    let mut c = Conv1d::<f32>::new(2, 4, 3);
    let x = Tensor3::zeros(1, 3, 8);
    assert!(matches!(c.forward(&x, Mode::Infer), Err(NnError::Shape { .. })));
    assert!(Conv1d::<f32>::from_params(1, 1, 3, vec![0.0; 2], vec![0.0]).is_err());
}

#[test]
fn conv_kernel_longer_than_input() {
    let mut rng = rng_from_seed(3);
    let mut c = random_conv(2, 3, 31, &mut rng);
    let x = randn([2, 2, 5], &mut rng);
    let y = c.forward(&x, Mode::Train).unwrap();
    assert_eq!(y.shape(), [2, 3, 5]);
    assert!(grad_check(&mut c, &x, &mut rng) < FD_TOL);
}

#[test]
fn deconv_hand_value() {
    let mut d = Deconv1d::<f64>::from_params(1, 1, 2, 2, 0, vec![1.0, 1.0], vec![0.0]).unwrap();
    let x = Tensor3::from_vec([1, 1, 2], vec![1.0, 2.0]).unwrap();
    assert_eq!(d.forward(&x, Mode::Infer).unwrap().data(), &[1.0, 1.0, 2.0, 2.0]);
}

#[test]
fn deconv_stride_one_is_pointwise_conv() {
    let mut rng = rng_from_seed(4);
    let mut d = random_deconv(2, 3, 1, &mut rng);
    let mut c = Conv1d::from_params(2, 3, 1, d.weight.clone(), d.bias.clone()).unwrap();
    let x = randn([2, 2, 9], &mut rng);
    let yd = d.forward(&x, Mode::Infer).unwrap();
    let yc = c.forward(&x, Mode::Infer).unwrap();
    assert_eq!(yd.shape(), [2, 3, 9]);
    for (a, b) in yd.data().iter().zip(yc.data()) {
        assert!((a - b).abs() < 1e-12);
    }
}

#[test]
fn deconv_output_length_is_k_times() {
    for k in 1..=8 {
        let mut d = Deconv1d::<f32>::upsampler(2, 3, k);
        for len in [1, 7, 100] {
            let y = d.forward(&Tensor3::zeros(1, 2, len), Mode::Infer).unwrap();
            assert_eq!(y.len(), k * len);
        }
    }
}

#[test]
fn conv_gradients_match_finite_differences() {
    let mut rng = rng_from_seed(10);
    for trial in 0..20 {
        let kernel = 1 + (trial % 7);
        let mut c = random_conv(2, 1 + trial % 3, kernel, &mut rng);
        let x = randn([1 + trial % 2, 2, 8], &mut rng);
        let e = grad_check(&mut c, &x, &mut rng);
        assert!(e < FD_TOL, "trial {trial}: rel err {e}");
    }
}

#[test]
fn deconv_gradients_match_finite_differences() {
    let mut rng = rng_from_seed(11);
    for trial in 0..20 {
        let k = 1 + trial % 4;
        let mut d = random_deconv(2, 1 + trial % 3, k, &mut rng);
        let x = randn([1 + trial % 2, 2, 8], &mut rng);
        let e = grad_check(&mut d, &x, &mut rng);
        assert!(e < FD_TOL, "trial {trial}: rel err {e}");
    }
}

#[test]
fn padded_deconv_gradients_match_finite_differences() {
    let mut rng = rng_from_seed(12);
    for trial in 0..20 {
        let (kernel, stride, pad) = [(3, 2, 1), (5, 2, 2), (4, 3, 1), (3, 1, 1)][trial % 4];
        let w = (0..2 * 2 * kernel).map(|_| StandardNormal.sample(&mut rng)).collect();
        let mut d = Deconv1d::from_params(2, 2, kernel, stride, pad, w, vec![0.1, -0.2]).unwrap();
        let x = randn([1, 2, 6], &mut rng);
        let e = grad_check(&mut d, &x, &mut rng);
        assert!(e < FD_TOL, "trial {trial}: rel err {e}");
    }
}

#[test]
fn batchnorm_gradients_match_finite_differences() {
    let mut rng = rng_from_seed(13);
    for trial in 0..20 {
        let ch = 1 + trial % 3;
        let mut bn = BatchNorm1d::<f64>::new(ch);
        for c in 0..ch {
            bn.gamma[c] = 0.5 + rng.random::<f64>();
            bn.beta[c] = rng.random::<f64>() - 0.5;
        }
        let x = randn([2, ch, 8], &mut rng);
        let e = grad_check(&mut bn, &x, &mut rng);
        assert!(e < FD_TOL, "trial {trial}: rel err {e}");
    }
}

#[test]
fn activation_gradients_match_finite_differences() {
    let mut rng = rng_from_seed(14);
    for trial in 0..20 {
        // keep samples away from the ReLU kink
        let x = randn([2, 2, 8], &mut rng).map(|v| if v.abs() < 0.05 { v + 0.1 } else { v });
        let e = grad_check(&mut Relu::new(), &x, &mut rng);
        assert!(e < FD_TOL, "relu trial {trial}: rel err {e}");
        let e = grad_check(&mut Sigmoid::new(), &x.map(|v| 3.0 * v), &mut rng);
        assert!(e < FD_TOL, "sigmoid trial {trial}: rel err {e}");
    }
}

#[test]
fn conv_and_deconv_are_adjoint() {
    // a stride-1 "same" conv with odd kernel is adjoint to the padded
    // transposed conv that uses the same weights with channels swapped
    let mut rng = rng_from_seed(15);
    for kernel in [1, 3, 5, 31] {
        let (cin, cout, len) = (3, 2, 40);
        let mut conv = random_conv(cin, cout, kernel, &mut rng);
        conv.bias.fill(0.0);
        // deconv weight (out=cin, in=cout, k): W'[ci, co, kk] = W[co, ci, kk]
        let mut wt = vec![0.0; cin * cout * kernel];
        for co in 0..cout {
            for ci in 0..cin {
                for kk in 0..kernel {
                    wt[(ci * cout + co) * kernel + kk] = conv.weight[(co * cin + ci) * kernel + kk];
                }
            }
        }
        let mut deconv = Deconv1d::from_params(cout, cin, kernel, 1, (kernel - 1) / 2, wt, vec![0.0; cin]).unwrap();
        let x = randn([2, cin, len], &mut rng);
        let y = randn([2, cout, len], &mut rng);
        let lhs = conv.forward(&x, Mode::Infer).unwrap().dot(&y);
        let rhs = x.dot(&deconv.forward(&y, Mode::Infer).unwrap());
        assert!((lhs - rhs).abs() < 1e-9 * lhs.abs().max(1.0), "kernel {kernel}: {lhs} vs {rhs}");
    }
}

#[test]
fn batchnorm_train_normalizes() {
    let mut rng = rng_from_seed(16);
    let mut bn = BatchNorm1d::<f32>::new(3);
    let x = randn([8, 3, 50], &mut rng).map(|v| 4.0 * v + 7.0).cast::<f32>();
    let y = bn.forward(&x, Mode::Train).unwrap();
    for c in 0..3 {
        let vals: Vec<f64> = (0..8).flat_map(|b| y.channel(b, c).iter().map(|v| *v as f64)).collect();
        let n = vals.len() as f64;
        let mean = vals.iter().sum::<f64>() / n;
        let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        assert!(mean.abs() < 1e-6, "mean {mean}");
        assert!((var - 1.0).abs() < 1e-4, "var {var}");
    }
}

#[test]
fn batchnorm_affine() {
    let mut rng = rng_from_seed(17);
    let mut bn = BatchNorm1d::<f64>::new(1);
    bn.gamma[0] = 2.0;
    bn.beta[0] = 3.0;
    let y = bn.forward(&randn([4, 1, 100], &mut rng), Mode::Train).unwrap();
    let n = y.data().len() as f64;
    let mean = y.data().iter().sum::<f64>() / n;
    let var = y.data().iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    assert!((mean - 3.0).abs() < 1e-3);
    assert!((var - 4.0).abs() < 1e-3);
}

#[test]
fn batchnorm_infer_before_training_is_rejected() {
    let mut bn = BatchNorm1d::<f32>::new(2);
    assert_eq!(bn.forward(&Tensor3::zeros(1, 2, 4), Mode::Infer), Err(NnError::UninitializedStats));
}

#[test]
fn train_to_infer_drift_is_small() {
    let mut rng = rng_from_seed(18);
    let mut bn = BatchNorm1d::<f32>::new(4);
    // training-size batches: 128 samples per step
    let draw = |rng: &mut rand_chacha::ChaCha8Rng| randn([128, 4, 64], rng).map(|v| 1.5 * v - 2.0).cast::<f32>();
    for _ in 0..150 {
        bn.forward(&draw(&mut rng), Mode::Train).unwrap();
    }
    let x = draw(&mut rng);
    let a = bn.forward(&x, Mode::Train).unwrap();
    let b = bn.forward(&x, Mode::Infer).unwrap();
    let rms = (a.data().iter().zip(b.data()).map(|(p, q)| ((p - q) as f64).powi(2)).sum::<f64>()
        / a.data().len() as f64)
        .sqrt();
    assert!(rms < 1e-2, "rms {rms}");
}

#[test]
fn activation_examples() {
    assert_eq!(sigmoid_scalar(0.0f64), 0.5);
    for i in -300..=300 {
        let z = i as f64 / 10.0;
        assert!((sigmoid_scalar(-z) - (1.0 - sigmoid_scalar(z))).abs() < 1e-12);
    }
    assert!(sigmoid_scalar(-800.0f64).is_finite() && sigmoid_scalar(800.0f64) == 1.0);
    let x = Tensor3::from_vec([1, 1, 3], vec![-1.0f64, 0.0, 2.0]).unwrap();
    assert_eq!(relu(&x).data(), &[0.0, 0.0, 2.0]);
}

#[test]
fn bce_examples() {
    let l = bce_loss(&[1.0 - 1e-7f64], &[1], 1).unwrap();
    assert!(l < 1e-6);
    let l = bce_loss(&[0.5f64], &[1], 1).unwrap();
    assert!((l - std::f64::consts::LN_2).abs() < 1e-12);
    // clamped, not infinite
    assert!(bce_loss(&[0.0f64], &[1], 1).unwrap().is_finite());
    assert_eq!(bce_loss(&[0.5f64], &[2], 1), Err(NnError::Label { index: 0, value: 2 }));
    // summed over bits, averaged over the batch
    let l = bce_loss(&[0.5f64; 4], &[0, 1, 0, 1], 2).unwrap();
    assert!((l - 2.0 * std::f64::consts::LN_2).abs() < 1e-12);
}

#[test]
fn fused_bce_gradient() {
    let mut rng = rng_from_seed(19);
    for _ in 0..20 {
        let z = randn([2, 1, 6], &mut rng).map(|v| 4.0 * v);
        let y: Vec<u8> = (0..12).map(|_| rng.random_range(0..2u8)).collect();
        let (loss, g) = bce_with_logits(&z, &y).unwrap();
        let probs: Vec<f64> = z.data().iter().map(|&v| sigmoid_scalar(v)).collect();
        assert!((loss - bce_loss(&probs, &y, 2).unwrap()).abs() < 1e-9);
        for i in 0..12 {
            let analytic = (sigmoid_scalar(z.data()[i]) - y[i] as f64) / 2.0;
            assert!((g.data()[i] - analytic).abs() < 1e-15);
            let mut zp = z.clone();
            zp.data_mut()[i] += FD_EPS;
            let mut zm = z.clone();
            zm.data_mut()[i] -= FD_EPS;
            let num = (bce_with_logits(&zp, &y).unwrap().0 - bce_with_logits(&zm, &y).unwrap().0) / (2.0 * FD_EPS);
            assert!(rel_err(g.data()[i], num) < FD_TOL);
        }
    }
    // huge logits stay finite
    let z = Tensor3::from_vec([1, 1, 2], vec![1e4f64, -1e4]).unwrap();
    let (loss, g) = bce_with_logits(&z, &[0, 1]).unwrap();
    assert!((loss - 2e4).abs() < 1e-6 && g.is_finite());
}

#[test]
fn mse_gradient() {
    let p = Tensor3::from_vec([1, 1, 2], vec![1.0f64, 3.0]).unwrap();
    let (l, g) = mse_loss(&p, &[0.0, 1.0]).unwrap();
    assert_eq!(l, 2.5);
    assert_eq!(g.data(), &[1.0, 2.0]);
}

#[test]
fn adam_one_step() {
    let mut w = vec![0.0f64];
    let g = vec![1.0f64];
    let mut st = AdamState::new(AdamConfig { lr: 0.1, ..AdamConfig::default() });
    st.step(&mut [ParamGrad { param: &mut w, grad: &g }]).unwrap();
    assert!((w[0] + 0.1 / (1.0 + 1e-8)).abs() < 1e-12);
    assert_eq!(st.t, 1);
}

#[test]
fn adam_zero_gradient_is_noop() {
    let mut w = vec![0.7f64, -0.2];
    let g = vec![0.0f64; 2];
    let mut st = AdamState::new(AdamConfig::default());
    st.step(&mut [ParamGrad { param: &mut w, grad: &g }]).unwrap();
    assert_eq!(w, vec![0.7, -0.2]);
    assert_eq!(st.t, 1);
}

#[test]
fn adam_minimizes_quadratic() {
    let mut w = vec![1.0f64];
    let mut st = AdamState::new(AdamConfig { lr: 0.05, ..AdamConfig::default() });
    for _ in 0..500 {
        let g = vec![2.0 * w[0]];
        st.step(&mut [ParamGrad { param: &mut w, grad: &g }]).unwrap();
    }
    assert!(w[0].abs() < 1e-2, "w = {}", w[0]);
}

#[test]
fn adam_rejects_bad_input() {
    let mut w = vec![0.0f32; 2];
    let g = vec![0.0f32; 2];
    let mut st = AdamState::new(AdamConfig::default());
    st.step(&mut [ParamGrad { param: &mut w, grad: &g }]).unwrap();
    let mut w3 = vec![0.0f32; 3];
    let g3 = vec![0.0f32; 3];
    assert!(st.step(&mut [ParamGrad { param: &mut w3, grad: &g3 }]).is_err());
    let mut st = AdamState::<f32>::new(AdamConfig { lr: 0.0, ..AdamConfig::default() });
    assert_eq!(st.step(&mut []), Err(NnError::LearningRate(0.0)));
}

#[test]
fn op_count_examples() {
    let c = Conv1d::<f32>::new(1, 1, 31);
    assert_eq!(c.op_counts(1, 100).mults, 31 * 100);
    assert_eq!(Relu::<f32>::new().op_counts(16, 100).comparisons, 1600);
}

#[test]
fn f32_and_f64_agree() {
    let mut rng = rng_from_seed(20);
    let mut c64 = random_conv(2, 4, 31, &mut rng);
    let mut c32 = Conv1d::<f32>::from_params(
        2,
        4,
        31,
        c64.weight.iter().map(|&v| v as f32).collect(),
        c64.bias.iter().map(|&v| v as f32).collect(),
    )
    .unwrap();
    let x = randn([3, 2, 64], &mut rng);
    let a = c64.forward(&x, Mode::Infer).unwrap();
    let b = c32.forward(&x.cast(), Mode::Infer).unwrap();
    for (p, q) in a.data().iter().zip(b.data()) {
        assert!((p - *q as f64).abs() < 1e-4 * p.abs().max(1.0));
    }
}
