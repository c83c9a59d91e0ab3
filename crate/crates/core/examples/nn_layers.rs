// The network substrate on its own: fit conv -> batch norm -> relu -> conv
// to a three-tap moving average with Adam.
use demodnet::channel::rng_from_seed;
use demodnet::nn::{mse_loss, AdamConfig, AdamState, BatchNorm1d, Conv1d, Layer, Mode, Relu, Tensor3};
use rand::Rng;

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let mut rng = rng_from_seed(1);
    let mut init = |n: usize| -> Vec<f64> { (0..n).map(|_| rng.random_range(-0.3..0.3)).collect() };
    let mut conv = Conv1d::from_params(1, 8, 5, init(40), vec![0.0; 8])?;
    let mut bn = BatchNorm1d::<f64>::new(8);
    let mut relu = Relu::<f64>::new();
    let mut head = Conv1d::from_params(8, 1, 1, init(8), vec![0.0])?;
    let mut adam = AdamState::new(AdamConfig { lr: 0.01, ..AdamConfig::default() });

    let (batch, len) = (16usize, 32usize);
    let mut data_rng = rng_from_seed(2);
    let mut last = f64::NAN;
    for step in 0..400 {
        let x: Vec<f64> = (0..batch * len).map(|_| data_rng.random_range(-1.0..1.0)).collect();
        let target: Vec<f64> = (0..batch * len)
            .map(|i| {
                let (b, t) = (i / len, i % len);
                let lo = t.saturating_sub(1);
                let hi = (t + 1).min(len - 1);
                (lo..=hi).map(|j| x[b * len + j]).sum::<f64>() / 3.0
            })
            .collect();
        let input = Tensor3::from_vec([batch, 1, len], x)?;

        let h = conv.forward(&input, Mode::Train)?;
        let h = relu.forward(&bn.forward(&h, Mode::Train)?, Mode::Train)?;
        let y = head.forward(&h, Mode::Train)?;
        let (loss, grad) = mse_loss(&y, &target)?;

        conv.zero_grad();
        bn.zero_grad();
        head.zero_grad();
        let g = relu.backward(&head.backward(&grad)?)?;
        conv.backward(&bn.backward(&g)?)?;
        let mut params = conv.params();
        params.extend(bn.params());
        params.extend(head.params());
        adam.step(&mut params)?;

        if step % 100 == 0 {
            println!("step {step:>3}  mse {loss:.5}");
        }
        last = loss;
    }
    println!("final mse {last:.5}");
    Ok(())
}

#[allow(dead_code)]
fn main() {
    run_example().unwrap();
}
