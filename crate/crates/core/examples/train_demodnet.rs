// Train a small DemodNet on QPSK over AWGN and compare it with the
// minimum-distance detector on fresh data.
use demodnet::channel::{rng_from_seed, Scenario};
use demodnet::demodnet::{generate_dataset, train, DatasetSpec, DemodNet, Head, ModelConfig, TrainSchedule};
use demodnet::link::{Link, LinkConfig};
use demodnet::channel::sigma2_from_ebn0;
use demodnet::modem::{build_constellation, hard_decision_from_soft, hard_demodulate_min_distance, modulate, Modulation};
use rand::Rng;

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let m = Modulation::Qpsk;
    let spec = DatasetSpec {
        samples_per_ebn0: 800,
        ..DatasetSpec::desk(m, Scenario::Awgn, vec![2.0, 4.0, 6.0], 21)
    };
    let data = generate_dataset(&spec)?;
    let config = ModelConfig { hidden_channels: 8, ..ModelConfig::desk() };
    let mut model = DemodNet::new(m, config, Head::Logit, 22)?;
    let schedule = TrainSchedule { max_epochs: 3, batch_size: 32, seed: 23, ..TrainSchedule::default() };
    let report = train(&mut model, &data, &schedule)?;
    println!("epoch losses {:?}", report.epoch_loss.iter().map(|l| format!("{l:.4}")).collect::<Vec<_>>());

    let c = build_constellation(m);
    let mut rng = rng_from_seed(24);
    let bits: Vec<u8> = (0..20_000 * 2).map(|_| rng.random_range(0..2u8)).collect();
    let link = Link::new(Scenario::Awgn, sigma2_from_ebn0(4.0, 2, 1.0)?, LinkConfig::default())?;
    let rx = link.transmit(&modulate(&bits, &c)?, &mut rng)?;
    let lpr = model.soft_output(&rx, 100)?;
    let errs = |d: &[u8]| d.iter().zip(&bits).filter(|(a, b)| a != b).count();
    println!(
        "4 dB: min-distance errors {}, DemodNet errors {} over {} bits",
        errs(&hard_demodulate_min_distance(&rx, &c)),
        errs(&hard_decision_from_soft(&lpr)),
        bits.len()
    );
    Ok(())
}

#[allow(dead_code)]
fn main() {
    run_example().unwrap();
}
