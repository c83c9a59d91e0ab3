// LMS equalization of one Rayleigh-faded frame: train on the known QPSK
// prefix, freeze the taps, then equalize the payload.
use demodnet::channel::{add_awgn, rayleigh_flat_fade, rng_from_seed, FadingSpec};
use demodnet::equalizer::{lms_equalize, training_sequence, LmsConfig};
use demodnet::modem::{build_constellation, hard_demodulate_min_distance, modulate, Modulation};
use rand::Rng;

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let c = build_constellation(Modulation::Qam16);
    let mut rng = rng_from_seed(11);
    let prefix = training_sequence(500, 0x7ea1);
    let bits: Vec<u8> = (0..1000 * 4).map(|_| rng.random_range(0..2u8)).collect();
    let mut frame = prefix.clone();
    frame.extend(modulate(&bits, &c)?);

    let spec = FadingSpec::new(30.0, 1e6)?;
    let (faded, gains) = rayleigh_flat_fade(&frame, &spec, &mut rng)?;
    let rx = add_awgn(&faded, 1e-3, &mut rng)?;
    let out = lms_equalize(&rx, &prefix, &LmsConfig::default())?;

    let tail = &out.training_error[out.training_error.len() - 50..];
    println!("fade magnitude at frame start {:.3}", gains[0].norm());
    println!("step size {:.4}, taps {:?}", out.equalizer.step_size(), out.equalizer.taps().len());
    println!("training MSE over last 50 symbols {:.2e}", tail.iter().sum::<f64>() / 50.0);
    let raw = hard_demodulate_min_distance(&rx[500..], &c);
    let eq = hard_demodulate_min_distance(&out.payload, &c);
    let ber = |d: &[u8]| d.iter().zip(&bits).filter(|(a, b)| a != b).count() as f64 / bits.len() as f64;
    println!("payload BER without equalizer {:.3}, with {:.4}", ber(&raw), ber(&eq));
    Ok(())
}

#[allow(dead_code)]
fn main() {
    run_example().unwrap();
}
