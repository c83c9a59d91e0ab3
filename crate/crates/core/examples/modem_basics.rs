// Gray-mapped constellations, hard demodulation and the uncoded theory curve.
use demodnet::channel::{add_awgn, rng_from_seed, sigma2_from_ebn0};
use demodnet::fec::theoretical_ber;
use demodnet::modem::{build_constellation, hard_demodulate_min_distance, modulate, Modulation};
use rand::Rng;

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let mut rng = rng_from_seed(7);
    let ebn0 = 6.0;
    for m in Modulation::ALL {
        let c = build_constellation(m);
        let k = m.bits_per_symbol();
        let es = c.points().iter().map(|p| p.norm_sqr()).sum::<f64>() / c.points().len() as f64;
        let bits: Vec<u8> = (0..50_000 * k).map(|_| rng.random_range(0..2u8)).collect();
        let rx = add_awgn(&modulate(&bits, &c)?, sigma2_from_ebn0(ebn0, k, 1.0)?, &mut rng)?;
        let errors = hard_demodulate_min_distance(&rx, &c).iter().zip(&bits).filter(|(a, b)| a != b).count();
        println!(
            "{:>7}: {:>3} points, Es {es:.3}, BER at {ebn0} dB {:.2e} (theory {:.2e})",
            m.label(),
            c.points().len(),
            errors as f64 / bits.len() as f64,
            theoretical_ber(m, ebn0)
        );
    }
    Ok(())
}

#[allow(dead_code)]
fn main() {
    run_example().unwrap();
}
