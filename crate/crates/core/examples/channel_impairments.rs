// The four channel scenarios applied to the same QPSK symbols.
use demodnet::channel::{rng_from_seed, sigma2_from_ebn0, GeneralizedGaussian, Scenario};
use demodnet::link::{Link, LinkConfig};
use demodnet::modem::{build_constellation, modulate, Modulation};
use rand::Rng;

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let c = build_constellation(Modulation::Qpsk);
    let mut rng = rng_from_seed(3);
    let bits: Vec<u8> = (0..2_000 * 2).map(|_| rng.random_range(0..2u8)).collect();
    let tx = modulate(&bits, &c)?;
    let sigma2 = sigma2_from_ebn0(10.0, 2, 1.0)?;
    for s in ["awgn", "aggn(0,1,1)", "awgn+cfo(0.005)", "rayleigh(30,1e6)+awgn"] {
        let scenario: Scenario = s.parse()?;
        let link = Link::new(scenario, sigma2, LinkConfig::default())?;
        let rx = link.transmit(&tx, &mut rng)?;
        let mse = rx.iter().zip(&tx).map(|(r, t)| (r - t).norm_sqr()).sum::<f64>() / tx.len() as f64;
        println!(
            "{scenario:<24} block {:>5} symbols, error power {mse:.4} (sigma2 {sigma2:.4})",
            link.block_symbols()
        );
    }
    // fading output is already equalized, so its error power is residual ISI plus noise
    let laplace = GeneralizedGaussian::new(0.0, 1.0, 1.0)?;
    println!("unit-scale Laplacian variance {:.3}", laplace.variance());
    Ok(())
}

#[allow(dead_code)]
fn main() {
    run_example().unwrap();
}
