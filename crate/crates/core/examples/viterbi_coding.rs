// K=7 rate-1/2 convolutional code over BPSK: hard versus soft Viterbi.
use demodnet::channel::{add_awgn, rng_from_seed, sigma2_from_ebn0};
use demodnet::fec::{conv_encode, hard_to_soft, viterbi_decode, TrellisSpec};
use demodnet::llr::{llr_sequence, LlrMode};
use demodnet::modem::{build_constellation, hard_demodulate_min_distance, modulate, Modulation};
use rand::Rng;

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let code = TrellisSpec::K7_171_133;
    let c = build_constellation(Modulation::Bpsk);
    let mut rng = rng_from_seed(5);
    for ebn0 in [2.0, 3.0, 4.0] {
        let info: Vec<u8> = (0..50_000).map(|_| rng.random_range(0..2u8)).collect();
        let coded = conv_encode(&info, &code);
        let sigma2 = sigma2_from_ebn0(ebn0, 1, TrellisSpec::RATE)?;
        let rx = add_awgn(&modulate(&coded, &c)?, sigma2, &mut rng)?;

        let hard = viterbi_decode(&hard_to_soft(&hard_demodulate_min_distance(&rx, &c)), &code, 32)?;
        let soft = viterbi_decode(&llr_sequence(&rx, &c, sigma2, LlrMode::Exact)?, &code, 32)?;
        let errs = |d: &[u8]| d.iter().zip(&info).filter(|(a, b)| a != b).count();
        println!("{ebn0} dB: hard-decision errors {:>5}, soft-decision errors {:>5}", errs(&hard), errs(&soft));
    }
    Ok(())
}

#[allow(dead_code)]
fn main() {
    run_example().unwrap();
}
