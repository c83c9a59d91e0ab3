// Exact and max-log LLRs for a few received 16QAM symbols.
use demodnet::llr::{exact_llr, maxlog_llr};
use demodnet::modem::{build_constellation, Modulation};
use num_complex::Complex64;

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let c = build_constellation(Modulation::Qam16);
    let sigma2 = 0.1;
    let fmt = |v: &[f64]| v.iter().map(|x| format!("{x:>8.3}")).collect::<Vec<_>>().join(" ");
    for r in [Complex64::new(0.3, -0.3), Complex64::new(0.95, 0.05), Complex64::new(0.0, 0.0)] {
        let exact = exact_llr(r, &c, sigma2)?;
        let maxlog = maxlog_llr(r, &c, sigma2)?;
        println!("r = {r:.2}\n  exact  {}\n  maxlog {}", fmt(&exact), fmt(&maxlog));
    }
    Ok(())
}

#[allow(dead_code)]
fn main() {
    run_example().unwrap();
}
