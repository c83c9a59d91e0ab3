// A coded BER sweep described in TOML, compared across classical demappers.
use demodnet::harness::{run_sweep, write_records, ExperimentConfig};

const CONFIG: &str = r#"
name = "qam16-coded"
modulation = "qam16"
scenario = "awgn"
ebn0_db = [3.0, 4.0, 5.0]
demodulators = ["min-distance", "maxlog-llr", "exact-llr"]
coding = "conv"
bits_per_point = 20000
max_bits_per_point = 200000
target_errors = 100
seed = 4
"#;

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let cfg = ExperimentConfig::from_toml(CONFIG)?;
    let records = run_sweep(&cfg)?;
    for r in &records {
        println!(
            "{:>4.1} dB {:<13} {:<13} {:>7} bits {:>5} errors  BER {:.2e}",
            r.ebn0_db, r.demodulator.as_str(), r.decoder.as_str(), r.bits_counted, r.bit_errors, r.ber
        );
    }
    let out = std::env::temp_dir().join("demodnet-example-sweep.csv");
    write_records(&out, &records)?;
    println!("wrote {}", out.display());
    Ok(())
}

#[allow(dead_code)]
fn main() {
    run_example().unwrap();
}
