// Save and reload a model, then print its inference cost next to the exact
// LLR demapper for 64QAM.
use demodnet::demodnet::{exact_llr_op_counts, DemodNet, Head, ModelConfig};
use demodnet::modem::Modulation;

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let m = Modulation::Qam64;
    let model = DemodNet::new(m, ModelConfig::default(), Head::Logit, 9)?;
    let bytes = model.to_bytes();
    let back = DemodNet::from_bytes(&bytes)?;
    println!("{} parameters, checkpoint {} bytes, round trip equal: {}", model.param_count(), bytes.len(), back.to_bytes() == bytes);

    let report = model.count_ops(100);
    println!("{:<8} {:>12} {:>12}", "layer", "mults/sym", "adds/sym");
    for l in &report.layers {
        let [mu, ad, _, _] = l.ops.per(100);
        println!("{:<8} {mu:>12.0} {ad:>12.0}", l.name);
    }
    let [mu, ad, cmp, ex] = report.per_symbol();
    println!("DemodNet total: {mu:.0} mults, {ad:.0} adds, {cmp:.0} comparisons, {ex:.0} exp/log per symbol");
    let e = exact_llr_op_counts(m);
    println!("exact LLR: {} mults, {} adds, {} comparisons, {} exp/log per symbol", e.mults, e.adds, e.comparisons, e.exp_log);
    Ok(())
}

#[allow(dead_code)]
fn main() {
    run_example().unwrap();
}
