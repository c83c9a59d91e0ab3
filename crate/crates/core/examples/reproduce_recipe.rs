// Inspect a figure recipe, shrink it, and run it end to end.
use demodnet::harness::{execute, plan, ExecuteOptions, Figure, Scale};

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let mut manifest = plan(Figure::Fig5a, Scale::Desk, 1)?;
    println!("{} trains {} models:", manifest.figure, manifest.models.len());
    for m in &manifest.models {
        println!("  {} ({} head, {} Eb/N0 points)", m.name, m.head, m.dataset.ebn0_db.len());
    }

    // shrink to something that finishes in seconds
    for m in &mut manifest.models {
        m.dataset.samples_per_ebn0 = 1500;
        m.dataset.ebn0_db.truncate(2);
        m.model.hidden_channels = 8;
        m.schedule.max_epochs = 2;
    }
    for e in &mut manifest.experiments {
        e.ebn0_db = vec![6.0, 10.0];
        e.bits_per_point = 10_000;
        e.max_bits_per_point = 20_000;
    }
    let out = std::env::temp_dir().join("demodnet-example-reproduce");
    let summary = execute(&manifest, &out, &ExecuteOptions::default())?;
    for (name, records) in &summary.records {
        for r in records {
            println!("{name}: {:>4.1} dB {:<13} BER {:.3e}", r.ebn0_db, r.demodulator.as_str(), r.ber);
        }
    }
    println!("outputs in {}", out.display());
    Ok(())
}

#[allow(dead_code)]
fn main() {
    run_example().unwrap();
}
