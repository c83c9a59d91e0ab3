use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use num_complex::Complex64;
use rand::Rng;

use demodnet::channel::{sigma2_from_ebn0, substream, Scenario};
use demodnet::demodnet::{
    exact_llr_op_counts, generate_dataset, train, train_llrnet_baseline, DatasetSpec, DemodNet, Head, ModelConfig,
    TrainSchedule,
};
use demodnet::harness::{
    self, execute, parse_grid, plan, run_sweep, write_records, Coding, Demodulator, ExecuteOptions, ExperimentConfig,
    Figure, HarnessError, Manifest, Scale,
};
use demodnet::link::{Link, LinkConfig};
use demodnet::llr::{llr_sequence, LlrMode};
use demodnet::modem::{build_constellation, modulate, Modulation};

#[derive(Parser)]
#[command(name = "demodnet", version, about = "Soft demodulation experiments: train, evaluate and sweep BER curves")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train a DemodNet (or the LLR-regression baseline) and save a checkpoint.
    Train(TrainArgs),
    /// BER of a checkpoint against min-distance and exact-LLR demodulation.
    Evaluate(EvaluateArgs),
    /// Run a sweep described by a TOML config file.
    Sweep(SweepArgs),
    /// Regenerate the data behind one figure.
    Reproduce(ReproduceArgs),
    /// Print per-bit exact LLR, max-log LLR and optionally a model's soft output.
    DumpLlr(DumpArgs),
    /// Describe a checkpoint: shapes, parameter count and operation counts.
    Info(InfoArgs),
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long)]
    modulation: Modulation,
    #[arg(long, default_value = "awgn")]
    scenario: Scenario,
    /// Training grid, `lo:hi:step` or a comma list (dB).
    #[arg(long)]
    ebn0: String,
    #[arg(long, default_value_t = 5_000)]
    samples: usize,
    #[arg(long, default_value_t = 4)]
    epochs: usize,
    #[arg(long, default_value_t = 128)]
    batch_size: usize,
    #[arg(long, default_value_t = 0.003)]
    lr: f64,
    #[arg(long, default_value_t = 16)]
    channels: usize,
    #[arg(long, default_value_t = 9)]
    hidden_kernel: usize,
    #[arg(long, default_value = "logit")]
    head: Head,
    /// Code rate used to convert Eb/N0 to noise variance.
    #[arg(long, default_value_t = 1.0)]
    code_rate: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct EvaluateArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    #[arg(long, default_value = "awgn")]
    scenario: Scenario,
    #[arg(long)]
    ebn0: String,
    #[arg(long, default_value = "none")]
    coding: String,
    #[arg(long, default_value_t = 100_000)]
    bits: u64,
    #[arg(long, default_value_t = 10_000_000)]
    max_bits: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// CSV destination; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SweepArgs {
    config: PathBuf,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ReproduceArgs {
    /// fig2, fig3, fig4, fig5a or fig6.
    figure: String,
    #[arg(long, default_value = "desk")]
    scale: String,
    #[arg(long, default_value = "results")]
    out: PathBuf,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Re-run a saved manifest instead of planning from the figure id.
    #[arg(long)]
    manifest: Option<PathBuf>,
    #[arg(long)]
    quiet: bool,
}

#[derive(Args)]
struct DumpArgs {
    #[arg(long)]
    modulation: Modulation,
    #[arg(long)]
    ebn0: f64,
    #[arg(long, default_value = "awgn")]
    scenario: Scenario,
    #[arg(long, default_value_t = 100)]
    symbols: usize,
    #[arg(long, default_value_t = 1.0)]
    code_rate: f64,
    #[arg(long)]
    checkpoint: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct InfoArgs {
    checkpoint: PathBuf,
    /// Input length for the operation counts.
    #[arg(long, default_value_t = 100)]
    symbols: usize,
}

fn cmd_train(a: TrainArgs) -> Result<(), HarnessError> {
    let grid = parse_grid(&a.ebn0).map_err(HarnessError::Config)?;
    let spec = DatasetSpec {
        samples_per_ebn0: a.samples,
        code_rate: a.code_rate,
        ..DatasetSpec::desk(a.modulation, a.scenario, grid, harness::derive_seed(a.seed, "data"))
    };
    let config = ModelConfig { hidden_channels: a.channels, hidden_kernel: a.hidden_kernel, ..ModelConfig::default() };
    let schedule = TrainSchedule {
        batch_size: a.batch_size,
        max_epochs: a.epochs,
        lr0: a.lr,
        seed: harness::derive_seed(a.seed, "shuffle"),
        ..TrainSchedule::default()
    };
    let data = generate_dataset(&spec)?;
    let init = harness::derive_seed(a.seed, "init");
    let (model, report) = match a.head {
        Head::Logit => {
            let mut m = DemodNet::new(a.modulation, config, Head::Logit, init)?;
            let r = train(&mut m, &data, &schedule)?;
            (m, r)
        }
        Head::Linear => train_llrnet_baseline(config, &data, &schedule, init)?,
    };
    for (e, (loss, lr)) in report.epoch_loss.iter().zip(&report.epoch_lr).enumerate() {
        println!("epoch {} lr {lr} loss {loss:.6}", e + 1);
    }
    model.save(&a.out)?;
    println!("saved {} ({} parameters)", a.out.display(), model.param_count());
    Ok(())
}

fn cmd_evaluate(a: EvaluateArgs) -> Result<(), HarnessError> {
    let model = DemodNet::load(&a.checkpoint)?;
    let grid = parse_grid(&a.ebn0).map_err(HarnessError::Config)?;
    let mut cfg = ExperimentConfig::new("evaluate", model.modulation(), a.scenario, grid);
    cfg.coding = match a.coding.as_str() {
        "none" => Coding::None,
        "conv" => Coding::Conv,
        other => return Err(HarnessError::Config(format!("unknown coding `{other}` (none or conv)"))),
    };
    let (learned, field) = match model.head() {
        Head::Logit => (Demodulator::DemodnetLpr, &mut cfg.demodnet_checkpoint),
        Head::Linear => (Demodulator::Llrnet, &mut cfg.llrnet_checkpoint),
    };
    *field = Some(a.checkpoint.clone());
    cfg.demodulators = vec![Demodulator::MinDistance, Demodulator::ExactLlr, learned];
    cfg.bits_per_point = a.bits;
    cfg.max_bits_per_point = a.max_bits.max(a.bits);
    cfg.seed = a.seed;
    let records = run_sweep(&cfg.resolved())?;
    emit(&records, a.out)
}

fn emit(records: &[harness::BerRecord], out: Option<PathBuf>) -> Result<(), HarnessError> {
    match out {
        Some(path) => {
            write_records(&path, records)?;
            println!("wrote {} rows to {}", records.len(), path.display());
        }
        None => {
            let mut w = csv::Writer::from_writer(std::io::stdout());
            for r in records {
                w.serialize(r)?;
            }
            w.flush()?;
        }
    }
    Ok(())
}

fn cmd_sweep(a: SweepArgs) -> Result<(), HarnessError> {
    let mut cfg = ExperimentConfig::load(&a.config)?;
    if let Some(dir) = a.config.parent() {
        cfg = cfg.with_base_dir(dir);
    }
    let records = run_sweep(&cfg)?;
    emit(&records, a.out)
}

fn cmd_reproduce(a: ReproduceArgs) -> Result<(), HarnessError> {
    let manifest = match &a.manifest {
        Some(path) => Manifest::load(path)?,
        None => plan(a.figure.parse::<Figure>()?, a.scale.parse::<Scale>()?, a.seed)?,
    };
    let summary = execute(&manifest, &a.out, &ExecuteOptions { verbose: !a.quiet })?;
    for f in &summary.csv_files {
        println!("{}", f.display());
    }
    Ok(())
}

fn cmd_dump(a: DumpArgs) -> Result<(), HarnessError> {
    let k = a.modulation.bits_per_symbol();
    let c = build_constellation(a.modulation);
    let sigma2 = sigma2_from_ebn0(a.ebn0, k, a.code_rate)?;
    let link = Link::new(a.scenario, sigma2, LinkConfig::default())?;
    let block = link.block_symbols();
    let symbols = a.symbols.div_ceil(block) * block;
    let mut rng = substream(a.seed, 0);
    let bits: Vec<u8> = (0..symbols * k).map(|_| rng.random_range(0..2u8)).collect();
    let rx: Vec<Complex64> = link.transmit(&modulate(&bits, &c)?, &mut rng)?;
    let exact = llr_sequence(&rx, &c, sigma2, LlrMode::Exact)?;
    let maxlog = llr_sequence(&rx, &c, sigma2, LlrMode::MaxLog)?;
    let learned = match &a.checkpoint {
        Some(p) => {
            let model = DemodNet::load(p)?;
            if model.modulation() != a.modulation {
                return Err(HarnessError::Config(format!("checkpoint is for {}", model.modulation())));
            }
            Some(model.soft_output(&rx, LinkConfig::default().burst_symbols)?)
        }
        None => None,
    };
    let mut out = std::io::stdout().lock();
    let io = |e: std::io::Error| HarnessError::Io(e);
    writeln!(out, "symbol,bit,sent,rx_re,rx_im,exact_llr,maxlog_llr{}", if learned.is_some() { ",model" } else { "" }).map_err(io)?;
    for i in 0..a.symbols * k {
        let s = i / k;
        write!(out, "{s},{},{},{},{},{},{}", i % k, bits[i], rx[s].re, rx[s].im, exact[i], maxlog[i]).map_err(io)?;
        if let Some(l) = &learned {
            write!(out, ",{}", l[i]).map_err(io)?;
        }
        writeln!(out).map_err(io)?;
    }
    Ok(())
}

fn cmd_info(a: InfoArgs) -> Result<(), HarnessError> {
    let model = DemodNet::load(&a.checkpoint)?;
    let cfg = model.config();
    println!("modulation       {}", model.modulation());
    println!("bits per symbol  {}", model.bits_per_symbol());
    println!("channels         {}", cfg.hidden_channels);
    println!("hidden kernel    {}", cfg.hidden_kernel);
    println!("final kernel     {}", cfg.final_kernel);
    println!("hidden blocks    {}", cfg.hidden_blocks);
    println!("head             {}", model.head());
    println!("parameters       {}", model.param_count());
    let report = model.count_ops(a.symbols);
    println!("operations per symbol at {} symbols:", a.symbols);
    println!("  {:<8} {:>14} {:>14} {:>12} {:>8}", "layer", "mults", "adds", "compares", "exp/log");
    let n = a.symbols as f64;
    for l in &report.layers {
        let o = l.ops;
        println!(
            "  {:<8} {:>14.1} {:>14.1} {:>12.1} {:>8.1}",
            l.name,
            o.mults as f64 / n,
            o.adds as f64 / n,
            o.comparisons as f64 / n,
            o.exp_log as f64 / n
        );
    }
    let [m, ad, cmp, el] = report.per_symbol();
    println!("  {:<8} {m:>14.1} {ad:>14.1} {cmp:>12.1} {el:>8.1}", "total");
    let ex = exact_llr_op_counts(model.modulation());
    println!(
        "  {:<8} {:>14} {:>14} {:>12} {:>8}",
        "exactllr", ex.mults, ex.adds, ex.comparisons, ex.exp_log
    );
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Train(a) => cmd_train(a),
        Command::Evaluate(a) => cmd_evaluate(a),
        Command::Sweep(a) => cmd_sweep(a),
        Command::Reproduce(a) => cmd_reproduce(a),
        Command::DumpLlr(a) => cmd_dump(a),
        Command::Info(a) => cmd_info(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let msg = e.to_string().replace('\n', " ");
            eprintln!("error: kind={} msg={msg}", e.kind());
            if matches!(e, HarnessError::Config(_)) {
                eprintln!("usage: demodnet <train|evaluate|sweep|reproduce|dump-llr|info> --help");
            }
            ExitCode::FAILURE
        }
    }
}
