use std::fmt;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{run_sweep, write_records, BerRecord, Coding, Demodulator, ExperimentConfig, HarnessError};
use crate::channel::Scenario;
use crate::demodnet::{generate_dataset, train, train_llrnet_baseline, DatasetSpec, DemodNet, Head, ModelConfig, TrainSchedule};
use crate::fec::{theoretical_ber, TrellisSpec};
use crate::modem::Modulation;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Figure {
    Fig2,
    Fig3,
    Fig4,
    Fig5a,
    Fig5b,
    Fig6,
}

impl Figure {
    pub const ALL: [Figure; 6] = [Figure::Fig2, Figure::Fig3, Figure::Fig4, Figure::Fig5a, Figure::Fig5b, Figure::Fig6];

    pub fn as_str(self) -> &'static str {
        match self {
            Figure::Fig2 => "fig2",
            Figure::Fig3 => "fig3",
            Figure::Fig4 => "fig4",
            Figure::Fig5a => "fig5a",
            Figure::Fig5b => "fig5b",
            Figure::Fig6 => "fig6",
        }
    }
}

impl fmt::Display for Figure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Figure {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Figure::ALL
            .into_iter()
            .find(|f| f.as_str() == s)
            .ok_or_else(|| HarnessError::Config(format!("unknown figure `{s}` (fig2, fig3, fig4, fig5a, fig6)")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scale {
    /// Single-core budget: smaller model, fewer samples and epochs.
    Desk,
    /// Published training and test sizes.
    Paper,
}

impl FromStr for Scale {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "desk" => Ok(Scale::Desk),
            "paper" => Ok(Scale::Paper),
            _ => Err(HarnessError::Config(format!("unknown scale `{s}` (desk or paper)"))),
        }
    }
}

impl fmt::Display for Scale {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Scale::Desk => "desk",
            Scale::Paper => "paper",
        })
    }
}

/// Everything needed to train one model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainingPlan {
    pub name: String,
    pub head: Head,
    pub model: ModelConfig,
    pub init_seed: u64,
    pub schedule: TrainSchedule,
    pub dataset: DatasetSpec,
    /// Relative paths resolve against the output directory.
    pub checkpoint: PathBuf,
}

/// Resolved recipe of a figure: written next to its CSVs and sufficient
/// to regenerate them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub figure: Figure,
    pub scale: Scale,
    pub seed: u64,
    pub models: Vec<TrainingPlan>,
    pub experiments: Vec<ExperimentConfig>,
}

pub const MANIFEST_FILE: &str = "manifest.toml";

impl Manifest {
    pub fn to_toml(&self) -> Result<String, HarnessError> {
        toml::to_string(self).map_err(|e| HarnessError::Config(e.to_string()))
    }

    pub fn from_toml(text: &str) -> Result<Self, HarnessError> {
        let m: Self = toml::from_str(text).map_err(|e| HarnessError::Config(e.message().to_string()))?;
        for e in &m.experiments {
            e.validate()?;
        }
        Ok(m)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, HarnessError> {
        let path = path.as_ref();
        let text =
            fs::read_to_string(path).map_err(|e| HarnessError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }
}

/// Stable 63-bit seed for a named sub-task (FNV-1a, then a splitmix64 finalizer).
pub fn derive_seed(seed: u64, label: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325 ^ seed;
    for b in label.bytes() {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h = (h ^ (h >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    h = (h ^ (h >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    (h ^ (h >> 31)) >> 1
}

fn grid(lo: f64, hi: f64, step: f64) -> Vec<f64> {
    let n = ((hi - lo) / step).round() as usize;
    (0..=n).map(|i| lo + step * i as f64).collect()
}

/// Top of the published training range for each modulation.
fn train_max_db(m: Modulation) -> f64 {
    match m {
        Modulation::Bpsk | Modulation::Qpsk => 8.0,
        Modulation::Qam16 => 12.0,
        Modulation::Qam64 => 16.0,
        Modulation::Qam256 => 20.0,
    }
}

struct Recipe {
    scale: Scale,
    seed: u64,
    models: Vec<TrainingPlan>,
    experiments: Vec<ExperimentConfig>,
}

impl Recipe {
    fn model_config(&self) -> ModelConfig {
        match self.scale {
            Scale::Desk => ModelConfig::desk(),
            Scale::Paper => ModelConfig::default(),
        }
    }

    /// Desk scale halves the grid density; 256QAM is quartered.
    fn train_grid(&self, m: Modulation, lo: f64, hi: f64) -> Vec<f64> {
        let step = match (self.scale, m) {
            (Scale::Paper, _) => 1.0,
            (Scale::Desk, Modulation::Qam256) => 4.0,
            (Scale::Desk, _) => 2.0,
        };
        grid(lo, hi, step)
    }

    /// Adds (or reuses) a training plan and returns its checkpoint path.
    fn model(&mut self, head: Head, m: Modulation, scenario: Scenario, coding: Coding, train_db: Vec<f64>) -> PathBuf {
        let name = format!(
            "{}-{}-{}-{}",
            match head {
                Head::Logit => "demodnet",
                Head::Linear => "llrnet",
            },
            m,
            scenario.tag(),
            match coding {
                Coding::None => "uncoded",
                Coding::Conv => "coded",
            }
        );
        let checkpoint = PathBuf::from("models").join(format!("{name}.ckpt"));
        if self.models.iter().any(|p| p.name == name) {
            return checkpoint;
        }
        let (samples, epochs) = match self.scale {
            Scale::Desk => (5_000, 4),
            Scale::Paper => (100_000, 15),
        };
        let dataset = DatasetSpec {
            samples_per_ebn0: samples,
            code_rate: coding.rate(),
            ..DatasetSpec::desk(m, scenario, train_db, derive_seed(self.seed, &format!("data/{name}")))
        };
        self.models.push(TrainingPlan {
            head,
            model: self.model_config(),
            init_seed: derive_seed(self.seed, &format!("init/{name}")),
            schedule: TrainSchedule {
                max_epochs: epochs,
                seed: derive_seed(self.seed, &format!("shuffle/{name}")),
                ..TrainSchedule::default()
            },
            dataset,
            checkpoint: checkpoint.clone(),
            name,
        });
        checkpoint
    }

    #[allow(clippy::too_many_arguments)]
    fn experiment(
        &mut self,
        name: String,
        m: Modulation,
        scenario: Scenario,
        coding: Coding,
        eval_db: Vec<f64>,
        train_db: Vec<f64>,
        demods: &[Demodulator],
    ) {
        let mut cfg = ExperimentConfig::new(name.clone(), m, scenario, eval_db);
        cfg.coding = coding;
        cfg.demodulators = demods.to_vec();
        cfg.seed = derive_seed(self.seed, &format!("sweep/{name}"));
        let k = m.bits_per_symbol();
        match self.scale {
            // one deep fade spoils a whole frame, so fading needs many more
            // frames than errors would suggest
            Scale::Desk if scenario.is_fading() => {
                cfg.bits_per_point = 2_000_000;
                cfg.max_bits_per_point = 4_000_000;
            }
            Scale::Desk => {
                cfg.bits_per_point = 10_000;
                cfg.max_bits_per_point = 1_000_000;
            }
            Scale::Paper => {
                // fixed test set of 50,000 samples of 100 symbols
                let symbols = 50_000 * 100;
                let bits = match coding {
                    Coding::None => symbols * k,
                    Coding::Conv => {
                        let chunks = symbols / cfg.chunk_symbols;
                        chunks * (cfg.chunk_symbols * k / 2 - TrellisSpec::K7_171_133.memory())
                    }
                };
                cfg.bits_per_point = bits as u64;
                cfg.max_bits_per_point = bits as u64;
            }
        }
        if demods.contains(&Demodulator::DemodnetLpr) {
            cfg.demodnet_checkpoint = Some(self.model(Head::Logit, m, scenario, coding, train_db.clone()));
        }
        if demods.contains(&Demodulator::Llrnet) {
            cfg.llrnet_checkpoint = Some(self.model(Head::Linear, m, scenario, coding, train_db));
        }
        self.experiments.push(cfg.resolved());
    }
}

/// The resolved recipe for `figure` at `scale`.
///
/// Uncoded models train on the published per-modulation ranges; coded
/// models train on the range their curve is evaluated over.
pub fn plan(figure: Figure, scale: Scale, seed: u64) -> Result<Manifest, HarnessError> {
    use Demodulator::*;
    let mut r = Recipe { scale, seed, models: Vec::new(), experiments: Vec::new() };
    let coded = Coding::Conv;
    match figure {
        Figure::Fig2 => {
            for m in Modulation::ALL {
                let hi = train_max_db(m);
                let tg = r.train_grid(m, 0.0, hi);
                r.experiment(format!("fig2-{m}"), m, Scenario::Awgn, Coding::None, grid(0.0, hi, 1.0), tg, &[MinDistance, DemodnetLpr]);
            }
        }
        Figure::Fig3 => {
            for (m, lo, hi) in [(Modulation::Bpsk, 0.0, 6.0), (Modulation::Qam16, 2.0, 10.0), (Modulation::Qam64, 6.0, 14.0)] {
                let tg = r.train_grid(m, lo, hi);
                r.experiment(format!("fig3-{m}"), m, Scenario::Awgn, coded, grid(lo, hi, 1.0), tg, &[ExactLlr, DemodnetLpr]);
            }
        }
        Figure::Fig4 => {
            let m = Modulation::Qam16;
            let tg = r.train_grid(m, 0.0, 14.0);
            let s = Scenario::AwgnCfo { delta_f: 0.005 };
            r.experiment(format!("fig4-{m}"), m, s, coded, grid(0.0, 14.0, 1.0), tg, &[ExactLlr, DemodnetLpr]);
        }
        Figure::Fig5a => {
            let m = Modulation::Qam16;
            let tg = r.train_grid(m, 2.0, 14.0);
            let s = Scenario::Aggn { mu: 0.0, gamma: 1.0, rho: 1.0 };
            r.experiment(format!("fig5a-{m}"), m, s, coded, grid(2.0, 14.0, 1.0), tg, &[ExactLlr, DemodnetLpr, Llrnet]);
        }
        Figure::Fig5b => return Err(HarnessError::OutOfScope("out of scope: turbo code".into())),
        Figure::Fig6 => {
            let s = Scenario::RayleighAwgn { max_doppler_hz: 30.0, symbol_rate_hz: 1e6 };
            for (m, lo, hi) in [(Modulation::Qam16, 4.0, 28.0), (Modulation::Qam64, 8.0, 32.0)] {
                let tg = r.train_grid(m, lo, hi);
                r.experiment(format!("fig6-{m}"), m, s, coded, grid(lo, hi, 2.0), tg, &[ExactLlr, DemodnetLpr]);
            }
        }
    }
    Ok(Manifest { figure, scale, seed, models: r.models, experiments: r.experiments })
}

#[derive(Debug, Clone, Default)]
pub struct ExecuteOptions {
    /// Progress lines on stderr.
    pub verbose: bool,
}

#[derive(Debug, Clone, Default)]
pub struct ReproduceSummary {
    pub csv_files: Vec<PathBuf>,
    pub trained: Vec<String>,
    pub reused: Vec<String>,
    /// Records per experiment, in manifest order.
    pub records: Vec<(String, Vec<BerRecord>)>,
}

/// Trains the model a plan describes.
pub fn train_plan(plan: &TrainingPlan) -> Result<DemodNet, HarnessError> {
    let data = generate_dataset(&plan.dataset)?;
    Ok(match plan.head {
        Head::Logit => {
            let mut model = DemodNet::new(plan.dataset.modulation, plan.model, Head::Logit, plan.init_seed)?;
            train(&mut model, &data, &plan.schedule)?;
            model
        }
        Head::Linear => train_llrnet_baseline(plan.model, &data, &plan.schedule, plan.init_seed)?.0,
    })
}

fn sidecar(ckpt: &Path) -> PathBuf {
    let mut s = ckpt.as_os_str().to_owned();
    s.push(".plan.toml");
    PathBuf::from(s)
}

/// Trains a plan's model unless a checkpoint trained from the identical
/// plan already exists. Returns true when training ran.
fn ensure_model(plan: &TrainingPlan, out_dir: &Path) -> Result<bool, HarnessError> {
    let ckpt = out_dir.join(&plan.checkpoint);
    let plan_text = toml::to_string(plan).map_err(|e| HarnessError::Config(e.to_string()))?;
    let side = sidecar(&ckpt);
    if ckpt.exists() && fs::read_to_string(&side).ok().as_deref() == Some(plan_text.as_str()) && DemodNet::load(&ckpt).is_ok() {
        return Ok(false);
    }
    if let Some(dir) = ckpt.parent() {
        fs::create_dir_all(dir)?;
    }
    let model = train_plan(plan)?;
    model.save(&ckpt)?;
    fs::write(side, plan_text)?;
    Ok(true)
}

fn write_dat(path: &Path, title: &str, pts: impl Iterator<Item = (f64, f64)>) -> Result<(), HarnessError> {
    let mut f = fs::File::create(path)?;
    writeln!(f, "# {title}")?;
    writeln!(f, "# ebn0_db ber")?;
    for (x, y) in pts {
        writeln!(f, "{x} {y:e}")?;
    }
    Ok(())
}

/// Trains missing models, runs every experiment and writes the manifest,
/// one CSV and one `.dat` per curve, theory data for uncoded AWGN and a
/// gnuplot script into `out_dir`.
pub fn execute(manifest: &Manifest, out_dir: &Path, opts: &ExecuteOptions) -> Result<ReproduceSummary, HarnessError> {
    fs::create_dir_all(out_dir)?;
    fs::write(out_dir.join(MANIFEST_FILE), manifest.to_toml()?)?;
    let mut summary = ReproduceSummary::default();
    for plan in &manifest.models {
        if opts.verbose {
            eprintln!("model {}: {} samples per point", plan.name, plan.dataset.samples_per_ebn0);
        }
        if ensure_model(plan, out_dir)? {
            summary.trained.push(plan.name.clone());
        } else {
            summary.reused.push(plan.name.clone());
        }
    }
    let mut plot = String::from(
        "set logscale y\nset format y \"10^{%L}\"\nset xlabel \"Eb/N0 (dB)\"\nset ylabel \"BER\"\nset grid\nset key bottom left\nplot",
    );
    let mut first = true;
    for exp in &manifest.experiments {
        if opts.verbose {
            eprintln!("sweep {}: {} points", exp.name, exp.ebn0_db.len());
        }
        let records = run_sweep(&exp.with_base_dir(out_dir))?;
        for d in &exp.demodulators {
            let curve: Vec<BerRecord> = records.iter().filter(|r| r.demodulator == *d).cloned().collect();
            let stem = format!("{}_{d}", exp.name);
            let path = out_dir.join(format!("{stem}.csv"));
            write_records(&path, &curve)?;
            summary.csv_files.push(path);
            write_dat(&out_dir.join(format!("{stem}.dat")), &stem, curve.iter().map(|r| (r.ebn0_db, r.ber)))?;
            plot += &format!("{} \"{stem}.dat\" with linespoints title \"{} {d}\"", if first { "" } else { "," }, exp.modulation.label());
            first = false;
        }
        if exp.coding == Coding::None && exp.scenario == Scenario::Awgn {
            let stem = format!("{}_theory", exp.name);
            let lo = exp.ebn0_db.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = exp.ebn0_db.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let fine = grid(lo, hi, 0.25);
            write_dat(&out_dir.join(format!("{stem}.dat")), &stem, fine.iter().map(|&x| (x, theoretical_ber(exp.modulation, x))))?;
            plot += &format!(", \"{stem}.dat\" with lines dashtype 2 title \"{} theory\"", exp.modulation.label());
        }
        summary.records.push((exp.name.clone(), records));
    }
    fs::write(out_dir.join(format!("{}.gp", manifest.figure)), plot + "\n")?;
    Ok(summary)
}

/// `plan` followed by `execute`.
pub fn reproduce(figure: Figure, scale: Scale, seed: u64, out_dir: &Path, opts: &ExecuteOptions) -> Result<ReproduceSummary, HarnessError> {
    execute(&plan(figure, scale, seed)?, out_dir, opts)
}
