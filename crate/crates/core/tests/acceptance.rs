// Acceptance criteria, one test each. The figure tests train desk-scale
// models and run full sweeps; expect roughly twenty minutes on one core.

use std::collections::BTreeMap;
use std::path::Path;
use std::sync::OnceLock;

use demodnet::channel::{
    add_awgn, rayleigh_cdf, rayleigh_flat_fade, rng_from_seed, sample_aggn, sigma2_from_ebn0, FadingSpec, Scenario,
    SimRng,
};
use demodnet::demodnet::{
    generate_dataset, lpr_from_logits, train, DatasetSpec, DemodNet, Head, ModelConfig, TrainSchedule,
};
use demodnet::fec::{conv_encode, theoretical_ber, viterbi_decode, TrellisSpec};
use demodnet::harness::{
    curve, ebn0_at_ber, execute, plan, run_sweep, theory_ebn0_at_ber, BerRecord, Coding, Demodulator,
    ExecuteOptions, ExperimentConfig, Figure, Manifest, ReproduceSummary, Scale, MANIFEST_FILE,
};
use demodnet::llr::{llr_sequence, LlrMode};
use demodnet::modem::{build_constellation, modulate, Modulation};
use demodnet::nn::{
    bce_with_logits, mse_loss, BatchNorm1d, Conv1d, Deconv1d, Layer, Mode, Relu, Sigmoid, Tensor3,
};
use num_complex::Complex64;
use rand::Rng;
use tempfile::TempDir;

const SEED: u64 = 1;

fn run_manifest(manifest: &Manifest) -> (TempDir, ReproduceSummary) {
    let dir = tempfile::tempdir().unwrap();
    let summary = execute(manifest, dir.path(), &ExecuteOptions::default()).unwrap();
    (dir, summary)
}

fn run_figure(figure: Figure) -> (TempDir, ReproduceSummary) {
    run_manifest(&plan(figure, Scale::Desk, SEED).unwrap())
}

/// Records of one demodulator in one experiment, sorted by Eb/N0.
fn series(summary: &ReproduceSummary, experiment: &str, demod: Demodulator) -> Vec<BerRecord> {
    let (_, records) = summary
        .records
        .iter()
        .find(|(name, _)| name == experiment)
        .unwrap_or_else(|| panic!("no experiment {experiment}"));
    let mut out: Vec<BerRecord> = records.iter().filter(|r| r.demodulator == demod).cloned().collect();
    out.sort_by(|a, b| a.ebn0_db.total_cmp(&b.ebn0_db));
    assert!(!out.is_empty(), "{experiment} has no {demod} records");
    out
}

fn print_series(label: &str, rows: &[&[BerRecord]]) {
    eprintln!("{label}");
    for i in 0..rows[0].len() {
        let cells: Vec<String> = rows
            .iter()
            .map(|s| format!("{} {:.3e} ({} err)", s[i].demodulator, s[i].ber, s[i].bit_errors))
            .collect();
        eprintln!("  {:>5.1} dB  {}", rows[0][i].ebn0_db, cells.join("  "));
    }
}

/// Start indices of runs of `len` consecutive interior grid points where
/// `ok(i)` holds.
fn interior_runs(n: usize, len: usize, ok: impl Fn(usize) -> bool) -> Vec<usize> {
    if n < len + 2 {
        return Vec::new();
    }
    (1..=n - 1 - len).filter(|&s| (s..s + len).all(&ok)).collect()
}

// ---------------------------------------------------------------- 1

#[test]
fn c1_min_distance_matches_uncoded_theory() {
    let mut total_bits = 0;
    for (m, grid) in [(Modulation::Bpsk, vec![2.0, 4.0, 6.0]), (Modulation::Qam16, vec![6.0, 8.0, 10.0])] {
        let mut cfg = ExperimentConfig::new(format!("theory-{m}"), m, Scenario::Awgn, grid);
        cfg.demodulators = vec![Demodulator::MinDistance];
        cfg.target_errors = 2_000;
        cfg.bits_per_point = 1_000_000;
        cfg.max_bits_per_point = 4_000_000;
        cfg.seed = 101;
        for r in run_sweep(&cfg).unwrap() {
            let theory = theoretical_ber(m, r.ebn0_db);
            let rel = (r.ber - theory).abs() / theory;
            eprintln!("{m} {:.0} dB: {:.4e} vs {:.4e} ({} errors, rel {rel:.3})", r.ebn0_db, r.ber, theory, r.bit_errors);
            assert!(r.bit_errors >= 500, "{m} {} dB: only {} errors", r.ebn0_db, r.bit_errors);
            assert!(rel <= 0.10, "{m} {} dB: relative deviation {rel}", r.ebn0_db);
            total_bits += r.bits_counted;
        }
    }
    eprintln!("{total_bits} bits simulated");
}

// ---------------------------------------------------------------- 2 and 10

fn fig2_first_run() -> &'static (TempDir, ReproduceSummary) {
    static RUN: OnceLock<(TempDir, ReproduceSummary)> = OnceLock::new();
    RUN.get_or_init(|| run_figure(Figure::Fig2))
}

#[test]
fn c2_demodnet_hard_decisions_track_theory() {
    let (_, summary) = fig2_first_run();
    for m in [Modulation::Bpsk, Modulation::Qam16] {
        let exp = format!("fig2-{m}");
        let net = series(summary, &exp, Demodulator::DemodnetLpr);
        let md = series(summary, &exp, Demodulator::MinDistance);
        print_series(&exp, &[&md, &net]);
        let measured = ebn0_at_ber(&curve(&net), 1e-2).expect("DemodNet curve never crosses 1e-2");
        let theory = theory_ebn0_at_ber(m, 1e-2);
        eprintln!("{m}: DemodNet crosses 1e-2 at {measured:.3} dB, theory {theory:.3} dB");
        assert!((measured - theory).abs() <= 0.5, "{m}: offset {:.3} dB", measured - theory);
    }
}

#[test]
fn c10_reproduce_is_byte_identical() {
    let (first_dir, first) = fig2_first_run();
    let manifest = Manifest::load(first_dir.path().join(MANIFEST_FILE)).unwrap();
    let (second_dir, second) = run_manifest(&manifest);
    assert!(second.reused.is_empty(), "second run must retrain from scratch");

    let names = |s: &ReproduceSummary, root: &Path| -> Vec<String> {
        let mut v: Vec<String> = s
            .csv_files
            .iter()
            .map(|p| p.strip_prefix(root).unwrap_or(p).display().to_string())
            .collect();
        v.sort();
        v
    };
    let a = names(first, first_dir.path());
    let b = names(&second, second_dir.path());
    assert_eq!(a, b);
    assert!(!a.is_empty());
    for name in &a {
        let x = std::fs::read(first_dir.path().join(name)).unwrap();
        let y = std::fs::read(second_dir.path().join(name)).unwrap();
        assert!(x == y, "{name} differs between runs");
    }
}

// ---------------------------------------------------------------- 3

#[test]
fn c3_lpr_viterbi_close_to_exact_llr() {
    let (_dir, summary) = run_figure(Figure::Fig3);
    for (m, tol) in [(Modulation::Bpsk, 0.5), (Modulation::Qam16, 0.5), (Modulation::Qam64, 1.0)] {
        let exp = format!("fig3-{m}");
        let exact = series(&summary, &exp, Demodulator::ExactLlr);
        let net = series(&summary, &exp, Demodulator::DemodnetLpr);
        print_series(&exp, &[&exact, &net]);
        let xe = ebn0_at_ber(&curve(&exact), 1e-3).expect("ExactLLR never crosses 1e-3");
        let xn = ebn0_at_ber(&curve(&net), 1e-3).expect("DemodNet never crosses 1e-3");
        eprintln!("{m}: 1e-3 at {xe:.3} dB (ExactLLR) vs {xn:.3} dB (DemodNet)");
        assert!((xn - xe).abs() <= tol, "{m}: gap {:.3} dB exceeds {tol}", xn - xe);
    }
}

// ---------------------------------------------------------------- 4

#[test]
fn c4_demodnet_beats_exact_llr_under_frequency_offset() {
    let (_dir, summary) = run_figure(Figure::Fig4);
    let exact = series(&summary, "fig4-qam16", Demodulator::ExactLlr);
    let net = series(&summary, "fig4-qam16", Demodulator::DemodnetLpr);
    print_series("fig4-qam16", &[&exact, &net]);
    let runs = interior_runs(exact.len(), 3, |i| {
        exact[i].bit_errors >= 500 && net[i].bit_errors >= 500 && net[i].ber < exact[i].ber
    });
    assert!(!runs.is_empty(), "no 3 consecutive interior points with DemodNet below ExactLLR");
}

// ---------------------------------------------------------------- 5

#[test]
fn c5_aggn_ordering() {
    let (_dir, summary) = run_figure(Figure::Fig5a);
    let exact = series(&summary, "fig5a-qam16", Demodulator::ExactLlr);
    let net = series(&summary, "fig5a-qam16", Demodulator::DemodnetLpr);
    let llrnet = series(&summary, "fig5a-qam16", Demodulator::Llrnet);
    print_series("fig5a-qam16", &[&exact, &net, &llrnet]);
    let runs = interior_runs(exact.len(), 3, |i| {
        exact[i].bit_errors >= 500
            && net[i].bit_errors >= 500
            && net[i].ber < exact[i].ber
            && llrnet[i].ber >= net[i].ber
    });
    assert!(
        !runs.is_empty(),
        "no 3 consecutive interior points with DemodNet below ExactLLR and LLRnet not below DemodNet"
    );
}

// ---------------------------------------------------------------- 6

#[test]
fn c6_demodnet_beats_exact_llr_in_rayleigh_fading() {
    let mut manifest = plan(Figure::Fig6, Scale::Desk, SEED).unwrap();
    manifest.experiments.retain(|e| e.modulation == Modulation::Qam16);
    manifest.models.retain(|m| m.dataset.modulation == Modulation::Qam16);
    let (_dir, summary) = run_manifest(&manifest);
    let exact = series(&summary, "fig6-qam16", Demodulator::ExactLlr);
    let net = series(&summary, "fig6-qam16", Demodulator::DemodnetLpr);
    print_series("fig6-qam16", &[&exact, &net]);
    let wins = (0..exact.len())
        .filter(|&i| exact[i].bit_errors >= 200 && net[i].bit_errors >= 200 && net[i].ber < exact[i].ber)
        .count();
    assert!(wins >= 2, "DemodNet below ExactLLR at only {wins} points with >= 200 errors");
}

// ---------------------------------------------------------------- 7

const TRIALS: usize = 20;
const H: f64 = 1e-5;
const REL_TOL: f64 = 1e-4;

fn rand_tensor(rng: &mut SimRng, shape: [usize; 3], away_from_zero: bool) -> Tensor3<f64> {
    Tensor3::from_fn(shape, |_, _, _| {
        let v: f64 = rng.random_range(-1.0..1.0);
        if away_from_zero {
            v.signum() * (v.abs() + 0.05)
        } else {
            v
        }
    })
}

fn assert_close(analytic: f64, numeric: f64, what: &str) {
    let scale = analytic.abs().max(numeric.abs());
    if scale < 1e-8 {
        assert!((analytic - numeric).abs() < 1e-9, "{what}: {analytic} vs {numeric}");
        return;
    }
    let rel = (analytic - numeric).abs() / scale;
    assert!(rel <= REL_TOL, "{what}: analytic {analytic} numeric {numeric} rel {rel:e}");
}

/// Checks input and parameter gradients of `layer` against central
/// differences of the scalar `<layer(x), w>` for random `w`.
fn gradcheck(layer: &mut dyn Layer<f64>, x: &Tensor3<f64>, rng: &mut SimRng, name: &str) {
    let y = layer.forward(x, Mode::Train).unwrap();
    let w = rand_tensor(rng, y.shape(), false);
    let objective = |layer: &mut dyn Layer<f64>, x: &Tensor3<f64>| layer.forward(x, Mode::Train).unwrap().dot(&w);

    layer.zero_grad();
    layer.forward(x, Mode::Train).unwrap();
    let gx = layer.backward(&w).unwrap();
    let param_grads: Vec<Vec<f64>> = layer.params().iter().map(|p| p.grad.to_vec()).collect();

    for i in 0..x.data().len() {
        let mut xp = x.clone();
        xp.data_mut()[i] += H;
        let mut xm = x.clone();
        xm.data_mut()[i] -= H;
        let numeric = (objective(layer, &xp) - objective(layer, &xm)) / (2.0 * H);
        assert_close(gx.data()[i], numeric, &format!("{name} input[{i}]"));
    }
    for (p, grads) in param_grads.iter().enumerate() {
        for (i, &g) in grads.iter().enumerate() {
            layer.params()[p].param[i] += H;
            let plus = objective(layer, x);
            layer.params()[p].param[i] -= 2.0 * H;
            let minus = objective(layer, x);
            layer.params()[p].param[i] += H;
            assert_close(g, (plus - minus) / (2.0 * H), &format!("{name} param{p}[{i}]"));
        }
    }
}

#[test]
fn c7_layer_gradients_match_finite_differences() {
    let mut rng = rng_from_seed(77);
    for trial in 0..TRIALS {
        let batch = rng.random_range(1..4);
        let cin = rng.random_range(1..4);
        let cout = rng.random_range(1..4);
        let len = rng.random_range(3..10);
        let kernel = rng.random_range(1..6);

        let w = (0..cout * cin * kernel).map(|_| rng.random_range(-0.5..0.5)).collect();
        let b = (0..cout).map(|_| rng.random_range(-0.5..0.5)).collect();
        let mut conv = Conv1d::from_params(cin, cout, kernel, w, b).unwrap();
        let x = rand_tensor(&mut rng, [batch, cin, len], false);
        gradcheck(&mut conv, &x, &mut rng, &format!("conv trial {trial}"));

        let stride = rng.random_range(1..4);
        let dk = rng.random_range(stride..stride + 3);
        let pad = rng.random_range(0..(dk / 2).max(1));
        let w = (0..cout * cin * dk).map(|_| rng.random_range(-0.5..0.5)).collect();
        let b = (0..cout).map(|_| rng.random_range(-0.5..0.5)).collect();
        let mut deconv = Deconv1d::from_params(cin, cout, dk, stride, pad, w, b).unwrap();
        gradcheck(&mut deconv, &x, &mut rng, &format!("deconv trial {trial}"));

        // batch norm needs more than one value per channel
        let mut bn = BatchNorm1d::<f64>::new(cin);
        for v in bn.gamma.iter_mut().chain(bn.beta.iter_mut()) {
            *v = rng.random_range(0.5..1.5);
        }
        let xb = rand_tensor(&mut rng, [batch + 1, cin, len], false);
        gradcheck(&mut bn, &xb, &mut rng, &format!("batchnorm trial {trial}"));

        let xr = rand_tensor(&mut rng, [batch, cin, len], true);
        gradcheck(&mut Relu::<f64>::new(), &xr, &mut rng, &format!("relu trial {trial}"));
        gradcheck(&mut Sigmoid::<f64>::new(), &x, &mut rng, &format!("sigmoid trial {trial}"));

        // losses
        let z = rand_tensor(&mut rng, [batch, 1, len], false).map(|v| 3.0 * v);
        let labels: Vec<u8> = (0..batch * len).map(|_| rng.random_range(0..2u8)).collect();
        let (_, g) = bce_with_logits(&z, &labels).unwrap();
        let target: Vec<f64> = (0..batch * len).map(|_| rng.random_range(-2.0..2.0)).collect();
        let (_, gm) = mse_loss(&z, &target).unwrap();
        for i in 0..z.data().len() {
            let (mut zp, mut zm) = (z.clone(), z.clone());
            zp.data_mut()[i] += H;
            zm.data_mut()[i] -= H;
            let nb = (bce_with_logits(&zp, &labels).unwrap().0 - bce_with_logits(&zm, &labels).unwrap().0) / (2.0 * H);
            assert_close(g.data()[i], nb, &format!("bce trial {trial} [{i}]"));
            let nm = (mse_loss(&zp, &target).unwrap().0 - mse_loss(&zm, &target).unwrap().0) / (2.0 * H);
            assert_close(gm.data()[i], nm, &format!("mse trial {trial} [{i}]"));
        }
    }
}

#[test]
fn c7_lpr_is_negated_logit() {
    let mut rng = rng_from_seed(78);
    let mut logits: Vec<f32> = (0..10_000).map(|_| rng.random_range(-60.0..60.0)).collect();
    logits.extend([0.0, -0.0, f32::MIN_POSITIVE, f32::MAX, f32::MIN, 1e-30, -1e-30]);
    for (l, z) in lpr_from_logits(&logits).zip(&logits) {
        assert_eq!(l, -(*z as f64));
    }

    // and through a real model
    let spec = DatasetSpec { samples_per_ebn0: 64, ..DatasetSpec::desk(Modulation::Qpsk, Scenario::Awgn, vec![4.0], 5) };
    let mut model = DemodNet::new(Modulation::Qpsk, ModelConfig { hidden_channels: 4, ..ModelConfig::desk() }, Head::Logit, 3).unwrap();
    let schedule = TrainSchedule { max_epochs: 1, batch_size: 16, ..TrainSchedule::default() };
    train(&mut model, &generate_dataset(&spec).unwrap(), &schedule).unwrap();
    let rx: Vec<Complex64> = (0..100).map(|_| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))).collect();
    let pred = model.predict(&rx).unwrap();
    let soft = model.soft_output(&rx, 100).unwrap();
    for (s, z) in soft.iter().zip(&pred.logits) {
        assert_eq!(*s, -(*z as f64));
    }
}

// ---------------------------------------------------------------- 8

#[test]
fn c8_aggn_variance_matches_closed_form() {
    use statrs::function::gamma::gamma;
    let mut rng = rng_from_seed(88);
    for rho in [0.7, 1.0, 2.0] {
        for g in [0.5, 1.0, 1.7] {
            let n = 1_000_000;
            let w = sample_aggn(n, 0.0, g, rho, &mut rng).unwrap();
            let mean = w.iter().sum::<f64>() / n as f64;
            let var = w.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
            let expected = g * g * gamma(3.0 / rho) / gamma(1.0 / rho);
            let rel = (var - expected).abs() / expected;
            eprintln!("rho {rho} gamma {g}: variance {var:.5} expected {expected:.5} rel {rel:.4}");
            assert!(rel <= 0.02, "rho {rho} gamma {g}: rel {rel}");
        }
    }
}

#[test]
fn c8_rayleigh_power_and_envelope() {
    let spec = FadingSpec::new(30.0, 1e6).unwrap();
    let mut rng = rng_from_seed(89);
    let one = [Complex64::new(1.0, 0.0)];
    let n = 100_000;
    let mut env: Vec<f64> = (0..n)
        .map(|_| rayleigh_flat_fade(&one, &spec, &mut rng).unwrap().1[0].norm())
        .collect();
    let power = env.iter().map(|a| a * a).sum::<f64>() / n as f64;
    eprintln!("E|h|^2 = {power:.5}");
    assert!((power - 1.0).abs() <= 0.02, "E|h|^2 = {power}");

    // one-sample Kolmogorov-Smirnov against Rayleigh with E|h|^2 = 1
    env.sort_by(|a, b| a.total_cmp(b));
    let sigma = std::f64::consts::FRAC_1_SQRT_2;
    let d = env
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = rayleigh_cdf(x, sigma);
            (f - i as f64 / n as f64).max((i + 1) as f64 / n as f64 - f)
        })
        .fold(0.0, f64::max);
    let critical = 1.6276 / (n as f64).sqrt();
    eprintln!("KS D = {d:.5}, critical {critical:.5}");
    assert!(d < critical, "KS statistic {d} exceeds {critical}");

    // gains along one long fade keep unit power too
    let long = vec![Complex64::new(1.0, 0.0); 1000];
    let mut acc = 0.0;
    for _ in 0..2_000 {
        let (_, g) = rayleigh_flat_fade(&long, &spec, &mut rng).unwrap();
        acc += g.iter().map(|h| h.norm_sqr()).sum::<f64>() / g.len() as f64;
    }
    let p = acc / 2_000.0;
    eprintln!("time-averaged E|h|^2 = {p:.4}");
    assert!((p - 1.0).abs() <= 0.05, "time-averaged power {p}");
}

// ---------------------------------------------------------------- 9

#[test]
fn c9_encode_decode_identity() {
    let code = TrellisSpec::K7_171_133;
    let mut rng = rng_from_seed(91);
    for len in [1, 2, 7, 31, 32, 33, 100, 1000, 10_000] {
        for _ in 0..5 {
            let info: Vec<u8> = (0..len).map(|_| rng.random_range(0..2u8)).collect();
            let coded = conv_encode(&info, &code);
            assert_eq!(coded.len(), code.coded_len(len));
            let soft: Vec<f64> = coded.iter().map(|&b| if b == 0 { 1.0 } else { -1.0 }).collect();
            for tb in [1, 5, 32, 100] {
                assert_eq!(viterbi_decode(&soft, &code, tb).unwrap(), info, "len {len} traceback {tb}");
            }
        }
    }
}

#[test]
fn c9_soft_decoding_beats_hard() {
    let mut cfg = ExperimentConfig::new("soft-vs-hard", Modulation::Bpsk, Scenario::Awgn, vec![0.0, 1.0, 2.0, 3.0, 4.0]);
    cfg.coding = Coding::Conv;
    cfg.demodulators = vec![Demodulator::MinDistance, Demodulator::ExactLlr];
    cfg.bits_per_point = 200_000;
    cfg.max_bits_per_point = 2_000_000;
    cfg.seed = 92;
    let records = run_sweep(&cfg).unwrap();
    let mut by_point: BTreeMap<i64, Vec<&BerRecord>> = BTreeMap::new();
    for r in &records {
        by_point.entry((r.ebn0_db * 10.0) as i64).or_default().push(r);
    }
    let mut compared = 0;
    for rs in by_point.values() {
        let hard = rs.iter().find(|r| r.demodulator == Demodulator::MinDistance).unwrap();
        let soft = rs.iter().find(|r| r.demodulator == Demodulator::ExactLlr).unwrap();
        eprintln!("{:.0} dB: hard {:.3e} soft {:.3e}", hard.ebn0_db, hard.ber, soft.ber);
        if hard.bit_errors >= 500 && soft.bit_errors >= 500 {
            assert!(soft.ber <= hard.ber, "{} dB: soft {} > hard {}", hard.ebn0_db, soft.ber, hard.ber);
            compared += 1;
        }
    }
    assert!(compared >= 2, "only {compared} points had enough errors");
}

#[test]
fn c9_decoder_scale_invariant() {
    let code = TrellisSpec::K7_171_133;
    let c = build_constellation(Modulation::Bpsk);
    let mut rng = rng_from_seed(93);
    let info: Vec<u8> = (0..20_000).map(|_| rng.random_range(0..2u8)).collect();
    let coded = conv_encode(&info, &code);
    let sigma2 = sigma2_from_ebn0(1.0, 1, TrellisSpec::RATE).unwrap();
    let rx = add_awgn(&modulate(&coded, &c).unwrap(), sigma2, &mut rng).unwrap();
    let soft = llr_sequence(&rx, &c, sigma2, LlrMode::Exact).unwrap();
    let reference = viterbi_decode(&soft, &code, 32).unwrap();
    let residual = reference.iter().zip(&info).filter(|(a, b)| a != b).count();
    assert!(residual > 0, "noise too weak to exercise the decoder");
    for scale in [1e-6, 0.01, 0.37, 0.5, 2.0, 3.3, 1e3, 1e6] {
        let scaled: Vec<f64> = soft.iter().map(|v| v * scale).collect();
        assert!(viterbi_decode(&scaled, &code, 32).unwrap() == reference, "scale {scale} changed the decisions");
    }
}
