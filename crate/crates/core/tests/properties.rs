// Property tests over random inputs.

use demodnet::fec::{conv_encode, viterbi_decode, TrellisSpec};
use demodnet::harness::parse_grid;
use demodnet::llr::{exact_llr, maxlog_llr};
use demodnet::modem::{build_constellation, hard_demodulate_min_distance, modulate, Modulation};
use num_complex::Complex64;
use proptest::prelude::*;

fn modulation() -> impl Strategy<Value = Modulation> {
    prop::sample::select(Modulation::ALL.to_vec())
}

proptest! {
    #[test]
    fn noiseless_modulation_round_trips(m in modulation(), symbols in 1usize..200, seed in any::<u64>()) {
        let c = build_constellation(m);
        let k = m.bits_per_symbol();
        let bits: Vec<u8> = (0..symbols * k).map(|i| ((seed >> (i % 64)) & 1) as u8 ^ (i % 3 == 0) as u8).collect();
        let tx = modulate(&bits, &c).unwrap();
        prop_assert_eq!(hard_demodulate_min_distance(&tx, &c), bits);
    }

    #[test]
    fn llr_sign_matches_nearest_point(m in modulation(), re in -1.5f64..1.5, im in -1.5f64..1.5, s2 in 0.01f64..2.0) {
        let c = build_constellation(m);
        let r = Complex64::new(re, im);
        let nearest: Vec<u8> = c.label_bits(c.nearest_index(r)).collect();
        let maxlog = maxlog_llr(r, &c, s2).unwrap();
        for (l, b) in maxlog.iter().zip(&nearest) {
            // max-log signs are exactly the nearest-point decisions (ties aside)
            if l.abs() > 1e-9 {
                prop_assert_eq!(*l < 0.0, *b == 1);
            }
        }
        let exact = exact_llr(r, &c, s2).unwrap();
        for (e, l) in exact.iter().zip(&maxlog) {
            prop_assert!(e.is_finite());
            // exact LLR never exceeds max-log in magnitude by more than ln(M/2)
            prop_assert!((e - l).abs() <= ((c.points().len() / 2) as f64).ln() + 1e-9);
        }
    }

    #[test]
    fn viterbi_inverts_encoder(info in prop::collection::vec(0u8..2, 1..400), tb in 1usize..64) {
        let code = TrellisSpec::K7_171_133;
        let soft: Vec<f64> = conv_encode(&info, &code).iter().map(|&b| 1.0 - 2.0 * b as f64).collect();
        prop_assert_eq!(viterbi_decode(&soft, &code, tb).unwrap(), info);
    }

    #[test]
    fn grid_endpoints_included(lo in -10i32..20, n in 0usize..30, step in prop::sample::select(vec![0.25, 0.5, 1.0, 2.0])) {
        let lo = lo as f64;
        let hi = lo + step * n as f64;
        let g = parse_grid(&format!("{lo}:{hi}:{step}")).unwrap();
        prop_assert_eq!(g.len(), n + 1);
        prop_assert!((g[n] - hi).abs() < 1e-9);
    }
}
