use crate::fec::theoretical_ber;
use crate::modem::Modulation;

use super::BerRecord;

/// Eb/N0 at which a BER curve first falls through `target`, interpolating
/// log10(BER) linearly between neighbouring grid points. `points` must be
/// sorted by Eb/N0. Returns `None` when the curve never brackets the target
/// or the bracketing point has no errors.
pub fn ebn0_at_ber(points: &[(f64, f64)], target: f64) -> Option<f64> {
    if points.first()?.1 < target {
        return None;
    }
    points.windows(2).find_map(|w| {
        let ((x0, y0), (x1, y1)) = (w[0], w[1]);
        if y0 >= target && y1 < target {
            if y1 <= 0.0 {
                return None;
            }
            let (l0, l1, lt) = (y0.log10(), y1.log10(), target.log10());
            Some(x0 + (x1 - x0) * (l0 - lt) / (l0 - l1))
        } else {
            None
        }
    })
}

/// Eb/N0 where the uncoded AWGN theory curve equals `target`, by bisection
/// on [-10, 40] dB.
pub fn theory_ebn0_at_ber(modulation: Modulation, target: f64) -> f64 {
    let (mut lo, mut hi) = (-10.0, 40.0);
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if theoretical_ber(modulation, mid) > target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Parses an Eb/N0 grid written either as `lo:hi:step` (inclusive) or as
/// a comma-separated list.
pub fn parse_grid(s: &str) -> Result<Vec<f64>, String> {
    let num = |v: &str| v.trim().parse::<f64>().map_err(|_| format!("bad number `{v}` in grid `{s}`"));
    let parts: Vec<&str> = s.split(':').collect();
    let grid = match parts[..] {
        [lo, hi, step] => {
            let (lo, hi, step) = (num(lo)?, num(hi)?, num(step)?);
            if !(step > 0.0) || hi < lo {
                return Err(format!("grid `{s}` needs lo <= hi and a positive step"));
            }
            let n = ((hi - lo) / step + 1e-9).floor() as usize;
            (0..=n).map(|i| lo + step * i as f64).collect()
        }
        [list] => list.split(',').map(num).collect::<Result<Vec<_>, _>>()?,
        _ => return Err(format!("grid `{s}` is neither lo:hi:step nor a list")),
    };
    if grid.iter().any(|v: &f64| !v.is_finite()) {
        return Err(format!("grid `{s}` has non-finite values"));
    }
    Ok(grid)
}

/// (Eb/N0, BER) pairs of records sorted by Eb/N0.
pub fn curve(records: &[BerRecord]) -> Vec<(f64, f64)> {
    let mut pts: Vec<(f64, f64)> = records.iter().map(|r| (r.ebn0_db, r.ber)).collect();
    pts.sort_by(|a, b| a.0.total_cmp(&b.0));
    pts
}
