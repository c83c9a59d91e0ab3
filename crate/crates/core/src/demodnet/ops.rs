use serde::Serialize;

use super::DemodNet;
use crate::modem::Modulation;
use crate::nn::{Layer, OpCounts};

/// Published per-symbol ExactLLR counts for 64QAM: multiplications,
/// additions, exponentials/logarithms.
pub const REFERENCE_EXACT_LLR_64QAM: [u64; 3] = [198, 564, 70];

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LayerOps {
    pub name: String,
    pub ops: OpCounts,
}

/// Exact inference operation counts for a given input length.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComplexityReport {
    pub symbols: usize,
    pub layers: Vec<LayerOps>,
    pub total: OpCounts,
}

impl ComplexityReport {
    /// Totals divided by the input symbol count: [mults, adds, comparisons, exp/log].
    pub fn per_symbol(&self) -> [f64; 4] {
        self.total.per(self.symbols)
    }
}

impl DemodNet {
    /// Counts for an input of `symbols` symbols. The sigmoid is not needed for
    /// the LPR path and is not counted.
    pub fn count_ops(&self, symbols: usize) -> ComplexityReport {
        let c = self.config.hidden_channels;
        let len = symbols * self.bits_per_symbol();
        let mut layers = vec![
            LayerOps { name: "deconv".into(), ops: self.deconv.op_counts(2, symbols) },
            LayerOps { name: "bn0".into(), ops: self.bn0.op_counts(c, len) },
            LayerOps { name: "relu0".into(), ops: self.relu0.op_counts(c, len) },
        ];
        for (i, b) in self.blocks.iter().enumerate() {
            layers.push(LayerOps { name: format!("conv{}", i + 1), ops: b.conv.op_counts(c, len) });
            layers.push(LayerOps { name: format!("bn{}", i + 1), ops: b.bn.op_counts(c, len) });
            layers.push(LayerOps { name: format!("relu{}", i + 1), ops: b.relu.op_counts(c, len) });
        }
        layers.push(LayerOps { name: "final".into(), ops: self.final_conv.op_counts(c, len) });
        let total = layers.iter().map(|l| l.ops).sum();
        ComplexityReport { symbols, layers, total }
    }
}

/// Per-symbol counts of this crate's exact LLR routine for an M-point
/// constellation with k bits: M squared distances scaled by 1/σ², then for
/// each bit two stabilized log-sum-exps over M/2 points and a difference.
pub fn exact_llr_op_counts(modulation: Modulation) -> OpCounts {
    let k = modulation.bits_per_symbol() as u64;
    let m = 1u64 << k;
    let half = m / 2;
    OpCounts {
        // two squares and one 1/σ² scaling per point
        mults: 3 * m,
        // per point: two differences and a sum; per subset: max shift,
        // running sum, adding the max back; one difference per bit
        adds: 3 * m + k * (2 * (half + (half - 1) + 1) + 1),
        comparisons: k * 2 * (half - 1),
        // one exp per point and one log per subset
        exp_log: k * 2 * (half + 1),
    }
}
