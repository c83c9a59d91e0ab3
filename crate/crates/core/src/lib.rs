//! Soft demodulation toolkit: modems, channels, LLRs, a learned convolutional
//! demodulator, convolutional coding, LMS equalization and BER sweeps.

// `!(x > 0.0)` is used on purpose so NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod channel;
pub mod demodnet;
pub mod equalizer;
pub mod fec;
pub mod harness;
pub mod link;
pub mod llr;
pub mod modem;
pub mod nn;
