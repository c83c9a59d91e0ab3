//! Binary checkpoint layout (all integers and floats little-endian):
//!
//! ```text
//! magic "DMDNETCK" | version u32 | modulation name (u32 len + utf8) | k u32
//! | C u32 | hidden_kernel u32 | final_kernel u32 | hidden_blocks u32
//! | head u8 (0 logit, 1 linear) | output_scale f32 | layer count u32
//! | layer records
//! ```
//!
//! Conv and deconv records: kind u8 (0 deconv, 1 conv), out, in, kernel,
//! stride, padding as u32, then weight and bias as f32 arrays.
//! BN records: kind u8 = 2, channels u32, momentum f64, eps f64,
//! batches_tracked u64, then gamma, beta, running mean, running variance.

use std::path::Path;

use super::{Block, DemodNet, DemodNetError, Head, ModelConfig};
use crate::modem::Modulation;
use crate::nn::{BatchNorm1d, Conv1d, Deconv1d, Relu};

pub const CHECKPOINT_MAGIC: &[u8; 8] = b"DMDNETCK";
pub const CHECKPOINT_VERSION: u32 = 1;

const KIND_DECONV: u8 = 0;
const KIND_CONV: u8 = 1;
const KIND_BN: u8 = 2;

struct Writer(Vec<u8>);

impl Writer {
    fn u8(&mut self, v: u8) {
        self.0.push(v);
    }
    fn u32(&mut self, v: usize) {
        self.0.extend_from_slice(&(v as u32).to_le_bytes());
    }
    fn u64(&mut self, v: u64) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn f64(&mut self, v: f64) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn f32s(&mut self, v: &[f32]) {
        for x in v {
            self.0.extend_from_slice(&x.to_le_bytes());
        }
    }
    #[allow(clippy::too_many_arguments)]
    fn conv(&mut self, kind: u8, out: usize, inp: usize, kernel: usize, stride: usize, pad: usize, w: &[f32], b: &[f32]) {
        self.u8(kind);
        for d in [out, inp, kernel, stride, pad] {
            self.u32(d);
        }
        self.f32s(w);
        self.f32s(b);
    }
    fn bn(&mut self, bn: &BatchNorm1d<f32>) {
        self.u8(KIND_BN);
        self.u32(bn.channels);
        self.f64(bn.momentum);
        self.f64(bn.eps);
        self.u64(bn.batches_tracked);
        for v in [&bn.gamma, &bn.beta, &bn.running_mean, &bn.running_var] {
            self.f32s(v);
        }
    }
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

fn bad(msg: impl Into<String>) -> DemodNetError {
    DemodNetError::Checkpoint(msg.into())
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], DemodNetError> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.buf.len()).ok_or_else(|| bad("truncated file"))?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }
    fn u8(&mut self) -> Result<u8, DemodNetError> {
        Ok(self.take(1)?[0])
    }
    fn u32(&mut self) -> Result<usize, DemodNetError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")) as usize)
    }
    fn u64(&mut self) -> Result<u64, DemodNetError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }
    fn f32(&mut self) -> Result<f32, DemodNetError> {
        Ok(f32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }
    fn f64(&mut self) -> Result<f64, DemodNetError> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }
    fn f32s(&mut self, n: usize) -> Result<Vec<f32>, DemodNetError> {
        let bytes = self.take(n.checked_mul(4).ok_or_else(|| bad("array too large"))?)?;
        Ok(bytes.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes"))).collect())
    }
    fn expect_kind(&mut self, want: u8) -> Result<(), DemodNetError> {
        let got = self.u8()?;
        if got != want {
            return Err(bad(format!("expected layer kind {want}, found {got}")));
        }
        Ok(())
    }
    fn conv_dims(&mut self, kind: u8, want: [usize; 5]) -> Result<(), DemodNetError> {
        self.expect_kind(kind)?;
        let mut got = [0; 5];
        for g in &mut got {
            *g = self.u32()?;
        }
        if got != want {
            return Err(bad(format!("layer dims {got:?} disagree with header, expected {want:?}")));
        }
        Ok(())
    }
    fn bn(&mut self, channels: usize) -> Result<BatchNorm1d<f32>, DemodNetError> {
        self.expect_kind(KIND_BN)?;
        let c = self.u32()?;
        if c != channels {
            return Err(bad(format!("batch norm has {c} channels, expected {channels}")));
        }
        let mut bn = BatchNorm1d::new(c);
        bn.momentum = self.f64()?;
        bn.eps = self.f64()?;
        bn.batches_tracked = self.u64()?;
        bn.gamma = self.f32s(c)?;
        bn.beta = self.f32s(c)?;
        bn.running_mean = self.f32s(c)?;
        bn.running_var = self.f32s(c)?;
        if bn.running_var.iter().any(|v| !(*v >= 0.0)) {
            return Err(bad("negative running variance"));
        }
        Ok(bn)
    }
}

impl DemodNet {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = Writer(Vec::new());
        w.0.extend_from_slice(CHECKPOINT_MAGIC);
        w.u32(CHECKPOINT_VERSION as usize);
        let name = self.modulation.as_str().as_bytes();
        w.u32(name.len());
        w.0.extend_from_slice(name);
        let cfg = self.config;
        for v in [self.bits_per_symbol(), cfg.hidden_channels, cfg.hidden_kernel, cfg.final_kernel, cfg.hidden_blocks] {
            w.u32(v);
        }
        w.u8(match self.head {
            Head::Logit => 0,
            Head::Linear => 1,
        });
        w.f32s(&[self.output_scale]);
        w.u32(3 + 2 * self.blocks.len());
        let d = &self.deconv;
        w.conv(KIND_DECONV, d.out_ch, d.in_ch, d.kernel, d.stride, d.padding, &d.weight, &d.bias);
        w.bn(&self.bn0);
        for b in &self.blocks {
            let c = &b.conv;
            w.conv(KIND_CONV, c.out_ch, c.in_ch, c.kernel, 1, c.pad_left(), &c.weight, &c.bias);
            w.bn(&b.bn);
        }
        let f = &self.final_conv;
        w.conv(KIND_CONV, f.out_ch, f.in_ch, f.kernel, 1, f.pad_left(), &f.weight, &f.bias);
        w.0
    }

    pub fn from_bytes(buf: &[u8]) -> Result<Self, DemodNetError> {
        let mut r = Reader { buf, pos: 0 };
        if r.take(8)? != CHECKPOINT_MAGIC {
            return Err(bad("not a DemodNet checkpoint (bad magic)"));
        }
        let version = r.u32()?;
        if version != CHECKPOINT_VERSION as usize {
            return Err(bad(format!("unsupported version {version}")));
        }
        let name_len = r.u32()?;
        let name = std::str::from_utf8(r.take(name_len)?).map_err(|_| bad("modulation name is not utf-8"))?;
        let modulation: Modulation = name.parse()?;
        let k = r.u32()?;
        if k != modulation.bits_per_symbol() {
            return Err(bad(format!("k={k} does not match {name}")));
        }
        let config = ModelConfig {
            hidden_channels: r.u32()?,
            hidden_kernel: r.u32()?,
            final_kernel: r.u32()?,
            hidden_blocks: r.u32()?,
        };
        config.validate()?;
        let head = match r.u8()? {
            0 => Head::Logit,
            1 => Head::Linear,
            h => return Err(bad(format!("unknown head {h}"))),
        };
        let output_scale = r.f32()?;
        let layers = r.u32()?;
        if layers != 3 + 2 * config.hidden_blocks {
            return Err(bad(format!("{layers} layers disagree with {} hidden blocks", config.hidden_blocks)));
        }
        let c = config.hidden_channels;
        r.conv_dims(KIND_DECONV, [c, 2, k, k, 0])?;
        let deconv = Deconv1d::from_params(2, c, k, k, 0, r.f32s(c * 2 * k)?, r.f32s(c)?)?;
        let bn0 = r.bn(c)?;
        let mut blocks = Vec::with_capacity(config.hidden_blocks);
        for _ in 0..config.hidden_blocks {
            let kh = config.hidden_kernel;
            r.conv_dims(KIND_CONV, [c, c, kh, 1, (kh - 1) / 2])?;
            let conv = Conv1d::from_params(c, c, kh, r.f32s(c * c * kh)?, r.f32s(c)?)?;
            blocks.push(Block {
                conv,
                bn: r.bn(c)?,
                relu: Relu::new(),
            });
        }
        let kf = config.final_kernel;
        r.conv_dims(KIND_CONV, [1, c, kf, 1, (kf - 1) / 2])?;
        let final_conv = Conv1d::from_params(c, 1, kf, r.f32s(c * kf)?, r.f32s(1)?)?;
        if r.pos != buf.len() {
            return Err(bad(format!("{} trailing bytes", buf.len() - r.pos)));
        }
        Ok(Self {
            modulation,
            config,
            head,
            output_scale,
            deconv,
            bn0,
            relu0: Relu::new(),
            blocks,
            final_conv,
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), DemodNetError> {
        std::fs::write(path, self.to_bytes())?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, DemodNetError> {
        let path = path.as_ref();
        let bytes = std::fs::read(path).map_err(|e| bad(format!("cannot read {}: {e}", path.display())))?;
        Self::from_bytes(&bytes)
    }
}
