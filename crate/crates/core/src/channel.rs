//! Uniform quantization and a compact index/value payload for the link.
//!
//! Wire format of [`SparsePayload`], MSB first:
//!
//! ```text
//! header  16 bits  entry count (8) | index width (4) | magnitude width (4)
//! entry   index (1-based, index width) | sign (1) | |k| (magnitude width)
//! ```
//!
//! where each transmitted value is `k·Δ`. The byte stream is zero-padded to a
//! whole byte; `bits_used` counts only the meaningful bits. The vector length
//! is not transmitted, both ends know it.

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

pub const HEADER_BITS: usize = 16;
const MAX_ENTRIES: usize = u8::MAX as usize;
const MAX_WIDTH: u32 = 15;

/// Relative slack (in units of the step) under which `v/Δ` counts as an
/// exact half-point or an exact multiple. Absorbs the rounding in `v/Δ`,
/// e.g. `0.95 / 0.1 = 9.499999999999998`.
const GRID_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawQuantizer", into = "RawQuantizer")]
pub struct QuantizerConfig {
    step: f64,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawQuantizer {
    step: f64,
}

impl TryFrom<RawQuantizer> for QuantizerConfig {
    type Error = Error;
    fn try_from(raw: RawQuantizer) -> Result<Self> {
        Self::new(raw.step)
    }
}

impl From<QuantizerConfig> for RawQuantizer {
    fn from(q: QuantizerConfig) -> Self {
        RawQuantizer { step: q.step }
    }
}

impl QuantizerConfig {
    pub fn new(step: f64) -> Result<Self> {
        if !(step > 0.0 && step.is_finite()) {
            return Err(Error::Domain(format!(
                "quantizer step must be positive and finite, got {step}"
            )));
        }
        Ok(Self { step })
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    /// Level index `k` with `Q(x) = kΔ`, halves rounded away from zero.
    pub fn level(&self, x: f64) -> f64 {
        let r = x / self.step;
        let mag = r.abs();
        let floor = mag.floor();
        let k = if (mag - floor - 0.5).abs() <= GRID_SLACK * mag.max(1.0) {
            floor + 1.0
        } else {
            mag.round()
        };
        if k == 0.0 {
            0.0
        } else {
            k.copysign(r)
        }
    }
}

/// Entrywise `Δ·round(v/Δ)`, halves away from zero. Zeros stay `+0.0`.
pub fn quantize(v: &[f64], q: &QuantizerConfig) -> Vec<f64> {
    v.iter()
        .map(|&x| {
            let k = q.level(x);
            if k == 0.0 {
                0.0
            } else {
                k * q.step
            }
        })
        .collect()
}

/// Nonzero quantized entries as `(1-based index, k)` pairs.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SparsePayload {
    pub length: usize,
    pub entries: Vec<(usize, i64)>,
    pub index_width: u32,
    pub value_width: u32,
    pub bits_used: usize,
}

/// One signed level per slot, no indices. Same header layout with the
/// index-width field set to zero.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DensePayload {
    pub levels: Vec<i64>,
    pub value_width: u32,
    pub bits_used: usize,
}

/// Bits needed to write every integer in `0..=max`.
fn width_for(max: u64) -> u32 {
    u64::BITS - max.leading_zeros()
}

fn levels_of(v: &[f64], q: &QuantizerConfig) -> Result<Vec<i64>> {
    v.iter()
        .enumerate()
        .map(|(i, &x)| {
            if !x.is_finite() {
                return Err(Error::Encoding(format!("entry {i} is not finite")));
            }
            let k = q.level(x);
            if (x - k * q.step).abs() > GRID_SLACK * q.step * k.abs().max(1.0) {
                return Err(Error::Encoding(format!(
                    "entry {i} = {x} is not a multiple of the step {}",
                    q.step
                )));
            }
            if k.abs() >= (1u64 << MAX_WIDTH) as f64 {
                return Err(Error::Encoding(format!(
                    "entry {i} needs more than {MAX_WIDTH} magnitude bits"
                )));
            }
            Ok(k as i64)
        })
        .collect()
}

fn magnitude_width(levels: impl Iterator<Item = i64>) -> u32 {
    width_for(levels.map(|k| k.unsigned_abs()).max().unwrap_or(0))
}

/// Packs the nonzero entries of an already quantized vector.
pub fn encode_sparse(v: &[f64], q: &QuantizerConfig) -> Result<SparsePayload> {
    let levels = levels_of(v, q)?;
    let entries: Vec<(usize, i64)> = levels
        .iter()
        .enumerate()
        .filter(|(_, &k)| k != 0)
        .map(|(i, &k)| (i + 1, k))
        .collect();
    if entries.len() > MAX_ENTRIES {
        return Err(Error::Encoding(format!(
            "{} nonzero entries exceed the {MAX_ENTRIES}-entry header field",
            entries.len()
        )));
    }
    let index_width = width_for(v.len() as u64);
    if index_width > MAX_WIDTH {
        return Err(Error::Encoding(format!(
            "length {} needs a {index_width}-bit index",
            v.len()
        )));
    }
    let value_width = magnitude_width(entries.iter().map(|e| e.1));
    let bits_used = HEADER_BITS + entries.len() * (index_width as usize + 1 + value_width as usize);
    Ok(SparsePayload {
        length: v.len(),
        entries,
        index_width,
        value_width,
        bits_used,
    })
}

/// Inverse of [`encode_sparse`].
pub fn decode_sparse(p: &SparsePayload, q: &QuantizerConfig) -> Result<Vec<f64>> {
    let mut out = vec![0.0; p.length];
    let mut last = 0;
    for &(index, k) in &p.entries {
        if index <= last || index > p.length {
            return Err(Error::CorruptPayload(format!(
                "index {index} out of order or outside 1..={}",
                p.length
            )));
        }
        if k == 0 {
            return Err(Error::CorruptPayload(format!(
                "explicit zero at index {index}"
            )));
        }
        last = index;
        out[index - 1] = k as f64 * q.step;
    }
    Ok(out)
}

struct BitWriter {
    bytes: Vec<u8>,
    used: usize,
}

impl BitWriter {
    fn new() -> Self {
        Self {
            bytes: Vec::new(),
            used: 0,
        }
    }

    fn put(&mut self, value: u64, width: u32) {
        for shift in (0..width).rev() {
            if self.used.is_multiple_of(8) {
                self.bytes.push(0);
            }
            if (value >> shift) & 1 == 1 {
                *self.bytes.last_mut().expect("pushed above") |= 0x80 >> (self.used % 8);
            }
            self.used += 1;
        }
    }
}

struct BitReader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl BitReader<'_> {
    fn take(&mut self, width: u32) -> Result<u64> {
        let mut v = 0u64;
        for _ in 0..width {
            let byte = self
                .bytes
                .get(self.pos / 8)
                .ok_or_else(|| Error::CorruptPayload("byte stream truncated".into()))?;
            v = (v << 1) | u64::from((byte >> (7 - self.pos % 8)) & 1);
            self.pos += 1;
        }
        Ok(v)
    }
}

fn write_header(w: &mut BitWriter, count: usize, index_width: u32, value_width: u32) {
    w.put(count as u64, 8);
    w.put(u64::from(index_width), 4);
    w.put(u64::from(value_width), 4);
}

fn write_level(w: &mut BitWriter, k: i64, width: u32) {
    w.put(u64::from(k < 0), 1);
    w.put(k.unsigned_abs(), width);
}

fn read_level(r: &mut BitReader<'_>, width: u32) -> Result<i64> {
    let negative = r.take(1)? == 1;
    let mag = r.take(width)? as i64;
    if negative && mag == 0 {
        return Err(Error::CorruptPayload("negative zero level".into()));
    }
    Ok(if negative { -mag } else { mag })
}

fn check_padding(r: &BitReader<'_>) -> Result<()> {
    let expected = r.pos.div_ceil(8);
    if r.bytes.len() != expected {
        return Err(Error::CorruptPayload(format!(
            "{} bytes for {} bits of payload",
            r.bytes.len(),
            r.pos
        )));
    }
    if !r.pos.is_multiple_of(8) && r.bytes[expected - 1] & (0xff >> (r.pos % 8)) != 0 {
        return Err(Error::CorruptPayload("nonzero padding bits".into()));
    }
    Ok(())
}

impl SparsePayload {
    pub fn nonzeros(&self) -> usize {
        self.entries.len()
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = BitWriter::new();
        write_header(
            &mut w,
            self.entries.len(),
            self.index_width,
            self.value_width,
        );
        for &(index, k) in &self.entries {
            w.put(index as u64, self.index_width);
            write_level(&mut w, k, self.value_width);
        }
        debug_assert_eq!(w.used, self.bits_used);
        w.bytes
    }

    /// Parses a byte stream for a vector of known `length`.
    pub fn from_bytes(bytes: &[u8], length: usize) -> Result<Self> {
        let mut r = BitReader { bytes, pos: 0 };
        let count = r.take(8)? as usize;
        let index_width = r.take(4)? as u32;
        let value_width = r.take(4)? as u32;
        if index_width != width_for(length as u64) {
            return Err(Error::CorruptPayload(format!(
                "index width {index_width} does not match length {length}"
            )));
        }
        let mut entries = Vec::with_capacity(count);
        for _ in 0..count {
            let index = r.take(index_width)? as usize;
            entries.push((index, read_level(&mut r, value_width)?));
        }
        check_padding(&r)?;
        let payload = Self {
            length,
            entries,
            index_width,
            value_width,
            bits_used: r.pos,
        };
        payload.check()?;
        Ok(payload)
    }

    fn check(&self) -> Result<()> {
        let mut last = 0;
        for &(index, k) in &self.entries {
            if index <= last || index > self.length {
                return Err(Error::CorruptPayload(format!(
                    "index {index} out of order or outside 1..={}",
                    self.length
                )));
            }
            if k == 0 || width_for(k.unsigned_abs()) > self.value_width {
                return Err(Error::CorruptPayload(format!("level {k} at index {index}")));
            }
            last = index;
        }
        Ok(())
    }
}

pub fn encode_dense(v: &[f64], q: &QuantizerConfig) -> Result<DensePayload> {
    if v.len() > MAX_ENTRIES {
        return Err(Error::Encoding(format!(
            "{} slots exceed the header count field",
            v.len()
        )));
    }
    let levels = levels_of(v, q)?;
    let value_width = magnitude_width(levels.iter().copied());
    let bits_used = HEADER_BITS + levels.len() * (1 + value_width as usize);
    Ok(DensePayload {
        levels,
        value_width,
        bits_used,
    })
}

pub fn decode_dense(p: &DensePayload, q: &QuantizerConfig) -> Vec<f64> {
    p.levels
        .iter()
        .map(|&k| if k == 0 { 0.0 } else { k as f64 * q.step })
        .collect()
}

impl DensePayload {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = BitWriter::new();
        write_header(&mut w, self.levels.len(), 0, self.value_width);
        for &k in &self.levels {
            write_level(&mut w, k, self.value_width);
        }
        w.bytes
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = BitReader { bytes, pos: 0 };
        let count = r.take(8)? as usize;
        if r.take(4)? != 0 {
            return Err(Error::CorruptPayload(
                "dense payload with nonzero index width".into(),
            ));
        }
        let value_width = r.take(4)? as u32;
        let levels = (0..count)
            .map(|_| read_level(&mut r, value_width))
            .collect::<Result<_>>()?;
        check_padding(&r)?;
        Ok(Self {
            levels,
            value_width,
            bits_used: r.pos,
        })
    }
}
