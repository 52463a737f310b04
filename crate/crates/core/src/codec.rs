//! Static range coder driven by an extension model.
//!
//! Stream layout: magic `EXMC1`, the 32-byte model digest, the symbol count
//! as 8-byte big-endian, then the payload. The payload of a nonempty text is
//! `shifts + 1` bytes where `shifts` is the number of renormalizations, so
//! its length exceeds `−log2 p̃(T|φ)` by less than 8 bits plus the
//! quantization loss (about `1.44·m/2^24` bits per symbol).

use crate::corpus::{Symbol, SymbolSequence};
use crate::error::{Error, Result};
use crate::model::ExtensionModel;

pub const STREAM_MAGIC: &[u8; 5] = b"EXMC1";
const HEADER_LEN: usize = 5 + 32 + 8;

/// Quantized frequencies sum to `2^FREQ_BITS`.
pub const FREQ_BITS: u32 = 24;
const FREQ_TOTAL: u64 = 1 << FREQ_BITS;
const TOP: u64 = 1 << 56;

/// Integer frequencies for `p̃(·|w)`: every symbol gets at least one quantum,
/// the rest is shared in proportion to probability, and rounding leftovers go
/// to the most probable symbol.
pub fn quantize(dist: &[f64]) -> Vec<u32> {
    let m = dist.len() as u64;
    assert!((1..=FREQ_TOTAL / 2).contains(&m), "alphabet too large to quantize");
    let spare = (FREQ_TOTAL - m) as f64;
    let total: f64 = dist.iter().sum();
    let scale = if total > 0.0 { spare / total } else { 0.0 };
    let mut freqs: Vec<u32> = dist
        .iter()
        .map(|&p| 1 + ((p.max(0.0) * scale).floor() as u64).min(FREQ_TOTAL - m) as u32)
        .collect();
    let sum: u64 = freqs.iter().map(|&f| f as u64).sum();
    let mut best = 0;
    for (i, &p) in dist.iter().enumerate() {
        if p > dist[best] {
            best = i;
        }
    }
    if sum <= FREQ_TOTAL {
        freqs[best] += (FREQ_TOTAL - sum) as u32;
    } else {
        // Only reachable if the distribution sums above one by rounding.
        let mut excess = sum - FREQ_TOTAL;
        let mut order: Vec<usize> = (0..freqs.len()).collect();
        order.sort_by(|&a, &b| freqs[b].cmp(&freqs[a]).then(a.cmp(&b)));
        for i in order {
            let take = excess.min(freqs[i] as u64 - 1);
            freqs[i] -= take as u32;
            excess -= take;
            if excess == 0 {
                break;
            }
        }
    }
    freqs
}

/// Cumulative frequency tables per context, built on first use.
pub struct QuantizedModel<'a> {
    model: &'a ExtensionModel,
    tables: Vec<Option<Box<[u32]>>>,
}

impl<'a> QuantizedModel<'a> {
    pub fn new(model: &'a ExtensionModel) -> Self {
        Self {
            model,
            tables: vec![None; model.len()],
        }
    }

    /// Cumulative table (length `m + 1`) for the context predicting after
    /// `history`.
    pub fn table(&mut self, history: &[Symbol]) -> Result<&[u32]> {
        let ci = self
            .model
            .longest_context(history)
            .ok_or_else(|| Error::InvalidModel("model has no empty context".into()))?;
        let model = self.model;
        let table = self.tables[ci].get_or_insert_with(|| {
            let freqs = quantize(model.context_distribution(ci));
            let mut cum = Vec::with_capacity(freqs.len() + 1);
            let mut acc = 0u32;
            cum.push(0);
            for f in freqs {
                acc += f;
                cum.push(acc);
            }
            cum.into_boxed_slice()
        });
        Ok(table)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CodedStream {
    pub digest: [u8; 32],
    pub symbol_count: u64,
    pub payload: Vec<u8>,
}

impl CodedStream {
    pub fn payload_bits(&self) -> u64 {
        self.payload.len() as u64 * 8
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(HEADER_LEN + self.payload.len());
        out.extend_from_slice(STREAM_MAGIC);
        out.extend_from_slice(&self.digest);
        out.extend_from_slice(&self.symbol_count.to_be_bytes());
        out.extend_from_slice(&self.payload);
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < STREAM_MAGIC.len() || &bytes[..5] != STREAM_MAGIC {
            return Err(Error::BadMagic);
        }
        if bytes.len() < HEADER_LEN {
            return Err(Error::TruncatedPayload {
                expected: HEADER_LEN,
                found: bytes.len(),
            });
        }
        let mut digest = [0u8; 32];
        digest.copy_from_slice(&bytes[5..37]);
        let symbol_count = u64::from_be_bytes(bytes[37..45].try_into().expect("8 bytes"));
        Ok(Self {
            digest,
            symbol_count,
            payload: bytes[HEADER_LEN..].to_vec(),
        })
    }
}

struct Encoder {
    low: u64,
    range: u64,
    out: Vec<u8>,
}

impl Encoder {
    fn new() -> Self {
        Self {
            low: 0,
            range: u64::MAX,
            out: Vec::new(),
        }
    }

    fn carry(&mut self) {
        for b in self.out.iter_mut().rev() {
            let (v, overflow) = b.overflowing_add(1);
            *b = v;
            if !overflow {
                return;
            }
        }
        unreachable!("carry out of the first byte");
    }

    fn encode(&mut self, cum: u32, freq: u32) {
        let r = self.range >> FREQ_BITS;
        let (low, overflow) = self.low.overflowing_add(r * cum as u64);
        self.low = low;
        if overflow {
            self.carry();
        }
        self.range = r * freq as u64;
        while self.range < TOP {
            self.out.push((self.low >> 56) as u8);
            self.low <<= 8;
            self.range <<= 8;
        }
    }

    /// Emits the single byte that pins a point inside `[low, low + range)`.
    fn finish(mut self) -> Vec<u8> {
        let (v, overflow) = self.low.overflowing_add(TOP - 1);
        if overflow {
            self.carry();
        }
        self.out.push((v >> 56) as u8);
        self.out
    }
}

struct Decoder<'a> {
    code: u64,
    range: u64,
    input: &'a [u8],
    pos: usize,
}

impl<'a> Decoder<'a> {
    fn new(input: &'a [u8]) -> Self {
        let mut d = Self {
            code: 0,
            range: u64::MAX,
            input,
            pos: 0,
        };
        for _ in 0..8 {
            d.code = (d.code << 8) | d.next_byte() as u64;
        }
        d
    }

    fn next_byte(&mut self) -> u8 {
        let b = self.input.get(self.pos).copied().unwrap_or(0);
        self.pos += 1;
        b
    }

    fn decode(&mut self, cum: &[u32]) -> Symbol {
        let r = self.range >> FREQ_BITS;
        let target = (self.code / r).min(FREQ_TOTAL - 1) as u32;
        let sym = cum.partition_point(|&c| c <= target) - 1;
        self.code -= r * cum[sym] as u64;
        self.range = r * (cum[sym + 1] - cum[sym]) as u64;
        while self.range < TOP {
            self.code = (self.code << 8) | self.next_byte() as u64;
            self.range <<= 8;
        }
        sym as Symbol
    }

    /// Bytes the encoder must have written: one per renormalization plus the
    /// final byte.
    fn expected_len(&self) -> usize {
        self.pos - 8 + 1
    }
}

pub fn encode(model: &ExtensionModel, seq: &[Symbol]) -> Result<CodedStream> {
    let m = model.alphabet_size();
    let depth = model.max_depth();
    let mut q = QuantizedModel::new(model);
    let mut enc = Encoder::new();
    for i in 0..seq.len() {
        let s = seq[i] as usize;
        if s >= m {
            return Err(Error::SymbolOutOfRange {
                symbol: seq[i],
                size: m,
            });
        }
        let cum = q.table(&seq[i.saturating_sub(depth)..i])?;
        let (lo, hi) = (cum[s], cum[s + 1]);
        enc.encode(lo, hi - lo);
    }
    let payload = if seq.is_empty() { Vec::new() } else { enc.finish() };
    Ok(CodedStream {
        digest: model.digest(),
        symbol_count: seq.len() as u64,
        payload,
    })
}

pub fn decode(model: &ExtensionModel, stream: &CodedStream) -> Result<SymbolSequence> {
    if stream.digest != model.digest() {
        return Err(Error::DigestMismatch);
    }
    let t = stream.symbol_count as usize;
    if t == 0 {
        if !stream.payload.is_empty() {
            return Err(Error::TrailingPayload {
                extra: stream.payload.len(),
            });
        }
        return SymbolSequence::new(Vec::new(), model.alphabet_size());
    }
    if stream.payload.is_empty() {
        return Err(Error::TruncatedPayload {
            expected: 1,
            found: 0,
        });
    }
    let depth = model.max_depth();
    let mut q = QuantizedModel::new(model);
    let mut dec = Decoder::new(&stream.payload);
    let mut out: Vec<Symbol> = Vec::with_capacity(t);
    for i in 0..t {
        let cum = q.table(&out[i.saturating_sub(depth)..i])?;
        let s = dec.decode(cum);
        out.push(s);
    }
    let expected = dec.expected_len();
    let found = stream.payload.len();
    if found < expected {
        return Err(Error::TruncatedPayload { expected, found });
    }
    if found > expected {
        return Err(Error::TrailingPayload {
            extra: found - expected,
        });
    }
    SymbolSequence::new(out, model.alphabet_size())
}
