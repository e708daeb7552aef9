//! Prefix codes and index codecs.
//!
//! Bitstrings are written most-significant bit first into bytes; the final
//! byte is zero-padded.

use std::fmt;

use crate::error::{invalid, Error, Result};
use crate::randomness::CommonRandomness;
use crate::samplers::{delta_lower, global_index, ErsSelection, Proposal};

/// Growable bit sequence.
#[derive(Clone, Default, PartialEq, Eq)]
pub struct BitString {
    bytes: Vec<u8>,
    len: usize,
}

impl BitString {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn push(&mut self, bit: bool) {
        if self.len.is_multiple_of(8) {
            self.bytes.push(0);
        }
        if bit {
            self.bytes[self.len / 8] |= 0x80 >> (self.len % 8);
        }
        self.len += 1;
    }

    /// Appends the low `width` bits of `value`, most significant first.
    pub fn push_bits(&mut self, value: u64, width: u32) {
        for i in (0..width).rev() {
            self.push((value >> i) & 1 == 1);
        }
    }

    pub fn extend(&mut self, other: &BitString) {
        for i in 0..other.len {
            self.push(other.get(i));
        }
    }

    pub fn get(&self, i: usize) -> bool {
        self.bytes[i / 8] & (0x80 >> (i % 8)) != 0
    }

    /// Packed bytes, final byte zero-padded.
    pub fn as_bytes(&self) -> &[u8] {
        &self.bytes
    }

    /// Rebuilds a bitstring from packed bytes and a bit length.
    pub fn from_bytes(bytes: &[u8], len: usize) -> Result<Self> {
        if len > bytes.len() * 8 || bytes.len() != len.div_ceil(8) {
            return invalid(format!("{len} bits do not fit {} bytes", bytes.len()));
        }
        let mut b = BitString { bytes: bytes.to_vec(), len };
        if !len.is_multiple_of(8) {
            let last = b.bytes.len() - 1;
            b.bytes[last] &= 0xFFu8 << (8 - len % 8);
        }
        Ok(b)
    }

    pub fn reader(&self) -> BitReader<'_> {
        BitReader { bits: self, pos: 0 }
    }
}

impl fmt::Display for BitString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for i in 0..self.len {
            f.write_str(if self.get(i) { "1" } else { "0" })?;
        }
        Ok(())
    }
}

impl fmt::Debug for BitString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "BitString({self})")
    }
}

impl std::str::FromStr for BitString {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let mut b = BitString::new();
        for c in s.chars() {
            match c {
                '0' => b.push(false),
                '1' => b.push(true),
                _ => return Err(Error::Parse(format!("not a bit: {c:?}"))),
            }
        }
        Ok(b)
    }
}

/// Cursor over a [`BitString`].
pub struct BitReader<'a> {
    bits: &'a BitString,
    pos: usize,
}

impl BitReader<'_> {
    pub fn read(&mut self) -> Result<bool> {
        if self.pos >= self.bits.len {
            return Err(Error::Decode("unexpected end of bitstream".into()));
        }
        let b = self.bits.get(self.pos);
        self.pos += 1;
        Ok(b)
    }

    pub fn read_bits(&mut self, width: u32) -> Result<u64> {
        let mut v = 0u64;
        for _ in 0..width {
            v = (v << 1) | self.read()? as u64;
        }
        Ok(v)
    }

    pub fn position(&self) -> usize {
        self.pos
    }

    pub fn is_exhausted(&self) -> bool {
        self.pos == self.bits.len
    }
}

fn check_positive(k: u64) -> Result<()> {
    if k == 0 {
        return invalid("prefix codes encode integers >= 1");
    }
    Ok(())
}

/// `k - 1` ones followed by a zero.
pub fn unary_encode(k: u64) -> Result<BitString> {
    check_positive(k)?;
    let mut b = BitString::new();
    unary_write(&mut b, k);
    Ok(b)
}

fn unary_write(b: &mut BitString, k: u64) {
    for _ in 1..k {
        b.push(true);
    }
    b.push(false);
}

pub fn unary_decode(r: &mut BitReader<'_>) -> Result<u64> {
    let mut k = 1u64;
    while r.read()? {
        k += 1;
    }
    Ok(k)
}

fn floor_log2(k: u64) -> u32 {
    63 - k.leading_zeros()
}

/// Length of the Elias-delta codeword of `k >= 1`.
pub fn elias_delta_len(k: u64) -> u64 {
    let n = floor_log2(k) as u64;
    let l = floor_log2(n + 1) as u64;
    n + 2 * l + 1
}

pub fn elias_delta_encode(k: u64) -> Result<BitString> {
    check_positive(k)?;
    let mut b = BitString::new();
    elias_delta_write(&mut b, k);
    Ok(b)
}

fn elias_delta_write(b: &mut BitString, k: u64) {
    let n = floor_log2(k);
    let len = n + 1;
    let l = floor_log2(len as u64);
    // Elias-gamma of n + 1, then the n bits of k below its leading one.
    for _ in 0..l {
        b.push(false);
    }
    b.push_bits(len as u64, l + 1);
    b.push_bits(k, n);
}

pub fn elias_delta_decode(r: &mut BitReader<'_>) -> Result<u64> {
    let mut l = 0u32;
    while !r.read()? {
        l += 1;
        if l > 6 {
            return Err(Error::Decode("Elias-delta length prefix too long".into()));
        }
    }
    let len = (1u64 << l) | r.read_bits(l)?;
    let n = len - 1;
    if n > 63 {
        return Err(Error::Decode("Elias-delta value exceeds 64 bits".into()));
    }
    Ok((1u64 << n) | r.read_bits(n as u32)?)
}

/// Riemann zeta for `s > 1` by Euler-Maclaurin summation; the remainder after
/// the correction terms is below `1e-15` relative.
pub fn zeta(s: f64) -> f64 {
    assert!(s > 1.0, "zeta needs s > 1");
    const M: u32 = 64;
    let m = M as f64;
    let head: f64 = (1..M).map(|k| (k as f64).powf(-s)).sum();
    let mut tail = m.powf(1.0 - s) / (s - 1.0) + 0.5 * m.powf(-s);
    // Bernoulli corrections B_2k / (2k)! * s (s+1) ... (s+2k-2) * M^{-s-2k+1}.
    let b = [1.0 / 6.0, -1.0 / 30.0, 1.0 / 42.0, -1.0 / 30.0, 5.0 / 66.0];
    let mut rising = s;
    let mut fact = 2.0;
    for (i, bk) in b.iter().enumerate() {
        let k = (i + 1) as f64;
        tail += bk / fact * rising * m.powf(-s - 2.0 * k + 1.0);
        rising *= (s + 2.0 * k - 1.0) * (s + 2.0 * k);
        fact *= (2.0 * k + 1.0) * (2.0 * k + 2.0);
    }
    head + tail
}

/// Zipf law `k^-lambda / zeta(lambda)` over `k >= 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ZipfModel {
    pub lambda: f64,
    pub normalizer: f64,
}

impl ZipfModel {
    pub fn new(lambda: f64) -> Result<Self> {
        if !(lambda > 1.0) {
            return invalid(format!("Zipf exponent must exceed 1, got {lambda}"));
        }
        Ok(ZipfModel { lambda, normalizer: zeta(lambda) })
    }

    /// Exponent `1 + 1/(E[log2 K] + 1)` fitted to a mean log index.
    pub fn from_mean_log(e_log_k: f64) -> Self {
        let lambda = 1.0 + 1.0 / (e_log_k.max(0.0) + 1.0);
        ZipfModel { lambda, normalizer: zeta(lambda) }
    }

    pub fn pmf(&self, k: u64) -> f64 {
        (k as f64).powf(-self.lambda) / self.normalizer
    }

    /// `-log2 pmf(k)`.
    pub fn bits(&self, k: u64) -> f64 {
        self.lambda * (k as f64).log2() + self.normalizer.log2()
    }
}

/// Ideal code length of `k` under the Zipf law fitted to `E[log2 K]`.
pub fn zipf_ideal_bits(k: u64, e_log_k: f64) -> f64 {
    ZipfModel::from_mean_log(e_log_k).bits(k)
}

/// Label of a transmitted integer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Part {
    /// Group index.
    L,
    /// Rank of the accept uniform within its group.
    K1Hat,
    /// Rank of the candidate's exponential within its batch.
    K2Hat,
    /// Bin index of the binning method.
    T,
    /// Position within the bin.
    G,
    /// Unary-coded batch index.
    BatchUnary,
    Hash,
}

/// Integers sent for one selection, each at least 1.
#[derive(Debug, Clone, PartialEq)]
pub struct CodedMessage {
    pub parts: Vec<(Part, u64)>,
}

impl CodedMessage {
    pub fn new(parts: Vec<(Part, u64)>) -> Result<Self> {
        if let Some((p, _)) = parts.iter().find(|(_, v)| *v == 0) {
            return invalid(format!("part {p:?} is zero"));
        }
        Ok(CodedMessage { parts })
    }

    pub fn value(&self, part: Part) -> Option<u64> {
        self.parts.iter().find(|(p, _)| *p == part).map(|(_, v)| *v)
    }

    /// Wire form: unary for [`Part::BatchUnary`], Elias-delta for the rest,
    /// concatenated in order.
    pub fn to_bits(&self) -> BitString {
        let mut b = BitString::new();
        for (p, v) in &self.parts {
            match p {
                Part::BatchUnary => unary_write(&mut b, *v),
                _ => elias_delta_write(&mut b, *v),
            }
        }
        b
    }

    /// Inverse of [`CodedMessage::to_bits`] for a known label sequence.
    pub fn from_bits(bits: &BitString, labels: &[Part]) -> Result<Self> {
        let mut r = bits.reader();
        let mut parts = Vec::with_capacity(labels.len());
        for p in labels {
            let v = match p {
                Part::BatchUnary => unary_decode(&mut r)?,
                _ => elias_delta_decode(&mut r)?,
            };
            parts.push((*p, v));
        }
        if !r.is_exhausted() {
            return Err(Error::Decode("trailing bits after message".into()));
        }
        Ok(CodedMessage { parts })
    }

    pub fn wire_bits(&self) -> u64 {
        self.parts
            .iter()
            .map(|(p, v)| if *p == Part::BatchUnary { *v } else { elias_delta_len(*v) })
            .sum()
    }
}

/// Ideal and concrete message lengths.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct RateReport {
    pub ideal_bits: f64,
    pub wire_bits: f64,
}

/// Per-part Zipf models fitted to the measured mean log of each part.
#[derive(Debug, Clone)]
pub struct RateModel {
    pub models: Vec<(Part, ZipfModel)>,
    pub mean_log: Vec<(Part, f64)>,
}

impl RateModel {
    /// Fits one model per part position; all messages share one layout.
    pub fn fit(messages: &[CodedMessage]) -> Result<Self> {
        let first = messages.first().ok_or_else(|| Error::InvalidArgument("no messages".into()))?;
        let labels: Vec<Part> = first.parts.iter().map(|(p, _)| *p).collect();
        let mut sums = vec![0.0; labels.len()];
        for m in messages {
            if m.parts.len() != labels.len() || m.parts.iter().zip(&labels).any(|((p, _), l)| p != l) {
                return invalid("messages have different layouts");
            }
            for (s, (_, v)) in sums.iter_mut().zip(&m.parts) {
                *s += (*v as f64).log2();
            }
        }
        let n = messages.len() as f64;
        let mean_log: Vec<(Part, f64)> = labels.iter().zip(&sums).map(|(p, s)| (*p, s / n)).collect();
        let models = mean_log.iter().map(|(p, e)| (*p, ZipfModel::from_mean_log(*e))).collect();
        Ok(RateModel { models, mean_log })
    }

    pub fn rate(&self, m: &CodedMessage) -> RateReport {
        let ideal = m.parts.iter().zip(&self.models).map(|((_, v), (_, z))| z.bits(*v)).sum();
        RateReport { ideal_bits: ideal, wire_bits: m.wire_bits() as f64 }
    }
}

/// Mean ideal and wire rates of a set of messages sharing one layout.
pub fn total_rate(messages: &[CodedMessage]) -> Result<RateReport> {
    let model = RateModel::fit(messages)?;
    let mut acc = RateReport::default();
    for m in messages {
        let r = model.rate(m);
        acc.ideal_bits += r.ideal_bits;
        acc.wire_bits += r.wire_bits;
    }
    let n = messages.len() as f64;
    Ok(RateReport { ideal_bits: acc.ideal_bits / n, wire_bits: acc.wire_bits / n })
}

/// 1-based rank of `values[k]` in ascending order, ties broken by index.
fn rank_of(values: &[f64], k: usize) -> u64 {
    let v = values[k];
    1 + values.iter().enumerate().filter(|(j, x)| **x < v || (**x == v && *j < k)).count() as u64
}

/// 0-based index holding rank `r` (1-based) in ascending order.
fn index_of_rank(values: &[f64], r: u64) -> Result<usize> {
    if r == 0 || r > values.len() as u64 {
        return Err(Error::Decode(format!("rank {r} outside 1..={}", values.len())));
    }
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|a, b| values[*a].total_cmp(&values[*b]).then(a.cmp(b)));
    Ok(order[r as usize - 1])
}

fn group_size_rs(omega: f64) -> Result<u64> {
    let g = omega.floor();
    if !(g >= 1.0) || !g.is_finite() {
        return invalid(format!("floor(omega) must be at least 1, got {omega}"));
    }
    Ok(g as u64)
}

fn batch_uniforms(cr: &CommonRandomness, trial: u64, first: u64, count: u64) -> Vec<f64> {
    let ts = cr.trial(trial);
    (first..first + count).map(|i| ts.batch_uniform(i)).collect()
}

/// Sorting method: `L = ceil(K / floor(omega))` and the rank of `U_K` among
/// the accept uniforms of group `L`.
pub fn rs_sort_encode(cr: &CommonRandomness, trial: u64, k: u64, omega: f64) -> Result<(u64, u64)> {
    if k == 0 {
        return invalid("index must be at least 1");
    }
    let g = group_size_rs(omega)?;
    let l = k.div_ceil(g);
    let us = batch_uniforms(cr, trial, (l - 1) * g + 1, g);
    Ok((l, rank_of(&us, ((k - 1) % g) as usize)))
}

pub fn rs_sort_decode(cr: &CommonRandomness, trial: u64, l: u64, k_hat: u64, omega: f64) -> Result<u64> {
    let g = group_size_rs(omega)?;
    if l == 0 {
        return Err(Error::Decode("group index must be at least 1".into()));
    }
    if k_hat == 0 || k_hat > g {
        return Err(Error::Decode(format!("rank {k_hat} outside 1..={g}")));
    }
    let us = batch_uniforms(cr, trial, (l - 1) * g + 1, g);
    Ok((l - 1) * g + 1 + index_of_rank(&us, k_hat)? as u64)
}

/// Bin of proposal `i`: `ceil(omega U_i Q(Y_i) / Q(Y_i)) = ceil(omega U_i)`,
/// the proposal density cancels.
#[inline]
fn bin_of(omega: f64, u: f64) -> u64 {
    (omega * u).ceil() as u64
}

/// Binning method: bin `T = ceil(omega U_K)` and the position `G` of `K`
/// among the proposals in bin `T`, in index order.
pub fn rs_bin_encode(cr: &CommonRandomness, trial: u64, k: u64, omega: f64) -> Result<(u64, u64)> {
    if k == 0 {
        return invalid("index must be at least 1");
    }
    let ts = cr.trial(trial);
    let t = bin_of(omega, ts.batch_uniform(k));
    let g = (1..=k).filter(|i| bin_of(omega, ts.batch_uniform(*i)) == t).count() as u64;
    Ok((t, g))
}

/// Scan cap of the binning decoder.
pub const BIN_DECODE_CAP: u64 = 10_000_000;

/// Rescans the proposals for the `G`-th member of bin `T`; returns `(K, Y_K)`.
pub fn rs_bin_decode<Q: Proposal + ?Sized>(
    cr: &CommonRandomness,
    trial: u64,
    t: u64,
    g: u64,
    q: &Q,
    omega: f64,
) -> Result<(u64, Vec<f64>)> {
    if t == 0 || g == 0 {
        return Err(Error::Decode("bin and position must be at least 1".into()));
    }
    let ts = cr.trial(trial);
    let mut seen = 0;
    for i in 1..=BIN_DECODE_CAP {
        if bin_of(omega, ts.batch_uniform(i)) == t {
            seen += 1;
            if seen == g {
                let dim = q.dim();
                let mut y = vec![0.0; dim];
                q.draw(ts.slot(i, 1).components(dim), &mut y);
                return Ok((i, y));
            }
        }
    }
    Err(Error::NonTermination { what: "binning decoder", cap: BIN_DECODE_CAP })
}

/// Batches per group, `floor(1 / Delta)` with `Delta = N / (N - 1 + omega)`.
pub fn ers_group_size(omega: f64, n: u64) -> u64 {
    let g = (1.0 / delta_lower(omega, n)).floor();
    (g as u64).max(1)
}

/// Three-part codec of an accepted batch: group `L`, rank of the batch
/// uniform within the group, rank of the candidate's exponential.
pub fn ers_encode(cr: &CommonRandomness, trial: u64, sel: &ErsSelection, omega: f64, n: u64) -> Result<(u64, u64, u64)> {
    if sel.k2 == 0 || sel.k2 > n || sel.k1 == 0 {
        return invalid("selection does not fit the batch size");
    }
    let g = ers_group_size(omega, n);
    let l = sel.k1.div_ceil(g);
    let us = batch_uniforms(cr, trial, (l - 1) * g + 1, g);
    let k1_hat = rank_of(&us, ((sel.k1 - 1) % g) as usize);
    let ts = cr.trial(trial);
    let mut sc = ts.scan(sel.k1, 1);
    let exps: Vec<f64> = (0..n).map(|_| sc.next_slot().exponential()).collect();
    let k2_hat = rank_of(&exps, (sel.k2 - 1) as usize);
    Ok((l, k1_hat, k2_hat))
}

/// Decoded ERS selection.
#[derive(Debug, Clone, PartialEq)]
pub struct ErsDecoded {
    pub k: u64,
    pub k1: u64,
    pub k2: u64,
    pub y: Vec<f64>,
}

#[allow(clippy::too_many_arguments)]
pub fn ers_decode<Q: Proposal + ?Sized>(
    cr: &CommonRandomness,
    trial: u64,
    l: u64,
    k1_hat: u64,
    k2_hat: u64,
    omega: f64,
    n: u64,
    q: &Q,
) -> Result<ErsDecoded> {
    let g = ers_group_size(omega, n);
    if l == 0 {
        return Err(Error::Decode("group index must be at least 1".into()));
    }
    let us = batch_uniforms(cr, trial, (l - 1) * g + 1, g);
    let k1 = (l - 1) * g + 1 + index_of_rank(&us, k1_hat)? as u64;
    let ts = cr.trial(trial);
    let mut sc = ts.scan(k1, 1);
    let slots: Vec<_> = (0..n).map(|_| sc.next_slot()).collect();
    let exps: Vec<f64> = slots.iter().map(|s| s.exponential()).collect();
    let j = index_of_rank(&exps, k2_hat)?;
    let dim = q.dim();
    let mut y = vec![0.0; dim];
    q.draw(slots[j].components(dim), &mut y);
    let k2 = j as u64 + 1;
    Ok(ErsDecoded { k: global_index(n, k1, k2), k1, k2, y })
}
