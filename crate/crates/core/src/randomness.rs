//! Keyed, random-access common randomness.
//!
//! Every draw is a pure function of `(seed, trial, batch, slot, tag)`. The
//! generator is ChaCha12 used in counter mode: the trial selects the stream
//! (nonce) and `(batch, slot)` selects one 64-byte block whose eight 64-bit
//! words carry the tags of that slot:
//!
//! | word | slot 0         | slot j >= 1          |
//! |------|----------------|----------------------|
//! | 0    | batch uniform  | exponential `S_ij`   |
//! | 1    | unused         | hash `V_ij`          |
//! | 2..8 | unused         | tuple components 0-5 |
//!
//! Trial `t` uses stream `2t` for shared draws and `2t + 1` for private
//! source draws (inputs of the experiments), so the two never overlap.

use rand_chacha::ChaCha12Rng;
use rand_core::{RngCore, SeedableRng};

use crate::dist::DistributionSpec;
use crate::error::{invalid, Error, Result};

/// Largest tuple supported by one slot block.
pub const MAX_COMPONENTS: usize = 6;
/// Slots per batch are addressed with 24 bits.
pub const MAX_SLOT: u64 = (1 << 24) - 1;
/// Batches are addressed with 40 bits.
pub const MAX_BATCH: u64 = (1 << 40) - 1;

const WORDS: usize = 8;

/// What a draw is used for.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Tag {
    /// First (or only) proposal component.
    Proposal,
    Exponential,
    /// Batch-level accept uniform `U_i`; lives in slot 0.
    BatchUniform,
    Hash,
    /// Component `k` of a tuple proposal.
    Component(u32),
}

/// Address of one draw.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StreamAddress {
    pub trial: u64,
    /// 1-based batch index.
    pub batch: u64,
    /// 1-based slot, or 0 for the batch uniform.
    pub slot: u32,
    pub tag: Tag,
}

impl StreamAddress {
    fn word(&self) -> Result<usize> {
        let w = match (self.slot, self.tag) {
            (0, Tag::BatchUniform) => 0,
            (0, _) => return invalid("slot 0 only carries the batch uniform"),
            (_, Tag::BatchUniform) => return invalid("batch uniform lives in slot 0"),
            (_, Tag::Exponential) => 0,
            (_, Tag::Hash) => 1,
            (_, Tag::Proposal) => 2,
            (_, Tag::Component(k)) if (k as usize) < MAX_COMPONENTS => 2 + k as usize,
            (_, Tag::Component(k)) => return invalid(format!("tuple component {k} exceeds {MAX_COMPONENTS}")),
        };
        if self.batch == 0 || self.batch > MAX_BATCH || self.slot as u64 > MAX_SLOT {
            return invalid(format!("address out of range: batch {}, slot {}", self.batch, self.slot));
        }
        Ok(w)
    }
}

/// Maps 64 random bits to the open interval (0, 1) on the grid
/// `(m + 1/2) 2^-52`, whose extreme points are exactly representable.
#[inline]
pub fn uniform_from_bits(x: u64) -> f64 {
    ((x >> 12) as f64 + 0.5) * (1.0 / (1u64 << 52) as f64)
}

/// Inverse transform to Exp(1).
#[inline]
pub fn exponential_from_uniform(u: f64) -> f64 {
    -u.ln()
}

/// `ceil(u * v)`, kept inside `[1, v]`.
#[inline]
pub fn hash_from_uniform(u: f64, v: u64) -> u64 {
    ((u * v as f64).ceil() as u64).clamp(1, v)
}

/// The shared randomness `W`.
#[derive(Clone, PartialEq, Eq)]
pub struct CommonRandomness {
    key: [u8; 32],
}

impl std::fmt::Debug for CommonRandomness {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "CommonRandomness({})", self.seed_hex())
    }
}

impl CommonRandomness {
    pub fn new(key: [u8; 32]) -> Self {
        CommonRandomness { key }
    }

    /// Small integer seed, placed in the low bytes of the key.
    pub fn from_u64(seed: u64) -> Self {
        let mut key = [0u8; 32];
        key[24..].copy_from_slice(&seed.to_be_bytes());
        CommonRandomness { key }
    }

    /// Parses up to 64 hex digits, with or without a `0x` prefix. The value is
    /// read as a big-endian integer, so `0xA1` and `0x00A1` are the same key.
    pub fn from_hex(s: &str) -> Result<Self> {
        let t = s.trim();
        let t = t.strip_prefix("0x").or_else(|| t.strip_prefix("0X")).unwrap_or(t);
        if t.is_empty() || t.len() > 64 || !t.bytes().all(|b| b.is_ascii_hexdigit()) {
            return Err(Error::Parse(format!("seed must be 1-64 hex digits, got {s:?}")));
        }
        let padded = format!("{t:0>64}");
        let mut key = [0u8; 32];
        for (i, k) in key.iter_mut().enumerate() {
            *k = u8::from_str_radix(&padded[2 * i..2 * i + 2], 16).unwrap();
        }
        Ok(CommonRandomness { key })
    }

    /// Canonical `0x`-prefixed form without leading zeros.
    pub fn seed_hex(&self) -> String {
        let full: String = self.key.iter().map(|b| format!("{b:02x}")).collect();
        let trimmed = full.trim_start_matches('0');
        format!("0x{}", if trimmed.is_empty() { "0" } else { trimmed })
    }

    /// An independent key derived from this one, for auxiliary estimates.
    pub fn derive(&self, label: u64) -> Self {
        let mut rng = ChaCha12Rng::from_seed(self.key);
        rng.set_stream(u64::MAX);
        rng.set_word_pos(u128::from(label) * 16);
        let mut key = [0u8; 32];
        rng.fill_bytes(&mut key);
        CommonRandomness { key }
    }

    pub fn trial(&self, trial: u64) -> TrialStream {
        TrialStream { key: self.key, trial }
    }

    pub fn draw_uniform(&self, addr: StreamAddress) -> Result<f64> {
        let w = addr.word()?;
        Ok(self.trial(addr.trial).block(addr.batch, addr.slot)[w])
    }

    pub fn draw_exponential(&self, addr: StreamAddress) -> Result<f64> {
        Ok(exponential_from_uniform(self.draw_uniform(addr)?))
    }

    pub fn draw_proposal(&self, addr: StreamAddress, q: &DistributionSpec) -> Result<f64> {
        Ok(q.sample(self.draw_uniform(addr)?))
    }

    pub fn draw_hash(&self, addr: StreamAddress, v: u64) -> Result<u64> {
        if v == 0 {
            return invalid("hash alphabet must be non-empty");
        }
        Ok(hash_from_uniform(self.draw_uniform(addr)?, v))
    }
}

/// All draws of a single slot, as uniforms in (0, 1).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SlotDraws {
    pub words: [f64; WORDS],
}

impl SlotDraws {
    /// Batch uniform (slot 0 only).
    #[inline]
    pub fn batch_uniform(&self) -> f64 {
        self.words[0]
    }

    #[inline]
    pub fn exponential(&self) -> f64 {
        exponential_from_uniform(self.words[0])
    }

    #[inline]
    pub fn hash_uniform(&self) -> f64 {
        self.words[1]
    }

    #[inline]
    pub fn components(&self, dim: usize) -> &[f64] {
        &self.words[2..2 + dim]
    }
}

/// The draws of one trial.
#[derive(Clone)]
pub struct TrialStream {
    key: [u8; 32],
    trial: u64,
}

impl TrialStream {
    pub fn index(&self) -> u64 {
        self.trial
    }

    fn rng(&self, stream: u64, block: u64) -> ChaCha12Rng {
        let mut rng = ChaCha12Rng::from_seed(self.key);
        rng.set_stream(stream);
        rng.set_word_pos(u128::from(block) * 16);
        rng
    }

    fn block_index(batch: u64, slot: u32) -> u64 {
        debug_assert!(batch <= MAX_BATCH && u64::from(slot) <= MAX_SLOT);
        (batch << 24) | u64::from(slot)
    }

    fn block(&self, batch: u64, slot: u32) -> [f64; WORDS] {
        let mut rng = self.rng(self.trial.wrapping_mul(2), Self::block_index(batch, slot));
        read_block(&mut rng)
    }

    /// Random access to one slot.
    pub fn slot(&self, batch: u64, slot: u32) -> SlotDraws {
        SlotDraws { words: self.block(batch, slot) }
    }

    pub fn batch_uniform(&self, batch: u64) -> f64 {
        self.block(batch, 0)[0]
    }

    /// Sequential reader starting at `(batch, slot)`; successive calls to
    /// [`SlotScanner::next_slot`] return slots `slot, slot + 1, ...` of the
    /// same batch.
    pub fn scan(&self, batch: u64, slot: u32) -> SlotScanner {
        SlotScanner { rng: self.rng(self.trial.wrapping_mul(2), Self::block_index(batch, slot)) }
    }

    /// Private uniforms of this trial (not part of the shared randomness).
    pub fn source(&self) -> SlotScanner {
        SlotScanner { rng: self.rng(self.trial.wrapping_mul(2).wrapping_add(1), 0) }
    }
}

#[inline]
fn read_block(rng: &mut ChaCha12Rng) -> [f64; WORDS] {
    let mut w = [0.0; WORDS];
    for x in w.iter_mut() {
        *x = uniform_from_bits(rng.next_u64());
    }
    w
}

/// Sequential slot reader.
pub struct SlotScanner {
    rng: ChaCha12Rng,
}

impl SlotScanner {
    #[inline]
    pub fn next_slot(&mut self) -> SlotDraws {
        SlotDraws { words: read_block(&mut self.rng) }
    }

    /// Next single uniform (for private source draws).
    #[inline]
    pub fn next_uniform(&mut self) -> f64 {
        uniform_from_bits(self.rng.next_u64())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn addr(trial: u64, batch: u64, slot: u32, tag: Tag) -> StreamAddress {
        StreamAddress { trial, batch, slot, tag }
    }

    #[test]
    fn deterministic_and_seed_dependent() {
        let a = CommonRandomness::from_hex("0xA1").unwrap();
        let b = CommonRandomness::from_hex("0xa1").unwrap();
        let c = CommonRandomness::from_hex("0xA2").unwrap();
        let x = addr(3, 7, 2, Tag::Proposal);
        assert_eq!(a.draw_uniform(x).unwrap(), b.draw_uniform(x).unwrap());
        assert_ne!(a.draw_uniform(x).unwrap(), c.draw_uniform(x).unwrap());
        assert_eq!(a.seed_hex(), "0xa1");
    }

    #[test]
    fn scanner_agrees_with_random_access() {
        let cr = CommonRandomness::from_u64(9);
        let ts = cr.trial(4);
        let mut sc = ts.scan(5, 0);
        for s in 0..40u32 {
            assert_eq!(sc.next_slot(), ts.slot(5, s));
        }
        assert_eq!(ts.batch_uniform(5), cr.draw_uniform(addr(4, 5, 0, Tag::BatchUniform)).unwrap());
        assert_eq!(ts.slot(5, 3).exponential(), cr.draw_exponential(addr(4, 5, 3, Tag::Exponential)).unwrap());
        assert_eq!(ts.slot(5, 3).components(3)[2], cr.draw_uniform(addr(4, 5, 3, Tag::Component(2))).unwrap());
    }

    #[test]
    fn address_validation() {
        let cr = CommonRandomness::from_u64(1);
        assert!(cr.draw_uniform(addr(0, 1, 0, Tag::Hash)).is_err());
        assert!(cr.draw_uniform(addr(0, 1, 1, Tag::BatchUniform)).is_err());
        assert!(cr.draw_uniform(addr(0, 0, 1, Tag::Proposal)).is_err());
        assert!(cr.draw_uniform(addr(0, 1, 1, Tag::Component(6))).is_err());
        assert!(cr.draw_hash(addr(0, 1, 1, Tag::Hash), 0).is_err());
    }

    #[test]
    fn transforms() {
        assert!((exponential_from_uniform((-1.0f64).exp()) - 1.0).abs() < 1e-15);
        assert_eq!(hash_from_uniform(0.3, 2), 1);
        assert_eq!(hash_from_uniform(0.7, 2), 2);
        assert_eq!(hash_from_uniform(0.999, 1), 1);
        assert!(uniform_from_bits(0) > 0.0 && uniform_from_bits(u64::MAX) < 1.0);
        assert!(exponential_from_uniform(uniform_from_bits(u64::MAX)) > 0.0);
    }

    #[test]
    fn hex_seed_parsing() {
        assert!(CommonRandomness::from_hex("xyz").is_err());
        assert!(CommonRandomness::from_hex("").is_err());
        assert_eq!(CommonRandomness::from_hex("0x00a1").unwrap(), CommonRandomness::from_hex("A1").unwrap());
        let long = "f".repeat(64);
        assert!(CommonRandomness::from_hex(&long).is_ok());
        assert!(CommonRandomness::from_hex(&format!("{long}f")).is_err());
    }
}
