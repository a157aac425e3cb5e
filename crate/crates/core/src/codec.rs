//! Payload encoding: full-frame codewords, two-slot sparse codewords with a
//! translate and check bit, and payload partitioning across sub-blocks
//! ("patching") with random parity stitching.
//!
//! Payload layouts, all using the canonical pair serialization of
//! [`crate::rm_core`]:
//!
//! - plain: `m(m+3)/2` bits map bijectively onto one pair.
//! - slotted with message passing: the pair bits minus the reserved check
//!   bit, followed by `p` primary-slot bits; the secondary slot is
//!   `primary + translate (mod 2^p)` where the translate is the first `p`
//!   payload bits.
//! - slotted without message passing: all pair bits followed by `p` slot
//!   bits; a single slot is occupied.
//! - patched: the payload is split over `2^r` sub-blocks; patch `i >= 1`
//!   carries `l_i` trailing parity bits over all earlier patches' bits.

use num_complex::Complex64;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::Error;
use crate::rm_core::{binary_expansion, bits_to_index, rm_sequence, RmPair, RmSequence};

/// Serialized position of the check bit: `P[0][1]`, the first off-diagonal
/// entry. Off-diagonal keeps the diagonal polarity alphabet untouched; any
/// fixed position would do, this one exists for every `q >= 2`.
pub const CHECK_BIT_POS: usize = 1;

/// Frame geometry: `2^r` sub-blocks, each of `2^p` slots of length `2^q`,
/// with `m = q + p + r`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SlotConfig {
    m: usize,
    p: usize,
    q: usize,
    r: usize,
    parity_bits: Vec<usize>,
    message_passing: bool,
}

impl SlotConfig {
    /// Build and validate a frame layout. `parity_bits` must hold one entry
    /// per sub-block with a leading 0, or be empty as shorthand for all
    /// zeros.
    pub fn new(
        m: usize,
        p: usize,
        r: usize,
        parity_bits: Vec<usize>,
        message_passing: bool,
    ) -> Result<Self, Error> {
        let q = m
            .checked_sub(p + r)
            .ok_or_else(|| Error::InvalidConfig(format!("p + r = {} exceeds m = {m}", p + r)))?;
        if q < 2 {
            return Err(Error::InvalidConfig(format!("q = m - p - r = {q} must be >= 2")));
        }
        let parity_bits = if parity_bits.is_empty() { vec![0; 1 << r] } else { parity_bits };
        if parity_bits.len() != 1 << r {
            return Err(Error::InvalidConfig(format!(
                "parity list holds {} entries, need 2^r = {}",
                parity_bits.len(),
                1 << r
            )));
        }
        if parity_bits[0] != 0 {
            return Err(Error::InvalidConfig("first patch carries no parity bits".into()));
        }
        let cfg = SlotConfig { m, p, q, r, parity_bits, message_passing };
        for (i, &l) in cfg.parity_bits.iter().enumerate() {
            if l >= cfg.patch_bits() {
                return Err(Error::InvalidConfig(format!(
                    "patch {i} parity length {l} leaves no information bits"
                )));
            }
        }
        Ok(cfg)
    }

    /// Single-block layout covering the whole frame (`r = 0`).
    pub fn single_block(m: usize, p: usize, message_passing: bool) -> Result<Self, Error> {
        Self::new(m, p, 0, Vec::new(), message_passing)
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn q(&self) -> usize {
        self.q
    }

    pub fn r(&self) -> usize {
        self.r
    }

    pub fn message_passing(&self) -> bool {
        self.message_passing
    }

    pub fn parity_bits(&self) -> &[usize] {
        &self.parity_bits
    }

    /// Slots per sub-block.
    pub fn slot_count(&self) -> usize {
        1 << self.p
    }

    /// Samples per slot.
    pub fn slot_len(&self) -> usize {
        1 << self.q
    }

    pub fn subblock_count(&self) -> usize {
        1 << self.r
    }

    /// Samples per sub-block.
    pub fn subblock_len(&self) -> usize {
        1 << (self.p + self.q)
    }

    pub fn frame_len(&self) -> usize {
        1 << self.m
    }

    /// Bits carried by one patch: `q(q+3)/2 + p - 1` with the check bit
    /// reserved, one more without it.
    pub fn patch_bits(&self) -> usize {
        let base = RmPair::bit_count(self.q) + self.p;
        if self.message_passing {
            base - 1
        } else {
            base
        }
    }

    /// End-to-end payload capacity `B`.
    pub fn payload_bits(&self) -> usize {
        self.subblock_count() * self.patch_bits() - self.parity_bits.iter().sum::<usize>()
    }

    /// Sample range of slot `slot` in sub-block `subblock`, relative to the
    /// frame start.
    pub fn slot_range(&self, subblock: usize, slot: usize) -> std::ops::Range<usize> {
        let start = subblock * self.subblock_len() + slot * self.slot_len();
        start..start + self.slot_len()
    }
}

/// A codeword occupying one or two slots of a `2^(p+q)`-sample sub-block.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseCodeword {
    slot_count: usize,
    slots: Vec<(usize, RmSequence)>,
}

impl SparseCodeword {
    /// Occupied slots in transmit order (primary first).
    pub fn slots(&self) -> &[(usize, RmSequence)] {
        &self.slots
    }

    pub fn slot_count(&self) -> usize {
        self.slot_count
    }

    /// Total sub-block length in samples.
    pub fn len(&self) -> usize {
        self.slot_count * self.slots[0].1.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Accumulate `weight * codeword` into a sub-block buffer.
    pub fn add_scaled_into(&self, out: &mut [Complex64], weight: Complex64) {
        let slot_len = self.slots[0].1.len();
        for (slot, seq) in &self.slots {
            let dst = &mut out[slot * slot_len..(slot + 1) * slot_len];
            for (d, s) in dst.iter_mut().zip(seq.samples()) {
                *d += weight * s;
            }
        }
    }
}

fn expect_len(bits: &[u8], expected: usize) -> Result<(), Error> {
    if bits.len() != expected {
        return Err(Error::LengthMismatch { expected, got: bits.len() });
    }
    Ok(())
}

/// Encode `m(m+3)/2` payload bits as one full-length pair and its sequence.
pub fn encode_plain(bits: &[u8], m: usize) -> Result<(RmPair, RmSequence), Error> {
    expect_len(bits, RmPair::bit_count(m))?;
    let pair = RmPair::from_bits(m, bits)?;
    let seq = rm_sequence(&pair);
    Ok((pair, seq))
}

/// Inverse of [`encode_plain`]: read the payload bits back from a pair.
pub fn decode_pair(pair: &RmPair) -> Vec<u8> {
    pair.to_bits()
}

/// Insert the check bit into a pair-payload bit vector.
fn insert_check_bit(pair_payload: &[u8], check: u8, q: usize) -> RmPair {
    let mut ser = Vec::with_capacity(RmPair::bit_count(q));
    ser.extend_from_slice(&pair_payload[..CHECK_BIT_POS]);
    ser.push(check);
    ser.extend_from_slice(&pair_payload[CHECK_BIT_POS..]);
    RmPair::from_bits(q, &ser).expect("payload bits are binary")
}

/// Pair-payload bits with the check bit stripped.
fn strip_check_bit(pair: &RmPair) -> (Vec<u8>, u8) {
    let mut ser = pair.to_bits();
    let check = ser.remove(CHECK_BIT_POS);
    (ser, check)
}

/// Encode one patch worth of payload bits into a sparse codeword.
///
/// With message passing the codeword occupies a primary slot (selected by
/// the trailing `p` payload bits) and a secondary slot offset by the
/// translate, distinguished by the check bit; a zero translate degenerates
/// to a single transmission with check bit 0. Without message passing a
/// single slot is occupied.
pub fn encode_slotted(bits: &[u8], cfg: &SlotConfig) -> Result<SparseCodeword, Error> {
    expect_len(bits, cfg.patch_bits())?;
    for &bit in bits {
        if bit > 1 {
            return Err(Error::NotABit { value: bit });
        }
    }
    let (pair_payload, slot_bits) = bits.split_at(bits.len() - cfg.p);
    let slot = bits_to_index(slot_bits) as usize;
    let slots = if cfg.message_passing {
        let translate = bits_to_index(&pair_payload[..cfg.p]) as usize;
        let primary = insert_check_bit(pair_payload, 0, cfg.q);
        if translate == 0 {
            vec![(slot, rm_sequence(&primary))]
        } else {
            let partner = (slot + translate) % cfg.slot_count();
            let secondary = insert_check_bit(pair_payload, 1, cfg.q);
            vec![(slot, rm_sequence(&primary)), (partner, rm_sequence(&secondary))]
        }
    } else {
        let pair = RmPair::from_bits(cfg.q, pair_payload)?;
        vec![(slot, rm_sequence(&pair))]
    };
    Ok(SparseCodeword { slot_count: cfg.slot_count(), slots })
}

/// Recover a patch's payload bits from a pair decoded in slot `slot`.
///
/// With message passing the check bit tells whether the decoding slot was
/// the primary or the secondary; the primary slot index is re-derived from
/// the translate before being appended to the payload.
pub fn slotted_payload(pair: &RmPair, slot: usize, cfg: &SlotConfig) -> Result<Vec<u8>, Error> {
    if pair.m() != cfg.q {
        return Err(Error::LengthMismatch { expected: cfg.q, got: pair.m() });
    }
    if slot >= cfg.slot_count() {
        return Err(Error::IndexOutOfRange { value: slot as u64, limit: cfg.slot_count() as u64 });
    }
    let mut payload;
    if cfg.message_passing {
        let (pair_payload, check) = strip_check_bit(pair);
        let translate = bits_to_index(&pair_payload[..cfg.p]) as usize;
        let primary = if check == 0 {
            slot
        } else {
            (slot + cfg.slot_count() - translate) % cfg.slot_count()
        };
        payload = pair_payload;
        payload.extend(binary_expansion(primary as u64, cfg.p)?);
    } else {
        payload = pair.to_bits();
        payload.extend(binary_expansion(slot as u64, cfg.p)?);
    }
    Ok(payload)
}

/// Pseudo-random parity matrices shared by encoder and stitcher.
///
/// Entry `i` (for patch `i + 1`) is an `l_{i+1} x ((i+1) * patch_bits)`
/// binary matrix drawn from a ChaCha stream seeded with `seed`.
fn parity_matrices(cfg: &SlotConfig, seed: u64) -> Vec<Vec<Vec<u8>>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (1..cfg.subblock_count())
        .map(|i| {
            let cols = i * cfg.patch_bits();
            (0..cfg.parity_bits[i])
                .map(|_| (0..cols).map(|_| (rng.next_u32() & 1) as u8).collect())
                .collect()
        })
        .collect()
}

fn parity_of(matrix: &[Vec<u8>], bits: &[u8]) -> Vec<u8> {
    matrix
        .iter()
        .map(|row| row.iter().zip(bits).fold(0u8, |acc, (&m, &b)| acc ^ (m & b)))
        .collect()
}

/// Split a payload across `2^r` sub-blocks, appending seeded random parity
/// bits to every patch after the first, and slot-encode each patch.
pub fn encode_patched(
    bits: &[u8],
    cfg: &SlotConfig,
    seed: u64,
) -> Result<Vec<SparseCodeword>, Error> {
    expect_len(bits, cfg.payload_bits())?;
    let matrices = parity_matrices(cfg, seed);
    let mut codewords = Vec::with_capacity(cfg.subblock_count());
    let mut history: Vec<u8> = Vec::with_capacity(cfg.subblock_count() * cfg.patch_bits());
    let mut consumed = 0;
    for i in 0..cfg.subblock_count() {
        let info_len = cfg.patch_bits() - cfg.parity_bits[i];
        let mut patch = bits[consumed..consumed + info_len].to_vec();
        consumed += info_len;
        if i > 0 {
            patch.extend(parity_of(&matrices[i - 1], &history));
        }
        codewords.push(encode_slotted(&patch, cfg)?);
        history.extend_from_slice(&patch);
    }
    Ok(codewords)
}

/// A payload reassembled from one decoded patch per sub-block.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StitchedMessage {
    /// The recovered payload bits.
    pub payload: Vec<u8>,
    /// Index into each sub-block's candidate list.
    pub parts: Vec<usize>,
}

/// Default cap on concurrent partial paths during stitching.
pub const DEFAULT_STITCH_BEAM: usize = 64;

/// Cross sub-block candidates, keeping only paths whose parity checks hold.
///
/// `candidates[i]` lists the patch-bit vectors decoded in sub-block `i`. At
/// most `beam` partial paths survive each extension (earliest candidates
/// kept), which bounds the combinatorics when a patch carries no parity.
pub fn stitch_patches(
    candidates: &[Vec<Vec<u8>>],
    cfg: &SlotConfig,
    seed: u64,
    beam: usize,
) -> Result<Vec<StitchedMessage>, Error> {
    if candidates.len() != cfg.subblock_count() {
        return Err(Error::LengthMismatch {
            expected: cfg.subblock_count(),
            got: candidates.len(),
        });
    }
    for list in candidates {
        for bits in list {
            expect_len(bits, cfg.patch_bits())?;
        }
    }
    let matrices = parity_matrices(cfg, seed);
    // Each path carries the candidate index chosen per level plus the
    // concatenated patch bits seen so far.
    let mut paths: Vec<(Vec<usize>, Vec<u8>)> = vec![(Vec::new(), Vec::new())];
    for (i, list) in candidates.iter().enumerate() {
        let mut next = Vec::new();
        for (parts, history) in &paths {
            for (ci, cand) in list.iter().enumerate() {
                if i > 0 {
                    let expect = parity_of(&matrices[i - 1], history);
                    let tail = &cand[cfg.patch_bits() - cfg.parity_bits[i]..];
                    if tail != expect {
                        continue;
                    }
                }
                if next.len() >= beam.max(1) {
                    break;
                }
                let mut parts = parts.clone();
                parts.push(ci);
                let mut history = history.clone();
                history.extend_from_slice(cand);
                next.push((parts, history));
            }
            if next.len() >= beam.max(1) {
                break;
            }
        }
        paths = next;
        if paths.is_empty() {
            return Ok(Vec::new());
        }
    }
    Ok(paths
        .into_iter()
        .map(|(parts, history)| {
            let mut payload = Vec::with_capacity(cfg.payload_bits());
            for (i, chunk) in history.chunks(cfg.patch_bits()).enumerate() {
                payload.extend_from_slice(&chunk[..cfg.patch_bits() - cfg.parity_bits[i]]);
            }
            StitchedMessage { payload, parts }
        })
        .collect())
}

/// A full-frame transmit waveform in any of the supported encodings.
#[derive(Debug, Clone, PartialEq)]
pub enum TxWaveform {
    /// One full-length sequence.
    Plain(RmSequence),
    /// One sub-block of sparse slots covering the frame (`r = 0`).
    Slotted(SparseCodeword),
    /// One sparse codeword per sub-block, concatenated.
    Patched(Vec<SparseCodeword>),
}

impl TxWaveform {
    pub fn frame_len(&self) -> usize {
        match self {
            TxWaveform::Plain(seq) => seq.len(),
            TxWaveform::Slotted(cw) => cw.len(),
            TxWaveform::Patched(cws) => cws.iter().map(SparseCodeword::len).sum(),
        }
    }

    /// Accumulate `weight * waveform` into a frame buffer.
    pub fn add_scaled_into(&self, out: &mut [Complex64], weight: Complex64) {
        match self {
            TxWaveform::Plain(seq) => {
                for (d, s) in out.iter_mut().zip(seq.samples()) {
                    *d += weight * s;
                }
            }
            TxWaveform::Slotted(cw) => cw.add_scaled_into(out, weight),
            TxWaveform::Patched(cws) => {
                let mut at = 0;
                for cw in cws {
                    cw.add_scaled_into(&mut out[at..at + cw.len()], weight);
                    at += cw.len();
                }
            }
        }
    }
}

/// Encode a payload under the given frame layout, picking the plain, slotted,
/// or patched form as the configuration demands.
pub fn encode_for_config(bits: &[u8], cfg: &SlotConfig, seed: u64) -> Result<TxWaveform, Error> {
    if cfg.p == 0 && cfg.r == 0 {
        let (_, seq) = encode_plain(bits, cfg.m)?;
        Ok(TxWaveform::Plain(seq))
    } else if cfg.r == 0 {
        Ok(TxWaveform::Slotted(encode_slotted(bits, cfg)?))
    } else {
        Ok(TxWaveform::Patched(encode_patched(bits, cfg, seed)?))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_bits(n: usize, rng: &mut ChaCha8Rng) -> Vec<u8> {
        (0..n).map(|_| u8::from(rng.random::<bool>())).collect()
    }

    #[test]
    fn capacity_formulas() {
        let with_check = SlotConfig::new(12, 2, 0, vec![], true).unwrap();
        assert_eq!(with_check.patch_bits(), 66);
        assert_eq!(with_check.payload_bits(), 66);
        let without = SlotConfig::new(12, 2, 0, vec![], false).unwrap();
        assert_eq!(without.payload_bits(), 67);

        let patched = SlotConfig::new(14, 3, 1, vec![0, 15], true).unwrap();
        assert_eq!(patched.payload_bits(), 2 * (10 * 13 / 2 + 3 - 1) - 15);
        let patched2 = SlotConfig::new(14, 2, 2, vec![0, 10, 10, 15], true).unwrap();
        assert_eq!(patched2.payload_bits(), 4 * (10 * 13 / 2 + 2 - 1) - 35);
    }

    #[test]
    fn config_rejects_bad_shapes() {
        assert!(SlotConfig::new(4, 3, 0, vec![], true).is_err()); // q = 1
        assert!(SlotConfig::new(12, 2, 1, vec![1, 5], true).is_err()); // leading parity
        assert!(SlotConfig::new(12, 2, 1, vec![0], true).is_err()); // wrong parity count
        assert!(SlotConfig::new(12, 20, 0, vec![], true).is_err()); // p + r > m
    }

    #[test]
    fn encode_plain_zero_payload() {
        let (pair, seq) = encode_plain(&[0; 5], 2).unwrap();
        assert_eq!(pair, RmPair::zero(2));
        assert!(seq.samples().iter().all(|z| *z == Complex64::new(1.0, 0.0)));
        assert!(encode_plain(&[0; 4], 2).is_err());
    }

    #[test]
    fn encode_plain_is_injective_for_m2() {
        let mut seen = std::collections::HashSet::new();
        for code in 0..32u64 {
            let bits = binary_expansion(code, 5).unwrap();
            let (_, seq) = encode_plain(&bits, 2).unwrap();
            let key: Vec<(i64, i64)> =
                seq.samples().iter().map(|z| (z.re as i64, z.im as i64)).collect();
            assert!(seen.insert(key));
        }
        assert_eq!(seen.len(), 32);
    }

    #[test]
    fn plain_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        for _ in 0..50 {
            let m = rng.random_range(2..=12usize);
            let bits = random_bits(RmPair::bit_count(m), &mut rng);
            let (pair, _) = encode_plain(&bits, m).unwrap();
            assert_eq!(decode_pair(&pair), bits);
        }
    }

    #[test]
    fn slotted_two_slot_structure() {
        let cfg = SlotConfig::single_block(8, 2, true).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..200 {
            let bits = random_bits(cfg.patch_bits(), &mut rng);
            let cw = encode_slotted(&bits, &cfg).unwrap();
            let translate = bits_to_index(&bits[..cfg.p()]) as usize;
            let primary = bits_to_index(&bits[bits.len() - cfg.p()..]) as usize;
            if translate == 0 {
                assert_eq!(cw.slots().len(), 1);
                assert_eq!(cw.slots()[0].0, primary);
            } else {
                assert_eq!(cw.slots().len(), 2);
                assert_eq!(cw.slots()[0].0, primary);
                assert_eq!(cw.slots()[1].0, (primary + translate) % cfg.slot_count());
            }
            // Both copies decode back to the same payload.
            for (slot, seq) in cw.slots() {
                let pair = pair_from_noiseless_sequence(seq);
                assert_eq!(slotted_payload(&pair, *slot, &cfg).unwrap(), bits);
            }
        }
    }

    #[test]
    fn slotted_copies_differ_only_in_check_bit() {
        let cfg = SlotConfig::single_block(9, 3, true).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for _ in 0..100 {
            let mut bits = random_bits(cfg.patch_bits(), &mut rng);
            bits[0] = 1; // nonzero translate
            let cw = encode_slotted(&bits, &cfg).unwrap();
            assert_eq!(cw.slots().len(), 2);
            let a = insert_check_bit(&bits[..bits.len() - cfg.p()], 0, cfg.q());
            let b = insert_check_bit(&bits[..bits.len() - cfg.p()], 1, cfg.q());
            let (pa, ca) = strip_check_bit(&a);
            let (pb, cb) = strip_check_bit(&b);
            assert_eq!(pa, pb);
            assert_eq!((ca, cb), (0, 1));
        }
    }

    #[test]
    fn slotted_without_message_passing_round_trip() {
        let cfg = SlotConfig::single_block(8, 2, false).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        for _ in 0..100 {
            let bits = random_bits(cfg.patch_bits(), &mut rng);
            let cw = encode_slotted(&bits, &cfg).unwrap();
            assert_eq!(cw.slots().len(), 1);
            let (slot, seq) = &cw.slots()[0];
            let pair = RmPair::from_bits(cfg.q(), &bits[..bits.len() - cfg.p()]).unwrap();
            assert_eq!(rm_sequence(&pair).samples(), seq.samples());
            assert_eq!(slotted_payload(&pair, *slot, &cfg).unwrap(), bits);
        }
    }

    #[test]
    fn patched_round_trip_via_stitching() {
        let mut rng = ChaCha8Rng::seed_from_u64(14);
        for (m, p, r, parity) in [
            (9usize, 2usize, 1usize, vec![0usize, 7]),
            (10, 2, 2, vec![0, 4, 4, 6]),
        ] {
            let cfg = SlotConfig::new(m, p, r, parity.clone(), true).unwrap();
            for _ in 0..40 {
                let bits = random_bits(cfg.payload_bits(), &mut rng);
                let seed = rng.random::<u64>();
                let codewords = encode_patched(&bits, &cfg, seed).unwrap();
                assert_eq!(codewords.len(), cfg.subblock_count());
                // Noiseless per-patch decode: read the patch bits straight
                // back off the primary slot of each codeword.
                let candidates: Vec<Vec<Vec<u8>>> = codewords
                    .iter()
                    .map(|cw| {
                        let (slot, seq) = &cw.slots()[0];
                        let pair = pair_from_noiseless_sequence(seq);
                        vec![slotted_payload(&pair, *slot, &cfg).unwrap()]
                    })
                    .collect();
                let out = stitch_patches(&candidates, &cfg, seed, DEFAULT_STITCH_BEAM).unwrap();
                assert_eq!(out.len(), 1);
                assert_eq!(out[0].payload, bits);
                assert_eq!(out[0].parts, vec![0; cfg.subblock_count()]);
            }
        }
    }

    fn unit_to_scalars(unit: Complex64) -> (u8, u8) {
        match (unit.re.round() as i64, unit.im.round() as i64) {
            (1, 0) => (0, 0),
            (-1, 0) => (1, 0),
            (0, 1) => (0, 1),
            _ => (1, 1),
        }
    }

    /// Exact pair recovery from a noiseless sequence via the subsequence
    /// identities (independent of the decoder module): the odd/even sample
    /// ratios expose the modulation of each layer, whose constant part gives
    /// `(b_s, beta_s)` and whose sign pattern gives `alpha`.
    fn pair_from_noiseless_sequence(seq: &RmSequence) -> RmPair {
        let m = seq.m();
        let mut samples = seq.samples().to_vec();
        let mut p = RmPair::zero(m);
        let mut b = vec![0u8; m];
        for s in (2..=m).rev() {
            let half = 1usize << (s - 1);
            let v: Vec<Complex64> =
                (0..half).map(|j| samples[2 * j + 1] / samples[2 * j]).collect();
            let (b_s, beta_s) = unit_to_scalars(v[0]);
            b[s - 1] = b_s;
            p = p.with_p_entry(s - 1, s - 1, beta_s);
            // alpha[k] is the sign flip at the index whose expansion has a
            // single 1 in component k.
            for k in 0..s - 1 {
                if (v[1usize << (s - 2 - k)] / v[0]).re < 0.0 {
                    p = p.with_p_entry(k, s - 1, 1);
                }
            }
            samples = (0..half).map(|j| samples[2 * j]).collect();
        }
        let (b1, beta1) = unit_to_scalars(samples[1] / samples[0]);
        b[0] = b1;
        p = p.with_p_entry(0, 0, beta1);
        let flat: Vec<u8> = (0..m * m).map(|i| p.p(i / m, i % m)).collect();
        RmPair::from_parts(m, flat, b).unwrap()
    }

    #[test]
    fn noiseless_pair_recovery_helper_is_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(15);
        for _ in 0..100 {
            let m = rng.random_range(2..=8usize);
            let pair = RmPair::random(m, &mut rng);
            assert_eq!(pair_from_noiseless_sequence(&rm_sequence(&pair)), pair);
        }
    }

    #[test]
    fn stitch_rejects_corrupt_parity() {
        let cfg = SlotConfig::new(9, 2, 1, vec![0, 7], true).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(16);
        let bits = random_bits(cfg.payload_bits(), &mut rng);
        let seed = 99;
        let codewords = encode_patched(&bits, &cfg, seed).unwrap();
        let mut candidates: Vec<Vec<Vec<u8>>> = codewords
            .iter()
            .map(|cw| {
                let (slot, seq) = &cw.slots()[0];
                vec![slotted_payload(&pair_from_noiseless_sequence(seq), *slot, &cfg).unwrap()]
            })
            .collect();
        // Flip one parity bit of the second patch.
        let last = candidates[1][0].len() - 1;
        candidates[1][0][last] ^= 1;
        let out = stitch_patches(&candidates, &cfg, seed, DEFAULT_STITCH_BEAM).unwrap();
        assert!(out.is_empty());
    }

    #[test]
    fn stitch_matches_brute_force_on_three_messages() {
        let cfg = SlotConfig::new(9, 2, 1, vec![0, 7], true).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let seed = 1234;
        let payloads: Vec<Vec<u8>> =
            (0..3).map(|_| random_bits(cfg.payload_bits(), &mut rng)).collect();
        let mut candidates: Vec<Vec<Vec<u8>>> = vec![Vec::new(); cfg.subblock_count()];
        for payload in &payloads {
            for (i, cw) in encode_patched(payload, &cfg, seed).unwrap().iter().enumerate() {
                let (slot, seq) = &cw.slots()[0];
                candidates[i]
                    .push(slotted_payload(&pair_from_noiseless_sequence(seq), *slot, &cfg).unwrap());
            }
        }
        // Independent oracle: enumerate all cross pairs and test parity.
        let matrices = parity_matrices(&cfg, seed);
        let mut expected = Vec::new();
        for a in &candidates[0] {
            for b in &candidates[1] {
                let parity = parity_of(&matrices[0], a);
                if b[cfg.patch_bits() - cfg.parity_bits()[1]..] == parity[..] {
                    let mut payload = a.clone();
                    payload.extend_from_slice(&b[..cfg.patch_bits() - cfg.parity_bits()[1]]);
                    expected.push(payload);
                }
            }
        }
        assert_eq!(expected.len(), 3, "parity collision in the constructed instance");
        let out = stitch_patches(&candidates, &cfg, seed, DEFAULT_STITCH_BEAM).unwrap();
        let got: Vec<Vec<u8>> = out.iter().map(|s| s.payload.clone()).collect();
        assert_eq!(got.len(), 3);
        for payload in &payloads {
            assert!(got.contains(payload));
        }
        for e in &expected {
            assert!(got.contains(e));
        }
    }

    #[test]
    fn degenerate_patching_matches_slotted() {
        let cfg = SlotConfig::new(8, 2, 0, vec![], true).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(18);
        let bits = random_bits(cfg.payload_bits(), &mut rng);
        let patched = encode_patched(&bits, &cfg, 7).unwrap();
        assert_eq!(patched.len(), 1);
        assert_eq!(patched[0], encode_slotted(&bits, &cfg).unwrap());
    }

    #[test]
    fn waveform_lengths_and_superposition() {
        let cfg = SlotConfig::new(8, 2, 1, vec![0, 5], true).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(19);
        let bits = random_bits(cfg.payload_bits(), &mut rng);
        let wf = encode_for_config(&bits, &cfg, 3).unwrap();
        assert_eq!(wf.frame_len(), cfg.frame_len());
        let mut buf = vec![Complex64::new(0.0, 0.0); cfg.frame_len()];
        wf.add_scaled_into(&mut buf, Complex64::new(2.0, 0.0));
        let occupied = buf.iter().filter(|z| z.norm() > 0.0).count();
        // Each patch occupies one or two slots of 2^q samples.
        assert!(occupied % cfg.slot_len() == 0 && occupied >= 2 * cfg.slot_len());
        assert!(buf.iter().all(|z| z.norm() == 0.0 || (z.norm() - 2.0).abs() < 1e-12));
    }
}
