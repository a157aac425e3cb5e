//! Active-device detection and channel estimation.
//!
//! One detection walks the layer chain: fold the received vector into
//! conjugate products of adjacent samples, take the Walsh-Hadamard
//! transform, read the dominant frequency and its polarity, strip the
//! estimated modulation, and halve the sequence; the last two samples give
//! the remaining scalars and the channel estimate. Successive interference
//! cancellation repeats this, subtracting each reconstructed codeword, and
//! list decoding branches over the strongest spectrum candidates in the top
//! layers keeping the completed path of minimum residual energy.
//!
//! Channel estimates are carried as the product `sqrt(gamma) * h`; the
//! receiver never needs the two factors separately.

use std::collections::HashSet;

use num_complex::Complex64;

use crate::codec::SlotConfig;
use crate::error::Error;
use crate::rm_core::{
    binary_expansion, bits_to_index, fwht_in_place, polarity_unit, rm_sequence, RmPair, RmSequence,
};

/// One recovered message.
#[derive(Debug, Clone, PartialEq)]
pub struct DecodedMessage {
    pub pair: RmPair,
    /// Scaled channel estimate `sqrt(gamma) * h_hat`.
    pub h_hat: Complex64,
    /// The reconstructed codeword of `pair`.
    pub sequence: RmSequence,
    /// Slot the message was decoded in, when slotting is used.
    pub slot: Option<usize>,
    /// `||y - h_hat * sequence||^2` against the vector it was decoded from.
    pub residual_energy: f64,
}

/// Per-layer branch counts for list decoding, topmost layer first.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ListPlan {
    widths: Vec<usize>,
}

impl ListPlan {
    pub fn new(widths: Vec<usize>) -> Result<Self, Error> {
        if widths.is_empty() {
            return Err(Error::InvalidConfig("list plan needs at least one layer".into()));
        }
        if widths.contains(&0) {
            return Err(Error::InvalidConfig("list widths must be >= 1".into()));
        }
        Ok(ListPlan { widths })
    }

    /// The greedy plan: a single path.
    pub fn single() -> Self {
        ListPlan { widths: vec![1] }
    }

    pub fn widths(&self) -> &[usize] {
        &self.widths
    }

    /// Total number of decoding paths.
    pub fn path_count(&self) -> usize {
        self.widths.iter().product()
    }
}

fn quadrant(peak: Complex64) -> (u8, u8) {
    if peak.re >= peak.im.abs() {
        (0, 0)
    } else if -peak.re >= peak.im.abs() {
        (1, 0)
    } else if peak.im > peak.re.abs() {
        (0, 1)
    } else {
        (1, 1)
    }
}

/// Map a spectrum peak to `(b_s, beta_s)` by its quadrant; ties fall toward
/// the real axis so the decision is deterministic.
pub fn polarity_decision(peak: Complex64) -> Result<(u8, u8), Error> {
    if peak.re == 0.0 && peak.im == 0.0 {
        return Err(Error::ZeroPeak);
    }
    Ok(quadrant(peak))
}

/// Conjugate-fold a length-`2^s` vector and return all Walsh coefficients
/// ranked by magnitude (ties broken toward the lower index).
pub fn fold_step(y: &[Complex64]) -> Result<Vec<(usize, Complex64)>, Error> {
    if y.len() < 4 {
        return Err(Error::InputTooShort { len: y.len() });
    }
    if !y.len().is_power_of_two() {
        return Err(Error::LengthNotPowerOfTwo { len: y.len() });
    }
    let half = y.len() / 2;
    let mut spectrum: Vec<Complex64> = (0..half).map(|j| y[2 * j + 1] * y[2 * j].conj()).collect();
    fwht_in_place(&mut spectrum)?;
    let mut ranked: Vec<(usize, Complex64)> = spectrum.into_iter().enumerate().collect();
    ranked.sort_by(|a, b| {
        b.1.norm_sqr().partial_cmp(&a.1.norm_sqr()).unwrap().then(a.0.cmp(&b.0))
    });
    Ok(ranked)
}

/// Strip an estimated modulation from a vector, halving its length:
/// `y'[j] = (y[2j] + conj(v[j]) * y[2j+1]) / 2`.
pub fn layer_reduce(y: &[Complex64], v_hat: &[Complex64]) -> Result<Vec<Complex64>, Error> {
    if y.len() != 2 * v_hat.len() {
        return Err(Error::LengthMismatch { expected: 2 * v_hat.len(), got: y.len() });
    }
    Ok((0..v_hat.len()).map(|j| (y[2 * j] + v_hat[j].conj() * y[2 * j + 1]) * 0.5).collect())
}

/// Index (in the folded spectrum) and value of the `rank`-th largest
/// coefficient; `rank` is clamped to the spectrum size.
fn ranked_peak(spectrum: &[Complex64], rank: usize) -> (usize, Complex64) {
    let keep = rank.min(spectrum.len() - 1) + 1;
    // Tiny insertion-sorted top list; `keep` is at most a few entries.
    let mut best: Vec<(f64, usize)> = Vec::with_capacity(keep + 1);
    for (i, z) in spectrum.iter().enumerate() {
        let mag = z.norm_sqr();
        if best.len() == keep && mag <= best[keep - 1].0 {
            continue;
        }
        let pos = best.partition_point(|&(bm, _)| bm >= mag);
        best.insert(pos, (mag, i));
        if best.len() > keep {
            best.pop();
        }
    }
    let idx = best[keep - 1].1;
    (idx, spectrum[idx])
}

/// Scratch buffers reused across paths and cancellation iterations.
struct Scratch {
    cur: Vec<Complex64>,
    spectrum: Vec<Complex64>,
}

impl Scratch {
    fn new(n: usize) -> Self {
        Scratch { cur: Vec::with_capacity(n), spectrum: Vec::with_capacity(n / 2) }
    }
}

/// Walk the whole layer chain once, taking the `choices[t]`-th ranked
/// candidate at the `t`-th layer from the top and the argmax below.
fn run_path(y: &[Complex64], choices: &[usize], scratch: &mut Scratch) -> (RmPair, Complex64) {
    let m = y.len().trailing_zeros() as usize;
    let cur = &mut scratch.cur;
    cur.clear();
    cur.extend_from_slice(y);
    let mut p_flat = vec![0u8; m * m];
    let mut b = vec![0u8; m];
    for s in (2..=m).rev() {
        let half = 1usize << (s - 1);
        let spectrum = &mut scratch.spectrum;
        spectrum.clear();
        spectrum.extend((0..half).map(|j| cur[2 * j + 1] * cur[2 * j].conj()));
        fwht_in_place(spectrum).expect("power-of-two by construction");
        let rank = choices.get(m - s).copied().unwrap_or(0);
        let (alpha_idx, peak) = ranked_peak(spectrum, rank);
        // An identically-zero peak carries no polarity; fall back to (0,0)
        // so degenerate inputs still produce a well-formed (zero) pair.
        let (b_s, beta_s) = polarity_decision(peak).unwrap_or((0, 0));
        b[s - 1] = b_s;
        p_flat[(s - 1) * m + (s - 1)] = beta_s;
        for k in 0..s - 1 {
            let bit = ((alpha_idx >> (s - 2 - k)) & 1) as u8;
            p_flat[k * m + (s - 1)] = bit;
            p_flat[(s - 1) * m + k] = bit;
        }
        // Fused modulation strip: v[j] = unit * (-1)^(alpha . a_j).
        let unit_conj = polarity_unit(b_s, beta_s).conj();
        for j in 0..half {
            let sign =
                if ((alpha_idx & j).count_ones() & 1) == 0 { unit_conj } else { -unit_conj };
            cur[j] = (cur[2 * j] + sign * cur[2 * j + 1]) * 0.5;
        }
        cur.truncate(half);
    }
    let t = cur[0].conj() * cur[1];
    let (b_1, beta_1) = polarity_decision(t).unwrap_or((0, 0));
    b[0] = b_1;
    p_flat[0] = beta_1;
    let h_hat = (cur[0] + polarity_unit(b_1, beta_1).conj() * cur[1]) * 0.5;
    let pair = RmPair::from_parts(m, p_flat, b).expect("assembled entries are bits");
    (pair, h_hat)
}

fn residual_energy(y: &[Complex64], h_hat: Complex64, seq: &RmSequence) -> f64 {
    y.iter().zip(seq.samples()).map(|(yi, ci)| (yi - h_hat * ci).norm_sqr()).sum()
}

fn check_frame(y: &[Complex64]) -> Result<usize, Error> {
    if y.len() < 4 {
        return Err(Error::InputTooShort { len: y.len() });
    }
    if !y.len().is_power_of_two() {
        return Err(Error::LengthNotPowerOfTwo { len: y.len() });
    }
    Ok(y.len().trailing_zeros() as usize)
}

/// Greedy single-path detection of the strongest message in `y`.
pub fn detect_single_path(y: &[Complex64]) -> Result<DecodedMessage, Error> {
    detect_list(y, &ListPlan::single())
}

/// List detection: branch over the top layers per `plan`, complete each path
/// greedily, and return the path of minimum residual energy. Paths are
/// visited in rank order, so exact residual ties keep the greediest path.
pub fn detect_list(y: &[Complex64], plan: &ListPlan) -> Result<DecodedMessage, Error> {
    check_frame(y)?;
    let mut scratch = Scratch::new(y.len());
    detect_list_with(y, plan, &mut scratch)
}

fn detect_list_with(
    y: &[Complex64],
    plan: &ListPlan,
    scratch: &mut Scratch,
) -> Result<DecodedMessage, Error> {
    let mut choices = vec![0usize; plan.widths().len()];
    let mut best: Option<DecodedMessage> = None;
    'paths: loop {
        let (pair, h_hat) = run_path(y, &choices, scratch);
        let sequence = rm_sequence(&pair);
        let residual = residual_energy(y, h_hat, &sequence);
        if best.as_ref().is_none_or(|b| residual < b.residual_energy) {
            best = Some(DecodedMessage {
                pair,
                h_hat,
                sequence,
                slot: None,
                residual_energy: residual,
            });
        }
        // Advance the mixed-radix path counter, topmost layer slowest.
        for t in (0..choices.len()).rev() {
            choices[t] += 1;
            if choices[t] < plan.widths()[t] {
                continue 'paths;
            }
            choices[t] = 0;
        }
        break;
    }
    Ok(best.expect("at least one path"))
}

/// Default residual-energy stop threshold when only in-cell devices
/// transmit: `(2^(len_exp/2) + 2)^2`, about four standard deviations above
/// the pure-noise frame energy.
pub fn epsilon_incell(len_exp: usize) -> f64 {
    let n = (1u64 << len_exp) as f64;
    let root = n.sqrt() + 2.0;
    root * root
}

/// Default stop threshold with out-of-cell interference of total power
/// `sigma2`: `2 * sigma2 + 2^(len_exp + 1)`.
pub fn epsilon_outcell(len_exp: usize, sigma2: f64) -> f64 {
    2.0 * sigma2 + (1u64 << (len_exp + 1)) as f64
}

/// Iterative detection with successive interference cancellation.
///
/// Repeats list detection, subtracting each reconstructed message, until
/// `k_max` messages are recovered or the residual energy drops to
/// `epsilon`. Messages are returned in detection order; each one's
/// `residual_energy` is measured against the signal it was decoded from.
pub fn algorithm1(
    y: &[Complex64],
    k_max: usize,
    epsilon: f64,
    plan: &ListPlan,
) -> Result<Vec<DecodedMessage>, Error> {
    check_frame(y)?;
    let mut y = y.to_vec();
    let mut scratch = Scratch::new(y.len());
    let mut out = Vec::new();
    while out.len() < k_max && y.iter().map(|z| z.norm_sqr()).sum::<f64>() > epsilon {
        let msg = detect_list_with(&y, plan, &mut scratch)?;
        for (yi, ci) in y.iter_mut().zip(msg.sequence.samples()) {
            *yi -= msg.h_hat * ci;
        }
        out.push(msg);
    }
    Ok(out)
}

fn dedup_key(pair: &RmPair, slot: usize, cfg: &SlotConfig) -> Vec<u8> {
    if cfg.message_passing() {
        // Mask the check bit so a message and its propagated copy collide.
        pair.with_p_entry(0, 1, 0).to_bits()
    } else {
        let mut key = pair.to_bits();
        key.extend(binary_expansion(slot as u64, cfg.p()).expect("slot in range"));
        key
    }
}

/// Slot-by-slot detection with message passing.
///
/// Each slot first has every already-known message assigned to it
/// subtracted (reducing that slot's detection budget), then runs
/// cancellation decoding. Newly found messages are recorded once,
/// deduplicated on the pair with the check bit masked, and their
/// check-flipped copy is queued for cancellation in the partner slot named
/// by the translate. Without message passing the slots are decoded
/// independently.
pub fn algorithm2(
    slots: &[Vec<Complex64>],
    cfg: &SlotConfig,
    kbar_max: usize,
    epsilon: f64,
    plan: &ListPlan,
) -> Result<Vec<DecodedMessage>, Error> {
    if slots.len() != cfg.slot_count() {
        return Err(Error::LengthMismatch { expected: cfg.slot_count(), got: slots.len() });
    }
    for slot in slots {
        if slot.len() != cfg.slot_len() {
            return Err(Error::LengthMismatch { expected: cfg.slot_len(), got: slot.len() });
        }
    }
    let mut outputs: Vec<DecodedMessage> = Vec::new();
    let mut known: HashSet<Vec<u8>> = HashSet::new();
    // Propagated copies waiting to be cancelled: (slot, codeword, gain).
    let mut pending: Vec<(usize, RmSequence, Complex64)> = Vec::new();
    for (i, slot_rx) in slots.iter().enumerate() {
        let mut y = slot_rx.clone();
        let mut cancelled = 0usize;
        for (slot, seq, h) in &pending {
            if *slot == i {
                for (yi, ci) in y.iter_mut().zip(seq.samples()) {
                    *yi -= h * ci;
                }
                cancelled += 1;
            }
        }
        let budget = kbar_max.saturating_sub(cancelled);
        for msg in algorithm1(&y, budget, epsilon, plan)? {
            if !known.insert(dedup_key(&msg.pair, i, cfg)) {
                continue;
            }
            if cfg.message_passing() {
                let check = msg.pair.p(0, 1);
                let pair_payload = {
                    let mut bits = msg.pair.to_bits();
                    bits.remove(crate::codec::CHECK_BIT_POS);
                    bits
                };
                let translate = bits_to_index(&pair_payload[..cfg.p()]) as usize;
                if translate != 0 {
                    let partner = if check == 0 {
                        (i + translate) % cfg.slot_count()
                    } else {
                        (i + cfg.slot_count() - translate) % cfg.slot_count()
                    };
                    let flipped = msg.pair.with_p_entry(0, 1, 1 - check);
                    pending.push((partner, rm_sequence(&flipped), msg.h_hat));
                }
            }
            outputs.push(DecodedMessage { slot: Some(i), ..msg });
        }
    }
    Ok(outputs)
}
