//! Two-phase error metrics over decoded message sets.
//!
//! Phase 1 assumes the receiver does not know the in-cell count: false-alarm
//! and miss rates over the raw output set `A` versus the in-cell truth `A*`.
//! Phase 2 grants the receiver the realized `K*` and keeps the `K*` outputs
//! of strongest estimated gain; success rate and channel-estimation error
//! are measured on that selection. Message identity is the payload bit
//! string throughout.

use std::collections::HashSet;

use num_complex::Complex64;

/// One decoded message as the harness sees it: payload identity plus the
/// scaled channel estimate it was recovered with.
#[derive(Debug, Clone, PartialEq)]
pub struct OutputMessage {
    pub payload: Vec<u8>,
    /// `sqrt(gamma) * h_hat`.
    pub h_hat: Complex64,
}

/// Per-trial counters; rate accessors return NaN where the paper's
/// definition has an empty denominator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrialMetrics {
    pub n_output: usize,
    pub n_incell: usize,
    pub false_alarms: usize,
    pub misses: usize,
    pub phase2_successes: usize,
    pub channel_errors: usize,
    pub wall_s: f64,
}

impl TrialMetrics {
    /// `|A \ A*| / |A|`, defined as 0 for an empty output.
    pub fn false_alarm_rate(&self) -> f64 {
        if self.n_output == 0 {
            0.0
        } else {
            self.false_alarms as f64 / self.n_output as f64
        }
    }

    /// `|A* \ A| / |A*|`; NaN when no device was in-cell.
    pub fn miss_rate(&self) -> f64 {
        self.misses as f64 / self.n_incell as f64
    }

    /// Phase-2 per-device success probability; NaN when no device was
    /// in-cell.
    pub fn success_rate(&self) -> f64 {
        self.phase2_successes as f64 / self.n_incell as f64
    }

    /// Fraction of correctly decoded messages whose channel estimate missed
    /// the threshold; NaN when nothing was correctly decoded.
    pub fn channel_error_rate(&self) -> f64 {
        self.channel_errors as f64 / self.phase2_successes as f64
    }
}

/// Phase-1 counts over payload identities.
pub fn phase1_metrics(output: &[OutputMessage], truth_incell: &[Vec<u8>]) -> (usize, usize) {
    let a: HashSet<&[u8]> = output.iter().map(|m| m.payload.as_slice()).collect();
    let a_star: HashSet<&[u8]> = truth_incell.iter().map(|p| p.as_slice()).collect();
    let false_alarms = a.iter().filter(|p| !a_star.contains(*p)).count();
    let misses = a_star.iter().filter(|p| !a.contains(*p)).count();
    (false_alarms, misses)
}

/// Keep the `k_star` outputs of largest estimated gain (all of them when
/// `|A| <= K*`). Ties keep the earlier-decoded message.
pub fn phase2_select(output: &[OutputMessage], k_star: usize) -> Vec<OutputMessage> {
    if output.len() <= k_star {
        return output.to_vec();
    }
    let mut order: Vec<usize> = (0..output.len()).collect();
    order.sort_by(|&i, &j| {
        output[j]
            .h_hat
            .norm_sqr()
            .partial_cmp(&output[i].h_hat.norm_sqr())
            .unwrap()
            .then(i.cmp(&j))
    });
    order.truncate(k_star);
    order.sort_unstable();
    order.into_iter().map(|i| output[i].clone()).collect()
}

/// Count in-cell devices recovered by the phase-2 selection.
pub fn phase2_successes(selected: &[OutputMessage], truth_incell: &[Vec<u8>]) -> usize {
    let kept: HashSet<&[u8]> = selected.iter().map(|m| m.payload.as_slice()).collect();
    truth_incell.iter().filter(|p| kept.contains(p.as_slice())).count()
}

/// Count channel-estimate failures `|h - h_hat| > factor * |h|` over the
/// correctly decoded messages. `truth` maps payloads to true channel
/// coefficients; estimates are rescaled by `1/sqrt(gamma)` before the
/// comparison.
pub fn channel_errors(
    selected: &[OutputMessage],
    truth: &[(Vec<u8>, Complex64)],
    gamma: f64,
    factor: f64,
) -> usize {
    let scale = gamma.sqrt();
    let mut errors = 0usize;
    for (payload, h) in truth {
        if let Some(msg) = selected.iter().find(|m| &m.payload == payload) {
            if (msg.h_hat / scale - h).norm() > factor * h.norm() {
                errors += 1;
            }
        }
    }
    errors
}
