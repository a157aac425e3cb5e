//! Monte Carlo trial execution and CSV emission.
//!
//! Trials are independent work items: each one derives its own seed stream
//! from the master seed and its `(K, trial)` coordinates, so results are
//! reproducible bit-for-bit regardless of the worker count. Result rows are
//! collected in sweep order.

use std::io::Write;
use std::time::Instant;

use num_complex::Complex64;
use rayon::prelude::*;

use rmaccess_core::channel::{
    analytic_interference_power, sample_network, synthesize_rx, DeviceField, NetworkDraw,
    NetworkParams,
};
use rmaccess_core::codec::{encode_for_config, slotted_payload, stitch_patches, SlotConfig};
use rmaccess_core::decoder::{
    algorithm1, algorithm2, epsilon_incell, epsilon_outcell, ListPlan,
};

use crate::config::{Algorithm, ChannelMode, EpsilonPolicy, ExperimentConfig, KmaxPolicy};
use crate::metrics::{
    channel_errors, phase1_metrics, phase2_select, phase2_successes, OutputMessage, TrialMetrics,
};

/// One CSV row: a trial's metrics at a sweep point.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialRow {
    pub k: usize,
    pub trial: i64,
    pub seed: u64,
    pub algorithm: &'static str,
    pub metrics: TrialMetrics,
}

#[derive(Debug)]
pub enum RunError {
    Config(String),
    Core(rmaccess_core::Error),
    Io(std::io::Error),
}

impl std::fmt::Display for RunError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            RunError::Config(msg) => write!(f, "configuration error: {msg}"),
            RunError::Core(e) => write!(f, "{e}"),
            RunError::Io(e) => write!(f, "I/O error: {e}"),
        }
    }
}

impl std::error::Error for RunError {}

impl From<rmaccess_core::Error> for RunError {
    fn from(e: rmaccess_core::Error) -> Self {
        RunError::Core(e)
    }
}

impl From<std::io::Error> for RunError {
    fn from(e: std::io::Error) -> Self {
        RunError::Io(e)
    }
}

/// splitmix64 step; the standard stateless mixer.
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e3779b97f4a7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z ^ (z >> 31)
}

/// Deterministic per-trial sub-stream seed.
fn derive_seed(master: u64, k: usize, trial: usize, stream: u64) -> u64 {
    splitmix64(splitmix64(splitmix64(master ^ (k as u64)) ^ (trial as u64)) ^ stream)
}

/// Everything fixed across trials, resolved once.
struct RunPlan {
    cfg: ExperimentConfig,
    slot_cfg: SlotConfig,
    plan: ListPlan,
    parity_seed: u64,
}

fn network_params(cfg: &ExperimentConfig, k: usize) -> NetworkParams {
    let field = match cfg.channel {
        ChannelMode::Square { side } => DeviceField::FixedSquare { count: k, side },
        ChannelMode::GainOnly => DeviceField::GainOnly { count: k },
    };
    NetworkParams { field, alpha: cfg.alpha, theta: cfg.theta, gamma: cfg.gamma() }
}

fn resolve_epsilon(cfg: &ExperimentConfig, k: usize, len_exp: usize) -> Result<f64, RunError> {
    match cfg.epsilon {
        EpsilonPolicy::Incell => Ok(epsilon_incell(len_exp)),
        EpsilonPolicy::Fixed(v) => Ok(v),
        EpsilonPolicy::Outcell => {
            let sigma2 = analytic_interference_power(&network_params(cfg, k))?;
            Ok(epsilon_outcell(len_exp, sigma2))
        }
    }
}

fn resolve_budget(policy: KmaxPolicy, k_star: usize, p: usize) -> usize {
    match policy {
        KmaxPolicy::Oracle => k_star,
        KmaxPolicy::Fixed(n) => n,
        KmaxPolicy::SlotDefault => {
            let den = 1usize << (p - 1);
            (3 * k_star).div_ceil(den)
        }
    }
}

/// Decode one received frame into payload-identified messages, first decoded
/// estimate winning on duplicates.
fn decode_frame(
    run: &RunPlan,
    y: &[Complex64],
    budget: usize,
    epsilon: f64,
) -> Result<Vec<OutputMessage>, RunError> {
    let cfg = &run.slot_cfg;
    let mut out: Vec<OutputMessage> = Vec::new();
    let push_unique = |out: &mut Vec<OutputMessage>, msg: OutputMessage| {
        if !out.iter().any(|m| m.payload == msg.payload) {
            out.push(msg);
        }
    };
    match run.cfg.algorithm {
        Algorithm::One => {
            for msg in algorithm1(y, budget, epsilon, &run.plan)? {
                push_unique(
                    &mut out,
                    OutputMessage { payload: msg.pair.to_bits(), h_hat: msg.h_hat },
                );
            }
        }
        Algorithm::Two if cfg.r() == 0 => {
            let slots: Vec<Vec<Complex64>> =
                (0..cfg.slot_count()).map(|i| y[cfg.slot_range(0, i)].to_vec()).collect();
            for msg in algorithm2(&slots, cfg, budget, epsilon, &run.plan)? {
                let payload = slotted_payload(&msg.pair, msg.slot.unwrap_or(0), cfg)?;
                push_unique(&mut out, OutputMessage { payload, h_hat: msg.h_hat });
            }
        }
        Algorithm::Two => {
            // Patched: decode each sub-block, then stitch on parity.
            let mut candidates: Vec<Vec<Vec<u8>>> = Vec::new();
            let mut gains: Vec<Vec<Complex64>> = Vec::new();
            for sb in 0..cfg.subblock_count() {
                let slots: Vec<Vec<Complex64>> =
                    (0..cfg.slot_count()).map(|i| y[cfg.slot_range(sb, i)].to_vec()).collect();
                let mut bits_list = Vec::new();
                let mut gain_list = Vec::new();
                for msg in algorithm2(&slots, cfg, budget, epsilon, &run.plan)? {
                    let bits = slotted_payload(&msg.pair, msg.slot.unwrap_or(0), cfg)?;
                    if !bits_list.contains(&bits) {
                        bits_list.push(bits);
                        gain_list.push(msg.h_hat);
                    }
                }
                candidates.push(bits_list);
                gains.push(gain_list);
            }
            for stitched in
                stitch_patches(&candidates, cfg, run.parity_seed, run.cfg.stitch_beam)?
            {
                let h_hat = gains[0][stitched.parts[0]];
                push_unique(&mut out, OutputMessage { payload: stitched.payload, h_hat });
            }
        }
    }
    Ok(out)
}

type PayloadGains = Vec<(Vec<u8>, Complex64)>;

fn incell_truth(draw: &NetworkDraw) -> (Vec<Vec<u8>>, PayloadGains) {
    let mut payloads = Vec::new();
    let mut with_gains = Vec::new();
    for d in &draw.devices {
        if d.in_cell {
            payloads.push(d.payload.clone());
            with_gains.push((d.payload.clone(), d.h));
        }
    }
    (payloads, with_gains)
}

fn run_trial(run: &RunPlan, k: usize, trial: usize) -> Result<TrialRow, RunError> {
    let cfg = &run.cfg;
    let seed = derive_seed(cfg.seed, k, trial, 0);
    let noise_seed = derive_seed(cfg.seed, k, trial, 1);
    let params = network_params(cfg, k);
    let payload_bits = run.slot_cfg.payload_bits();
    let draw = sample_network(&params, payload_bits, seed)?;
    {
        let mut seen = std::collections::HashSet::new();
        for d in &draw.devices {
            if !seen.insert(&d.payload) {
                log::warn!("payload collision between devices at K = {k}, trial {trial}");
            }
        }
    }
    let waveforms: Vec<_> = draw
        .devices
        .iter()
        .map(|d| encode_for_config(&d.payload, &run.slot_cfg, run.parity_seed))
        .collect::<Result<_, _>>()?;
    let y = synthesize_rx(&draw, &waveforms, cfg.gamma(), 1.0, noise_seed)?;
    let k_star = draw.in_cell_count();
    let len_exp = match cfg.algorithm {
        Algorithm::One => cfg.m,
        Algorithm::Two => run.slot_cfg.q(),
    };
    let epsilon = resolve_epsilon(cfg, k, len_exp)?;
    let budget = resolve_budget(cfg.kmax_policy, k_star, run.slot_cfg.p().max(1));

    let start = Instant::now();
    let outputs = decode_frame(run, &y, budget, epsilon)?;
    let wall_s = if cfg.record_timing { start.elapsed().as_secs_f64() } else { 0.0 };

    let (truth_payloads, truth_gains) = incell_truth(&draw);
    let (false_alarms, misses) = phase1_metrics(&outputs, &truth_payloads);
    let selected = phase2_select(&outputs, k_star);
    let successes = phase2_successes(&selected, &truth_payloads);
    let cherr = channel_errors(&selected, &truth_gains, cfg.gamma(), cfg.channel_error_factor);

    Ok(TrialRow {
        k,
        trial: trial as i64,
        seed,
        algorithm: cfg.algorithm.label(),
        metrics: TrialMetrics {
            n_output: outputs.len(),
            n_incell: k_star,
            false_alarms,
            misses,
            phase2_successes: successes,
            channel_errors: cherr,
            wall_s,
        },
    })
}

/// Run the full sweep; returns per-trial rows followed by one aggregate row
/// per sweep point (flagged with `trial = -1`).
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<Vec<TrialRow>, RunError> {
    cfg.validate().map_err(RunError::Config)?;
    if cfg.algorithm == Algorithm::One && cfg.kmax_policy == KmaxPolicy::SlotDefault {
        return Err(RunError::Config("slot-default budget applies to algorithm 2".into()));
    }
    let run = RunPlan {
        cfg: cfg.clone(),
        slot_cfg: cfg.slot_config().map_err(RunError::Config)?,
        plan: cfg.plan().map_err(RunError::Config)?,
        parity_seed: splitmix64(cfg.seed ^ 0x70617263),
    };
    let body = || -> Result<Vec<TrialRow>, RunError> {
        let mut rows = Vec::new();
        for &k in &cfg.k_sweep {
            let mut trial_rows = (0..cfg.trials)
                .into_par_iter()
                .map(|t| run_trial(&run, k, t))
                .collect::<Result<Vec<_>, _>>()?;
            let aggregate = aggregate_row(&trial_rows, cfg.seed);
            rows.append(&mut trial_rows);
            rows.push(aggregate);
        }
        Ok(rows)
    };
    if cfg.threads > 0 {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(cfg.threads)
            .build()
            .map_err(|e| RunError::Config(format!("cannot build thread pool: {e}")))?;
        pool.install(body)
    } else {
        body()
    }
}

fn nan_mean(values: impl Iterator<Item = f64>) -> f64 {
    let mut sum = 0.0;
    let mut n = 0usize;
    for v in values {
        if !v.is_nan() {
            sum += v;
            n += 1;
        }
    }
    if n == 0 {
        f64::NAN
    } else {
        sum / n as f64
    }
}

fn aggregate_row(rows: &[TrialRow], master_seed: u64) -> TrialRow {
    let n = rows.len().max(1);
    let mean_count =
        |f: &dyn Fn(&TrialMetrics) -> usize| rows.iter().map(|r| f(&r.metrics)).sum::<usize>() / n;
    TrialRow {
        k: rows.first().map_or(0, |r| r.k),
        trial: -1,
        seed: master_seed,
        algorithm: rows.first().map_or("", |r| r.algorithm),
        metrics: TrialMetrics {
            n_output: mean_count(&|m| m.n_output),
            n_incell: mean_count(&|m| m.n_incell),
            false_alarms: mean_count(&|m| m.false_alarms),
            misses: mean_count(&|m| m.misses),
            phase2_successes: mean_count(&|m| m.phase2_successes),
            channel_errors: mean_count(&|m| m.channel_errors),
            wall_s: nan_mean(rows.iter().map(|r| r.metrics.wall_s)),
        },
    }
}

/// Aggregate rates of one sweep point, NaN entries excluded.
#[derive(Debug, Clone, Copy)]
pub struct SweepPoint {
    pub k: usize,
    pub far: f64,
    pub mr: f64,
    pub sr: f64,
    pub cee: f64,
    pub wall_s: f64,
}

/// Mean per-trial rates per sweep point (this is what the aggregate CSV
/// rows' rate columns hold: means of rates, not rates of means).
pub fn sweep_points(rows: &[TrialRow]) -> Vec<SweepPoint> {
    let mut points = Vec::new();
    let mut ks: Vec<usize> = rows.iter().filter(|r| r.trial >= 0).map(|r| r.k).collect();
    ks.dedup();
    for k in ks {
        let trials: Vec<&TrialRow> =
            rows.iter().filter(|r| r.trial >= 0 && r.k == k).collect();
        points.push(SweepPoint {
            k,
            far: nan_mean(trials.iter().map(|r| r.metrics.false_alarm_rate())),
            mr: nan_mean(trials.iter().map(|r| r.metrics.miss_rate())),
            sr: nan_mean(trials.iter().map(|r| r.metrics.success_rate())),
            cee: nan_mean(trials.iter().map(|r| r.metrics.channel_error_rate())),
            wall_s: nan_mean(trials.iter().map(|r| r.metrics.wall_s)),
        });
    }
    points
}

fn fmt_rate(v: f64) -> String {
    if v.is_nan() {
        "NaN".to_string()
    } else {
        format!("{v:.6}")
    }
}

pub const CSV_HEADER: &str = "K,trial,seed,algorithm,n_output,n_incell,far,mr,sr,cee,wall_s";

/// Write rows as CSV. Per-trial rows carry their own rates; aggregate rows
/// (trial = -1) carry the NaN-excluded mean rates of their sweep point.
pub fn write_csv<W: Write>(rows: &[TrialRow], mut w: W) -> std::io::Result<()> {
    writeln!(w, "{CSV_HEADER}")?;
    let points = sweep_points(rows);
    for row in rows {
        let m = &row.metrics;
        let (far, mr, sr, cee) = if row.trial >= 0 {
            (m.false_alarm_rate(), m.miss_rate(), m.success_rate(), m.channel_error_rate())
        } else {
            let p = points
                .iter()
                .find(|p| p.k == row.k)
                .copied()
                .unwrap_or(SweepPoint { k: row.k, far: f64::NAN, mr: f64::NAN, sr: f64::NAN, cee: f64::NAN, wall_s: f64::NAN });
            (p.far, p.mr, p.sr, p.cee)
        };
        writeln!(
            w,
            "{},{},{},{},{},{},{},{},{},{},{}",
            row.k,
            row.trial,
            row.seed,
            row.algorithm,
            m.n_output,
            m.n_incell,
            fmt_rate(far),
            fmt_rate(mr),
            fmt_rate(sr),
            fmt_rate(cee),
            fmt_rate(m.wall_s),
        )?;
    }
    Ok(())
}
