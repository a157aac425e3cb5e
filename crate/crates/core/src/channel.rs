//! Stochastic network realizations and received-signal synthesis.
//!
//! Devices see the access point at the origin through Rayleigh fading and
//! power-law path loss: `|h|^2 = R^-alpha * G` with `G` unit-mean
//! exponential and a uniform phase. A device is in-cell when `|h|^2`
//! exceeds the gain threshold `theta`. Noise is unit-variance circularly
//! symmetric complex Gaussian per sample, so `gamma * |h|^2` is directly
//! the nominal received SNR.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1, Poisson, StandardNormal};
use statrs::function::gamma::gamma as gamma_fn;

use crate::codec::TxWaveform;
use crate::error::Error;

/// How device positions (or gains) are drawn.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DeviceField {
    /// Poisson number of devices, uniform over a `side x side` square
    /// centered on the access point.
    PoissonSquare { intensity: f64, side: f64 },
    /// Exactly `count` devices, uniform over a `side x side` square centered
    /// on the access point.
    FixedSquare { count: usize, side: f64 },
    /// Exactly `count` in-cell devices with gains drawn from the in-cell
    /// gain law, bypassing geometry.
    GainOnly { count: usize },
}

/// Propagation and coverage parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NetworkParams {
    pub field: DeviceField,
    /// Path-loss exponent, must exceed 2.
    pub alpha: f64,
    /// In-cell channel-gain threshold.
    pub theta: f64,
    /// Transmit SNR (linear).
    pub gamma: f64,
}

impl NetworkParams {
    pub fn validate(&self) -> Result<(), Error> {
        if self.alpha <= 2.0 {
            return Err(Error::DivergentInterference { alpha: self.alpha });
        }
        let positive = self.theta > 0.0 && self.gamma > 0.0;
        if !positive {
            return Err(Error::InvalidConfig("theta and gamma must be positive".into()));
        }
        Ok(())
    }

    /// Device intensity in devices per unit area, where defined.
    fn intensity(&self) -> Option<f64> {
        match self.field {
            DeviceField::PoissonSquare { intensity, .. } => Some(intensity),
            DeviceField::FixedSquare { count, side } => Some(count as f64 / (side * side)),
            DeviceField::GainOnly { .. } => None,
        }
    }
}

/// One active device of a network draw.
#[derive(Debug, Clone, PartialEq)]
pub struct Device {
    /// Distance to the access point in meters.
    pub distance: f64,
    /// Small-scale fading power (unit-mean exponential).
    pub fade: f64,
    /// Complex channel coefficient; `|h|^2 = distance^-alpha * fade`.
    pub h: Complex64,
    pub in_cell: bool,
    /// Message bits this device transmits.
    pub payload: Vec<u8>,
}

/// One realization of simultaneously active devices.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkDraw {
    pub devices: Vec<Device>,
}

impl NetworkDraw {
    pub fn in_cell_count(&self) -> usize {
        self.devices.iter().filter(|d| d.in_cell).count()
    }
}

fn device_at(x: f64, y: f64, params: &NetworkParams, payload_bits: usize, rng: &mut ChaCha8Rng) -> Device {
    let distance = (x * x + y * y).sqrt();
    let fade: f64 = Exp1.sample(rng);
    let gain = distance.powf(-params.alpha) * fade;
    let phase = rng.random_range(0.0..std::f64::consts::TAU);
    let h = Complex64::from_polar(gain.sqrt(), phase);
    let payload = (0..payload_bits).map(|_| u8::from(rng.random::<bool>())).collect();
    Device { distance, fade, h, in_cell: gain > params.theta, payload }
}

/// Draw one network realization; deterministic under `seed`.
///
/// Every device gets a uniformly random payload of `payload_bits` bits.
pub fn sample_network(
    params: &NetworkParams,
    payload_bits: usize,
    seed: u64,
) -> Result<NetworkDraw, Error> {
    params.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let devices = match params.field {
        DeviceField::PoissonSquare { intensity, side } => {
            let mean = intensity * side * side;
            let count = Poisson::new(mean)
                .map_err(|e| Error::InvalidConfig(format!("bad intensity: {e}")))?
                .sample(&mut rng) as usize;
            sample_square(count, side, params, payload_bits, &mut rng)
        }
        DeviceField::FixedSquare { count, side } => {
            sample_square(count, side, params, payload_bits, &mut rng)
        }
        DeviceField::GainOnly { count } => (0..count)
            .map(|_| {
                let magnitude = incell_gain_from_uniform(rng.random::<f64>(), params);
                let phase = rng.random_range(0.0..std::f64::consts::TAU);
                let payload = (0..payload_bits).map(|_| u8::from(rng.random::<bool>())).collect();
                Device {
                    // Consistent geometry with unit fade: R = |h|^(-2/alpha).
                    distance: magnitude.powf(-2.0 / params.alpha),
                    fade: 1.0,
                    h: Complex64::from_polar(magnitude, phase),
                    in_cell: true,
                    payload,
                }
            })
            .collect(),
    };
    Ok(NetworkDraw { devices })
}

fn sample_square(
    count: usize,
    side: f64,
    params: &NetworkParams,
    payload_bits: usize,
    rng: &mut ChaCha8Rng,
) -> Vec<Device> {
    (0..count)
        .map(|_| {
            let x = rng.random_range(-side / 2.0..side / 2.0);
            let y = rng.random_range(-side / 2.0..side / 2.0);
            device_at(x, y, params, payload_bits, rng)
        })
        .collect()
}

/// Inverse CDF of the in-cell gain law: `F(x) = 1 - (theta / x^2)^(2/alpha)`
/// for `x > sqrt(theta)`.
fn incell_gain_from_uniform(u: f64, params: &NetworkParams) -> f64 {
    params.theta.sqrt() * (1.0 - u).powf(-params.alpha / 4.0)
}

/// Draw one in-cell channel magnitude `|h|`.
pub fn sample_incell_gain(params: &NetworkParams, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    incell_gain_from_uniform(rng.random::<f64>(), params)
}

/// Expected number of in-cell devices:
/// `(2/alpha) * pi * lambda * theta^(-2/alpha) * Gamma(2/alpha)`.
pub fn analytic_neighbors(params: &NetworkParams) -> Result<f64, Error> {
    params.validate()?;
    let lambda = params
        .intensity()
        .ok_or_else(|| Error::InvalidConfig("gain-only field has no intensity".into()))?;
    let ratio = 2.0 / params.alpha;
    Ok(ratio * std::f64::consts::PI * lambda * params.theta.powf(-ratio) * gamma_fn(ratio))
}

/// Expected total received power from out-of-cell devices:
/// `4 / (alpha (alpha - 2)) * pi * lambda * gamma * theta^(1 - 2/alpha) * Gamma(2/alpha)`.
pub fn analytic_interference_power(params: &NetworkParams) -> Result<f64, Error> {
    params.validate()?;
    let lambda = params
        .intensity()
        .ok_or_else(|| Error::InvalidConfig("gain-only field has no intensity".into()))?;
    let ratio = 2.0 / params.alpha;
    Ok(4.0 / (params.alpha * (params.alpha - 2.0))
        * std::f64::consts::PI
        * lambda
        * params.gamma
        * params.theta.powf(1.0 - ratio)
        * gamma_fn(ratio))
}

/// Superpose every device's waveform at the access point:
/// `y = sqrt(gamma) * sum_k h_k c_k + z` with per-sample noise variance
/// `noise_var` (0 disables noise).
pub fn synthesize_rx(
    draw: &NetworkDraw,
    waveforms: &[TxWaveform],
    gamma: f64,
    noise_var: f64,
    noise_seed: u64,
) -> Result<Vec<Complex64>, Error> {
    if draw.devices.len() != waveforms.len() {
        return Err(Error::LengthMismatch { expected: draw.devices.len(), got: waveforms.len() });
    }
    let frame_len = match waveforms.first() {
        Some(w) => w.frame_len(),
        None => return Err(Error::InvalidConfig("no waveforms to synthesize".into())),
    };
    let mut y = vec![Complex64::new(0.0, 0.0); frame_len];
    let amp = gamma.sqrt();
    for (device, waveform) in draw.devices.iter().zip(waveforms) {
        if waveform.frame_len() != frame_len {
            return Err(Error::LengthMismatch { expected: frame_len, got: waveform.frame_len() });
        }
        waveform.add_scaled_into(&mut y, device.h * amp);
    }
    if noise_var > 0.0 {
        let mut rng = ChaCha8Rng::seed_from_u64(noise_seed);
        let sd = (noise_var / 2.0).sqrt();
        for sample in &mut y {
            let re: f64 = StandardNormal.sample(&mut rng);
            let im: f64 = StandardNormal.sample(&mut rng);
            *sample += Complex64::new(re * sd, im * sd);
        }
    }
    Ok(y)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::codec::{encode_plain, TxWaveform};
    use crate::rm_core::RmPair;

    fn square_params(count: usize) -> NetworkParams {
        NetworkParams {
            field: DeviceField::FixedSquare { count, side: 500.0 },
            alpha: 4.0,
            theta: 1e-6,
            gamma: 1e6,
        }
    }

    #[test]
    fn gain_relation_and_labels_hold() {
        let params = square_params(500);
        let draw = sample_network(&params, 8, 42).unwrap();
        assert_eq!(draw.devices.len(), 500);
        for d in &draw.devices {
            let gain = d.distance.powf(-params.alpha) * d.fade;
            assert!((d.h.norm_sqr() - gain).abs() <= 1e-9 * gain.max(1e-30));
            assert_eq!(d.in_cell, d.h.norm_sqr() > params.theta);
            assert_eq!(d.payload.len(), 8);
        }
    }

    #[test]
    fn draws_are_seed_deterministic() {
        let params = square_params(100);
        let a = sample_network(&params, 16, 7).unwrap();
        let b = sample_network(&params, 16, 7).unwrap();
        assert_eq!(a, b);
        let c = sample_network(&params, 16, 8).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn huge_threshold_empties_the_cell() {
        let mut params = square_params(300);
        params.theta = 1e12;
        let draw = sample_network(&params, 4, 3).unwrap();
        assert_eq!(draw.in_cell_count(), 0);
    }

    #[test]
    fn fade_powers_have_unit_mean() {
        let params = square_params(100_000);
        let draw = sample_network(&params, 0, 11).unwrap();
        let mean: f64 =
            draw.devices.iter().map(|d| d.fade).sum::<f64>() / draw.devices.len() as f64;
        assert!((mean - 1.0).abs() < 0.02, "fade mean {mean}");
    }

    #[test]
    fn poisson_field_count_matches_intensity() {
        let params = NetworkParams {
            field: DeviceField::PoissonSquare { intensity: 0.004, side: 500.0 },
            alpha: 4.0,
            theta: 1e-6,
            gamma: 1e6,
        };
        let total: usize = (0..200)
            .map(|s| sample_network(&params, 0, s).unwrap().devices.len())
            .sum();
        let mean = total as f64 / 200.0;
        assert!((mean - 1000.0).abs() < 25.0, "poisson mean {mean}");
    }

    #[test]
    fn incell_gains_respect_support_and_median() {
        let params = square_params(1);
        let sqrt_theta = params.theta.sqrt();
        let mut below_median = 0usize;
        let n = 20_000;
        let analytic_median = sqrt_theta * 2f64.powf(params.alpha / 4.0);
        for seed in 0..n {
            let g = sample_incell_gain(&params, seed as u64);
            assert!(g > sqrt_theta);
            if g < analytic_median {
                below_median += 1;
            }
        }
        let frac = below_median as f64 / n as f64;
        assert!((frac - 0.5).abs() < 0.02, "median fraction {frac}");
    }

    #[test]
    fn incell_gain_cdf_matches_closed_form() {
        // Kolmogorov-Smirnov at the 1% level: D_n < 1.628 / sqrt(n).
        let params = square_params(1);
        let n = 100_000usize;
        let draw = sample_network(
            &NetworkParams { field: DeviceField::GainOnly { count: n }, ..params },
            0,
            5,
        )
        .unwrap();
        let mut gains: Vec<f64> = draw.devices.iter().map(|d| d.h.norm()).collect();
        gains.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let cdf = |x: f64| 1.0 - (params.theta / (x * x)).powf(2.0 / params.alpha);
        let mut d_max = 0f64;
        for (i, &x) in gains.iter().enumerate() {
            let f = cdf(x);
            d_max = d_max.max(((i + 1) as f64 / n as f64 - f).abs());
            d_max = d_max.max((f - i as f64 / n as f64).abs());
        }
        assert!(d_max < 1.628 / (n as f64).sqrt(), "KS statistic {d_max}");
    }

    #[test]
    fn analytic_neighbors_matches_reported_values() {
        let k = analytic_neighbors(&square_params(1000)).unwrap();
        assert!((k - 11.1).abs() < 0.1, "K* = {k}");
        let k8 = analytic_neighbors(&square_params(8000)).unwrap();
        assert!((k8 / k - 8.0).abs() < 1e-9);
    }

    #[test]
    fn interference_power_basics() {
        let params = square_params(1000);
        let sigma2 = analytic_interference_power(&params).unwrap();
        assert!(sigma2 > 0.0);
        let doubled =
            analytic_interference_power(&NetworkParams { gamma: 2e6, ..params }).unwrap();
        assert!((doubled / sigma2 - 2.0).abs() < 1e-12);
        let bad = NetworkParams { alpha: 2.0, ..params };
        assert!(analytic_interference_power(&bad).is_err());
    }

    #[test]
    fn analytic_interference_matches_monte_carlo() {
        let params = square_params(1000);
        let sigma2 = analytic_interference_power(&params).unwrap();
        let trials = 400;
        let mut acc = 0.0;
        for seed in 0..trials {
            let draw = sample_network(&params, 0, 1000 + seed).unwrap();
            acc += params.gamma
                * draw
                    .devices
                    .iter()
                    .filter(|d| !d.in_cell)
                    .map(|d| d.h.norm_sqr())
                    .sum::<f64>();
        }
        let empirical = acc / trials as f64;
        assert!(
            (empirical - sigma2).abs() < 0.08 * sigma2,
            "empirical {empirical} vs closed form {sigma2}"
        );
    }

    #[test]
    fn rx_is_exact_without_noise() {
        let params = square_params(1);
        let mut draw = sample_network(&params, 5, 21).unwrap();
        let (_, seq) = encode_plain(&draw.devices[0].payload, 2).unwrap();
        let waveforms = vec![TxWaveform::Plain(seq.clone())];
        draw.devices[0].h = Complex64::new(0.3, -0.4);
        let y = synthesize_rx(&draw, &waveforms, 4.0, 0.0, 0).unwrap();
        for (got, c) in y.iter().zip(seq.samples()) {
            let expect = Complex64::new(0.6, -0.8) * c;
            assert!((got - expect).norm() < 1e-12);
        }
    }

    #[test]
    fn rx_power_accounts_for_signal_and_noise() {
        let params = square_params(40);
        let draw = sample_network(&params, RmPair::bit_count(6), 33).unwrap();
        let waveforms: Vec<TxWaveform> = draw
            .devices
            .iter()
            .map(|d| TxWaveform::Plain(encode_plain(&d.payload, 6).unwrap().1))
            .collect();
        let signal: f64 =
            params.gamma * draw.devices.iter().map(|d| d.h.norm_sqr()).sum::<f64>();
        let n = 64.0;
        let trials = 1000;
        let mut acc = 0.0;
        for seed in 0..trials {
            let y = synthesize_rx(&draw, &waveforms, params.gamma, 1.0, seed).unwrap();
            acc += y.iter().map(|z| z.norm_sqr()).sum::<f64>() / n;
        }
        let per_sample = acc / trials as f64;
        // Cross terms between device chirps average out over noise draws
        // only partially; dominant terms are gamma*sum|h|^2 + 1.
        let expect = signal + 1.0;
        assert!(
            (per_sample - expect).abs() < 0.03 * expect,
            "per-sample power {per_sample} vs {expect}"
        );
    }

    #[test]
    fn rx_rejects_mismatched_shapes() {
        let params = square_params(2);
        let draw = sample_network(&params, 5, 1).unwrap();
        let (_, s2) = encode_plain(&draw.devices[0].payload, 2).unwrap();
        let bits3 = vec![0u8; RmPair::bit_count(3)];
        let (_, s3) = encode_plain(&bits3, 3).unwrap();
        let err = synthesize_rx(
            &draw,
            &[TxWaveform::Plain(s2), TxWaveform::Plain(s3)],
            1.0,
            0.0,
            0,
        );
        assert!(err.is_err());
    }
}
