//! Experiment configuration: TOML file plus CLI overrides.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::Deserialize;

use rmaccess_core::codec::SlotConfig;
use rmaccess_core::decoder::ListPlan;

/// How the detection budget is chosen per trial.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KmaxPolicy {
    /// Algorithm 1: use the realized in-cell count of the draw.
    Oracle,
    /// A fixed budget.
    Fixed(usize),
    /// Algorithm 2 default: `ceil(3 K* / 2^(p-1))` per slot.
    SlotDefault,
}

impl FromStr for KmaxPolicy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "oracle" => Ok(KmaxPolicy::Oracle),
            "slot-default" => Ok(KmaxPolicy::SlotDefault),
            other => match other.strip_prefix("fixed:") {
                Some(n) => n
                    .parse()
                    .map(KmaxPolicy::Fixed)
                    .map_err(|e| format!("bad fixed budget {n:?}: {e}")),
                None => Err(format!(
                    "unknown kmax policy {other:?} (expected oracle, slot-default, or fixed:<n>)"
                )),
            },
        }
    }
}

impl fmt::Display for KmaxPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            KmaxPolicy::Oracle => write!(f, "oracle"),
            KmaxPolicy::Fixed(n) => write!(f, "fixed:{n}"),
            KmaxPolicy::SlotDefault => write!(f, "slot-default"),
        }
    }
}

/// How the residual-energy stop threshold is chosen.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EpsilonPolicy {
    /// `(2^(len/2) + 2)^2` on the decoded vector length.
    Incell,
    /// `2 sigma^2 + 2^(len+1)` with `sigma^2` from the closed-form
    /// out-of-cell interference power.
    Outcell,
    Fixed(f64),
}

impl FromStr for EpsilonPolicy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "incell" => Ok(EpsilonPolicy::Incell),
            "outcell" => Ok(EpsilonPolicy::Outcell),
            other => match other.strip_prefix("fixed:") {
                Some(v) => v
                    .parse()
                    .map(EpsilonPolicy::Fixed)
                    .map_err(|e| format!("bad fixed epsilon {v:?}: {e}")),
                None => Err(format!(
                    "unknown epsilon policy {other:?} (expected incell, outcell, or fixed:<v>)"
                )),
            },
        }
    }
}

impl fmt::Display for EpsilonPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EpsilonPolicy::Incell => write!(f, "incell"),
            EpsilonPolicy::Outcell => write!(f, "outcell"),
            EpsilonPolicy::Fixed(v) => write!(f, "fixed:{v}"),
        }
    }
}

/// Where devices come from.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ChannelMode {
    /// `K` devices uniform in a square of the given side (meters); the K
    /// sweep counts all active devices, in-cell or not.
    Square { side: f64 },
    /// `K` in-cell devices with gains from the in-cell law; no geometry.
    GainOnly,
}

impl FromStr for ChannelMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "gain-only" => Ok(ChannelMode::GainOnly),
            other => match other.strip_prefix("square:") {
                Some(side) => side
                    .parse()
                    .map(|side| ChannelMode::Square { side })
                    .map_err(|e| format!("bad square side {side:?}: {e}")),
                None => Err(format!(
                    "unknown channel mode {other:?} (expected gain-only or square:<side>)"
                )),
            },
        }
    }
}

impl fmt::Display for ChannelMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ChannelMode::Square { side } => write!(f, "square:{side}"),
            ChannelMode::GainOnly => write!(f, "gain-only"),
        }
    }
}

/// Which detector the trial runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Algorithm {
    /// Full-frame cancellation decoding.
    One,
    /// Slotted decoding with optional message passing.
    Two,
}

impl Algorithm {
    pub fn label(&self) -> &'static str {
        match self {
            Algorithm::One => "alg1",
            Algorithm::Two => "alg2",
        }
    }
}

impl FromStr for Algorithm {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "1" => Ok(Algorithm::One),
            "2" => Ok(Algorithm::Two),
            other => Err(format!("unknown algorithm {other:?} (expected 1 or 2)")),
        }
    }
}

/// A fully validated experiment description.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub m: usize,
    pub p: usize,
    pub r: usize,
    pub parity: Vec<usize>,
    pub message_passing: bool,
    pub k_sweep: Vec<usize>,
    pub trials: usize,
    pub seed: u64,
    pub snr_db: f64,
    pub algorithm: Algorithm,
    pub list_plan: Vec<usize>,
    pub kmax_policy: KmaxPolicy,
    pub epsilon: EpsilonPolicy,
    pub channel: ChannelMode,
    /// Channel-estimate error threshold as a fraction of `|h|`.
    pub channel_error_factor: f64,
    /// Path-loss exponent.
    pub alpha: f64,
    /// In-cell gain threshold.
    pub theta: f64,
    /// Zero the wall-time column for byte-reproducible output.
    pub record_timing: bool,
    /// Beam width for patch stitching.
    pub stitch_beam: usize,
    /// Worker threads (0 = rayon default).
    pub threads: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            m: 12,
            p: 2,
            r: 0,
            parity: Vec::new(),
            message_passing: false,
            k_sweep: vec![40, 60, 80, 100],
            trials: 200,
            seed: 1,
            snr_db: 60.0,
            algorithm: Algorithm::Two,
            list_plan: vec![4],
            kmax_policy: KmaxPolicy::Oracle,
            epsilon: EpsilonPolicy::Incell,
            channel: ChannelMode::GainOnly,
            channel_error_factor: 0.3,
            alpha: 4.0,
            theta: 1e-6,
            record_timing: true,
            stitch_beam: rmaccess_core::codec::DEFAULT_STITCH_BEAM,
            threads: 0,
        }
    }
}

impl ExperimentConfig {
    /// Frame layout implied by the config. Algorithm 1 always decodes the
    /// whole frame as one block.
    pub fn slot_config(&self) -> Result<SlotConfig, String> {
        match self.algorithm {
            Algorithm::One => {
                SlotConfig::single_block(self.m, 0, false).map_err(|e| e.to_string())
            }
            Algorithm::Two => {
                SlotConfig::new(self.m, self.p, self.r, self.parity.clone(), self.message_passing)
                    .map_err(|e| e.to_string())
            }
        }
    }

    pub fn plan(&self) -> Result<ListPlan, String> {
        ListPlan::new(self.list_plan.clone()).map_err(|e| e.to_string())
    }

    pub fn gamma(&self) -> f64 {
        10f64.powf(self.snr_db / 10.0)
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.trials == 0 {
            return Err("trials must be >= 1".into());
        }
        if self.k_sweep.is_empty() {
            return Err("K sweep must not be empty".into());
        }
        if self.k_sweep.contains(&0) {
            return Err("K values must be >= 1".into());
        }
        let factor_ok = self.channel_error_factor > 0.0;
        if !factor_ok {
            return Err("channel error factor must be positive".into());
        }
        if self.alpha <= 2.0 {
            return Err("path-loss exponent must exceed 2".into());
        }
        if matches!(self.kmax_policy, KmaxPolicy::SlotDefault) && self.p == 0 {
            return Err("slot-default budget needs p >= 1".into());
        }
        self.slot_config()?;
        self.plan()?;
        if let (EpsilonPolicy::Outcell, ChannelMode::GainOnly) = (self.epsilon, self.channel) {
            return Err("outcell epsilon needs a geometric channel (square:<side>)".into());
        }
        Ok(())
    }
}

/// The TOML mirror of [`ExperimentConfig`]; every field optional so a file
/// can set just what it cares about.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub m: Option<usize>,
    pub p: Option<usize>,
    pub r: Option<usize>,
    pub parity: Option<Vec<usize>>,
    pub message_passing: Option<bool>,
    pub k_sweep: Option<Vec<usize>>,
    pub trials: Option<usize>,
    pub seed: Option<u64>,
    pub snr_db: Option<f64>,
    pub algorithm: Option<String>,
    pub list_plan: Option<Vec<usize>>,
    pub kmax_policy: Option<String>,
    pub epsilon: Option<String>,
    pub channel: Option<String>,
    pub channel_error_factor: Option<f64>,
    pub alpha: Option<f64>,
    pub theta: Option<f64>,
    pub record_timing: Option<bool>,
    pub stitch_beam: Option<usize>,
    pub threads: Option<usize>,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self, String> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| format!("cannot read {}: {e}", path.display()))?;
        toml::from_str(&text).map_err(|e| format!("cannot parse {}: {e}", path.display()))
    }

    /// Layer this file over `base` (file wins where set).
    pub fn apply(&self, base: &mut ExperimentConfig) -> Result<(), String> {
        macro_rules! set {
            ($field:ident) => {
                if let Some(v) = &self.$field {
                    base.$field = v.clone();
                }
            };
        }
        set!(m);
        set!(p);
        set!(r);
        set!(parity);
        set!(message_passing);
        set!(k_sweep);
        set!(trials);
        set!(seed);
        set!(snr_db);
        set!(list_plan);
        set!(channel_error_factor);
        set!(alpha);
        set!(theta);
        set!(record_timing);
        set!(stitch_beam);
        set!(threads);
        if let Some(v) = &self.algorithm {
            base.algorithm = v.parse()?;
        }
        if let Some(v) = &self.kmax_policy {
            base.kmax_policy = v.parse()?;
        }
        if let Some(v) = &self.epsilon {
            base.epsilon = v.parse()?;
        }
        if let Some(v) = &self.channel {
            base.channel = v.parse()?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn policies_parse() {
        assert_eq!("oracle".parse::<KmaxPolicy>().unwrap(), KmaxPolicy::Oracle);
        assert_eq!("fixed:12".parse::<KmaxPolicy>().unwrap(), KmaxPolicy::Fixed(12));
        assert_eq!("slot-default".parse::<KmaxPolicy>().unwrap(), KmaxPolicy::SlotDefault);
        assert!("fixed:x".parse::<KmaxPolicy>().is_err());
        assert_eq!("incell".parse::<EpsilonPolicy>().unwrap(), EpsilonPolicy::Incell);
        assert_eq!("fixed:42.5".parse::<EpsilonPolicy>().unwrap(), EpsilonPolicy::Fixed(42.5));
        assert_eq!(
            "square:500".parse::<ChannelMode>().unwrap(),
            ChannelMode::Square { side: 500.0 }
        );
        assert_eq!("gain-only".parse::<ChannelMode>().unwrap(), ChannelMode::GainOnly);
        assert!("disc:3".parse::<ChannelMode>().is_err());
    }

    #[test]
    fn defaults_validate() {
        ExperimentConfig::default().validate().unwrap();
    }

    #[test]
    fn zero_trials_rejected() {
        let cfg = ExperimentConfig { trials: 0, ..Default::default() };
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn file_overrides_defaults() {
        let file: FileConfig = toml::from_str(
            r#"
            m = 10
            algorithm = "1"
            kmax_policy = "fixed:7"
            channel = "square:500"
            epsilon = "outcell"
            k_sweep = [1000, 8000]
            "#,
        )
        .unwrap();
        let mut cfg = ExperimentConfig::default();
        file.apply(&mut cfg).unwrap();
        assert_eq!(cfg.m, 10);
        assert_eq!(cfg.algorithm, Algorithm::One);
        assert_eq!(cfg.kmax_policy, KmaxPolicy::Fixed(7));
        assert_eq!(cfg.channel, ChannelMode::Square { side: 500.0 });
        cfg.validate().unwrap();
    }

    #[test]
    fn unknown_file_keys_rejected() {
        assert!(toml::from_str::<FileConfig>("frobnicate = 3").is_err());
    }
}
