//! Command-line front end: encode payloads, decode captured frames, run
//! Monte Carlo sweeps, and plot CSV results.

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use num_complex::Complex64;

use rmaccess_core::codec::{encode_for_config, slotted_payload, stitch_patches, SlotConfig};
use rmaccess_core::decoder::{algorithm1, algorithm2, epsilon_incell, ListPlan};
use rmaccess_sim::config::{Algorithm, EpsilonPolicy, ExperimentConfig, FileConfig};
use rmaccess_sim::payload;
use rmaccess_sim::plot;
use rmaccess_sim::runner::{self, sweep_points};

#[derive(Parser)]
#[command(name = "rmaccess", version, about = "Reed-Muller grant-free access codec and simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Encode a payload into a transmit frame.
    Encode(EncodeArgs),
    /// Decode a received frame from an IQ text file.
    Decode(DecodeArgs),
    /// Run a Monte Carlo error-rate sweep and write a CSV.
    Simulate(Box<SimulateArgs>),
    /// Plot one metric of a results CSV as SVG.
    Plot(PlotArgs),
}

#[derive(Args)]
struct FrameArgs {
    /// Frame length exponent (frame holds 2^m samples).
    #[arg(long, default_value_t = 12)]
    m: usize,
    /// Slot-count exponent (2^p slots per sub-block); 0 disables slotting.
    #[arg(long, default_value_t = 0)]
    p: usize,
    /// Sub-block exponent for patching (2^r sub-blocks).
    #[arg(long, default_value_t = 0)]
    r: usize,
    /// Parity bits per patch, comma separated, first entry 0.
    #[arg(long, value_delimiter = ',')]
    parity: Vec<usize>,
    /// Reserve the check bit and transmit in two slots.
    #[arg(long)]
    message_passing: bool,
    /// Seed for the shared parity matrices (patched mode).
    #[arg(long, default_value_t = 0)]
    parity_seed: u64,
}

impl FrameArgs {
    fn slot_config(&self) -> Result<SlotConfig, String> {
        if self.p == 0 && self.r == 0 {
            SlotConfig::single_block(self.m, 0, false).map_err(|e| e.to_string())
        } else {
            SlotConfig::new(self.m, self.p, self.r, self.parity.clone(), self.message_passing)
                .map_err(|e| e.to_string())
        }
    }
}

#[derive(Args)]
struct EncodeArgs {
    #[command(flatten)]
    frame: FrameArgs,
    /// Payload as a bit string.
    #[arg(long, conflicts_with = "hex")]
    bits: Option<String>,
    /// Payload as a hex string (ceil(B/4) digits, zero-padded in front).
    #[arg(long)]
    hex: Option<String>,
    /// Output format: "iq" (one `re im` line per sample) or "symbols".
    #[arg(long, default_value = "iq")]
    format: String,
}

#[derive(Args)]
struct DecodeArgs {
    #[command(flatten)]
    frame: FrameArgs,
    /// IQ text file with 2^m samples.
    #[arg(long)]
    input: PathBuf,
    /// Detector: 1 (full frame) or 2 (slotted).
    #[arg(long, default_value = "1")]
    algorithm: String,
    /// Detection budget (per slot for algorithm 2).
    #[arg(long, default_value_t = 16)]
    kmax: usize,
    /// Stop threshold: incell or fixed:<v>.
    #[arg(long, default_value = "incell")]
    epsilon: String,
    /// Per-layer list widths, comma separated.
    #[arg(long, value_delimiter = ',', default_value = "4")]
    list_plan: Vec<usize>,
    /// Transmit SNR in dB; when given, channel estimates are reported as h
    /// rather than sqrt(gamma)*h.
    #[arg(long)]
    snr_db: Option<f64>,
}

#[derive(Args)]
struct SimulateArgs {
    /// TOML config file; explicit flags below override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    m: Option<usize>,
    #[arg(long)]
    p: Option<usize>,
    #[arg(long)]
    r: Option<usize>,
    #[arg(long, value_delimiter = ',')]
    parity: Option<Vec<usize>>,
    #[arg(long)]
    message_passing: Option<bool>,
    /// Sweep of active-device counts, comma separated.
    #[arg(long = "K", value_delimiter = ',')]
    k_sweep: Option<Vec<usize>>,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    snr_db: Option<f64>,
    /// 1 or 2.
    #[arg(long)]
    algorithm: Option<String>,
    #[arg(long, value_delimiter = ',')]
    list_plan: Option<Vec<usize>>,
    /// oracle, slot-default, or fixed:<n>.
    #[arg(long)]
    kmax_policy: Option<String>,
    /// incell, outcell, or fixed:<v>.
    #[arg(long)]
    epsilon: Option<String>,
    /// square:<side> or gain-only.
    #[arg(long)]
    channel: Option<String>,
    #[arg(long)]
    channel_error_factor: Option<f64>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    theta: Option<f64>,
    /// Zero the wall_s column for byte-reproducible CSVs.
    #[arg(long)]
    no_timing: bool,
    #[arg(long)]
    stitch_beam: Option<usize>,
    /// Worker threads (default: all cores).
    #[arg(long)]
    threads: Option<usize>,
    /// Output CSV path.
    #[arg(long, default_value = "results.csv")]
    out: PathBuf,
}

#[derive(Args)]
struct PlotArgs {
    /// Results CSV produced by `simulate`.
    #[arg(long)]
    input: PathBuf,
    /// Metric column: far, mr, sr, cee, or wall_s.
    #[arg(long, default_value = "sr")]
    metric: String,
    /// Output SVG path.
    #[arg(long)]
    out: PathBuf,
}

fn main() -> ExitCode {
    env_logger::init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Encode(args) => run_encode(args),
        Command::Decode(args) => run_decode(args),
        Command::Simulate(args) => run_simulate(*args),
        Command::Plot(args) => run_plot(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(msg) => {
            eprintln!("error: {msg}");
            ExitCode::FAILURE
        }
    }
}

fn run_encode(args: EncodeArgs) -> Result<(), String> {
    let cfg = args.frame.slot_config()?;
    let bits = match (&args.bits, &args.hex) {
        (Some(b), None) => payload::parse_bits(b)?,
        (None, Some(h)) => payload::parse_hex(h, cfg.payload_bits())?,
        _ => return Err("provide exactly one of --bits or --hex".into()),
    };
    if bits.len() != cfg.payload_bits() {
        return Err(format!(
            "payload holds {} bits, configuration carries {}",
            bits.len(),
            cfg.payload_bits()
        ));
    }
    let waveform = encode_for_config(&bits, &cfg, args.frame.parity_seed)
        .map_err(|e| e.to_string())?;
    let mut frame = vec![Complex64::new(0.0, 0.0); cfg.frame_len()];
    waveform.add_scaled_into(&mut frame, Complex64::new(1.0, 0.0));
    match args.format.as_str() {
        "iq" => print!("{}", payload::format_iq(&frame)),
        "symbols" => {
            let text: Vec<&str> = frame
                .iter()
                .map(|z| match (z.re as i64, z.im as i64) {
                    (0, 0) => "0",
                    (1, 0) => "1",
                    (-1, 0) => "-1",
                    (0, 1) => "i",
                    _ => "-i",
                })
                .collect();
            println!("{}", text.join(" "));
        }
        other => return Err(format!("unknown format {other:?} (expected iq or symbols)")),
    }
    Ok(())
}

fn run_decode(args: DecodeArgs) -> Result<(), String> {
    let cfg = args.frame.slot_config()?;
    let text = fs::read_to_string(&args.input)
        .map_err(|e| format!("cannot read {}: {e}", args.input.display()))?;
    let y = payload::parse_iq(&text)?;
    if y.len() != cfg.frame_len() {
        return Err(format!(
            "{} holds {} samples, configuration expects {}",
            args.input.display(),
            y.len(),
            cfg.frame_len()
        ));
    }
    let algorithm: Algorithm = args.algorithm.parse()?;
    let plan = ListPlan::new(args.list_plan.clone()).map_err(|e| e.to_string())?;
    let len_exp = match algorithm {
        Algorithm::One => cfg.m(),
        Algorithm::Two => cfg.q(),
    };
    let epsilon = match args.epsilon.parse::<EpsilonPolicy>()? {
        EpsilonPolicy::Incell => epsilon_incell(len_exp),
        EpsilonPolicy::Fixed(v) => v,
        EpsilonPolicy::Outcell => {
            return Err("outcell epsilon needs network parameters; use fixed:<v>".into())
        }
    };
    let scale = args.snr_db.map_or(1.0, |db| 10f64.powf(db / 20.0));
    let gain_label = if args.snr_db.is_some() { "h_hat" } else { "sqrt(gamma)*h_hat" };

    let report = |payload_bits: &[u8], gain: Complex64, slot: Option<usize>, residual: f64| {
        let slot_text = slot.map_or(String::new(), |s| format!(" slot={s}"));
        println!(
            "payload={} bits={}{} {}={:.6}{:+.6}i residual={:.3}",
            payload::bits_to_hex(payload_bits),
            payload::bits_to_string(payload_bits),
            slot_text,
            gain_label,
            gain.re / scale,
            gain.im / scale,
            residual,
        );
    };

    match algorithm {
        Algorithm::One => {
            let msgs = algorithm1(&y, args.kmax, epsilon, &plan).map_err(|e| e.to_string())?;
            for msg in msgs {
                report(&msg.pair.to_bits(), msg.h_hat, None, msg.residual_energy);
            }
        }
        Algorithm::Two if cfg.r() == 0 => {
            let slots: Vec<Vec<Complex64>> =
                (0..cfg.slot_count()).map(|i| y[cfg.slot_range(0, i)].to_vec()).collect();
            let msgs =
                algorithm2(&slots, &cfg, args.kmax, epsilon, &plan).map_err(|e| e.to_string())?;
            for msg in msgs {
                let bits = slotted_payload(&msg.pair, msg.slot.unwrap_or(0), &cfg)
                    .map_err(|e| e.to_string())?;
                report(&bits, msg.h_hat, msg.slot, msg.residual_energy);
            }
        }
        Algorithm::Two => {
            let mut candidates: Vec<Vec<Vec<u8>>> = Vec::new();
            let mut gains: Vec<Vec<Complex64>> = Vec::new();
            for sb in 0..cfg.subblock_count() {
                let slots: Vec<Vec<Complex64>> =
                    (0..cfg.slot_count()).map(|i| y[cfg.slot_range(sb, i)].to_vec()).collect();
                let msgs = algorithm2(&slots, &cfg, args.kmax, epsilon, &plan)
                    .map_err(|e| e.to_string())?;
                let mut bits_list = Vec::new();
                let mut gain_list = Vec::new();
                for msg in msgs {
                    let bits = slotted_payload(&msg.pair, msg.slot.unwrap_or(0), &cfg)
                        .map_err(|e| e.to_string())?;
                    if !bits_list.contains(&bits) {
                        bits_list.push(bits);
                        gain_list.push(msg.h_hat);
                    }
                }
                candidates.push(bits_list);
                gains.push(gain_list);
            }
            let stitched = stitch_patches(&candidates, &cfg, args.frame.parity_seed, 64)
                .map_err(|e| e.to_string())?;
            for s in stitched {
                report(&s.payload, gains[0][s.parts[0]], None, 0.0);
            }
        }
    }
    Ok(())
}

fn run_simulate(args: SimulateArgs) -> Result<(), String> {
    let mut cfg = ExperimentConfig::default();
    if let Some(path) = &args.config {
        FileConfig::load(path)?.apply(&mut cfg)?;
    }
    macro_rules! set {
        ($field:ident) => {
            if let Some(v) = &args.$field {
                cfg.$field = v.clone();
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
    set!(channel_error_factor);
    set!(alpha);
    set!(theta);
    set!(stitch_beam);
    set!(threads);
    set!(list_plan);
    if let Some(v) = &args.algorithm {
        cfg.algorithm = v.parse()?;
    }
    if let Some(v) = &args.kmax_policy {
        cfg.kmax_policy = v.parse()?;
    }
    if let Some(v) = &args.epsilon {
        cfg.epsilon = v.parse()?;
    }
    if let Some(v) = &args.channel {
        cfg.channel = v.parse()?;
    }
    if args.no_timing {
        cfg.record_timing = false;
    }
    cfg.validate()?;

    let rows = runner::run_experiment(&cfg).map_err(|e| e.to_string())?;
    let mut out = Vec::new();
    runner::write_csv(&rows, &mut out).map_err(|e| e.to_string())?;
    fs::write(&args.out, out).map_err(|e| format!("cannot write {}: {e}", args.out.display()))?;

    println!("{:>8} {:>10} {:>10} {:>10} {:>10} {:>10}", "K", "far", "mr", "sr", "cee", "wall_s");
    for point in sweep_points(&rows) {
        println!(
            "{:>8} {:>10.4} {:>10.4} {:>10.4} {:>10.4} {:>10.4}",
            point.k, point.far, point.mr, point.sr, point.cee, point.wall_s
        );
    }
    println!("wrote {}", args.out.display());
    Ok(())
}

fn run_plot(args: PlotArgs) -> Result<(), String> {
    let csv = fs::read_to_string(&args.input)
        .map_err(|e| format!("cannot read {}: {e}", args.input.display()))?;
    let series = plot::aggregate_series(&csv, &args.metric)?;
    let svg = plot::render_svg(&series, &args.metric);
    fs::write(&args.out, svg).map_err(|e| format!("cannot write {}: {e}", args.out.display()))?;
    println!("wrote {}", args.out.display());
    Ok(())
}
