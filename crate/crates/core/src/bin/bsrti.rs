//! `bsrti simulate | reconstruct | material-sweep`
//!
//! Settings are layered: built-in reference scene, then `--scene`, then
//! `--params`, then individual flags.

use std::path::PathBuf;
use std::process::ExitCode;

use backscatter_rti::config::Config;
use backscatter_rti::ingest::Imputation;
use backscatter_rti::pipeline::{cmd_material_sweep, cmd_reconstruct, cmd_simulate, ReconstructOptions, Scenario};
use backscatter_rti::render::GrayScale;
use backscatter_rti::Result;
use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(name = "bsrti", version, about = "RFID backscatter RSSI simulation and radio tomographic imaging")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args)]
struct Common {
    /// Scene file (reader, tags, grid).
    #[arg(long, global = true)]
    scene: Option<PathBuf>,
    /// Parameter file, applied after the scene file.
    #[arg(long, global = true)]
    params: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    #[arg(long, global = true)]
    frame_rate: Option<f64>,
    /// Frame assembly window, seconds.
    #[arg(long, global = true)]
    window: Option<f64>,
    /// floor | zero | drop
    #[arg(long, global = true)]
    imputation: Option<Imputation>,
}

#[derive(Subcommand)]
enum Cmd {
    /// Write simulated baseline and/or walk RSSI logs.
    Simulate {
        /// baseline | walk | both
        #[arg(long, default_value = "both")]
        scenario: Scenario,
    },
    /// Reconstruct attenuation images and detections from an RSSI log.
    Reconstruct {
        log: PathBuf,
        /// Quiet-room log used as baseline instead of the log's leading period.
        #[arg(long)]
        baseline: Option<PathBuf>,
        /// Also write the weight matrix and one membership graymap per link.
        #[arg(long)]
        render_weights: bool,
        /// Fixed graymap scale `MIN,MAX` instead of per-frame scaling.
        #[arg(long, value_parser = parse_scale, allow_hyphen_values = true)]
        fixed_scale: Option<(f64, f64)>,
    },
    /// Mean RSS for each substrate material and channel scenario.
    MaterialSweep,
}

fn parse_scale(s: &str) -> std::result::Result<(f64, f64), String> {
    let (a, b) = s.split_once(',').ok_or("expected MIN,MAX")?;
    let lo: f64 = a.trim().parse().map_err(|e| format!("{e}"))?;
    let hi: f64 = b.trim().parse().map_err(|e| format!("{e}"))?;
    if !(hi > lo) {
        return Err("MAX must exceed MIN".into());
    }
    Ok((lo, hi))
}

fn config(c: &Common) -> Result<Config> {
    let mut cfg = Config::default();
    for path in [&c.scene, &c.params].into_iter().flatten() {
        cfg.apply_file(path)?;
    }
    if let Some(s) = c.seed {
        cfg.seed = s;
    }
    if let Some(r) = c.frame_rate {
        cfg.frame_rate_hz = r;
    }
    if let Some(w) = c.window {
        cfg.window_s = w;
    }
    if let Some(i) = c.imputation {
        cfg.imputation = i;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run(cli: Cli) -> Result<()> {
    let cfg = config(&cli.common)?;
    let out = &cli.common.out;
    match cli.cmd {
        Cmd::Simulate { scenario } => {
            let s = cmd_simulate(&cfg, scenario, out)?;
            for (name, n) in [("baseline", s.baseline_frames), ("walk", s.walk_frames)] {
                if let Some(n) = n {
                    println!("{name}: {n} frames");
                }
            }
            println!("seed: {}", s.seed);
        }
        Cmd::Reconstruct {
            log,
            baseline,
            render_weights,
            fixed_scale,
        } => {
            let opts = ReconstructOptions {
                baseline_log: baseline,
                render_weights,
                gray_scale: match fixed_scale {
                    Some((min, max)) => GrayScale::Fixed { min, max },
                    None => GrayScale::PerFrame,
                },
            };
            println!("{}", cmd_reconstruct(&cfg, &log, &opts, out)?);
        }
        Cmd::MaterialSweep => {
            for c in cmd_material_sweep(&cfg, out)? {
                let flag = if c.missing { "  missing" } else { "" };
                println!("{:8} {:15} {:8.2} dBm{flag}", c.material.to_string(), c.scenario.name(), c.mean_rss_dbm);
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
