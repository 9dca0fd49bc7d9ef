use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use hsrlink::channel::{sir_db, TapState};
use hsrlink::dfo::{multiplication_count, DfoMethod};
use hsrlink::harness::{resolve_positions, sweep, write_csv, Estimator, PositionSpec, SimConfig};
use hsrlink::Complex64;

#[derive(Parser)]
#[command(name = "hsrlink", version, about = "High-speed-railway OFDM link simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a Monte Carlo sweep and write the metrics CSV.
    Simulate {
        #[arg(long)]
        config: Option<PathBuf>,
        /// Output CSV; standard output when absent.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        drops: Option<usize>,
        /// SNR range `start:stop:step` in dB, or a single value.
        #[arg(long)]
        snr: Option<String>,
        /// Track position in metres, `p3db` or `sweep`.
        #[arg(long)]
        position: Option<String>,
        /// Comma-separated estimator names.
        #[arg(long, value_delimiter = ',')]
        estimators: Option<Vec<String>>,
        /// `proposed` or `es`.
        #[arg(long)]
        dfo: Option<String>,
    },
    /// Signal-to-ICI ratio at the configured positions.
    Sir {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        position: Option<String>,
    },
    /// Nominal multiplication counts of both DFO estimators.
    Complexity {
        #[arg(long, default_value_t = 2)]
        m: usize,
        #[arg(long, default_value_t = 4)]
        n: usize,
        #[arg(long, default_value_t = 900.0)]
        f_max: f64,
        #[arg(long, default_value_t = 2.0)]
        step: f64,
    },
}

fn load(config: Option<&PathBuf>) -> Result<SimConfig> {
    match config {
        Some(p) => SimConfig::from_file(p).with_context(|| format!("reading {}", p.display())),
        None => Ok(SimConfig::default()),
    }
}

fn parse_snr(spec: &str) -> Result<Vec<f64>> {
    let parts: Vec<f64> = spec
        .split(':')
        .map(|s| s.trim().parse::<f64>().with_context(|| format!("bad SNR value '{s}'")))
        .collect::<Result<_>>()?;
    match parts[..] {
        [v] => Ok(vec![v]),
        [start, stop, step] => {
            if !(step > 0.0) || stop < start {
                bail!("SNR range needs start <= stop and a positive step");
            }
            let count = ((stop - start) / step + 1e-9).floor() as usize + 1;
            Ok((0..count).map(|i| start + i as f64 * step).collect())
        }
        _ => bail!("SNR must be 'value' or 'start:stop:step'"),
    }
}

fn parse_method(s: &str) -> Result<DfoMethod> {
    match s {
        "proposed" => Ok(DfoMethod::Proposed),
        "es" => Ok(DfoMethod::ExhaustiveSearch),
        _ => bail!("unknown DFO method '{s}', expected 'proposed' or 'es'"),
    }
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Simulate {
            config,
            out,
            seed,
            drops,
            snr,
            position,
            estimators,
            dfo,
        } => {
            let mut cfg = load(config.as_ref())?;
            if let Some(s) = seed {
                cfg.seed = s;
            }
            if let Some(d) = drops {
                cfg.drops = d;
            }
            if let Some(s) = snr {
                cfg.sweep.snr_db = parse_snr(&s)?;
            }
            if let Some(p) = position {
                cfg.sweep.position = p.parse::<PositionSpec>()?;
            }
            if let Some(list) = estimators {
                cfg.estimation.estimators = list.iter().map(|e| e.parse::<Estimator>()).collect::<Result<_, _>>()?;
            }
            if let Some(m) = dfo {
                cfg.dfo.method = parse_method(&m)?;
            }
            cfg.validate()?;
            let records = sweep(&cfg)?;
            match out {
                Some(path) => {
                    let file = File::create(&path).with_context(|| format!("creating {}", path.display()))?;
                    let mut w = BufWriter::new(file);
                    write_csv(&mut w, &records)?;
                    w.flush()?;
                }
                None => write_csv(io::stdout().lock(), &records)?,
            }
        }
        Command::Sir { config, position } => {
            let mut cfg = load(config.as_ref())?;
            if let Some(p) = position {
                cfg.sweep.position = p.parse::<PositionSpec>()?;
            }
            cfg.validate()?;
            let grid = cfg.resource_grid()?;
            println!("position_m,power_0,power_1,dfo_0_hz,dfo_1_hz,sir_db");
            for x in resolve_positions(&cfg)? {
                let powers = cfg.geometry.tap_powers_at(x, cfg.taps.pathloss_exponent)?;
                let dfos = cfg.geometry.tap_dfos_at(x)?;
                let taps: Vec<TapState> = (0..2)
                    .map(|q| TapState {
                        gain: Complex64::new(powers[q].sqrt(), 0.0),
                        delay_samples: 0,
                        dfo_hz: dfos[q],
                        rician_k: f64::INFINITY,
                    })
                    .collect();
                let sir = sir_db(&taps, &grid, grid.used_count)?;
                println!("{x:.3},{:.6},{:.6},{:.3},{:.3},{sir:.3}", powers[0], powers[1], dfos[0], dfos[1]);
            }
        }
        Command::Complexity { m, n, f_max, step } => {
            let p = multiplication_count(DfoMethod::Proposed, m, n, f_max, step);
            let es = multiplication_count(DfoMethod::ExhaustiveSearch, m, n, f_max, step);
            println!("proposed: {p}");
            println!("exhaustive search: {es}");
            println!("ratio: {}", es / p);
        }
    }
    Ok(())
}
