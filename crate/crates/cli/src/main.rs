use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use chansounder::analysis::{eirp, max_measurable_path_loss, LinkBudget};
use chansounder::campaign::{run_campaign, CampaignKind, CampaignSpec, ResultBundle};
use chansounder::correlator::Preset;
use chansounder::error::{ErrorClass, Result, SounderError};
use chansounder::io::{fit_report, read_path_loss_points, write_fit_report, write_pdp_csv};
use chansounder::plot::{emit_plot_data, PlotKind};
use chansounder::pn::{generate_leapforward, generate_msequence, periodic_autocorrelation, LfsrSpec};
use chansounder::scenario::load_scenario;
use chansounder::sweep::{measure_link, CorrelatorKind, Sounder};
use chansounder::{ci_fit, scalar::power_to_db};

#[derive(Parser)]
#[command(
    name = "chansounder",
    version,
    about = "Sliding-correlator channel sounder simulator"
)]
struct Cli {
    /// Log at debug level.
    #[arg(short, long, global = true)]
    verbose: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct RunOpts {
    /// Scenario file (TOML).
    #[arg(long)]
    scenario: PathBuf,
    #[arg(long, default_value = "desk")]
    preset: Preset,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Use the sample-by-sample correlator instead of the cyclic one.
    #[arg(long)]
    literal: bool,
}

#[derive(Args, Clone)]
struct SweepOpts {
    #[arg(long, default_value_t = 15.0)]
    step_deg: f64,
    #[arg(long, default_value_t = 5)]
    sweeps: usize,
    /// Write every averaged PDP as CSV.
    #[arg(long)]
    pdps: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Generate and inspect an m-sequence.
    Pn {
        /// Register order.
        #[arg(long, default_value_t = 11)]
        order: u32,
        /// Feedback taps, comma separated; defaults to the built-in preset
        /// for the order.
        #[arg(long, value_delimiter = ',')]
        taps: Option<Vec<u32>>,
        /// Chips produced per leap-forward clock.
        #[arg(long, default_value_t = 1)]
        chips_per_cycle: usize,
        /// Write chips (one per line, +1/-1) here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Measure one link with the RX horn on the strongest azimuth.
    Simulate {
        #[command(flatten)]
        run: RunOpts,
        /// RX site id; the first site when omitted.
        #[arg(long)]
        rx: Option<String>,
        /// Skip receiver noise.
        #[arg(long)]
        noiseless: bool,
    },
    /// Azimuth sweeps at one RX site.
    Sweep {
        #[command(flatten)]
        run: RunOpts,
        #[command(flatten)]
        sweep: SweepOpts,
        #[arg(long)]
        rx: Option<String>,
    },
    /// Sweeps at every RX site of a route or cluster scenario.
    Campaign {
        #[command(flatten)]
        run: RunOpts,
        #[command(flatten)]
        sweep: SweepOpts,
        #[arg(long, default_value = "route")]
        kind: CampaignKind,
        /// Receiver speed for the temporal fading rate, m/s.
        #[arg(long, default_value_t = chansounder::campaign::DEFAULT_SPEED_MPS)]
        speed: f64,
    },
    /// Close-in path loss fit of a CSV with distance_m and path_loss_dB.
    Fit {
        input: PathBuf,
        #[arg(long, default_value_t = 73.5e9)]
        frequency: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Maximum measurable path loss of a link budget.
    Budget {
        #[arg(long, default_value_t = 14.6)]
        tx_power: f64,
        #[arg(long, default_value_t = 27.0)]
        tx_gain: f64,
        #[arg(long, default_value_t = 27.0)]
        rx_gain: f64,
        /// Defaults to the full-preset processing gain.
        #[arg(long)]
        processing_gain: Option<f64>,
        #[arg(long, default_value_t = 20)]
        averages: usize,
        #[arg(long, default_value_t = 5.0)]
        noise_figure: f64,
        #[arg(long, default_value_t = 62.5e3)]
        bandwidth: f64,
        #[arg(long, default_value_t = 5.0)]
        snr: f64,
    },
    /// Plot-ready tables from a campaign bundle.
    Emit {
        /// bundle.json or the directory holding it.
        bundle: PathBuf,
        #[arg(long)]
        kind: PlotKind,
        #[arg(long)]
        out: PathBuf,
    },
}

fn exit_code(e: &SounderError) -> u8 {
    match e.class() {
        ErrorClass::Config | ErrorClass::Io => 2,
        ErrorClass::Simulation => 3,
        ErrorClass::Analysis => 4,
    }
}

fn correlator(literal: bool) -> CorrelatorKind {
    if literal {
        CorrelatorKind::Literal
    } else {
        CorrelatorKind::Fast
    }
}

fn campaign_spec(run: &RunOpts, sweep: &SweepOpts, kind: CampaignKind) -> CampaignSpec {
    CampaignSpec {
        step_deg: sweep.step_deg,
        sweeps: sweep.sweeps,
        preset: run.preset,
        correlator: correlator(run.literal),
        out_dir: run.out.clone(),
        seed: run.seed,
        write_pdps: sweep.pdps,
        ..CampaignSpec::new(&run.scenario, kind)
    }
}

fn summarize(bundle: &ResultBundle) {
    println!("config_hash {}", bundle.manifest.config_hash);
    for l in &bundle.locations {
        match (l.omni_dbm, l.path_loss_db) {
            (Some(p), Some(pl)) => println!(
                "{:<8} {:<4} {:>8.2} m  omni {:>8.2} dBm  PL {:>7.2} dB",
                l.rx_id, l.condition, l.distance_m, p, pl
            ),
            _ => println!("{:<8} {:<4} {:>8.2} m  no signal", l.rx_id, l.condition, l.distance_m),
        }
    }
    for f in &bundle.fits {
        println!(
            "{} PLE {:.3}  sigma {:.2} dB  ({} points)",
            f.condition, f.fit.ple, f.fit.sigma_db, f.fit.point_count
        );
    }
    if let Some(f) = &bundle.fading {
        println!(
            "fading {:.3} dB/m = {:.2} dB/s over {}..{} m",
            f.db_per_m, f.db_per_s, f.start_m, f.end_m
        );
    }
    for g in &bundle.group_spreads {
        println!("group {} std {:.2} dB over {} sites", g.group, g.std_db, g.sites);
    }
}

fn pn(order: u32, taps: Option<Vec<u32>>, chips_per_cycle: usize, out: Option<&Path>) -> Result<()> {
    let spec = match taps {
        Some(t) => LfsrSpec::with_ones_seed(order, &t)?,
        None => LfsrSpec::presets()
            .into_iter()
            .find(|s| s.order() == order)
            .ok_or_else(|| SounderError::InvalidLfsr(format!("no preset for order {order}; pass --taps")))?,
    };
    let seq = if chips_per_cycle > 1 {
        generate_leapforward(&spec, chips_per_cycle)?
    } else {
        generate_msequence(&spec)?
    };
    let n = seq.len();
    let sidelobes: Vec<f64> = (1..n).map(|l| periodic_autocorrelation::<f64>(&seq, l)).collect();
    let (lo, hi) = sidelobes
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    println!("order {order} taps {:?} period {n}", spec.taps());
    println!("ones {} zeros {}", seq.count_plus(), n - seq.count_plus());
    println!(
        "autocorrelation peak {} off-peak [{lo}, {hi}]",
        periodic_autocorrelation::<f64>(&seq, 0)
    );
    if let Some(path) = out {
        let body: String = seq.chips().iter().map(|c| format!("{c}\n")).collect();
        std::fs::write(path, body).map_err(|e| SounderError::Io {
            path: path.into(),
            source: e,
        })?;
    }
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Pn {
            order,
            taps,
            chips_per_cycle,
            out,
        } => pn(order, taps, chips_per_cycle, out.as_deref()),
        Command::Simulate { run, rx, noiseless } => {
            let sc = load_scenario(&run.scenario)?;
            sc.validate()?;
            let index = match &rx {
                None => 0,
                Some(id) => sc
                    .rx
                    .iter()
                    .position(|s| &s.id == id)
                    .ok_or_else(|| SounderError::Config {
                        path: run.scenario.display().to_string(),
                        message: format!("no RX site with id {id:?}"),
                    })?,
            };
            let sounder = Sounder::<f64>::new(run.preset, correlator(run.literal))?;
            let (az, pdp) = measure_link(&sounder, &sc, index, run.seed, !noiseless)?;
            println!("RX {} azimuth {az} deg", sc.rx[index].id);
            println!("distance {:.2} m", sc.separation_m(index)?);
            match pdp.total_power_dbm() {
                Some(p) if pdp.has_signal() => println!("received {p:.2} dBm"),
                _ => println!("no detectable signal"),
            }
            if let Some(f) = pdp.noise_floor_dbm {
                println!("noise floor {f:.2} dBm");
            }
            if let Some(k) = pdp.peak_index() {
                println!(
                    "peak {:.2} dBm at {:.2} ns",
                    power_to_db(pdp.power[k]),
                    pdp.excess_delay(k) * 1e9
                );
            }
            if let Some(dir) = &run.out {
                write_pdp_csv(&dir.join("pdp.csv"), &pdp)?;
            }
            Ok(())
        }
        Command::Sweep { run, sweep, rx } => {
            let spec = CampaignSpec {
                rx,
                ..campaign_spec(&run, &sweep, CampaignKind::Single)
            };
            summarize(&run_campaign(&spec)?);
            Ok(())
        }
        Command::Campaign {
            run,
            sweep,
            kind,
            speed,
        } => {
            let spec = CampaignSpec {
                speed_mps: speed,
                ..campaign_spec(&run, &sweep, kind)
            };
            summarize(&run_campaign(&spec)?);
            Ok(())
        }
        Command::Fit { input, frequency, out } => {
            let pts = read_path_loss_points(&input)?;
            let fit = ci_fit(&pts, frequency)?;
            print!("{}", fit_report(&fit));
            if let Some(path) = out {
                write_fit_report(&path, &fit)?;
            }
            Ok(())
        }
        Command::Budget {
            tx_power,
            tx_gain,
            rx_gain,
            processing_gain,
            averages,
            noise_figure,
            bandwidth,
            snr,
        } => {
            let lb = LinkBudget {
                tx_power_dbm: tx_power,
                tx_gain_dbi: tx_gain,
                rx_gain_dbi: rx_gain,
                processing_gain_db: processing_gain
                    .unwrap_or_else(|| Preset::Full.config::<f64>().processing_gain_db()),
                averaging_gain_db: chansounder::analysis::averaging_gain_db(averages),
                noise_floor_dbm: chansounder::analysis::noise_floor_dbm(noise_figure, bandwidth),
                snr_threshold_db: snr,
            };
            lb.validate()?;
            println!("eirp_dBm = {}", eirp(tx_power, tx_gain));
            println!("processing_gain_dB = {}", lb.processing_gain_db);
            println!("averaging_gain_dB = {}", lb.averaging_gain_db);
            println!("noise_floor_dBm = {}", lb.noise_floor_dbm);
            println!("max_path_loss_dB = {}", max_measurable_path_loss(&lb));
            Ok(())
        }
        Command::Emit { bundle, kind, out } => {
            let path = if bundle.is_dir() {
                bundle.join("bundle.json")
            } else {
                bundle
            };
            let b = ResultBundle::load(&path)?;
            for p in emit_plot_data(&b, kind, &out)? {
                println!("{}", p.display());
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = if cli.verbose { "debug" } else { "warn" };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
