use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use swpe_cli::commands::{self, FitModel};
use swpe_cli::config::{parse_angles, Angles, CampaignConfig};
use swpe_cli::{CliError, Result, DEFAULT_OUT_DIR, OUT_DIR_ENV};
use swpe_core::{AngleSettings, Channel};

/// Monte Carlo and analysis toolkit for heralded spin-wave/photon entanglement.
///
/// Exit codes: 0 ok, 2 configuration, 3 I/O, 4 parse, 5 statistics.
#[derive(Debug, Parser)]
#[command(name = "swpe", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, clap::Args)]
struct CampaignArgs {
    /// Configuration file (`key = value` lines, `#` comments).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides the configured seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides the configured number of trials per campaign.
    #[arg(long)]
    trials: Option<u64>,
    /// Overrides the configured angles: "θS,θAS" or "θS,θS',θAS,θAS'" in degrees.
    #[arg(long, allow_hyphen_values = true)]
    angles: Option<String>,
    /// Output directory.
    #[arg(long, env = OUT_DIR_ENV)]
    out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ChannelArg {
    S,
    As,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run campaigns and write event logs plus a JSON summary.
    Simulate(CampaignArgs),
    /// Measure g², γ and S over a parameter sweep and write sweep.csv.
    Sweep(CampaignArgs),
    /// Summarize one or more event logs as JSON.
    Analyze {
        /// Event logs (JSON Lines).
        #[arg(long, required = true, num_args = 1..)]
        data: Vec<PathBuf>,
        /// Four CHSH angles in degrees; defaults to 0,45,22.5,67.5.
        #[arg(long, allow_hyphen_values = true)]
        angles: Option<String>,
        /// Also write summary.json into this directory.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Fit a calibration model to CSV data and print the result as JSON.
    Fit {
        /// One of background, decay, g2, s.
        #[arg(long)]
        model: String,
        /// CSV with a header row.
        #[arg(long)]
        data: PathBuf,
        /// Supplies χ, backgrounds and the γ(τ_w) law for the g2 model.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Also write fit_<model>.json into this directory.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Histogram detection times of one channel as CSV.
    Hist {
        /// Event log (JSON Lines).
        #[arg(long)]
        data: PathBuf,
        /// Bin width in nanoseconds.
        #[arg(long, default_value_t = 10.0)]
        bin_ns: f64,
        #[arg(long, value_enum, default_value_t = ChannelArg::S)]
        channel: ChannelArg,
        /// Also write hist.csv into this directory.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn config_from(path: Option<&Path>) -> Result<CampaignConfig> {
    match path {
        Some(p) => CampaignConfig::load(p),
        None => Ok(CampaignConfig::default()),
    }
}

fn campaign_config(args: &CampaignArgs) -> Result<(CampaignConfig, PathBuf)> {
    let mut cfg = config_from(args.config.as_deref())?;
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    if let Some(n) = args.trials {
        cfg.n_trials = n;
    }
    if let Some(a) = &args.angles {
        cfg.angles = parse_angles(a).map_err(|e| CliError::Config(format!("--angles: {e}")))?;
    }
    let out = args
        .out
        .clone()
        .or_else(|| cfg.out_dir.clone())
        .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT_DIR));
    Ok((cfg, out))
}

fn chsh_angles(text: Option<&str>) -> Result<Option<AngleSettings>> {
    match text.map(parse_angles).transpose() {
        Ok(None) => Ok(None),
        Ok(Some(Angles::Chsh(a))) => Ok(Some(a)),
        Ok(Some(Angles::Single(_))) => Err(CliError::Config(
            "--angles: analysis needs the four CHSH angles".into(),
        )),
        Err(e) => Err(CliError::Config(format!("--angles: {e}"))),
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Simulate(args) => {
            let (cfg, out) = campaign_config(&args)?;
            for w in cfg.params.warnings() {
                eprintln!("warning: {w}");
            }
            for path in commands::simulate(&cfg, &out)? {
                println!("{}", path.display());
            }
        }
        Command::Sweep(args) => {
            let (cfg, out) = campaign_config(&args)?;
            for w in cfg.params.warnings() {
                eprintln!("warning: {w}");
            }
            let (csv, _) = commands::sweep(&cfg)?;
            println!(
                "{}",
                commands::write_output(&out, "sweep.csv", &csv)?.display()
            );
        }
        Command::Analyze { data, angles, out } => {
            let angles = chsh_angles(angles.as_deref())?;
            let logs = commands::load_logs(&data)?;
            let json = commands::analyze(&logs, angles)?;
            print!("{json}");
            if let Some(dir) = out {
                commands::write_output(&dir, "summary.json", &json)?;
            }
        }
        Command::Fit {
            model,
            data,
            config,
            out,
        } => {
            let model: FitModel = model.parse()?;
            let cfg = config_from(config.as_deref())?;
            let text = std::fs::read_to_string(&data)
                .map_err(|e| CliError::Io(format!("{}: {e}", data.display())))?;
            let points = commands::read_points(&text, model)?;
            let json = commands::fit_json(&commands::fit(model, &points, &cfg)?);
            print!("{json}");
            if let Some(dir) = out {
                let name = format!("fit_{}.json", model.name());
                commands::write_output(&dir, &name, &json)?;
            }
        }
        Command::Hist {
            data,
            bin_ns,
            channel,
            out,
        } => {
            let log = commands::load_logs(std::slice::from_ref(&data))?.remove(0);
            let channel = match channel {
                ChannelArg::S => Channel::Stokes,
                ChannelArg::As => Channel::AntiStokes,
            };
            let csv = commands::hist(&log, channel, bin_ns)?;
            print!("{csv}");
            if let Some(dir) = out {
                commands::write_output(&dir, "hist.csv", &csv)?;
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    // clap reports usage errors with exit code 2, matching configuration errors
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
