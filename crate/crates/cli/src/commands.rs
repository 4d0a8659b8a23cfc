//! Subcommand implementations. Each returns the paths it wrote, or the text
//! it produced, so the binary stays a thin argument-parsing shell.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;
use swpe_core::analysis::tally;
use swpe_core::eventlog;
use swpe_core::fitting::{fit_background_slope, fit_memory_decay, fit_v0, fit_xi};
use swpe_core::model::retrieval_gamma;
use swpe_core::pipeline::{measure_point, summarize};
use swpe_core::rng::derive_seed;
use swpe_core::trialsim::{histogram, run_campaign};
use swpe_core::{
    AngleSettings, Channel, CountsTable, EventLog, FitResult, MeasurementPlan, PointMeasurement,
    Setting, Summary, SweepPoint,
};

use crate::config::{Angles, CampaignConfig};
use crate::error::{CliError, Result};
use crate::format::{sig6, sig6_opt};

/// Columns of the sweep table after the swept parameter.
pub const SWEEP_COLUMNS: [&str; 9] = [
    "P_S",
    "P_AS",
    "g2",
    "g2_sigma",
    "gamma",
    "gamma_sigma",
    "S",
    "S_sigma",
    "significance",
];

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::File::create(path)
        .and_then(|mut f| f.write_all(bytes))
        .map_err(|e| CliError::io(path, e))
}

fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("summary types serialize");
    s.push('\n');
    s
}

/// JSON written by `simulate` next to the event logs.
#[derive(Debug, Serialize)]
pub struct SimulationReport {
    pub seed: u64,
    pub settings: Vec<Setting>,
    pub logs: Vec<String>,
    pub warnings: Vec<String>,
    pub summary: Summary,
}

/// Runs one campaign per analyzer setting, writes one event log per setting
/// plus `summary.json`. A single setting uses `seed` directly; CHSH setting
/// `i` uses `derive_seed(seed, i + 1)`.
pub fn simulate(cfg: &CampaignConfig, out_dir: &Path) -> Result<Vec<PathBuf>> {
    cfg.validate()?;
    create_dir(out_dir)?;
    let settings = cfg.angles.settings();
    let mut table = CountsTable::new();
    let mut written = Vec::new();
    let mut names = Vec::new();
    for (i, setting) in settings.iter().enumerate() {
        let (seed, name) = match cfg.angles {
            Angles::Single(_) => (cfg.seed, "events.jsonl".to_string()),
            Angles::Chsh(_) => (
                derive_seed(cfg.seed, i as u64 + 1),
                format!("events_{}.jsonl", i + 1),
            ),
        };
        let log = run_campaign(&cfg.params, *setting, cfg.mode, cfg.n_trials, seed)?;
        let path = out_dir.join(&name);
        write_file(&path, &eventlog::to_jsonl_bytes(&log))?;
        table.add(tally(&log)?);
        written.push(path);
        names.push(name);
    }
    let angles = match cfg.angles {
        Angles::Chsh(a) => a,
        Angles::Single(_) => AngleSettings::canonical(),
    };
    let summary = summarize(&table, &cfg.params, cfg.mode, &angles)?;
    let report = SimulationReport {
        seed: cfg.seed,
        settings,
        logs: names,
        warnings: cfg.params.warnings(),
        summary,
    };
    let path = out_dir.join("summary.json");
    write_file(&path, to_json(&report).as_bytes())?;
    written.push(path);
    Ok(written)
}

/// Measures every sweep value with the same seed (common random numbers, so
/// neighbouring rows differ by the parameter change rather than by noise).
pub fn sweep(cfg: &CampaignConfig) -> Result<(String, Vec<PointMeasurement>)> {
    cfg.validate()?;
    let sweep = cfg
        .sweep
        .as_ref()
        .ok_or_else(|| CliError::Config("key `sweep_values`: sweep list is empty".into()))?;
    let Angles::Chsh(angles) = cfg.angles else {
        return Err(CliError::Config(
            "key `angles`: a sweep needs the four CHSH angles".into(),
        ));
    };
    let mut plan = MeasurementPlan::new(cfg.n_trials, cfg.seed);
    plan.bell_mode = cfg.mode;
    plan.angles = angles;
    let mut rows = Vec::with_capacity(sweep.values.len());
    for &v in &sweep.values {
        let mut params = cfg.params.clone();
        params.set_numeric(&sweep.param, v);
        params
            .validate()
            .map_err(|e| CliError::Config(format!("sweep value {v}: {e}")))?;
        rows.push(measure_point(&params, &plan)?);
    }
    let mut csv = csv::Writer::from_writer(Vec::new());
    let mut header = vec![sweep.column_name()];
    header.extend(SWEEP_COLUMNS.iter().map(|c| c.to_string()));
    csv.write_record(&header).expect("in-memory write");
    for (&v, m) in sweep.values.iter().zip(&rows) {
        csv.write_record([
            sig6(v),
            sig6(m.p_s.value),
            sig6(m.p_as.value),
            sig6(m.g2.value),
            sig6(m.g2.sigma),
            sig6_opt(m.gamma.map(|g| g.value)),
            sig6_opt(m.gamma.map(|g| g.sigma)),
            sig6(m.bell.s.value),
            sig6(m.bell.s.sigma),
            sig6(m.bell.significance),
        ])
        .expect("in-memory write");
    }
    let bytes = csv.into_inner().expect("in-memory flush");
    Ok((String::from_utf8(bytes).expect("ascii csv"), rows))
}

pub fn load_logs(paths: &[PathBuf]) -> Result<Vec<EventLog>> {
    if paths.is_empty() {
        return Err(CliError::Config("no event logs given (--data)".into()));
    }
    paths
        .iter()
        .map(|p| {
            eventlog::load(p).map_err(|e| match e {
                swpe_core::Error::Io(_) => CliError::from(e),
                other => CliError::Parse(format!("{}: {other}", p.display())),
            })
        })
        .collect()
}

/// Tallies the logs and reduces them to a JSON summary. All logs must share
/// parameters and mode; S is reported when `angles` names four settings that
/// are all present.
pub fn analyze(logs: &[EventLog], angles: Option<AngleSettings>) -> Result<String> {
    let first = logs
        .first()
        .ok_or_else(|| CliError::Config("no event logs given (--data)".into()))?;
    if let Some(bad) = logs
        .iter()
        .find(|l| l.header.params != first.header.params || l.header.mode != first.header.mode)
    {
        return Err(CliError::Parse(format!(
            "log with angles {:?} was recorded with different parameters or mode",
            bad.header.angles
        )));
    }
    let table = CountsTable::from_logs(logs)?;
    let angles = angles.unwrap_or_else(AngleSettings::canonical);
    let summary = summarize(&table, &first.header.params, first.header.mode, &angles)?;
    Ok(to_json(&summary))
}

/// Names accepted by `fit --model`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FitModel {
    Background,
    Decay,
    G2,
    S,
}

impl std::str::FromStr for FitModel {
    type Err = CliError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "background" => Ok(FitModel::Background),
            "decay" => Ok(FitModel::Decay),
            "g2" => Ok(FitModel::G2),
            "s" | "S" => Ok(FitModel::S),
            other => Err(CliError::Config(format!(
                "unknown model `{other}` (expected background, decay, g2 or s)"
            ))),
        }
    }
}

impl FitModel {
    pub fn name(self) -> &'static str {
        match self {
            FitModel::Background => "background",
            FitModel::Decay => "decay",
            FitModel::G2 => "g2",
            FitModel::S => "s",
        }
    }

    /// Preferred x columns, y column. Without a matching header the first two
    /// columns are used; a `<y>_sigma` column supplies weights.
    fn columns(self) -> (&'static [&'static str], &'static str) {
        match self {
            FitModel::Background => (&["tau_w_ns"], "B"),
            FitModel::Decay => (&["t_ns", "tau_w_ns"], "gamma"),
            FitModel::G2 => (&["tau_w_ns"], "g2"),
            FitModel::S => (&["g2"], "S"),
        }
    }
}

/// Reads `(x, y[, sigma])` points from CSV with a header row. Rows with an
/// empty y field are skipped.
pub fn read_points(csv_text: &str, model: FitModel) -> Result<Vec<SweepPoint>> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(csv_text.as_bytes());
    let headers = reader
        .headers()
        .map_err(|e| CliError::Parse(format!("line 1: {e}")))?
        .clone();
    let find = |name: &str| headers.iter().position(|h| h == name);
    let (x_names, y_name) = model.columns();
    let named_x = x_names.iter().find_map(|n| find(n));
    let (xi, yi) = match (named_x, find(y_name)) {
        (Some(x), Some(y)) => (x, y),
        _ if headers.len() >= 2 => (0, 1),
        _ => return Err(CliError::Parse("line 1: need at least two columns".into())),
    };
    let sigma_name = format!("{}_sigma", &headers[yi]);
    let si = find(&sigma_name).or_else(|| (named_x.is_none() && headers.len() >= 3).then_some(2));

    let mut points = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            CliError::Parse(format!("line {line}: {e}"))
        })?;
        let line = record.position().map_or(0, |p| p.line());
        let field = |i: usize| -> Result<Option<f64>> {
            let raw = record.get(i).unwrap_or("");
            if raw.is_empty() {
                return Ok(None);
            }
            raw.parse::<f64>()
                .map(Some)
                .map_err(|_| CliError::Parse(format!("line {line}: `{raw}` is not a number")))
        };
        let (Some(x), Some(y)) = (field(xi)?, field(yi)?) else {
            continue;
        };
        points.push(match si.map(field).transpose()?.flatten() {
            Some(s) => SweepPoint::with_sigma(x, y, s),
            None => SweepPoint::new(x, y),
        });
    }
    Ok(points)
}

/// Fits one calibration curve. The g² model takes χ, the background terms and
/// the γ(τ_w) law from `cfg`.
pub fn fit(model: FitModel, points: &[SweepPoint], cfg: &CampaignConfig) -> Result<FitResult> {
    let p = &cfg.params;
    let res = match model {
        FitModel::Background => fit_background_slope(points),
        FitModel::Decay => fit_memory_decay(points),
        FitModel::G2 => {
            let gamma_of = |tau: f64| {
                let mut q = p.clone();
                q.tau_w = tau;
                retrieval_gamma(&q)
            };
            fit_xi(points, gamma_of, p.chi, p.k_bg, p.c_bg)
        }
        FitModel::S => fit_v0(points),
    };
    res.map_err(|e| match e {
        // malformed or insufficient data points are a property of the input file
        swpe_core::Error::InvalidArgument { .. } => CliError::Parse(e.to_string()),
        other => other.into(),
    })
}

pub fn fit_json(result: &FitResult) -> String {
    to_json(result)
}

/// `bin_start_ns,counts` rows.
pub fn hist(log: &EventLog, channel: Channel, bin_ns: f64) -> Result<String> {
    let rows = histogram(log, channel, bin_ns)?;
    let mut csv = csv::Writer::from_writer(Vec::new());
    csv.write_record(["bin_start_ns", "counts"])
        .expect("in-memory write");
    for (start, count) in rows {
        csv.write_record([sig6(start), count.to_string()])
            .expect("in-memory write");
    }
    let bytes = csv.into_inner().expect("in-memory flush");
    Ok(String::from_utf8(bytes).expect("ascii csv"))
}

/// Writes `text` to `dir/name`, creating `dir`.
pub fn write_output(dir: &Path, name: &str, text: &str) -> Result<PathBuf> {
    create_dir(dir)?;
    let path = dir.join(name);
    write_file(&path, text.as_bytes())?;
    Ok(path)
}
