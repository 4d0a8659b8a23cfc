//! Campaign configuration: a flat `key = value` text file.
//!
//! ```text
//! # operating point
//! chi        = 0.01
//! theta_asym = 0.81*pi/4     # products and quotients of numbers and `pi`
//! mode       = swpe          # swpe | g2
//! angles     = 0, 45, 22.5, 67.5
//! gamma_table = 40:0.196, 50000:0.15
//! sweep_param  = tau_w
//! sweep_values = 40, 5000, 50000
//! ```
//!
//! Every [`ExperimentParams`] field is a key; unset keys keep their defaults.
//! Angles are in degrees: two values give a single (θ_S, θ_AS) setting, four
//! give the CHSH set (θ_S, θ_S′, θ_AS, θ_AS′).

use std::path::{Path, PathBuf};

use swpe_core::params::NUMERIC_FIELDS;
use swpe_core::{AngleSettings, Envelope, ExperimentParams, GammaTable, Setting, TrialMode};

use crate::error::{CliError, Result};

pub const DEFAULT_TRIALS: u64 = 100_000;
pub const DEFAULT_SEED: u64 = 1;

/// Analyzer settings of a campaign.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Angles {
    Single(Setting),
    Chsh(AngleSettings),
}

impl Angles {
    pub fn settings(&self) -> Vec<Setting> {
        match self {
            Angles::Single(s) => vec![*s],
            Angles::Chsh(a) => a.pairs().to_vec(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sweep {
    pub param: String,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CampaignConfig {
    pub params: ExperimentParams,
    pub mode: TrialMode,
    pub angles: Angles,
    pub n_trials: u64,
    pub seed: u64,
    pub sweep: Option<Sweep>,
    pub out_dir: Option<PathBuf>,
}

impl Default for CampaignConfig {
    fn default() -> Self {
        Self {
            params: ExperimentParams::default(),
            mode: TrialMode::Swpe,
            angles: Angles::Chsh(AngleSettings::canonical()),
            n_trials: DEFAULT_TRIALS,
            seed: DEFAULT_SEED,
            sweep: None,
            out_dir: None,
        }
    }
}

fn config_err(line: usize, key: &str, reason: impl std::fmt::Display) -> CliError {
    CliError::Config(format!("config line {line}: key `{key}`: {reason}"))
}

/// Evaluates `a`, `pi`, `a*pi/b`, `2*pi` and similar products/quotients.
pub fn parse_number(text: &str) -> std::result::Result<f64, String> {
    let text = text.trim();
    if text.is_empty() {
        return Err("empty value".into());
    }
    let mut value = 1.0;
    let mut op = '*';
    let mut rest = text;
    loop {
        let end = rest.find(['*', '/']).unwrap_or(rest.len());
        let token = rest[..end].trim();
        let factor = match token {
            "pi" | "PI" | "π" => std::f64::consts::PI,
            t => t
                .parse::<f64>()
                .map_err(|_| format!("`{text}` is not a number"))?,
        };
        match op {
            '*' => value *= factor,
            _ => value /= factor,
        }
        if end == rest.len() {
            break;
        }
        op = rest.as_bytes()[end] as char;
        rest = &rest[end + 1..];
    }
    if value.is_finite() {
        Ok(value)
    } else {
        Err(format!("`{text}` is not finite"))
    }
}

fn parse_list(text: &str) -> std::result::Result<Vec<f64>, String> {
    if text.trim().is_empty() {
        return Ok(Vec::new());
    }
    text.split(',').map(parse_number).collect()
}

/// Two or four comma-separated angles in degrees.
pub fn parse_angles(text: &str) -> std::result::Result<Angles, String> {
    let v = parse_list(text)?;
    match v[..] {
        [s, a] => Ok(Angles::Single(Setting::new(s, a))),
        [s, s2, a, a2] => Ok(Angles::Chsh(AngleSettings {
            theta_s: s,
            theta_s_prime: s2,
            theta_as: a,
            theta_as_prime: a2,
        })),
        _ => Err(format!("expected 2 or 4 angles, got {}", v.len())),
    }
}

fn parse_mode(text: &str) -> std::result::Result<TrialMode, String> {
    match text.trim().to_ascii_lowercase().as_str() {
        "swpe" => Ok(TrialMode::Swpe),
        "g2" => Ok(TrialMode::G2),
        other => Err(format!("unknown mode `{other}` (expected swpe or g2)")),
    }
}

fn parse_bool(text: &str) -> std::result::Result<bool, String> {
    match text.trim() {
        "true" | "yes" | "on" | "1" => Ok(true),
        "false" | "no" | "off" | "0" => Ok(false),
        other => Err(format!("`{other}` is not a boolean")),
    }
}

/// `tau:gamma` pairs separated by commas.
fn parse_gamma_table(text: &str) -> std::result::Result<GammaTable, String> {
    let points = text
        .split(',')
        .map(|pair| {
            let (x, y) = pair
                .split_once(':')
                .ok_or_else(|| format!("`{}` is not a tau:gamma pair", pair.trim()))?;
            Ok((parse_number(x)?, parse_number(y)?))
        })
        .collect::<std::result::Result<Vec<_>, String>>()?;
    GammaTable::new(points).map_err(|e| e.to_string())
}

fn parse_u64(text: &str) -> std::result::Result<u64, String> {
    let t = text.trim().replace('_', "");
    t.parse::<u64>().or_else(|_| {
        // accept 1e6-style counts when they are whole numbers
        match parse_number(&t) {
            Ok(x) if x >= 0.0 && x.fract() == 0.0 && x < u64::MAX as f64 => Ok(x as u64),
            _ => Err(format!("`{}` is not a non-negative integer", text.trim())),
        }
    })
}

impl CampaignConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = CampaignConfig::default();
        let mut seen: Vec<String> = Vec::new();
        let mut sweep_param: Option<String> = None;
        let mut sweep_values: Option<Vec<f64>> = None;
        for (i, raw) in text.lines().enumerate() {
            let line_no = i + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                CliError::Config(format!("config line {line_no}: expected `key = value`"))
            })?;
            let (key, value) = (key.trim(), value.trim());
            if seen.iter().any(|k| k == key) {
                return Err(config_err(line_no, key, "given more than once"));
            }
            seen.push(key.to_string());
            let err = |reason: String| config_err(line_no, key, reason);
            match key {
                "mode" => cfg.mode = parse_mode(value).map_err(err)?,
                "angles" => cfg.angles = parse_angles(value).map_err(err)?,
                "n_trials" => cfg.n_trials = parse_u64(value).map_err(err)?,
                "seed" => cfg.seed = parse_u64(value).map_err(err)?,
                "envelope" => {
                    cfg.params.envelope =
                        value.parse::<Envelope>().map_err(|e| err(e.to_string()))?
                }
                "truncate_on_herald" => {
                    cfg.params.truncate_on_herald = parse_bool(value).map_err(err)?
                }
                "gamma_table" => {
                    cfg.params.gamma_table = Some(parse_gamma_table(value).map_err(err)?)
                }
                "sweep_param" => sweep_param = Some(value.to_string()),
                "sweep_values" => sweep_values = Some(parse_list(value).map_err(err)?),
                "out_dir" => cfg.out_dir = Some(PathBuf::from(value)),
                k if NUMERIC_FIELDS.contains(&k) => {
                    let x = parse_number(value).map_err(err)?;
                    cfg.params.set_numeric(k, x);
                }
                _ => return Err(config_err(line_no, key, "unknown key")),
            }
        }
        match (sweep_param, sweep_values) {
            (None, None) => {}
            (param, values) => {
                cfg.sweep = Some(Sweep {
                    param: param.unwrap_or_else(|| "tau_w".into()),
                    values: values.unwrap_or_default(),
                });
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Self::parse(&text)
    }

    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        if let Angles::Chsh(a) = &self.angles {
            a.validate()?;
        }
        if self.n_trials == 0 {
            return Err(CliError::Config(
                "key `n_trials`: must be at least 1".into(),
            ));
        }
        if let Some(s) = &self.sweep {
            s.validate()?;
        }
        Ok(())
    }
}

impl Sweep {
    pub fn validate(&self) -> Result<()> {
        if !NUMERIC_FIELDS.contains(&self.param.as_str()) {
            return Err(CliError::Config(format!(
                "key `sweep_param`: `{}` is not a numeric parameter",
                self.param
            )));
        }
        if self.values.is_empty() {
            return Err(CliError::Config(
                "key `sweep_values`: sweep list is empty".into(),
            ));
        }
        if self.values.windows(2).any(|w| w[1] <= w[0]) {
            return Err(CliError::Config(
                "key `sweep_values`: values must be strictly increasing".into(),
            ));
        }
        Ok(())
    }

    /// CSV header of the swept column; durations carry their unit.
    pub fn column_name(&self) -> String {
        match self.param.as_str() {
            "tau_w" => "tau_w_ns".into(),
            "t_storage" => "t_storage_ns".into(),
            "tau_mem" => "tau_mem_ns".into(),
            p => p.into(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn numbers_with_pi() {
        assert_eq!(parse_number("0.25").unwrap(), 0.25);
        assert_eq!(parse_number("pi").unwrap(), PI);
        assert!((parse_number("0.81*pi/4").unwrap() - 0.81 * PI / 4.0).abs() < 1e-15);
        assert_eq!(parse_number(" 2 * pi ").unwrap(), 2.0 * PI);
        assert!(parse_number("pie").is_err());
        assert!(parse_number("1/0").is_err());
        assert!(parse_number("").is_err());
    }

    #[test]
    fn full_config() {
        let cfg = CampaignConfig::parse(
            "# comment\nchi = 0.02  # trailing\ntheta_asym = pi/4\nmode = g2\n\
             angles = 0, 22.5\nn_trials = 1e4\nseed = 9\nenvelope = raised-cosine\n\
             truncate_on_herald = false\ngamma_table = 40:0.2, 5e4:0.15\n\
             sweep_values = 40, 500, 5000\n",
        )
        .unwrap();
        assert_eq!(cfg.params.chi, 0.02);
        assert_eq!(cfg.params.theta_asym, PI / 4.0);
        assert_eq!(cfg.mode, TrialMode::G2);
        assert_eq!(cfg.angles, Angles::Single(Setting::new(0.0, 22.5)));
        assert_eq!(cfg.n_trials, 10_000);
        assert_eq!(cfg.seed, 9);
        assert_eq!(cfg.params.envelope, Envelope::RaisedCosine);
        assert!(!cfg.params.truncate_on_herald);
        assert_eq!(cfg.params.gamma_table.as_ref().unwrap().eval(40.0), 0.2);
        let sweep = cfg.sweep.unwrap();
        assert_eq!(sweep.param, "tau_w");
        assert_eq!(sweep.values, vec![40.0, 500.0, 5000.0]);
    }

    #[test]
    fn errors_name_the_key() {
        for (text, key) in [
            ("chi = 1.5", "chi"),
            ("bogus = 1", "bogus"),
            ("xi = abc", "xi"),
            ("angles = 1, 2, 3", "angles"),
            ("sweep_values = 5, 4", "sweep_values"),
            ("sweep_values = ", "sweep_values"),
            ("sweep_param = envelope\nsweep_values = 1", "sweep_param"),
            ("chi = 0.1\nchi = 0.2", "chi"),
            ("mode = fast", "mode"),
        ] {
            let e = CampaignConfig::parse(text).unwrap_err();
            assert_eq!(e.exit_code(), 2, "{text}");
            assert!(e.to_string().contains(&format!("`{key}`")), "{text}: {e}");
        }
        assert!(CampaignConfig::parse("no equals sign").is_err());
    }

    #[test]
    fn empty_config_is_the_default() {
        assert_eq!(
            CampaignConfig::parse("").unwrap(),
            CampaignConfig::default()
        );
    }
}
