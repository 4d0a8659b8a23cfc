//! Effective physical parameters of one simulated configuration.

use std::f64::consts::FRAC_PI_4;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Asymmetry angle of the entangled state, 0.81·π/4.
pub const DEFAULT_THETA_ASYM: f64 = 0.81 * FRAC_PI_4;

/// Write-time decoherence fraction that takes a 0.20 intrinsic retrieval down
/// to 0.15 at τ_w = 50 μs with 1 μs storage and a 50 μs lifetime:
/// `ln(0.20/0.15) − 1 μs/50 μs`.
pub const DEFAULT_ALPHA_WRITE: f64 = 0.267_682_072_451_780_9;

/// Background slope of the Stokes channel, counts per ns (4.84e-3 per 100 ns).
pub const DEFAULT_K_BG: f64 = 4.84e-5;

/// Above this excitation probability the first-order model is a poor fit.
pub const CHI_WARN_THRESHOLD: f64 = 0.1;

/// Temporal envelope of the write pulse; the Stokes emission time follows it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Envelope {
    #[default]
    Rectangular,
    RaisedCosine,
}

impl FromStr for Envelope {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "rectangular" | "rect" => Ok(Envelope::Rectangular),
            "raised-cosine" | "raised_cosine" | "hann" => Ok(Envelope::RaisedCosine),
            other => Err(Error::arg(
                "envelope",
                format!("unknown envelope `{other}` (expected rectangular or raised-cosine)"),
            )),
        }
    }
}

impl fmt::Display for Envelope {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Envelope::Rectangular => "rectangular",
            Envelope::RaisedCosine => "raised-cosine",
        })
    }
}

/// Measured retrieval efficiency versus write-pulse duration, linearly
/// interpolated and held constant beyond the end points.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GammaTable {
    points: Vec<(f64, f64)>,
}

impl GammaTable {
    /// `points` are `(tau_w_ns, gamma)` pairs with strictly increasing `tau_w_ns`.
    pub fn new(points: Vec<(f64, f64)>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::arg("gamma_table", "table is empty"));
        }
        for &(x, y) in &points {
            if !x.is_finite() || x < 0.0 {
                return Err(Error::arg("gamma_table", format!("bad duration {x}")));
            }
            if !(0.0..=1.0).contains(&y) {
                return Err(Error::arg(
                    "gamma_table",
                    format!("gamma {y} outside [0, 1]"),
                ));
            }
        }
        if points.windows(2).any(|w| w[1].0 <= w[0].0) {
            return Err(Error::arg(
                "gamma_table",
                "durations must be strictly increasing",
            ));
        }
        Ok(Self { points })
    }

    pub fn points(&self) -> &[(f64, f64)] {
        &self.points
    }

    pub fn eval(&self, tau_w: f64) -> f64 {
        let pts = &self.points;
        if tau_w <= pts[0].0 {
            return pts[0].1;
        }
        let last = pts[pts.len() - 1];
        if tau_w >= last.0 {
            return last.1;
        }
        // first index whose x exceeds tau_w; guaranteed in 1..len
        let hi = pts.partition_point(|p| p.0 <= tau_w);
        let (x0, y0) = pts[hi - 1];
        let (x1, y1) = pts[hi];
        y0 + (y1 - y0) * (tau_w - x0) / (x1 - x0)
    }
}

/// All effective parameters of one configuration. Durations are in
/// nanoseconds, angles in radians.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentParams {
    /// Probability of one entangled excitation per write pulse.
    pub chi: f64,
    /// Write-pulse duration; also the Stokes detection window.
    pub tau_w: f64,
    /// Delay between the end of the write window and the read pulse.
    pub t_storage: f64,
    pub eta_s: f64,
    pub eta_as: f64,
    /// Retrieval efficiency at zero storage time and vanishing write duration.
    pub gamma0: f64,
    /// Memory 1/e lifetime.
    pub tau_mem: f64,
    /// Fraction of τ_w that counts as extra decoherence time.
    pub alpha_write: f64,
    /// Stokes-channel background per ns of write duration (Poisson mean, before detection).
    pub k_bg: f64,
    /// Anti-Stokes background per read pulse (Poisson mean, before detection).
    pub c_bg: f64,
    /// Branching ratio of imperfect-readout noise.
    pub xi: f64,
    pub theta_asym: f64,
    /// Depolarizing visibility of the two-photon state.
    pub v0: f64,
    pub envelope: Envelope,
    /// When present, replaces the exponential γ(τ_w) law.
    pub gamma_table: Option<GammaTable>,
    /// Length of the anti-Stokes detection window.
    pub read_window_ns: f64,
    /// In heralded mode, stop the write window at the heralding click.
    pub truncate_on_herald: bool,
}

impl Default for ExperimentParams {
    fn default() -> Self {
        Self {
            chi: 0.01,
            tau_w: 40.0,
            t_storage: 1_000.0,
            eta_s: 0.3,
            eta_as: 0.3,
            gamma0: 0.20,
            tau_mem: 50_000.0,
            alpha_write: DEFAULT_ALPHA_WRITE,
            k_bg: DEFAULT_K_BG,
            c_bg: 0.0,
            xi: 0.27,
            theta_asym: DEFAULT_THETA_ASYM,
            v0: 0.957,
            envelope: Envelope::Rectangular,
            gamma_table: None,
            read_window_ns: 100.0,
            truncate_on_herald: true,
        }
    }
}

/// Names accepted by [`ExperimentParams::set_numeric`].
pub const NUMERIC_FIELDS: &[&str] = &[
    "chi",
    "tau_w",
    "t_storage",
    "eta_s",
    "eta_as",
    "gamma0",
    "tau_mem",
    "alpha_write",
    "k_bg",
    "c_bg",
    "xi",
    "theta_asym",
    "v0",
    "read_window_ns",
];

fn unit(name: &'static str, v: f64) -> Result<()> {
    if v.is_finite() && (0.0..=1.0).contains(&v) {
        Ok(())
    } else {
        Err(Error::arg(name, format!("{v} is outside [0, 1]")))
    }
}

fn positive(name: &'static str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(Error::arg(name, format!("{v} must be > 0")))
    }
}

fn non_negative(name: &'static str, v: f64) -> Result<()> {
    if v.is_finite() && v >= 0.0 {
        Ok(())
    } else {
        Err(Error::arg(name, format!("{v} must be >= 0")))
    }
}

impl ExperimentParams {
    pub fn validate(&self) -> Result<()> {
        unit("chi", self.chi)?;
        unit("eta_s", self.eta_s)?;
        unit("eta_as", self.eta_as)?;
        unit("gamma0", self.gamma0)?;
        unit("xi", self.xi)?;
        unit("v0", self.v0)?;
        unit("alpha_write", self.alpha_write)?;
        positive("tau_w", self.tau_w)?;
        positive("tau_mem", self.tau_mem)?;
        positive("read_window_ns", self.read_window_ns)?;
        non_negative("t_storage", self.t_storage)?;
        non_negative("k_bg", self.k_bg)?;
        non_negative("c_bg", self.c_bg)?;
        if !(self.theta_asym > 0.0 && self.theta_asym < std::f64::consts::FRAC_PI_2) {
            return Err(Error::arg(
                "theta_asym",
                format!("{} is outside (0, pi/2)", self.theta_asym),
            ));
        }
        Ok(())
    }

    /// Non-fatal remarks about the operating regime.
    pub fn warnings(&self) -> Vec<String> {
        let mut out = Vec::new();
        if self.chi > CHI_WARN_THRESHOLD {
            out.push(format!(
                "chi = {} exceeds {CHI_WARN_THRESHOLD}; the model is first order in chi",
                self.chi
            ));
        }
        out
    }

    pub fn get_numeric(&self, name: &str) -> Option<f64> {
        Some(match name {
            "chi" => self.chi,
            "tau_w" => self.tau_w,
            "t_storage" => self.t_storage,
            "eta_s" => self.eta_s,
            "eta_as" => self.eta_as,
            "gamma0" => self.gamma0,
            "tau_mem" => self.tau_mem,
            "alpha_write" => self.alpha_write,
            "k_bg" => self.k_bg,
            "c_bg" => self.c_bg,
            "xi" => self.xi,
            "theta_asym" => self.theta_asym,
            "v0" => self.v0,
            "read_window_ns" => self.read_window_ns,
            _ => return None,
        })
    }

    /// Sets a numeric field by name. Returns `false` for unknown names.
    pub fn set_numeric(&mut self, name: &str, value: f64) -> bool {
        let slot = match name {
            "chi" => &mut self.chi,
            "tau_w" => &mut self.tau_w,
            "t_storage" => &mut self.t_storage,
            "eta_s" => &mut self.eta_s,
            "eta_as" => &mut self.eta_as,
            "gamma0" => &mut self.gamma0,
            "tau_mem" => &mut self.tau_mem,
            "alpha_write" => &mut self.alpha_write,
            "k_bg" => &mut self.k_bg,
            "c_bg" => &mut self.c_bg,
            "xi" => &mut self.xi,
            "theta_asym" => &mut self.theta_asym,
            "v0" => &mut self.v0,
            "read_window_ns" => &mut self.read_window_ns,
            _ => return false,
        };
        *slot = value;
        true
    }
}

/// Polarization analysis angles, in degrees, for a CHSH measurement.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AngleSettings {
    pub theta_s: f64,
    pub theta_s_prime: f64,
    pub theta_as: f64,
    pub theta_as_prime: f64,
}

impl Default for AngleSettings {
    fn default() -> Self {
        Self::canonical()
    }
}

impl AngleSettings {
    pub const fn canonical() -> Self {
        Self {
            theta_s: 0.0,
            theta_s_prime: 45.0,
            theta_as: 22.5,
            theta_as_prime: 67.5,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let all = [
            self.theta_s,
            self.theta_s_prime,
            self.theta_as,
            self.theta_as_prime,
        ];
        if all.iter().all(|a| a.is_finite()) {
            Ok(())
        } else {
            Err(Error::arg("angles", "angles must be finite"))
        }
    }

    /// The four (θ_S, θ_AS) pairs in the order E₁..E₄ of the CHSH sum
    /// `S = |E₁ − E₂ + E₃ + E₄|`.
    pub fn pairs(&self) -> [Setting; 4] {
        [
            Setting::new(self.theta_s, self.theta_as),
            Setting::new(self.theta_s, self.theta_as_prime),
            Setting::new(self.theta_s_prime, self.theta_as),
            Setting::new(self.theta_s_prime, self.theta_as_prime),
        ]
    }
}

/// One (θ_S, θ_AS) analyzer setting, in degrees.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Setting {
    pub theta_s: f64,
    pub theta_as: f64,
}

impl Setting {
    pub const fn new(theta_s: f64, theta_as: f64) -> Self {
        Self { theta_s, theta_as }
    }

    pub const ZERO: Setting = Setting::new(0.0, 0.0);
}
