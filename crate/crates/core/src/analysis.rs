//! Estimators over tallied event logs: detection probabilities, g², retrieval
//! efficiency, polarization correlations and the CHSH parameter, each with a
//! first-order counting-statistics uncertainty.
//!
//! A coincidence for detector pair (Di, Dj) is one trial with at least one
//! click on Di in the write window and at least one on Dj in the read window.
//! Repeated clicks on one detector within one window count once.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::params::{AngleSettings, Setting};
use crate::trialsim::{Detector, EventLog, Window};

/// A value with its one-standard-deviation uncertainty.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EstimateWithError {
    pub value: f64,
    pub sigma: f64,
}

impl EstimateWithError {
    pub fn new(value: f64, sigma: f64) -> Self {
        Self { value, sigma }
    }

    /// Distance from `target` in units of `sigma`.
    pub fn pull(&self, target: f64) -> f64 {
        (self.value - target) / self.sigma
    }
}

/// Singles and coincidences accumulated at one analyzer setting.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SettingCounts {
    pub setting: Setting,
    pub n_trials: u64,
    /// Trials with a click, indexed by [`Detector::index`].
    pub singles: [u64; 4],
    /// `coincidences[i][j]`: trials with S(i+1) in the write window and
    /// AS(j+1) in the read window.
    pub coincidences: [[u64; 2]; 2],
}

impl SettingCounts {
    pub fn empty(setting: Setting) -> Self {
        Self {
            setting,
            n_trials: 0,
            singles: [0; 4],
            coincidences: [[0; 2]; 2],
        }
    }

    /// Adds counts from a disjoint set of trials at the same setting.
    pub fn merge(&mut self, other: &SettingCounts) {
        self.n_trials += other.n_trials;
        for k in 0..4 {
            self.singles[k] += other.singles[k];
        }
        for i in 0..2 {
            for j in 0..2 {
                self.coincidences[i][j] += other.coincidences[i][j];
            }
        }
    }

    pub fn stokes_singles(&self) -> u64 {
        self.singles[Detector::S1.index()] + self.singles[Detector::S2.index()]
    }

    pub fn antistokes_singles(&self) -> u64 {
        self.singles[Detector::AS1.index()] + self.singles[Detector::AS2.index()]
    }

    pub fn total_coincidences(&self) -> u64 {
        self.coincidences.iter().flatten().sum()
    }

    fn rate(&self, count: u64) -> EstimateWithError {
        let n = self.n_trials as f64;
        let p = count as f64 / n;
        EstimateWithError::new(p, (p * (1.0 - p) / n).max(0.0).sqrt())
    }

    /// `P̂_S = (N_S1 + N_S2)/n` with a binomial sigma.
    pub fn p_stokes(&self) -> EstimateWithError {
        self.rate(self.stokes_singles())
    }

    pub fn p_antistokes(&self) -> EstimateWithError {
        self.rate(self.antistokes_singles())
    }

    /// Sum over all four detector pairs.
    pub fn p_coincidence(&self) -> EstimateWithError {
        self.rate(self.total_coincidences())
    }
}

/// Counts for up to several distinct analyzer settings.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CountsTable {
    pub settings: Vec<SettingCounts>,
}

impl CountsTable {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds counts, merging into an existing entry with the same setting.
    pub fn add(&mut self, counts: SettingCounts) {
        match self
            .settings
            .iter_mut()
            .find(|c| c.setting == counts.setting)
        {
            Some(existing) => existing.merge(&counts),
            None => self.settings.push(counts),
        }
    }

    pub fn get(&self, setting: Setting) -> Option<&SettingCounts> {
        self.settings.iter().find(|c| c.setting == setting)
    }

    pub fn from_logs<'a>(logs: impl IntoIterator<Item = &'a EventLog>) -> Result<Self> {
        let mut table = Self::new();
        for log in logs {
            table.add(tally(log)?);
        }
        Ok(table)
    }

    /// Counts used for g² and retrieval: the θ_S = θ_AS = 0 entry when present,
    /// otherwise all settings pooled. Channel totals summed over both
    /// detectors do not depend on the analyzer angles, so pooling is unbiased.
    pub fn calibration_counts(&self) -> Result<SettingCounts> {
        if let Some(zero) = self.get(Setting::ZERO) {
            return Ok(zero.clone());
        }
        let mut iter = self.settings.iter();
        let first = iter
            .next()
            .ok_or_else(|| Error::InsufficientStatistics("counts table is empty".into()))?;
        let mut pooled = first.clone();
        for c in iter {
            pooled.merge(c);
        }
        Ok(pooled)
    }
}

/// Singles and coincidences of one log.
pub fn tally(log: &EventLog) -> Result<SettingCounts> {
    if log.events.is_empty() {
        return Err(Error::InsufficientStatistics(
            "log contains no events".into(),
        ));
    }
    let mut counts = SettingCounts::empty(log.header.angles);
    counts.n_trials = log.header.n_trials;
    for trial in log.trials() {
        let mut write = [false; 2];
        let mut read = [false; 2];
        for e in trial {
            match (e.window, e.detector.is_stokes()) {
                (Window::Write, true) => write[e.detector.port()] = true,
                (Window::Read, false) => read[e.detector.port()] = true,
                _ => {}
            }
        }
        for port in 0..2 {
            if write[port] {
                counts.singles[port] += 1;
            }
            if read[port] {
                counts.singles[2 + port] += 1;
            }
        }
        for (i, &w) in write.iter().enumerate() {
            for (j, &r) in read.iter().enumerate() {
                if w && r {
                    counts.coincidences[i][j] += 1;
                }
            }
        }
    }
    Ok(counts)
}

/// `g² = N_c·n / (N_S·N_AS)` with `σ = g²·√(1/N_c + 1/N_S + 1/N_AS)`.
pub fn g2_estimate(table: &CountsTable) -> Result<EstimateWithError> {
    g2_from_counts(&table.calibration_counts()?)
}

pub fn g2_from_counts(c: &SettingCounts) -> Result<EstimateWithError> {
    let (nc, ns, na) = (
        c.total_coincidences(),
        c.stokes_singles(),
        c.antistokes_singles(),
    );
    ratio_estimate(c.n_trials, nc, ns, na)
}

fn ratio_estimate(n: u64, nc: u64, ns: u64, na: u64) -> Result<EstimateWithError> {
    if nc == 0 {
        return Err(Error::InsufficientCoincidences(
            "no Stokes/anti-Stokes coincidences".into(),
        ));
    }
    if ns == 0 || na == 0 {
        return Err(Error::InsufficientStatistics(format!(
            "zero singles (N_S = {ns}, N_AS = {na})"
        )));
    }
    let (n, nc, ns, na) = (n as f64, nc as f64, ns as f64, na as f64);
    let value = nc * n / (ns * na);
    let sigma = value * (1.0 / nc + 1.0 / ns + 1.0 / na).sqrt();
    Ok(EstimateWithError::new(value, sigma))
}

/// Cross-correlation between one Stokes and one anti-Stokes detector at a
/// single setting, `N_ij·n / (N_Si·N_ASj)`.
pub fn g2_resolved_estimate(
    table: &CountsTable,
    setting: Setting,
    stokes: Detector,
    antistokes: Detector,
) -> Result<EstimateWithError> {
    if !stokes.is_stokes() || antistokes.is_stokes() {
        return Err(Error::arg(
            "detectors",
            "expected one Stokes and one anti-Stokes detector",
        ));
    }
    let c = table
        .get(setting)
        .ok_or_else(|| Error::InsufficientStatistics(format!("no counts at {setting:?}")))?;
    ratio_estimate(
        c.n_trials,
        c.coincidences[stokes.port()][antistokes.port()],
        c.singles[stokes.index()],
        c.singles[antistokes.index()],
    )
}

/// `γ ≈ (P_S,AS − P_S·P_AS) / [η_AS·(P_S − B·η_S)]`, with independent-Poisson
/// error propagation over N_c, N_S and N_AS. `b_rate` is the Stokes
/// background mean per pulse before detection.
pub fn retrieval_estimate(
    table: &CountsTable,
    eta_as: f64,
    eta_s: f64,
    b_rate: f64,
) -> Result<EstimateWithError> {
    for (name, eta) in [("eta_as", eta_as), ("eta_s", eta_s)] {
        if !(eta > 0.0 && eta <= 1.0) {
            return Err(Error::arg(name, format!("{eta} outside (0, 1]")));
        }
    }
    if !(b_rate >= 0.0) {
        return Err(Error::arg("b_rate", format!("{b_rate} must be >= 0")));
    }
    let c = table.calibration_counts()?;
    let nc = c.total_coincidences();
    if nc == 0 {
        return Err(Error::InsufficientCoincidences(
            "retrieval estimate needs at least one coincidence".into(),
        ));
    }
    let n = c.n_trials as f64;
    let (ncf, nsf, naf) = (
        nc as f64,
        c.stokes_singles() as f64,
        c.antistokes_singles() as f64,
    );
    let (pc, ps, pa) = (ncf / n, nsf / n, naf / n);
    let den = eta_as * (ps - b_rate * eta_s);
    if !(den > 0.0) {
        return Err(Error::InsufficientStatistics(format!(
            "background B·η_S = {} is not below P_S = {ps}",
            b_rate * eta_s
        )));
    }
    let gamma = (pc - ps * pa) / den;
    let d_nc = 1.0 / (n * den);
    let d_na = -ps / (n * den);
    let d_ns = -pa / (n * den) - gamma * eta_as / (n * den);
    let var = d_nc * d_nc * ncf + d_na * d_na * naf + d_ns * d_ns * nsf;
    Ok(EstimateWithError::new(gamma, var.sqrt()))
}

/// `E = (C11 + C22 − C12 − C21)/(C11 + C22 + C12 + C21)` with a binomial
/// sigma `√((1 − E²)/N)`.
pub fn correlation_from_coincidences(c: [[u64; 2]; 2]) -> Result<EstimateWithError> {
    let total: u64 = c.iter().flatten().sum();
    if total == 0 {
        return Err(Error::InsufficientCoincidences(
            "no coincidences at this setting".into(),
        ));
    }
    let same = (c[0][0] + c[1][1]) as f64;
    let diff = (c[0][1] + c[1][0]) as f64;
    let n = total as f64;
    let e = (same - diff) / n;
    Ok(EstimateWithError::new(
        e,
        ((1.0 - e * e) / n).max(0.0).sqrt(),
    ))
}

pub fn correlation_e(table: &CountsTable, setting: Setting) -> Result<EstimateWithError> {
    let c = table
        .get(setting)
        .ok_or_else(|| Error::InsufficientCoincidences(format!("no counts at {setting:?}")))?;
    correlation_from_coincidences(c.coincidences)
}

/// `(S − 2)/σ_S`. Zero sigma gives ±∞ unless S is exactly 2.
pub fn violation_significance(s: f64, sigma: f64) -> f64 {
    let excess = s - 2.0;
    if excess == 0.0 {
        0.0
    } else {
        excess / sigma
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BellEstimate {
    pub s: EstimateWithError,
    pub significance: f64,
    /// E₁..E₄ in CHSH order.
    pub correlations: [EstimateWithError; 4],
}

/// `S = |E₁ − E₂ + E₃ + E₄|`, `σ_S = √Σσ_Ei²`.
pub fn bell_s(table: &CountsTable, angles: &AngleSettings) -> Result<BellEstimate> {
    let mut correlations = [EstimateWithError::new(0.0, 0.0); 4];
    for (slot, setting) in correlations.iter_mut().zip(angles.pairs()) {
        *slot = correlation_e(table, setting)?;
    }
    Ok(bell_from_correlations(correlations))
}

pub fn bell_from_correlations(correlations: [EstimateWithError; 4]) -> BellEstimate {
    let [e1, e2, e3, e4] = correlations;
    let s = (e1.value - e2.value + e3.value + e4.value).abs();
    let sigma = correlations
        .iter()
        .map(|e| e.sigma * e.sigma)
        .sum::<f64>()
        .sqrt();
    BellEstimate {
        s: EstimateWithError::new(s, sigma),
        significance: violation_significance(s, sigma),
        correlations,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::ExperimentParams;
    use crate::trialsim::{DetectionEvent, LogHeader, TrialMode, LOG_FORMAT_VERSION};

    fn log_with(events: Vec<DetectionEvent>, n: u64) -> EventLog {
        EventLog {
            header: LogHeader {
                version: LOG_FORMAT_VERSION,
                params: ExperimentParams::default(),
                mode: TrialMode::G2,
                angles: Setting::ZERO,
                seed: 0,
                n_trials: n,
            },
            events,
        }
    }

    fn ev(trial_id: u64, detector: Detector, time_ns: f64) -> DetectionEvent {
        let window = if detector.is_stokes() {
            Window::Write
        } else {
            Window::Read
        };
        DetectionEvent {
            trial_id,
            detector,
            time_ns,
            window,
        }
    }

    #[test]
    fn single_trial_coincidence() {
        let log = log_with(
            vec![ev(0, Detector::S1, 3.0), ev(0, Detector::AS1, 1_050.0)],
            1,
        );
        let c = tally(&log).unwrap();
        assert_eq!(c.singles, [1, 0, 1, 0]);
        assert_eq!(c.coincidences, [[1, 0], [0, 0]]);
    }

    #[test]
    fn stokes_only_trial_has_no_coincidence() {
        let log = log_with(vec![ev(0, Detector::S1, 3.0)], 1);
        let c = tally(&log).unwrap();
        assert_eq!(c.singles, [1, 0, 0, 0]);
        assert_eq!(c.total_coincidences(), 0);
    }

    #[test]
    fn repeated_clicks_saturate() {
        let log = log_with(
            vec![
                ev(2, Detector::S2, 1.0),
                ev(2, Detector::S2, 5.0),
                ev(2, Detector::AS1, 1_041.0),
                ev(2, Detector::AS2, 1_045.0),
                ev(2, Detector::AS1, 1_046.0),
            ],
            3,
        );
        let c = tally(&log).unwrap();
        assert_eq!(c.singles, [0, 1, 1, 1]);
        assert_eq!(c.coincidences, [[0, 0], [1, 1]]);
        assert_eq!(c.n_trials, 3);
    }

    #[test]
    fn empty_log_is_an_error() {
        assert!(tally(&log_with(vec![], 10)).is_err());
    }

    fn table(n: u64, singles: [u64; 4], coinc: [[u64; 2]; 2]) -> CountsTable {
        let mut t = CountsTable::new();
        t.add(SettingCounts {
            setting: Setting::ZERO,
            n_trials: n,
            singles,
            coincidences: coinc,
        });
        t
    }

    #[test]
    fn g2_uncorrelated_arithmetic() {
        let t = table(
            1_000_000,
            [5_000, 5_000, 5_000, 5_000],
            [[25, 25], [25, 25]],
        );
        let g = g2_estimate(&t).unwrap();
        assert!((g.value - 1.0).abs() < 1e-12);
        assert!((g.sigma - 0.0102f64.sqrt()).abs() < 1e-12);
        assert!((g.sigma - 0.101).abs() < 5e-4);
    }

    #[test]
    fn g2_needs_coincidences() {
        let t = table(100, [5, 5, 5, 5], [[0, 0], [0, 0]]);
        let err = g2_estimate(&t).unwrap_err();
        assert!(err.to_string().contains("insufficient coincidences"));
        assert!(g2_estimate(&CountsTable::new()).is_err());
    }

    #[test]
    fn retrieval_reduces_to_gamma_without_noise() {
        // first-order counts for χ = 0.01, γ = 0.4, η_S = η_AS = 0.5, no noise,
        // n = 1e8: N_S = χη_S·n, N_AS = χγη_AS·n, N_c = χγη_Sη_AS·n + N_S·N_AS/n
        let n = 100_000_000u64;
        let ns = 500_000u64;
        let na = 200_000u64;
        let nc = 100_000u64 + ns * na / n;
        let t = table(n, [ns, 0, na, 0], [[nc, 0], [0, 0]]);
        let g = retrieval_estimate(&t, 0.5, 0.5, 0.0).unwrap();
        assert!((g.value - 0.4).abs() < 1e-12);
        assert!(g.sigma > 0.0 && g.sigma < 0.01);
    }

    #[test]
    fn retrieval_with_degenerate_denominator() {
        let t = table(1_000, [3, 0, 1, 0], [[1, 0], [0, 0]]);
        // P_S = 0.003 = B·η_S
        assert!(matches!(
            retrieval_estimate(&t, 0.3, 0.3, 0.01),
            Err(Error::InsufficientStatistics(_))
        ));
        assert!(retrieval_estimate(&t, 0.0, 0.3, 0.0).is_err());
        let none = table(1_000, [3, 0, 1, 0], [[0, 0], [0, 0]]);
        assert!(matches!(
            retrieval_estimate(&none, 0.3, 0.3, 0.0),
            Err(Error::InsufficientCoincidences(_))
        ));
    }

    #[test]
    fn retrieval_sigma_matches_finite_differences() {
        let (n, ns, na, nc) = (1_000_000u64, 4_000u64, 1_500u64, 200u64);
        let t = table(n, [ns, 0, na, 0], [[nc, 0], [0, 0]]);
        let est = retrieval_estimate(&t, 0.3, 0.3, 1e-3).unwrap();
        let f = |nc: f64, ns: f64, na: f64| {
            let n = n as f64;
            (nc / n - ns * na / (n * n)) / (0.3 * (ns / n - 1e-3 * 0.3))
        };
        let h = 1e-3;
        let (x, y, z) = (nc as f64, ns as f64, na as f64);
        let dx = (f(x + h, y, z) - f(x - h, y, z)) / (2.0 * h);
        let dy = (f(x, y + h, z) - f(x, y - h, z)) / (2.0 * h);
        let dz = (f(x, y, z + h) - f(x, y, z - h)) / (2.0 * h);
        let sigma = (dx * dx * x + dy * dy * y + dz * dz * z).sqrt();
        assert!(((est.sigma - sigma) / sigma).abs() < 1e-6);
        assert!((est.value - f(x, y, z)).abs() < 1e-12);
    }

    #[test]
    fn correlation_examples() {
        let e = correlation_from_coincidences([[50, 0], [0, 50]]).unwrap();
        assert_eq!((e.value, e.sigma), (1.0, 0.0));
        let e = correlation_from_coincidences([[25, 25], [25, 25]]).unwrap();
        assert_eq!(e.value, 0.0);
        assert!((e.sigma - 0.1).abs() < 1e-15);
        let e = correlation_from_coincidences([[85, 15], [15, 85]]).unwrap();
        assert!((e.value - 0.7).abs() < 1e-15);
        assert!((e.sigma - 0.0505).abs() < 5e-5);
        assert!(correlation_from_coincidences([[0, 0], [0, 0]]).is_err());
    }

    #[test]
    fn significance_examples() {
        assert!((violation_significance(2.64, 0.02) - 32.0).abs() < 1e-9);
        assert!((violation_significance(2.26, 0.05) - 5.2).abs() < 1e-9);
        assert_eq!(violation_significance(2.0, 0.3), 0.0);
        assert_eq!(violation_significance(2.0, 0.0), 0.0);
    }

    #[test]
    fn bell_from_counts() {
        let angles = AngleSettings::canonical();
        let mut t = CountsTable::new();
        let pattern = [
            [[85, 15], [15, 85]],
            [[15, 85], [85, 15]],
            [[85, 15], [15, 85]],
            [[85, 15], [15, 85]],
        ];
        for (setting, c) in angles.pairs().into_iter().zip(pattern) {
            t.add(SettingCounts {
                setting,
                n_trials: 10_000,
                singles: [200, 200, 200, 200],
                coincidences: c,
            });
        }
        let b = bell_s(&t, &angles).unwrap();
        assert!((b.s.value - 2.8).abs() < 1e-12);
        let sigma = 2.0 * (0.51f64 / 200.0).sqrt();
        assert!((b.s.sigma - sigma).abs() < 1e-12);
        assert!((b.significance - 0.8 / sigma).abs() < 1e-9);

        let mut missing = t.clone();
        missing.settings.pop();
        assert!(bell_s(&missing, &angles).is_err());
    }

    #[test]
    fn merging_is_associative() {
        let mk = |n, a| SettingCounts {
            setting: Setting::ZERO,
            n_trials: n,
            singles: [a, a + 1, a + 2, a + 3],
            coincidences: [[a, 1], [2, a]],
        };
        let (x, y, z) = (mk(10, 1), mk(20, 5), mk(7, 2));
        let mut left = x.clone();
        left.merge(&y);
        left.merge(&z);
        let mut yz = y.clone();
        yz.merge(&z);
        let mut right = x.clone();
        right.merge(&yz);
        assert_eq!(left, right);
    }

    #[test]
    fn calibration_counts_prefers_zero_setting() {
        let mut t = CountsTable::new();
        let mk = |setting, n| SettingCounts {
            setting,
            n_trials: n,
            singles: [1; 4],
            coincidences: [[1; 2]; 2],
        };
        t.add(mk(Setting::new(0.0, 22.5), 10));
        t.add(mk(Setting::new(45.0, 22.5), 20));
        assert_eq!(t.calibration_counts().unwrap().n_trials, 30);
        t.add(mk(Setting::ZERO, 5));
        assert_eq!(t.calibration_counts().unwrap().n_trials, 5);
        t.add(mk(Setting::ZERO, 5));
        assert_eq!(t.calibration_counts().unwrap().n_trials, 10);
    }
}
