//! Seeded Monte Carlo engine for the write/read trial sequences.
//!
//! A trial is one write pulse followed (when heralded, or always in
//! [`TrialMode::G2`]) by a storage period and a read window. Each trial draws
//! from its own [`TrialStream`], so the log depends only on the inputs and
//! never on how the trial range is partitioned across workers.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_distr::{Distribution, Poisson};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model;
use crate::params::{Envelope, ExperimentParams, Setting};
use crate::rng::TrialStream;

pub const LOG_FORMAT_VERSION: u32 = 1;

/// Cleaning-pulse length; advances the trial clock and produces no events.
pub const CLEAN_PULSE_NS: f64 = 200.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum TrialMode {
    /// Heralded sequence: a read window opens only after a Stokes click.
    #[serde(rename = "SWPE")]
    Swpe,
    /// Fixed write/read cycle; the read window always opens.
    G2,
}

impl FromStr for TrialMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_uppercase().as_str() {
            "SWPE" => Ok(TrialMode::Swpe),
            "G2" => Ok(TrialMode::G2),
            other => Err(Error::arg(
                "mode",
                format!("unknown mode `{other}` (expected SWPE or G2)"),
            )),
        }
    }
}

impl fmt::Display for TrialMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TrialMode::Swpe => "SWPE",
            TrialMode::G2 => "G2",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Detector {
    S1,
    S2,
    AS1,
    AS2,
}

impl Detector {
    pub const ALL: [Detector; 4] = [Detector::S1, Detector::S2, Detector::AS1, Detector::AS2];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn is_stokes(self) -> bool {
        matches!(self, Detector::S1 | Detector::S2)
    }

    /// 0 for the transmitted port of the analyzer, 1 for the reflected port.
    pub fn port(self) -> usize {
        match self {
            Detector::S1 | Detector::AS1 => 0,
            Detector::S2 | Detector::AS2 => 1,
        }
    }

    fn stokes(port: usize) -> Self {
        if port == 0 {
            Detector::S1
        } else {
            Detector::S2
        }
    }

    fn antistokes(port: usize) -> Self {
        if port == 0 {
            Detector::AS1
        } else {
            Detector::AS2
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Window {
    #[serde(rename = "W")]
    Write,
    #[serde(rename = "R")]
    Read,
}

/// Which channel a histogram or tally refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Channel {
    Stokes,
    AntiStokes,
}

impl FromStr for Channel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_uppercase().as_str() {
            "S" => Ok(Channel::Stokes),
            "AS" => Ok(Channel::AntiStokes),
            other => Err(Error::arg(
                "class",
                format!("unknown detector class `{other}` (expected S or AS)"),
            )),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectionEvent {
    #[serde(rename = "trial")]
    pub trial_id: u64,
    #[serde(rename = "det")]
    pub detector: Detector,
    #[serde(rename = "t_ns")]
    pub time_ns: f64,
    #[serde(rename = "win")]
    pub window: Window,
}

impl DetectionEvent {
    /// Canonical order: trial, window, time, detector.
    pub fn canonical_cmp(&self, other: &Self) -> Ordering {
        self.trial_id
            .cmp(&other.trial_id)
            .then(self.window.cmp(&other.window))
            .then(self.time_ns.total_cmp(&other.time_ns))
            .then(self.detector.cmp(&other.detector))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogHeader {
    pub version: u32,
    pub params: ExperimentParams,
    pub mode: TrialMode,
    pub angles: Setting,
    pub seed: u64,
    pub n_trials: u64,
}

impl LogHeader {
    /// Start of the read window given the time of the first Stokes click.
    pub fn read_window_start(&self, first_stokes: Option<f64>) -> Option<f64> {
        let p = &self.params;
        match (self.mode, first_stokes) {
            (TrialMode::G2, _) => Some(p.tau_w + p.t_storage),
            (TrialMode::Swpe, None) => None,
            (TrialMode::Swpe, Some(t)) if p.truncate_on_herald => Some(t + p.t_storage),
            (TrialMode::Swpe, Some(_)) => Some(p.tau_w + p.t_storage),
        }
    }

    /// Nominal trial length including the trailing cleaning pulse.
    pub fn cycle_ns(&self) -> f64 {
        let p = &self.params;
        p.tau_w + p.t_storage + p.read_window_ns + CLEAN_PULSE_NS
    }
}

/// Header plus events in canonical order.
#[derive(Debug, Clone, PartialEq)]
pub struct EventLog {
    pub header: LogHeader,
    pub events: Vec<DetectionEvent>,
}

impl EventLog {
    /// Events grouped by trial, in trial order. Trials without events are skipped.
    pub fn trials(&self) -> impl Iterator<Item = &[DetectionEvent]> {
        self.events.chunk_by(|a, b| a.trial_id == b.trial_id)
    }

    /// Checks ordering, trial bounds, detector/window pairing and window bounds.
    pub fn check_invariants(&self) -> Result<()> {
        let h = &self.header;
        if self
            .events
            .windows(2)
            .any(|w| w[0].canonical_cmp(&w[1]) != Ordering::Less)
        {
            return Err(Error::Undefined("events are not in canonical order".into()));
        }
        for trial in self.trials() {
            let id = trial[0].trial_id;
            if id >= h.n_trials {
                return Err(Error::Undefined(format!(
                    "trial {id} outside 0..{}",
                    h.n_trials
                )));
            }
            let first_s = trial
                .iter()
                .find(|e| e.window == Window::Write)
                .map(|e| e.time_ns);
            let read_start = h.read_window_start(first_s);
            for e in trial {
                let ok = match (e.window, e.detector.is_stokes()) {
                    (Window::Write, true) => e.time_ns >= 0.0 && e.time_ns <= h.params.tau_w,
                    (Window::Read, false) => read_start.is_some_and(|r0| {
                        e.time_ns >= r0 && e.time_ns <= r0 + h.params.read_window_ns
                    }),
                    _ => false,
                };
                if !ok {
                    return Err(Error::Undefined(format!(
                        "event {e:?} lies outside its window"
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Per-campaign constants shared by all trials.
struct TrialKernel {
    chi: f64,
    tau_w: f64,
    eta_s: f64,
    eta_as: f64,
    gamma: f64,
    readout_noise: f64,
    envelope: Envelope,
    /// Cumulative joint outcome probabilities in (11, 12, 21, 22) order.
    joint_cdf: [f64; 4],
    stokes_bg: Option<Poisson<f64>>,
    antistokes_bg: Option<Poisson<f64>>,
    mode: TrialMode,
    truncate: bool,
    t_storage: f64,
    read_window: f64,
}

fn poisson(mean: f64) -> Result<Option<Poisson<f64>>> {
    if mean == 0.0 {
        return Ok(None);
    }
    Poisson::new(mean)
        .map(Some)
        .map_err(|e| Error::arg("background", format!("bad Poisson mean {mean}: {e}")))
}

impl TrialKernel {
    fn new(p: &ExperimentParams, setting: Setting, mode: TrialMode) -> Result<Self> {
        let gamma = model::retrieval_gamma(p);
        let b = model::background_b(p.tau_w, p.k_bg)?;
        let joint =
            model::joint_click_probabilities(p.theta_asym, p.v0, setting.theta_s, setting.theta_as);
        let mut joint_cdf = [0.0; 4];
        let mut acc = 0.0;
        for (k, slot) in joint_cdf.iter_mut().enumerate() {
            acc += joint[k / 2][k % 2];
            *slot = acc;
        }
        Ok(Self {
            chi: p.chi,
            tau_w: p.tau_w,
            eta_s: p.eta_s,
            eta_as: p.eta_as,
            gamma,
            readout_noise: p.chi * (1.0 - gamma) * p.xi,
            envelope: p.envelope,
            joint_cdf,
            stokes_bg: poisson(b * p.eta_s)?,
            antistokes_bg: poisson(p.c_bg * p.eta_as)?,
            mode,
            truncate: p.truncate_on_herald,
            t_storage: p.t_storage,
            read_window: p.read_window_ns,
        })
    }

    fn emission_time(&self, rng: &mut TrialStream) -> f64 {
        match self.envelope {
            Envelope::Rectangular => rng.random::<f64>() * self.tau_w,
            Envelope::RaisedCosine => loop {
                let x: f64 = rng.random();
                let accept = 0.5 * (1.0 - (std::f64::consts::TAU * x).cos());
                if rng.random::<f64>() < accept {
                    break x * self.tau_w;
                }
            },
        }
    }

    fn joint_outcome(&self, rng: &mut TrialStream) -> (usize, usize) {
        let u = rng.random::<f64>() * self.joint_cdf[3];
        let k = self.joint_cdf.iter().position(|&c| u < c).unwrap_or(3);
        (k / 2, k % 2)
    }

    fn run(&self, seed: u64, trial_id: u64, out: &mut Vec<DetectionEvent>) {
        let mut rng = TrialStream::new(seed, trial_id);
        let mut events: Vec<DetectionEvent> = Vec::new();
        let ev = |detector, time_ns, window| DetectionEvent {
            trial_id,
            detector,
            time_ns,
            window,
        };

        // (a) signal excitation and its Stokes photon
        let mut excitation: Option<(f64, usize)> = None;
        if rng.random::<f64>() < self.chi {
            let t = self.emission_time(&mut rng);
            let (s_port, as_port) = self.joint_outcome(&mut rng);
            if rng.random::<f64>() < self.eta_s {
                events.push(ev(Detector::stokes(s_port), t, Window::Write));
            }
            excitation = Some((t, as_port));
        }

        // (b) Stokes background, uniform over the write window
        if let Some(bg) = &self.stokes_bg {
            let n = bg.sample(&mut rng) as u64;
            for _ in 0..n {
                let t = rng.random::<f64>() * self.tau_w;
                let port = usize::from(rng.random::<bool>());
                events.push(ev(Detector::stokes(port), t, Window::Write));
            }
        }
        events.sort_by(|a, b| a.time_ns.total_cmp(&b.time_ns));

        // (c) heralding decides whether and when the read window opens
        let write_end = match self.mode {
            TrialMode::G2 => self.tau_w,
            TrialMode::Swpe => {
                let Some(herald) = events.first().map(|e| e.time_ns) else {
                    return;
                };
                if self.truncate {
                    events.truncate(1);
                    if excitation.is_some_and(|(t, _)| t > herald) {
                        excitation = None;
                    }
                    herald
                } else {
                    self.tau_w
                }
            }
        };
        let read_start = write_end + self.t_storage;
        let read_time = |rng: &mut TrialStream| read_start + rng.random::<f64>() * self.read_window;

        // (d) retrieval of the stored excitation
        if let Some((_, as_port)) = excitation {
            if rng.random::<f64>() < self.gamma && rng.random::<f64>() < self.eta_as {
                let t = read_time(&mut rng);
                events.push(ev(Detector::antistokes(as_port), t, Window::Read));
            }
        }
        // readout noise from modes uncorrelated with the heralded one
        if rng.random::<f64>() < self.readout_noise && rng.random::<f64>() < self.eta_as {
            let t = read_time(&mut rng);
            let port = usize::from(rng.random::<bool>());
            events.push(ev(Detector::antistokes(port), t, Window::Read));
        }

        // (e) anti-Stokes background
        if let Some(bg) = &self.antistokes_bg {
            let n = bg.sample(&mut rng) as u64;
            for _ in 0..n {
                let t = read_time(&mut rng);
                let port = usize::from(rng.random::<bool>());
                events.push(ev(Detector::antistokes(port), t, Window::Read));
            }
        }

        events.sort_by(|a, b| a.canonical_cmp(b));
        out.extend(events);
    }
}

/// Runs `n_trials` trials with the default worker count.
pub fn run_campaign(
    params: &ExperimentParams,
    setting: Setting,
    mode: TrialMode,
    n_trials: u64,
    seed: u64,
) -> Result<EventLog> {
    run_campaign_partitioned(
        params,
        setting,
        mode,
        n_trials,
        seed,
        rayon::current_num_threads(),
    )
}

/// Runs the campaign split into `partitions` contiguous trial ranges. The
/// result is identical for every partition count.
pub fn run_campaign_partitioned(
    params: &ExperimentParams,
    setting: Setting,
    mode: TrialMode,
    n_trials: u64,
    seed: u64,
    partitions: usize,
) -> Result<EventLog> {
    if n_trials == 0 {
        return Err(Error::arg("n_trials", "must be at least 1"));
    }
    params.validate()?;
    if !(setting.theta_s.is_finite() && setting.theta_as.is_finite()) {
        return Err(Error::arg("angles", "angles must be finite"));
    }
    let kernel = TrialKernel::new(params, setting, mode)?;

    let parts = partitions.clamp(1, n_trials.min(u64::from(u32::MAX)) as usize) as u64;
    let chunk = n_trials.div_ceil(parts);
    let ranges: Vec<(u64, u64)> = (0..parts)
        .map(|i| (i * chunk, ((i + 1) * chunk).min(n_trials)))
        .filter(|(a, b)| a < b)
        .collect();
    let run_range = |&(lo, hi): &(u64, u64)| {
        let mut out = Vec::new();
        for id in lo..hi {
            kernel.run(seed, id, &mut out);
        }
        out
    };
    let chunks: Vec<Vec<DetectionEvent>> = if ranges.len() == 1 {
        ranges.iter().map(run_range).collect()
    } else {
        ranges.par_iter().map(run_range).collect()
    };

    Ok(EventLog {
        header: LogHeader {
            version: LOG_FORMAT_VERSION,
            params: params.clone(),
            mode,
            angles: setting,
            seed,
            n_trials,
        },
        events: chunks.concat(),
    })
}

/// Counts of one detector class per time bin, as `(bin start ns, count)`.
///
/// Stokes times are binned over the write window `[0, τ_w]`; anti-Stokes
/// times are taken relative to the start of their trial's read window and
/// binned over the read window length.
pub fn histogram(log: &EventLog, channel: Channel, bin_ns: f64) -> Result<Vec<(f64, u64)>> {
    if !(bin_ns > 0.0) || !bin_ns.is_finite() {
        return Err(Error::arg("bin_ns", format!("{bin_ns} must be > 0")));
    }
    let h = &log.header;
    let span = match channel {
        Channel::Stokes => h.params.tau_w,
        Channel::AntiStokes => h.params.read_window_ns,
    };
    let n_bins = ((span / bin_ns).ceil() as usize).max(1);
    let mut counts = vec![0u64; n_bins];
    let mut add = |offset: f64| {
        let k = ((offset / bin_ns) as usize).min(n_bins - 1);
        counts[k] += 1;
    };
    for trial in log.trials() {
        match channel {
            Channel::Stokes => trial
                .iter()
                .filter(|e| e.detector.is_stokes())
                .for_each(|e| add(e.time_ns)),
            Channel::AntiStokes => {
                let first_s = trial
                    .iter()
                    .find(|e| e.window == Window::Write)
                    .map(|e| e.time_ns);
                if let Some(r0) = h.read_window_start(first_s) {
                    trial
                        .iter()
                        .filter(|e| !e.detector.is_stokes())
                        .for_each(|e| add(e.time_ns - r0));
                }
            }
        }
    }
    Ok(counts
        .into_iter()
        .enumerate()
        .map(|(k, c)| (k as f64 * bin_ns, c))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::FRAC_PI_4;

    fn ideal() -> ExperimentParams {
        ExperimentParams {
            chi: 1.0,
            eta_s: 1.0,
            eta_as: 1.0,
            gamma0: 1.0,
            t_storage: 0.0,
            alpha_write: 0.0,
            k_bg: 0.0,
            c_bg: 0.0,
            xi: 0.0,
            theta_asym: FRAC_PI_4,
            v0: 1.0,
            ..Default::default()
        }
    }

    #[test]
    fn deterministic_limit_is_perfectly_correlated() {
        let log = run_campaign(&ideal(), Setting::ZERO, TrialMode::Swpe, 1000, 5).unwrap();
        let trials: Vec<_> = log.trials().collect();
        assert_eq!(trials.len(), 1000);
        for t in trials {
            assert_eq!(t.len(), 2);
            assert!(t[0].detector.is_stokes());
            assert!(!t[1].detector.is_stokes());
            assert_eq!(t[0].detector.port(), t[1].detector.port());
        }
        log.check_invariants().unwrap();
    }

    #[test]
    fn zero_trials_is_an_error() {
        assert!(matches!(
            run_campaign(&ideal(), Setting::ZERO, TrialMode::G2, 0, 1),
            Err(Error::InvalidArgument {
                name: "n_trials",
                ..
            })
        ));
    }

    #[test]
    fn invalid_params_propagate() {
        let p = ExperimentParams {
            xi: 2.0,
            ..Default::default()
        };
        assert!(run_campaign(&p, Setting::ZERO, TrialMode::G2, 10, 1).is_err());
    }

    #[test]
    fn partition_count_does_not_change_the_log() {
        let p = ExperimentParams {
            c_bg: 0.01,
            ..Default::default()
        };
        let base =
            run_campaign_partitioned(&p, Setting::ZERO, TrialMode::G2, 20_000, 9, 1).unwrap();
        for parts in [2, 3, 8, 64] {
            let other =
                run_campaign_partitioned(&p, Setting::ZERO, TrialMode::G2, 20_000, 9, parts)
                    .unwrap();
            assert_eq!(base, other, "partitions = {parts}");
        }
    }

    #[test]
    fn heralded_read_window_iff_stokes_click() {
        // a huge anti-Stokes background makes every open read window visible
        let p = ExperimentParams {
            c_bg: 40.0,
            eta_as: 1.0,
            chi: 0.05,
            k_bg: 1e-3,
            tau_w: 200.0,
            ..Default::default()
        };
        let log = run_campaign(&p, Setting::ZERO, TrialMode::Swpe, 20_000, 3).unwrap();
        log.check_invariants().unwrap();
        let mut heralded = 0;
        for t in log.trials() {
            let has_s = t.iter().any(|e| e.window == Window::Write);
            let has_as = t.iter().any(|e| e.window == Window::Read);
            assert_eq!(has_s, has_as);
            heralded += usize::from(has_s);
        }
        assert!(heralded > 100);
    }

    #[test]
    fn truncation_keeps_only_the_herald() {
        let p = ExperimentParams {
            k_bg: 0.05,
            tau_w: 100.0,
            ..Default::default()
        };
        let log = run_campaign(&p, Setting::ZERO, TrialMode::Swpe, 5_000, 1).unwrap();
        log.check_invariants().unwrap();
        for t in log.trials() {
            assert_eq!(t.iter().filter(|e| e.window == Window::Write).count(), 1);
        }
        let p = ExperimentParams {
            truncate_on_herald: false,
            ..p
        };
        let log = run_campaign(&p, Setting::ZERO, TrialMode::Swpe, 5_000, 1).unwrap();
        log.check_invariants().unwrap();
        assert!(log
            .trials()
            .any(|t| t.iter().filter(|e| e.window == Window::Write).count() > 1));
    }

    #[test]
    fn events_stay_inside_windows_for_raised_cosine() {
        let p = ExperimentParams {
            envelope: Envelope::RaisedCosine,
            chi: 0.2,
            c_bg: 0.5,
            k_bg: 1e-3,
            ..Default::default()
        };
        for mode in [TrialMode::G2, TrialMode::Swpe] {
            let log = run_campaign(&p, Setting::new(10.0, 33.0), mode, 10_000, 11).unwrap();
            log.check_invariants().unwrap();
        }
    }

    #[test]
    fn rectangular_histogram_has_flat_bins() {
        let p = ExperimentParams {
            chi: 0.5,
            k_bg: 0.0,
            ..Default::default()
        };
        let log = run_campaign(&p, Setting::ZERO, TrialMode::G2, 40_000, 2).unwrap();
        let h = histogram(&log, Channel::Stokes, 10.0).unwrap();
        assert_eq!(h.len(), 4);
        assert_eq!(h[3].0, 30.0);
        let total: u64 = h.iter().map(|b| b.1).sum();
        let n_s = log.events.iter().filter(|e| e.detector.is_stokes()).count() as u64;
        assert_eq!(total, n_s);
        let mean = total as f64 / 4.0;
        for (_, c) in &h {
            assert!((*c as f64 - mean).abs() < 5.0 * mean.sqrt());
        }
    }

    #[test]
    fn raised_cosine_histogram_peaks_in_the_middle() {
        let p = ExperimentParams {
            chi: 0.5,
            k_bg: 0.0,
            tau_w: 100.0,
            envelope: Envelope::RaisedCosine,
            ..Default::default()
        };
        let log = run_campaign(&p, Setting::ZERO, TrialMode::G2, 40_000, 2).unwrap();
        let h = histogram(&log, Channel::Stokes, 10.0).unwrap();
        assert!(h[4].1 > 3 * h[0].1);
        assert!(h[5].1 > 3 * h[9].1);
    }

    #[test]
    fn empty_log_gives_zero_histogram() {
        let p = ExperimentParams {
            chi: 0.0,
            k_bg: 0.0,
            c_bg: 0.0,
            ..Default::default()
        };
        let log = run_campaign(&p, Setting::ZERO, TrialMode::G2, 100, 1).unwrap();
        assert!(log.events.is_empty());
        let h = histogram(&log, Channel::AntiStokes, 10.0).unwrap();
        assert_eq!(h.len(), 10);
        assert!(h.iter().all(|b| b.1 == 0));
        assert!(histogram(&log, Channel::Stokes, 0.0).is_err());
        assert!(histogram(&log, Channel::Stokes, -5.0).is_err());
    }

    #[test]
    fn mode_and_channel_parse() {
        assert_eq!("swpe".parse::<TrialMode>().unwrap(), TrialMode::Swpe);
        assert_eq!("G2".parse::<TrialMode>().unwrap(), TrialMode::G2);
        assert!("bell".parse::<TrialMode>().is_err());
        assert_eq!("as".parse::<Channel>().unwrap(), Channel::AntiStokes);
    }
}
