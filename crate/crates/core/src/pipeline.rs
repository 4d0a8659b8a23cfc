//! Campaign orchestration: run the calibration and Bell campaigns for one
//! configuration and reduce them to the measured quantities.

use serde::{Deserialize, Serialize};

use crate::analysis::{
    bell_s, g2_estimate, retrieval_estimate, tally, BellEstimate, CountsTable, EstimateWithError,
};
use crate::error::Result;
use crate::model;
use crate::params::{AngleSettings, ExperimentParams, Setting};
use crate::rng::derive_seed;
use crate::trialsim::{run_campaign_partitioned, TrialMode};

/// Quantities reported for one configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub mode: TrialMode,
    pub n_trials: u64,
    pub p_s: EstimateWithError,
    pub p_as: EstimateWithError,
    pub p_s_as: EstimateWithError,
    pub g2: Option<EstimateWithError>,
    pub gamma: Option<EstimateWithError>,
    pub bell: Option<BellEstimate>,
}

/// Reduces a counts table.
///
/// g² and the retrieval efficiency need unconditional anti-Stokes singles and
/// are therefore only computed for [`TrialMode::G2`] counts. S is computed
/// when all four CHSH settings of `angles` are present.
pub fn summarize(
    table: &CountsTable,
    params: &ExperimentParams,
    mode: TrialMode,
    angles: &AngleSettings,
) -> Result<Summary> {
    let cal = table.calibration_counts()?;
    let (g2, gamma) = match mode {
        TrialMode::G2 => {
            let b = model::background_b(params.tau_w, params.k_bg)?;
            (
                Some(g2_estimate(table)?),
                Some(retrieval_estimate(table, params.eta_as, params.eta_s, b)?),
            )
        }
        TrialMode::Swpe => (None, None),
    };
    let bell = if angles.pairs().iter().all(|s| table.get(*s).is_some()) {
        Some(bell_s(table, angles)?)
    } else {
        None
    };
    Ok(Summary {
        mode,
        n_trials: cal.n_trials,
        p_s: cal.p_stokes(),
        p_as: cal.p_antistokes(),
        p_s_as: cal.p_coincidence(),
        g2,
        gamma,
        bell,
    })
}

/// How a sweep point is measured.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementPlan {
    /// Trials per campaign.
    pub n_trials: u64,
    pub seed: u64,
    /// Mode of the four Bell campaigns; calibration always runs in G2 mode.
    pub bell_mode: TrialMode,
    pub angles: AngleSettings,
    pub partitions: usize,
}

impl MeasurementPlan {
    pub fn new(n_trials: u64, seed: u64) -> Self {
        Self {
            n_trials,
            seed,
            bell_mode: TrialMode::Swpe,
            angles: AngleSettings::canonical(),
            partitions: rayon::current_num_threads(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointMeasurement {
    pub tau_w: f64,
    pub p_s: EstimateWithError,
    pub p_as: EstimateWithError,
    pub g2: EstimateWithError,
    /// `None` when the background subtraction leaves no signal to normalize by.
    pub gamma: Option<EstimateWithError>,
    pub bell: BellEstimate,
}

/// One G2-mode campaign at θ_S = θ_AS = 0 for g², P_S, P_AS and γ, then one
/// campaign per CHSH setting for S. Campaign `i` uses seed
/// `derive_seed(plan.seed, i)`, with the calibration campaign at `i = 0`.
pub fn measure_point(
    params: &ExperimentParams,
    plan: &MeasurementPlan,
) -> Result<PointMeasurement> {
    let calib_log = run_campaign_partitioned(
        params,
        Setting::ZERO,
        TrialMode::G2,
        plan.n_trials,
        derive_seed(plan.seed, 0),
        plan.partitions,
    )?;
    let mut calib = CountsTable::new();
    calib.add(tally(&calib_log)?);
    drop(calib_log);
    let cal = calib.calibration_counts()?;
    let g2 = g2_estimate(&calib)?;
    let b = model::background_b(params.tau_w, params.k_bg)?;
    let gamma = match retrieval_estimate(&calib, params.eta_as, params.eta_s, b) {
        Ok(g) => Some(g),
        Err(e) if e.is_statistical() => None,
        Err(e) => return Err(e),
    };

    let mut bell_table = CountsTable::new();
    for (i, setting) in plan.angles.pairs().into_iter().enumerate() {
        let log = run_campaign_partitioned(
            params,
            setting,
            plan.bell_mode,
            plan.n_trials,
            derive_seed(plan.seed, i as u64 + 1),
            plan.partitions,
        )?;
        bell_table.add(tally(&log)?);
    }
    let bell = bell_s(&bell_table, &plan.angles)?;

    Ok(PointMeasurement {
        tau_w: params.tau_w,
        p_s: cal.p_stokes(),
        p_as: cal.p_antistokes(),
        g2,
        gamma,
        bell,
    })
}
