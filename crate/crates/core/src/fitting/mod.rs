//! Least-squares fits of the calibration curves: background slope, memory
//! decay, readout branching ratio and visibility.
//!
//! Points carrying `sigma_y` are weighted by `1/sigma_y²` and parameter
//! uncertainties come straight from the weighted normal matrix. Without
//! sigmas the fit is unweighted and the covariance is scaled by the residual
//! variance `RSS/(n − p)`; with no spare degrees of freedom the uncertainty is
//! reported as NaN.

mod decay;
mod xi;

use std::f64::consts::SQRT_2;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use decay::{fit_memory_decay, DECAY_GRADIENT_TOL, DECAY_MAX_ITER};
pub use xi::{fit_xi, XI_TOL};

/// One measured (or simulated) point of a calibration curve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub x: f64,
    pub y: f64,
    pub sigma_y: Option<f64>,
}

impl SweepPoint {
    pub fn new(x: f64, y: f64) -> Self {
        Self {
            x,
            y,
            sigma_y: None,
        }
    }

    pub fn with_sigma(x: f64, y: f64, sigma_y: f64) -> Self {
        Self {
            x,
            y,
            sigma_y: Some(sigma_y),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitParameter {
    pub name: String,
    pub value: f64,
    pub sigma: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub parameters: Vec<FitParameter>,
    /// Weighted residual sum of squares at the solution.
    pub rss: f64,
    pub iterations: u32,
    pub converged: bool,
    /// A parameter was clamped to, or landed on, a bound of its domain.
    pub at_bound: bool,
    pub weighted: bool,
}

impl FitResult {
    pub fn value(&self, name: &str) -> Option<f64> {
        self.param(name).map(|p| p.value)
    }

    pub fn sigma(&self, name: &str) -> Option<f64> {
        self.param(name).map(|p| p.sigma)
    }

    pub fn param(&self, name: &str) -> Option<&FitParameter> {
        self.parameters.iter().find(|p| p.name == name)
    }
}

fn param(name: &str, value: f64, sigma: f64) -> FitParameter {
    FitParameter {
        name: name.to_string(),
        value,
        sigma,
    }
}

/// Validates points and returns their weights (all ones when unweighted).
pub(crate) fn weights(points: &[SweepPoint]) -> Result<(Vec<f64>, bool)> {
    if points.is_empty() {
        return Err(Error::arg("points", "no data points"));
    }
    for p in points {
        if !(p.x.is_finite() && p.x >= 0.0) {
            return Err(Error::arg(
                "points",
                format!("x = {} must be finite and >= 0", p.x),
            ));
        }
        if !p.y.is_finite() {
            return Err(Error::arg("points", format!("y = {} is not finite", p.y)));
        }
        if let Some(s) = p.sigma_y {
            if !(s > 0.0 && s.is_finite()) {
                return Err(Error::arg("points", format!("sigma_y = {s} must be > 0")));
            }
        }
    }
    let n_sigma = points.iter().filter(|p| p.sigma_y.is_some()).count();
    match n_sigma {
        0 => Ok((vec![1.0; points.len()], false)),
        n if n == points.len() => Ok((
            points
                .iter()
                .map(|p| p.sigma_y.map_or(1.0, |s| 1.0 / (s * s)))
                .collect(),
            true,
        )),
        _ => Err(Error::arg(
            "points",
            "either all points or none must carry sigma_y",
        )),
    }
}

/// Variance multiplier for unweighted fits.
pub(crate) fn residual_scale(weighted: bool, rss: f64, n: usize, n_params: usize) -> f64 {
    if weighted {
        1.0
    } else if n > n_params {
        rss / (n - n_params) as f64
    } else {
        f64::NAN
    }
}

/// Linear least squares through the origin, `y = slope·x`, closed form.
fn fit_through_origin(points: &[SweepPoint], name: &str) -> Result<FitResult> {
    let (w, weighted) = weights(points)?;
    let sxx: f64 = points.iter().zip(&w).map(|(p, w)| w * p.x * p.x).sum();
    if !(sxx > 0.0) {
        return Err(Error::Degenerate("all x values are zero".into()));
    }
    let sxy: f64 = points.iter().zip(&w).map(|(p, w)| w * p.x * p.y).sum();
    let slope = sxy / sxx;
    let rss: f64 = points
        .iter()
        .zip(&w)
        .map(|(p, w)| w * (p.y - slope * p.x).powi(2))
        .sum();
    let scale = residual_scale(weighted, rss, points.len(), 1);
    Ok(FitResult {
        parameters: vec![param(name, slope, (scale / sxx).sqrt())],
        rss,
        iterations: 0,
        converged: true,
        at_bound: false,
        weighted,
    })
}

/// Fits `B = k·τ_w` with points `(τ_w, B)`. One point suffices.
pub fn fit_background_slope(points: &[SweepPoint]) -> Result<FitResult> {
    fit_through_origin(points, "k")
}

/// `2√2·(g² − 1)/(g² + 1)`, the Bell parameter per unit visibility.
pub fn visibility_basis(g2: f64) -> f64 {
    2.0 * SQRT_2 * (g2 - 1.0) / (g2 + 1.0)
}

/// Fits `S = V₀·2√2·(g² − 1)/(g² + 1)` with points `(x = g², y = S)`.
/// Closed form; the estimate is clamped to [0, 1].
pub fn fit_v0(points: &[SweepPoint]) -> Result<FitResult> {
    if let Some(p) = points.iter().find(|p| !(p.x >= 1.0)) {
        return Err(Error::arg("points", format!("g2 = {} must be >= 1", p.x)));
    }
    let (w, weighted) = weights(points)?;
    let basis: Vec<f64> = points.iter().map(|p| visibility_basis(p.x)).collect();
    let sbb: f64 = basis.iter().zip(&w).map(|(b, w)| w * b * b).sum();
    if !(sbb > 0.0) {
        return Err(Error::Degenerate("every g2 equals 1".into()));
    }
    let ssb: f64 = points
        .iter()
        .zip(&basis)
        .zip(&w)
        .map(|((p, b), w)| w * p.y * b)
        .sum();
    let raw = ssb / sbb;
    let v0 = raw.clamp(0.0, 1.0);
    let rss: f64 = points
        .iter()
        .zip(&basis)
        .zip(&w)
        .map(|((p, b), w)| w * (p.y - v0 * b).powi(2))
        .sum();
    let scale = residual_scale(weighted, rss, points.len(), 1);
    Ok(FitResult {
        parameters: vec![param("v0", v0, (scale / sbb).sqrt())],
        rss,
        iterations: 0,
        converged: true,
        at_bound: v0 != raw,
        weighted,
    })
}
