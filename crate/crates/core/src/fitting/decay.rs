//! `γ(t) = γ₀·exp(−t/τ_mem)` by damped Gauss–Newton on the direct residuals.
//!
//! The start point comes from a weighted log-linear regression. Each
//! Gauss–Newton step is halved until the residual sum of squares decreases.
//! The fit has converged once every Jacobian column is orthogonal to the
//! residual vector to within [`DECAY_GRADIENT_TOL`] (cosine of the angle),
//! or the residual is at rounding level.

use super::{param, residual_scale, weights, FitResult, SweepPoint};
use crate::error::{Error, Result};

pub const DECAY_MAX_ITER: u32 = 200;
pub const DECAY_GRADIENT_TOL: f64 = 1e-10;
const MAX_HALVINGS: u32 = 60;

struct Problem<'a> {
    points: &'a [SweepPoint],
    w: Vec<f64>,
}

impl Problem<'_> {
    fn rss(&self, amp: f64, tau: f64) -> f64 {
        self.points
            .iter()
            .zip(&self.w)
            .map(|(p, w)| w * (p.y - amp * (-p.x / tau).exp()).powi(2))
            .sum()
    }

    /// Normal matrix `JᵀWJ`, gradient `JᵀWr` and the column norms of `√W·J`.
    fn normal_equations(&self, amp: f64, tau: f64) -> ([[f64; 2]; 2], [f64; 2], [f64; 2]) {
        let mut a = [[0.0; 2]; 2];
        let mut g = [0.0; 2];
        for (p, w) in self.points.iter().zip(&self.w) {
            let e = (-p.x / tau).exp();
            let r = p.y - amp * e;
            let j = [e, amp * p.x / (tau * tau) * e];
            for k in 0..2 {
                g[k] += w * j[k] * r;
                for l in 0..2 {
                    a[k][l] += w * j[k] * j[l];
                }
            }
        }
        (a, g, [a[0][0].sqrt(), a[1][1].sqrt()])
    }
}

fn solve2(a: [[f64; 2]; 2], b: [f64; 2]) -> Option<[f64; 2]> {
    let det = a[0][0] * a[1][1] - a[0][1] * a[1][0];
    if !(det.abs() > 0.0) || !det.is_finite() {
        return None;
    }
    Some([
        (b[0] * a[1][1] - b[1] * a[0][1]) / det,
        (a[0][0] * b[1] - a[1][0] * b[0]) / det,
    ])
}

fn inverse2(a: [[f64; 2]; 2]) -> Option<[[f64; 2]; 2]> {
    let det = a[0][0] * a[1][1] - a[0][1] * a[1][0];
    if !(det.abs() > 0.0) || !det.is_finite() {
        return None;
    }
    Some([
        [a[1][1] / det, -a[0][1] / det],
        [-a[1][0] / det, a[0][0] / det],
    ])
}

/// Weighted regression of `ln y` on `x`; variance of `ln y` is `σ²/y²`.
fn log_linear_start(points: &[SweepPoint], w: &[f64]) -> (f64, f64) {
    let lw: Vec<f64> = points.iter().zip(w).map(|(p, w)| w * p.y * p.y).collect();
    let sw: f64 = lw.iter().sum();
    let mx = points.iter().zip(&lw).map(|(p, w)| w * p.x).sum::<f64>() / sw;
    let my = points
        .iter()
        .zip(&lw)
        .map(|(p, w)| w * p.y.ln())
        .sum::<f64>()
        / sw;
    let sxx: f64 = points
        .iter()
        .zip(&lw)
        .map(|(p, w)| w * (p.x - mx).powi(2))
        .sum();
    let sxy: f64 = points
        .iter()
        .zip(&lw)
        .map(|(p, w)| w * (p.x - mx) * (p.y.ln() - my))
        .sum();
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let x_max = points.iter().map(|p| p.x).fold(0.0, f64::max).max(1.0);
    // a flat or rising start gets a lifetime far beyond the data range
    let tau = if slope < 0.0 {
        -1.0 / slope
    } else {
        1e3 * x_max
    };
    ((my - slope * mx).exp(), tau.min(1e6 * x_max))
}

/// Fits `(gamma0, tau_mem)` to points `(t, γ)`. Needs at least three points
/// with γ in (0, 1]. Non-convergence is reported through the flag.
pub fn fit_memory_decay(points: &[SweepPoint]) -> Result<FitResult> {
    if points.len() < 3 {
        return Err(Error::arg(
            "points",
            format!("memory decay fit needs >= 3 points, got {}", points.len()),
        ));
    }
    if let Some(p) = points.iter().find(|p| !(p.y > 0.0 && p.y <= 1.0)) {
        return Err(Error::arg(
            "points",
            format!("retrieval efficiency {} outside (0, 1]", p.y),
        ));
    }
    let (w, weighted) = weights(points)?;
    let prob = Problem { points, w };
    let (mut amp, mut tau) = log_linear_start(points, &prob.w);
    let mut rss = prob.rss(amp, tau);
    let floor = f64::EPSILON.powi(2)
        * points
            .iter()
            .zip(&prob.w)
            .map(|(p, w)| w * p.y * p.y)
            .sum::<f64>();

    let mut iterations = 0;
    let mut converged = false;
    while iterations < DECAY_MAX_ITER {
        let (a, g, col) = prob.normal_equations(amp, tau);
        let r_norm = rss.sqrt();
        let cosine = (0..2)
            .map(|k| {
                if col[k] > 0.0 && r_norm > 0.0 {
                    g[k].abs() / (col[k] * r_norm)
                } else {
                    0.0
                }
            })
            .fold(0.0, f64::max);
        if rss <= floor || cosine <= DECAY_GRADIENT_TOL {
            converged = true;
            break;
        }
        iterations += 1;
        let Some(step) = solve2(a, g) else { break };
        let mut t = 1.0;
        let mut accepted = false;
        for _ in 0..MAX_HALVINGS {
            let (na, nt) = (amp + t * step[0], tau + t * step[1]);
            if nt > 0.0 {
                let nr = prob.rss(na, nt);
                if nr < rss {
                    amp = na;
                    tau = nt;
                    rss = nr;
                    accepted = true;
                    break;
                }
            }
            t *= 0.5;
        }
        if !accepted {
            // no descent along the Gauss–Newton direction: we are at the
            // numerical minimum if the gradient is tiny, otherwise stuck
            let (_, g, col) = prob.normal_equations(amp, tau);
            let r_norm = rss.sqrt();
            converged = (0..2).all(|k| g[k].abs() <= 1e3 * DECAY_GRADIENT_TOL * col[k] * r_norm);
            break;
        }
    }

    let (a, _, _) = prob.normal_equations(amp, tau);
    let scale = residual_scale(weighted, rss, points.len(), 2);
    let (s_amp, s_tau) = match inverse2(a) {
        Some(cov) => ((scale * cov[0][0]).sqrt(), (scale * cov[1][1]).sqrt()),
        None => (f64::NAN, f64::NAN),
    };
    Ok(FitResult {
        parameters: vec![param("gamma0", amp, s_amp), param("tau_mem", tau, s_tau)],
        rss,
        iterations,
        converged,
        at_bound: false,
        weighted,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn curve(gamma0: f64, tau: f64, ts: &[f64]) -> Vec<SweepPoint> {
        ts.iter()
            .map(|&t| SweepPoint::new(t, gamma0 * (-t / tau).exp()))
            .collect()
    }

    #[test]
    fn exact_points_are_recovered() {
        let ts: Vec<f64> = (0..8).map(|i| i as f64 * 12_500.0).collect();
        let fit = fit_memory_decay(&curve(0.20, 50_000.0, &ts)).unwrap();
        assert!(fit.converged);
        assert!(fit.rss < 1e-12);
        assert!((fit.value("gamma0").unwrap() - 0.20).abs() < 1e-12);
        assert!((fit.value("tau_mem").unwrap() - 50_000.0).abs() < 1e-6);
    }

    #[test]
    fn two_points_is_an_error() {
        let pts = curve(0.2, 5e4, &[0.0, 1e4]);
        assert!(fit_memory_decay(&pts).is_err());
    }

    #[test]
    fn non_positive_gamma_is_an_error() {
        let mut pts = curve(0.2, 5e4, &[0.0, 1e4, 2e4]);
        pts[1].y = 0.0;
        assert!(matches!(
            fit_memory_decay(&pts),
            Err(Error::InvalidArgument { .. })
        ));
        pts[1].y = 1.2;
        assert!(fit_memory_decay(&pts).is_err());
    }

    #[test]
    fn noisy_points_converge_near_truth() {
        // fixed ±3% pattern
        let ts: Vec<f64> = (0..8).map(|i| i as f64 * 100_000.0 / 7.0).collect();
        let wobble = [0.03, -0.02, 0.01, -0.03, 0.02, 0.0, -0.01, 0.03];
        let pts: Vec<_> = curve(0.2, 50_000.0, &ts)
            .into_iter()
            .zip(wobble)
            .map(|(p, d)| SweepPoint::new(p.x, p.y * (1.0 + d)))
            .collect();
        let fit = fit_memory_decay(&pts).unwrap();
        assert!(fit.converged);
        let tau = fit.value("tau_mem").unwrap();
        assert!((tau / 50_000.0 - 1.0).abs() < 0.05, "{tau}");
        assert!(fit.sigma("tau_mem").unwrap() > 0.0);
    }

    #[test]
    fn weighted_estimate_ignores_uniform_sigma_scale() {
        let ts: Vec<f64> = (0..6).map(|i| i as f64 * 20_000.0).collect();
        let wobble = [0.02, -0.01, 0.03, -0.02, 0.01, -0.03];
        let mk = |scale: f64| -> Vec<SweepPoint> {
            curve(0.18, 40_000.0, &ts)
                .into_iter()
                .zip(wobble)
                .map(|(p, d)| SweepPoint::with_sigma(p.x, p.y * (1.0 + d), scale * 0.03 * p.y))
                .collect()
        };
        let a = fit_memory_decay(&mk(1.0)).unwrap();
        let b = fit_memory_decay(&mk(9.0)).unwrap();
        for name in ["gamma0", "tau_mem"] {
            let (x, y) = (a.value(name).unwrap(), b.value(name).unwrap());
            assert!(((x - y) / x).abs() < 1e-10, "{name}: {x} vs {y}");
        }
    }

    #[test]
    fn flat_data_starts_sanely() {
        let pts: Vec<_> = [0.0, 1.0, 2.0, 3.0]
            .iter()
            .map(|&t| SweepPoint::new(t, 0.1))
            .collect();
        let fit = fit_memory_decay(&pts).unwrap();
        assert!((fit.value("gamma0").unwrap() - 0.1).abs() < 1e-9);
        assert!(fit.value("tau_mem").unwrap() > 1e3);
    }
}
