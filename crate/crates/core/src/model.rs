//! Closed-form detection probabilities, cross-correlation and polarization
//! correlations for a heralded spin-wave/photon pair source.
//!
//! All functions are first order in the excitation probability χ. The
//! background means `B = k·τ_w` and `C` are Poisson means per pulse before
//! detection, so they are not clamped to one.
//!
//! The detection probabilities are
//!
//! ```text
//! P_S    = (χ + B)·η_S
//! P_AS   = (χ·γ + χ·(1 − γ)·ξ + C)·η_AS
//! P_S,AS = χ·γ·η_S·η_AS + P_S·P_AS
//! ```
//!
//! which give `g² = P_S,AS / (P_S·P_AS)` in the closed form of
//! [`g2_from_components`].

use std::f64::consts::SQRT_2;

use crate::error::{Error, Result};
use crate::params::{AngleSettings, ExperimentParams};

/// Mean Stokes background per write pulse, `k_bg · τ_w`.
pub fn background_b(tau_w: f64, k_bg: f64) -> Result<f64> {
    if !(tau_w >= 0.0) {
        return Err(Error::arg("tau_w", format!("{tau_w} must be >= 0")));
    }
    if !(k_bg >= 0.0) {
        return Err(Error::arg("k_bg", format!("{k_bg} must be >= 0")));
    }
    Ok(k_bg * tau_w)
}

fn params_b(p: &ExperimentParams) -> f64 {
    // fields are validated non-negative at construction sites
    p.k_bg * p.tau_w
}

/// Retrieval efficiency after storage and write-time decoherence.
///
/// With a [`GammaTable`](crate::params::GammaTable) present the tabulated
/// value at `tau_w` is returned instead of the exponential law.
pub fn retrieval_gamma(p: &ExperimentParams) -> f64 {
    let g = match &p.gamma_table {
        Some(table) => table.eval(p.tau_w),
        None => p.gamma0 * (-(p.t_storage + p.alpha_write * p.tau_w) / p.tau_mem).exp(),
    };
    g.clamp(0.0, 1.0)
}

pub fn prob_stokes(p: &ExperimentParams) -> f64 {
    (p.chi + params_b(p)) * p.eta_s
}

pub fn prob_antistokes(p: &ExperimentParams) -> f64 {
    let gamma = retrieval_gamma(p);
    (p.chi * gamma + p.chi * (1.0 - gamma) * p.xi + p.c_bg) * p.eta_as
}

pub fn prob_coincidence(p: &ExperimentParams) -> f64 {
    let gamma = retrieval_gamma(p);
    p.chi * gamma * p.eta_s * p.eta_as + prob_stokes(p) * prob_antistokes(p)
}

/// `1 + γ / [(B+χ)γ + (B+χ)(1−γ)ξ + C + BC/χ]`.
pub fn g2_from_components(chi: f64, gamma: f64, xi: f64, b: f64, c: f64) -> Result<f64> {
    if chi == 0.0 {
        if b * c > 0.0 {
            return Err(Error::Undefined(
                "division by zero: chi = 0 with nonzero B·C".into(),
            ));
        }
        return Err(Error::Undefined(
            "g2 has no signal term when chi = 0".into(),
        ));
    }
    let denom = (b + chi) * gamma + (b + chi) * (1.0 - gamma) * xi + c + b * c / chi;
    if !(denom > 0.0) {
        return Err(Error::Undefined(
            "g2 denominator vanishes (no retrieval and no noise)".into(),
        ));
    }
    Ok(1.0 + gamma / denom)
}

pub fn g2_analytic(p: &ExperimentParams) -> Result<f64> {
    g2_from_components(p.chi, retrieval_gamma(p), p.xi, params_b(p), p.c_bg)
}

/// Probabilities `p[i][j]` that, given one signal pair reaches both analyzers,
/// the Stokes photon fires detector `S(i+1)` and the anti-Stokes photon fires
/// `AS(j+1)`.
///
/// The state is `v0·|Φ⟩⟨Φ| + (1−v0)·I/4` with `|Φ⟩ = cosϑ|HH⟩ + sinϑ|VV⟩`.
/// Detector 1 of each analyzer projects onto `cosθ|H⟩ + sinθ|V⟩`, detector 2
/// onto the orthogonal state. Angles are in degrees, `theta_asym` in radians.
pub fn joint_click_probabilities(
    theta_asym: f64,
    v0: f64,
    theta_s: f64,
    theta_as: f64,
) -> [[f64; 2]; 2] {
    let (ss, cs) = theta_s.to_radians().sin_cos();
    let (sa, ca) = theta_as.to_radians().sin_cos();
    let (sv, cv) = theta_asym.sin_cos();
    // analyzer basis vectors (H, V components)
    let s_basis = [[cs, ss], [-ss, cs]];
    let a_basis = [[ca, sa], [-sa, ca]];
    let mut out = [[0.0; 2]; 2];
    for (i, s) in s_basis.iter().enumerate() {
        for (j, a) in a_basis.iter().enumerate() {
            let amp = cv * s[0] * a[0] + sv * s[1] * a[1];
            out[i][j] = v0 * amp * amp + (1.0 - v0) * 0.25;
        }
    }
    out
}

/// `p11 − p12 − p21 + p22`, which reduces to
/// `v0·(cos2θ_S·cos2θ_AS + sin2ϑ·sin2θ_S·sin2θ_AS)`.
pub fn correlation_e_analytic(theta_asym: f64, v0: f64, theta_s: f64, theta_as: f64) -> f64 {
    let p = joint_click_probabilities(theta_asym, v0, theta_s, theta_as);
    p[0][0] - p[0][1] - p[1][0] + p[1][1]
}

/// `|e1 − e2 + e3 + e4|`.
pub fn chsh_s_from_e(e: [f64; 4]) -> Result<f64> {
    if let Some(bad) = e.iter().find(|v| !(v.abs() <= 1.0)) {
        return Err(Error::arg(
            "e",
            format!("correlation {bad} outside [-1, 1]"),
        ));
    }
    Ok((e[0] - e[1] + e[2] + e[3]).abs())
}

/// Bell parameter predicted from the cross-correlation,
/// `2√2·v0·(g² − 1)/(g² + 1)`.
pub fn s_vs_g2(g2: f64, v0: f64) -> Result<f64> {
    if !(g2 >= 1.0) {
        return Err(Error::arg("g2", format!("{g2} must be >= 1")));
    }
    if !(0.0..=1.0).contains(&v0) {
        return Err(Error::arg("v0", format!("{v0} outside [0, 1]")));
    }
    if g2.is_infinite() {
        return Ok(2.0 * SQRT_2 * v0);
    }
    Ok(2.0 * SQRT_2 * v0 * (g2 - 1.0) / (g2 + 1.0))
}

/// Noise-free CHSH value of the depolarized state at the given settings.
pub fn s_analytic(theta_asym: f64, v0: f64, angles: &AngleSettings) -> f64 {
    let [e1, e2, e3, e4] = angles
        .pairs()
        .map(|s| correlation_e_analytic(theta_asym, v0, s.theta_s, s.theta_as));
    (e1 - e2 + e3 + e4).abs()
}

/// Visibility that reproduces [`s_analytic`] at canonical settings through the
/// `2√2·V` prefactor; folds the asymmetry angle into the visibility.
pub fn effective_visibility(theta_asym: f64, v0: f64) -> f64 {
    s_analytic(theta_asym, v0, &AngleSettings::canonical()) / (2.0 * SQRT_2)
}
