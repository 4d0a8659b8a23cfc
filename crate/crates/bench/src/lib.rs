//! Shared inputs for the criterion benchmarks in `benches/`.

use swpe_core::fitting::SweepPoint;
use swpe_core::model::g2_from_components;
use swpe_core::ExperimentParams;

/// Default operating point with a higher excitation probability so that
/// short campaigns still produce events.
pub fn busy_params() -> ExperimentParams {
    ExperimentParams {
        chi: 0.05,
        c_bg: 0.01,
        ..Default::default()
    }
}

/// Retrieval law used by the synthetic g² curve.
pub fn gamma_law(tau_w: f64) -> f64 {
    0.2 * (-(1_000.0 + 0.2677 * tau_w) / 50_000.0).exp()
}

/// Twelve-point memory decay curve.
pub fn decay_points() -> Vec<SweepPoint> {
    (0..12)
        .map(|i| {
            let t = i as f64 * 1e4;
            SweepPoint::new(
                t,
                0.2 * (-t / 5e4).exp() * (1.0 + 0.01 * ((i % 3) as f64 - 1.0)),
            )
        })
        .collect()
}

/// Twelve-point g²(τ_w) curve at χ = 0.006, k = 6.6e-7/ns, ξ = 0.27.
pub fn g2_points() -> Vec<SweepPoint> {
    (0..12)
        .map(|i| {
            let t = 40.0 + i as f64 * 4_500.0;
            let g = g2_from_components(0.006, gamma_law(t), 0.27, 6.6e-7 * t, 0.0)
                .expect("valid operating point");
            SweepPoint::new(t, g)
        })
        .collect()
}
