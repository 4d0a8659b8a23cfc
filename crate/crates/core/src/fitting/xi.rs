//! One-parameter fit of the readout branching ratio ξ to g²(τ_w) data.

use super::{param, residual_scale, weights, FitResult, SweepPoint};
use crate::error::{Error, Result};
use crate::model::g2_from_components;

/// Absolute tolerance on ξ.
pub const XI_TOL: f64 = 1e-6;
const GRID: usize = 200;
const INV_PHI: f64 = 0.618_033_988_749_894_8;

/// Fits ξ ∈ [0, 1] to points `(τ_w, g²)` using the closed-form g² with
/// `B = k_bg·τ_w`, `C = c_bg` and `γ = gamma_of_tau(τ_w)`.
///
/// A grid scan brackets the global minimum, then golden-section search
/// narrows it to [`XI_TOL`].
pub fn fit_xi(
    points: &[SweepPoint],
    gamma_of_tau: impl Fn(f64) -> f64,
    chi: f64,
    k_bg: f64,
    c_bg: f64,
) -> Result<FitResult> {
    let (w, weighted) = weights(points)?;
    if !(chi > 0.0 && chi <= 1.0) {
        return Err(Error::arg("chi", format!("{chi} outside (0, 1]")));
    }
    if !(k_bg >= 0.0 && c_bg >= 0.0) {
        return Err(Error::arg("background", "k_bg and c_bg must be >= 0"));
    }
    let gammas: Vec<f64> = points.iter().map(|p| gamma_of_tau(p.x)).collect();
    let model = |xi: f64, i: usize| -> Option<f64> {
        let p = &points[i];
        g2_from_components(chi, gammas[i], xi, k_bg * p.x, c_bg).ok()
    };
    let rss = |xi: f64| -> f64 {
        (0..points.len())
            .map(|i| match model(xi, i) {
                Some(g) => w[i] * (points[i].y - g).powi(2),
                None => f64::INFINITY,
            })
            .sum()
    };

    let grid: Vec<f64> = (0..=GRID).map(|k| k as f64 / GRID as f64).collect();
    let values: Vec<f64> = grid.iter().map(|&x| rss(x)).collect();
    let best = values
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .map(|(k, _)| k)
        .unwrap_or(0);
    if !values[best].is_finite() {
        return Err(Error::Undefined(
            "g2 model is undefined for every xi in [0, 1]".into(),
        ));
    }
    let mut lo = grid[best.saturating_sub(1)];
    let mut hi = grid[(best + 1).min(GRID)];

    let mut iterations = 0;
    let mut c = hi - INV_PHI * (hi - lo);
    let mut d = lo + INV_PHI * (hi - lo);
    let (mut fc, mut fd) = (rss(c), rss(d));
    while hi - lo > XI_TOL {
        iterations += 1;
        if fc <= fd {
            hi = d;
            d = c;
            fd = fc;
            c = hi - INV_PHI * (hi - lo);
            fc = rss(c);
        } else {
            lo = c;
            c = d;
            fc = fd;
            d = lo + INV_PHI * (hi - lo);
            fd = rss(d);
        }
    }
    // the bracket may touch a bound where the minimum sits exactly
    let mut xi = 0.5 * (lo + hi);
    let mut best_rss = rss(xi);
    for edge in [lo, hi] {
        let r = rss(edge);
        if r < best_rss {
            xi = edge;
            best_rss = r;
        }
    }
    let at_bound = xi <= XI_TOL || xi >= 1.0 - XI_TOL;

    // curvature from the model derivative at the solution
    let h = 1e-6;
    let (a, b) = ((xi - h).max(0.0), (xi + h).min(1.0));
    let mut info = 0.0;
    for (i, wi) in w.iter().enumerate() {
        if let (Some(ga), Some(gb)) = (model(a, i), model(b, i)) {
            let deriv = (gb - ga) / (b - a);
            info += wi * deriv * deriv;
        }
    }
    let scale = residual_scale(weighted, best_rss, points.len(), 1);
    let sigma = if info > 0.0 {
        (scale / info).sqrt()
    } else {
        f64::NAN
    };

    Ok(FitResult {
        parameters: vec![param("xi", xi, sigma)],
        rss: best_rss,
        iterations,
        converged: hi - lo <= XI_TOL,
        at_bound,
        weighted,
    })
}
