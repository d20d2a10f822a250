//! Posterior predictive mixture at a query point: confidence-weighted gating
//! over regimes, per-regime GP components, and Gaussian moment matching.

use rand::Rng;

use crate::dpmm::{BaseMeasure, RegimeState};
use crate::gp::{se_kernel, ObservationSet};

/// Predictive deviations are floored here before entering the 1/σ confidence
/// factor so an interpolated point cannot absorb all gating mass.
pub const GATING_SIGMA_FLOOR: f64 = 1e-6;

/// The mixture predictive at one query point. `weights`, `means`, and
/// `variances` run over regimes (plus a trailing new-regime component when
/// requested); `mean`/`variance` are the moment-matched Gaussian summary.
#[derive(Clone, Debug)]
pub struct MixturePrediction {
    pub weights: Vec<f64>,
    pub means: Vec<f64>,
    pub variances: Vec<f64>,
    pub mean: f64,
    pub variance: f64,
}

impl MixturePrediction {
    pub fn component_count(&self) -> usize {
        self.weights.len()
    }
}

/// Unnormalized gate for one component: CRP mass divided by the floored
/// predictive deviation.
fn gate(mass: f64, variance: f64) -> f64 {
    mass / variance.sqrt().max(GATING_SIGMA_FLOOR)
}

fn normalize(mut w: Vec<f64>) -> Vec<f64> {
    let total: f64 = w.iter().sum();
    for v in &mut w {
        *v /= total;
    }
    w
}

/// Monte Carlo prior predictive variance at `x` under the base measure.
/// Constant across the box for a stationary kernel, so callers evaluating a
/// whole acquisition surface can draw it once and reuse it.
pub fn mc_prior_variance<R: Rng + ?Sized>(
    x: &[f64],
    g0: &BaseMeasure,
    mc_samples: usize,
    rng: &mut R,
) -> f64 {
    assert!(mc_samples >= 1, "gating needs ≥ 1 Monte Carlo draw");
    let mut acc = 0.0;
    for _ in 0..mc_samples {
        let theta = g0.sample(rng);
        acc += se_kernel(x, x, &theta);
    }
    acc / mc_samples as f64
}

/// Gating weights at `x_star`: regime k gets mass (n_k/(n+α))/σ_{*,k}, and
/// when `include_new` is set a final component gets (α/(n+α))/σ_new with
/// σ²_new the Monte Carlo average of the prior variance under `g0`.
/// Normalized to sum 1.
pub fn gating_weights<R: Rng + ?Sized>(
    state: &RegimeState,
    data: &ObservationSet,
    x_star: &[f64],
    include_new: bool,
    g0: &BaseMeasure,
    mc_samples: usize,
    rng: &mut R,
) -> Vec<f64> {
    let n = state.len() as f64;
    let denom = n + state.alpha();
    let mut w: Vec<f64> = state
        .regimes()
        .iter()
        .map(|r| {
            let (_, var) = r.cache.predict(data, x_star);
            gate(r.count() as f64 / denom, var)
        })
        .collect();
    if include_new {
        let var_new = mc_prior_variance(x_star, g0, mc_samples, rng);
        w.push(gate(state.alpha() / denom, var_new));
    }
    normalize(w)
}

/// Moment-matched Gaussian summary of a mixture: μ = Σ w μ_k and
/// σ² = Σ w (σ²_k + μ²_k) − μ², clamped to be nonnegative.
/// Panics if the slice lengths differ (caller contract).
pub fn mixture_moments(means: &[f64], variances: &[f64], weights: &[f64]) -> (f64, f64) {
    assert_eq!(means.len(), variances.len(), "component length mismatch");
    assert_eq!(means.len(), weights.len(), "weight length mismatch");
    let mean: f64 = weights.iter().zip(means).map(|(w, m)| w * m).sum();
    let second: f64 = weights
        .iter()
        .zip(means)
        .zip(variances)
        .map(|((w, m), v)| w * (v + m * m))
        .sum();
    (mean, (second - mean * mean).max(0.0))
}

/// Deterministic mixture predictive at `x_star`: per-regime GP components
/// plus an optional zero-mean new-regime component with the supplied
/// variance. This is the pure core shared by [`mixture_predict`] and the
/// acquisition surfaces (which must be deterministic scalar fields).
pub fn mixture_components(
    state: &RegimeState,
    data: &ObservationSet,
    x_star: &[f64],
    new_variance: Option<f64>,
) -> MixturePrediction {
    let n = state.len() as f64;
    let denom = n + state.alpha();
    let mut means = Vec::with_capacity(state.regime_count() + 1);
    let mut variances = Vec::with_capacity(state.regime_count() + 1);
    let mut w = Vec::with_capacity(state.regime_count() + 1);
    for r in state.regimes() {
        let (mu, var) = r.cache.predict(data, x_star);
        w.push(gate(r.count() as f64 / denom, var));
        means.push(mu);
        variances.push(var);
    }
    if let Some(var_new) = new_variance {
        w.push(gate(state.alpha() / denom, var_new));
        means.push(0.0);
        variances.push(var_new);
    }
    let weights = normalize(w);
    let (mean, variance) = mixture_moments(&means, &variances, &weights);
    MixturePrediction { weights, means, variances, mean, variance }
}

/// Full mixture predictive at `x_star`: per-regime GP components, gating
/// weights, and the moment-matched summary. The new-regime component (when
/// included) is zero-mean with the Monte Carlo prior variance.
pub fn mixture_predict<R: Rng + ?Sized>(
    state: &RegimeState,
    data: &ObservationSet,
    x_star: &[f64],
    include_new: bool,
    g0: &BaseMeasure,
    mc_samples: usize,
    rng: &mut R,
) -> MixturePrediction {
    let new_variance =
        include_new.then(|| mc_prior_variance(x_star, g0, mc_samples, rng));
    mixture_components(state, data, x_star, new_variance)
}
