//! Mixture acquisition functions over the regime predictive — expected
//! improvement, probability of improvement, UCB, max-value entropy search,
//! and Thompson sampling — plus the shared multi-start box maximizer.

use std::collections::HashMap;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::boxopt::{maximize_from, BoxOptOptions};
use crate::dpmm::{crp_prior_probs, BaseMeasure, RegimeState};
use crate::error::{Error, Result};
use crate::gp::{KernelHyperparams, ObservationSet};
use crate::predictive::MixturePrediction;
use crate::sobol::sobol_init;
use crate::util::{norm_cdf, norm_pdf};

/// Components thinner than this deviation are treated as point masses.
const SIGMA_DEGENERATE: f64 = 1e-12;
/// Φ floor inside the entropy terms.
const MES_CDF_FLOOR: f64 = 1e-12;
/// Quasi-random candidates for max-value sampling grids.
const MAX_VALUE_CANDIDATES: usize = 512;

/// Scalar inputs shared by the acquisition functions.
#[derive(Clone, Copy, Debug)]
pub struct AcquisitionContext {
    /// Incumbent: best (standardized) observed output.
    pub f_plus: f64,
    /// Margin ξ in probability of improvement.
    pub exploration_xi: f64,
    /// Confidence multiplier β in UCB.
    pub ucb_beta: f64,
    /// Monte Carlo max-value samples for entropy search.
    pub mes_samples: usize,
    /// Random Fourier feature count for Thompson paths.
    pub rff_features: usize,
}

impl AcquisitionContext {
    pub fn new(f_plus: f64) -> Result<Self> {
        let ctx = Self {
            f_plus,
            exploration_xi: 0.01,
            ucb_beta: 2.0,
            mes_samples: 10,
            rff_features: 512,
        };
        ctx.validate()?;
        Ok(ctx)
    }

    pub fn validate(&self) -> Result<()> {
        if !self.f_plus.is_finite() {
            return Err(Error::InvalidInput(format!("incumbent must be finite, got {}", self.f_plus)));
        }
        if self.exploration_xi.is_nan() || self.exploration_xi < 0.0 {
            return Err(Error::InvalidInput(format!("ξ must be ≥ 0, got {}", self.exploration_xi)));
        }
        if self.ucb_beta.is_nan() || self.ucb_beta <= 0.0 {
            return Err(Error::InvalidInput(format!("β must be > 0, got {}", self.ucb_beta)));
        }
        if self.mes_samples == 0 || self.rff_features == 0 {
            return Err(Error::InvalidInput("sample and feature counts must be ≥ 1".into()));
        }
        Ok(())
    }
}

/// Mixture expected improvement: Σ w_k σ_k [γ_k Φ(γ_k) + φ(γ_k)] with
/// γ_k = (μ_k − f⁺)/σ_k; degenerate components contribute their exact
/// improvement w_k · max(0, μ_k − f⁺).
pub fn ei_mixture(pred: &MixturePrediction, ctx: &AcquisitionContext) -> f64 {
    let mut acc = 0.0;
    for ((&w, &mu), &var) in pred.weights.iter().zip(&pred.means).zip(&pred.variances) {
        let sigma = var.sqrt();
        if sigma < SIGMA_DEGENERATE {
            acc += w * (mu - ctx.f_plus).max(0.0);
        } else {
            let gamma = (mu - ctx.f_plus) / sigma;
            acc += w * sigma * (gamma * norm_cdf(gamma) + norm_pdf(gamma));
        }
    }
    acc
}

/// Mixture probability of improvement: Σ w_k Φ((μ_k − f⁺ − ξ)/σ_k).
pub fn pi_mixture(pred: &MixturePrediction, ctx: &AcquisitionContext) -> f64 {
    let mut acc = 0.0;
    for ((&w, &mu), &var) in pred.weights.iter().zip(&pred.means).zip(&pred.variances) {
        let sigma = var.sqrt();
        let gap = mu - ctx.f_plus - ctx.exploration_xi;
        if sigma < SIGMA_DEGENERATE {
            if gap > 0.0 {
                acc += w;
            }
        } else {
            acc += w * norm_cdf(gap / sigma);
        }
    }
    acc
}

/// Upper confidence bound on the moment-matched mixture: μ_mix + √β·σ_mix.
pub fn ucb_mixture(pred: &MixturePrediction, ctx: &AcquisitionContext) -> f64 {
    pred.mean + ctx.ucb_beta.sqrt() * pred.variance.sqrt()
}

/// Max-value entropy search over sampled maxima:
/// (1/S) Σ_s Σ_k w_k [γ φ(γ)/(2Φ(γ)) − ln Φ(γ)] with γ = (y*_s − μ_k)/σ_k.
pub fn mes_mixture(
    pred: &MixturePrediction,
    max_value_samples: &[f64],
    _ctx: &AcquisitionContext,
) -> f64 {
    assert!(!max_value_samples.is_empty(), "MES needs ≥ 1 max-value sample");
    let mut acc = 0.0;
    for &y_star in max_value_samples {
        for ((&w, &mu), &var) in pred.weights.iter().zip(&pred.means).zip(&pred.variances) {
            let sigma = var.sqrt().max(SIGMA_DEGENERATE);
            let gamma = (y_star - mu) / sigma;
            let cdf = norm_cdf(gamma).max(MES_CDF_FLOOR);
            acc += w * (gamma * norm_pdf(gamma) / (2.0 * cdf) - cdf.ln());
        }
    }
    (acc / max_value_samples.len() as f64).max(0.0)
}

/// Draw approximate posterior maxima: per sample, a regime is chosen by its
/// CRP mass, the regime's predictive is evaluated on the observed inputs
/// plus a quasi-random grid, a Gumbel is fitted to the distribution of the
/// grid maximum by quantile matching, and one value is drawn, floored just
/// above the incumbent.
pub fn sample_max_values<R: Rng + ?Sized>(
    state: &RegimeState,
    data: &ObservationSet,
    s: usize,
    rng: &mut R,
) -> Result<Vec<f64>> {
    if s == 0 {
        return Err(Error::InvalidInput("need ≥ 1 max-value sample".into()));
    }
    let f_plus = data
        .outputs()
        .iter()
        .cloned()
        .fold(f64::NEG_INFINITY, f64::max);

    let grid_seed = rng.random::<u64>();
    let mut candidates: Vec<Vec<f64>> = data.inputs().to_vec();
    candidates.extend(
        sobol_init(data.dim(), MAX_VALUE_CANDIDATES, data.bounds(), grid_seed)?.points,
    );

    // regime choice by CRP mass over existing regimes (the sampler draws
    // function values, so the unopened regime contributes nothing here)
    let counts = state.counts();
    let total: usize = counts.iter().sum();
    let probs: Vec<f64> = counts.iter().map(|&c| c as f64 / total as f64).collect();

    let mut per_regime: HashMap<usize, Vec<(f64, f64)>> = HashMap::new();
    let mut out = Vec::with_capacity(s);
    for _ in 0..s {
        let k = crate::util::sample_index(&probs, rng);
        let preds = per_regime.entry(k).or_insert_with(|| {
            let cache = &state.regimes()[k].cache;
            candidates
                .iter()
                .map(|c| {
                    let (mu, var) = cache.predict(data, c);
                    (mu, var.sqrt().max(1e-9))
                })
                .collect()
        });
        let (q25, q50, q75) = max_cdf_quantiles(preds);
        // Gumbel by quantile matching: y_p = a − b·ln(−ln p)
        let b = ((q75 - q25) / (LN_LN_4 - LN_LN_4_3)).max(1e-12);
        let a = q50 + b * LN_LN_2;
        let u: f64 = rng.random::<f64>().clamp(1e-12, 1.0 - 1e-12);
        let draw = a - b * (-u.ln()).ln();
        out.push(draw.max(f_plus + 1e-6));
    }
    Ok(out)
}

const LN_LN_4: f64 = 0.326_634_259_978_281; // ln(ln 4)
const LN_LN_4_3: f64 = -1.245_899_323_707_238_2; // ln(ln(4/3))
const LN_LN_2: f64 = -0.366_512_920_581_664_35; // ln(ln 2)

/// 25/50/75% quantiles of max_j f(x_j) treating candidates as independent
/// Gaussians: solve Π_j Φ((y−μ_j)/σ_j) = p by bisection.
fn max_cdf_quantiles(preds: &[(f64, f64)]) -> (f64, f64, f64) {
    let lo = preds
        .iter()
        .map(|&(mu, sd)| mu - 8.0 * sd)
        .fold(f64::INFINITY, f64::min);
    let hi = preds
        .iter()
        .map(|&(mu, sd)| mu + 8.0 * sd)
        .fold(f64::NEG_INFINITY, f64::max);
    let ln_cdf = |y: f64| -> f64 {
        preds
            .iter()
            .map(|&(mu, sd)| norm_cdf((y - mu) / sd).max(1e-300).ln())
            .sum()
    };
    let solve = |p: f64| -> f64 {
        let target = p.ln();
        let (mut a, mut b) = (lo, hi);
        for _ in 0..60 {
            let mid = 0.5 * (a + b);
            if ln_cdf(mid) < target {
                a = mid;
            } else {
                b = mid;
            }
        }
        0.5 * (a + b)
    };
    (solve(0.25), solve(0.5), solve(0.75))
}

/// Result of a multi-start acquisition maximization.
#[derive(Clone, Debug)]
pub struct OptimizedPoint {
    pub point: Vec<f64>,
    pub value: f64,
    /// True when no start produced a finite value and the first start was
    /// returned unranked.
    pub fallback: bool,
}

/// Maximize a scalar field over the box from a hybrid start set: `restarts`
/// uniform points, each regime's member centroid, and five Gaussian
/// perturbations (per-dimension std 0.05) of the incumbent, all clipped to
/// bounds. Ties keep the earliest start.
pub fn optimize_acquisition<F, R>(
    acq: &F,
    bounds: &[(f64, f64)],
    restarts: usize,
    state: &RegimeState,
    data: &ObservationSet,
    incumbent_x: &[f64],
    rng: &mut R,
) -> OptimizedPoint
where
    F: Fn(&[f64]) -> f64,
    R: Rng + ?Sized,
{
    assert!(restarts >= 1, "need ≥ 1 restart");
    let dim = bounds.len();
    let mut starts: Vec<Vec<f64>> = Vec::with_capacity(restarts + state.regime_count() + 5);
    for _ in 0..restarts {
        starts.push(
            bounds
                .iter()
                .map(|&(lo, hi)| rng.random_range(lo..hi))
                .collect(),
        );
    }
    for regime in state.regimes() {
        let members = regime.cache.members();
        let mut centroid = vec![0.0; dim];
        for &i in members {
            for (c, v) in centroid.iter_mut().zip(data.input(i)) {
                *c += v / members.len() as f64;
            }
        }
        clip(&mut centroid, bounds);
        starts.push(centroid);
    }
    for _ in 0..5 {
        let mut p: Vec<f64> = incumbent_x
            .iter()
            .map(|&xi| {
                let z: f64 = StandardNormal.sample(rng);
                xi + 0.05 * z
            })
            .collect();
        clip(&mut p, bounds);
        starts.push(p);
    }

    let opts = BoxOptOptions::default();
    let mut best: Option<(Vec<f64>, f64)> = None;
    for start in &starts {
        let (x, v) = maximize_from(acq, start, bounds, &opts);
        if v.is_finite() && best.as_ref().is_none_or(|(_, bv)| v > *bv) {
            best = Some((x, v));
        }
    }
    match best {
        Some((point, value)) => OptimizedPoint { point, value, fallback: false },
        None => OptimizedPoint { point: starts[0].clone(), value: f64::NAN, fallback: true },
    }
}

fn clip(x: &mut [f64], bounds: &[(f64, f64)]) {
    for (xi, &(lo, hi)) in x.iter_mut().zip(bounds) {
        *xi = xi.clamp(lo, hi);
    }
}

/// A random Fourier feature map approximating the SE kernel: D features
/// φ_j(x) = √(2σ²_f/D)·cos(ω_jᵀx + b_j) with ω ~ N(0, I/ℓ²), b ~ U[0, 2π).
struct RffMap {
    omega: DMatrix<f64>,
    phase: DVector<f64>,
    scale: f64,
}

impl RffMap {
    fn draw<R: Rng + ?Sized>(
        theta: &KernelHyperparams,
        dim: usize,
        n_features: usize,
        rng: &mut R,
    ) -> Self {
        let ell = theta.length_scale();
        let omega = DMatrix::from_fn(n_features, dim, |_, _| {
            let z: f64 = StandardNormal.sample(rng);
            z / ell
        });
        let phase =
            DVector::from_fn(n_features, |_, _| rng.random::<f64>() * std::f64::consts::TAU);
        let scale = (2.0 * theta.signal_variance() / n_features as f64).sqrt();
        Self { omega, phase, scale }
    }

    fn features(&self, x: &[f64]) -> DVector<f64> {
        let xv = DVector::from_column_slice(x);
        let mut f = &self.omega * xv + &self.phase;
        for v in f.iter_mut() {
            *v = self.scale * v.cos();
        }
        f
    }
}

/// Thompson sampling: choose a regime from the CRP masses (including the
/// unopened one), draw a random-feature path from that regime's posterior
/// (or from the prior under a fresh base-measure draw), and return the
/// path's in-bounds maximizer found by the multi-start optimizer.
pub fn thompson_sample<R: Rng + ?Sized>(
    state: &RegimeState,
    data: &ObservationSet,
    bounds: &[(f64, f64)],
    ctx: &AcquisitionContext,
    g0: &BaseMeasure,
    restarts: usize,
    rng: &mut R,
) -> Result<Vec<f64>> {
    ctx.validate()?;
    let probs = crp_prior_probs(&state.counts(), state.alpha());
    let choice = crate::util::sample_index(&probs, rng);
    let dim = bounds.len();
    let d_feat = ctx.rff_features;

    let (map, weights) = if choice < state.regime_count() {
        let regime = &state.regimes()[choice];
        let map = RffMap::draw(&regime.theta, dim, d_feat, rng);
        let members = regime.cache.members();
        let n = members.len();
        let mut phi = DMatrix::zeros(n, d_feat);
        for (row, &i) in members.iter().enumerate() {
            phi.set_row(row, &map.features(data.input(i)).transpose());
        }
        let y = DVector::from_iterator(n, members.iter().map(|&i| data.output(i)));
        let sn2 = regime.theta.noise_variance();
        let a = phi.transpose() * &phi + DMatrix::identity(d_feat, d_feat) * sn2;
        let chol = nalgebra::Cholesky::new(a).ok_or_else(|| {
            Error::Numerical("random-feature normal equations are not positive definite".into())
        })?;
        let mean = chol.solve(&(phi.transpose() * y));
        let z = DVector::from_fn(d_feat, |_, _| StandardNormal.sample(rng));
        // cov = σ²_n A⁻¹, so a sample is mean + σ_n L⁻ᵀ z
        let lt = chol.l().transpose();
        let perturb = lt
            .solve_upper_triangular(&z)
            .ok_or_else(|| Error::Numerical("triangular solve failed in path sampling".into()))?;
        (map, mean + perturb * sn2.sqrt())
    } else {
        let theta = g0.sample(rng);
        let map = RffMap::draw(&theta, dim, d_feat, rng);
        let weights = DVector::from_fn(d_feat, |_, _| StandardNormal.sample(rng));
        (map, weights)
    };

    let path = move |x: &[f64]| map.features(x).dot(&weights);
    let incumbent = incumbent_input(data);
    let opt = optimize_acquisition(&path, bounds, restarts, state, data, &incumbent, rng);
    Ok(opt.point)
}

/// Input of the best observed output.
pub fn incumbent_input(data: &ObservationSet) -> Vec<f64> {
    let mut best = 0;
    for i in 1..data.len() {
        if data.output(i) > data.output(best) {
            best = i;
        }
    }
    data.input(best).to_vec()
}
